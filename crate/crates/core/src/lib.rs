//! Robust kernel density estimation and kernel attention.
//!
//! The crate provides Gaussian kernels and Gram matrices ([`kernels`]),
//! robust losses ([`robust_loss`]), weighted kernel mixtures ([`kde`]),
//! the reweighted simplex solver that fits robust mixture weights
//! ([`kirwls`]), and softmax, kernel, and robust kernel attention built on
//! top of them ([`attention`]).

pub mod attention;
pub mod error;
pub mod kde;
pub mod kernels;
pub mod kirwls;
pub mod robust_loss;

pub use attention::{
    attend, causal_mask, compute_robust_weights, kde_attention, multi_head_attention,
    normalize_rows, project, rkde_attention, rkde_attention_with_weights, softmax_attention,
    stable_row_softmax, AttentionInputs, AttentionMechanism, AttentionOutput, ProjectionSet,
    RkdeLoss, RkdeOptions, RobustAttentionWeights,
};
pub use error::{Error, Result};
pub use kde::{kde_fit, AxisSpec, DensityEstimate, DensityGrid};
pub use kernels::{cross_kernel, gram_matrix, kernel_eval, KernelConfig, SampleSet};
pub use kirwls::{
    gateaux_residual_norm, kirwls_fit, kirwls_fit_gram, kirwls_iterate, kirwls_step, objective,
    residual_quantile, rkhs_residuals, KirwlsOptions, KirwlsReport, WeightVector, SIMPLEX_TOL,
};
pub use robust_loss::RobustLoss;
