//! Experiment configuration: a flat JSON document, one file per run.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use rkde_core::{residual_quantile, AxisSpec, RkdeLoss, RobustLoss};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DensityContamination,
    AttentionContamination,
    EquivalenceCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::DensityContamination => "density_contamination",
            ExperimentKind::AttentionContamination => "attention_contamination",
            ExperimentKind::EquivalenceCheck => "equivalence_check",
        }
    }
}

/// One experiment run. The seed fully determines all sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::n_inliers")]
    pub n_inliers: usize,
    #[serde(default = "defaults::n_outliers")]
    pub n_outliers: usize,
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    #[serde(default)]
    pub inlier_params: InlierParams,
    #[serde(default)]
    pub outlier_params: OutlierParams,
    #[serde(default)]
    pub sigma_sq: SigmaSpec,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<AxisConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// Equivalence check only: normalize keys before comparing mechanisms.
    /// The identity being checked requires unit-norm keys; turning this
    /// off demonstrates it failing.
    #[serde(default = "defaults::normalize_keys")]
    pub normalize_keys: bool,
}

mod defaults {
    pub fn n_inliers() -> usize {
        200
    }
    pub fn n_outliers() -> usize {
        20
    }
    pub fn dim() -> usize {
        2
    }
    pub fn steps() -> usize {
        1
    }
    pub fn quantile() -> f64 {
        0.5
    }
    pub fn normalize_keys() -> bool {
        true
    }
    pub fn gamma_shape() -> f64 {
        2.0
    }
    pub fn gamma_scale() -> f64 {
        1.5
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_inliers == 0 {
            return Err(CliError::Config("n_inliers must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(CliError::Config("dim must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(CliError::Config("steps must be at least 1".into()));
        }
        self.sigma_sq.resolve(self.dim)?;
        self.loss.validate()?;
        self.inlier_params.validate(self.dim)?;
        self.outlier_params.validate()?;
        if let Some(axes) = &self.grid {
            for ax in axes {
                ax.to_axis_spec()?;
            }
        }
        Ok(())
    }

    pub fn inlier_mean(&self) -> Vec<f64> {
        match &self.inlier_params.mean {
            Some(m) => m.clone(),
            None => vec![0.0; self.dim],
        }
    }

    pub fn inlier_cov_diag(&self) -> Vec<f64> {
        match &self.inlier_params.cov_diag {
            Some(c) => c.clone(),
            None => vec![1.0; self.dim],
        }
    }

    /// Grid axes for density runs; defaults to a window covering the
    /// standard inlier bulk and the positive outlier tail in each
    /// dimension.
    pub fn grid_axes(&self) -> Result<Vec<AxisSpec>, CliError> {
        match &self.grid {
            Some(axes) => axes.iter().map(AxisConfig::to_axis_spec).collect(),
            None => (0..self.dim)
                .map(|_| AxisSpec::new(-6.0, 9.0, 60).map_err(CliError::from))
                .collect(),
        }
    }
}

/// Mean and diagonal covariance of the inlier normal; zeros and ones when
/// omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlierParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_diag: Option<Vec<f64>>,
}

impl InlierParams {
    fn validate(&self, dim: usize) -> Result<(), CliError> {
        if let Some(m) = &self.mean {
            if m.len() != dim {
                return Err(CliError::Config(format!(
                    "inlier mean has {} entries for dim {dim}",
                    m.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config("inlier mean must be finite".into()));
            }
        }
        if let Some(c) = &self.cov_diag {
            if c.len() != dim {
                return Err(CliError::Config(format!(
                    "inlier cov_diag has {} entries for dim {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(CliError::Config(
                    "inlier cov_diag entries must be finite and positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-coordinate gamma parameters for the contaminating draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierParams {
    #[serde(default = "defaults::gamma_shape")]
    pub shape: f64,
    #[serde(default = "defaults::gamma_scale")]
    pub scale: f64,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams { shape: defaults::gamma_shape(), scale: defaults::gamma_scale() }
    }
}

impl OutlierParams {
    fn validate(&self) -> Result<(), CliError> {
        if !self.shape.is_finite() || self.shape <= 0.0 || !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(CliError::Config(format!(
                "gamma shape {} and scale {} must be finite and positive",
                self.shape, self.scale
            )));
        }
        Ok(())
    }
}

/// Bandwidth: an explicit positive number, or "auto" for `sqrt(dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Keyword(String),
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec::Keyword("auto".into())
    }
}

impl SigmaSpec {
    pub fn resolve(&self, dim: usize) -> Result<f64, CliError> {
        match self {
            SigmaSpec::Value(v) => {
                if !v.is_finite() || *v <= 0.0 {
                    return Err(CliError::Config(format!(
                        "sigma_sq must be finite and positive, got {v}"
                    )));
                }
                Ok(*v)
            }
            SigmaSpec::Keyword(k) if k == "auto" => Ok((dim as f64).sqrt()),
            SigmaSpec::Keyword(k) => Err(CliError::Config(format!(
                "sigma_sq must be a positive number or \"auto\", got \"{k}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Huber,
    LeastSquares,
}

/// Loss selection. A Huber threshold may be given explicitly via `a`;
/// when absent it is set to the `quantile`-th uniform-weight residual of
/// whichever Gram matrix the fit runs on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default = "defaults::quantile")]
    pub quantile: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec { kind: LossKind::Huber, a: None, quantile: defaults::quantile() }
    }
}

impl LossSpec {
    fn validate(&self) -> Result<(), CliError> {
        if let Some(a) = self.a {
            if !a.is_finite() || a <= 0.0 {
                return Err(CliError::Config(format!(
                    "loss threshold a must be finite and positive, got {a}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(CliError::Config(format!(
                "loss quantile must lie in [0, 1], got {}",
                self.quantile
            )));
        }
        Ok(())
    }

    /// Concrete loss for a fit on this Gram matrix.
    pub fn resolve_for_gram(&self, gram: &Array2<f64>) -> Result<RobustLoss, CliError> {
        match (self.kind, self.a) {
            (LossKind::LeastSquares, _) => Ok(RobustLoss::LeastSquares),
            (LossKind::Huber, Some(a)) => Ok(RobustLoss::huber(a)?),
            (LossKind::Huber, None) => {
                let t = residual_quantile(gram, self.quantile)?;
                Ok(RobustLoss::huber(t.max(1e-12))?)
            }
        }
    }

    /// Loss rule for the attention weight fits, which resolve quantile
    /// thresholds per Gram matrix internally.
    pub fn to_rkde_loss(&self) -> Result<RkdeLoss, CliError> {
        match (self.kind, self.a) {
            (LossKind::LeastSquares, _) => Ok(RkdeLoss::Fixed(RobustLoss::LeastSquares)),
            (LossKind::Huber, Some(a)) => Ok(RkdeLoss::Fixed(RobustLoss::huber(a)?)),
            (LossKind::Huber, None) => Ok(RkdeLoss::huber_at_quantile(self.quantile)?),
        }
    }
}

/// One grid axis: `count` evenly spaced points spanning `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisConfig {
    pub fn to_axis_spec(&self) -> Result<AxisSpec, CliError> {
        Ok(AxisSpec::new(self.min, self.max, self.count)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "density_contamination"}"#).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::DensityContamination);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.n_inliers, 200);
        assert_eq!(cfg.n_outliers, 20);
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.steps, 1);
        assert!(cfg.normalize_keys);
        assert_eq!(cfg.sigma_sq.resolve(2).unwrap(), 2.0f64.sqrt());
        assert_eq!(cfg.outlier_params.shape, 2.0);
        assert_eq!(cfg.outlier_params.scale, 1.5);
        assert_eq!(cfg.grid_axes().unwrap().len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "bandwith": 2.0}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn sigma_accepts_number_or_auto() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "equivalence_check", "sigma_sq": 2.5}"#,
        )
        .unwrap();
        assert_eq!(cfg.sigma_sq.resolve(4).unwrap(), 2.5);
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "equivalence_check", "sigma_sq": "auto", "dim": 16}"#,
        )
        .unwrap();
        assert_eq!(cfg.sigma_sq.resolve(16).unwrap(), 4.0);
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "equivalence_check", "sigma_sq": "wide"}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "equivalence_check", "sigma_sq": -1.0}"#
        )
        .is_err());
    }

    #[test]
    fn invalid_counts_and_params_are_rejected() {
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "n_inliers": 0}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "steps": 0}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "outlier_params": {"shape": -2.0}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "inlier_params": {"mean": [0.0]}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "loss": {"kind": "huber", "a": 0.0}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "loss": {"kind": "huber", "quantile": 1.5}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"experiment": "density_contamination", "grid": [{"min": 0.0, "max": 0.0, "count": 5}]}"#
        )
        .is_err());
    }

    #[test]
    fn loss_resolution() {
        let gram = ndarray::array![[1.0, 0.2], [0.2, 1.0]];
        let spec = LossSpec { kind: LossKind::Huber, a: Some(0.7), quantile: 0.5 };
        assert_eq!(spec.resolve_for_gram(&gram).unwrap(), RobustLoss::huber(0.7).unwrap());
        let spec = LossSpec { kind: LossKind::Huber, a: None, quantile: 0.5 };
        let resolved = spec.resolve_for_gram(&gram).unwrap();
        let expected = rkde_core::residual_quantile(&gram, 0.5).unwrap();
        assert_eq!(resolved, RobustLoss::huber(expected).unwrap());
        let spec = LossSpec { kind: LossKind::LeastSquares, a: None, quantile: 0.5 };
        assert_eq!(spec.resolve_for_gram(&gram).unwrap(), RobustLoss::LeastSquares);
    }

    #[test]
    fn config_round_trips_through_json() {
        let text = r#"{
            "experiment": "attention_contamination",
            "seed": 7,
            "n_inliers": 29,
            "n_outliers": 3,
            "dim": 16,
            "outlier_params": {"shape": 2.0, "scale": 25.0},
            "sigma_sq": "auto",
            "loss": {"kind": "huber"},
            "steps": 1,
            "output_path": "out/attn"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let serialized = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&serialized).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.n_outliers, 3);
        assert_eq!(back.output_path.as_deref(), Some("out/attn"));
    }
}
