//! Iteratively reweighted fitting of kernel mixture weights.
//!
//! A weighted kernel mixture `p_w = sum_j w_j k(x_j, .)` lives in the
//! reproducing kernel Hilbert space of the kernel, so the distance from
//! each atom's kernel section to the mixture has a closed form in the Gram
//! matrix `G`:
//!
//! ```text
//! r_j^2 = G_jj - 2 (G w)_j + w' G w
//! ```
//!
//! Minimizing `sum_j rho(r_j)` over the probability simplex has the fixed
//! point `w_j proportional to psi(r_j)`, and iterating
//!
//! ```text
//! w_j  <-  psi(r_j) / sum_m psi(r_m)
//! ```
//!
//! from uniform weights converges to it for the losses in
//! [`RobustLoss`](crate::RobustLoss). Each update solves the quadratic
//! surrogate obtained by freezing the weights `psi(r_j)`, so the objective
//! never increases along the iteration.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelConfig, SampleSet};
use crate::robust_loss::RobustLoss;

/// Absolute tolerance for the simplex constraints enforced by [`WeightVector`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Mixture weights constrained to the probability simplex:
/// every entry is nonnegative and the entries sum to one within
/// [`SIMPLEX_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Array1<f64>,
}

impl WeightVector {
    pub fn new(w: Array1<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weight vector must be non-empty"));
        }
        if let Some((j, v)) = w.indexed_iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!(
                "weight {v} at index {j} is negative or non-finite"
            )));
        }
        let sum: f64 = w.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "weights sum to {sum}, which is off the simplex by more than {SIMPLEX_TOL}"
            )));
        }
        Ok(WeightVector { w })
    }

    /// `n` equal weights `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("weight vector must be non-empty"));
        }
        WeightVector::new(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.w
    }
}

fn check_gram(gram: &Array2<f64>) -> Result<()> {
    if gram.nrows() == 0 || gram.nrows() != gram.ncols() {
        return Err(Error::invalid(format!(
            "Gram matrix must be square and non-empty, got {} x {}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Gram matrix contains a non-finite entry"));
    }
    Ok(())
}

fn check_gram_weights(gram: &Array2<f64>, weights: &WeightVector) -> Result<()> {
    check_gram(gram)?;
    if gram.nrows() != weights.len() {
        return Err(Error::invalid(format!(
            "Gram matrix is {} x {} but there are {} weights",
            gram.nrows(),
            gram.ncols(),
            weights.len()
        )));
    }
    Ok(())
}

/// Hilbert-space distance from each kernel atom to the weighted mixture.
///
/// Squared distances are clamped at zero before the square root; the
/// expansion can go slightly negative through cancellation when the mixture
/// sits on top of an atom.
pub fn rkhs_residuals(gram: &Array2<f64>, weights: &WeightVector) -> Result<Array1<f64>> {
    check_gram_weights(gram, weights)?;
    let w = weights.as_array();
    let gw = gram.dot(w);
    let quad = w.dot(&gw);
    let mut r = Array1::zeros(w.len());
    for j in 0..w.len() {
        r[j] = (gram[[j, j]] - 2.0 * gw[j] + quad).max(0.0).sqrt();
    }
    Ok(r)
}

/// Mean robust loss of the residuals: `J(w) = (1/N) sum_j rho(r_j)`.
pub fn objective(gram: &Array2<f64>, weights: &WeightVector, loss: &RobustLoss) -> Result<f64> {
    let r = rkhs_residuals(gram, weights)?;
    let mut total = 0.0;
    for &rj in r.iter() {
        total += loss.rho(rj)?;
    }
    Ok(total / r.len() as f64)
}

/// One reweighting update: `w_j <- psi(r_j) / sum_m psi(r_m)`.
pub fn kirwls_step(
    gram: &Array2<f64>,
    weights: &WeightVector,
    loss: &RobustLoss,
) -> Result<WeightVector> {
    let r = rkhs_residuals(gram, weights)?;
    let mut psi = Array1::zeros(r.len());
    for (j, &rj) in r.iter().enumerate() {
        psi[j] = loss.psi(rj)?;
    }
    let sum = psi.sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::numerical(format!(
            "psi-weight normalizer is {sum}; all weights vanished or overflowed"
        )));
    }
    psi.mapv_inplace(|p| p / sum);
    WeightVector::new(psi)
}

/// Runs exactly `steps` reweighting updates from `init` with no
/// convergence test. Used where a fixed iteration budget is part of the
/// contract rather than a tolerance.
pub fn kirwls_iterate(
    gram: &Array2<f64>,
    loss: &RobustLoss,
    init: WeightVector,
    steps: usize,
) -> Result<WeightVector> {
    check_gram_weights(gram, &init)?;
    let mut w = init;
    for k in 1..=steps {
        w = kirwls_step(gram, &w, loss)
            .map_err(|e| Error::numerical(format!("{e} (update {k} of {steps})")))?;
    }
    Ok(w)
}

/// Stopping rule and starting point for [`kirwls_fit_gram`].
#[derive(Debug, Clone)]
pub struct KirwlsOptions {
    /// Maximum number of reweighting updates.
    pub max_iter: usize,
    /// Converged when the max-norm change between consecutive weight
    /// vectors falls below this.
    pub tol: f64,
    /// Starting weights; uniform when absent.
    pub init: Option<WeightVector>,
}

impl Default for KirwlsOptions {
    fn default() -> Self {
        KirwlsOptions { max_iter: 100, tol: 1e-8, init: None }
    }
}

/// Outcome of an iteratively reweighted fit.
#[derive(Debug, Clone)]
pub struct KirwlsReport {
    pub weights: WeightVector,
    /// Number of reweighting updates performed.
    pub iterations: usize,
    /// Objective value before the first update and after each one;
    /// length is `iterations + 1`.
    pub objective_trace: Vec<f64>,
    pub final_residuals: Array1<f64>,
    /// Norm of the stationarity defect at the final weights; zero at an
    /// exact fixed point.
    pub gateaux_residual_norm: f64,
    pub converged: bool,
}

/// Fits mixture weights on a precomputed Gram matrix.
pub fn kirwls_fit_gram(
    gram: &Array2<f64>,
    loss: &RobustLoss,
    opts: &KirwlsOptions,
) -> Result<KirwlsReport> {
    check_gram(gram)?;
    if opts.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if !opts.tol.is_finite() || opts.tol <= 0.0 {
        return Err(Error::invalid(format!(
            "tol must be finite and positive, got {}",
            opts.tol
        )));
    }
    let mut w = match &opts.init {
        Some(init) => {
            check_gram_weights(gram, init)?;
            init.clone()
        }
        None => WeightVector::uniform(gram.nrows())?,
    };

    let mut trace = vec![objective(gram, &w, loss)?];
    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=opts.max_iter {
        let next = kirwls_step(gram, &w, loss)
            .map_err(|e| Error::numerical(format!("{e} (iterate {k})")))?;
        let delta = next
            .as_array()
            .iter()
            .zip(w.as_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        w = next;
        trace.push(objective(gram, &w, loss)?);
        iterations = k;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    let final_residuals = rkhs_residuals(gram, &w)?;
    let gateaux = gateaux_residual_norm(gram, &w, loss)?;
    Ok(KirwlsReport {
        weights: w,
        iterations,
        objective_trace: trace,
        final_residuals,
        gateaux_residual_norm: gateaux,
        converged,
    })
}

/// Fits mixture weights to a sample set under the given kernel.
pub fn kirwls_fit(
    xs: &SampleSet,
    cfg: &KernelConfig,
    loss: &RobustLoss,
    opts: &KirwlsOptions,
) -> Result<KirwlsReport> {
    let gram = gram_matrix(xs, cfg);
    kirwls_fit_gram(&gram, loss, opts)
}

/// Hilbert-space norm of the stationarity defect
/// `V(w) = (1/N) sum_j psi(r_j) (k_j - p_w)`.
///
/// `V(w)` is an element of the RKHS with coefficient vector
/// `c_j = psi(r_j)/N - (mean psi) w_j` over the kernel atoms, so its
/// squared norm is `c' G c`. A vanishing norm is necessary at a minimizer.
pub fn gateaux_residual_norm(
    gram: &Array2<f64>,
    weights: &WeightVector,
    loss: &RobustLoss,
) -> Result<f64> {
    let r = rkhs_residuals(gram, weights)?;
    let n = r.len() as f64;
    let mut psi = Array1::zeros(r.len());
    for (j, &rj) in r.iter().enumerate() {
        psi[j] = loss.psi(rj)?;
    }
    let mean_psi = psi.sum() / n;
    let w = weights.as_array();
    let c: Array1<f64> = Array1::from_shape_fn(r.len(), |j| psi[j] / n - mean_psi * w[j]);
    let sq = c.dot(&gram.dot(&c));
    Ok(sq.max(0.0).sqrt())
}

/// Residual quantile under uniform weights, by linear interpolation of the
/// order statistics. Useful for setting a Huber threshold from the data's
/// own residual scale.
pub fn residual_quantile(gram: &Array2<f64>, quantile: f64) -> Result<f64> {
    check_gram(gram)?;
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::invalid(format!(
            "quantile must lie in [0, 1], got {quantile}"
        )));
    }
    let uniform = WeightVector::uniform(gram.nrows())?;
    let mut r: Vec<f64> = rkhs_residuals(gram, &uniform)?.to_vec();
    r.sort_by(|a, b| a.total_cmp(b));
    let pos = quantile * (r.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(r[lo] + frac * (r[hi] - r[lo]))
}
