//! Isotropic Gaussian kernels over row-major sample sets.
//!
//! The kernel between points `x` and `y` is
//!
//! ```text
//! k(x, y) = c * exp(-||x - y||^2 / (2 sigma_sq))
//! ```
//!
//! with `c = (2 pi sigma_sq)^(-D/2)` when the configuration is normalized
//! (so the kernel integrates to one over R^D) and `c = 1` otherwise.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Bandwidth and normalization choice for a Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    sigma_sq: f64,
    normalized: bool,
}

impl KernelConfig {
    /// Unnormalized kernel (`k(x, x) = 1`) with the given squared bandwidth.
    pub fn new(sigma_sq: f64) -> Result<Self> {
        if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
            return Err(Error::invalid(format!(
                "sigma_sq must be finite and positive, got {sigma_sq}"
            )));
        }
        Ok(KernelConfig { sigma_sq, normalized: false })
    }

    /// Kernel carrying the Gaussian density normalizer `(2 pi sigma_sq)^(-D/2)`.
    pub fn normalized(sigma_sq: f64) -> Result<Self> {
        let mut cfg = KernelConfig::new(sigma_sq)?;
        cfg.normalized = true;
        Ok(cfg)
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Multiplicative normalizer for points in `dim` dimensions.
    pub fn normalizer(&self, dim: usize) -> f64 {
        if self.normalized {
            (2.0 * std::f64::consts::PI * self.sigma_sq).powf(-(dim as f64) / 2.0)
        } else {
            1.0
        }
    }

    /// `ln` of [`Self::normalizer`], for log-space evaluation.
    pub fn log_normalizer(&self, dim: usize) -> f64 {
        if self.normalized {
            -(dim as f64) / 2.0 * (2.0 * std::f64::consts::PI * self.sigma_sq).ln()
        } else {
            0.0
        }
    }
}

/// A set of `N >= 1` points in `R^D`, one per row, all coordinates finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Array2<f64>,
}

impl SampleSet {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::invalid("sample set must contain at least one point"));
        }
        if data.ncols() == 0 {
            return Err(Error::invalid("sample points must have at least one coordinate"));
        }
        if let Some((idx, _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "sample set contains a non-finite coordinate at row {}, column {}",
                idx.0, idx.1
            )));
        }
        Ok(SampleSet { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }
}

/// Kernel value between two points of equal dimension.
pub fn kernel_eval(x: ArrayView1<f64>, y: ArrayView1<f64>, cfg: &KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "kernel arguments have mismatched dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("kernel arguments must have at least one coordinate"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel arguments must be finite"));
    }
    let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(cfg.normalizer(x.len()) * (-sq / (2.0 * cfg.sigma_sq())).exp())
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`,
/// via the expansion `||a_i||^2 + ||b_j||^2 - 2 a_i . b_j`, clamped at zero
/// so cancellation can never produce a negative distance.
pub(crate) fn squared_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let a_sq: Array1<f64> = a.map_axis(Axis(1), |row| row.dot(&row));
    let b_sq: Array1<f64> = b.map_axis(Axis(1), |row| row.dot(&row));
    let mut d = a.dot(&b.t());
    for ((i, j), v) in d.indexed_iter_mut() {
        *v = (a_sq[i] + b_sq[j] - 2.0 * *v).max(0.0);
    }
    d
}

/// N x N matrix of kernel values between all pairs of rows of `xs`.
///
/// The result is exactly symmetric and its diagonal is exactly the
/// zero-distance kernel value: off-diagonal entries are computed once and
/// mirrored, and the diagonal is written directly rather than through the
/// distance expansion.
pub fn gram_matrix(xs: &SampleSet, cfg: &KernelConfig) -> Array2<f64> {
    let n = xs.n();
    let norm = cfg.normalizer(xs.dim());
    let scale = -1.0 / (2.0 * cfg.sigma_sq());
    let d = squared_distances(xs.data().view(), xs.data().view());
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        g[[i, i]] = norm;
        for j in (i + 1)..n {
            let v = norm * (scale * d[[i, j]]).exp();
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

/// Kernel values between every row of `qs` and every row of `ks`.
///
/// With `log_space` the entries are `ln k(q_i, k_j)`, which stays finite at
/// separations where the kernel itself underflows to zero.
pub fn cross_kernel(
    qs: &SampleSet,
    ks: &SampleSet,
    cfg: &KernelConfig,
    log_space: bool,
) -> Result<Array2<f64>> {
    if qs.dim() != ks.dim() {
        return Err(Error::invalid(format!(
            "query dimension {} does not match key dimension {}",
            qs.dim(),
            ks.dim()
        )));
    }
    let scale = -1.0 / (2.0 * cfg.sigma_sq());
    let mut d = squared_distances(qs.data().view(), ks.data().view());
    if log_space {
        let log_norm = cfg.log_normalizer(qs.dim());
        d.mapv_inplace(|sq| scale * sq + log_norm);
    } else {
        let norm = cfg.normalizer(qs.dim());
        d.mapv_inplace(|sq| norm * (scale * sq).exp());
    }
    Ok(d)
}
