//! Loss functions applied to nonnegative residual magnitudes.

use crate::error::{Error, Result};

/// A robust loss `rho` together with its weight function `psi(x) = rho'(x) / x`.
///
/// `LeastSquares` weights every residual equally, so reweighting under it is
/// a no-op. `Huber` is quadratic up to `threshold` and linear beyond it,
/// which caps the influence of large residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustLoss {
    LeastSquares,
    Huber { threshold: f64 },
}

impl RobustLoss {
    pub fn huber(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(Error::invalid(format!(
                "Huber threshold must be finite and positive, got {threshold}"
            )));
        }
        Ok(RobustLoss::Huber { threshold })
    }

    /// Loss value at residual magnitude `x >= 0`.
    pub fn rho(&self, x: f64) -> Result<f64> {
        check_residual(x)?;
        Ok(match self {
            RobustLoss::LeastSquares => 0.5 * x * x,
            RobustLoss::Huber { threshold: a } => {
                if x <= *a {
                    0.5 * x * x
                } else {
                    a * x - 0.5 * a * a
                }
            }
        })
    }

    /// Weight function at residual magnitude `x >= 0`.
    ///
    /// `psi(0) = 1` for both variants; for Huber the weight decays as `a / x`
    /// past the threshold.
    pub fn psi(&self, x: f64) -> Result<f64> {
        check_residual(x)?;
        Ok(match self {
            RobustLoss::LeastSquares => 1.0,
            RobustLoss::Huber { threshold: a } => {
                if x <= *a {
                    1.0
                } else {
                    a / x
                }
            }
        })
    }
}

fn check_residual(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid(format!(
            "residual magnitude must be finite and nonnegative, got {x}"
        )));
    }
    Ok(())
}
