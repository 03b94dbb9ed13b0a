//! Weighted kernel mixtures: vanilla KDE and evaluation on points and grids.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, kernel_eval, KernelConfig, SampleSet};
use crate::kirwls::WeightVector;

/// A kernel mixture `p(x) = sum_j w_j k(x_j, x)`.
///
/// Vanilla KDE is the uniform-weight special case; robust fits supply
/// non-uniform weights. Joint mixtures over pairs are represented by
/// concatenating the pair into one atom vector, so no separate joint type
/// exists.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    atoms: SampleSet,
    weights: WeightVector,
    kernel: KernelConfig,
}

impl DensityEstimate {
    pub fn new(atoms: SampleSet, weights: WeightVector, kernel: KernelConfig) -> Result<Self> {
        if weights.len() != atoms.n() {
            return Err(Error::invalid(format!(
                "{} weights for {} atoms",
                weights.len(),
                atoms.n()
            )));
        }
        Ok(DensityEstimate { atoms, weights, kernel })
    }

    pub fn atoms(&self) -> &SampleSet {
        &self.atoms
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    /// Mixture density at a single point.
    pub fn density_at(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.atoms.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, atoms have dimension {}",
                x.len(),
                self.atoms.dim()
            )));
        }
        let w = self.weights.as_array();
        let mut total = 0.0;
        for j in 0..self.atoms.n() {
            total += w[j] * kernel_eval(self.atoms.row(j), x, &self.kernel)?;
        }
        Ok(total)
    }

    /// Mixture density on a rectangular grid, row-major over the axes in
    /// order. Only one- and two-dimensional grids are supported; higher
    /// dimensions are evaluated pointwise via [`Self::density_at`].
    pub fn density_on_grid(&self, axes: &[AxisSpec]) -> Result<DensityGrid> {
        let dim = self.atoms.dim();
        if dim > 2 {
            return Err(Error::UnsupportedDimension {
                dim,
                context: "grid export supports one or two dimensions",
            });
        }
        if axes.len() != dim {
            return Err(Error::invalid(format!(
                "{} axis specs for atoms of dimension {dim}",
                axes.len()
            )));
        }
        let coords: Vec<Vec<f64>> = axes.iter().map(AxisSpec::coords).collect();
        let n_points: usize = coords.iter().map(Vec::len).product();
        let mut points = Array2::zeros((n_points, dim));
        match dim {
            1 => {
                for (i, &x) in coords[0].iter().enumerate() {
                    points[[i, 0]] = x;
                }
            }
            2 => {
                let ny = coords[1].len();
                for (ix, &x) in coords[0].iter().enumerate() {
                    for (iy, &y) in coords[1].iter().enumerate() {
                        points[[ix * ny + iy, 0]] = x;
                        points[[ix * ny + iy, 1]] = y;
                    }
                }
            }
            _ => unreachable!(),
        }
        let points = SampleSet::new(points)?;
        let cross = cross_kernel(&points, &self.atoms, &self.kernel, false)?;
        let values = cross.dot(self.weights.as_array()).to_vec();
        Ok(DensityGrid { axes: coords, values })
    }
}

/// Uniform-weight mixture over the samples: the plain kernel density
/// estimate.
pub fn kde_fit(xs: SampleSet, cfg: KernelConfig) -> DensityEstimate {
    // SampleSet guarantees n >= 1, so uniform weights always exist.
    let weights = WeightVector::uniform(xs.n()).expect("sample set is non-empty");
    DensityEstimate { atoms: xs, weights, kernel: cfg }
}

/// Evenly spaced grid coordinates along one axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    min: f64,
    max: f64,
    count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || max <= min {
            return Err(Error::invalid(format!(
                "axis range [{min}, {max}] must be finite with max > min"
            )));
        }
        if count < 2 {
            return Err(Error::invalid(format!("axis needs at least 2 points, got {count}")));
        }
        Ok(AxisSpec { min, max, count })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Spacing between consecutive coordinates.
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.count).map(|i| self.min + i as f64 * step).collect()
    }
}

/// Density values on a rectangular grid, row-major over `axes` in order
/// (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn unit_cfg() -> KernelConfig {
        KernelConfig::new(1.0).unwrap()
    }

    #[test]
    fn uniform_weights_from_fit() {
        let xs = SampleSet::new(array![[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let est = kde_fit(xs, unit_cfg());
        for &w in est.weights().as_array() {
            assert_eq!(w, 0.25);
        }
        let one = SampleSet::new(array![[5.0]]).unwrap();
        let est = kde_fit(one, unit_cfg());
        assert_eq!(est.weights().as_array()[0], 1.0);
    }

    #[test]
    fn density_at_atom_is_one_unnormalized() {
        let xs = SampleSet::new(array![[2.0, -1.0]]).unwrap();
        let est = kde_fit(xs, unit_cfg());
        assert_eq!(est.density_at(array![2.0, -1.0].view()).unwrap(), 1.0);
    }

    #[test]
    fn two_atom_midpoint_value() {
        let xs = SampleSet::new(array![[-1.0], [1.0]]).unwrap();
        let est = kde_fit(xs, unit_cfg());
        assert_relative_eq!(
            est.density_at(array![0.0].view()).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn density_at_checks_dimension() {
        let xs = SampleSet::new(array![[0.0, 0.0]]).unwrap();
        let est = kde_fit(xs, unit_cfg());
        assert!(est.density_at(array![0.0].view()).is_err());
    }

    #[test]
    fn grid_matches_analytic_single_atom() {
        let xs = SampleSet::new(array![[0.0]]).unwrap();
        let est = kde_fit(xs, unit_cfg());
        let grid = est.density_on_grid(&[AxisSpec::new(-1.0, 1.0, 3).unwrap()]).unwrap();
        let e = (-0.5f64).exp();
        assert_eq!(grid.axes[0], vec![-1.0, 0.0, 1.0]);
        assert_relative_eq!(grid.values[0], e, max_relative = 1e-12);
        assert_relative_eq!(grid.values[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(grid.values[2], e, max_relative = 1e-12);
    }

    #[test]
    fn grid_rejects_high_dimension() {
        let xs = SampleSet::new(array![[0.0, 0.0, 0.0]]).unwrap();
        let est = kde_fit(xs, unit_cfg());
        let ax = AxisSpec::new(-1.0, 1.0, 3).unwrap();
        let err = est.density_on_grid(&[ax, ax, ax]).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDimension { dim: 3, .. }));
    }

    #[test]
    fn axis_spec_validation() {
        assert!(AxisSpec::new(0.0, 0.0, 3).is_err());
        assert!(AxisSpec::new(1.0, 0.0, 3).is_err());
        assert!(AxisSpec::new(0.0, 1.0, 1).is_err());
        assert!(AxisSpec::new(f64::NEG_INFINITY, 1.0, 3).is_err());
    }
}
