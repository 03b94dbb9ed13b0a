//! Contaminated sample generation: a diagonal-covariance normal bulk with
//! rows of positive gamma draws appended.

use ndarray::Array2;

use rkde_core::SampleSet;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::rng::PortableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Inlier,
    Outlier,
}

/// Draws `n_inliers` rows from the configured normal followed by
/// `n_outliers` rows of independent gamma coordinates. Row order is
/// deterministic: inliers first, then outliers, each filled
/// coordinate-by-coordinate.
pub fn sample_contaminated(
    cfg: &ExperimentConfig,
    rng: &mut PortableRng,
) -> Result<(SampleSet, Vec<SampleLabel>), CliError> {
    let d = cfg.dim;
    let n = cfg.n_inliers + cfg.n_outliers;
    let mean = cfg.inlier_mean();
    let sd: Vec<f64> = cfg.inlier_cov_diag().iter().map(|v| v.sqrt()).collect();

    let mut data = Array2::zeros((n, d));
    for i in 0..cfg.n_inliers {
        for c in 0..d {
            data[[i, c]] = mean[c] + sd[c] * rng.normal();
        }
    }
    for i in cfg.n_inliers..n {
        for c in 0..d {
            data[[i, c]] = rng.gamma(cfg.outlier_params.shape, cfg.outlier_params.scale);
        }
    }

    let mut labels = vec![SampleLabel::Inlier; cfg.n_inliers];
    labels.resize(n, SampleLabel::Outlier);
    Ok((SampleSet::new(data)?, labels))
}

/// Standard-normal matrix filled row by row.
pub fn normal_matrix(rng: &mut PortableRng, rows: usize, cols: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = rng.normal();
        }
    }
    m
}

/// Replaces the last `rows` rows of `m` with independent gamma draws.
pub fn contaminate_tail_rows(
    m: &mut Array2<f64>,
    rows: usize,
    shape: f64,
    scale: f64,
    rng: &mut PortableRng,
) {
    let n = m.nrows();
    assert!(rows <= n, "cannot contaminate {rows} of {n} rows");
    for i in (n - rows)..n {
        for j in 0..m.ncols() {
            m[[i, j]] = rng.gamma(shape, scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn config(n_inliers: usize, n_outliers: usize, dim: usize, seed: u64) -> ExperimentConfig {
        let text = format!(
            r#"{{"experiment": "density_contamination", "seed": {seed},
                "n_inliers": {n_inliers}, "n_outliers": {n_outliers}, "dim": {dim}}}"#
        );
        ExperimentConfig::from_json(&text).unwrap()
    }

    #[test]
    fn shapes_and_labels_line_up() {
        let cfg = config(5, 3, 2, 1);
        let mut rng = PortableRng::seed_from(cfg.seed);
        let (xs, labels) = sample_contaminated(&cfg, &mut rng).unwrap();
        assert_eq!(xs.n(), 8);
        assert_eq!(xs.dim(), 2);
        assert_eq!(labels.len(), 8);
        assert_eq!(labels.iter().filter(|l| **l == SampleLabel::Outlier).count(), 3);
        assert!(labels[..5].iter().all(|l| *l == SampleLabel::Inlier));
        assert!(labels[5..].iter().all(|l| *l == SampleLabel::Outlier));
    }

    #[test]
    fn zero_contamination_labels_everything_inlier() {
        let cfg = config(6, 0, 2, 0);
        let mut rng = PortableRng::seed_from(0);
        let (xs, labels) = sample_contaminated(&cfg, &mut rng).unwrap();
        assert_eq!(xs.n(), 6);
        assert!(labels.iter().all(|l| *l == SampleLabel::Inlier));
    }

    #[test]
    fn same_seed_reproduces_the_sample() {
        let cfg = config(20, 4, 3, 42);
        let mut r1 = PortableRng::seed_from(42);
        let mut r2 = PortableRng::seed_from(42);
        let (a, _) = sample_contaminated(&cfg, &mut r1).unwrap();
        let (b, _) = sample_contaminated(&cfg, &mut r2).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn outlier_rows_are_positive() {
        let cfg = config(2, 50, 4, 9);
        let mut rng = PortableRng::seed_from(9);
        let (xs, _) = sample_contaminated(&cfg, &mut rng).unwrap();
        for i in 2..52 {
            for c in 0..4 {
                assert!(xs.data()[[i, c]] > 0.0);
            }
        }
    }

    #[test]
    fn inlier_moments_match_the_configured_normal() {
        let text = r#"{"experiment": "density_contamination", "seed": 3,
            "n_inliers": 100000, "n_outliers": 0, "dim": 2,
            "inlier_params": {"mean": [1.0, -2.0], "cov_diag": [4.0, 0.25]}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let mut rng = PortableRng::seed_from(3);
        let (xs, _) = sample_contaminated(&cfg, &mut rng).unwrap();
        let n = xs.n() as f64;
        for (c, (mean, var)) in [(1.0, 4.0), (-2.0, 0.25)].iter().enumerate() {
            let col = xs.data().column(c);
            let m = col.sum() / n;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!((m - mean).abs() < 0.03, "column {c} mean {m}");
            assert!((v - var).abs() / var < 0.03, "column {c} var {v}");
        }
    }

    #[test]
    fn tail_contamination_touches_only_the_tail() {
        let mut rng = PortableRng::seed_from(5);
        let mut m = normal_matrix(&mut rng, 10, 3);
        let before = m.clone();
        contaminate_tail_rows(&mut m, 2, 2.0, 1.5, &mut rng);
        for i in 0..8 {
            for j in 0..3 {
                assert_eq!(m[[i, j]], before[[i, j]]);
            }
        }
        for i in 8..10 {
            for j in 0..3 {
                assert!(m[[i, j]] > 0.0);
            }
        }
    }
}
