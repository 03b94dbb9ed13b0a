//! Seeded fixtures shared by the benchmarks. Sizes mirror the experiment
//! harness defaults so timings track what the CLI actually runs.

use ndarray::Array2;

use rkde_cli::rng::PortableRng;
use rkde_cli::sampling::{contaminate_tail_rows, normal_matrix};
use rkde_core::{gram_matrix, normalize_rows, AttentionInputs, KernelConfig, SampleSet};

/// Standard-normal sample with gamma rows appended, as in the density
/// study.
pub fn contaminated_sample(n_inliers: usize, n_outliers: usize, dim: usize, seed: u64) -> SampleSet {
    let mut rng = PortableRng::seed_from(seed);
    let mut data = normal_matrix(&mut rng, n_inliers + n_outliers, dim);
    contaminate_tail_rows(&mut data, n_outliers, 2.0, 1.5, &mut rng);
    SampleSet::new(data).expect("fixture sample must be valid")
}

/// Normalized-kernel Gram matrix of a contaminated sample.
pub fn contaminated_gram(n_inliers: usize, n_outliers: usize, dim: usize, seed: u64) -> Array2<f64> {
    let xs = contaminated_sample(n_inliers, n_outliers, dim, seed);
    let kernel = KernelConfig::normalized((dim as f64).sqrt()).expect("valid bandwidth");
    gram_matrix(&xs, &kernel)
}

/// Attention inputs with unit-norm keys and bandwidth sqrt(D).
pub fn attention_fixture(n: usize, dim: usize, seed: u64) -> AttentionInputs {
    let mut rng = PortableRng::seed_from(seed);
    let q = normal_matrix(&mut rng, n, dim);
    let k = normalize_rows(&normal_matrix(&mut rng, n, dim)).expect("nonzero key rows");
    let v = normal_matrix(&mut rng, n, dim);
    AttentionInputs::new(q, k, v)
        .expect("fixture inputs must be valid")
        .with_sigma_sq((dim as f64).sqrt())
        .expect("valid bandwidth")
}
