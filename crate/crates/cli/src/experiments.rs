//! Experiment drivers: seeded synthetic studies with JSON and CSV
//! artifacts. Every run is a pure function of its config, so repeated runs
//! produce byte-identical output files.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use rkde_core::{
    gram_matrix, kde_attention, kde_fit, kirwls_fit_gram, normalize_rows, rkde_attention,
    softmax_attention, AttentionInputs, DensityEstimate, KernelConfig, KirwlsOptions, RkdeLoss,
    RkdeOptions, RobustLoss,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::output::{artifact_path, write_json, DensityRow, DensityTable};
use crate::rng::PortableRng;
use crate::sampling::{contaminate_tail_rows, normal_matrix, sample_contaminated, SampleLabel};

/// Max relative elementwise error both equivalence legs must clear.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;

/// Metrics from one density-contamination run. `wall_time_ms` is reported
/// on stderr but kept out of the persisted JSON so identical configs
/// produce identical files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub experiment: String,
    pub seed: u64,
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub dim: usize,
    pub sigma_sq: f64,
    pub ise_kde: f64,
    pub ise_rkde: f64,
    pub mean_weight_inliers: f64,
    pub mean_weight_outliers: f64,
    pub kirwls_iterations: usize,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// Metrics from one attention-contamination run: per-mechanism distance
/// between the clean forward pass and the same pass with contaminated
/// value rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionMetricsRecord {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub sigma_sq: f64,
    pub contaminated_rows: usize,
    pub deviation_softmax: f64,
    pub deviation_kde: f64,
    pub deviation_rkde: f64,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// Verdict of the mechanism-equivalence check.
///
/// Leg one compares softmax attention against kernel-ratio attention and
/// holds only for unit-norm keys with bandwidth `sqrt(D)`. Leg two
/// compares kernel-ratio attention against the robust mechanism under
/// least-squares loss and holds unconditionally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub sigma_sq: f64,
    pub normalize_keys: bool,
    pub tolerance: f64,
    pub max_rel_error_softmax_kde: f64,
    pub max_rel_error_kde_rkde: f64,
    pub passed: bool,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// Record plus the plot-ready grid table it was computed from.
#[derive(Debug, Clone)]
pub struct DensityOutcome {
    pub record: MetricsRecord,
    pub table: DensityTable,
}

/// Largest elementwise difference between two equal-shape matrices,
/// relative to the overall scale of the pair. Scale-relative rather than
/// entry-relative so near-zero entries with roundoff noise do not blow up
/// the metric.
pub fn max_rel_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch in max_rel_error");
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    diff / scale.max(1e-300)
}

fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Diagonal-covariance normal density at one point.
fn normal_density(point: &[f64], mean: &[f64], cov_diag: &[f64]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut log = 0.0;
    for ((x, m), v) in point.iter().zip(mean).zip(cov_diag) {
        log -= 0.5 * ((x - m) * (x - m) / v + v.ln() + ln_2pi);
    }
    log.exp()
}

/// Riemann-sum integrated squared error between two grid evaluations.
fn riemann_ise(est: &[f64], truth: &[f64], cell: f64) -> f64 {
    est.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * cell
}

/// Fits uniform-weight and robust density estimates on one contaminated
/// sample and scores both against the uncontaminated normal by
/// integrated squared error on the grid. Requires `dim = 2`; the grid
/// artifact is a two-column point table.
pub fn density_experiment(cfg: &ExperimentConfig) -> Result<DensityOutcome, CliError> {
    if cfg.dim != 2 {
        return Err(CliError::Config(format!(
            "density experiment requires dim = 2, got {}",
            cfg.dim
        )));
    }
    let started = Instant::now();
    let sigma_sq = cfg.sigma_sq.resolve(cfg.dim)?;
    let kernel = KernelConfig::normalized(sigma_sq)?;

    let mut rng = PortableRng::seed_from(cfg.seed);
    let (xs, labels) = sample_contaminated(cfg, &mut rng)?;

    let gram = gram_matrix(&xs, &kernel);
    let loss = cfg.loss.resolve_for_gram(&gram)?;
    let opts = KirwlsOptions::default();
    let report = kirwls_fit_gram(&gram, &loss, &opts)?;

    let uniform = kde_fit(xs.clone(), kernel);
    let robust = DensityEstimate::new(xs, report.weights.clone(), kernel)?;

    let axes = cfg.grid_axes()?;
    if axes.len() != 2 {
        return Err(CliError::Config(format!(
            "density grid needs exactly 2 axes, got {}",
            axes.len()
        )));
    }
    let kde_grid = uniform.density_on_grid(&axes)?;
    let rkde_grid = robust.density_on_grid(&axes)?;

    let mean = cfg.inlier_mean();
    let cov = cfg.inlier_cov_diag();
    let xs_axis = &kde_grid.axes[0];
    let ys_axis = &kde_grid.axes[1];
    let mut table = DensityTable::default();
    let mut truth = Vec::with_capacity(kde_grid.values.len());
    for (ix, &x) in xs_axis.iter().enumerate() {
        for (iy, &y) in ys_axis.iter().enumerate() {
            let p = ix * ys_axis.len() + iy;
            let t = normal_density(&[x, y], &mean, &cov);
            truth.push(t);
            table.rows.push(DensityRow {
                x,
                y,
                density_true: t,
                density_kde: kde_grid.values[p],
                density_rkde: rkde_grid.values[p],
            });
        }
    }

    let cell = axes[0].step() * axes[1].step();
    let ise_kde = riemann_ise(&kde_grid.values, &truth, cell);
    let ise_rkde = riemann_ise(&rkde_grid.values, &truth, cell);

    let w = report.weights.as_array();
    let mut sum_in = 0.0;
    let mut sum_out = 0.0;
    for (wi, label) in w.iter().zip(&labels) {
        match label {
            SampleLabel::Inlier => sum_in += wi,
            SampleLabel::Outlier => sum_out += wi,
        }
    }
    let mean_weight_inliers = sum_in / cfg.n_inliers as f64;
    let mean_weight_outliers = if cfg.n_outliers == 0 {
        0.0
    } else {
        sum_out / cfg.n_outliers as f64
    };

    let record = MetricsRecord {
        experiment: ExperimentKind::DensityContamination.name().to_string(),
        seed: cfg.seed,
        n_inliers: cfg.n_inliers,
        n_outliers: cfg.n_outliers,
        dim: cfg.dim,
        sigma_sq,
        ise_kde,
        ise_rkde,
        mean_weight_inliers,
        mean_weight_outliers,
        kirwls_iterations: report.iterations,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(DensityOutcome { record, table })
}

/// Runs [`density_experiment`] and persists `<base>.json` and
/// `<base>.csv`.
pub fn run_density_experiment(
    cfg: &ExperimentConfig,
    out_base: &Path,
) -> Result<MetricsRecord, CliError> {
    let outcome = density_experiment(cfg)?;
    write_json(&artifact_path(out_base, "json"), &outcome.record)?;
    outcome.table.write_csv(&artifact_path(out_base, "csv"))?;
    Ok(outcome.record)
}

/// Builds seeded query/key/value matrices, contaminates the trailing
/// `n_outliers` value rows with large gamma draws, and measures how far
/// each mechanism's output moves. Keys are unit-normalized at generation
/// so all three mechanisms see identical inputs.
pub fn attention_experiment(cfg: &ExperimentConfig) -> Result<AttentionMetricsRecord, CliError> {
    let n = cfg.n_inliers + cfg.n_outliers;
    let dim = cfg.dim;
    let started = Instant::now();
    let sigma_sq = cfg.sigma_sq.resolve(dim)?;

    let mut rng = PortableRng::seed_from(cfg.seed);
    let q = normal_matrix(&mut rng, n, dim);
    let k = normalize_rows(&normal_matrix(&mut rng, n, dim))?;
    let v = normal_matrix(&mut rng, n, dim);
    let mut v_dirty = v.clone();
    contaminate_tail_rows(
        &mut v_dirty,
        cfg.n_outliers,
        cfg.outlier_params.shape,
        cfg.outlier_params.scale,
        &mut rng,
    );

    let clean = AttentionInputs::new(q.clone(), k.clone(), v)?.with_sigma_sq(sigma_sq)?;
    let dirty = AttentionInputs::new(q, k, v_dirty)?.with_sigma_sq(sigma_sq)?;

    let loss = cfg.loss.to_rkde_loss()?;
    let opts = RkdeOptions { steps: cfg.steps, ..RkdeOptions::default() };

    let softmax_pair = (softmax_attention(&clean)?, softmax_attention(&dirty)?);
    let kde_pair = (kde_attention(&clean, true)?, kde_attention(&dirty, true)?);
    let rkde_pair = (
        rkde_attention(&clean, &loss, &opts)?,
        rkde_attention(&dirty, &loss, &opts)?,
    );

    Ok(AttentionMetricsRecord {
        experiment: ExperimentKind::AttentionContamination.name().to_string(),
        seed: cfg.seed,
        n,
        dim,
        sigma_sq,
        contaminated_rows: cfg.n_outliers,
        deviation_softmax: frobenius_distance(&softmax_pair.0.h, &softmax_pair.1.h),
        deviation_kde: frobenius_distance(&kde_pair.0.h, &kde_pair.1.h),
        deviation_rkde: frobenius_distance(&rkde_pair.0.h, &rkde_pair.1.h),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs [`attention_experiment`] and persists `<base>.json`.
pub fn run_attention_experiment(
    cfg: &ExperimentConfig,
    out_base: &Path,
) -> Result<AttentionMetricsRecord, CliError> {
    let record = attention_experiment(cfg)?;
    write_json(&artifact_path(out_base, "json"), &record)?;
    Ok(record)
}

/// Core of the equivalence check, exposed with explicit parameters so
/// sweeps and tests can drive it directly.
pub fn equivalence_report(
    n: usize,
    dim: usize,
    seed: u64,
    sigma_sq: f64,
    normalize_keys: bool,
    tolerance: f64,
) -> Result<EquivalenceReport, CliError> {
    let started = Instant::now();
    let mut rng = PortableRng::seed_from(seed);
    let q = normal_matrix(&mut rng, n, dim);
    let mut k = normal_matrix(&mut rng, n, dim);
    if normalize_keys {
        k = normalize_rows(&k)?;
    }
    let v = normal_matrix(&mut rng, n, dim);
    let inputs = AttentionInputs::new(q, k, v)?.with_sigma_sq(sigma_sq)?;

    let softmax = softmax_attention(&inputs)?;
    // Both kernel paths normalize keys themselves, so leg two is a pure
    // mechanism identity; only leg one depends on `normalize_keys`.
    let kde = kde_attention(&inputs, true)?;
    let rkde = rkde_attention(
        &inputs,
        &RkdeLoss::Fixed(RobustLoss::LeastSquares),
        &RkdeOptions::default(),
    )?;

    let leg_softmax_kde = max_rel_error(&softmax.h, &kde.h);
    let leg_kde_rkde = max_rel_error(&kde.h, &rkde.h);
    Ok(EquivalenceReport {
        experiment: ExperimentKind::EquivalenceCheck.name().to_string(),
        seed,
        n,
        dim,
        sigma_sq,
        normalize_keys,
        tolerance,
        max_rel_error_softmax_kde: leg_softmax_kde,
        max_rel_error_kde_rkde: leg_kde_rkde,
        passed: leg_softmax_kde <= tolerance && leg_kde_rkde <= tolerance,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Equivalence check configured like any other experiment; `n_inliers`
/// supplies the instance size.
pub fn equivalence_check(cfg: &ExperimentConfig) -> Result<EquivalenceReport, CliError> {
    let sigma_sq = cfg.sigma_sq.resolve(cfg.dim)?;
    equivalence_report(
        cfg.n_inliers,
        cfg.dim,
        cfg.seed,
        sigma_sq,
        cfg.normalize_keys,
        EQUIVALENCE_TOLERANCE,
    )
}

/// Runs [`equivalence_check`] and persists `<base>.json`. Failure is a
/// verdict, not an error; the caller maps it to an exit code.
pub fn run_equivalence_check(
    cfg: &ExperimentConfig,
    out_base: &Path,
) -> Result<EquivalenceReport, CliError> {
    let report = equivalence_check(cfg)?;
    write_json(&artifact_path(out_base, "json"), &report)?;
    Ok(report)
}

/// Runs the configured experiment once per seed in `seeds`, writing
/// per-seed artifacts at `<base>_seed<k>` plus a `<base>_sweep.json`
/// aggregate of all records.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    seeds: std::ops::Range<u64>,
    out_base: &Path,
    quiet: bool,
) -> Result<Vec<serde_json::Value>, CliError> {
    let mut records = Vec::new();
    for seed in seeds {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = seed;
        let base = artifact_base_for_seed(out_base, seed);
        let (value, ms) = match cfg.experiment {
            ExperimentKind::DensityContamination => {
                let record = run_density_experiment(&run_cfg, &base)?;
                (serde_json::to_value(&record)?, record.wall_time_ms)
            }
            ExperimentKind::AttentionContamination => {
                let record = run_attention_experiment(&run_cfg, &base)?;
                (serde_json::to_value(&record)?, record.wall_time_ms)
            }
            ExperimentKind::EquivalenceCheck => {
                let report = run_equivalence_check(&run_cfg, &base)?;
                (serde_json::to_value(&report)?, report.wall_time_ms)
            }
        };
        if !quiet {
            eprintln!("seed {seed}: {} done in {ms:.1} ms", cfg.experiment.name());
        }
        records.push(value);
    }
    let mut aggregate = std::path::PathBuf::from(out_base);
    let mut name = aggregate
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push("_sweep");
    aggregate.set_file_name(name);
    write_json(&artifact_path(&aggregate, "json"), &records)?;
    Ok(records)
}

fn artifact_base_for_seed(base: &Path, seed: u64) -> std::path::PathBuf {
    let mut p = std::path::PathBuf::from(base);
    let mut name = p.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!("_seed{seed}"));
    p.set_file_name(name);
    p
}
