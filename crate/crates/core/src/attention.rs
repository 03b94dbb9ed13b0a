//! Attention mechanisms over query/key/value sequences.
//!
//! Three interchangeable forward passes:
//!
//! * `softmax_attention`: rows of `softmax(Q K' / sqrt(D)) V`.
//! * `kde_attention`: the kernel-regression form
//!   `h_i = sum_j v_j k(q_i, k_j) / sum_j k(q_i, k_j)`. With unit-norm keys
//!   and `sigma_sq = sqrt(D)` this reproduces softmax attention, since the
//!   squared distance then differs from `-2 q.k` by a per-row constant that
//!   cancels in the ratio.
//! * `rkde_attention`: the same ratio with robust mixture weights,
//!   `h_i = sum_j v_j w_joint[i,j] k(q_i, k_j) / sum_j w_marginal[i,j] k(q_i, k_j)`,
//!   where the weights come from reweighted fits over the key atoms
//!   (denominator) and concatenated value-key atoms (numerator), capping the
//!   influence of outlying rows.
//!
//! All kernel evaluations run in log space with a per-row max shift, so
//! outputs stay finite at input magnitudes where the naive products
//! overflow or underflow.

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, squared_distances, KernelConfig, SampleSet};
use crate::kirwls::{kirwls_iterate, residual_quantile, WeightVector};
use crate::robust_loss::RobustLoss;

/// Validated query/key/value triple with optional mask and bandwidth.
///
/// `mask[i][j] = true` means query `i` may attend to position `j`; every
/// row must keep at least one attendable position. The bandwidth defaults
/// to `sqrt(D)`, the choice under which kernel and softmax attention
/// coincide on unit-norm keys.
#[derive(Debug, Clone)]
pub struct AttentionInputs {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    mask: Option<Array2<bool>>,
    sigma_sq: f64,
}

impl AttentionInputs {
    pub fn new(q: Array2<f64>, k: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 {
            return Err(Error::invalid("attention needs at least one sequence position"));
        }
        if k.nrows() != n || v.nrows() != n {
            return Err(Error::invalid(format!(
                "row counts differ: {} queries, {} keys, {} values",
                n,
                k.nrows(),
                v.nrows()
            )));
        }
        if q.ncols() == 0 || q.ncols() != k.ncols() {
            return Err(Error::invalid(format!(
                "query dimension {} and key dimension {} must match and be positive",
                q.ncols(),
                k.ncols()
            )));
        }
        if v.ncols() == 0 {
            return Err(Error::invalid("values must have at least one coordinate"));
        }
        for (name, m) in [("queries", &q), ("keys", &k), ("values", &v)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} contain a non-finite entry")));
            }
        }
        let sigma_sq = (q.ncols() as f64).sqrt();
        Ok(AttentionInputs { q, k, v, mask: None, sigma_sq })
    }

    pub fn with_mask(mut self, mask: Array2<bool>) -> Result<Self> {
        let n = self.n();
        if mask.nrows() != n || mask.ncols() != n {
            return Err(Error::invalid(format!(
                "mask is {} x {}, expected {n} x {n}",
                mask.nrows(),
                mask.ncols()
            )));
        }
        if let Some(i) = (0..n).find(|&i| mask.row(i).iter().all(|&a| !a)) {
            return Err(Error::invalid(format!("mask row {i} attends to nothing")));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn with_sigma_sq(mut self, sigma_sq: f64) -> Result<Self> {
        if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
            return Err(Error::invalid(format!(
                "sigma_sq must be finite and positive, got {sigma_sq}"
            )));
        }
        self.sigma_sq = sigma_sq;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn value_dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn queries(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn keys(&self) -> &Array2<f64> {
        &self.k
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn mask(&self) -> Option<&Array2<bool>> {
        self.mask.as_ref()
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    fn unmasked(&self, i: usize) -> Vec<usize> {
        match &self.mask {
            Some(m) => (0..self.n()).filter(|&j| m[[i, j]]).collect(),
            None => (0..self.n()).collect(),
        }
    }
}

/// Linear maps from an input sequence to queries, keys, and values, plus a
/// head count for column-sliced multi-head application.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    w_q: Array2<f64>,
    w_k: Array2<f64>,
    w_v: Array2<f64>,
    heads: usize,
}

impl ProjectionSet {
    pub fn new(w_q: Array2<f64>, w_k: Array2<f64>, w_v: Array2<f64>, heads: usize) -> Result<Self> {
        if w_q.nrows() == 0 || w_q.ncols() == 0 || w_v.nrows() == 0 {
            return Err(Error::invalid("projection matrices must be non-empty"));
        }
        if w_q.dim() != w_k.dim() {
            return Err(Error::invalid(format!(
                "query projection is {:?} but key projection is {:?}",
                w_q.dim(),
                w_k.dim()
            )));
        }
        if w_v.ncols() != w_q.ncols() {
            return Err(Error::invalid(format!(
                "value projection takes inputs of dimension {}, expected {}",
                w_v.ncols(),
                w_q.ncols()
            )));
        }
        for (name, m) in [("w_q", &w_q), ("w_k", &w_k), ("w_v", &w_v)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} contains a non-finite entry")));
            }
        }
        if heads == 0 {
            return Err(Error::invalid("head count must be at least 1"));
        }
        if !w_q.nrows().is_multiple_of(heads) || !w_v.nrows().is_multiple_of(heads) {
            return Err(Error::invalid(format!(
                "head count {heads} must divide key dimension {} and value dimension {}",
                w_q.nrows(),
                w_v.nrows()
            )));
        }
        Ok(ProjectionSet { w_q, w_k, w_v, heads })
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn value_dim(&self) -> usize {
        self.w_v.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_q.ncols()
    }

    pub fn heads(&self) -> usize {
        self.heads
    }
}

/// Per-query mixture weights for robust attention.
///
/// Row `i` of `marginal` weights the key atoms in the denominator; row `i`
/// of `joint` weights the concatenated value-key atoms in the numerator.
/// Each row is nonnegative, sums to one over its unmasked positions, and is
/// exactly zero on masked positions.
#[derive(Debug, Clone)]
pub struct RobustAttentionWeights {
    marginal: Array2<f64>,
    joint: Array2<f64>,
    iterations_used: usize,
}

impl RobustAttentionWeights {
    pub fn marginal(&self) -> &Array2<f64> {
        &self.marginal
    }

    pub fn joint(&self) -> &Array2<f64> {
        &self.joint
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }
}

/// Output sequence; `attn_probs` carries the row-stochastic attention
/// matrix on the plain softmax path and is absent for the kernel-ratio
/// mechanisms, whose numerator and denominator weights need not coincide.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub h: Array2<f64>,
    pub attn_probs: Option<Array2<f64>>,
}

/// Loss rule for the robust weight fits.
///
/// `Fixed` applies one loss to both the marginal and joint fits.
/// `HuberAtQuantile` sets the Huber threshold separately for every fit to
/// the given quantile of that fit's own uniform-weight residuals, so the
/// threshold tracks each Gram matrix's residual scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RkdeLoss {
    Fixed(RobustLoss),
    HuberAtQuantile { quantile: f64 },
}

impl RkdeLoss {
    pub fn huber_at_quantile(quantile: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantile) {
            return Err(Error::invalid(format!(
                "quantile must lie in [0, 1], got {quantile}"
            )));
        }
        Ok(RkdeLoss::HuberAtQuantile { quantile })
    }

    fn resolve(&self, gram: &Array2<f64>) -> Result<RobustLoss> {
        match self {
            RkdeLoss::Fixed(loss) => Ok(*loss),
            RkdeLoss::HuberAtQuantile { quantile } => {
                let t = residual_quantile(gram, *quantile)?;
                // Floor guards subsets of coincident atoms, where every
                // residual is zero and the quantile degenerates.
                RobustLoss::huber(t.max(1e-12))
            }
        }
    }
}

/// Knobs for the robust weight computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkdeOptions {
    /// Reweighting updates per fit; the single-step default approximates
    /// the fixed point well enough for a forward pass.
    pub steps: usize,
    /// Bandwidth for the joint value-key fit; `sqrt(D + D_v)` when absent,
    /// extending the `sqrt(D)` convention to the concatenated dimension.
    pub joint_sigma_sq: Option<f64>,
    /// Scale value rows to unit norm before concatenation. Off by default:
    /// only keys are normalized by the mechanism itself.
    pub normalize_values: bool,
}

impl Default for RkdeOptions {
    fn default() -> Self {
        RkdeOptions { steps: 1, joint_sigma_sq: None, normalize_values: false }
    }
}

/// Mechanism selector for [`attend`] and [`multi_head_attention`].
#[derive(Debug, Clone)]
pub enum AttentionMechanism {
    Softmax,
    Kde { normalize_keys: bool },
    Rkde { loss: RkdeLoss, options: RkdeOptions },
}

/// Scales every row of `m` to unit Euclidean norm.
pub fn normalize_rows(m: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = m.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid(format!(
                "row {i} has norm {norm} and cannot be normalized"
            )));
        }
        row.mapv_inplace(|x| x / norm);
    }
    Ok(out)
}

/// Row-wise softmax with max-subtraction; masked entries become exact
/// zeros. Invariant to adding a constant to all unmasked entries of a row.
pub fn stable_row_softmax(logits: &Array2<f64>, mask: Option<&Array2<bool>>) -> Result<Array2<f64>> {
    if let Some(m) = mask {
        if m.dim() != logits.dim() {
            return Err(Error::invalid(format!(
                "mask is {:?} but logits are {:?}",
                m.dim(),
                logits.dim()
            )));
        }
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("logits contain a non-finite entry"));
    }
    let (rows, cols) = logits.dim();
    let mut probs = Array2::zeros((rows, cols));
    for i in 0..rows {
        let live: Vec<usize> = match mask {
            Some(m) => (0..cols).filter(|&j| m[[i, j]]).collect(),
            None => (0..cols).collect(),
        };
        if live.is_empty() {
            return Err(Error::invalid(format!("mask row {i} attends to nothing")));
        }
        let max = live.iter().map(|&j| logits[[i, j]]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &j in &live {
            let e = (logits[[i, j]] - max).exp();
            probs[[i, j]] = e;
            sum += e;
        }
        for &j in &live {
            probs[[i, j]] /= sum;
        }
    }
    Ok(probs)
}

/// Plain scaled dot-product attention: `softmax(Q K' / sqrt(D)) V`.
pub fn softmax_attention(inputs: &AttentionInputs) -> Result<AttentionOutput> {
    let scale = 1.0 / (inputs.dim() as f64).sqrt();
    let logits = inputs.q.dot(&inputs.k.t()) * scale;
    let probs = stable_row_softmax(&logits, inputs.mask())?;
    let h = probs.dot(&inputs.v);
    Ok(AttentionOutput { h, attn_probs: Some(probs) })
}

/// Kernel-regression attention: per query, the kernel-weighted average of
/// value rows. With `normalize_keys` the key rows are scaled to unit norm
/// first.
pub fn kde_attention(inputs: &AttentionInputs, normalize_keys: bool) -> Result<AttentionOutput> {
    let keys = if normalize_keys { normalize_rows(&inputs.k)? } else { inputs.k.clone() };
    let h = mixture_eval(inputs, &keys, None)?;
    Ok(AttentionOutput { h, attn_probs: None })
}

/// Robust mixture weights for every query row.
///
/// The marginal fit runs on the key atoms with the input bandwidth; the
/// joint fit runs on `[v_j, k_j]` concatenations with the joint bandwidth.
/// Keys are taken as provided. Without a mask all rows share one fit per
/// Gram matrix, computed once and broadcast. Under a mask each row is fit
/// on its unmasked subset, slicing the shared Gram matrices; a row with a
/// single live position gets weight one there without fitting.
pub fn compute_robust_weights(
    inputs: &AttentionInputs,
    loss: &RkdeLoss,
    opts: &RkdeOptions,
) -> Result<RobustAttentionWeights> {
    if opts.steps == 0 {
        return Err(Error::invalid("weight fitting needs at least one step"));
    }
    let n = inputs.n();
    let joint_sigma_sq = match opts.joint_sigma_sq {
        Some(s) => {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::invalid(format!(
                    "joint_sigma_sq must be finite and positive, got {s}"
                )));
            }
            s
        }
        None => ((inputs.dim() + inputs.value_dim()) as f64).sqrt(),
    };

    let key_gram = gram_matrix(
        &SampleSet::new(inputs.k.clone())?,
        &KernelConfig::new(inputs.sigma_sq)?,
    );
    let values = if opts.normalize_values { normalize_rows(&inputs.v)? } else { inputs.v.clone() };
    let mut joint_atoms = Array2::zeros((n, inputs.value_dim() + inputs.dim()));
    joint_atoms.slice_mut(s![.., ..inputs.value_dim()]).assign(&values);
    joint_atoms.slice_mut(s![.., inputs.value_dim()..]).assign(&inputs.k);
    let joint_gram = gram_matrix(
        &SampleSet::new(joint_atoms)?,
        &KernelConfig::new(joint_sigma_sq)?,
    );

    let mut marginal = Array2::zeros((n, n));
    let mut joint = Array2::zeros((n, n));
    match inputs.mask() {
        None => {
            let wm = fit_row_weights(&key_gram, loss, opts.steps)?;
            let wj = fit_row_weights(&joint_gram, loss, opts.steps)?;
            for i in 0..n {
                marginal.row_mut(i).assign(&wm);
                joint.row_mut(i).assign(&wj);
            }
        }
        Some(_) => {
            for i in 0..n {
                let live = inputs.unmasked(i);
                if live.len() == 1 {
                    marginal[[i, live[0]]] = 1.0;
                    joint[[i, live[0]]] = 1.0;
                    continue;
                }
                let sub_key = key_gram.select(Axis(0), &live).select(Axis(1), &live);
                let sub_joint = joint_gram.select(Axis(0), &live).select(Axis(1), &live);
                let wm = fit_row_weights(&sub_key, loss, opts.steps)
                    .map_err(|e| Error::numerical(format!("{e} (query row {i}, marginal fit)")))?;
                let wj = fit_row_weights(&sub_joint, loss, opts.steps)
                    .map_err(|e| Error::numerical(format!("{e} (query row {i}, joint fit)")))?;
                for (pos, &j) in live.iter().enumerate() {
                    marginal[[i, j]] = wm[pos];
                    joint[[i, j]] = wj[pos];
                }
            }
        }
    }
    Ok(RobustAttentionWeights { marginal, joint, iterations_used: opts.steps })
}

fn fit_row_weights(gram: &Array2<f64>, loss: &RkdeLoss, steps: usize) -> Result<Array1<f64>> {
    let resolved = loss.resolve(gram)?;
    let init = WeightVector::uniform(gram.nrows())?;
    let w = kirwls_iterate(gram, &resolved, init, steps)?;
    Ok(w.as_array().clone())
}

/// Robust attention: normalizes the keys, fits marginal and joint weights,
/// and evaluates the weighted kernel ratio per query row.
pub fn rkde_attention(
    inputs: &AttentionInputs,
    loss: &RkdeLoss,
    opts: &RkdeOptions,
) -> Result<AttentionOutput> {
    let normalized = inputs.with_normalized_keys()?;
    let weights = compute_robust_weights(&normalized, loss, opts)?;
    let h = mixture_eval(&normalized, &normalized.k, Some(&weights))?;
    Ok(AttentionOutput { h, attn_probs: None })
}

/// Robust attention with precomputed weights, for callers that freeze
/// weights across evaluations (for example sensitivity analyses). Keys are
/// normalized exactly as in [`rkde_attention`].
pub fn rkde_attention_with_weights(
    inputs: &AttentionInputs,
    weights: &RobustAttentionWeights,
) -> Result<AttentionOutput> {
    let n = inputs.n();
    if weights.marginal.dim() != (n, n) || weights.joint.dim() != (n, n) {
        return Err(Error::invalid(format!(
            "weights are {:?} and {:?}, expected ({n}, {n})",
            weights.marginal.dim(),
            weights.joint.dim()
        )));
    }
    let normalized = inputs.with_normalized_keys()?;
    let h = mixture_eval(&normalized, &normalized.k, Some(weights))?;
    Ok(AttentionOutput { h, attn_probs: None })
}

impl AttentionInputs {
    fn with_normalized_keys(&self) -> Result<AttentionInputs> {
        Ok(AttentionInputs {
            q: self.q.clone(),
            k: normalize_rows(&self.k)?,
            v: self.v.clone(),
            mask: self.mask.clone(),
            sigma_sq: self.sigma_sq,
        })
    }
}

/// Weighted kernel-ratio evaluation shared by the KDE and robust paths.
///
/// Per query row the log-kernel values are shifted by their unmasked
/// maximum before exponentiation; the mixture weights multiply in linear
/// space, so the shift cancels exactly in the numerator/denominator ratio.
fn mixture_eval(
    inputs: &AttentionInputs,
    keys: &Array2<f64>,
    weights: Option<&RobustAttentionWeights>,
) -> Result<Array2<f64>> {
    let n = inputs.n();
    let dv = inputs.value_dim();
    let v = &inputs.v;
    let scale = -1.0 / (2.0 * inputs.sigma_sq);
    let mut log_k = squared_distances(inputs.q.view(), keys.view());
    log_k.mapv_inplace(|sq| sq * scale);

    let mut h = Array2::zeros((n, dv));
    let mut num = vec![0.0f64; dv];
    for i in 0..n {
        let live = inputs.unmasked(i);
        let max = live.iter().map(|&j| log_k[[i, j]]).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::numerical(format!(
                "every kernel value underflowed in log space at query row {i}"
            )));
        }
        let mut den = 0.0;
        num.iter_mut().for_each(|x| *x = 0.0);
        for &j in &live {
            let e = (log_k[[i, j]] - max).exp();
            let (wn, wd) = match weights {
                Some(w) => (w.joint[[i, j]], w.marginal[[i, j]]),
                None => (1.0, 1.0),
            };
            den += e * wd;
            if wn != 0.0 {
                for (c, x) in num.iter_mut().enumerate() {
                    *x += e * wn * v[[j, c]];
                }
            }
        }
        if !den.is_finite() || den <= 0.0 {
            return Err(Error::numerical(format!(
                "attention denominator is {den} at query row {i}"
            )));
        }
        for c in 0..dv {
            h[[i, c]] = num[c] / den;
        }
    }
    Ok(h)
}

/// Applies the selected mechanism.
pub fn attend(inputs: &AttentionInputs, mechanism: &AttentionMechanism) -> Result<AttentionOutput> {
    match mechanism {
        AttentionMechanism::Softmax => softmax_attention(inputs),
        AttentionMechanism::Kde { normalize_keys } => kde_attention(inputs, *normalize_keys),
        AttentionMechanism::Rkde { loss, options } => rkde_attention(inputs, loss, options),
    }
}

/// Projects an input sequence to attention inputs: `Q = X W_q'`,
/// `K = X W_k'`, `V = X W_v'`.
pub fn project(x: &Array2<f64>, proj: &ProjectionSet) -> Result<AttentionInputs> {
    if x.ncols() != proj.input_dim() {
        return Err(Error::invalid(format!(
            "input has dimension {}, projections take {}",
            x.ncols(),
            proj.input_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input sequence contains a non-finite entry"));
    }
    let q = x.dot(&proj.w_q.t());
    let k = x.dot(&proj.w_k.t());
    let v = x.dot(&proj.w_v.t());
    AttentionInputs::new(q, k, v)
}

/// Projects, splits columns into heads, applies the mechanism per head
/// with the per-head default bandwidth, and concatenates the outputs.
/// `attn_probs` is only populated for single-head softmax.
pub fn multi_head_attention(
    x: &Array2<f64>,
    proj: &ProjectionSet,
    mask: Option<&Array2<bool>>,
    mechanism: &AttentionMechanism,
) -> Result<AttentionOutput> {
    let full = project(x, proj)?;
    let full = match mask {
        Some(m) => full.with_mask(m.clone())?,
        None => full,
    };
    let heads = proj.heads();
    if heads == 1 {
        return attend(&full, mechanism);
    }
    let dh = full.dim() / heads;
    let dvh = full.value_dim() / heads;
    let mut h = Array2::zeros((full.n(), full.value_dim()));
    for head in 0..heads {
        let q = full.q.slice(s![.., head * dh..(head + 1) * dh]).to_owned();
        let k = full.k.slice(s![.., head * dh..(head + 1) * dh]).to_owned();
        let v = full.v.slice(s![.., head * dvh..(head + 1) * dvh]).to_owned();
        let mut sub = AttentionInputs::new(q, k, v)?;
        if let Some(m) = &full.mask {
            sub = sub.with_mask(m.clone())?;
        }
        let out = attend(&sub, mechanism)?;
        h.slice_mut(s![.., head * dvh..(head + 1) * dvh]).assign(&out.h);
    }
    Ok(AttentionOutput { h, attn_probs: None })
}

/// Lower-triangular mask: position `i` attends to positions `0..=i`.
pub fn causal_mask(n: usize) -> Array2<bool> {
    Array2::from_shape_fn((n, n), |(i, j)| j <= i)
}
