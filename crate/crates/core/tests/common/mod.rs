//! Shared test utilities: a tiny deterministic generator and independent
//! oracle implementations that deliberately avoid the library's own code
//! paths (scalar loops, double sums, plain linear-space evaluation).

#![allow(dead_code)]

use ndarray::Array2;

pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        // xorshift64*
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| scale * self.normal())
    }
}

pub fn oracle_kernel(x: &[f64], y: &[f64], sigma_sq: f64, normalized: bool) -> f64 {
    assert_eq!(x.len(), y.len());
    let mut sq = 0.0;
    for i in 0..x.len() {
        sq += (x[i] - y[i]) * (x[i] - y[i]);
    }
    let c = if normalized {
        (2.0 * std::f64::consts::PI * sigma_sq).powf(-(x.len() as f64) / 2.0)
    } else {
        1.0
    };
    c * (-sq / (2.0 * sigma_sq)).exp()
}

pub fn oracle_gram(points: &Array2<f64>, sigma_sq: f64, normalized: bool) -> Array2<f64> {
    let n = points.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        oracle_kernel(
            points.row(i).as_slice().unwrap(),
            points.row(j).as_slice().unwrap(),
            sigma_sq,
            normalized,
        )
    })
}

/// RKHS residuals by the explicit double sum, no matrix products.
pub fn oracle_residuals(gram: &Array2<f64>, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let mut quad = 0.0;
    for m in 0..n {
        for l in 0..n {
            quad += w[m] * w[l] * gram[[m, l]];
        }
    }
    (0..n)
        .map(|j| {
            let mut cross = 0.0;
            for m in 0..n {
                cross += w[m] * gram[[m, j]];
            }
            (gram[[j, j]] - 2.0 * cross + quad).max(0.0).sqrt()
        })
        .collect()
}

pub fn oracle_huber_rho(x: f64, a: f64) -> f64 {
    if x <= a {
        0.5 * x * x
    } else {
        a * x - 0.5 * a * a
    }
}

/// Mean Huber loss of the residuals, entirely through the oracle path.
pub fn oracle_objective(gram: &Array2<f64>, w: &[f64], huber_a: f64) -> f64 {
    let r = oracle_residuals(gram, w);
    r.iter().map(|&x| oracle_huber_rho(x, huber_a)).sum::<f64>() / r.len() as f64
}

/// Scalar-loop softmax attention without max-subtraction; valid only for
/// moderate logits.
pub fn oracle_softmax_attention(q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let n = q.nrows();
    let d = q.ncols();
    let dv = v.ncols();
    let mut out = Array2::zeros((n, dv));
    for i in 0..n {
        let mut weights = vec![0.0; n];
        let mut total = 0.0;
        for j in 0..n {
            let mut dot = 0.0;
            for c in 0..d {
                dot += q[[i, c]] * k[[j, c]];
            }
            weights[j] = (dot / (d as f64).sqrt()).exp();
            total += weights[j];
        }
        for j in 0..n {
            for c in 0..dv {
                out[[i, c]] += weights[j] / total * v[[j, c]];
            }
        }
    }
    out
}

/// Scalar-loop kernel-regression attention in plain linear space; valid
/// only for moderate separations.
pub fn oracle_nw_attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    sigma_sq: f64,
) -> Array2<f64> {
    let n = q.nrows();
    let dv = v.ncols();
    let mut out = Array2::zeros((n, dv));
    for i in 0..n {
        let mut den = 0.0;
        let mut num = vec![0.0; dv];
        for j in 0..n {
            let kv = oracle_kernel(
                q.row(i).as_slice().unwrap(),
                k.row(j).as_slice().unwrap(),
                sigma_sq,
                false,
            );
            den += kv;
            for c in 0..dv {
                num[c] += kv * v[[j, c]];
            }
        }
        for c in 0..dv {
            out[[i, c]] = num[c] / den;
        }
    }
    out
}

/// Largest elementwise deviation relative to the larger matrix magnitude.
/// Near-zero elements are judged against the output scale rather than
/// their own magnitude, which cancellation makes meaningless.
pub fn max_rel_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let scale = a
        .iter()
        .chain(b.iter())
        .map(|x| x.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
        / scale
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    for _ in 0..100 {
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[[i, j]].abs());
            }
        }
        if off < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[[k, p]];
                    let akq = m[[k, q]];
                    m[[k, p]] = c * akp - s * akq;
                    m[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[[p, k]];
                    let aqk = m[[q, k]];
                    m[[p, k]] = c * apk - s * aqk;
                    m[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).collect()
}
