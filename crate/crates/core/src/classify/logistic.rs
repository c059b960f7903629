//! Multinomial logistic regression with a reference class, fitted by damped Newton.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_L2: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Class ids seen in training, ascending; `classes[0]` is the reference.
    pub classes: Vec<usize>,
    /// `(classes.len() − 1) × (p + 1)`, intercept in column 0.
    pub beta: DMatrix<f64>,
    pub l2: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Mean negative log-likelihood plus `(l2/2)·‖weights‖²` and its gradient.
///
/// `theta` is the row-major flattening of the coefficient matrix; `y` holds
/// compact class positions in `0..c`.
pub fn objective(theta: &DVector<f64>, x: &DMatrix<f64>, y: &[usize], c: usize, l2: f64) -> (f64, DVector<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let q = p + 1;
    let mut f = 0.0;
    let mut g = DVector::zeros(theta.len());
    let mut scores = vec![0.0; c];
    for i in 0..n {
        softmax_scores(theta, x, i, c, &mut scores);
        f -= scores[y[i]].ln();
        for r in 1..c {
            let resid = scores[r] - if y[i] == r { 1.0 } else { 0.0 };
            let base = (r - 1) * q;
            g[base] += resid;
            for j in 0..p {
                g[base + 1 + j] += resid * x[(i, j)];
            }
        }
    }
    f /= n as f64;
    g /= n as f64;
    for r in 1..c {
        for j in 1..q {
            let t = theta[(r - 1) * q + j];
            f += 0.5 * l2 * t * t;
            g[(r - 1) * q + j] += l2 * t;
        }
    }
    (f, g)
}

/// Class probabilities of row `i` written into `out`.
fn softmax_scores(theta: &DVector<f64>, x: &DMatrix<f64>, i: usize, c: usize, out: &mut [f64]) {
    let q = x.ncols() + 1;
    out[0] = 0.0;
    for r in 1..c {
        let base = (r - 1) * q;
        let mut s = theta[base];
        for j in 0..x.ncols() {
            s += theta[base + 1 + j] * x[(i, j)];
        }
        out[r] = s;
    }
    let max = out[..c].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out[..c].iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out[..c].iter_mut() {
        *v /= total;
    }
}

fn hessian(theta: &DVector<f64>, x: &DMatrix<f64>, c: usize, l2: f64) -> DMatrix<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let q = p + 1;
    let dim = (c - 1) * q;
    let mut h = DMatrix::zeros(dim, dim);
    let mut pi = vec![0.0; c];
    let mut xa = vec![1.0; q];
    for i in 0..n {
        softmax_scores(theta, x, i, c, &mut pi);
        for j in 0..p {
            xa[j + 1] = x[(i, j)];
        }
        for r in 1..c {
            for s in r..c {
                let wgt = pi[r] * (if r == s { 1.0 } else { 0.0 } - pi[s]);
                if wgt == 0.0 {
                    continue;
                }
                for a in 0..q {
                    for b in 0..q {
                        h[((r - 1) * q + a, (s - 1) * q + b)] += wgt * xa[a] * xa[b];
                    }
                }
            }
        }
    }
    h /= n as f64;
    for r in 1..c {
        for s in (r + 1)..c {
            for a in 0..q {
                for b in 0..q {
                    h[((s - 1) * q + b, (r - 1) * q + a)] = h[((r - 1) * q + a, (s - 1) * q + b)];
                }
            }
        }
        for j in 1..q {
            h[((r - 1) * q + j, (r - 1) * q + j)] += l2;
        }
    }
    h
}

fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut jitter = 0.0;
    loop {
        let mut m = h.clone();
        for d in 0..m.nrows() {
            m[(d, d)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return -ch.solve(g);
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
        if jitter > 1e6 * scale {
            return -g.clone();
        }
    }
}

/// Fits on class ids `y`; classes absent from `y` are never predicted.
pub fn train_logistic(x: &DMatrix<f64>, y: &[usize], l2: f64) -> Result<LogisticModel> {
    if x.nrows() != y.len() {
        return Err(Error::Input(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::Parameter(format!("l2 must be >= 0, got {l2}")));
    }
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "logistic regression needs >= 2 classes, got {}",
            classes.len()
        )));
    }
    let (n, p) = (x.nrows(), x.ncols());
    if n <= p {
        log::warn!("logistic regression with n = {n} <= p = {p}");
    }
    let c = classes.len();
    let yc: Vec<usize> = y.iter().map(|v| classes.binary_search(v).unwrap()).collect();
    let mut theta = DVector::zeros((c - 1) * (p + 1));
    let (mut f, mut g) = objective(&theta, x, &yc, c, l2);
    let mut iterations = 0;
    while g.norm() > GRAD_TOL && iterations < MAX_ITER {
        iterations += 1;
        let step = newton_step(&hessian(&theta, x, c, l2), &g);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &step * t;
            let (fc, gc) = objective(&cand, x, &yc, c, l2);
            if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                theta = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad_norm = g.norm();
    if grad_norm > GRAD_TOL {
        log::warn!("logistic regression stopped after {iterations} iterations with gradient norm {grad_norm:.3e}");
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("logistic coefficients are not finite".into()));
    }
    Ok(LogisticModel {
        classes,
        beta: DMatrix::from_row_slice(c - 1, p + 1, theta.as_slice()),
        l2,
        iterations,
        grad_norm,
    })
}

impl LogisticModel {
    pub fn p(&self) -> usize {
        self.beta.ncols() - 1
    }

    fn theta(&self) -> DVector<f64> {
        let (r, q) = self.beta.shape();
        DVector::from_iterator(
            r * q,
            (0..r).flat_map(|i| (0..q).map(move |j| (i, j))).map(|ij| self.beta[ij]),
        )
    }

    /// Probabilities over `classes`, one row per input row.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.p(),
                x.ncols()
            )));
        }
        let c = self.classes.len();
        let theta = self.theta();
        let mut out = DMatrix::zeros(x.nrows(), c);
        let mut buf = vec![0.0; c];
        for i in 0..x.nrows() {
            softmax_scores(&theta, x, i, c, &mut buf);
            for r in 0..c {
                out[(i, r)] = buf[r];
            }
        }
        Ok(out)
    }
}
