//! Quadratic discriminant analysis with ridge-regularized class covariances.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;
/// Ridge used for classes with fewer than `p + 1` samples.
pub const HEAVY_RIDGE: f64 = 1e-2;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaClass {
    pub class: usize,
    pub mean: DVector<f64>,
    /// Regularized covariance.
    pub cov: DMatrix<f64>,
    pub log_prior: f64,
    pub ridge: f64,
    /// Fewer than `p + 1` samples; the heavier ridge was applied.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub classes: Vec<QdaClass>,
    #[serde(skip)]
    factors: Vec<Option<(DMatrix<f64>, f64)>>,
}

fn factor(cov: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let ch: Cholesky<f64, Dyn> = cov.clone().cholesky()?;
    let l = ch.l();
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some((l, log_det))
}

pub fn train_qda(x: &DMatrix<f64>, y: &[usize], ridge: f64) -> Result<QdaModel> {
    if x.nrows() != y.len() {
        return Err(Error::Input(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Parameter(format!("ridge must be >= 0, got {ridge}")));
    }
    let (n, p) = (x.nrows(), x.ncols());
    let mut ids: Vec<usize> = y.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::Training(format!("QDA needs >= 2 classes, got {}", ids.len())));
    }
    let mut classes = Vec::with_capacity(ids.len());
    let mut factors = Vec::with_capacity(ids.len());
    for &class in &ids {
        let rows: Vec<usize> = (0..n).filter(|&i| y[i] == class).collect();
        let m = rows.len();
        if m < 2 {
            return Err(Error::Training(format!("class {class} has a single sample")));
        }
        let mut mean = DVector::zeros(p);
        for &i in &rows {
            mean += x.row(i).transpose();
        }
        mean /= m as f64;
        let mut cov = DMatrix::zeros(p, p);
        for &i in &rows {
            let d = x.row(i).transpose() - &mean;
            cov += &d * d.transpose();
        }
        cov /= m as f64;
        let flagged = m < p + 1;
        let mut r = if flagged { ridge.max(HEAVY_RIDGE) } else { ridge };
        if flagged {
            log::warn!("QDA class {class}: {m} samples for {p} features; ridge raised to {r:e}");
        }
        let scale = {
            let t = cov.trace() / p as f64;
            if t > 0.0 {
                t
            } else {
                1.0
            }
        };
        let (reg, f) = loop {
            let mut reg = cov.clone();
            for d in 0..p {
                reg[(d, d)] += r * scale;
            }
            if let Some(f) = factor(&reg) {
                break (reg, f);
            }
            r = if r == 0.0 { 1e-12 } else { r * 10.0 };
            if r > 1e3 {
                return Err(Error::Training(format!(
                    "covariance of class {class} cannot be regularized"
                )));
            }
        };
        classes.push(QdaClass {
            class,
            mean,
            cov: reg,
            log_prior: (m as f64 / n as f64).ln(),
            ridge: r,
            flagged,
        });
        factors.push(Some(f));
    }
    Ok(QdaModel { classes, factors })
}

impl QdaModel {
    pub fn p(&self) -> usize {
        self.classes[0].mean.len()
    }

    fn factor_of(&self, c: usize) -> (DMatrix<f64>, f64) {
        match self.factors.get(c).and_then(Clone::clone) {
            Some(f) => f,
            None => factor(&self.classes[c].cov).expect("stored covariance is positive definite"),
        }
    }

    /// Gaussian log-density of `x` under class position `c`.
    pub fn log_density(&self, c: usize, x: &DVector<f64>) -> f64 {
        let (l, log_det) = self.factor_of(c);
        let d = x - &self.classes[c].mean;
        let z = l
            .solve_lower_triangular(&d)
            .expect("Cholesky factor has a positive diagonal");
        -0.5 * (z.norm_squared() + log_det + self.p() as f64 * LN_2PI)
    }

    /// Posterior over `classes`, one row per input row.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.p(),
                x.ncols()
            )));
        }
        let c = self.classes.len();
        let factors: Vec<(DMatrix<f64>, f64)> = (0..c).map(|k| self.factor_of(k)).collect();
        let mut out = DMatrix::zeros(x.nrows(), c);
        for i in 0..x.nrows() {
            let row = x.row(i).transpose();
            let mut logs = vec![0.0; c];
            for k in 0..c {
                let (l, log_det) = &factors[k];
                let d = &row - &self.classes[k].mean;
                let z = l
                    .solve_lower_triangular(&d)
                    .expect("Cholesky factor has a positive diagonal");
                logs[k] = self.classes[k].log_prior - 0.5 * (z.norm_squared() + log_det + self.p() as f64 * LN_2PI);
            }
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logs.iter().map(|v| (v - max).exp()).sum();
            for k in 0..c {
                out[(i, k)] = (logs[k] - max).exp() / total;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Log of the Gaussian density via explicit inverse and determinant.
    fn log_density_oracle(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
        let p = x.len();
        let inv = cov.clone().try_inverse().unwrap();
        let d = DVector::from_iterator(p, x.iter().zip(mean).map(|(a, b)| a - b));
        let q = (d.transpose() * inv * &d)[(0, 0)];
        -0.5 * q - 0.5 * ((2.0 * std::f64::consts::PI).powi(p as i32) * cov.determinant()).ln()
    }

    #[test]
    fn means_are_column_means() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 6.0, 10.0, 0.0, 12.0, 1.0]);
        let m = train_qda(&x, &[0, 0, 1, 1], DEFAULT_RIDGE).unwrap();
        assert_eq!(m.classes[0].mean.as_slice(), &[2.0, 4.0]);
        assert_eq!(m.classes[1].mean.as_slice(), &[11.0, 0.5]);
    }

    #[test]
    fn identity_covariance_is_kept() {
        // ±√2 on each axis: MLE covariance is the identity
        let h = 2f64.sqrt();
        let pts = [h, 0.0, -h, 0.0, 0.0, h, 0.0, -h];
        let mut rows = pts.to_vec();
        rows.extend(pts.iter().map(|v| v + 10.0));
        let x = DMatrix::from_row_slice(8, 2, &rows);
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let m = train_qda(&x, &y, DEFAULT_RIDGE).unwrap();
        let expect = DMatrix::identity(2, 2) * (1.0 + DEFAULT_RIDGE);
        for c in &m.classes {
            assert!((&c.cov - &expect).amax() < 1e-12, "{}", c.cov);
        }
    }

    #[test]
    fn log_density_matches_direct_formula() {
        let x = DMatrix::from_row_slice(6, 2, &[0.3, 1.0, -0.4, 0.2, 1.1, -0.7, 5.0, 5.5, 6.2, 4.1, 5.1, 6.0]);
        let m = train_qda(&x, &[0, 0, 0, 1, 1, 1], DEFAULT_RIDGE).unwrap();
        let q = [0.7, -0.2];
        for c in 0..2 {
            let ours = m.log_density(c, &DVector::from_row_slice(&q));
            let oracle = log_density_oracle(&q, m.classes[c].mean.as_slice(), &m.classes[c].cov);
            assert!(
                (ours - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                "{ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn single_sample_class_is_rejected() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 5.0]);
        assert!(matches!(
            train_qda(&x, &[0, 0, 1], DEFAULT_RIDGE),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn small_classes_are_flagged() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                0.0, 0.1, 0.2, 1.0, 0.4, 0.3, 4.0, 4.2, 3.9, 5.0, 4.1, 4.4, 4.6, 5.1, 3.0,
            ],
        );
        let m = train_qda(&x, &[0, 0, 1, 1, 1], DEFAULT_RIDGE).unwrap();
        assert!(m.classes[0].flagged && m.classes[1].flagged);
        assert!(m.classes.iter().all(|c| c.ridge >= HEAVY_RIDGE));
    }

    #[test]
    fn prior_decides_between_identical_classes() {
        // same points, class 1 duplicated: same mean and covariance, larger prior
        let base = [0.0, 1.0, 2.0, 3.0];
        let mut rows = base.to_vec();
        rows.extend(base);
        rows.extend(base);
        let y: Vec<usize> = (0..12).map(|i| if i < 4 { 0 } else { 1 }).collect();
        let m = train_qda(&DMatrix::from_row_slice(12, 1, &rows), &y, DEFAULT_RIDGE).unwrap();
        let pr = m
            .predict_proba(&DMatrix::from_row_slice(3, 1, &[-5.0, 1.5, 9.0]))
            .unwrap();
        for i in 0..3 {
            assert!(pr[(i, 1)] > pr[(i, 0)]);
        }
    }

    #[test]
    fn one_dimensional_posterior_matches_bayes_rule() {
        let a = [-1.2, -0.4, 0.1, 0.5, -0.9, 0.3];
        let b = [2.0, 3.1, 2.4, 3.9, 2.8];
        let mut rows = a.to_vec();
        rows.extend(b);
        let y: Vec<usize> = (0..11).map(|i| if i < 6 { 0 } else { 1 }).collect();
        let m = train_qda(&DMatrix::from_row_slice(11, 1, &rows), &y, 0.0).unwrap();
        let stats = |v: &[f64]| {
            let mu = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64;
            (mu, var)
        };
        let ((ma, va), (mb, vb)) = (stats(&a), stats(&b));
        let pdf = |x: f64, mu: f64, var: f64| {
            (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        for q in [-2.0, 0.0, 1.0, 1.3, 2.5, 4.0] {
            let ja = 6.0 / 11.0 * pdf(q, ma, va);
            let jb = 5.0 / 11.0 * pdf(q, mb, vb);
            let post = m.predict_proba(&DMatrix::from_element(1, 1, q)).unwrap();
            assert!((post[(0, 0)] - ja / (ja + jb)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn equal_covariances_give_linear_rule(
            offs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 5..12),
            shift in (1.0f64..6.0, -6.0f64..6.0),
            q in (-8.0f64..8.0, -8.0f64..8.0),
        ) {
            let m = offs.len();
            let mut rows = Vec::new();
            for &(a, b) in &offs {
                rows.extend([a, b]);
            }
            for &(a, b) in &offs {
                rows.extend([a + shift.0, b + shift.1]);
            }
            let y: Vec<usize> = (0..2 * m).map(|i| usize::from(i >= m)).collect();
            let model = train_qda(&DMatrix::from_row_slice(2 * m, 2, &rows), &y, DEFAULT_RIDGE).unwrap();
            let s = &model.classes[0].cov;
            prop_assume!(s.determinant() > 1e-6);
            let inv = s.clone().try_inverse().unwrap();
            let (m0, m1) = (&model.classes[0].mean, &model.classes[1].mean);
            let x = DVector::from_row_slice(&[q.0, q.1]);
            // log-odds of class 1 over class 0 under a shared covariance
            let lin = (m1 - m0).transpose() * &inv * &x;
            let off = 0.5 * ((m0.transpose() * &inv * m0)[(0, 0)] - (m1.transpose() * &inv * m1)[(0, 0)]);
            let lda = lin[(0, 0)] + off;
            let qda = model.log_density(1, &x) - model.log_density(0, &x);
            prop_assert!((lda - qda).abs() <= 1e-9 * lda.abs().max(1.0));
        }
    }
}
