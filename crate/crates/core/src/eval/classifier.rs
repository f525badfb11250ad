use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// Penalty `l2/2 * ||W||^2` on the weights (not the intercepts).
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient component falls below this.
    pub tol: f64,
    /// Scale each column to zero mean and unit variance (constant columns
    /// become 0).
    pub standardize: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-4,
            max_iter: 2000,
            tol: 1e-5,
            standardize: true,
        }
    }
}

/// Multinomial logistic regression trained by full-batch accelerated
/// gradient descent on the mean cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub n_classes: usize,
    mean: Array1<f64>,
    inv_std: Array1<f64>,
    /// `n_classes x n_features`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticRegression {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u32], config: &ClassifierConfig) -> Result<Self> {
        let (n, d) = x.dim();
        if n != y.len() {
            return Err(Error::DimensionMismatch(format!("{n} samples, {} labels", y.len())));
        }
        let n_classes = y.iter().max().map_or(0, |&m| m as usize + 1);
        let mut present = vec![false; n_classes];
        for &c in y {
            present[c as usize] = true;
        }
        let distinct = present.iter().filter(|&&p| p).count();
        if distinct < 2 {
            return Err(Error::SingleClass(distinct));
        }

        let (mean, inv_std) = if config.standardize {
            let mean = x.mean_axis(Axis(0)).expect("n > 0");
            let var = x.var_axis(Axis(0), 0.0);
            let inv_std = var.mapv(|v| if v > 1e-24 { 1.0 / v.sqrt() } else { 0.0 });
            (mean, inv_std)
        } else {
            (Array1::zeros(d), Array1::ones(d))
        };
        let xs = standardize(x, &mean, &inv_std);

        let mut onehot = Array2::<f64>::zeros((n, n_classes));
        for (i, &c) in y.iter().enumerate() {
            onehot[[i, c as usize]] = 1.0;
        }

        // Softmax curvature is at most 1/2, so L <= 0.5 * lmax([X 1]^T [X 1] / n) + l2.
        let lipschitz = 0.5 * top_eigenvalue(&xs) * 1.05 + config.l2;
        let step = 1.0 / lipschitz;

        let mut w = Array2::<f64>::zeros((n_classes, d));
        let mut b = Array1::<f64>::zeros(n_classes);
        let mut w_prev = w.clone();
        let mut b_prev = b.clone();
        let mut converged = false;
        let mut iterations = 0;
        for k in 1..=config.max_iter {
            iterations = k;
            let momentum = (k as f64 - 1.0) / (k as f64 + 2.0);
            let wy = &w + &((&w - &w_prev) * momentum);
            let by = &b + &((&b - &b_prev) * momentum);

            let mut resid = softmax(xs.dot(&wy.t()) + &by);
            resid -= &onehot;
            resid /= n as f64;
            let gw = resid.t().dot(&xs) + &(&wy * config.l2);
            let gb = resid.sum_axis(Axis(0));
            let gmax = gw.iter().chain(gb.iter()).fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < config.tol {
                w = wy;
                b = by;
                converged = true;
                break;
            }
            w_prev = std::mem::replace(&mut w, wy - gw * step);
            b_prev = std::mem::replace(&mut b, by - gb * step);
        }
        if !converged {
            log::debug!("logistic regression stopped after {iterations} iterations without converging");
        }
        Ok(LogisticRegression {
            n_classes,
            mean,
            inv_std,
            weights: w,
            bias: b,
            iterations,
            converged,
        })
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "classifier expects {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let xs = standardize(x, &self.mean, &self.inv_std);
        Ok(xs.dot(&self.weights.t()) + &self.bias)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u32>> {
        let scores = self.decision_function(x)?;
        Ok(scores
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |best, (c, &s)| if s > best.1 { (c, s) } else { best })
                    .0 as u32
            })
            .collect())
    }
}

/// `100 * correct / total`; zero for an empty set.
pub fn evaluate_accuracy(model: &LogisticRegression, x: ArrayView2<'_, f64>, y: &[u32]) -> Result<f64> {
    let pred = model.predict(x)?;
    if pred.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} samples, {} labels", pred.len(), y.len())));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let correct = pred.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / y.len() as f64)
}

fn standardize(x: ArrayView2<'_, f64>, mean: &Array1<f64>, inv_std: &Array1<f64>) -> Array2<f64> {
    let mut xs = x.to_owned();
    for mut row in xs.rows_mut() {
        Zip::from(&mut row).and(mean).and(inv_std).for_each(|v, &m, &s| *v = (*v - m) * s);
    }
    xs
}

fn softmax(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
    z
}

/// Largest eigenvalue of `[X 1]^T [X 1] / n` by power iteration.
fn top_eigenvalue(x: &Array2<f64>) -> f64 {
    let (n, d) = x.dim();
    let mut v = Array1::<f64>::from_elem(d + 1, 1.0 / ((d + 1) as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100 {
        let xv = x.dot(&v.slice(ndarray::s![..d])) + v[d];
        let mut next = Array1::<f64>::zeros(d + 1);
        next.slice_mut(ndarray::s![..d]).assign(&x.t().dot(&xv));
        next[d] = xv.sum();
        next /= n as f64;
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - lambda).abs() <= 1e-9 * norm;
        lambda = norm;
        v = next / norm;
        if converged {
            break;
        }
    }
    lambda
}
