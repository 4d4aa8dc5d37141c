//! Deterministic L2-regularized logistic regression via full-batch Newton
//! (iteratively reweighted least squares).
//!
//! The objective is the (optionally sample-weighted) negative log-likelihood
//! plus `l2/2 * ||w||^2`; the intercept is not penalized. Parameters start at
//! zero and Newton steps run until the gradient norm falls below the
//! tolerance or the iteration cap is reached. Identical inputs produce
//! bit-identical parameters: there is no randomness, and all reductions run
//! in input order.

/// Stopping and regularization knobs for model training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// L2 penalty strength on the coefficients (never the intercept).
    pub l2: f64,
    pub max_iterations: usize,
    /// Gradient-norm convergence tolerance.
    pub tolerance: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            max_iterations: 100,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// False when the iteration cap was hit before the gradient tolerance;
    /// the parameters are still returned and used.
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    /// P(y = 1 | x).
    pub fn probability(&self, features: &[f64]) -> f64 {
        let z = self.intercept
            + self
                .coefficients
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        sigmoid(z)
    }

    /// Predicted class; probability exactly 0.5 classifies as 1.
    pub fn predict(&self, features: &[f64]) -> f64 {
        if self.probability(features) >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fit on rows `xs` with labels in {0, 1}. `sample_weights`, when given,
/// scales each row's loss term (the Horvitz-Thompson path).
pub fn train_logistic(
    xs: &[&[f64]],
    ys: &[f64],
    sample_weights: Option<&[f64]>,
    config: &TrainingConfig,
) -> LogisticModel {
    assert_eq!(xs.len(), ys.len());
    if let Some(w) = sample_weights {
        assert_eq!(w.len(), ys.len());
    }
    let d = xs.first().map_or(0, |x| x.len());
    let p = d + 1; // coefficients + intercept in the last slot
    let mut params = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut hess = vec![0.0; p * p];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for (i, x) in xs.iter().enumerate() {
            let s = sample_weights.map_or(1.0, |w| w[i]);
            let z = params[d]
                + params[..d]
                    .iter()
                    .zip(x.iter())
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            let prob = sigmoid(z);
            let resid = s * (prob - ys[i]);
            let curv = s * prob * (1.0 - prob);
            for a in 0..d {
                grad[a] += resid * x[a];
                for b in a..d {
                    hess[a * p + b] += curv * x[a] * x[b];
                }
                hess[a * p + d] += curv * x[a];
            }
            grad[d] += resid;
            hess[d * p + d] += curv;
        }
        for a in 0..d {
            grad[a] += config.l2 * params[a];
            hess[a * p + a] += config.l2;
        }
        // mirror the upper triangle
        for a in 0..p {
            for b in 0..a {
                hess[a * p + b] = hess[b * p + a];
            }
        }

        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= config.tolerance {
            converged = true;
            break;
        }
        let Some(step) = cholesky_solve(&hess, &grad, p) else {
            // singular curvature (e.g. saturated probabilities); stop here
            break;
        };
        for (w, s) in params.iter_mut().zip(&step) {
            *w -= s;
        }
        iterations += 1;
    }

    let intercept = params[d];
    params.truncate(d);
    LogisticModel {
        coefficients: params,
        intercept,
        converged,
        iterations,
    }
}

/// Solve `A x = b` for symmetric positive-definite `A` (row-major, p x p).
/// Returns None when a pivot is not strictly positive.
fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    // forward then back substitution
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * p + k] * y[k];
        }
        y[i] = sum / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for k in (i + 1)..p {
            sum -= l[k * p + i] * x[k];
        }
        x[i] = sum / l[i * p + i];
    }
    Some(x)
}
