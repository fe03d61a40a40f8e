//! L2-regularized, L2-loss (squared hinge) linear SVM in the primal.
//!
//! Minimizes `½‖w‖² + C·Σ max(0, 1 − yᵢ(w·xᵢ + b))²` with the bias left
//! unregularized. The objective is convex and piecewise quadratic, so the
//! solver takes generalized Newton steps (Hessian over the currently active
//! margin violators) with an Armijo backtracking line search. It starts from
//! zero weights and accepts only steps that decrease the objective, so the
//! per-epoch objective sequence is non-increasing and fully deterministic.

use nalgebra::{DMatrix, DVector};

use super::{LinearModel, TrainConfig};
use crate::error::{Error, Result};

/// Training problem with labels in `{-1, +1}`.
#[derive(Debug, Clone)]
pub struct SvmProblem {
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<f64>,
    c: f64,
}

impl SvmProblem {
    pub fn new<P: AsRef<[f32]>, N: AsRef<[f32]>>(
        positives: &[P],
        negatives: &[N],
        c: f64,
    ) -> Result<Self> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::invalid("training needs at least one positive and one negative"));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::invalid(format!("C must be positive, got {c}")));
        }
        let dim = positives[0].as_ref().len();
        let mut rows = Vec::with_capacity((positives.len() + negatives.len()) * dim);
        let mut labels = Vec::with_capacity(positives.len() + negatives.len());
        let all = positives
            .iter()
            .map(|p| (p.as_ref(), 1.0))
            .chain(negatives.iter().map(|n| (n.as_ref(), -1.0)));
        for (x, y) in all {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: x.len() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite feature value"));
            }
            rows.extend(x.iter().map(|&v| v as f64));
            labels.push(y);
        }
        Ok(SvmProblem { dim, rows, labels, c })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Margin slack `1 − y(w·x + b)` per example.
    fn slacks(&self, w: &[f64], b: f64) -> Vec<f64> {
        (0..self.labels.len())
            .map(|i| {
                let score: f64 = self.row(i).iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b;
                1.0 - self.labels[i] * score
            })
            .collect()
    }

    pub fn objective(&self, w: &[f64], b: f64) -> f64 {
        let reg = 0.5 * w.iter().map(|x| x * x).sum::<f64>();
        let loss: f64 = self.slacks(w, b).iter().filter(|&&s| s > 0.0).map(|s| s * s).sum();
        reg + self.c * loss
    }

    /// Gradient with respect to `(w, b)`; the last entry is the bias.
    pub fn gradient(&self, w: &[f64], b: f64) -> Vec<f64> {
        let mut g: Vec<f64> = w.to_vec();
        g.push(0.0);
        for (i, s) in self.slacks(w, b).into_iter().enumerate() {
            if s > 0.0 {
                let coef = -2.0 * self.c * self.labels[i] * s;
                for (gj, xj) in g.iter_mut().zip(self.row(i)) {
                    *gj += coef * xj;
                }
                g[self.dim] += coef;
            }
        }
        g
    }

    fn newton_direction(&self, w: &[f64], b: f64, grad: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim + 1;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for j in 0..self.dim {
            h[(j, j)] = 1.0;
        }
        // Keeps the system definite when no example is active.
        h[(self.dim, self.dim)] = 1e-10;
        let mut xt = vec![0.0; n];
        for (i, s) in self.slacks(w, b).into_iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            xt[..self.dim].copy_from_slice(self.row(i));
            xt[self.dim] = 1.0;
            for a in 0..n {
                let va = 2.0 * self.c * xt[a];
                if va == 0.0 {
                    continue;
                }
                for bcol in a..n {
                    h[(a, bcol)] += va * xt[bcol];
                }
            }
        }
        for a in 0..n {
            for bcol in 0..a {
                h[(a, bcol)] = h[(bcol, a)];
            }
        }
        let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
        h.cholesky().map(|chol| chol.solve(&rhs).iter().copied().collect())
    }
}

/// Objective value after each accepted epoch, starting with the zero model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub objectives: Vec<f64>,
}

pub fn train_svm_traced<P: AsRef<[f32]>, N: AsRef<[f32]>>(
    concept: &str,
    positives: &[P],
    negatives: &[N],
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainTrace)> {
    let problem = SvmProblem::new(positives, negatives, cfg.c)?;
    let (w, b, objectives) = solve(&problem, cfg.epochs, cfg.tol);
    let model = LinearModel { concept: concept.to_string(), weights: w, bias: b };
    Ok((model, TrainTrace { objectives }))
}

/// Trains one binary concept model. Positive iff `w·x + b > 0`.
pub fn train_svm<P: AsRef<[f32]>, N: AsRef<[f32]>>(
    concept: &str,
    positives: &[P],
    negatives: &[N],
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    train_svm_traced(concept, positives, negatives, cfg).map(|(m, _)| m)
}

pub(crate) fn solve(problem: &SvmProblem, epochs: usize, tol: f64) -> (Vec<f64>, f64, Vec<f64>) {
    let d = problem.dim;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut f = problem.objective(&w, b);
    let mut history = vec![f];
    for _ in 0..epochs {
        let g = problem.gradient(&w, b);
        let g_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if g_norm <= 1e-12 {
            break;
        }
        let dir = problem
            .newton_direction(&w, b, &g)
            .filter(|dir| dir.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() < 0.0)
            .unwrap_or_else(|| g.iter().map(|x| -x).collect());
        let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(&dir).map(|(w, d)| w + step * d).collect();
            let b_new = b + step * dir[d];
            let f_new = problem.objective(&w_new, b_new);
            if f_new <= f + 1e-4 * step * slope {
                accepted = Some((w_new, b_new, f_new));
                break;
            }
            step *= 0.5;
        }
        let Some((w_new, b_new, f_new)) = accepted else { break };
        let improvement = f - f_new;
        w = w_new;
        b = b_new;
        f = f_new;
        history.push(f);
        if improvement <= tol * f.abs().max(1.0) {
            break;
        }
    }
    (w, b, history)
}
