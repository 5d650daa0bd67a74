//! L2-regularised logistic regression.
//!
//! Objective: `(1/n) sum_i log(1 + exp(-y_i (w.x_i + b))) + lambda |w|^2`
//! with `y_i` in {-1, +1} and an unpenalised bias. Minimised with limited
//! memory quasi-Newton directions and a backtracking Armijo line search, so
//! every accepted step lowers the objective.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub memory: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            tolerance: 1e-8,
            max_iterations: 10_000,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Gradient infinity norm fell below the tolerance.
    Tolerance,
    IterationLimit,
    /// No step lowered the objective; the iterate is as good as rounding allows.
    LineSearchStalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub loss: f64,
    pub reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub report: ConvergenceReport,
    /// Objective after every accepted iteration, starting from the initial point.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn decision_function(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.decision(x.row(i))).collect()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        self.decision_function(x).into_iter().map(sigmoid).collect()
    }

    pub fn converged(&self) -> bool {
        self.report.reason == StopReason::Tolerance
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Objective and gradient at `params = [w.., b]`.
pub fn loss_and_gradient(x: &Matrix, y: &[f64], lambda: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let m = margins(x, y, params);
    let loss = m.iter().map(|&mi| log1p_exp_neg(mi)).sum::<f64>() / x.rows() as f64
        + lambda * dot(&params[..x.cols()], &params[..x.cols()]);
    (loss, gradient(x, y, lambda, params, &m))
}

/// `y_i (w.x_i + b)` for every row.
fn margins(x: &Matrix, y: &[f64], params: &[f64]) -> Vec<f64> {
    let d = x.cols();
    (0..x.rows()).map(|i| y[i] * (dot(&params[..d], x.row(i)) + params[d])).collect()
}

fn gradient(x: &Matrix, y: &[f64], lambda: f64, params: &[f64], margins: &[f64]) -> Vec<f64> {
    let d = x.cols();
    let n = x.rows() as f64;
    let mut grad = vec![0.0; d + 1];
    for (i, &m) in margins.iter().enumerate() {
        // d/dm log(1 + exp(-m)) = -sigmoid(-m)
        let coef = -y[i] * sigmoid(-m);
        for (g, v) in grad[..d].iter_mut().zip(x.row(i)) {
            *g += coef * v;
        }
        grad[d] += coef;
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (g, wj) in grad[..d].iter_mut().zip(&params[..d]) {
        *g += 2.0 * lambda * wj;
    }
    grad
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Current iterate with its margins, objective and gradient.
struct State {
    params: Vec<f64>,
    margins: Vec<f64>,
    loss: f64,
    grad: Vec<f64>,
}

/// Fits the model; `y` holds labels in {-1, +1}.
pub fn train_logistic(x: &Matrix, y: &[f64], lambda: f64, options: &TrainOptions) -> Result<LogisticModel> {
    assert_eq!(x.rows(), y.len(), "one label per row");
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("regularisation strength must be finite and >= 0, got {lambda}")));
    }
    if !x.is_finite() {
        return Err(Error::Data("design matrix contains non-finite values".into()));
    }
    let positives = y.iter().filter(|&&v| v > 0.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Degenerate("logistic regression needs both classes".into()));
    }
    let params = vec![0.0; x.cols() + 1];
    let (loss, grad) = loss_and_gradient(x, y, lambda, &params);
    let mut state = State {
        margins: margins(x, y, &params),
        params,
        loss,
        grad,
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut loss_trace = vec![state.loss];
    let mut iterations = 0;
    let reason = loop {
        if inf_norm(&state.grad) <= options.tolerance {
            break StopReason::Tolerance;
        }
        if iterations >= options.max_iterations {
            break StopReason::IterationLimit;
        }
        let mut direction = two_loop(&state.grad, &history);
        if dot(&state.grad, &direction).partial_cmp(&0.0) != Some(std::cmp::Ordering::Less) {
            history.clear();
            direction = state.grad.iter().map(|g| -g).collect();
        }
        let Some((step, next)) = line_search(x, y, lambda, &state, &direction, history.is_empty()) else {
            if history.is_empty() {
                break StopReason::LineSearchStalled;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = direction.iter().map(|d| d * step).collect();
        let yv: Vec<f64> = next.grad.iter().zip(&state.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        state = next;
        loss_trace.push(state.loss);
        iterations += 1;
    };
    let d = x.cols();
    Ok(LogisticModel {
        weights: state.params[..d].to_vec(),
        bias: state.params[d],
        lambda,
        report: ConvergenceReport {
            iterations,
            gradient_norm: inf_norm(&state.grad),
            loss: state.loss,
            reason,
        },
        loss_trace,
    })
}

fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Backtracking Armijo search along `direction`.
///
/// The change in objective is summed from per-row differences,
/// `log1p(sigmoid(-m) * expm1(-dm))`, instead of subtracting two full
/// objectives. That keeps the sufficient-decrease test meaningful when the
/// decrease is far below the rounding error of the objective itself, which
/// happens near the optimum under strong regularisation.
fn line_search(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    state: &State,
    direction: &[f64],
    steepest: bool,
) -> Option<(f64, State)> {
    const ARMIJO: f64 = 1e-4;
    let d = x.cols();
    let n = x.rows() as f64;
    let slope = dot(&state.grad, direction);
    // Margin change per unit step.
    let dz: Vec<f64> = (0..x.rows())
        .map(|i| y[i] * (dot(&direction[..d], x.row(i)) + direction[d]))
        .collect();
    let w = &state.params[..d];
    let dw = &direction[..d];
    let (w_dw, dw_dw) = (dot(w, dw), dot(dw, dw));

    let mut step = if steepest {
        (1.0 / inf_norm(&state.grad)).min(1.0)
    } else {
        1.0
    };
    for _ in 0..60 {
        let data_change: f64 = state
            .margins
            .iter()
            .zip(&dz)
            .map(|(&m, &z)| (sigmoid(-m) * (-step * z).exp_m1()).ln_1p())
            .sum::<f64>()
            / n;
        let change = data_change + lambda * step * (2.0 * w_dw + step * dw_dw);
        if change.is_finite() && change <= ARMIJO * step * slope {
            let params: Vec<f64> = state.params.iter().zip(direction).map(|(p, v)| p + step * v).collect();
            let margins: Vec<f64> = state.margins.iter().zip(&dz).map(|(m, z)| m + step * z).collect();
            let grad = gradient(x, y, lambda, &params, &margins);
            return Some((
                step,
                State {
                    params,
                    margins,
                    loss: state.loss + change,
                    grad,
                },
            ));
        }
        step *= 0.5;
    }
    None
}
