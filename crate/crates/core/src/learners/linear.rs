use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Dense;
use crate::learners::LinearParams;

/// Logistic (one row, scores `[1 - p, p]`) or softmax (one row per class)
/// coefficients. Each row is `[intercept, w_1, ..., w_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub multinomial: bool,
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub iterations: usize,
    pub converged: bool,
    pub loss_history: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot1(w: &[f64], x: &[f64]) -> f64 {
    w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean negative log-likelihood plus `lambda/2 * |w|^2` (intercept
/// included), and its gradient. `y` holds 0/1.
pub fn binomial_objective(w: &[f64], x: &Dense, y: &[usize], lambda: f64) -> (f64, Vec<f64>) {
    let n = x.rows as f64;
    let mut f = 0.0;
    let mut g = vec![0.0; w.len()];
    for i in 0..x.rows {
        let xi = x.row(i);
        let eta = dot1(w, xi);
        let yi = y[i] as f64;
        f += softplus(eta) - yi * eta;
        let r = sigmoid(eta) - yi;
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(xi) {
            *gj += r * xj;
        }
    }
    f = f / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (gj, wj) in g.iter_mut().zip(w) {
        *gj = *gj / n + lambda * wj;
    }
    (f, g)
}

/// Softmax counterpart of [`binomial_objective`]; `w` is `k` rows of
/// `d + 1` flattened row-major.
pub fn multinomial_objective(w: &[f64], x: &Dense, y: &[usize], k: usize, lambda: f64) -> (f64, Vec<f64>) {
    let p1 = x.cols + 1;
    let n = x.rows as f64;
    let mut f = 0.0;
    let mut g = vec![0.0; w.len()];
    for i in 0..x.rows {
        let xi = x.row(i);
        let eta: Vec<f64> = (0..k).map(|c| dot1(&w[c * p1..(c + 1) * p1], xi)).collect();
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
        f += lse - eta[y[i]];
        for c in 0..k {
            let r = (eta[c] - lse).exp() - if c == y[i] { 1.0 } else { 0.0 };
            let gc = &mut g[c * p1..(c + 1) * p1];
            gc[0] += r;
            for (gj, xj) in gc[1..].iter_mut().zip(xi) {
                *gj += r * xj;
            }
        }
    }
    f = f / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (gj, wj) in g.iter_mut().zip(w) {
        *gj = *gj / n + lambda * wj;
    }
    (f, g)
}

fn binomial_hessian(w: &[f64], x: &Dense, lambda: f64) -> DMatrix<f64> {
    let p1 = x.cols + 1;
    let mut h = DMatrix::<f64>::zeros(p1, p1);
    let mut xa = vec![0.0; p1];
    for i in 0..x.rows {
        let xi = x.row(i);
        xa[0] = 1.0;
        xa[1..].copy_from_slice(xi);
        let p = sigmoid(dot1(w, xi));
        let s = p * (1.0 - p);
        for a in 0..p1 {
            let sa = s * xa[a];
            for b in a..p1 {
                h[(a, b)] += sa * xa[b];
            }
        }
    }
    finish_hessian(h, x.rows as f64, lambda)
}

fn multinomial_hessian(w: &[f64], x: &Dense, k: usize, lambda: f64) -> DMatrix<f64> {
    let p1 = x.cols + 1;
    let dim = k * p1;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut xa = vec![0.0; p1];
    for i in 0..x.rows {
        let xi = x.row(i);
        xa[0] = 1.0;
        xa[1..].copy_from_slice(xi);
        let eta: Vec<f64> = (0..k).map(|c| dot1(&w[c * p1..(c + 1) * p1], xi)).collect();
        let p = softmax(&eta);
        for c in 0..k {
            for l in c..k {
                let s = p[c] * (if c == l { 1.0 } else { 0.0 } - p[l]);
                for a in 0..p1 {
                    let sa = s * xa[a];
                    let b0 = if c == l { a } else { 0 };
                    for b in b0..p1 {
                        h[(c * p1 + a, l * p1 + b)] += sa * xa[b];
                    }
                }
            }
        }
    }
    finish_hessian(h, x.rows as f64, lambda)
}

/// Scales by `1/n`, adds the ridge and mirrors the upper triangle.
fn finish_hessian(mut h: DMatrix<f64>, n: f64, lambda: f64) -> DMatrix<f64> {
    let dim = h.nrows();
    for a in 0..dim {
        for b in a..dim {
            let v = h[(a, b)] / n + if a == b { lambda } else { 0.0 };
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Damped Newton iterations with step halving.
fn newton(
    mut w: Vec<f64>,
    params: &LinearParams,
    objective: impl Fn(&[f64]) -> (f64, Vec<f64>),
    hessian: impl Fn(&[f64]) -> DMatrix<f64>,
) -> (Vec<f64>, FitTrace) {
    let (mut f, mut g) = objective(&w);
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let h = hessian(&w);
        let grad = DVector::from_vec(g.clone());
        let delta = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad,
        };
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = w.iter().zip(delta.iter()).map(|(a, d)| a - t * d).collect();
            let (fc, gc) = objective(&cand);
            if fc <= f {
                accepted = Some((cand, fc, gc));
                break;
            }
            t /= 2.0;
        }
        let Some((cand, fc, gc)) = accepted else {
            converged = true;
            break;
        };
        let step = w
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = cand;
        f = fc;
        g = gc;
        history.push(f);
        if step < params.tolerance {
            converged = true;
            break;
        }
    }
    (
        w,
        FitTrace {
            iterations,
            converged,
            loss_history: history,
        },
    )
}

pub fn fit_binomial(x: &Dense, y: &[usize], params: &LinearParams) -> (LinearModel, FitTrace) {
    let p1 = x.cols + 1;
    let (w, trace) = newton(
        vec![0.0; p1],
        params,
        |w| binomial_objective(w, x, y, params.lambda),
        |w| binomial_hessian(w, x, params.lambda),
    );
    (
        LinearModel {
            multinomial: false,
            coefficients: vec![w],
        },
        trace,
    )
}

pub fn fit_multinomial(x: &Dense, y: &[usize], k: usize, params: &LinearParams) -> (LinearModel, FitTrace) {
    let p1 = x.cols + 1;
    let (w, trace) = newton(
        vec![0.0; k * p1],
        params,
        |w| multinomial_objective(w, x, y, k, params.lambda),
        |w| multinomial_hessian(w, x, k, params.lambda),
    );
    (
        LinearModel {
            multinomial: true,
            coefficients: w.chunks(p1).map(<[f64]>::to_vec).collect(),
        },
        trace,
    )
}

impl LinearModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        if self.multinomial {
            let eta: Vec<f64> = self.coefficients.iter().map(|w| dot1(w, x)).collect();
            softmax(&eta)
        } else {
            let p = sigmoid(dot1(&self.coefficients[0], x));
            vec![1.0 - p, p]
        }
    }
}
