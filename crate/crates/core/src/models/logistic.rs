//! Multinomial logistic regression fitted by accelerated proximal gradient
//! descent. The objective matches a `C`-weighted data term:
//!
//! * L2: `mean CE + ||W||^2 / (2 C n)`
//! * L1: `mean CE + ||W||_1 / (C n)`
//!
//! Intercepts are not penalized.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::softmax_in_place;

const MAX_ITER: usize = 1000;
const TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

/// Nominal solver choice. Both values run the same deterministic optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Liblinear,
    Saga,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub penalty: Penalty,
    pub solver: Solver,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            penalty: Penalty::L2,
            solver: Solver::Liblinear,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    /// `d x k` coefficient matrix.
    coef: Array2<f64>,
    intercept: Array1<f64>,
}

struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    onehot: Array2<f64>,
    l2: f64,
}

impl Problem<'_> {
    /// Smooth part of the objective and its gradient at packed parameters
    /// (`d + 1` rows, the last holding intercepts).
    fn value_grad(&self, theta: &Array2<f64>, want_grad: bool) -> (f64, Option<Array2<f64>>) {
        let d = self.x.ncols();
        let n = self.x.nrows() as f64;
        let w = theta.slice(s![..d, ..]);
        let b = theta.row(d);
        let mut p = self.x.dot(&w);
        p += &b;
        let mut loss = 0.0;
        for (mut row, y) in p.rows_mut().into_iter().zip(self.onehot.rows()) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row.dot(&y);
            softmax_in_place(row.as_slice_mut().expect("contiguous"));
        }
        loss /= n;
        loss += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if !want_grad {
            return (loss, None);
        }
        p -= &self.onehot;
        p /= n;
        let mut grad = Array2::zeros(theta.raw_dim());
        grad.slice_mut(s![..d, ..]).assign(&self.x.t().dot(&p));
        grad.row_mut(d).assign(&p.sum_axis(Axis(0)));
        if self.l2 > 0.0 {
            Zip::from(grad.slice_mut(s![..d, ..]))
                .and(w)
                .for_each(|g, &wv| *g += self.l2 * wv);
        }
        (loss, Some(grad))
    }
}

fn soft_threshold(theta: &mut Array2<f64>, d: usize, amount: f64) {
    if amount <= 0.0 {
        return;
    }
    theta
        .slice_mut(s![..d, ..])
        .mapv_inplace(|v| v.signum() * (v.abs() - amount).max(0.0));
}

impl LogisticModel {
    pub fn fit(params: &LogisticParams, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Self {
        let (n, d) = x.dim();
        let strength = 1.0 / (params.c * n as f64);
        let (l1, l2) = match params.penalty {
            Penalty::L1 => (strength, 0.0),
            Penalty::L2 => (0.0, strength),
        };
        let mut onehot = Array2::zeros((n, n_classes));
        for (r, &c) in y.iter().enumerate() {
            onehot[[r, c]] = 1.0;
        }
        let problem = Problem { x, onehot, l2 };

        let mut theta = Array2::<f64>::zeros((d + 1, n_classes));
        let mut momentum = theta.clone();
        let mut t: f64 = 1.0;
        let mut lipschitz = 1.0;
        for _ in 0..MAX_ITER {
            let (f_y, g_y) = problem.value_grad(&momentum, true);
            let g_y = g_y.expect("gradient requested");
            let next = loop {
                let mut z = &momentum - &(&g_y / lipschitz);
                soft_threshold(&mut z, d, l1 / lipschitz);
                let diff = &z - &momentum;
                let (f_z, _) = problem.value_grad(&z, false);
                let bound = f_y + (&g_y * &diff).sum() + 0.5 * lipschitz * diff.iter().map(|v| v * v).sum::<f64>();
                if f_z <= bound + 1e-12 * f_y.abs().max(1.0) {
                    break z;
                }
                lipschitz *= 2.0;
            };
            let step = &next - &theta;
            let delta = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            // Restart momentum when it points uphill.
            let uphill = (&(&momentum - &next) * &step).sum() > 0.0;
            let t_next = if uphill { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            momentum = if uphill {
                next.clone()
            } else {
                &next + &(&step * ((t - 1.0) / t_next))
            };
            theta = next;
            t = t_next;
            if delta < TOL * scale {
                break;
            }
        }
        Self {
            coef: theta.slice(s![..d, ..]).to_owned(),
            intercept: theta.row(d).to_owned(),
        }
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coef
    }

    pub fn intercepts(&self) -> &Array1<f64> {
        &self.intercept
    }

    /// Frobenius norm of the coefficients (intercepts excluded).
    pub fn coef_norm(&self) -> f64 {
        self.coef.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut p = x.dot(&self.coef);
        p += &self.intercept;
        for mut row in p.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("contiguous"));
        }
        p
    }
}
