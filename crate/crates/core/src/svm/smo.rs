// SPDX-License-Identifier: Apache-2.0

//! Two-variable SMO for the box-constrained SVM dual
//!
//! ```text
//! min  1/2 a'Qa - sum(a)   s.t.  y'a = 0,  0 <= a_i <= U_i,   Q_ij = y_i y_j K_ij
//! ```
//!
//! The first index of each pair is the maximal violator; the second maximises
//! the second-order decrease of the objective among violating partners. The
//! loop stops once the largest KKT violation gap `m(a) - M(a)` drops below
//! `tol`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::rbf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStatus {
    pub converged: bool,
    pub iterations: u64,
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub status: SolverStatus,
}

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 256 << 20;

/// RBF kernel rows computed on demand, kept in a FIFO cache.
struct KernelRows<'a> {
    points: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Box<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(points: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = points.len();
        let capacity = (CACHE_BYTES / (n.max(1) * 8)).clamp(2, n.max(2));
        Self {
            points,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    /// Make row `i` resident without evicting `keep`.
    fn ensure(&mut self, i: usize, keep: usize) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            let pos = self.order.iter().position(|&r| r != keep).expect("capacity >= 2");
            let victim = self.order.remove(pos).expect("position is valid");
            self.rows[victim] = None;
        }
        let xi = &self.points[i];
        let row: Box<[f64]> = self.points.iter().map(|xj| rbf(self.gamma, xi, xj)).collect();
        self.rows[i] = Some(row);
        self.order.push_back(i);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row resident")
    }
}

/// Solve the dual. `y` holds +1/-1, `upper` the per-point box bounds.
pub(crate) fn solve(points: &[Vec<f64>], y: &[f64], upper: &[f64], gamma: f64, tol: f64, max_iter: u64) -> Solution {
    let n = points.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut kernel = KernelRows::new(points, gamma);
    let at_upper = |a: f64, u: f64| a >= u;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 {
                !at_upper(alpha[t], upper[t])
            } else {
                !at_lower(alpha[t])
            };
            if in_up && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        kernel.ensure(i, i);
        let ki = kernel.row(i);

        // j: best second-order partner in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            let in_low = if y[t] > 0.0 {
                !at_lower(alpha[t])
            } else {
                !at_upper(alpha[t], upper[t])
            };
            if !in_low {
                continue;
            }
            let yg = y[t] * grad[t];
            if yg > gmax2 {
                gmax2 = yg;
            }
            let b = gmax + yg;
            if b > 0.0 {
                let mut a = 2.0 - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        kernel.ensure(j, i);
        let (ki, kj) = (kernel.row(i), kernel.row(j));
        let kij = ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (upper[i], upper[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = (2.0 - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = ((ai - old_i) * y[i], (aj - old_j) * y[j]);
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t], upper[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    // sum(a) - 1/2 a'Qa = -sum(a_t (g_t - 1)) / 2
    let objective = -alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() / 2.0;

    Solution {
        alpha,
        bias: -rho,
        objective,
        status: SolverStatus { converged, iterations },
    }
}

/// Dual objective `sum(a) - 1/2 a'Qa` of an arbitrary feasible point, computed
/// directly from the kernel.
pub fn dual_objective(points: &[Vec<f64>], y: &[f64], alpha: &[f64], gamma: f64) -> f64 {
    let mut quad = 0.0;
    for i in 0..points.len() {
        for j in 0..points.len() {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * rbf(gamma, &points[i], &points[j]);
        }
    }
    alpha.iter().sum::<f64>() - quad / 2.0
}
