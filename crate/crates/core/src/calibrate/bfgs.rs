//! Dense BFGS with a backtracking Armijo line search.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Gradient infinity-norm fell below the tolerance.
    GradientNorm,
    /// A full quasi-Newton step changed the loss by less than the relative
    /// threshold.
    RelativeLossChange,
    MaxIterations,
    LineSearchFailed,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(self, Termination::GradientNorm | Termination::RelativeLossChange)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsSettings {
    pub gradient_tolerance: f64,
    pub relative_loss_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MAX_FIRST_STEP: f64 = 1.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn identity(n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
}

fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| dot(row, v)).collect()
}

/// Minimizes `f` from `x0`. `f` returns `None` where the objective is
/// undefined; the line search backs away from such points. Returns `None`
/// only when the start point itself is undefined.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], settings: BfgsSettings) -> Option<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x).filter(|(v, g)| v.is_finite() && g.iter().all(|x| x.is_finite()))?;
    let mut h = identity(n, 1.0);
    let mut h_is_initial = true;
    let mut first_step = true;

    for iter in 0..settings.max_iterations {
        if inf_norm(&g) < settings.gradient_tolerance {
            return Some(BfgsOutcome {
                x,
                value: fx,
                gradient: g,
                iterations: iter,
                termination: Termination::GradientNorm,
            });
        }

        let mut p: Vec<f64> = mat_vec(&h, &g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            h = identity(n, 1.0);
            h_is_initial = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        if h_is_initial && first_step {
            let norm = inf_norm(&p);
            if norm > MAX_FIRST_STEP {
                p.iter_mut().for_each(|v| *v *= MAX_FIRST_STEP / norm);
                slope = dot(&g, &p);
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        let mut stalled = false;
        for attempt in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            if let Some((ft, gt)) = f(&trial).filter(|(v, g)| v.is_finite() && g.iter().all(|x| x.is_finite())) {
                if ft <= fx + ARMIJO_C1 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                if attempt == 0 && !h_is_initial && (ft - fx).abs() <= settings.relative_loss_tolerance * fx.abs() {
                    stalled = true;
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if stalled {
                return Some(BfgsOutcome {
                    x,
                    value: fx,
                    gradient: g,
                    iterations: iter + 1,
                    termination: Termination::RelativeLossChange,
                });
            }
            if h_is_initial {
                return Some(BfgsOutcome {
                    x,
                    value: fx,
                    gradient: g,
                    iterations: iter + 1,
                    termination: Termination::LineSearchFailed,
                });
            }
            h = identity(n, 1.0);
            h_is_initial = true;
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let change = (fx - f_new).abs();
        let previous = fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        first_step = false;

        if change <= settings.relative_loss_tolerance * previous.abs() && !h_is_initial {
            return Some(BfgsOutcome {
                x,
                value: fx,
                gradient: g,
                iterations: iter + 1,
                termination: Termination::RelativeLossChange,
            });
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if h_is_initial {
                h = identity(n, sy / dot(&y, &y));
            }
            let hy = mat_vec(&h, &y);
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
            h_is_initial = false;
        }
    }
    let termination =
        if inf_norm(&g) < settings.gradient_tolerance { Termination::GradientNorm } else { Termination::MaxIterations };
    Some(BfgsOutcome { x, value: fx, gradient: g, iterations: settings.max_iterations, termination })
}
