//! Dense BFGS with Armijo backtracking and box-bound projection.

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative loss change drops below this.
    pub loss_change_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Give up on a line search below this step size.
    pub min_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            grad_tol: 1e-6,
            loss_change_tol: 1e-8,
            c1: 1e-4,
            backtrack: 0.5,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub gradient: Vec<f64>,
    /// Loss at theta0 followed by the loss of every accepted iterate;
    /// non-increasing.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when a line search could not find a decreasing step; the best
    /// iterate so far is returned.
    pub line_search_failed: bool,
}

fn project(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(*lo, *hi);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimize `f` subject to box bounds, starting from `theta0` (projected into
/// the bounds). `f` returns the loss and its gradient.
pub fn bfgs_optimize(
    mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    theta0: &[f64],
    bounds: &[(f64, f64)],
    opts: BfgsOptions,
) -> Result<BfgsOutcome> {
    let n = theta0.len();
    assert_eq!(bounds.len(), n, "one bound pair per parameter");
    let mut theta = theta0.to_vec();
    project(&mut theta, bounds);

    let (mut loss, mut grad) = f(&theta)?;
    let mut history = vec![loss];
    // inverse Hessian approximation
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j)).collect())
        .collect();
    let mut line_search_failed = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut first_update = true;

    for _ in 0..opts.max_iters {
        if inf_norm(&grad) <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        // direction p = -H g, with a steepest-descent fallback
        let mut p: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i][j] * grad[j]).sum::<f64>())
            .collect();
        let descent: f64 = p.iter().zip(&grad).map(|(pi, gi)| pi * gi).sum();
        if !descent.is_finite() || descent >= 0.0 {
            for i in 0..n {
                for j in 0..n {
                    h[i][j] = f64::from(i == j);
                }
            }
            p = grad.iter().map(|g| -g).collect();
        }

        // Armijo backtracking on the projected step
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= opts.min_step {
            let mut cand: Vec<f64> = theta
                .iter()
                .zip(&p)
                .map(|(t, pi)| t + alpha * pi)
                .collect();
            project(&mut cand, bounds);
            let actual_step: Vec<f64> = cand.iter().zip(&theta).map(|(c, t)| c - t).collect();
            if inf_norm(&actual_step) == 0.0 {
                break; // pinned at the bounds along this direction
            }
            let predicted: f64 = grad
                .iter()
                .zip(&actual_step)
                .map(|(g, s)| g * s)
                .sum();
            let (cand_loss, cand_grad) = f(&cand)?;
            if cand_loss.is_finite() && cand_loss <= loss + opts.c1 * predicted.min(0.0) {
                accepted = Some((cand, cand_loss, cand_grad, actual_step));
                break;
            }
            alpha *= opts.backtrack;
        }

        let Some((new_theta, new_loss, new_grad, step)) = accepted else {
            line_search_failed = true;
            break;
        };

        // BFGS inverse update with curvature guard
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = step.iter().zip(&y).map(|(s, y)| s * y).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-12 * inf_norm(&step) * inf_norm(&y).max(1e-300) {
            if first_update && yy > 0.0 {
                let scale = sy / yy;
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] = if i == j { scale } else { 0.0 };
                    }
                }
                first_update = false;
            }
            let rho = 1.0 / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum::<f64>())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (step[i] * hy[j] + hy[i] * step[j])
                        + rho * rho * yhy * step[i] * step[j]
                        + rho * step[i] * step[j];
                }
            }
        }

        let rel_change = (loss - new_loss).abs() / loss.abs().max(1e-300);
        theta = new_theta;
        loss = new_loss;
        grad = new_grad;
        history.push(loss);
        if rel_change <= opts.loss_change_tol {
            converged = true;
            break;
        }
    }
    if !converged && inf_norm(&grad) <= opts.grad_tol {
        converged = true;
    }

    Ok(BfgsOutcome {
        theta,
        loss,
        gradient: grad,
        loss_history: history,
        iterations,
        converged,
        line_search_failed,
    })
}
