//! Per-user maximum-likelihood refit with every other vector frozen.
//!
//! Minimizes `sum_{(e, y)} l(y | phi_e, phi_u) + lambda * ||phi_u||^2`, a
//! strictly convex k-dimensional problem, by damped Newton iterations.

use nalgebra::{DMatrix, DVector};

use super::{dloss_dscore, dot, nll_from_score, sigmoid, LatentMatrix};
use crate::error::{Error, Result};
use crate::store::EntityId;

const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub struct RefitOutcome {
    pub phi_u: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

pub fn user_objective(labeled: &[(EntityId, i8)], phi: &LatentMatrix, phi_u: &[f64], lambda: f64) -> f64 {
    let data: f64 = labeled
        .iter()
        .map(|&(e, y)| nll_from_score(y, dot(phi.vector(e), phi_u)))
        .sum();
    data + lambda * dot(phi_u, phi_u)
}

fn gradient(labeled: &[(EntityId, i8)], phi: &LatentMatrix, phi_u: &[f64], lambda: f64) -> DVector<f64> {
    let k = phi_u.len();
    let mut g = DVector::from_iterator(k, phi_u.iter().map(|x| 2.0 * lambda * x));
    for &(e, y) in labeled {
        let v = phi.vector(e);
        let d = dloss_dscore(y, dot(v, phi_u));
        for j in 0..k {
            g[j] += d * v[j];
        }
    }
    g
}

fn hessian(labeled: &[(EntityId, i8)], phi: &LatentMatrix, phi_u: &[f64], lambda: f64) -> DMatrix<f64> {
    let k = phi_u.len();
    let mut h = DMatrix::from_diagonal_element(k, k, 2.0 * lambda);
    for &(e, _) in labeled {
        let v = phi.vector(e);
        let s = dot(v, phi_u);
        let w = sigmoid(s) * sigmoid(-s);
        for r in 0..k {
            let wr = w * v[r];
            for c in 0..k {
                h[(r, c)] += wr * v[c];
            }
        }
    }
    h
}

/// Refits `user`, warm-started from its current vector in `phi`.
pub fn refit_user(user: EntityId, labeled: &[(EntityId, i8)], phi: &LatentMatrix, lambda: f64) -> Result<Vec<f64>> {
    refit_user_from(phi.vector(user), labeled, phi, lambda).map(|o| o.phi_u)
}

/// Refit from an explicit starting point.
pub fn refit_user_from(start: &[f64], labeled: &[(EntityId, i8)], phi: &LatentMatrix, lambda: f64) -> Result<RefitOutcome> {
    if labeled.is_empty() {
        return Err(Error::Input("refit needs at least one labeled entity".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    if start.len() != phi.k() {
        return Err(Error::Dimension {
            expected: phi.k(),
            got: start.len(),
        });
    }
    if let Some(&(e, _)) = labeled.iter().find(|(e, _)| e.index() >= phi.n_entities()) {
        return Err(Error::Input(format!("entity {e} has no latent vector")));
    }

    let mut x = start.to_vec();
    let mut f = user_objective(labeled, phi, &x, lambda);
    for iter in 0..MAX_NEWTON_ITERS {
        let g = gradient(labeled, phi, &x, lambda);
        let gnorm = g.norm();
        if gnorm <= GRAD_TOL {
            return Ok(RefitOutcome {
                phi_u: x,
                iterations: iter,
                grad_norm: gnorm,
            });
        }
        let h = hessian(labeled, phi, &x, lambda);
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Numerical("refit Hessian is not positive definite".into()))?;
        let dir = chol.solve(&g);
        let slope = g.dot(&dir);

        let mut t = 1.0;
        let mut accepted = false;
        let mut cand = vec![0.0; x.len()];
        for _ in 0..MAX_HALVINGS {
            for j in 0..x.len() {
                cand[j] = x[j] - t * dir[j];
            }
            let fc = user_objective(labeled, phi, &cand, lambda);
            // Armijo, with a floor so that round-off near the optimum does not
            // reject a full Newton step.
            if fc <= f - 1e-4 * t * slope || (t == 1.0 && fc <= f + 1e-12 * f.abs()) {
                accepted = true;
                f = fc;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Numerical(format!(
                "refit line search stalled at iteration {iter}, |grad| = {gnorm:.3e}"
            )));
        }
        x.copy_from_slice(&cand);
    }
    let gnorm = gradient(labeled, phi, &x, lambda).norm();
    if gnorm <= GRAD_TOL {
        return Ok(RefitOutcome {
            phi_u: x,
            iterations: MAX_NEWTON_ITERS,
            grad_norm: gnorm,
        });
    }
    Err(Error::Numerical(format!(
        "refit did not converge in {MAX_NEWTON_ITERS} Newton iterations, |grad| = {gnorm:.3e}, objective = {f:.6e}"
    )))
}
