//! Fisher-information question selection.
//!
//! For a logistic CMF model the per-observation Hessian with respect to the
//! user vector is `H(phi_e, phi_u) = w_e * phi_e phi_e^T` with
//! `w_e = sigmoid(s) sigmoid(-s)` and `s = phi_e . phi_u`. It does not depend on
//! the label, so the Fisher information of any entity set can be computed
//! before the user answers. Question sets are chosen to minimize
//! `Tr((I_Q + lambda I)^-1 I_S)` where `S` is the user's unlabeled pool.
//!
//! Every `H` is rank one, so greedy forward selection evaluates each candidate
//! in `O(k^2)` through a Sherman-Morrison update of the running inverse.

use nalgebra::{DMatrix, DVector};

use crate::baselines::SelectorKind;
use crate::error::{Error, Result};
use crate::model::{dot, sigmoid, LatentMatrix};
use crate::store::EntityId;

/// Denominators at or below this make a rank-one update unusable.
const SM_MIN_DENOM: f64 = 1e-14;

/// Curvature weight `sigmoid(s) sigmoid(-s)` of one observation.
#[inline]
pub fn hessian_weight(phi_e: &[f64], phi_u: &[f64]) -> f64 {
    let s = dot(phi_e, phi_u);
    sigmoid(s) * sigmoid(-s)
}

/// Second derivative of the per-observation loss with respect to `phi_u`.
pub fn hessian_term(phi_e: &[f64], phi_u: &[f64]) -> Result<DMatrix<f64>> {
    if phi_e.len() != phi_u.len() {
        return Err(Error::Dimension {
            expected: phi_u.len(),
            got: phi_e.len(),
        });
    }
    let w = hessian_weight(phi_e, phi_u);
    let v = DVector::from_column_slice(phi_e);
    Ok(&v * v.transpose() * w)
}

/// Average of per-entity Hessians for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: DMatrix<f64>,
    pub count: usize,
}

impl FisherMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(k, k),
            count: 0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// `I_S(phi_u) = (1/|S|) sum_{e in S} H(phi_e, phi_u)`, evaluated at an explicit
/// user vector.
pub fn fisher_info_at(entities: &[EntityId], phi: &LatentMatrix, phi_u: &[f64]) -> Result<FisherMatrix> {
    if entities.is_empty() {
        return Err(Error::Input("Fisher information of an empty set".into()));
    }
    let k = phi.k();
    let mut m = DMatrix::zeros(k, k);
    for &e in entities {
        let v = phi.vector(e);
        let w = hessian_weight(v, phi_u);
        for c in 0..k {
            let wc = w * v[c];
            for r in 0..k {
                m[(r, c)] += wc * v[r];
            }
        }
    }
    m /= entities.len() as f64;
    Ok(FisherMatrix {
        matrix: m,
        count: entities.len(),
    })
}

pub fn fisher_info(entities: &[EntityId], phi: &LatentMatrix, user: EntityId) -> Result<FisherMatrix> {
    fisher_info_at(entities, phi, phi.vector(user))
}

/// `Tr((iq + lambda I)^-1 is)` via a Cholesky solve.
pub fn trace_criterion(iq: &DMatrix<f64>, is: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    let k = iq.nrows();
    let a = iq + DMatrix::identity(k, k) * lambda;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("I_Q + lambda I is not positive definite".into()))?;
    Ok(chol.solve(is).trace())
}

/// `Tr((I_Q + lambda I)^-1 I_S)` at the user's current vector. An empty `q`
/// contributes a zero information matrix.
pub fn trace_objective(q: &[EntityId], s: &[EntityId], phi: &LatentMatrix, user: EntityId, lambda: f64) -> Result<f64> {
    let k = phi.k();
    let iq = if q.is_empty() {
        DMatrix::zeros(k, k)
    } else {
        fisher_info(q, phi, user)?.matrix
    };
    let is = fisher_info(s, phi, user)?.matrix;
    trace_criterion(&iq, &is, lambda)
}

/// `(A + w v v^T)^-1` from `A^-1` by Sherman-Morrison.
pub fn incremental_inverse_update(a_inv: &DMatrix<f64>, v: &[f64], w: f64) -> Result<DMatrix<f64>> {
    let v = DVector::from_column_slice(v);
    let u = a_inv * &v;
    let denom = 1.0 + w * v.dot(&u);
    if denom <= SM_MIN_DENOM {
        return Err(Error::Numerical(format!("rank-one update denominator {denom:e}")));
    }
    Ok(a_inv - (&u * u.transpose()) * (w / denom))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Chosen entities in selection order.
    pub chosen: Vec<EntityId>,
    /// Final criterion value (strategy specific).
    pub objective_value: f64,
    pub strategy: SelectorKind,
    /// Criterion value after each greedy step, where meaningful.
    pub steps: Vec<f64>,
}

pub(crate) fn check_budget(m: usize, pool: usize) -> Result<()> {
    if m == 0 || m > pool {
        return Err(Error::Budget { m, pool });
    }
    Ok(())
}

/// Pool sorted by id with duplicates removed, so tie-breaks favour the
/// lowest id.
pub(crate) fn canonical_pool(pool: &[EntityId]) -> Vec<EntityId> {
    let mut p = pool.to_vec();
    p.sort_unstable();
    p.dedup();
    p
}

/// Greedy minimization of `Tr(A^-1 T)` with `A = sum_Q H + M lambda I`, where
/// `T` is `target` or the identity when `None`. Returns the chosen set and
/// the unnormalized trace after each step.
fn greedy_trace(
    pool: &[EntityId],
    m: usize,
    phi: &LatentMatrix,
    phi_u: &[f64],
    lambda: f64,
    target: Option<&DMatrix<f64>>,
) -> Result<(Vec<EntityId>, Vec<f64>)> {
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    let k = phi.k();
    let shift = m as f64 * lambda;
    let mut a_inv = DMatrix::from_diagonal_element(k, k, 1.0 / shift);
    let mut trace = match target {
        Some(t) => t.trace() / shift,
        None => k as f64 / shift,
    };

    let cands: Vec<(EntityId, DVector<f64>, f64)> = pool
        .iter()
        .map(|&e| {
            let v = phi.vector(e);
            (e, DVector::from_column_slice(v), hessian_weight(v, phi_u))
        })
        .collect();
    let mut taken = vec![false; cands.len()];
    let mut chosen = Vec::with_capacity(m);
    let mut steps = Vec::with_capacity(m);

    for _ in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, v, w)) in cands.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let u = &a_inv * v;
            let denom = 1.0 + w * v.dot(&u);
            let gain = match target {
                Some(t) => w * u.dot(&(t * &u)) / denom,
                None => w * u.dot(&u) / denom,
            };
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.expect("budget checked against pool size");
        taken[i] = true;
        let (e, v, w) = &cands[i];
        a_inv = incremental_inverse_update(&a_inv, v.as_slice(), *w)?;
        trace -= gain;
        chosen.push(*e);
        steps.push(trace);
    }
    Ok((chosen, steps))
}

/// Greedy Fisher selection of `m` questions from `pool` for `user`.
///
/// The criterion's `S` is the pool itself. The reported objective is in the
/// averaged form `Tr((I_Q + lambda I)^-1 I_S)`, i.e. `M` times the sum-form
/// trace that the greedy search minimizes.
pub fn select_fisher(pool: &[EntityId], m: usize, phi: &LatentMatrix, user: EntityId, lambda: f64) -> Result<SelectionResult> {
    let pool = canonical_pool(pool);
    check_budget(m, pool.len())?;
    let phi_u = phi.vector(user);
    let is = fisher_info_at(&pool, phi, phi_u)?.matrix;
    select_fisher_with_target(&pool, m, phi, phi_u, lambda, &is)
}

/// As [`select_fisher`] but with an explicit target information matrix and
/// user vector.
pub fn select_fisher_with_target(
    pool: &[EntityId],
    m: usize,
    phi: &LatentMatrix,
    phi_u: &[f64],
    lambda: f64,
    target: &DMatrix<f64>,
) -> Result<SelectionResult> {
    let pool = canonical_pool(pool);
    check_budget(m, pool.len())?;
    let (chosen, steps) = greedy_trace(&pool, m, phi, phi_u, lambda, Some(target))?;
    let scale = m as f64;
    Ok(SelectionResult {
        objective_value: steps.last().copied().unwrap_or(f64::NAN) * scale,
        steps: steps.into_iter().map(|t| t * scale).collect(),
        chosen,
        strategy: SelectorKind::Fisher,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxVariant {
    /// Minimize `Tr((I_Q + lambda I)^-1)`.
    AInverse,
    /// Maximize `Tr(I_Q + lambda I)`.
    MaxTrace,
}

/// The cheaper surrogates of the Fisher criterion.
pub fn select_approx(
    pool: &[EntityId],
    m: usize,
    phi: &LatentMatrix,
    user: EntityId,
    lambda: f64,
    variant: ApproxVariant,
) -> Result<SelectionResult> {
    let pool = canonical_pool(pool);
    check_budget(m, pool.len())?;
    let phi_u = phi.vector(user);
    match variant {
        ApproxVariant::AInverse => {
            let (chosen, steps) = greedy_trace(&pool, m, phi, phi_u, lambda, None)?;
            let scale = m as f64;
            Ok(SelectionResult {
                objective_value: steps.last().copied().unwrap_or(f64::NAN) * scale,
                steps: steps.into_iter().map(|t| t * scale).collect(),
                chosen,
                strategy: SelectorKind::ApproxAInverse,
            })
        }
        ApproxVariant::MaxTrace => {
            // Tr(H_e) = w_e ||phi_e||^2, so the best set is the top-M by that.
            let mut scored: Vec<(EntityId, f64)> = pool
                .iter()
                .map(|&e| {
                    let v = phi.vector(e);
                    (e, hessian_weight(v, phi_u) * dot(v, v))
                })
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            scored.truncate(m);
            let mut running = 0.0;
            let mut steps = Vec::with_capacity(m);
            for (i, (_, t)) in scored.iter().enumerate() {
                running += t;
                steps.push(running / (i + 1) as f64 + phi.k() as f64 * lambda);
            }
            Ok(SelectionResult {
                objective_value: running / m as f64 + phi.k() as f64 * lambda,
                chosen: scored.into_iter().map(|(e, _)| e).collect(),
                strategy: SelectorKind::ApproxMaxTrace,
                steps,
            })
        }
    }
}
