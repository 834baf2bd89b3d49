//! Comparison selectors: uncertainty sampling, expected model change and
//! random selection.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fisher::{canonical_pool, check_budget, hessian_weight, SelectionResult};
use crate::model::{dot, sigmoid, LatentMatrix};
use crate::store::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SelectorKind {
    Fisher,
    ApproxAInverse,
    ApproxMaxTrace,
    Uncertainty,
    MaxModelChange,
    MinModelChange,
    Random,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 7] = [
        SelectorKind::Fisher,
        SelectorKind::ApproxAInverse,
        SelectorKind::ApproxMaxTrace,
        SelectorKind::Uncertainty,
        SelectorKind::MaxModelChange,
        SelectorKind::MinModelChange,
        SelectorKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectorKind::Fisher => "fisher",
            SelectorKind::ApproxAInverse => "approx_ainv",
            SelectorKind::ApproxMaxTrace => "approx_maxtrace",
            SelectorKind::Uncertainty => "uncertainty",
            SelectorKind::MaxModelChange => "max_change",
            SelectorKind::MinModelChange => "min_change",
            SelectorKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s.trim())
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeDirection {
    Max,
    Min,
}

/// Top-`m` by score (descending), ties to the lowest id.
fn top_m(mut scored: Vec<(EntityId, f64)>, m: usize) -> (Vec<EntityId>, f64) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(m);
    let total = scored.iter().map(|(_, s)| s).sum();
    (scored.into_iter().map(|(e, _)| e).collect(), total)
}

/// Picks the `m` entities whose predicted label has the largest Bernoulli
/// variance `p (1 - p)`.
pub fn select_uncertainty(pool: &[EntityId], m: usize, phi: &LatentMatrix, user: EntityId) -> Result<SelectionResult> {
    let pool = canonical_pool(pool);
    check_budget(m, pool.len())?;
    let phi_u = phi.vector(user);
    let scored = pool
        .iter()
        .map(|&e| {
            let p = sigmoid(dot(phi.vector(e), phi_u));
            (e, p * (1.0 - p))
        })
        .collect();
    let (chosen, total) = top_m(scored, m);
    Ok(SelectionResult {
        chosen,
        objective_value: total,
        strategy: SelectorKind::Uncertainty,
        steps: Vec::new(),
    })
}

/// Expected norm of one SGD step on the user vector,
/// `2 eta sigmoid(s) sigmoid(-s) ||phi_e||`.
pub fn expected_model_change(phi_e: &[f64], phi_u: &[f64], eta: f64) -> f64 {
    2.0 * eta * hessian_weight(phi_e, phi_u) * dot(phi_e, phi_e).sqrt()
}

pub fn select_model_change(
    pool: &[EntityId],
    m: usize,
    phi: &LatentMatrix,
    user: EntityId,
    eta: f64,
    direction: ChangeDirection,
) -> Result<SelectionResult> {
    let pool = canonical_pool(pool);
    check_budget(m, pool.len())?;
    let phi_u = phi.vector(user);
    let sign = match direction {
        ChangeDirection::Max => 1.0,
        ChangeDirection::Min => -1.0,
    };
    let scored = pool
        .iter()
        .map(|&e| (e, sign * expected_model_change(phi.vector(e), phi_u, eta)))
        .collect();
    let (chosen, total) = top_m(scored, m);
    Ok(SelectionResult {
        chosen,
        objective_value: sign * total,
        strategy: match direction {
            ChangeDirection::Max => SelectorKind::MaxModelChange,
            ChangeDirection::Min => SelectorKind::MinModelChange,
        },
        steps: Vec::new(),
    })
}

/// Uniform sample of `m` pool members without replacement.
pub fn select_random(pool: &[EntityId], m: usize, seed: u64) -> Result<SelectionResult> {
    let pool = canonical_pool(pool);
    check_budget(m, pool.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, pool.len(), m)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    Ok(SelectionResult {
        chosen,
        objective_value: f64::NAN,
        strategy: SelectorKind::Random,
        steps: Vec::new(),
    })
}
