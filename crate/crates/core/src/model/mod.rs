//! The logistic CMF model: every entity owns one k-dimensional latent vector
//! shared across all relations, and a relation holds with probability
//! `sigmoid(phi_1 . phi_2)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::EntityId;

mod checkpoint;
mod refit;
mod sgd;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use refit::{refit_user, refit_user_from, user_objective, RefitOutcome};
pub use sgd::{regularized_objective, sgd_train, sgd_train_from, SgdOutcome};

/// Dense `k x |E|` factor matrix stored entity-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    k: usize,
    data: Vec<f64>,
}

impl LatentMatrix {
    pub fn zeros(k: usize, n_entities: usize) -> Self {
        Self {
            k,
            data: vec![0.0; k * n_entities],
        }
    }

    /// Every coordinate drawn i.i.d. from `N(mean, var)`.
    pub fn gaussian<R: Rng + ?Sized>(k: usize, n_entities: usize, mean: f64, var: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(k, n_entities);
        if var == 0.0 {
            m.data.fill(mean);
        } else {
            let normal = Normal::new(mean, var.sqrt()).expect("finite, non-negative variance");
            for x in m.data.iter_mut() {
                *x = normal.sample(rng);
            }
        }
        m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_entities(&self) -> usize {
        self.data.len().checked_div(self.k).unwrap_or(0)
    }

    #[inline]
    pub fn vector(&self, id: EntityId) -> &[f64] {
        let i = id.index() * self.k;
        &self.data[i..i + self.k]
    }

    #[inline]
    pub fn vector_mut(&mut self, id: EntityId) -> &mut [f64] {
        let i = id.index() * self.k;
        &mut self.data[i..i + self.k]
    }

    pub fn set_vector(&mut self, id: EntityId, v: &[f64]) -> Result<()> {
        if v.len() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                got: v.len(),
            });
        }
        self.vector_mut(id).copy_from_slice(v);
        Ok(())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Scales any vector longer than `radius` back onto the ball.
    pub fn project(&mut self, radius: f64) {
        let k = self.k;
        for chunk in self.data.chunks_mut(k) {
            project_onto_ball(chunk, radius);
        }
    }

    /// Probability that the relation between `a` and `b` holds.
    pub fn prob(&self, a: EntityId, b: EntityId) -> f64 {
        sigmoid(dot(self.vector(a), self.vector(b)))
    }

    pub fn predict(&self, a: EntityId, b: EntityId) -> Prediction {
        Prediction::from_probability(self.prob(a, b))
    }
}

/// How the `lambda ||phi||^2` penalty is charged during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularization {
    /// Once for every observation an entity takes part in, so each entity's
    /// loss is effectively averaged over its observations.
    PerObservation,
    /// Once per entity, against the summed loss.
    PerEntity,
}

impl Regularization {
    pub fn as_str(self) -> &'static str {
        match self {
            Regularization::PerObservation => "per_observation",
            Regularization::PerEntity => "per_entity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per_observation" => Some(Regularization::PerObservation),
            "per_entity" => Some(Regularization::PerEntity),
            _ => None,
        }
    }

    /// Penalty weight on a vector that appears in `n_obs` observations.
    pub fn weight(self, lambda: f64, n_obs: usize) -> f64 {
        match self {
            Regularization::PerObservation => lambda * n_obs as f64,
            Regularization::PerEntity if n_obs == 0 => 0.0,
            Regularization::PerEntity => lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub regularization: Regularization,
    pub eta: f64,
    pub epochs: usize,
    pub k: usize,
    pub b_max: f64,
    /// Relative epoch-over-epoch objective change below which SGD stops.
    pub early_stop_tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            regularization: Regularization::PerObservation,
            eta: 0.02,
            epochs: 200,
            k: 10,
            b_max: 10.0,
            early_stop_tol: 1e-6,
        }
    }
}

impl Hyperparams {
    /// Penalty weight for a user refit over `n_obs` labeled observations,
    /// consistent with the training objective.
    pub fn user_penalty(&self, n_obs: usize) -> f64 {
        self.regularization.weight(self.lambda, n_obs.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.b_max > 0.0) {
            return Err(Error::Config(format!("b_max must be positive, got {}", self.b_max)));
        }
        if !(self.early_stop_tol >= 0.0) {
            return Err(Error::Config("early_stop_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: i8,
}

impl Prediction {
    /// Threshold at 0.5; an exact tie goes to -1.
    pub fn from_probability(probability: f64) -> Self {
        let label = if probability > 0.5 { 1 } else { -1 };
        Self { probability, label }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn project_onto_ball(v: &mut [f64], radius: f64) {
    let norm = dot(v, v).sqrt();
    if norm > radius {
        let scale = radius / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

pub fn predict_prob(phi_1: &[f64], phi_2: &[f64]) -> Result<f64> {
    check_dims(phi_1, phi_2)?;
    Ok(sigmoid(dot(phi_1, phi_2)))
}

/// Negative log-likelihood of label `y` given the inner product `s`.
#[inline]
pub fn nll_from_score(y: i8, s: f64) -> f64 {
    softplus(-(y as f64) * s)
}

pub fn nll(y: i8, phi_e: &[f64], phi_u: &[f64]) -> f64 {
    nll_from_score(y, dot(phi_e, phi_u))
}

/// Derivative of the loss with respect to the inner product.
#[inline]
pub fn dloss_dscore(y: i8, s: f64) -> f64 {
    let y = y as f64;
    -y * sigmoid(-y * s)
}

/// Gradient of `nll` with respect to the user vector.
pub fn grad_user(y: i8, phi_e: &[f64], phi_u: &[f64]) -> Vec<f64> {
    let g = dloss_dscore(y, dot(phi_e, phi_u));
    phi_e.iter().map(|x| g * x).collect()
}

/// Gradient of `nll` with respect to the entity vector.
pub fn grad_entity(y: i8, phi_e: &[f64], phi_u: &[f64]) -> Vec<f64> {
    grad_user(y, phi_u, phi_e)
}

/// F1 on the positive class; 0 when precision + recall is 0.
pub fn f1_score(predictions: &[i8], labels: &[i8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Input("f1 of an empty label set".into()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p > 0, y > 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    // 2PR/(P+R) simplifies to 2tp/(2tp+fp+fn).
    let denom = 2 * tp + fp + fn_;
    Ok(if tp == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}
