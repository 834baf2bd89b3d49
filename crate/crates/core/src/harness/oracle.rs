//! Simulated users answering active-learning questions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{sigmoid, dot, LatentMatrix, Prediction};
use crate::store::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Thresholded predictions of a reference model trained on all
    /// available training data.
    Pretrained,
    /// Fresh Bernoulli draws from the ground-truth factors.
    NoisyGroundTruth,
}

/// An oracle bound to its parameters for one trial.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    pub mode: OracleMode,
    /// Reference model for `Pretrained`, ground truth for `NoisyGroundTruth`.
    pub params: &'a LatentMatrix,
    pub trial_seed: u64,
}

impl Oracle<'_> {
    pub fn answer(&self, user: EntityId, entity: EntityId) -> i8 {
        oracle_answer(self.mode, self.params, user, entity, self.trial_seed)
    }
}

/// The user's label for `entity`. Noisy answers depend only on
/// `(trial_seed, user, entity)`.
pub fn oracle_answer(mode: OracleMode, params: &LatentMatrix, user: EntityId, entity: EntityId, trial_seed: u64) -> i8 {
    let s = dot(params.vector(user), params.vector(entity));
    match mode {
        OracleMode::Pretrained => Prediction::from_probability(sigmoid(s)).label,
        OracleMode::NoisyGroundTruth => {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            rng.set_stream(((user.0 as u64) << 32) | entity.0 as u64);
            if rng.random::<f64>() < sigmoid(s) {
                1
            } else {
                -1
            }
        }
    }
}
