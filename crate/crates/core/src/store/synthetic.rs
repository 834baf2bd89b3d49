use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Database, EntityKind, Relation, RelationTriple};
use crate::error::{Error, Result};
use crate::model::LatentMatrix;

/// Sizes and latent prior of the synthetic CMF dataset. `var` is the
/// variance of each latent coordinate, not its standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_businesses: usize,
    pub n_categories: usize,
    pub k: usize,
    pub mean: f64,
    pub var: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 100,
            n_businesses: 100,
            n_categories: 40,
            k: 10,
            mean: 0.25,
            var: 0.1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_users", self.n_users),
            ("n_businesses", self.n_businesses),
            ("n_categories", self.n_categories),
            ("k", self.k),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.mean.is_finite() || !(self.var >= 0.0) || !self.var.is_finite() {
            return Err(Error::Config(format!(
                "latent prior needs finite mean and non-negative variance, got N({}, {})",
                self.mean, self.var
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// Ground-truth factors the labels were sampled from.
    pub truth: LatentMatrix,
    pub db: Database,
}

/// Draws every latent coordinate i.i.d. from the configured Gaussian, then
/// samples a label for every cell of R, BC and UC with
/// `P(+1) = sigmoid(phi_1 . phi_2)`.
///
/// Users are registered as `u0..`, businesses as `b0..`, categories as `c0..`,
/// in that order.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut db = Database::new();
    let users: Vec<_> = (0..cfg.n_users)
        .map(|i| db.register(EntityKind::User, &format!("u{i}")))
        .collect();
    let businesses: Vec<_> = (0..cfg.n_businesses)
        .map(|i| db.register(EntityKind::Business, &format!("b{i}")))
        .collect();
    let categories: Vec<_> = (0..cfg.n_categories)
        .map(|i| db.register(EntityKind::Category, &format!("c{i}")))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = LatentMatrix::gaussian(cfg.k, db.registry().len(), cfg.mean, cfg.var, &mut rng);

    let mut cells = Vec::with_capacity(
        cfg.n_businesses * cfg.n_users + cfg.n_businesses * cfg.n_categories + cfg.n_users * cfg.n_categories,
    );
    for &b in &businesses {
        for &u in &users {
            cells.push((Relation::R, b, u));
        }
    }
    for &b in &businesses {
        for &c in &categories {
            cells.push((Relation::BC, b, c));
        }
    }
    for &u in &users {
        for &c in &categories {
            cells.push((Relation::UC, u, c));
        }
    }
    for (relation, a, b) in cells {
        let label = sample_label(truth.prob(a, b), &mut rng);
        db.insert(RelationTriple::new(relation, a, b, label))?;
    }
    Ok(SyntheticDataset { truth, db })
}

/// +1 with probability `p`, else -1.
pub(crate) fn sample_label<R: Rng + ?Sized>(p: f64, rng: &mut R) -> i8 {
    if rng.random::<f64>() < p {
        1
    } else {
        -1
    }
}
