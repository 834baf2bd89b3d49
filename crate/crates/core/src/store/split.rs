//! Train / test / pool partitions for the personalized and cold-start
//! protocols. Fractional counts round down; the remainder goes to the pool.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Database, EntityId, EntityKind, RelationTriple};
use crate::error::{Error, Result};

/// Users with fewer triples than this are left out of personalized splits.
pub const MIN_USER_TRIPLES: usize = 3;

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<RelationTriple>,
    pub test: Vec<RelationTriple>,
    /// Active-learning candidates.
    pub pool: Vec<RelationTriple>,
    pub cold_users: Option<Vec<EntityId>>,
    /// Users dropped for having too few triples.
    pub excluded_users: Vec<EntityId>,
}

impl Split {
    /// Users that own at least one pool triple, in id order.
    pub fn pool_users(&self) -> Vec<EntityId> {
        let mut users: Vec<EntityId> = self.pool.iter().filter_map(|t| t.user()).collect();
        users.sort_unstable();
        users.dedup();
        users
    }
}

/// R and UC triples grouped by user, each group in database order.
fn triples_by_user(db: &Database) -> BTreeMap<EntityId, Vec<RelationTriple>> {
    let mut by_user: BTreeMap<EntityId, Vec<RelationTriple>> = BTreeMap::new();
    for t in db.triples() {
        if let Some(u) = t.user() {
            by_user.entry(u).or_default().push(*t);
        }
    }
    by_user
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Input(format!("{name} must lie in [0, 1], got {f}")));
    }
    Ok(())
}

/// Per user, shuffles the user's R and UC triples and sends
/// `floor(test_frac * n)` to test, `floor(train_frac * n)` to train and the
/// rest to the pool. BC triples always go to train.
pub fn split_personalized(db: &Database, test_frac: f64, train_frac: f64, seed: u64) -> Result<Split> {
    check_fraction("test_frac", test_frac)?;
    check_fraction("train_frac", train_frac)?;
    if test_frac + train_frac > 1.0 + 1e-12 {
        return Err(Error::Input(format!(
            "test_frac + train_frac = {} exceeds 1",
            test_frac + train_frac
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    split.train.extend(db.triples().iter().filter(|t| t.user().is_none()));

    for (user, mut triples) in triples_by_user(db) {
        let n = triples.len();
        if n < MIN_USER_TRIPLES {
            split.excluded_users.push(user);
            continue;
        }
        triples.shuffle(&mut rng);
        let n_test = (test_frac * n as f64 + 1e-9).floor() as usize;
        let n_train = ((train_frac * n as f64 + 1e-9).floor() as usize).min(n - n_test);
        split.test.extend_from_slice(&triples[..n_test]);
        split.train.extend_from_slice(&triples[n_test..n_test + n_train]);
        split.pool.extend_from_slice(&triples[n_test + n_train..]);
    }
    Ok(split)
}

/// Picks `floor(cold_frac * users)` cold users uniformly. Their triples are
/// halved into test (rounded down) and pool; everything else trains.
pub fn split_cold_start(db: &Database, cold_frac: f64, seed: u64) -> Result<Split> {
    if !(cold_frac > 0.0 && cold_frac < 1.0) {
        return Err(Error::Input(format!("cold_frac must lie in (0, 1), got {cold_frac}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<EntityId> = db.registry().ids_of(EntityKind::User).collect();
    let n_cold = (cold_frac * users.len() as f64 + 1e-9).floor() as usize;
    let mut cold: Vec<EntityId> = rand::seq::index::sample(&mut rng, users.len(), n_cold)
        .into_iter()
        .map(|i| users[i])
        .collect();
    cold.sort_unstable();

    let by_user = triples_by_user(db);
    let mut split = Split::default();
    for t in db.triples() {
        match t.user() {
            Some(u) if cold.binary_search(&u).is_ok() => {}
            _ => split.train.push(*t),
        }
    }
    for u in &cold {
        let Some(triples) = by_user.get(u) else { continue };
        let mut triples = triples.clone();
        triples.shuffle(&mut rng);
        let n_test = triples.len() / 2;
        split.test.extend_from_slice(&triples[..n_test]);
        split.pool.extend_from_slice(&triples[n_test..]);
    }
    split.cold_users = Some(cold);
    Ok(split)
}
