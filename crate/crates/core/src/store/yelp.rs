//! Yelp-schema construction: star binarization, user-category synthesis with
//! negative sampling, and the user/category filters applied at ingestion.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Database, EntityId, EntityKind, Relation, RelationTriple};
use crate::error::{Error, Result};

/// 4 and 5 stars are positive, 1 to 3 negative.
pub fn binarize_rating(stars: i64) -> Result<i8> {
    match stars {
        4 | 5 => Ok(1),
        1..=3 => Ok(-1),
        _ => Err(Error::Input(format!("star rating {stars} outside 1..=5"))),
    }
}

/// Builds the UC relation. A user is positive on every category of every
/// business they rated; an equal number of negatives is then drawn uniformly
/// without replacement from the categories the user never touched.
///
/// The category universe is the set of categories present in
/// `business_categories` with a positive label.
pub fn build_user_categories(
    ratings: &[RelationTriple],
    business_categories: &[RelationTriple],
    seed: u64,
) -> Vec<RelationTriple> {
    let mut cats_of_business: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    let mut universe = BTreeSet::new();
    for t in business_categories
        .iter()
        .filter(|t| t.relation == Relation::BC && t.label == 1)
    {
        cats_of_business.entry(t.first).or_default().push(t.second);
        universe.insert(t.second);
    }

    let mut positives: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    for t in ratings.iter().filter(|t| t.relation == Relation::R) {
        let user = t.second;
        let entry = positives.entry(user).or_default();
        if let Some(cats) = cats_of_business.get(&t.first) {
            entry.extend(cats.iter().copied());
        }
    }

    let universe: Vec<EntityId> = universe.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (user, pos) in &positives {
        out.extend(pos.iter().map(|&c| RelationTriple::new(Relation::UC, *user, c, 1)));
        let unobserved: Vec<EntityId> = universe.iter().copied().filter(|c| !pos.contains(c)).collect();
        let n_neg = pos.len().min(unobserved.len());
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, unobserved.len(), n_neg).into_vec();
        picked.sort_unstable();
        out.extend(
            picked
                .into_iter()
                .map(|i| RelationTriple::new(Relation::UC, *user, unobserved[i], -1)),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YelpFilter {
    pub min_user_ratings: usize,
    pub min_category_businesses: usize,
}

impl Default for YelpFilter {
    fn default() -> Self {
        Self {
            min_user_ratings: 10,
            min_category_businesses: 5,
        }
    }
}

/// Builds a database from raw `(user, business, stars)` ratings and
/// `(business, category)` memberships.
///
/// Categories tied to fewer than `min_category_businesses` businesses and
/// users with fewer than `min_user_ratings` ratings are dropped before any
/// entity is registered. Entities are registered in sorted key order so the
/// resulting ids do not depend on input row order.
pub fn ingest_yelp(
    ratings: &[(String, String, i64)],
    business_categories: &[(String, String)],
    filter: YelpFilter,
    seed: u64,
) -> Result<Database> {
    let mut businesses_per_category: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (b, c) in business_categories {
        businesses_per_category.entry(c).or_default().insert(b);
    }
    let kept_categories: BTreeSet<&str> = businesses_per_category
        .iter()
        .filter(|(_, bs)| bs.len() >= filter.min_category_businesses)
        .map(|(c, _)| *c)
        .collect();

    let mut ratings_per_user: BTreeMap<&str, usize> = BTreeMap::new();
    for (u, _, stars) in ratings {
        binarize_rating(*stars)?;
        *ratings_per_user.entry(u).or_default() += 1;
    }
    let kept_users: BTreeSet<&str> = ratings_per_user
        .iter()
        .filter(|(_, &n)| n >= filter.min_user_ratings)
        .map(|(u, _)| *u)
        .collect();

    let kept_ratings: Vec<&(String, String, i64)> = ratings
        .iter()
        .filter(|(u, _, _)| kept_users.contains(u.as_str()))
        .collect();
    let kept_businesses: BTreeSet<&str> = kept_ratings.iter().map(|(_, b, _)| b.as_str()).collect();

    let mut db = Database::new();
    for u in &kept_users {
        db.register(EntityKind::User, u);
    }
    for b in &kept_businesses {
        db.register(EntityKind::Business, b);
    }
    for c in &kept_categories {
        db.register(EntityKind::Category, c);
    }
    let reg = db.registry().clone();
    let id = |kind, key: &str| reg.get(kind, key).expect("registered above");

    for (u, b, stars) in kept_ratings {
        let label = binarize_rating(*stars)?;
        db.insert(RelationTriple::new(
            Relation::R,
            id(EntityKind::Business, b),
            id(EntityKind::User, u),
            label,
        ))?;
    }
    for (b, c) in business_categories {
        if kept_businesses.contains(b.as_str()) && kept_categories.contains(c.as_str()) {
            db.insert(RelationTriple::new(
                Relation::BC,
                id(EntityKind::Business, b),
                id(EntityKind::Category, c),
                1,
            ))?;
        }
    }

    let r: Vec<RelationTriple> = db.triples_of(Relation::R).copied().collect();
    let bc: Vec<RelationTriple> = db.triples_of(Relation::BC).copied().collect();
    for t in build_user_categories(&r, &bc, seed) {
        db.insert(t)?;
    }
    Ok(db)
}
