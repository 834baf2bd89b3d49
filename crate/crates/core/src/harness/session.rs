use std::collections::{BTreeMap, BTreeSet};

use crate::store::EntityId;

/// Per-user active-learning state for one selector.
#[derive(Debug, Clone, PartialEq)]
pub struct ALSessionState {
    pub user: EntityId,
    /// Answered entities and their labels, including initial training data.
    pub labeled: BTreeMap<EntityId, i8>,
    /// Unlabeled candidates.
    pub pool: BTreeSet<EntityId>,
    /// Questions asked so far, in order.
    pub asked: Vec<EntityId>,
    pub iteration: usize,
}

impl ALSessionState {
    pub fn new(user: EntityId, labeled: BTreeMap<EntityId, i8>, pool: BTreeSet<EntityId>) -> Self {
        Self {
            user,
            labeled,
            pool,
            asked: Vec::new(),
            iteration: 0,
        }
    }

    pub fn pool_vec(&self) -> Vec<EntityId> {
        self.pool.iter().copied().collect()
    }

    /// Moves `entity` from the pool into the labeled set.
    pub fn record(&mut self, entity: EntityId, label: i8) {
        let removed = self.pool.remove(&entity);
        debug_assert!(removed, "{entity} not in pool");
        self.labeled.insert(entity, label);
        self.asked.push(entity);
    }

    pub fn labeled_vec(&self) -> Vec<(EntityId, i8)> {
        self.labeled.iter().map(|(&e, &y)| (e, y)).collect()
    }
}
