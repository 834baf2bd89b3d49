//! Entities, observed relation triples and the datasets built from them.
//!
//! Three entity kinds (users, businesses, categories) are linked by three
//! binary relations: ratings `R` (business × user), business categories `BC`
//! (business × category) and user categories `UC` (user × category).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod split;
mod synthetic;
mod tsv;
mod yelp;

pub use split::{split_cold_start, split_personalized, Split};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};
pub use tsv::{
    read_business_categories, read_groundtruth, read_ratings, read_relations, write_groundtruth, write_relations,
    write_relations_to,
};
pub use yelp::{binarize_rating, build_user_categories, ingest_yelp, YelpFilter};

/// Dense index of an entity inside a [`Registry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    User,
    Business,
    Category,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Business => "business",
            EntityKind::Category => "category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "user" => Some(EntityKind::User),
            "business" => Some(EntityKind::Business),
            "category" => Some(EntityKind::Category),
            _ => None,
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// Ratings, business × user.
    R,
    /// Business categories, business × category.
    BC,
    /// User categories, user × category.
    UC,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::R, Relation::BC, Relation::UC];

    /// Entity kinds of the (first, second) slots.
    pub fn schema(self) -> (EntityKind, EntityKind) {
        match self {
            Relation::R => (EntityKind::Business, EntityKind::User),
            Relation::BC => (EntityKind::Business, EntityKind::Category),
            Relation::UC => (EntityKind::User, EntityKind::Category),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::R => "R",
            Relation::BC => "BC",
            Relation::UC => "UC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "R" => Some(Relation::R),
            "BC" => Some(Relation::BC),
            "UC" => Some(Relation::UC),
            _ => None,
        }
    }

    /// Relation linking a user to an entity of `kind`, if any.
    pub fn for_user_and(kind: EntityKind) -> Option<Relation> {
        match kind {
            EntityKind::Business => Some(Relation::R),
            EntityKind::Category => Some(Relation::UC),
            EntityKind::User => None,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub relation: Relation,
    pub first: EntityId,
    pub second: EntityId,
    /// +1 or -1.
    pub label: i8,
}

impl RelationTriple {
    pub fn new(relation: Relation, first: EntityId, second: EntityId, label: i8) -> Self {
        Self {
            relation,
            first,
            second,
            label,
        }
    }

    pub fn key(&self) -> (Relation, EntityId, EntityId) {
        (self.relation, self.first, self.second)
    }

    /// The user endpoint, for `R` and `UC` triples.
    pub fn user(&self) -> Option<EntityId> {
        match self.relation {
            Relation::R => Some(self.second),
            Relation::UC => Some(self.first),
            Relation::BC => None,
        }
    }

    /// The non-user endpoint, for `R` and `UC` triples.
    pub fn item(&self) -> Option<EntityId> {
        match self.relation {
            Relation::R => Some(self.first),
            Relation::UC => Some(self.second),
            Relation::BC => None,
        }
    }
}

/// Kind-scoped mapping from external keys to dense entity ids.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    kinds: Vec<EntityKind>,
    keys: Vec<String>,
    lookup: HashMap<(EntityKind, String), EntityId>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Idempotent: the same `(kind, key)` always maps to the same id.
    pub fn register(&mut self, kind: EntityKind, key: &str) -> EntityId {
        if let Some(&id) = self.lookup.get(&(kind, key.to_owned())) {
            return id;
        }
        let id = EntityId(self.kinds.len() as u32);
        self.kinds.push(kind);
        self.keys.push(key.to_owned());
        self.lookup.insert((kind, key.to_owned()), id);
        id
    }

    pub fn get(&self, kind: EntityKind, key: &str) -> Option<EntityId> {
        self.lookup.get(&(kind, key.to_owned())).copied()
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, id: EntityId) -> EntityKind {
        self.kinds[id.index()]
    }

    pub fn key(&self, id: EntityId) -> &str {
        &self.keys[id.index()]
    }

    /// `kind/key`, the form used in checkpoint and ground-truth files.
    pub fn qualified_key(&self, id: EntityId) -> String {
        format!("{}/{}", self.kind(id), self.key(id))
    }

    pub fn resolve_qualified(&self, qualified: &str) -> Option<EntityId> {
        let (kind, key) = qualified.split_once('/')?;
        self.get(EntityKind::parse(kind)?, key)
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.kinds.len() as u32).map(EntityId)
    }

    pub fn ids_of(&self, kind: EntityKind) -> impl Iterator<Item = EntityId> + '_ {
        self.ids().filter(move |&id| self.kind(id) == kind)
    }
}

/// The observed database: a registry plus a deduplicated list of triples.
#[derive(Debug, Clone, Default)]
pub struct Database {
    registry: Registry,
    triples: Vec<RelationTriple>,
    index: HashMap<(Relation, EntityId, EntityId), usize>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_registry(registry: Registry) -> Self {
        Self {
            registry,
            ..Self::default()
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn register(&mut self, kind: EntityKind, key: &str) -> EntityId {
        self.registry.register(kind, key)
    }

    /// Inserts a triple. Returns `Ok(false)` for an exact duplicate; a
    /// duplicate with a different label is an error.
    pub fn insert(&mut self, triple: RelationTriple) -> Result<bool> {
        if triple.label != 1 && triple.label != -1 {
            return Err(Error::Input(format!("label must be +1 or -1, got {}", triple.label)));
        }
        let (k1, k2) = triple.relation.schema();
        for (id, want) in [(triple.first, k1), (triple.second, k2)] {
            if id.index() >= self.registry.len() {
                return Err(Error::Input(format!("entity {id} is not registered")));
            }
            if self.registry.kind(id) != want {
                return Err(Error::Schema {
                    relation: triple.relation,
                    expected: format!("{k1}, {k2}"),
                    got: format!(
                        "{}, {}",
                        self.registry.kind(triple.first),
                        self.registry.kind(triple.second)
                    ),
                });
            }
        }
        if let Some(&at) = self.index.get(&triple.key()) {
            let stored = self.triples[at].label;
            if stored != triple.label {
                return Err(Error::ConflictingTriple {
                    relation: triple.relation,
                    first: triple.first,
                    second: triple.second,
                    stored,
                    new: triple.label,
                });
            }
            return Ok(false);
        }
        self.index.insert(triple.key(), self.triples.len());
        self.triples.push(triple);
        Ok(true)
    }

    pub fn get(&self, relation: Relation, first: EntityId, second: EntityId) -> Option<&RelationTriple> {
        self.index.get(&(relation, first, second)).map(|&i| &self.triples[i])
    }

    pub fn triples(&self) -> &[RelationTriple] {
        &self.triples
    }

    /// Total triple count `N`.
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples_of(&self, relation: Relation) -> impl Iterator<Item = &RelationTriple> + '_ {
        self.triples.iter().filter(move |t| t.relation == relation)
    }

    /// Same registry, only the listed relations.
    pub fn restricted_to(&self, relations: &[Relation]) -> Database {
        let mut out = Database::with_registry(self.registry.clone());
        for t in self.triples.iter().filter(|t| relations.contains(&t.relation)) {
            out.index.insert(t.key(), out.triples.len());
            out.triples.push(*t);
        }
        out
    }

    pub fn has_relation(&self, relation: Relation) -> bool {
        self.triples.iter().any(|t| t.relation == relation)
    }
}
