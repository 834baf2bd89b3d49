//! Active learning for collective matrix factorization: a relational store,
//! a logistic CMF model with SGD training and per-user refits, Fisher
//! information question selection, comparison selectors and the experiment
//! harness that runs them.

pub mod baselines;
pub mod config;
pub mod error;
pub mod fisher;
pub mod harness;
pub mod model;
pub mod store;

pub use error::{Error, Result};
