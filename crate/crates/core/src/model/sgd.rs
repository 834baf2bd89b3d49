//! Joint SGD over every observed triple.
//!
//! The objective is `sum_i l(y_i | phi_a, phi_b) + sum_e w_e ||phi_e||^2` over
//! entities that appear in the training triples, with `w_e` from
//! [`Regularization::weight`]. Each visit of an entity applies `1 / visits` of
//! its penalty gradient, so one epoch applies the full gradient once.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dloss_dscore, dot, nll_from_score, project_onto_ball, Hyperparams, LatentMatrix};
#[cfg(doc)]
use super::Regularization;
use crate::error::{Error, Result};
use crate::store::{EntityId, RelationTriple};

/// Standard deviation of the initial coordinates (variance 0.01).
const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SgdOutcome {
    pub phi: LatentMatrix,
    /// Regularized objective after each completed epoch.
    pub objective_trace: Vec<f64>,
    pub epochs_run: usize,
}

/// Trains from a fresh `N(0, 0.01)` initialization of all `n_entities` vectors.
pub fn sgd_train(train: &[RelationTriple], n_entities: usize, hp: &Hyperparams, seed: u64) -> Result<SgdOutcome> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let init = LatentMatrix::gaussian(hp.k, n_entities, 0.0, INIT_STD * INIT_STD, &mut init_rng);
    sgd_train_from(init, train, hp, seed)
}

/// Continues training from `init`. With `hp.epochs == 0` the input is returned
/// untouched.
pub fn sgd_train_from(init: LatentMatrix, train: &[RelationTriple], hp: &Hyperparams, seed: u64) -> Result<SgdOutcome> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if init.k() != hp.k {
        return Err(Error::Dimension {
            expected: hp.k,
            got: init.k(),
        });
    }
    let n = init.n_entities();
    let mut visits = vec![0u32; n];
    for t in train {
        for id in [t.first, t.second] {
            if id.index() >= n {
                return Err(Error::Input(format!("entity {id} has no latent vector")));
            }
            visits[id.index()] += 1;
        }
    }
    let reg_share: Vec<f64> = visits
        .iter()
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                2.0 * hp.regularization.weight(hp.lambda, c as usize) / c as f64
            }
        })
        .collect();

    let mut phi = init;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let k = hp.k;
    let mut a_old = vec![0.0; k];
    let mut b_old = vec![0.0; k];
    let mut trace = Vec::with_capacity(hp.epochs);
    let mut prev = regularized_objective(&phi, train, hp);

    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = &train[i];
            let (a, b) = (t.first, t.second);
            a_old.copy_from_slice(phi.vector(a));
            b_old.copy_from_slice(phi.vector(b));
            let g = dloss_dscore(t.label, dot(&a_old, &b_old));
            step(phi.vector_mut(a), &a_old, &b_old, g, reg_share[a.index()], hp);
            step(phi.vector_mut(b), &b_old, &a_old, g, reg_share[b.index()], hp);
        }
        let obj = regularized_objective(&phi, train, hp);
        trace.push(obj);
        let change = (prev - obj).abs();
        prev = obj;
        if change < hp.early_stop_tol * obj.abs().max(1.0) {
            break;
        }
    }

    let epochs_run = trace.len();
    Ok(SgdOutcome {
        phi,
        objective_trace: trace,
        epochs_run,
    })
}

#[inline]
fn step(target: &mut [f64], own: &[f64], other: &[f64], g: f64, reg: f64, hp: &Hyperparams) {
    for ((x, &o), &p) in target.iter_mut().zip(own).zip(other) {
        *x = o - hp.eta * (g * p + reg * o);
    }
    project_onto_ball(target, hp.b_max);
}

/// `sum_i l(y_i) + sum_e w_e ||phi_e||^2` over entities touched by `train`.
pub fn regularized_objective(phi: &LatentMatrix, train: &[RelationTriple], hp: &Hyperparams) -> f64 {
    let mut visits = vec![0usize; phi.n_entities()];
    let mut loss = 0.0;
    for t in train {
        loss += nll_from_score(t.label, dot(phi.vector(t.first), phi.vector(t.second)));
        visits[t.first.index()] += 1;
        visits[t.second.index()] += 1;
    }
    let penalty: f64 = visits
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let v = phi.vector(EntityId(i as u32));
            hp.regularization.weight(hp.lambda, c) * dot(v, v)
        })
        .sum();
    loss + penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::predict_prob;
    use crate::store::{generate_synthetic, Relation, SyntheticConfig};

    fn small_hp() -> Hyperparams {
        Hyperparams {
            k: 4,
            ..Default::default()
        }
    }

    #[test]
    fn single_positive_triple_is_learned() {
        let train = [RelationTriple::new(Relation::R, EntityId(0), EntityId(1), 1)];
        let hp = Hyperparams {
            lambda: 1e-4,
            eta: 0.1,
            epochs: 2000,
            early_stop_tol: 0.0,
            ..small_hp()
        };
        let mut probs = Vec::new();
        for epochs in [10, 100, 500, 2000] {
            let out = sgd_train(&train, 2, &Hyperparams { epochs, ..hp }, 3).unwrap();
            probs.push(predict_prob(out.phi.vector(EntityId(0)), out.phi.vector(EntityId(1))).unwrap());
        }
        assert!(probs.windows(2).all(|w| w[1] >= w[0]), "{probs:?}");
        assert!(*probs.last().unwrap() > 0.9, "{probs:?}");
    }

    #[test]
    fn objective_mostly_decreases_on_synthetic_data() {
        let data = generate_synthetic(&SyntheticConfig::default(), 11).unwrap();
        let hp = Hyperparams {
            epochs: 60,
            early_stop_tol: 0.0,
            ..Default::default()
        };
        let out = sgd_train(data.db.triples(), data.db.registry().len(), &hp, 5).unwrap();
        let trace = &out.objective_trace;
        let down = trace.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(down as f64 >= 0.9 * (trace.len() - 1) as f64, "{down} of {}", trace.len() - 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let data = generate_synthetic(
            &SyntheticConfig {
                n_users: 10,
                n_businesses: 10,
                n_categories: 5,
                k: 4,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        let hp = Hyperparams { epochs: 20, ..small_hp() };
        let n = data.db.registry().len();
        let a = sgd_train(data.db.triples(), n, &hp, 9).unwrap();
        let b = sgd_train(data.db.triples(), n, &hp, 9).unwrap();
        assert_eq!(a.phi, b.phi);
        let c = sgd_train(data.db.triples(), n, &hp, 10).unwrap();
        assert_ne!(a.phi, c.phi);
    }

    #[test]
    fn heavy_regularization_shrinks_factors() {
        let data = generate_synthetic(
            &SyntheticConfig {
                n_users: 10,
                n_businesses: 10,
                n_categories: 5,
                k: 4,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        let n = data.db.registry().len();
        let norm = |lambda: f64| {
            let hp = Hyperparams {
                lambda,
                eta: 0.01,
                epochs: 300,
                early_stop_tol: 0.0,
                ..small_hp()
            };
            sgd_train(data.db.triples(), n, &hp, 1).unwrap().phi.frobenius_sq().sqrt()
        };
        let weak = norm(0.01);
        let strong = norm(20.0);
        assert!(strong < 1e-3, "{strong}");
        assert!(strong < weak);
    }

    #[test]
    fn zero_epochs_returns_input() {
        let train = [RelationTriple::new(Relation::R, EntityId(0), EntityId(1), -1)];
        let init = LatentMatrix::zeros(4, 2);
        let out = sgd_train_from(init.clone(), &train, &Hyperparams { epochs: 0, ..small_hp() }, 1).unwrap();
        assert_eq!(out.phi, init);
        assert_eq!(out.epochs_run, 0);
    }

    #[test]
    fn rejects_empty_and_unknown() {
        assert!(matches!(sgd_train(&[], 3, &small_hp(), 1), Err(Error::EmptyTrainingSet)));
        let train = [RelationTriple::new(Relation::R, EntityId(0), EntityId(5), 1)];
        assert!(sgd_train(&train, 2, &small_hp(), 1).is_err());
    }

    #[test]
    fn vectors_stay_in_the_ball() {
        let train = [RelationTriple::new(Relation::R, EntityId(0), EntityId(1), 1)];
        let hp = Hyperparams {
            lambda: 1e-6,
            eta: 5.0,
            epochs: 200,
            b_max: 1.5,
            early_stop_tol: 0.0,
            ..small_hp()
        };
        let out = sgd_train(&train, 2, &hp, 1).unwrap();
        for e in 0..2 {
            let v = out.phi.vector(EntityId(e));
            assert!(dot(v, v).sqrt() <= 1.5 + 1e-12);
        }
    }
}
