//! Monte Carlo active-learning experiments.
//!
//! Every trial builds one split, one initial model and one reference model;
//! each selector then runs its own copy of the loop from that shared state, so
//! curve differences within a trial come from selection alone.

mod oracle;
mod results;
mod session;

pub use oracle::{oracle_answer, Oracle, OracleMode};
pub use results::{
    aggregate_mc, write_selection_trace, write_trace_csv, Bounds, ResultRow, ResultTable, SelectionStep, TraceRow,
    BOUNDS_HEADER, RESULTS_HEADER, SELECTION_TRACE_HEADER, TRACE_HEADER,
};
pub use session::ALSessionState;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{select_model_change, select_random, select_uncertainty, ChangeDirection, SelectorKind};
use crate::error::{Error, Result};
use crate::fisher::{select_approx, select_fisher, ApproxVariant, SelectionResult};
use crate::model::{f1_score, refit_user, sgd_train, sgd_train_from, Hyperparams, LatentMatrix};
use crate::store::{
    split_cold_start, split_personalized, Database, EntityId, Registry, Relation, RelationTriple, Split,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Protocol {
    Personalized,
    ColdStart,
    Noisy,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Personalized => "personalized",
            Protocol::ColdStart => "cold-start",
            Protocol::Noisy => "noisy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "personalized" => Some(Protocol::Personalized),
            "cold-start" | "cold_start" | "coldstart" => Some(Protocol::ColdStart),
            "noisy" => Some(Protocol::Noisy),
            _ => None,
        }
    }

    pub fn oracle_mode(self) -> OracleMode {
        match self {
            Protocol::Noisy => OracleMode::NoisyGroundTruth,
            _ => OracleMode::Pretrained,
        }
    }
}

/// Which relations the model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelationMode {
    Collective,
    ROnly,
}

impl RelationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationMode::Collective => "collective",
            RelationMode::ROnly => "r_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "collective" => Some(RelationMode::Collective),
            "r_only" | "r-only" => Some(RelationMode::ROnly),
            _ => None,
        }
    }
}

/// How the model absorbs new answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpdateMode {
    /// Newton refit of the answering user's vector only.
    Refit,
    /// Refit as above, plus full SGD retraining every `every` iterations.
    Retrain { every: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    /// Active-learning rounds after the initial model.
    pub iterations: usize,
    /// Questions per selected user per round.
    pub questions_per_round: usize,
    /// Fraction of users questioned each round (personalized and noisy).
    pub user_fraction: f64,
    pub mc_trials: usize,
    pub master_seed: u64,
    pub hp: Hyperparams,
    pub test_frac: f64,
    pub train_frac: f64,
    pub cold_frac: f64,
    pub selectors: Vec<SelectorKind>,
    pub relations: RelationMode,
    pub update: UpdateMode,
    /// Worker threads for trials; 0 picks automatically.
    pub threads: usize,
    /// Keep every greedy step of every selection.
    pub record_selections: bool,
}

impl ExperimentConfig {
    pub fn synthetic(protocol: Protocol) -> Self {
        Self {
            protocol,
            iterations: match protocol {
                Protocol::ColdStart => 15,
                _ => 25,
            },
            questions_per_round: 1,
            user_fraction: 0.25,
            mc_trials: 50,
            master_seed: 2017,
            hp: Hyperparams::default(),
            test_frac: 0.3,
            train_frac: 0.1,
            cold_frac: 0.4,
            selectors: SelectorKind::ALL.to_vec(),
            relations: RelationMode::Collective,
            update: UpdateMode::Refit,
            threads: 0,
            record_selections: false,
        }
    }

    pub fn yelp(protocol: Protocol) -> Self {
        Self {
            hp: Hyperparams {
                k: 30,
                ..Hyperparams::default()
            },
            test_frac: 0.2,
            train_frac: 0.2,
            cold_frac: 0.2,
            ..Self::synthetic(protocol)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        for (name, f) in [
            ("test_frac", self.test_frac),
            ("train_frac", self.train_frac),
            ("cold_frac", self.cold_frac),
            ("user_fraction", self.user_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        if self.test_frac + self.train_frac > 1.0 + 1e-12 {
            return Err(Error::Config("test_frac + train_frac exceeds 1".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::Config("mc_trials must be at least 1".into()));
        }
        if self.questions_per_round == 0 {
            return Err(Error::Config("questions_per_round must be at least 1".into()));
        }
        if self.selectors.is_empty() {
            return Err(Error::Config("no selectors requested".into()));
        }
        let unique: BTreeSet<_> = self.selectors.iter().collect();
        if unique.len() != self.selectors.len() {
            return Err(Error::Config("duplicate selector".into()));
        }
        if let UpdateMode::Retrain { every: 0 } = self.update {
            return Err(Error::Config("retrain_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seeds for one trial. Every source of randomness in a trial hangs off
/// `trial`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub split: u64,
    pub init: u64,
    pub reference: u64,
    pub users: u64,
    pub oracle: u64,
    pub random: u64,
}

pub fn trial_seeds(master_seed: u64, trial: usize) -> TrialSeeds {
    let t = master_seed.wrapping_add((trial as u64).wrapping_mul(10007));
    TrialSeeds {
        trial: t,
        split: t.wrapping_add(1),
        init: t.wrapping_add(2),
        reference: t.wrapping_add(3),
        users: t.wrapping_add(4),
        oracle: t.wrapping_add(5),
        random: t.wrapping_add(6),
    }
}

/// Dataset plus optional ground-truth factors (synthetic data only).
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub db: &'a Database,
    pub truth: Option<&'a LatentMatrix>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub bounds: Option<Bounds>,
    pub trace: Vec<TraceRow>,
    pub selections: Vec<SelectionStep>,
}

impl ExperimentOutput {
    pub fn write_results(&self, path: &Path) -> Result<()> {
        results::write_file(path, |w| self.table.write_csv(w))
    }

    pub fn write_bounds(&self, path: &Path) -> Result<()> {
        match &self.bounds {
            Some(b) => results::write_file(path, |w| b.write_csv(w)),
            None => Ok(()),
        }
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        results::write_file(path, |w| write_trace_csv(&self.trace, w))
    }

    pub fn write_selection_trace(&self, path: &Path, registry: &Registry) -> Result<()> {
        results::write_file(path, |w| write_selection_trace(&self.selections, registry, w))
    }
}

/// Runs a selector by kind. `seed` is only used by `Random`.
pub fn select_with(
    kind: SelectorKind,
    pool: &[EntityId],
    m: usize,
    phi: &LatentMatrix,
    user: EntityId,
    hp: &Hyperparams,
    seed: u64,
) -> Result<SelectionResult> {
    match kind {
        SelectorKind::Fisher => select_fisher(pool, m, phi, user, hp.lambda),
        SelectorKind::ApproxAInverse => select_approx(pool, m, phi, user, hp.lambda, ApproxVariant::AInverse),
        SelectorKind::ApproxMaxTrace => select_approx(pool, m, phi, user, hp.lambda, ApproxVariant::MaxTrace),
        SelectorKind::Uncertainty => select_uncertainty(pool, m, phi, user),
        SelectorKind::MaxModelChange => select_model_change(pool, m, phi, user, hp.eta, ChangeDirection::Max),
        SelectorKind::MinModelChange => select_model_change(pool, m, phi, user, hp.eta, ChangeDirection::Min),
        SelectorKind::Random => select_random(pool, m, seed),
    }
}

/// F1 of thresholded predictions on the R triples of `test`.
pub fn evaluate_f1(phi: &LatentMatrix, test: &[RelationTriple]) -> Result<f64> {
    let (pred, labels): (Vec<i8>, Vec<i8>) = test
        .iter()
        .filter(|t| t.relation == Relation::R)
        .map(|t| (phi.predict(t.first, t.second).label, t.label))
        .unzip();
    if labels.is_empty() {
        return Err(Error::Input("test set has no R triples".into()));
    }
    f1_score(&pred, &labels)
}

/// The triple recording `user`'s answer about `entity`.
fn answer_triple(db: &Database, user: EntityId, entity: EntityId, label: i8) -> Result<RelationTriple> {
    let kind = db.registry().kind(entity);
    let relation = Relation::for_user_and(kind)
        .ok_or_else(|| Error::Input(format!("{entity} ({kind}) cannot be asked of a user")))?;
    Ok(match relation {
        Relation::R => RelationTriple::new(relation, entity, user, label),
        _ => RelationTriple::new(relation, user, entity, label),
    })
}

/// Everything shared by the selectors of one trial.
struct TrialSetup {
    seeds: TrialSeeds,
    split: Split,
    initial: LatentMatrix,
    reference: LatentMatrix,
    lower: f64,
    upper: f64,
}

fn prepare_trial(cfg: &ExperimentConfig, db: &Database, trial: usize) -> Result<TrialSetup> {
    let seeds = trial_seeds(cfg.master_seed, trial);
    let split = match cfg.protocol {
        Protocol::ColdStart => split_cold_start(db, cfg.cold_frac, seeds.split)?,
        _ => split_personalized(db, cfg.test_frac, cfg.train_frac, seeds.split)?,
    };
    let n = db.registry().len();
    let available: Vec<RelationTriple> = split.train.iter().chain(&split.pool).copied().collect();
    let reference = sgd_train(&available, n, &cfg.hp, seeds.reference)?.phi;
    let initial = sgd_train(&split.train, n, &cfg.hp, seeds.init)?.phi;
    let lower = evaluate_f1(&initial, &split.test)?;
    let upper = evaluate_f1(&reference, &split.test)?;
    Ok(TrialSetup {
        seeds,
        split,
        initial,
        reference,
        lower,
        upper,
    })
}

struct TrialOutcome {
    /// F1 per selector (config order) per iteration 0..=T.
    curves: Vec<Vec<f64>>,
    lower: f64,
    upper: f64,
    selections: Vec<SelectionStep>,
}

fn initial_sessions(setup: &TrialSetup, users: &[EntityId]) -> BTreeMap<EntityId, ALSessionState> {
    let mut sessions: BTreeMap<EntityId, ALSessionState> = users
        .iter()
        .map(|&u| (u, ALSessionState::new(u, BTreeMap::new(), BTreeSet::new())))
        .collect();
    for t in &setup.split.train {
        if let (Some(u), Some(e)) = (t.user(), t.item()) {
            if let Some(s) = sessions.get_mut(&u) {
                s.labeled.insert(e, t.label);
            }
        }
    }
    for t in &setup.split.pool {
        if let (Some(u), Some(e)) = (t.user(), t.item()) {
            if let Some(s) = sessions.get_mut(&u) {
                s.pool.insert(e);
            }
        }
    }
    sessions
}

/// Users questioned in each round 1..=T.
fn user_schedule(cfg: &ExperimentConfig, users: &[EntityId], seed: u64) -> Vec<Vec<EntityId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.iterations)
        .map(|_| match cfg.protocol {
            Protocol::ColdStart => users.to_vec(),
            _ => {
                let n = ((cfg.user_fraction * users.len() as f64 + 1e-9).floor() as usize)
                    .clamp(users.len().min(1), users.len());
                let mut picked: Vec<EntityId> = rand::seq::index::sample(&mut rng, users.len(), n)
                    .into_iter()
                    .map(|i| users[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
        })
        .collect()
}

struct LoopContext<'a> {
    cfg: &'a ExperimentConfig,
    db: &'a Database,
    setup: &'a TrialSetup,
    oracle: Oracle<'a>,
    sessions: &'a BTreeMap<EntityId, ALSessionState>,
    schedule: &'a [Vec<EntityId>],
    trial: usize,
}

fn run_selector(ctx: &LoopContext<'_>, kind: SelectorKind) -> Result<(Vec<f64>, Vec<SelectionStep>)> {
    let cfg = ctx.cfg;
    let mut phi = ctx.setup.initial.clone();
    let mut sessions = ctx.sessions.clone();
    let mut answered: Vec<RelationTriple> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.setup.seeds.random);
    let mut curve = Vec::with_capacity(cfg.iterations + 1);
    let mut steps = Vec::new();
    curve.push(ctx.setup.lower);

    for (round, users) in ctx.schedule.iter().enumerate() {
        let iteration = round + 1;
        for u in users {
            let Some(s) = sessions.get_mut(u) else { continue };
            if s.pool.is_empty() {
                continue;
            }
            let m = cfg.questions_per_round.min(s.pool.len());
            let seed = if kind == SelectorKind::Random { rng.random() } else { 0 };
            let sel = select_with(kind, &s.pool_vec(), m, &phi, *u, &cfg.hp, seed)?;
            if cfg.record_selections {
                for (step, &entity) in sel.chosen.iter().enumerate() {
                    steps.push(SelectionStep {
                        trial: ctx.trial,
                        selector: kind,
                        iteration,
                        user: *u,
                        step,
                        entity,
                        objective: sel.steps.get(step).copied().unwrap_or(sel.objective_value),
                    });
                }
            }
            for &e in &sel.chosen {
                let y = ctx.oracle.answer(*u, e);
                s.record(e, y);
                answered.push(answer_triple(ctx.db, *u, e, y)?);
            }
            s.iteration = iteration;
            let labeled = s.labeled_vec();
            let phi_u = refit_user(*u, &labeled, &phi, cfg.hp.user_penalty(labeled.len()))?;
            phi.set_vector(*u, &phi_u)?;
        }
        if let UpdateMode::Retrain { every } = cfg.update {
            if iteration % every == 0 {
                let data: Vec<RelationTriple> = ctx.setup.split.train.iter().chain(&answered).copied().collect();
                let seed = ctx.setup.seeds.init.wrapping_add(iteration as u64);
                phi = sgd_train_from(phi, &data, &cfg.hp, seed)?.phi;
            }
        }
        curve.push(evaluate_f1(&phi, &ctx.setup.split.test)?);
    }
    Ok((curve, steps))
}

fn run_trial(cfg: &ExperimentConfig, data: &ExperimentData<'_>, db: &Database, trial: usize) -> Result<TrialOutcome> {
    let setup = prepare_trial(cfg, db, trial)?;
    let params = match cfg.protocol.oracle_mode() {
        OracleMode::Pretrained => &setup.reference,
        OracleMode::NoisyGroundTruth => data.truth.ok_or(Error::GroundTruthRequired)?,
    };
    let oracle = Oracle {
        mode: cfg.protocol.oracle_mode(),
        params,
        trial_seed: setup.seeds.oracle,
    };
    let users = match &setup.split.cold_users {
        Some(cold) => cold.clone(),
        None => setup.split.pool_users(),
    };
    let sessions = initial_sessions(&setup, &users);
    let schedule = user_schedule(cfg, &users, setup.seeds.users);
    let ctx = LoopContext {
        cfg,
        db,
        setup: &setup,
        oracle,
        sessions: &sessions,
        schedule: &schedule,
        trial,
    };
    let mut curves = Vec::with_capacity(cfg.selectors.len());
    let mut selections = Vec::new();
    for &kind in &cfg.selectors {
        let (curve, steps) = run_selector(&ctx, kind)?;
        curves.push(curve);
        selections.extend(steps);
    }
    Ok(TrialOutcome {
        curves,
        lower: setup.lower,
        upper: setup.upper,
        selections,
    })
}

fn model_view<'a>(cfg: &ExperimentConfig, data: &ExperimentData<'a>) -> Result<Cow<'a, Database>> {
    if let Some(truth) = data.truth {
        if truth.n_entities() != data.db.registry().len() {
            return Err(Error::Dimension {
                expected: data.db.registry().len(),
                got: truth.n_entities(),
            });
        }
    }
    if cfg.protocol == Protocol::Noisy && data.truth.is_none() {
        return Err(Error::GroundTruthRequired);
    }
    Ok(match cfg.relations {
        RelationMode::Collective => Cow::Borrowed(data.db),
        RelationMode::ROnly => Cow::Owned(data.db.restricted_to(&[Relation::R])),
    })
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `cfg.protocol` for `cfg.mc_trials` trials and aggregates the curves.
pub fn run_experiment(cfg: &ExperimentConfig, data: &ExperimentData<'_>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let db = model_view(cfg, data)?;
    let outcomes = in_pool(cfg.threads, || {
        (0..cfg.mc_trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, data, &db, i))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut out = ExperimentOutput::default();
    for (si, &kind) in cfg.selectors.iter().enumerate() {
        let per_trial: Vec<Vec<f64>> = outcomes.iter().map(|o| o.curves[si].clone()).collect();
        let (means, stds) = aggregate_mc(&per_trial)?;
        for (iteration, (mean, std)) in means.into_iter().zip(stds).enumerate() {
            out.table.rows.push(ResultRow {
                selector: kind,
                iteration,
                f1_mean: mean,
                f1_std: std,
                n_trials: cfg.mc_trials,
            });
        }
    }
    for (trial, o) in outcomes.iter().enumerate() {
        for (si, &kind) in cfg.selectors.iter().enumerate() {
            for (iteration, &f1) in o.curves[si].iter().enumerate() {
                out.trace.push(TraceRow {
                    trial,
                    selector: kind,
                    iteration,
                    f1,
                });
            }
        }
    }
    let n = outcomes.len() as f64;
    out.bounds = Some(Bounds {
        lower: outcomes.iter().map(|o| o.lower).sum::<f64>() / n,
        upper: outcomes.iter().map(|o| o.upper).sum::<f64>() / n,
    });
    out.selections = outcomes.into_iter().flat_map(|o| o.selections).collect();
    Ok(out)
}

fn expect_protocol(cfg: &ExperimentConfig, protocol: Protocol) -> Result<()> {
    if cfg.protocol != protocol {
        return Err(Error::Config(format!(
            "configuration is for the {} protocol, not {}",
            cfg.protocol.as_str(),
            protocol.as_str()
        )));
    }
    Ok(())
}

pub fn run_personalized(cfg: &ExperimentConfig, data: &ExperimentData<'_>) -> Result<ExperimentOutput> {
    expect_protocol(cfg, Protocol::Personalized)?;
    run_experiment(cfg, data)
}

pub fn run_cold_start(cfg: &ExperimentConfig, data: &ExperimentData<'_>) -> Result<ExperimentOutput> {
    expect_protocol(cfg, Protocol::ColdStart)?;
    run_experiment(cfg, data)
}

pub fn run_noisy(cfg: &ExperimentConfig, data: &ExperimentData<'_>) -> Result<ExperimentOutput> {
    expect_protocol(cfg, Protocol::Noisy)?;
    run_experiment(cfg, data)
}

/// Mean F1 of the initial model (lower) and of the model trained on all
/// available training data (upper), over `cfg.mc_trials` trials.
pub fn run_bounds(cfg: &ExperimentConfig, data: &ExperimentData<'_>) -> Result<Bounds> {
    cfg.validate()?;
    let db = model_view(cfg, data)?;
    let pairs = in_pool(cfg.threads, || {
        (0..cfg.mc_trials)
            .into_par_iter()
            .map(|i| prepare_trial(cfg, &db, i).map(|s| (s.lower, s.upper)))
            .collect::<Result<Vec<_>>>()
    })??;
    let n = pairs.len() as f64;
    Ok(Bounds {
        lower: pairs.iter().map(|p| p.0).sum::<f64>() / n,
        upper: pairs.iter().map(|p| p.1).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{generate_synthetic, SyntheticConfig};

    fn tiny() -> (Database, LatentMatrix) {
        let cfg = SyntheticConfig {
            n_users: 16,
            n_businesses: 20,
            n_categories: 8,
            k: 3,
            ..Default::default()
        };
        let d = generate_synthetic(&cfg, 3).unwrap();
        (d.db, d.truth)
    }

    fn quick(protocol: Protocol) -> ExperimentConfig {
        ExperimentConfig {
            iterations: 3,
            mc_trials: 2,
            hp: Hyperparams {
                k: 3,
                epochs: 30,
                ..Default::default()
            },
            ..ExperimentConfig::synthetic(protocol)
        }
    }

    #[test]
    fn seed_schedule() {
        let s = trial_seeds(100, 2);
        assert_eq!(s.trial, 100 + 2 * 10007);
        assert_eq!(s.split, s.trial + 1);
        assert_eq!(s.random, s.trial + 6);
    }

    #[test]
    fn table_shape_and_shared_start() {
        let (db, truth) = tiny();
        let data = ExperimentData { db: &db, truth: Some(&truth) };
        let cfg = quick(Protocol::Personalized);
        let out = run_personalized(&cfg, &data).unwrap();
        assert_eq!(out.table.rows.len(), 7 * 4);
        let lower = out.bounds.unwrap().lower;
        for kind in SelectorKind::ALL {
            let r = out.table.get(kind, 0).unwrap();
            assert!((r.f1_mean - lower).abs() < 1e-12);
            assert_eq!(r.n_trials, 2);
        }
        assert!(out.table.rows.iter().all(|r| (0.0..=1.0).contains(&r.f1_mean)));
        assert_eq!(out.trace.len(), 2 * 7 * 4);
    }

    #[test]
    fn zero_iterations_gives_only_initial_rows() {
        let (db, truth) = tiny();
        let data = ExperimentData { db: &db, truth: Some(&truth) };
        let cfg = ExperimentConfig {
            iterations: 0,
            ..quick(Protocol::Personalized)
        };
        let out = run_experiment(&cfg, &data).unwrap();
        assert!(out.table.rows.iter().all(|r| r.iteration == 0));
        assert_eq!(out.table.rows.len(), 7);
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let (db, truth) = tiny();
        let data = ExperimentData { db: &db, truth: Some(&truth) };
        let mut cfg = quick(Protocol::Noisy);
        cfg.threads = 1;
        let a = run_experiment(&cfg, &data).unwrap();
        cfg.threads = 3;
        let b = run_experiment(&cfg, &data).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn noisy_requires_ground_truth() {
        let (db, _) = tiny();
        let data = ExperimentData { db: &db, truth: None };
        assert!(matches!(
            run_noisy(&quick(Protocol::Noisy), &data),
            Err(Error::GroundTruthRequired)
        ));
    }

    #[test]
    fn protocol_mismatch_is_rejected() {
        let (db, truth) = tiny();
        let data = ExperimentData { db: &db, truth: Some(&truth) };
        assert!(matches!(
            run_cold_start(&quick(Protocol::Personalized), &data),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cold_start_and_retrain_run() {
        let (db, truth) = tiny();
        let data = ExperimentData { db: &db, truth: Some(&truth) };
        let cfg = ExperimentConfig {
            selectors: vec![SelectorKind::Fisher, SelectorKind::Random],
            update: UpdateMode::Retrain { every: 2 },
            record_selections: true,
            ..quick(Protocol::ColdStart)
        };
        let out = run_cold_start(&cfg, &data).unwrap();
        assert_eq!(out.table.rows.len(), 2 * 4);
        // 6 cold users, one question each per round
        assert_eq!(out.selections.len(), 2 * 2 * 3 * 6);
    }

    #[test]
    fn bounds_are_ordered_on_average() {
        let (db, truth) = tiny();
        let data = ExperimentData { db: &db, truth: Some(&truth) };
        let cfg = ExperimentConfig {
            mc_trials: 4,
            ..quick(Protocol::Personalized)
        };
        let b = run_bounds(&cfg, &data).unwrap();
        assert!(b.upper >= b.lower - 0.02, "{b:?}");
    }

    #[test]
    fn answer_triples_follow_schema() {
        let (db, _) = tiny();
        let reg = db.registry();
        let u = reg.ids_of(crate::store::EntityKind::User).next().unwrap();
        let b = reg.ids_of(crate::store::EntityKind::Business).next().unwrap();
        let c = reg.ids_of(crate::store::EntityKind::Category).next().unwrap();
        assert_eq!(answer_triple(&db, u, b, 1).unwrap().key(), (Relation::R, b, u));
        assert_eq!(answer_triple(&db, u, c, -1).unwrap().key(), (Relation::UC, u, c));
        assert!(answer_triple(&db, u, u, 1).is_err());
    }
}
