//! Flat `key = value` run configuration and the run manifest.
//!
//! One pair per line; `#` starts a comment. Unknown and repeated keys are
//! errors. `preset` is applied before every other key regardless of where it
//! appears.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::baselines::SelectorKind;
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, Protocol, RelationMode, UpdateMode};
use crate::model::{Hyperparams, Regularization};
use crate::store::{SyntheticConfig, YelpFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preset {
    Synthetic,
    Yelp,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Synthetic => "synthetic",
            Preset::Yelp => "yelp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "synthetic" => Some(Preset::Synthetic),
            "yelp" => Some(Preset::Yelp),
            _ => None,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "preset",
    "master_seed",
    "threads",
    "n_users",
    "n_businesses",
    "n_categories",
    "latent_mean",
    "latent_var",
    "min_user_ratings",
    "min_category_businesses",
    "k",
    "lambda",
    "regularization",
    "eta",
    "epochs",
    "b_max",
    "early_stop_tol",
    "iterations",
    "questions_per_round",
    "user_fraction",
    "mc_trials",
    "test_frac",
    "train_frac",
    "cold_frac",
    "selectors",
    "relations",
    "update_mode",
    "retrain_every",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Preset,
    pub master_seed: u64,
    /// Worker threads; 0 picks automatically.
    pub threads: usize,
    pub synthetic: SyntheticConfig,
    pub yelp: YelpFilter,
    pub hp: Hyperparams,
    /// Rounds; `None` uses the protocol default (25, or 15 for cold start).
    pub iterations: Option<usize>,
    pub questions_per_round: usize,
    pub user_fraction: f64,
    pub mc_trials: usize,
    pub test_frac: f64,
    pub train_frac: f64,
    pub cold_frac: f64,
    pub selectors: Vec<SelectorKind>,
    pub relations: RelationMode,
    pub update_mode: String,
    pub retrain_every: usize,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let exp = match preset {
            Preset::Synthetic => ExperimentConfig::synthetic(Protocol::Personalized),
            Preset::Yelp => ExperimentConfig::yelp(Protocol::Personalized),
        };
        Self {
            preset,
            master_seed: exp.master_seed,
            threads: exp.threads,
            synthetic: SyntheticConfig {
                k: exp.hp.k,
                ..SyntheticConfig::default()
            },
            yelp: YelpFilter::default(),
            hp: exp.hp,
            iterations: None,
            questions_per_round: exp.questions_per_round,
            user_fraction: exp.user_fraction,
            mc_trials: exp.mc_trials,
            test_frac: exp.test_frac,
            train_frac: exp.train_frac,
            cold_frac: exp.cold_frac,
            selectors: exp.selectors,
            relations: exp.relations,
            update_mode: "refit".into(),
            retrain_every: 5,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path)
    }

    /// Parses config text; `origin` only labels error messages.
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(origin, i + 1, format!("expected key = value, got {line:?}")));
            };
            let key = key.trim().to_owned();
            if pairs.insert(key.clone(), value.trim().to_owned()).is_some() {
                return Err(Error::Config(format!("key {key} given more than once")));
            }
        }
        let unknown: Vec<String> = pairs
            .keys()
            .filter(|k| !CONFIG_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownConfigKeys(unknown));
        }

        let preset = match pairs.remove("preset") {
            Some(v) => Preset::parse(&v).ok_or_else(|| bad("preset", &v))?,
            None => Preset::Synthetic,
        };
        let mut cfg = Self::preset(preset);
        for (key, value) in &pairs {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "master_seed" => self.master_seed = num(key, v)?,
            "threads" => self.threads = num(key, v)?,
            "n_users" => self.synthetic.n_users = num(key, v)?,
            "n_businesses" => self.synthetic.n_businesses = num(key, v)?,
            "n_categories" => self.synthetic.n_categories = num(key, v)?,
            "latent_mean" => self.synthetic.mean = num(key, v)?,
            "latent_var" => self.synthetic.var = num(key, v)?,
            "min_user_ratings" => self.yelp.min_user_ratings = num(key, v)?,
            "min_category_businesses" => self.yelp.min_category_businesses = num(key, v)?,
            "k" => {
                self.hp.k = num(key, v)?;
                self.synthetic.k = self.hp.k;
            }
            "lambda" => self.hp.lambda = num(key, v)?,
            "regularization" => self.hp.regularization = Regularization::parse(v).ok_or_else(|| bad(key, v))?,
            "eta" => self.hp.eta = num(key, v)?,
            "epochs" => self.hp.epochs = num(key, v)?,
            "b_max" => self.hp.b_max = num(key, v)?,
            "early_stop_tol" => self.hp.early_stop_tol = num(key, v)?,
            "iterations" => self.iterations = Some(num(key, v)?),
            "questions_per_round" => self.questions_per_round = num(key, v)?,
            "user_fraction" => self.user_fraction = num(key, v)?,
            "mc_trials" => self.mc_trials = num(key, v)?,
            "test_frac" => self.test_frac = num(key, v)?,
            "train_frac" => self.train_frac = num(key, v)?,
            "cold_frac" => self.cold_frac = num(key, v)?,
            "selectors" => self.selectors = parse_selectors(v)?,
            "relations" => self.relations = RelationMode::parse(v).ok_or_else(|| bad(key, v))?,
            "update_mode" => match v {
                "refit" | "retrain" => self.update_mode = v.to_owned(),
                _ => return Err(bad(key, v)),
            },
            "retrain_every" => self.retrain_every = num(key, v)?,
            _ => return Err(Error::UnknownConfigKeys(vec![key.to_owned()])),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.experiment(Protocol::Personalized).validate()
    }

    pub fn update(&self) -> UpdateMode {
        match self.update_mode.as_str() {
            "retrain" => UpdateMode::Retrain {
                every: self.retrain_every,
            },
            _ => UpdateMode::Refit,
        }
    }

    pub fn experiment(&self, protocol: Protocol) -> ExperimentConfig {
        let base = ExperimentConfig::synthetic(protocol);
        ExperimentConfig {
            protocol,
            iterations: self.iterations.unwrap_or(base.iterations),
            questions_per_round: self.questions_per_round,
            user_fraction: self.user_fraction,
            mc_trials: self.mc_trials,
            master_seed: self.master_seed,
            hp: self.hp,
            test_frac: self.test_frac,
            train_frac: self.train_frac,
            cold_frac: self.cold_frac,
            selectors: self.selectors.clone(),
            relations: self.relations,
            update: self.update(),
            threads: self.threads,
            record_selections: false,
        }
    }

    /// Every key with its resolved value, in a form `parse_str` accepts.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("preset", self.preset.as_str().into());
        put("master_seed", self.master_seed.to_string());
        put("threads", self.threads.to_string());
        put("n_users", self.synthetic.n_users.to_string());
        put("n_businesses", self.synthetic.n_businesses.to_string());
        put("n_categories", self.synthetic.n_categories.to_string());
        put("latent_mean", self.synthetic.mean.to_string());
        put("latent_var", self.synthetic.var.to_string());
        put("min_user_ratings", self.yelp.min_user_ratings.to_string());
        put("min_category_businesses", self.yelp.min_category_businesses.to_string());
        put("k", self.hp.k.to_string());
        put("lambda", self.hp.lambda.to_string());
        put("regularization", self.hp.regularization.as_str().into());
        put("eta", self.hp.eta.to_string());
        put("epochs", self.hp.epochs.to_string());
        put("b_max", self.hp.b_max.to_string());
        put("early_stop_tol", self.hp.early_stop_tol.to_string());
        if let Some(t) = self.iterations {
            put("iterations", t.to_string());
        }
        put("questions_per_round", self.questions_per_round.to_string());
        put("user_fraction", self.user_fraction.to_string());
        put("mc_trials", self.mc_trials.to_string());
        put("test_frac", self.test_frac.to_string());
        put("train_frac", self.train_frac.to_string());
        put("cold_frac", self.cold_frac.to_string());
        put(
            "selectors",
            self.selectors.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
        );
        put("relations", self.relations.as_str().into());
        put("update_mode", self.update_mode.clone());
        put("retrain_every", self.retrain_every.to_string());
        m
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Synthetic)
    }
}

fn bad(key: &str, v: &str) -> Error {
    Error::Config(format!("{key}: invalid value {v:?}"))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| Error::Config(format!("{key}: {e} ({v:?})")))
}

/// Comma-separated selector names; `all` expands to every selector.
pub fn parse_selectors(v: &str) -> Result<Vec<SelectorKind>> {
    if v.trim() == "all" {
        return Ok(SelectorKind::ALL.to_vec());
    }
    v.split(',')
        .map(|s| SelectorKind::parse(s).ok_or_else(|| bad("selectors", s)))
        .collect()
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Input file name to content hash.
    pub fingerprints: BTreeMap<String, String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, config: &RunConfig) -> Self {
        Self {
            command: command.to_owned(),
            config_path: config_path.map(|p| p.display().to_string()),
            config: config.to_pairs(),
            seeds: BTreeMap::from([("master_seed".to_owned(), config.master_seed)]),
            fingerprints: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}
