use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use cmf_active::config::{parse_selectors, RunConfig, RunManifest};
use cmf_active::harness::{run_experiment, ExperimentData, Protocol, RESULTS_HEADER};
use cmf_active::model::{load_checkpoint, save_checkpoint, sgd_train, sgd_train_from, CheckpointHeader};
use cmf_active::store::{
    generate_synthetic, ingest_yelp, read_business_categories, read_groundtruth, read_ratings, read_relations,
    write_groundtruth, write_relations,
};
use cmf_active::{Error, Result};

const THREADS_ENV: &str = "CMF_ACTIVE_THREADS";

#[derive(Parser)]
#[command(name = "cmf-active", version, about = "Active learning for collective matrix factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Flat key = value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its ground-truth factors.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build a relations file from Yelp-schema ratings and business categories.
    Ingest {
        #[command(flatten)]
        config: ConfigArg,
        /// TSV with header user_key, business_key, stars.
        #[arg(long)]
        ratings: PathBuf,
        /// TSV with header business_key, category_key.
        #[arg(long)]
        business_categories: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train a model on a relations file and write a checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, short)]
        data: PathBuf,
        /// Continue from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run an active-learning experiment.
    Experiment {
        /// personalized, cold-start or noisy.
        protocol: String,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, short)]
        data: PathBuf,
        /// Ground-truth factors; required for the noisy protocol.
        #[arg(long)]
        groundtruth: Option<PathBuf>,
        /// Comma-separated selectors, overriding the config.
        #[arg(long)]
        selectors: Option<String>,
        /// Also write per-trial F1 to trace.csv.
        #[arg(long)]
        trace: bool,
        /// Also write every selection step to selections.tsv.
        #[arg(long)]
        selection_trace: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Convert results.csv to long-format TSV.
    Report {
        #[arg(long, short)]
        results: PathBuf,
        /// bounds.csv to include as flat reference curves.
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownConfigKeys(_) => 2,
        Error::Numerical(_) => 4,
        _ => 3,
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    let mut cfg = match &arg.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        cfg.threads = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}: invalid thread count {v:?}")))?;
    }
    Ok(cfg)
}

fn fingerprint(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

fn manifest(command: &str, arg: &ConfigArg, cfg: &RunConfig, inputs: &[(&str, &Path)]) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, arg.config.as_deref(), cfg);
    if let Some(p) = &arg.config {
        m.fingerprints.insert("config".into(), fingerprint(p)?);
    }
    for (name, path) in inputs {
        m.fingerprints.insert((*name).into(), fingerprint(path)?);
    }
    Ok(m)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = load_config(&config)?;
            create_dir(&out)?;
            let data = generate_synthetic(&cfg.synthetic, cfg.master_seed)?;
            write_relations(&out.join("relations.tsv"), &data.db)?;
            write_groundtruth(&out.join("groundtruth.tsv"), data.db.registry(), &data.truth)?;
            manifest("generate", &config, &cfg, &[])?.write(&out.join("manifest.json"))?;
            eprintln!(
                "generated {} entities, {} triples in {}",
                data.db.registry().len(),
                data.db.len(),
                out.display()
            );
        }
        Command::Ingest {
            config,
            ratings,
            business_categories,
            out,
        } => {
            let cfg = load_config(&config)?;
            create_dir(&out)?;
            let r = read_ratings(&ratings)?;
            let bc = read_business_categories(&business_categories)?;
            let db = ingest_yelp(&r, &bc, cfg.yelp, cfg.master_seed)?;
            write_relations(&out.join("relations.tsv"), &db)?;
            manifest(
                "ingest",
                &config,
                &cfg,
                &[("ratings", &ratings), ("business_categories", &business_categories)],
            )?
            .write(&out.join("manifest.json"))?;
            eprintln!("ingested {} entities, {} triples", db.registry().len(), db.len());
        }
        Command::Train { config, data, init, out } => {
            let cfg = load_config(&config)?;
            let db = read_relations(&data)?;
            let n = db.registry().len();
            let (outcome, prior_epochs) = match &init {
                Some(p) => {
                    let (header, phi) = load_checkpoint(p, db.registry())?;
                    (sgd_train_from(phi, db.triples(), &cfg.hp, cfg.master_seed)?, header.epochs)
                }
                None => (sgd_train(db.triples(), n, &cfg.hp, cfg.master_seed)?, 0),
            };
            let header = CheckpointHeader {
                k: cfg.hp.k,
                lambda: cfg.hp.lambda,
                eta: cfg.hp.eta,
                epochs: prior_epochs + outcome.epochs_run,
                seed: cfg.master_seed,
            };
            save_checkpoint(&out, &header, &outcome.phi, db.registry())?;
            let mut inputs: Vec<(&str, &Path)> = vec![("data", &data)];
            if let Some(p) = &init {
                inputs.push(("init", p));
            }
            let mut manifest_path = out.clone().into_os_string();
            manifest_path.push(".manifest.json");
            manifest("train", &config, &cfg, &inputs)?.write(Path::new(&manifest_path))?;
            match outcome.objective_trace.last() {
                Some(obj) => eprintln!("trained {} epochs, final objective {obj:.6}", outcome.epochs_run),
                None => eprintln!("no epochs run; checkpoint copied"),
            }
        }
        Command::Experiment {
            protocol,
            config,
            data,
            groundtruth,
            selectors,
            trace,
            selection_trace,
            out,
        } => {
            let protocol =
                Protocol::parse(&protocol).ok_or_else(|| Error::Config(format!("unknown protocol {protocol:?}")))?;
            let mut cfg = load_config(&config)?;
            if let Some(s) = &selectors {
                cfg.selectors = parse_selectors(s)?;
            }
            let db = read_relations(&data)?;
            let truth = match &groundtruth {
                Some(p) => Some(read_groundtruth(p, db.registry())?),
                None => None,
            };
            if protocol == Protocol::Noisy && truth.is_none() {
                return Err(Error::GroundTruthRequired);
            }
            let mut exp = cfg.experiment(protocol);
            exp.record_selections = selection_trace;
            create_dir(&out)?;
            let output = run_experiment(
                &exp,
                &ExperimentData {
                    db: &db,
                    truth: truth.as_ref(),
                },
            )?;
            output.write_results(&out.join("results.csv"))?;
            output.write_bounds(&out.join("bounds.csv"))?;
            if trace {
                output.write_trace(&out.join("trace.csv"))?;
            }
            if selection_trace {
                output.write_selection_trace(&out.join("selections.tsv"), db.registry())?;
            }
            let mut inputs: Vec<(&str, &Path)> = vec![("data", &data)];
            if let Some(p) = &groundtruth {
                inputs.push(("groundtruth", p));
            }
            let mut m = manifest(&format!("experiment {}", protocol.as_str()), &config, &cfg, &inputs)?;
            m.config.insert("iterations".into(), exp.iterations.to_string());
            m.write(&out.join("manifest.json"))?;
            if let Some(b) = output.bounds {
                eprintln!("lower bound {:.4}, upper bound {:.4}", b.lower, b.upper);
            }
        }
        Command::Report { results, bounds, out } => {
            let text = report(&results, bounds.as_deref())?;
            match out {
                Some(p) => fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })?,
                None => io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::Io {
                        path: "<stdout>".into(),
                        source: e,
                    })?,
            }
        }
    }
    Ok(())
}

fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let file = fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        if i == 0 {
            if line.trim() != header {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: 1,
                    msg: format!("expected header {header}"),
                });
            }
            continue;
        }
        if !line.trim().is_empty() {
            rows.push(line.split(',').map(|c| c.trim().to_owned()).collect());
        }
    }
    Ok(rows)
}

/// Long format: one `(curve, iteration, metric, value)` row per number.
fn report(results: &Path, bounds: Option<&Path>) -> Result<String> {
    let rows = csv_rows(results, RESULTS_HEADER)?;
    let mut out = String::from("curve\titeration\tmetric\tvalue\n");
    let mut iterations = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let [selector, iteration, mean, std, _n] = r.as_slice() else {
            return Err(Error::Parse {
                path: results.to_owned(),
                line: i + 2,
                msg: "expected 5 columns".into(),
            });
        };
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: results.to_owned(),
                line: i + 2,
                msg: format!("bad number {s:?}"),
            })
        };
        let (m, s) = (parse(mean)?, parse(std)?);
        for (metric, v) in [("f1_mean", m), ("f1_std", s), ("f1_low", m - s), ("f1_high", m + s)] {
            out.push_str(&format!("{selector}\t{iteration}\t{metric}\t{v:.6}\n"));
        }
        if !iterations.contains(iteration) {
            iterations.push(iteration.clone());
        }
    }
    if let Some(bpath) = bounds {
        for r in csv_rows(bpath, "bound,f1")? {
            let [name, v] = r.as_slice() else {
                return Err(Error::Parse {
                    path: bpath.to_owned(),
                    line: 0,
                    msg: "expected 2 columns".into(),
                });
            };
            for it in &iterations {
                out.push_str(&format!("{name}_bound\t{it}\tf1_mean\t{v}\n"));
            }
        }
    }
    Ok(out)
}
