//! Monte Carlo aggregation and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::baselines::SelectorKind;
use crate::error::{Error, Result};
use crate::store::{EntityId, Registry};

pub const RESULTS_HEADER: &str = "selector,iteration,f1_mean,f1_std,n_trials";
pub const BOUNDS_HEADER: &str = "bound,f1";
pub const TRACE_HEADER: &str = "trial,selector,iteration,f1";
pub const SELECTION_TRACE_HEADER: &str = "trial\tselector\titeration\tuser\tstep\tentity\tobjective";

/// Per-iteration mean and sample standard deviation over trials (rows).
pub fn aggregate_mc(per_trial: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = per_trial.first() else {
        return Err(Error::Input("no trials to aggregate".into()));
    };
    let width = first.len();
    if per_trial.iter().any(|r| r.len() != width) {
        return Err(Error::Input("ragged trial matrix".into()));
    }
    let n = per_trial.len() as f64;
    let mut means = vec![0.0; width];
    let mut stds = vec![0.0; width];
    for j in 0..width {
        let mean = per_trial.iter().map(|r| r[j]).sum::<f64>() / n;
        means[j] = mean;
        if per_trial.len() > 1 {
            let ss: f64 = per_trial.iter().map(|r| (r[j] - mean).powi(2)).sum();
            stds[j] = (ss / (n - 1.0)).sqrt();
        }
    }
    Ok((means, stds))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub selector: SelectorKind,
    pub iteration: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn curve(&self, selector: SelectorKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.selector == selector)
            .map(|r| r.f1_mean)
            .collect()
    }

    pub fn selectors(&self) -> Vec<SelectorKind> {
        let mut s: Vec<_> = self.rows.iter().map(|r| r.selector).collect();
        s.dedup();
        s
    }

    pub fn get(&self, selector: SelectorKind, iteration: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.selector == selector && r.iteration == iteration)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RESULTS_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{}",
                r.selector, r.iteration, r.f1_mean, r.f1_std, r.n_trials
            )?;
        }
        out.flush()
    }
}

/// Mean lower and upper bound F1 over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{BOUNDS_HEADER}")?;
        writeln!(out, "lower,{:.6}", self.lower)?;
        writeln!(out, "upper,{:.6}", self.upper)?;
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub trial: usize,
    pub selector: SelectorKind,
    pub iteration: usize,
    pub f1: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{:.6}", r.trial, r.selector, r.iteration, r.f1)?;
    }
    out.flush()
}

/// One greedy step of one selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub trial: usize,
    pub selector: SelectorKind,
    pub iteration: usize,
    pub user: EntityId,
    pub step: usize,
    pub entity: EntityId,
    pub objective: f64,
}

pub fn write_selection_trace<W: Write>(rows: &[SelectionStep], registry: &Registry, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SELECTION_TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.10e}",
            r.trial,
            r.selector,
            r.iteration,
            registry.qualified_key(r.user),
            r.step,
            registry.qualified_key(r.entity),
            r.objective
        )?;
    }
    out.flush()
}

pub(crate) fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    f(BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
