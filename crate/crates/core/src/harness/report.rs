//! Result rows, CSV emission and capacity post-processing.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counters::Mode;
use crate::error::{Error, Result};
use crate::metrics::{capacity, CellSummary, Criterion};
use crate::patterns::Family;
use crate::rules::Rule;

use super::config::ExperimentConfig;

/// One output line: the configuration identifiers, a step and its summary.
/// Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub rule: Rule,
    pub mode: Mode,
    pub family: Family,
    pub n: usize,
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub schedule: String,
    pub eta: Option<f64>,
    pub step: usize,
    pub eps_mean: f64,
    pub p_corr: f64,
    pub f10_mean: f64,
    pub f01_mean: f64,
    pub lambda_out: f64,
    pub kappa_out: f64,
    pub iters_mean: f64,
    pub n_networks: usize,
    pub n_queries: usize,
    pub seed: u64,
}

impl ResultRow {
    pub fn new(cfg: &ExperimentConfig, rule: Rule, m: usize, step: usize, s: &CellSummary) -> Self {
        let mut schedule = cfg.schedule.to_string();
        if cfg.rounded_estimates {
            schedule.push_str("+rounded");
        }
        if let Some(sel) = cfg.selection {
            schedule.push_str(&format!("+{sel}"));
        }
        ResultRow {
            rule,
            mode: cfg.mode,
            family: cfg.family,
            n: cfg.n,
            k: cfg.k,
            m,
            lambda: cfg.lambda,
            kappa: cfg.kappa,
            schedule,
            eta: cfg.eta,
            step,
            eps_mean: s.eps_mean,
            p_corr: s.p_corr,
            f10_mean: s.f10_mean,
            f01_mean: s.f01_mean,
            lambda_out: s.lambda_out,
            kappa_out: s.kappa_out,
            iters_mean: s.iters_mean,
            n_networks: cfg.n_networks,
            n_queries: cfg.n_queries,
            seed: cfg.seed,
        }
    }

    /// Everything identifying the curve this row belongs to.
    fn group_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{:?}|{}|{}|{}|{}",
            self.rule,
            self.mode,
            self.family,
            self.n,
            self.k,
            self.lambda,
            self.kappa,
            self.schedule,
            self.eta,
            self.step,
            self.n_networks,
            self.n_queries,
            self.seed
        )
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_rows<W: Write>(rows: &[ResultRow], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rows_to(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_rows(rows, file).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_rows<R: Read>(r: R, path: &Path) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<csv::Result<Vec<ResultRow>>>()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

/// Interpolated capacity of one curve; `None` when the criterion never
/// holds on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityRow {
    pub rule: Rule,
    pub mode: Mode,
    pub family: Family,
    pub schedule: String,
    pub eta: Option<f64>,
    pub step: usize,
    pub capacity: Option<f64>,
}

/// Groups rows by everything but `M` and the summaries, in order of first
/// appearance, and interpolates each group's capacity.
pub fn capacity_report(rows: &[ResultRow], criterion: Criterion) -> Result<Vec<CapacityRow>> {
    let mut groups: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    for row in rows {
        let key = row.group_key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(_, mut g)| {
            g.sort_by_key(|r| r.m);
            let value = |r: &ResultRow| match criterion {
                Criterion::Eps(_) => r.eps_mean,
                Criterion::PCorr(_) => r.p_corr,
            };
            let samples: Vec<(f64, f64)> = g.iter().map(|r| (r.m as f64, value(r))).collect();
            let first = g[0];
            let c = if samples.len() == 1 {
                // A single grid point only tells whether it satisfies.
                criterion.holds(samples[0].1).then_some(samples[0].0)
            } else {
                Some(capacity(&samples, criterion)?).filter(|&c| c > 0.0)
            };
            Ok(CapacityRow {
                rule: first.rule,
                mode: first.mode,
                family: first.family,
                schedule: first.schedule.clone(),
                eta: first.eta,
                step: first.step,
                capacity: c,
            })
        })
        .collect()
}

pub fn capacity_report_file(path: &Path, criterion: Criterion) -> Result<Vec<CapacityRow>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = read_rows(file, path)?;
    if rows.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            message: "no result rows".into(),
        });
    }
    capacity_report(&rows, criterion).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `rule,mode,family,schedule,eta,step,criterion,capacity`, with
/// `below-grid` for curves that never satisfy the criterion.
pub fn write_capacity<W: Write>(rows: &[CapacityRow], criterion: Criterion, w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "rule",
        "mode",
        "family",
        "schedule",
        "eta",
        "step",
        "criterion",
        "capacity",
    ])?;
    for r in rows {
        out.write_record([
            r.rule.to_string(),
            r.mode.to_string(),
            r.family.to_string(),
            r.schedule.clone(),
            r.eta.map(|e| e.to_string()).unwrap_or_default(),
            r.step.to_string(),
            criterion.to_string(),
            r.capacity
                .map(|c| format!("{c:.1}"))
                .unwrap_or_else(|| "below-grid".to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}
