//! Monte-Carlo cells, schedule calibration and sweeps.
//!
//! A cell is one stored network at one load `M`. Every rule in the config
//! sees the same patterns and queries in a cell. Seeds:
//!
//! | stream              | key                                   | stream id |
//! |---------------------|---------------------------------------|-----------|
//! | stored patterns     | `[master, Patterns, M, network]`      | 0         |
//! | hetero contents     | `[master, Content, M, network]`       | 0         |
//! | query `q`           | `[master, Queries, M, network]`       | `q`       |
//! | calibration patterns| `[master, Calibration, M, 2 network]` | 0         |
//! | calibration query   | `[master, Calibration, M, 2 network+1]`| `q`      |
//! | calibration contents| `[master, Content, M, !network]`      | 0         |
//!
//! A query stream first draws the target index, then the query noise.

use std::collections::BTreeMap;

use rand::Rng;

use crate::counters::{CounterStore, Mode};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::{summarize, TrialMetrics};
use crate::patterns::{gen_patterns, make_query_with, PatternSet};
use crate::retrieval::{
    calibrate_ane, iterate_batch, measure_step, one_step, Network, RetrievalSchedule, StepSetting, Trial,
};
use crate::rules::Rule;
use crate::seed::{Purpose, Seed};

use super::config::{ExperimentConfig, ScheduleSpec};
use super::report::ResultRow;

/// Stored patterns, optional hetero contents and the cell's problems.
#[derive(Clone, Debug)]
pub struct CellData {
    pub patterns: PatternSet,
    pub contents: Option<PatternSet>,
    pub store: CounterStore,
    /// `(query, target)` pairs.
    pub problems: Vec<(Vec<bool>, Vec<bool>)>,
}

fn keys(cfg: &ExperimentConfig, m: usize, network: usize, calibration: bool) -> (Seed, Seed, Seed) {
    let master = Seed::new(cfg.seed);
    let (m, net) = (m as u64, network as u64);
    if calibration {
        (
            master.derive(Purpose::Calibration, m, 2 * net),
            master.derive(Purpose::Content, m, !net),
            master.derive(Purpose::Calibration, m, 2 * net + 1),
        )
    } else {
        (
            master.derive(Purpose::Patterns, m, net),
            master.derive(Purpose::Content, m, net),
            master.derive(Purpose::Queries, m, net),
        )
    }
}

/// Generates and stores the patterns of one network and its queries.
pub fn cell_data(cfg: &ExperimentConfig, m: usize, network: usize, calibration: bool) -> Result<CellData> {
    let (pk, ck, qk) = keys(cfg, m, network, calibration);
    let patterns = gen_patterns(cfg.n, cfg.k, m, cfg.family, pk)?;
    let contents = match cfg.mode {
        Mode::Auto => None,
        Mode::Hetero => Some(gen_patterns(cfg.n, cfg.k, m, cfg.family, ck)?),
    };
    let store = CounterStore::store(&patterns, cfg.mode, contents.as_ref())?;
    let spec = cfg.query_spec()?;
    let problems = (0..cfg.n_queries)
        .map(|q| {
            let mut rng = qk.stream(q as u64);
            let mu = rng.random_range(0..m);
            let query = make_query_with(patterns.pattern(mu), &spec, cfg.family, &mut rng)?;
            let target = contents.as_ref().unwrap_or(&patterns).pattern(mu).to_vec();
            Ok((query, target))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellData {
        patterns,
        contents,
        store,
        problems,
    })
}

/// Per-step errors of one retrieval; the last entry persists after it ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub errors: Vec<(usize, usize)>,
    pub converged_at: Option<usize>,
}

impl TrialOutcome {
    /// Metrics as seen at step `t`; `steps` counts iterations run up to `t`.
    pub fn at(&self, t: usize, k: f64) -> TrialMetrics {
        let used = t.min(self.errors.len());
        let (f10, f01) = self.errors[used - 1];
        TrialMetrics::new(f10, f01, k, used)
    }
}

fn network(cfg: &ExperimentConfig, rule: Rule, store: CounterStore, exec: Exec) -> Result<Network> {
    Ok(Network::new(store, rule, cfg.k)?
        .with_stabilization(cfg.eta)?
        .with_exec(exec))
}

/// Runs every rule on one network. `schedules[r]` drives `cfg.rules[r]`.
pub fn run_cell(
    cfg: &ExperimentConfig,
    schedules: &[RetrievalSchedule],
    m: usize,
    network_index: usize,
    exec: Exec,
) -> Result<Vec<Vec<TrialOutcome>>> {
    if schedules.len() != cfg.rules.len() {
        return Err(Error::LengthMismatch {
            expected: cfg.rules.len(),
            got: schedules.len(),
        });
    }
    let data = cell_data(cfg, m, network_index, false)?;
    cfg.rules
        .iter()
        .zip(schedules)
        .map(|(&rule, schedule)| {
            let net = network(cfg, rule, data.store.clone(), exec)?;
            match cfg.mode {
                Mode::Auto => Ok(iterate_batch(&net, schedule, &data.problems, cfg.t_max)?
                    .into_iter()
                    .map(|tr| TrialOutcome {
                        errors: tr.errors,
                        converged_at: tr.converged_at,
                    })
                    .collect()),
                Mode::Hetero => {
                    let s = schedule.step(1);
                    let model = net.build(s.lambda_est, s.kappa_est)?;
                    data.problems
                        .iter()
                        .map(|(q, target)| {
                            let out = one_step(&model, q, s.selector(cfg.k))?;
                            Ok(TrialOutcome {
                                errors: vec![crate::metrics::component_errors(target, &out)?],
                                converged_at: None,
                            })
                        })
                        .collect()
                }
            }
        })
        .collect()
}

/// A calibration ensemble of `n_networks` networks at load `m`.
pub fn calibration_ensemble(
    cfg: &ExperimentConfig,
    rule: Rule,
    m: usize,
    exec: Exec,
) -> Result<(Vec<Network>, Vec<Trial>)> {
    let idx: Vec<usize> = (0..cfg.n_networks).collect();
    let cells = exec.map(&idx, |&net| cell_data(cfg, m, net, true));
    let mut nets = Vec::with_capacity(cells.len());
    let mut trials = Vec::new();
    for (i, cell) in cells.into_iter().enumerate() {
        let cell = cell?;
        trials.extend(cell.problems.into_iter().map(|(query, target)| Trial {
            network: i,
            query,
            target,
        }));
        nets.push(network(cfg, rule, cell.store, exec)?);
    }
    Ok((nets, trials))
}

/// Calibrated schedule for `rule` at load `m`.
pub fn calibrate(cfg: &ExperimentConfig, rule: Rule, m: usize, alpha: f64, exec: Exec) -> Result<RetrievalSchedule> {
    if cfg.mode != Mode::Auto {
        return Err(Error::UnsupportedMode(
            "calibration needs auto-associative stores".into(),
        ));
    }
    let (l1, k1) = cfg.step1_estimates()?;
    let (nets, trials) = calibration_ensemble(cfg, rule, m, exec)?;
    calibrate_ane(&nets, &trials, StepSetting::new(l1, k1, alpha, cfg.selection()), exec)
}

/// Resolves `schedules[r][i]` for rule `r` at grid point `m_grid[i]`,
/// running calibrations where the schedule needs them.
pub fn resolve_schedules(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<Vec<RetrievalSchedule>>> {
    let per_m = |rule: Rule| -> Result<Vec<RetrievalSchedule>> {
        match &cfg.schedule {
            ScheduleSpec::Ane { m_ref, alpha } => {
                let mut done: BTreeMap<usize, RetrievalSchedule> = BTreeMap::new();
                cfg.m_grid
                    .iter()
                    .map(|&m| {
                        let m_cal = m_ref.unwrap_or(m);
                        if let Some(s) = done.get(&m_cal) {
                            return Ok(s.clone());
                        }
                        let s = calibrate(cfg, rule, m_cal, *alpha, exec)?;
                        done.insert(m_cal, s.clone());
                        Ok(s)
                    })
                    .collect()
            }
            ScheduleSpec::CoreWillshaw {
                lambda_est2: None,
                alpha,
                ..
            } => cfg
                .m_grid
                .iter()
                .map(|&m| {
                    let l2 = measured_core_lambda(cfg, rule, m, *alpha, exec)?;
                    cfg.fixed_schedule(Some(l2))
                })
                .collect(),
            _ => {
                let s = cfg.fixed_schedule(None)?;
                Ok(vec![s; cfg.m_grid.len()])
            }
        }
    };
    cfg.rules.iter().map(|&r| per_m(r)).collect()
}

/// `1 - mean f10 / k` after a step-1 core retrieval on a calibration
/// ensemble.
pub fn measured_core_lambda(cfg: &ExperimentConfig, rule: Rule, m: usize, alpha: f64, exec: Exec) -> Result<f64> {
    let (l1, k1) = cfg.step1_estimates()?;
    let (nets, trials) = calibration_ensemble(cfg, rule, m, exec)?;
    let states: Vec<Vec<bool>> = trials.iter().map(|t| t.query.clone()).collect();
    let setting = StepSetting::new(l1, k1, alpha, cfg.selection());
    let (_, (lambda_out, _)) = measure_step(&nets, &trials, &states, &setting, exec)?;
    Ok(lambda_out.clamp(0.0, 1.0))
}

/// All trial outcomes, indexed `[rule][m index]` and ordered by network,
/// then query.
pub fn run_trials(
    cfg: &ExperimentConfig,
    schedules: &[Vec<RetrievalSchedule>],
    exec: Exec,
) -> Result<Vec<Vec<Vec<TrialOutcome>>>> {
    let cells: Vec<(usize, usize)> = (0..cfg.m_grid.len())
        .flat_map(|i| (0..cfg.n_networks).map(move |net| (i, net)))
        .collect();
    let results = exec.map(&cells, |&(i, net)| {
        let s: Vec<RetrievalSchedule> = schedules.iter().map(|per_m| per_m[i].clone()).collect();
        run_cell(cfg, &s, cfg.m_grid[i], net, exec)
    });
    let mut out = vec![vec![Vec::new(); cfg.m_grid.len()]; cfg.rules.len()];
    for (&(i, _), cell) in cells.iter().zip(results) {
        for (r, trials) in cell?.into_iter().enumerate() {
            out[r][i].extend(trials);
        }
    }
    Ok(out)
}

/// Runs the whole grid. Rows are ordered by rule (config order), `M`,
/// then step.
pub fn sweep(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let schedules = resolve_schedules(cfg, exec)?;
    let outcomes = run_trials(cfg, &schedules, exec)?;
    let k = cfg.k as f64;
    let steps = match cfg.mode {
        Mode::Auto => cfg.reported_steps(),
        Mode::Hetero => vec![1],
    };
    let mut rows = Vec::new();
    for (r, &rule) in cfg.rules.iter().enumerate() {
        for (i, &m) in cfg.m_grid.iter().enumerate() {
            for &t in &steps {
                let trials: Vec<TrialMetrics> = outcomes[r][i].iter().map(|o| o.at(t, k)).collect();
                let s = summarize(&trials, k)?;
                rows.push(ResultRow::new(cfg, rule, m, t, &s));
            }
        }
    }
    Ok(rows)
}
