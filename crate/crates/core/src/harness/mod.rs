//! Configuration-driven sweeps, CSV output and capacity reports.

pub mod config;
pub mod report;
pub mod sweep;

use std::io::Write;

pub use config::{parse_override, ExperimentConfig, ScheduleSpec};
pub use report::{
    capacity_report, capacity_report_file, read_rows, write_capacity, write_rows, write_rows_to, CapacityRow, ResultRow,
};
pub use sweep::{cell_data, run_cell, sweep, TrialOutcome};

use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::patterns::PatternSet;
use crate::retrieval::{Network, RetrievalSchedule};
use crate::rules::{Rule, WeightModel};

/// Calibrated estimates for every rule at `m_ref` or, if the schedule has
/// none, at every grid point. Non-ANE configs are calibrated with `alpha = 1`.
pub fn calibration_table(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<(Rule, usize, RetrievalSchedule)>> {
    cfg.validate()?;
    let (m_ref, alpha) = match cfg.schedule {
        ScheduleSpec::Ane { m_ref, alpha } => (m_ref, alpha),
        _ => (None, 1.0),
    };
    let grid = match m_ref {
        Some(m) => vec![m],
        None => cfg.m_grid.clone(),
    };
    let mut out = Vec::new();
    for &rule in &cfg.rules {
        for &m in &grid {
            out.push((rule, m, sweep::calibrate(cfg, rule, m, alpha, exec)?));
        }
    }
    Ok(out)
}

/// Writes `rule,M,step,lambda_est,kappa_est`.
pub fn write_calibration<W: Write>(table: &[(Rule, usize, RetrievalSchedule)], w: W) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["rule", "M", "step", "lambda_est", "kappa_est"])?;
    for (rule, m, schedule) in table {
        for (t, s) in schedule.steps().iter().enumerate() {
            out.serialize((rule.to_string(), m, t + 1, s.lambda_est, s.kappa_est))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Stored patterns of network `network` at load `m`.
pub fn network_patterns(cfg: &ExperimentConfig, m: usize, network: usize) -> Result<PatternSet> {
    cfg.validate()?;
    Ok(cell_data(cfg, m, network, false)?.patterns)
}

/// The step-`step` model of `rule` on network `network` at load `m`.
/// Only fixed schedules are supported; calibrated ones must be run first.
pub fn network_model(cfg: &ExperimentConfig, rule: Rule, m: usize, network: usize, step: usize) -> Result<WeightModel> {
    cfg.validate()?;
    let schedule = match cfg.schedule {
        ScheduleSpec::Ane { .. } => RetrievalSchedule::from_steps(vec![{
            let (l, k) = cfg.step1_estimates()?;
            crate::retrieval::StepSetting::new(l, k, 1.0, cfg.selection())
        }])?,
        ScheduleSpec::CoreWillshaw { lambda_est2: None, .. } if step >= 2 => {
            return Err(invalid(
                "the measured core-willshaw step-2 estimate is only known after a sweep",
            ));
        }
        _ => cfg.fixed_schedule(Some(1.0))?,
    };
    let setting = schedule.step(step);
    let data = cell_data(cfg, m, network, false)?;
    Network::new(data.store, rule, cfg.k)?
        .with_stabilization(cfg.eta)?
        .build(setting.lambda_est, setting.kappa_est)
}
