//! `assoc`: capacity sweeps, capacity reports, noise calibration and weight
//! dumps for binary associative memories.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use assoc_core::harness::{
    calibration_table, capacity_report_file, network_model, network_patterns, parse_override, sweep, write_calibration,
    write_capacity, write_rows, ExperimentConfig,
};
use assoc_core::{Criterion, Exec, Rule};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "assoc",
    version,
    about = "Learning-rule capacity experiments for binary associative memories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override a config value, e.g. `--set schedule.alpha=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let overrides = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentConfig::load(&self.config, &overrides)?)
    }
}

#[derive(Args)]
struct ExecArgs {
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

#[derive(Args)]
struct NetworkArgs {
    /// Stored pattern count; defaults to the first grid point.
    #[arg(long = "m", value_name = "M")]
    m: Option<usize>,
    /// Network index within the cell.
    #[arg(long, default_value_t = 0)]
    network: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per rule, M and reported step.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        exec: ExecArgs,
        /// Output CSV; the config's `output` or stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Interpolate capacities from a sweep CSV.
    Capacity {
        csv: PathBuf,
        /// `eps:<level>` or `pcorr:<level>`.
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Measure per-step noise estimates on calibration networks.
    CalibrateAne {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write the weights of one network as `i,j,fin,inf`.
    DumpWeights {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        network: NetworkArgs,
        /// Defaults to the first rule of the config.
        #[arg(long)]
        rule: Option<Rule>,
        /// Retrieval step whose noise estimates are used.
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the bias as `j,fin,inf`.
        #[arg(long)]
        bias_out: Option<PathBuf>,
    },
    /// Write the stored patterns of one network.
    ExportPatterns {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn grid_point(cfg: &ExperimentConfig, m: Option<usize>) -> Result<usize> {
    let m = m.unwrap_or(cfg.m_grid[0]);
    if m == 0 {
        bail!("M must be positive");
    }
    Ok(m)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { config, exec, out } => {
            let cfg = config.load()?;
            let rows = sweep(&cfg, exec.exec())?;
            let path = out.or_else(|| cfg.output.clone());
            let mut w = output(path.as_deref())?;
            write_rows(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Capacity { csv, criterion, out } => {
            let report = capacity_report_file(&csv, criterion)?;
            let mut w = output(out.as_deref())?;
            write_capacity(&report, criterion, &mut w)?;
            w.flush()?;
        }
        Command::CalibrateAne { config, exec, out } => {
            let cfg = config.load()?;
            let table = calibration_table(&cfg, exec.exec())?;
            let mut w = output(out.as_deref())?;
            write_calibration(&table, &mut w)?;
            w.flush()?;
        }
        Command::DumpWeights {
            config,
            network,
            rule,
            step,
            out,
            bias_out,
        } => {
            let cfg = config.load()?;
            let rule = rule.unwrap_or(cfg.rules[0]);
            if step == 0 {
                bail!("steps are numbered from 1");
            }
            let m = grid_point(&cfg, network.m)?;
            let model = network_model(&cfg, rule, m, network.network, step)?;
            let mut w = output(out.as_deref())?;
            model.write_weights_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = bias_out {
                let mut w = output(Some(&p))?;
                model.write_bias_csv(&mut w)?;
                w.flush()?;
            }
        }
        Command::ExportPatterns { config, network, out } => {
            let cfg = config.load()?;
            let m = grid_point(&cfg, network.m)?;
            let pats = network_patterns(&cfg, m, network.network)?;
            let mut w = output(out.as_deref())?;
            pats.write_text(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("assoc: {e:#}");
            ExitCode::FAILURE
        }
    }
}
