//! Experiment configuration, read from TOML.
//!
//! ```toml
//! family = "palm"          # or "willshaw"
//! mode = "auto"            # or "hetero"
//! rules = ["B", "BCPNN"]
//! n = 1024
//! k = 32
//! m_grid = [1100, 1200, 1300, 1400]
//! lambda = 0.9
//! kappa = 0.1
//! t_max = 100
//! n_networks = 25
//! n_queries = 40
//! seed = 1
//! output = "out.csv"
//!
//! [schedule]
//! kind = "core-palm"
//! alpha = 0.96875
//! beta = 0.001
//! ```
//!
//! Any field can be overridden with a `key=value` pair, where `key` may be
//! dotted (`schedule.alpha=0.9`) and `value` is parsed as a TOML value,
//! falling back to a bare string.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counters::Mode;
use crate::error::{Error, Result};
use crate::patterns::{Family, QuerySpec};
use crate::retrieval::{RetrievalSchedule, Selection};
use crate::rules::Rule;

fn default_mode() -> Mode {
    Mode::Auto
}
fn one() -> usize {
    1
}
fn unit_alpha() -> f64 {
    1.0
}
fn default_networks() -> usize {
    25
}
fn default_queries() -> usize {
    40
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub family: Family,
    pub rules: Vec<Rule>,
    pub n: usize,
    pub k: usize,
    pub m_grid: Vec<usize>,
    pub lambda: f64,
    pub kappa: f64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    /// Defaults to K-WTA for Palm patterns and thresholding for Willshaw.
    #[serde(default)]
    pub selection: Option<Selection>,
    /// Replace the step-1 estimates by the realised Palm query noise
    /// `(round(lambda k)/k, round(kappa k)/k)`.
    #[serde(default)]
    pub rounded_estimates: bool,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "one")]
    pub t_max: usize,
    /// Defaults to `1..=min(10, t_max)` plus `t_max`.
    #[serde(default)]
    pub report_steps: Option<Vec<usize>>,
    #[serde(default = "default_networks")]
    pub n_networks: usize,
    #[serde(default = "default_queries")]
    pub n_queries: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// How the per-step estimates are chosen. Step 1 always targets the
/// configured query noise unless stated otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// The same estimates at every step; they default to `(lambda, kappa)`.
    Constant {
        #[serde(default)]
        lambda_est: Option<f64>,
        #[serde(default)]
        kappa_est: Option<f64>,
        #[serde(default = "unit_alpha")]
        alpha: f64,
    },
    /// Estimates measured step by step on a separate calibration ensemble,
    /// stored at `m_ref` patterns or, if absent, at each grid point.
    Ane {
        #[serde(default)]
        m_ref: Option<usize>,
        #[serde(default = "unit_alpha")]
        alpha: f64,
    },
    CorePalm {
        alpha: f64,
        beta: f64,
    },
    HaloPalm {
        alpha: f64,
        beta: f64,
    },
    /// `lambda_est2` is measured on a calibration ensemble when absent.
    CoreWillshaw {
        #[serde(default)]
        lambda_est2: Option<f64>,
        alpha: f64,
        beta: f64,
    },
    HaloWillshaw {
        kappa_est2: f64,
        alpha: f64,
        beta: f64,
    },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Constant {
            lambda_est: None,
            kappa_est: None,
            alpha: 1.0,
        }
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Constant {
                lambda_est,
                kappa_est,
                alpha,
            } => {
                f.write_str("constant")?;
                if let (Some(l), Some(k)) = (lambda_est, kappa_est) {
                    write!(f, "(est={l},{k})")?;
                } else if let Some(l) = lambda_est {
                    write!(f, "(lambda_est={l})")?;
                } else if let Some(k) = kappa_est {
                    write!(f, "(kappa_est={k})")?;
                }
                if *alpha != 1.0 {
                    write!(f, "(alpha={alpha})")?;
                }
                Ok(())
            }
            ScheduleSpec::Ane { m_ref, alpha } => {
                f.write_str("ane")?;
                if let Some(m) = m_ref {
                    write!(f, "(m_ref={m})")?;
                }
                if *alpha != 1.0 {
                    write!(f, "(alpha={alpha})")?;
                }
                Ok(())
            }
            ScheduleSpec::CorePalm { alpha, beta } => write!(f, "core-palm({alpha},{beta})"),
            ScheduleSpec::HaloPalm { alpha, beta } => write!(f, "halo-palm({alpha},{beta})"),
            ScheduleSpec::CoreWillshaw {
                lambda_est2,
                alpha,
                beta,
            } => match lambda_est2 {
                Some(l) => write!(f, "core-willshaw({l},{alpha},{beta})"),
                None => write!(f, "core-willshaw(measured,{alpha},{beta})"),
            },
            ScheduleSpec::HaloWillshaw {
                kappa_est2,
                alpha,
                beta,
            } => write!(f, "halo-willshaw({kappa_est2},{alpha},{beta})"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (key, value) in overrides {
            set_path(&mut table, key, value)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Config(message) => Error::Malformed {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.rules.is_empty() {
            return bad("at least one rule is required".into());
        }
        if self.m_grid.is_empty() {
            return bad("m_grid must not be empty".into());
        }
        if self.m_grid[0] == 0 || self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "m_grid must be strictly increasing positive counts, got {:?}",
                self.m_grid
            ));
        }
        if self.n_networks == 0 || self.n_queries == 0 {
            return bad("n_networks and n_queries must be at least 1".into());
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1".into());
        }
        if self.mode == Mode::Hetero && self.t_max != 1 {
            return bad("hetero-associative stores only support t_max = 1".into());
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta must be positive, got {eta}"));
            }
        }
        if let Some(steps) = &self.report_steps {
            if steps.is_empty() || steps.iter().any(|&s| s == 0 || s > self.t_max) {
                return bad(format!("report_steps must lie in 1..={}", self.t_max));
            }
        }
        if let ScheduleSpec::Ane { m_ref: Some(0), .. } = self.schedule {
            return bad("m_ref must be positive".into());
        }
        self.query_spec()?;
        // Builds every fixed schedule once to surface parameter errors early.
        if !matches!(self.schedule, ScheduleSpec::Ane { .. }) {
            self.fixed_schedule(Some(1.0))?;
        }
        Ok(())
    }

    pub fn query_spec(&self) -> Result<QuerySpec> {
        QuerySpec::new(self.lambda, self.kappa, self.n, self.k)
    }

    pub fn selection(&self) -> Selection {
        self.selection.unwrap_or(match self.family {
            Family::Palm => Selection::Kwta,
            Family::Willshaw => Selection::Threshold,
        })
    }

    /// Step-1 estimates `(lambda_est, kappa_est)`.
    pub fn step1_estimates(&self) -> Result<(f64, f64)> {
        if self.rounded_estimates {
            let spec = self.query_spec()?;
            let k = self.k as f64;
            Ok((spec.palm_kept() as f64 / k, spec.palm_added() as f64 / k))
        } else {
            Ok((self.lambda, self.kappa))
        }
    }

    /// The schedule for every schedule kind not needing calibration. `measured` is
    /// the step-2 estimate for a core-willshaw schedule without a fixed value.
    pub fn fixed_schedule(&self, measured: Option<f64>) -> Result<RetrievalSchedule> {
        let (l1, k1) = self.step1_estimates()?;
        let sel = self.selection();
        match &self.schedule {
            ScheduleSpec::Constant {
                lambda_est,
                kappa_est,
                alpha,
            } => RetrievalSchedule::constant(lambda_est.unwrap_or(l1), kappa_est.unwrap_or(k1), *alpha, sel),
            ScheduleSpec::Ane { .. } => Err(Error::Config("ane schedules need calibration".into())),
            ScheduleSpec::CorePalm { alpha, beta } => RetrievalSchedule::core_palm(l1, k1, *alpha, *beta),
            ScheduleSpec::HaloPalm { alpha, beta } => RetrievalSchedule::halo_palm(l1, k1, *alpha, *beta),
            ScheduleSpec::CoreWillshaw {
                lambda_est2,
                alpha,
                beta,
            } => {
                let l2 = lambda_est2
                    .or(measured)
                    .ok_or_else(|| Error::Config("core-willshaw step-2 estimate is unresolved".into()))?;
                RetrievalSchedule::core_willshaw(l1, k1, l2, *alpha, *beta)
            }
            ScheduleSpec::HaloWillshaw {
                kappa_est2,
                alpha,
                beta,
            } => RetrievalSchedule::halo_willshaw(l1, k1, *kappa_est2, *alpha, *beta),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// Steps written to the output, ascending and deduplicated.
    pub fn reported_steps(&self) -> Vec<usize> {
        let mut steps = self
            .report_steps
            .clone()
            .unwrap_or_else(|| (1..=self.t_max.min(10)).chain([self.t_max]).collect());
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value: toml::Value = raw.parse().unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let Some(last) = last else {
        return Err(Error::Config(format!("empty override key {key:?}")));
    };
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override {key:?}: {p:?} is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
