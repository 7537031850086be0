//! Bayesian-optimal and BCPNN-family learning rules for binary associative
//! memories, with exact infinity-aware weight arithmetic, one-step and
//! iterative retrieval, and a Monte-Carlo capacity pipeline.
//!
//! The data path is
//! [`patterns`] → [`counters`] → [`rules`] → [`retrieval`] → [`metrics`],
//! with [`harness`] wiring it into configurable, deterministic sweeps.

pub mod counters;
pub mod error;
pub mod exec;
pub mod extended;
pub mod harness;
pub mod metrics;
pub mod patterns;
pub mod retrieval;
pub mod rules;
pub mod seed;

pub use counters::{CounterStore, CounterView, Mode};
pub use error::{Error, Result};
pub use exec::Exec;
pub use extended::ExtendedReal;
pub use metrics::{capacity, CellSummary, Criterion, TrialMetrics};
pub use patterns::{gen_patterns, make_query, Family, PatternSet, QuerySpec};
pub use retrieval::{iterate, Network, RetrievalSchedule, Selection, StepSetting};
pub use rules::{NoiseEstimate, Rule, WeightModel};
pub use seed::Seed;
