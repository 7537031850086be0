//! Potentials, output selection, schedules and iterative retrieval.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::counters::{CounterStore, Mode};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::extended::ExtendedReal;
use crate::metrics::component_errors;
use crate::rules::{self, NoiseEstimate, Rule, WeightModel};

/// `x_j = bias_j + sum of w_ij over active query units i`.
pub fn potentials(model: &WeightModel, query: &[bool]) -> Result<Vec<ExtendedReal>> {
    if query.len() != model.n_pre() {
        return Err(Error::LengthMismatch {
            expected: model.n_pre(),
            got: query.len(),
        });
    }
    let mut x = model.bias().to_vec();
    for (i, _) in query.iter().enumerate().filter(|(_, &b)| b) {
        for (xj, &w) in x.iter_mut().zip(model.row(i)) {
            *xj += w;
        }
    }
    Ok(x)
}

/// A totally ordered potential value.
pub trait Potential: Copy {
    fn order(&self, other: &Self) -> Ordering;
    /// The potential `-ln alpha`.
    fn inverse_alpha(alpha: f64) -> Self;
}

impl Potential for ExtendedReal {
    fn order(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn inverse_alpha(alpha: f64) -> Self {
        ExtendedReal::finite(-alpha.ln())
    }
}

impl Potential for f64 {
    fn order(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn inverse_alpha(alpha: f64) -> Self {
        -alpha.ln()
    }
}

/// Fires unit `j` iff `x_j >= -ln alpha`.
pub fn threshold_select<P: Potential>(x: &[P], alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let theta = P::inverse_alpha(alpha);
    Ok(x.iter().map(|v| v.order(&theta) != Ordering::Less).collect())
}

/// Fires every unit whose potential reaches the `k`-th largest one. Ties at
/// that value all fire, so more than `k` units may be active.
pub fn kwta_select<P: Potential>(x: &[P], k: usize) -> Result<Vec<bool>> {
    if k == 0 || k > x.len() {
        return Err(invalid(format!("K = {k} outside 1..={}", x.len())));
    }
    let mut sorted = x.to_vec();
    let (_, &mut kth, _) = sorted.select_nth_unstable_by(k - 1, |a, b| b.order(a));
    Ok(x.iter().map(|v| v.order(&kth) != Ordering::Less).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Kwta,
    Threshold,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Kwta => "kwta",
            Selection::Threshold => "threshold",
        })
    }
}

/// A resolved selection: K-WTA with a unit count, or a threshold `-ln alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selector {
    Kwta(usize),
    Threshold(f64),
}

impl Selector {
    pub fn select<P: Potential>(self, x: &[P]) -> Result<Vec<bool>> {
        match self {
            Selector::Kwta(k) => kwta_select(x, k),
            Selector::Threshold(alpha) => threshold_select(x, alpha),
        }
    }
}

pub fn one_step(model: &WeightModel, query: &[bool], selector: Selector) -> Result<Vec<bool>> {
    selector.select(&potentials(model, query)?)
}

/// Estimates and selection used at one retrieval step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSetting {
    pub lambda_est: f64,
    pub kappa_est: f64,
    pub alpha: f64,
    pub selection: Selection,
}

impl StepSetting {
    pub fn new(lambda_est: f64, kappa_est: f64, alpha: f64, selection: Selection) -> Self {
        StepSetting {
            lambda_est,
            kappa_est,
            alpha,
            selection,
        }
    }

    /// K-WTA picks `round(alpha k)` units; thresholding uses `-ln alpha`.
    pub fn selector(&self, k: usize) -> Selector {
        match self.selection {
            Selection::Kwta => Selector::Kwta((self.alpha * k as f64).round() as usize),
            Selection::Threshold => Selector::Threshold(self.alpha),
        }
    }
}

/// Per-step settings; steps past the end reuse the last entry.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalSchedule {
    steps: Vec<StepSetting>,
}

impl RetrievalSchedule {
    pub fn from_steps(steps: Vec<StepSetting>) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("a schedule needs at least one step"));
        }
        for s in &steps {
            if !(s.alpha > 0.0 && s.alpha.is_finite()) {
                return Err(invalid(format!("alpha must be positive, got {}", s.alpha)));
            }
            if !(0.0..=1.0).contains(&s.lambda_est) || s.kappa_est.is_nan() || s.kappa_est < 0.0 {
                return Err(invalid(format!(
                    "estimates (lambda {}, kappa {}) out of range",
                    s.lambda_est, s.kappa_est
                )));
            }
        }
        Ok(RetrievalSchedule { steps })
    }

    pub fn constant(lambda: f64, kappa: f64, alpha: f64, selection: Selection) -> Result<Self> {
        Self::from_steps(vec![StepSetting::new(lambda, kappa, alpha, selection)])
    }

    /// Step `t` uses `estimates[t - 1]`.
    pub fn calibrated_ane(estimates: &[(f64, f64)], alpha: f64, selection: Selection) -> Result<Self> {
        Self::from_steps(
            estimates
                .iter()
                .map(|&(l, k)| StepSetting::new(l, k, alpha, selection))
                .collect(),
        )
    }

    /// Step 1 activates a subset of the target, step 2 completes it from
    /// pure miss noise, later steps use a small fixed noise level `beta`.
    pub fn core_palm(lambda: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_nan() || alpha >= 1.0 {
            return Err(invalid(format!("core retrieval needs alpha < 1, got {alpha}")));
        }
        Self::from_steps(vec![
            StepSetting::new(lambda, kappa, alpha, Selection::Kwta),
            StepSetting::new(alpha, 0.0, 1.0, Selection::Kwta),
            StepSetting::new(1.0 - beta, beta, 1.0, Selection::Kwta),
        ])
    }

    /// Step 1 activates a superset of the target, step 2 prunes it from pure
    /// add noise.
    pub fn halo_palm(lambda: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 1.0 {
            return Err(invalid(format!("halo retrieval needs alpha > 1, got {alpha}")));
        }
        Self::from_steps(vec![
            StepSetting::new(lambda, kappa, alpha, Selection::Kwta),
            StepSetting::new(0.0, alpha - 1.0, 1.0, Selection::Kwta),
            StepSetting::new(1.0 - beta, beta, 1.0, Selection::Kwta),
        ])
    }

    pub fn core_willshaw(lambda: f64, kappa: f64, lambda_est2: f64, alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_nan() || alpha >= 1.0 {
            return Err(invalid(format!("core retrieval needs alpha < 1, got {alpha}")));
        }
        Self::from_steps(vec![
            StepSetting::new(lambda, kappa, alpha, Selection::Threshold),
            StepSetting::new(lambda_est2, 0.0, 1.0, Selection::Threshold),
            StepSetting::new(1.0 - beta, beta, 1.0, Selection::Threshold),
        ])
    }

    pub fn halo_willshaw(lambda: f64, kappa: f64, kappa_est2: f64, alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 1.0 {
            return Err(invalid(format!("halo retrieval needs alpha > 1, got {alpha}")));
        }
        Self::from_steps(vec![
            StepSetting::new(lambda, kappa, alpha, Selection::Threshold),
            StepSetting::new(0.0, kappa_est2, 1.0, Selection::Threshold),
            StepSetting::new(1.0 - beta, beta, 1.0, Selection::Threshold),
        ])
    }

    /// Setting for 1-based step `t`.
    pub fn step(&self, t: usize) -> &StepSetting {
        &self.steps[t.clamp(1, self.steps.len()) - 1]
    }

    pub fn steps(&self) -> &[StepSetting] {
        &self.steps
    }
}

/// Stored counters plus everything needed to build models on demand.
/// Models are cached per `(lambda_est, kappa_est)` pair.
#[derive(Debug)]
pub struct Network {
    store: CounterStore,
    rule: Rule,
    eta: Option<f64>,
    k: usize,
    exec: Exec,
    cache: RwLock<HashMap<(u64, u64), Arc<WeightModel>>>,
}

impl Network {
    /// `k` is the (mean) number of active units per pattern; it converts
    /// `(lambda, kappa)` into noise probabilities and `alpha` into K.
    pub fn new(store: CounterStore, rule: Rule, k: usize) -> Result<Self> {
        if k == 0 || k >= store.n_pre() {
            return Err(invalid(format!("need 0 < k < n, got k = {k}")));
        }
        Ok(Network {
            store,
            rule,
            eta: None,
            k,
            exec: Exec::default(),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_stabilization(mut self, eta: Option<f64>) -> Result<Self> {
        if let Some(e) = eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("stabilisation needs a positive eta, got {e}")));
            }
        }
        self.eta = eta;
        self.cache.get_mut().unwrap_or_else(|e| e.into_inner()).clear();
        Ok(self)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn store(&self) -> &CounterStore {
        &self.store
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn estimate(&self, lambda_est: f64, kappa_est: f64) -> Result<NoiseEstimate> {
        NoiseEstimate::from_lambda_kappa(lambda_est, kappa_est, self.store.n_pre(), self.k as f64)
    }

    /// Builds a model without touching the cache.
    pub fn build(&self, lambda_est: f64, kappa_est: f64) -> Result<WeightModel> {
        let est = self.estimate(lambda_est, kappa_est)?;
        Ok(match self.eta {
            None => rules::build(self.rule, &self.store, est, self.exec),
            Some(eta) => rules::build(self.rule, &rules::stabilize(&self.store, eta)?, est, self.exec),
        })
    }

    pub fn model(&self, lambda_est: f64, kappa_est: f64) -> Result<Arc<WeightModel>> {
        let key = (lambda_est.to_bits(), kappa_est.to_bits());
        if let Some(m) = self.cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(Arc::clone(m));
        }
        let model = Arc::new(self.build(lambda_est, kappa_est)?);
        let mut cache = self.cache.write().unwrap_or_else(|e| e.into_inner());
        Ok(Arc::clone(cache.entry(key).or_insert(model)))
    }

    /// One step with a given setting.
    pub fn step(&self, setting: &StepSetting, state: &[bool]) -> Result<Vec<bool>> {
        let model = self.model(setting.lambda_est, setting.kappa_est)?;
        one_step(&model, state, setting.selector(self.k))
    }
}

/// Outcome of one iterative retrieval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetrievalTrace {
    pub outputs: Vec<Vec<bool>>,
    /// `(f10, f01)` of each output against the target.
    pub errors: Vec<(usize, usize)>,
    pub converged_at: Option<usize>,
}

impl RetrievalTrace {
    pub fn steps(&self) -> usize {
        self.outputs.len()
    }

    /// Errors at 1-based step `t`; after convergence the fixed point persists.
    pub fn errors_at(&self, t: usize) -> (usize, usize) {
        self.errors[t.clamp(1, self.errors.len()) - 1]
    }

    pub fn output(&self) -> &[bool] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Runs up to `t_max` synchronous steps starting from `query`.
///
/// Stops at step `t` when the output equals the state it was computed from
/// and step `t + 1` would use the same setting, since every later step would
/// then repeat it.
pub fn iterate(
    net: &Network,
    schedule: &RetrievalSchedule,
    query: &[bool],
    target: &[bool],
    t_max: usize,
) -> Result<RetrievalTrace> {
    if net.store.mode() != Mode::Auto {
        return Err(Error::UnsupportedMode(
            "iterative retrieval needs an auto-associative store".into(),
        ));
    }
    if t_max == 0 {
        return Err(invalid("t_max must be at least 1"));
    }
    let mut trace = RetrievalTrace {
        outputs: Vec::new(),
        errors: Vec::new(),
        converged_at: None,
    };
    let mut state = query.to_vec();
    for t in 1..=t_max {
        let setting = schedule.step(t);
        let out = net.step(setting, &state)?;
        trace.errors.push(component_errors(target, &out)?);
        let fixed = out == state && schedule.step(t + 1) == setting;
        trace.outputs.push(out.clone());
        state = out;
        if fixed {
            trace.converged_at = Some(t);
            break;
        }
    }
    Ok(trace)
}

/// [`iterate`] for many queries on one network, advanced in lockstep so
/// that only the current step's model is alive. Bypasses the model cache.
pub fn iterate_batch(
    net: &Network,
    schedule: &RetrievalSchedule,
    problems: &[(Vec<bool>, Vec<bool>)],
    t_max: usize,
) -> Result<Vec<RetrievalTrace>> {
    if net.store.mode() != Mode::Auto {
        return Err(Error::UnsupportedMode(
            "iterative retrieval needs an auto-associative store".into(),
        ));
    }
    if t_max == 0 {
        return Err(invalid("t_max must be at least 1"));
    }
    let mut traces: Vec<RetrievalTrace> = problems
        .iter()
        .map(|_| RetrievalTrace {
            outputs: Vec::new(),
            errors: Vec::new(),
            converged_at: None,
        })
        .collect();
    let mut states: Vec<Vec<bool>> = problems.iter().map(|(q, _)| q.clone()).collect();
    let mut current: Option<(StepSetting, WeightModel)> = None;
    for t in 1..=t_max {
        if traces.iter().all(|tr| tr.converged_at.is_some()) {
            break;
        }
        let setting = *schedule.step(t);
        if current.as_ref().is_none_or(|(s, _)| *s != setting) {
            // Release the previous model before building the next.
            drop(current.take());
            current = Some((setting, net.build(setting.lambda_est, setting.kappa_est)?));
        }
        let model = &current.as_ref().expect("model built above").1;
        let selector = setting.selector(net.k);
        let next = schedule.step(t + 1);
        for ((trace, state), (_, target)) in traces.iter_mut().zip(&mut states).zip(problems) {
            if trace.converged_at.is_some() {
                continue;
            }
            let out = one_step(model, state, selector)?;
            trace.errors.push(component_errors(target, &out)?);
            let fixed = out == *state && *next == setting;
            trace.outputs.push(out.clone());
            *state = out;
            if fixed {
                trace.converged_at = Some(t);
            }
        }
    }
    Ok(traces)
}

/// One retrieval problem inside an ensemble of networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trial {
    pub network: usize,
    pub query: Vec<bool>,
    pub target: Vec<bool>,
}

/// Per-trial outputs and the ensemble `(lambda_out, kappa_out)`.
pub type StepMeasurement = (Vec<Vec<bool>>, (f64, f64));

/// `(trial index, output, (f10, f01))` for the trials of one network.
type NetworkOutputs = Vec<(usize, Vec<bool>, (usize, usize))>;

/// Applies `setting` to every state.
pub fn measure_step(
    nets: &[Network],
    trials: &[Trial],
    states: &[Vec<bool>],
    setting: &StepSetting,
    exec: Exec,
) -> Result<StepMeasurement> {
    if trials.is_empty() {
        return Err(invalid("at least one trial is required"));
    }
    if states.len() != trials.len() {
        return Err(Error::LengthMismatch {
            expected: trials.len(),
            got: states.len(),
        });
    }
    if let Some(t) = trials.iter().find(|t| t.network >= nets.len()) {
        return Err(invalid(format!("trial refers to missing network {}", t.network)));
    }
    let idx: Vec<usize> = (0..nets.len()).collect();
    let per_net = exec.map(&idx, |&n| -> Result<NetworkOutputs> {
        let mine: Vec<usize> = (0..trials.len()).filter(|&r| trials[r].network == n).collect();
        if mine.is_empty() {
            return Ok(Vec::new());
        }
        let net = &nets[n];
        let model = net.build(setting.lambda_est, setting.kappa_est)?;
        let selector = setting.selector(net.k);
        mine.into_iter()
            .map(|r| {
                let out = one_step(&model, &states[r], selector)?;
                let e = component_errors(&trials[r].target, &out)?;
                Ok((r, out, e))
            })
            .collect()
    });
    let mut outputs = vec![Vec::new(); trials.len()];
    let mut errors = vec![(0, 0); trials.len()];
    for part in per_net {
        for (r, out, e) in part? {
            outputs[r] = out;
            errors[r] = e;
        }
    }
    // Summed in trial order so the result does not depend on grouping.
    let (mut f10, mut f01, mut k) = (0.0, 0.0, 0.0);
    for (t, (a, b)) in trials.iter().zip(&errors) {
        f10 += *a as f64;
        f01 += *b as f64;
        k += nets[t.network].k as f64;
    }
    let n = trials.len() as f64;
    let k = k / n;
    Ok((outputs, (1.0 - f10 / n / k, f01 / n / k)))
}

/// Number of steps measured by [`calibrate_ane`]; later steps reuse the
/// last measurement.
pub const ANE_STEPS: usize = 10;

/// Runs the ensemble in lockstep for [`ANE_STEPS`] steps, feeding each
/// step's mean `(lambda_out, kappa_out)` forward as the next step's estimate.
pub fn calibrate_ane(nets: &[Network], trials: &[Trial], base: StepSetting, exec: Exec) -> Result<RetrievalSchedule> {
    if let Some(n) = nets.iter().find(|n| n.store.mode() != Mode::Auto) {
        return Err(Error::UnsupportedMode(format!(
            "calibration iterates and needs auto-associative stores, found {}",
            n.store.mode()
        )));
    }
    let mut steps = vec![base];
    let mut states: Vec<Vec<bool>> = trials.iter().map(|t| t.query.clone()).collect();
    for t in 1..=ANE_STEPS {
        let (outputs, (lambda_out, kappa_out)) = measure_step(nets, trials, &states, &steps[t - 1], exec)?;
        steps.push(StepSetting::new(
            lambda_out.clamp(0.0, 1.0),
            kappa_out,
            base.alpha,
            base.selection,
        ));
        states = outputs;
    }
    RetrievalSchedule::from_steps(steps)
}
