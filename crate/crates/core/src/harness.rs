//! Instance generators, experiment runs and report rows.
//!
//! Every generator is a pure function of its parameters (randomness from
//! `ChaCha8Rng::seed_from_u64`). Report rows are sorted by instance id and
//! contain no timing unless asked for, so identical configurations produce
//! byte-identical reports.

use std::time::Instant;

use num::{One, Zero};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bicriteria::{run_bicriteria, BicriteriaError, BicriteriaRun};
use crate::fractional::{FractionalConfig, FractionalError, FractionalState};
use crate::model::{DemandSequence, ModelError, NetworkInstance, Request, SetCoverInstance};
use crate::oracle::{
    fractional_opt_admission, integral_opt_admission, opt_multicover, OracleError, OracleSolution, DEFAULT_BUDGET,
};
use crate::randomized::{run_trials, RandomizedError, TrialSummary, Variant};
use crate::rational::{format_rational, int, log2_floor_one, to_f64, Rational};
use crate::reduction::{build_reduction, full_sequence, run_reduction, ReductionAlgorithm, ReductionError, ReductionOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
    #[error(transparent)]
    Randomized(#[from] RandomizedError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Bicriteria(#[from] BicriteriaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGenParams {
    pub m: usize,
    pub c_max: u64,
    pub n_requests: usize,
    pub cost_lo: u64,
    pub cost_hi: u64,
    pub seed: u64,
}

fn check_range(lo: u64, hi: u64) -> Result<(), HarnessError> {
    if lo == 0 || lo > hi {
        return Err(HarnessError::Config(format!("cost range [{lo},{hi}] must satisfy 1 <= lo <= hi")));
    }
    Ok(())
}

/// Random capacities in `1..=c_max`; each request takes a uniformly sized,
/// uniformly chosen nonempty edge subset and an integer cost in range.
pub fn gen_network(p: &NetworkGenParams) -> Result<(NetworkInstance, Vec<Request>), HarnessError> {
    check_range(p.cost_lo, p.cost_hi)?;
    if p.m == 0 || p.c_max == 0 {
        return Err(HarnessError::Config("m and c_max must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let caps: Vec<u64> = (0..p.m).map(|_| rng.random_range(1..=p.c_max)).collect();
    let instance = NetworkInstance::new(caps)?;
    let requests = (0..p.n_requests)
        .map(|i| {
            let size = rng.random_range(1..=p.m);
            let edges = index::sample(&mut rng, p.m, size).into_vec();
            let cost = rng.random_range(p.cost_lo..=p.cost_hi);
            Request::new(i, edges, int(cost as i64))
        })
        .collect::<Result<_, _>>()?;
    Ok((instance, requests))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HotspotParams {
    pub m: usize,
    pub c_max: u64,
    /// Excess forced on edge 0.
    pub target: u64,
    /// Additional requests avoiding edge 0 (dropped if nothing fits).
    pub extra: usize,
    pub cost_lo: u64,
    pub cost_hi: u64,
    pub seed: u64,
}

/// Edge 0 receives exactly `c_0 + target` requests; every other edge stays
/// within capacity, so the maximum excess is exactly `target`.
pub fn gen_hotspot(p: &HotspotParams) -> Result<(NetworkInstance, Vec<Request>), HarnessError> {
    check_range(p.cost_lo, p.cost_hi)?;
    if p.m == 0 || p.c_max == 0 {
        return Err(HarnessError::Config("m and c_max must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let caps: Vec<u64> = (0..p.m).map(|_| rng.random_range(1..=p.c_max)).collect();
    let mut load = vec![0u64; p.m];
    let mut shapes: Vec<Vec<usize>> = Vec::new();
    for _ in 0..caps[0] + p.target {
        let mut edges = vec![0];
        for e in 1..p.m {
            if load[e] < caps[e] && rng.random_bool(0.5) {
                load[e] += 1;
                edges.push(e);
            }
        }
        shapes.push(edges);
    }
    for _ in 0..p.extra {
        let open: Vec<usize> = (1..p.m).filter(|&e| load[e] < caps[e]).collect();
        if open.is_empty() {
            break;
        }
        let size = rng.random_range(1..=open.len());
        let edges: Vec<usize> = index::sample(&mut rng, open.len(), size)
            .into_iter()
            .map(|k| open[k])
            .collect();
        for &e in &edges {
            load[e] += 1;
        }
        shapes.push(edges);
    }
    shapes.shuffle(&mut rng);
    let requests = shapes
        .into_iter()
        .enumerate()
        .map(|(i, edges)| {
            let cost = rng.random_range(p.cost_lo..=p.cost_hi);
            Request::new(i, edges, int(cost as i64))
        })
        .collect::<Result<_, _>>()?;
    Ok((NetworkInstance::new(caps)?, requests))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverGenParams {
    pub n: usize,
    pub m: usize,
    pub n_demands: usize,
    pub cost_lo: u64,
    pub cost_hi: u64,
    pub seed: u64,
}

/// Random nonempty sets covering every element; demands only for elements
/// whose count stays within `|S_j|`, so the multicover is always feasible.
pub fn gen_setcover(p: &SetCoverGenParams) -> Result<(SetCoverInstance, DemandSequence), HarnessError> {
    check_range(p.cost_lo, p.cost_hi)?;
    if p.n == 0 || p.m == 0 {
        return Err(HarnessError::Config("n and m must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut sets: Vec<Vec<usize>> = (0..p.m)
        .map(|_| {
            let size = rng.random_range(1..=p.n);
            index::sample(&mut rng, p.n, size).into_vec()
        })
        .collect();
    for j in 0..p.n {
        if !sets.iter().any(|s| s.contains(&j)) {
            let s = rng.random_range(0..p.m);
            sets[s].push(j);
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    let costs = (0..p.m)
        .map(|_| int(rng.random_range(p.cost_lo..=p.cost_hi) as i64))
        .collect();
    let sc = SetCoverInstance::new(p.n, sets, costs)?;
    let mut counts = vec![0u64; p.n];
    let mut demands = Vec::with_capacity(p.n_demands);
    for _ in 0..p.n_demands {
        let open: Vec<usize> = (0..p.n)
            .filter(|&j| counts[j] < sc.sets_containing(j).len() as u64)
            .collect();
        if open.is_empty() {
            break;
        }
        let j = open[rng.random_range(0..open.len())];
        counts[j] += 1;
        demands.push(j);
    }
    let demands = DemandSequence::new(p.n, demands)?;
    Ok((sc, demands))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fractional,
    Randomized,
    Bicriteria,
    Reduction,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fractional => "fractional",
            Algorithm::Randomized => "randomized",
            Algorithm::Bicriteria => "bicriteria",
            Algorithm::Reduction => "reduction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaChoice {
    Oracle,
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionInner {
    Fractional,
    Randomized,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub seed: u64,
    pub alpha_mode: AlphaChoice,
    /// Explicit `alpha` for oracle mode; taken from the LP optimum if absent.
    pub alpha: Option<Rational>,
    pub epsilon: Rational,
    /// `None` picks unweighted for unit-cost instances, weighted otherwise.
    pub variant: Option<Variant>,
    pub reduction_inner: ReductionInner,
    pub use_oracle: bool,
    pub budget: usize,
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            trials: 1000,
            seed: 0,
            alpha_mode: AlphaChoice::Oracle,
            alpha: None,
            epsilon: Rational::new(1.into(), 2.into()),
            variant: None,
            reduction_inner: ReductionInner::Fractional,
            use_oracle: true,
            budget: DEFAULT_BUDGET,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Bicriteria && (self.epsilon <= Rational::zero() || self.epsilon >= Rational::one()) {
            return Err(HarnessError::Config("epsilon must lie in (0,1)".into()));
        }
        if self.alpha_mode == AlphaChoice::Oracle && self.alpha.is_none() && !self.use_oracle {
            return Err(HarnessError::Config("oracle alpha mode needs --alpha when the oracle is disabled".into()));
        }
        Ok(())
    }

    /// Seeds of the randomized trials: `seed, seed+1, ...`.
    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Instance {
    Network {
        id: String,
        instance: NetworkInstance,
        requests: Vec<Request>,
    },
    SetCover {
        id: String,
        sc: SetCoverInstance,
        demands: DemandSequence,
    },
}

impl Instance {
    pub fn id(&self) -> &str {
        match self {
            Instance::Network { id, .. } | Instance::SetCover { id, .. } => id,
        }
    }
}

/// One line of a report. Column order is fixed: see [`CSV_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub instance_id: String,
    pub algorithm: String,
    pub online_cost: String,
    pub oracle_cost: Option<String>,
    pub ratio: Option<String>,
    pub bound: Option<String>,
    /// `"true"`, `"false"` or `"unchecked"`.
    pub bound_satisfied: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

pub const CSV_HEADER: [&str; 8] = [
    "instance_id",
    "algorithm",
    "online_cost",
    "oracle_cost",
    "ratio",
    "bound",
    "bound_satisfied",
    "runtime_ms",
];

fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

fn ratio_of(online: f64, oracle: &Rational) -> Option<String> {
    if oracle.is_zero() {
        (online == 0.0).then(|| fmt_f64(1.0))
    } else {
        Some(fmt_f64(online / to_f64(oracle)))
    }
}

/// Everything one instance run produced.
#[derive(Debug, Clone)]
pub struct InstanceRun {
    pub row: ReportRow,
    /// Hard invariant failures; any of these makes the CLI exit nonzero.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub detail: serde_json::Value,
    /// JSON-lines decision traces (fractional trace, or one per trial).
    pub traces: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FractionalDetail {
    pub fractional_cost: String,
    pub alpha: Option<String>,
    pub oracle_alpha: Option<String>,
    pub augmentations: u64,
    pub doublings: u32,
    pub step_bound_violations: u64,
    pub max_step: String,
    pub feasible: bool,
    pub weights: Vec<String>,
}

fn oracle_or_warn<T>(
    result: Result<T, OracleError>,
    warnings: &mut Vec<String>,
) -> Result<Option<T>, HarnessError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e @ OracleError::BudgetExceeded { .. }) => {
            warnings.push(format!("oracle skipped: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn fractional_config(
    config: &ExperimentConfig,
    lp: Option<&OracleSolution>,
) -> Result<FractionalConfig, HarnessError> {
    Ok(match config.alpha_mode {
        AlphaChoice::Doubling => FractionalConfig::doubling(),
        AlphaChoice::Oracle => {
            let alpha = match (&config.alpha, lp) {
                (Some(a), _) => a.clone(),
                (None, Some(sol)) => sol.cost.clone(),
                (None, None) => return Err(HarnessError::Config("no alpha available for oracle mode".into())),
            };
            FractionalConfig::oracle(alpha)
        }
    })
}

/// `(3 + 2/c) alpha LOG2(2 g c) + 2 alpha`: weight augmentations plus the
/// immediately rejected cheap requests.
pub fn fractional_bound(alpha: &Rational, g: &Rational, c: u64) -> Rational {
    let c_r = int(c as i64);
    let step = int(3) + int(2) / &c_r;
    step * alpha * log2_floor_one(&(int(2) * g * &c_r)) + int(2) * alpha
}

fn run_fractional(
    config: &ExperimentConfig,
    id: &str,
    instance: &NetworkInstance,
    requests: &[Request],
) -> Result<InstanceRun, HarnessError> {
    let mut warnings = Vec::new();
    let lp = if config.use_oracle {
        oracle_or_warn(fractional_opt_admission(instance, requests, config.budget), &mut warnings)?
    } else {
        None
    };
    let frac_config = fractional_config(config, lp.as_ref())?;
    let mut state = FractionalState::for_sequence(instance, requests, frac_config);
    let mut failures = Vec::new();
    let mut previous: Vec<Rational> = Vec::new();
    for r in requests {
        state.process(r)?;
        if let Some(e) = state.feasibility_violation() {
            failures.push(format!("fractional infeasible on edge {e} after request {}", r.id));
        }
        let raised: Vec<Rational> = (0..=r.id).map(|i| state.raised(i).clone()).collect();
        if previous.iter().zip(&raised).any(|(a, b)| b < a) {
            failures.push(format!("weight decreased at request {}", r.id));
        }
        previous = raised;
    }
    let cost = state.fractional_cost();
    let (oracle_cost, bound, satisfied) = match &lp {
        Some(sol) => {
            let bound_alpha = match config.alpha_mode {
                AlphaChoice::Oracle => sol.cost.clone(),
                AlphaChoice::Doubling => int(2) * state.alpha().cloned().unwrap_or_else(Rational::zero),
            };
            let b = fractional_bound(&bound_alpha, &state.scale().g, instance.max_capacity());
            let ok = cost <= b;
            (Some(sol.cost.clone()), Some(fmt_f64(to_f64(&b))), ok.to_string())
        }
        None => (None, None, "unchecked".to_string()),
    };
    let detail = FractionalDetail {
        fractional_cost: format_rational(&cost),
        alpha: state.alpha().map(format_rational),
        oracle_alpha: lp.as_ref().map(|s| format_rational(&s.cost)),
        augmentations: state.augment_count(),
        doublings: state.doublings(),
        step_bound_violations: state.step_bound_violations(),
        max_step: format_rational(state.max_step_increase()),
        feasible: state.feasibility_violation().is_none(),
        weights: state.weights().iter().map(format_rational).collect(),
    };
    Ok(InstanceRun {
        row: ReportRow {
            instance_id: id.to_string(),
            algorithm: Algorithm::Fractional.name().into(),
            online_cost: format_rational(&cost),
            ratio: oracle_cost.as_ref().and_then(|o| ratio_of(to_f64(&cost), o)),
            oracle_cost: oracle_cost.as_ref().map(format_rational),
            bound,
            bound_satisfied: satisfied,
            runtime_ms: None,
        },
        failures,
        warnings,
        detail: serde_json::to_value(detail).expect("serializable"),
        traces: vec![state.trace().to_json_lines()],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomizedDetail {
    pub variant: Variant,
    pub trials: usize,
    pub mean: String,
    pub max: String,
    pub std_error: String,
    pub c_frac: String,
    pub q: u64,
    pub bound: String,
    pub feasible: bool,
    pub bound_satisfied: bool,
}

pub fn randomized_detail(s: &TrialSummary) -> RandomizedDetail {
    RandomizedDetail {
        variant: s.variant,
        trials: s.trials,
        mean: format_rational(&s.mean),
        max: format_rational(&s.max),
        std_error: fmt_f64(s.std_error),
        c_frac: format_rational(&s.c_frac),
        q: s.q,
        bound: fmt_f64(s.bound),
        feasible: s.all_feasible,
        bound_satisfied: s.bound_satisfied(),
    }
}

fn pick_variant(config: &ExperimentConfig, requests: &[Request]) -> Variant {
    config.variant.unwrap_or_else(|| {
        if requests.iter().all(|r| r.cost().is_one()) {
            Variant::Unweighted
        } else {
            Variant::Weighted
        }
    })
}

fn run_randomized(
    config: &ExperimentConfig,
    id: &str,
    instance: &NetworkInstance,
    requests: &[Request],
) -> Result<InstanceRun, HarnessError> {
    let mut warnings = Vec::new();
    let (lp, opt) = if config.use_oracle {
        (
            oracle_or_warn(fractional_opt_admission(instance, requests, config.budget), &mut warnings)?,
            oracle_or_warn(integral_opt_admission(instance, requests, config.budget), &mut warnings)?,
        )
    } else {
        (None, None)
    };
    let frac_config = fractional_config(config, lp.as_ref())?;
    let variant = pick_variant(config, requests);
    let summary = run_trials(instance, requests, frac_config, variant, &config.trial_seeds(), true)?;
    let mut failures = Vec::new();
    let mut traces = Vec::with_capacity(summary.results.len());
    for r in &summary.results {
        if !r.feasible {
            failures.push(format!("capacity exceeded in trial with seed {}", r.seed));
        }
        let trace = r.trace.as_ref().expect("traces requested");
        if let Some(req) = trace.irrevocability_violation() {
            failures.push(format!("request {req} re-accepted in trial with seed {}", r.seed));
        }
        if trace.cumulative() != &r.rejected_cost {
            failures.push(format!("trace cost disagrees with rejected cost for seed {}", r.seed));
        }
        traces.push(trace.to_json_lines());
    }
    let detail = randomized_detail(&summary);
    let mean = summary.mean_f64();
    Ok(InstanceRun {
        row: ReportRow {
            instance_id: id.to_string(),
            algorithm: Algorithm::Randomized.name().into(),
            online_cost: format_rational(&summary.mean),
            ratio: opt.as_ref().and_then(|o| ratio_of(mean, &o.cost)),
            oracle_cost: opt.as_ref().map(|o| format_rational(&o.cost)),
            bound: Some(fmt_f64(summary.bound)),
            bound_satisfied: summary.bound_satisfied().to_string(),
            runtime_ms: None,
        },
        failures,
        warnings,
        detail: serde_json::to_value(detail).expect("serializable"),
        traces,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BicriteriaDetail {
    #[serde(flatten)]
    pub run: BicriteriaRun,
    pub rounds_total: u32,
    pub cardinality_bound: String,
    pub augmentation_bound_holds: Option<bool>,
}

fn run_bicriteria_instance(
    config: &ExperimentConfig,
    id: &str,
    sc: &SetCoverInstance,
    demands: &DemandSequence,
) -> Result<InstanceRun, HarnessError> {
    let mut warnings = Vec::new();
    let (state, run) = run_bicriteria(sc, demands, config.epsilon.clone())?;
    let mut failures = Vec::new();
    if state.potential_increases() > 0 {
        failures.push(format!("potential increased in {} iterations", state.potential_increases()));
    }
    if !state.phi_within_ceiling() {
        failures.push("potential above n^2".into());
    }
    let counts = demands.counts();
    for (j, &k) in counts.iter().enumerate() {
        let target = (Rational::one() - &config.epsilon) * int(k as i64);
        if int(state.cover_count(j) as i64) < target {
            failures.push(format!("element {j} under-covered"));
        }
    }
    let opt = if config.use_oracle {
        oracle_or_warn(opt_multicover(sc, demands, config.budget), &mut warnings)?
    } else {
        None
    };
    let a = state.augmentations();
    let r = state.rounds_total() as u64;
    let card_bound = Rational::new(((2 * r * a + a + 1) as i64).into(), 2.into());
    let size = int(run.chosen_sets.len() as i64);
    let alpha_ok = opt.as_ref().map(|o| {
        let alpha = o.cost.to_integer().try_into().unwrap_or(u64::MAX);
        state.augmentation_bound_holds(alpha)
    });
    let satisfied = size <= card_bound && alpha_ok.unwrap_or(true);
    let detail = BicriteriaDetail {
        rounds_total: state.rounds_total(),
        cardinality_bound: format_rational(&card_bound),
        augmentation_bound_holds: alpha_ok,
        run,
    };
    Ok(InstanceRun {
        row: ReportRow {
            instance_id: id.to_string(),
            algorithm: Algorithm::Bicriteria.name().into(),
            online_cost: format_rational(&size),
            ratio: opt.as_ref().and_then(|o| ratio_of(to_f64(&size), &o.cost)),
            oracle_cost: opt.as_ref().map(|o| format_rational(&o.cost)),
            bound: Some(fmt_f64(to_f64(&card_bound))),
            bound_satisfied: satisfied.to_string(),
            runtime_ms: None,
        },
        failures,
        warnings,
        detail: serde_json::to_value(detail).expect("serializable"),
        traces: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionDetail {
    pub cover: Vec<usize>,
    pub valid: bool,
    pub cover_cost: String,
    pub fractional_cost: Option<String>,
    pub opt_cost: Option<String>,
    pub ratio: Option<String>,
    pub phase2_rejections: Vec<usize>,
    pub infeasible_demands: Vec<usize>,
}

pub fn reduction_detail(out: &ReductionOutcome, opt: Option<&Rational>) -> ReductionDetail {
    let online = out.fractional_cost.as_ref().unwrap_or(&out.cover_cost);
    ReductionDetail {
        cover: out.cover.clone(),
        valid: out.verdict.is_valid(),
        cover_cost: format_rational(&out.cover_cost),
        fractional_cost: out.fractional_cost.as_ref().map(format_rational),
        opt_cost: opt.map(format_rational),
        ratio: opt.and_then(|o| ratio_of(to_f64(online), o)),
        phase2_rejections: out.phase2_rejections.clone(),
        infeasible_demands: out.infeasible_demands.clone(),
    }
}

fn run_reduction_instance(
    config: &ExperimentConfig,
    id: &str,
    sc: &SetCoverInstance,
    demands: &DemandSequence,
) -> Result<InstanceRun, HarnessError> {
    let mut warnings = Vec::new();
    let reduction = build_reduction(sc);
    let (requests, _) = full_sequence(&reduction, demands)?;
    let needs_lp = config.alpha_mode == AlphaChoice::Oracle && config.alpha.is_none();
    let lp = if config.use_oracle && needs_lp {
        oracle_or_warn(
            fractional_opt_admission(&reduction.instance, &requests, config.budget),
            &mut warnings,
        )?
    } else {
        None
    };
    let frac_config = fractional_config(config, lp.as_ref())?;
    let algorithm = match config.reduction_inner {
        ReductionInner::Fractional => ReductionAlgorithm::Fractional,
        ReductionInner::Randomized => ReductionAlgorithm::Randomized {
            variant: config.variant.unwrap_or(if sc.is_unit_cost() {
                Variant::Unweighted
            } else {
                Variant::Weighted
            }),
            seed: config.seed,
        },
    };
    let out = run_reduction(sc, demands, algorithm, frac_config)?;
    let opt = if config.use_oracle {
        match opt_multicover(sc, demands, config.budget) {
            Ok(o) => Some(o),
            Err(OracleError::Infeasible { .. }) => None,
            Err(e) => oracle_or_warn(Err(e), &mut warnings)?,
        }
    } else {
        None
    };
    let mut failures = Vec::new();
    if out.infeasible_demands.is_empty() && !out.verdict.is_valid() {
        if out.phase2_rejections.is_empty() {
            failures.push(format!("extracted cover invalid: {:?}", out.verdict));
        } else {
            warnings.push(format!(
                "demand requests {:?} rejected, cover incomplete: {:?}",
                out.phase2_rejections, out.verdict
            ));
        }
    }
    if out.cover_cost != out.rejected_phase1_cost && out.fractional_cost.is_none() {
        failures.push("cover cost differs from rejected phase-1 cost".into());
    }
    let detail = reduction_detail(&out, opt.as_ref().map(|o| &o.cost));
    let online = out.fractional_cost.clone().unwrap_or_else(|| out.cover_cost.clone());
    let inner = match config.reduction_inner {
        ReductionInner::Fractional => "reduction-fractional",
        ReductionInner::Randomized => "reduction-randomized",
    };
    Ok(InstanceRun {
        row: ReportRow {
            instance_id: id.to_string(),
            algorithm: inner.into(),
            online_cost: format_rational(&online),
            ratio: detail.ratio.clone(),
            oracle_cost: detail.opt_cost.clone(),
            bound: None,
            bound_satisfied: if out.infeasible_demands.is_empty() {
                out.verdict.is_valid().to_string()
            } else {
                "unchecked".into()
            },
            runtime_ms: None,
        },
        failures,
        warnings,
        detail: serde_json::to_value(detail).expect("serializable"),
        traces: Vec::new(),
    })
}

pub fn run_instance(config: &ExperimentConfig, instance: &Instance) -> Result<InstanceRun, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut run = match (config.algorithm, instance) {
        (Algorithm::Fractional, Instance::Network { id, instance, requests }) => {
            run_fractional(config, id, instance, requests)?
        }
        (Algorithm::Randomized, Instance::Network { id, instance, requests }) => {
            run_randomized(config, id, instance, requests)?
        }
        (Algorithm::Bicriteria, Instance::SetCover { id, sc, demands }) => {
            run_bicriteria_instance(config, id, sc, demands)?
        }
        (Algorithm::Reduction, Instance::SetCover { id, sc, demands }) => {
            run_reduction_instance(config, id, sc, demands)?
        }
        (alg, inst) => {
            return Err(HarnessError::Config(format!(
                "algorithm {} does not apply to instance {}",
                alg.name(),
                inst.id()
            )))
        }
    };
    if config.timing {
        run.row.runtime_ms = Some(started.elapsed().as_millis() as u64);
    }
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<InstanceRun>,
}

impl ExperimentOutcome {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs.iter().map(|r| r.row.clone()).collect()
    }

    pub fn failures(&self) -> Vec<String> {
        self.runs
            .iter()
            .flat_map(|r| r.failures.iter().map(move |f| format!("{}: {f}", r.row.instance_id)))
            .collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.runs
            .iter()
            .flat_map(|r| r.warnings.iter().map(move |w| format!("{}: {w}", r.row.instance_id)))
            .collect()
    }
}

/// Runs every instance; rows come back sorted by instance id.
pub fn run_experiment(config: &ExperimentConfig, instances: &[Instance]) -> Result<ExperimentOutcome, HarnessError> {
    let mut runs = instances
        .iter()
        .map(|inst| run_instance(config, inst))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.row.instance_id.cmp(&b.row.instance_id));
    Ok(ExperimentOutcome { runs })
}

pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String, HarnessError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let runtime = r.runtime_ms.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            r.instance_id.as_str(),
            r.algorithm.as_str(),
            r.online_cost.as_str(),
            r.oracle_cost.as_deref().unwrap_or(""),
            r.ratio.as_deref().unwrap_or(""),
            r.bound.as_deref().unwrap_or(""),
            r.bound_satisfied.as_str(),
            runtime.as_str(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One JSON object per row, newline-terminated.
pub fn rows_to_json_lines(rows: &[ReportRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}
