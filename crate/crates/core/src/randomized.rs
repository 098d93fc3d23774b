//! Randomized rounding of the fractional rejection weights.
//!
//! Each arrival first advances the fractional layer. Then, in order:
//!
//! 1. an edge whose request count reaches `4 m c^2` is pruned: every
//!    accepted request through it is rejected, as is every later arrival
//!    touching it;
//! 2. every request whose weight reached `1 / prob_factor` (or that the
//!    fractional layer rejected outright) is rejected;
//! 3. every request whose weight rose by `delta` this round is rejected with
//!    probability `min(1, prob_factor * delta)`;
//! 4. the arrival is accepted if it fits in the remaining capacity.
//!
//! The fractional layer never looks at coin flips, so [`run_trials`] computes
//! its rounds once and replays them under every seed. Randomness comes from
//! `ChaCha8Rng::seed_from_u64(seed)`; each (request, round) pair with
//! positive `delta` consumes one `u64`, requests visited by ascending id.

use num::{ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fractional::{FractionalConfig, FractionalError, FractionalState, Standing};
use crate::model::{max_excess_q, validate_requests, ModelError, NetworkInstance, Request, RequestId};
use crate::rational::{int, log2_floor_one, log2_floor_one_f64, probability_threshold, to_f64, Rational};
use crate::trace::{DecisionTrace, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundingParams {
    pub variant: Variant,
    pub prob_factor: Rational,
    pub weight_threshold: Rational,
}

impl RoundingParams {
    /// `12 LOG2(mc)` for arbitrary costs, `4 LOG2(m)` for unit costs.
    pub fn new(variant: Variant, instance: &NetworkInstance) -> Self {
        let prob_factor = match variant {
            Variant::Weighted => int(12) * log2_floor_one(&int(instance.mc() as i64)),
            Variant::Unweighted => int(4) * log2_floor_one(&int(instance.edge_count() as i64)),
        };
        let weight_threshold = Rational::from_integer(1.into()) / &prob_factor;
        Self {
            variant,
            prob_factor,
            weight_threshold,
        }
    }

    pub fn rejection_probability(&self, delta: &Rational) -> Rational {
        crate::rational::min_one(&(&self.prob_factor * delta))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RandomizedError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
    #[error("seed {0} listed twice")]
    DuplicateSeed(u64),
}

/// What one arrival did to the fractional layer, independent of randomness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalRound {
    pub arrival: RequestId,
    /// Weight increases `(id, delta)` this round, ascending by id, `delta > 0`.
    pub increases: Vec<(RequestId, Rational)>,
    /// Draw thresholds matching `increases`: reject iff `U < threshold`.
    pub thresholds: Vec<u128>,
    /// Requests that became deterministic rejections this round, ascending.
    pub condemned: Vec<RequestId>,
    /// Requests that became permanent accepts this round.
    pub permanent: Vec<RequestId>,
    pub arrival_small: bool,
}

/// Turns successive fractional states into [`FractionalRound`]s.
#[derive(Debug, Clone, Default)]
pub struct RoundRecorder {
    raised: Vec<Rational>,
    condemned: Vec<bool>,
    permanent: Vec<bool>,
}

impl RoundRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Call right after `frac.process(arrival)`.
    pub fn record(&mut self, frac: &FractionalState, arrival: RequestId, params: &RoundingParams) -> FractionalRound {
        let n = frac.request_count();
        self.raised.resize(n, Rational::zero());
        self.condemned.resize(n, false);
        self.permanent.resize(n, false);
        let mut round = FractionalRound {
            arrival,
            increases: Vec::new(),
            thresholds: Vec::new(),
            condemned: Vec::new(),
            permanent: Vec::new(),
            arrival_small: frac.standing(arrival) == Standing::SmallRejected,
        };
        for id in 0..n {
            let raised = frac.raised(id);
            if *raised > self.raised[id] {
                let delta = raised - &self.raised[id];
                round
                    .thresholds
                    .push(probability_threshold(&params.rejection_probability(&delta)));
                round.increases.push((id, delta));
                self.raised[id] = raised.clone();
            }
            let standing = frac.standing(id);
            if !self.condemned[id] {
                let hit = match standing {
                    Standing::SmallRejected | Standing::Retired => true,
                    Standing::BigAccepted => false,
                    Standing::InRange | Standing::Unclassified => *frac.weight(id) >= params.weight_threshold,
                };
                if hit {
                    self.condemned[id] = true;
                    round.condemned.push(id);
                }
            }
            if standing == Standing::BigAccepted && !self.permanent[id] {
                self.permanent[id] = true;
                round.permanent.push(id);
            }
        }
        round
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

/// The randomized decision state on top of a fixed sequence of rounds.
#[derive(Debug, Clone)]
pub struct RoundingLayer {
    caps: Vec<u64>,
    prune_limit: u64,
    members: Vec<Vec<RequestId>>,
    edge_lists: Vec<Vec<usize>>,
    load: Vec<u64>,
    pruned: Vec<bool>,
    status: Vec<Status>,
    permanent: Vec<bool>,
    costs: Vec<Rational>,
    rejected_cost: Rational,
    trace: Option<DecisionTrace>,
    capacity_violation: bool,
}

impl RoundingLayer {
    pub fn new(instance: &NetworkInstance, record_trace: bool) -> Self {
        let mc = instance.mc();
        Self {
            caps: instance.capacities().to_vec(),
            prune_limit: 4 * mc * instance.max_capacity(),
            members: vec![Vec::new(); instance.edge_count()],
            edge_lists: Vec::new(),
            load: vec![0; instance.edge_count()],
            pruned: vec![false; instance.edge_count()],
            status: Vec::new(),
            permanent: Vec::new(),
            costs: Vec::new(),
            rejected_cost: Rational::zero(),
            trace: record_trace.then(DecisionTrace::new),
            capacity_violation: false,
        }
    }

    pub fn status(&self, id: RequestId) -> Status {
        self.status[id]
    }

    pub fn statuses(&self) -> &[Status] {
        &self.status
    }

    pub fn rejected_cost(&self) -> &Rational {
        &self.rejected_cost
    }

    pub fn trace(&self) -> Option<&DecisionTrace> {
        self.trace.as_ref()
    }

    pub fn load(&self, edge: usize) -> u64 {
        self.load[edge]
    }

    pub fn is_pruned(&self, edge: usize) -> bool {
        self.pruned[edge]
    }

    /// Edge count request threshold `4 m c^2` for pruning.
    pub fn prune_limit(&self) -> u64 {
        self.prune_limit
    }

    /// True once some edge carried more accepted requests than its capacity.
    pub fn capacity_violated(&self) -> bool {
        self.capacity_violation
    }

    fn event(&mut self, kind: EventKind, id: RequestId, delta: Rational) {
        if let Some(t) = self.trace.as_mut() {
            t.push(kind, Some(id), delta);
        }
    }

    fn reject(&mut self, id: RequestId, kind: EventKind) {
        let was = self.status[id];
        if was == Status::Rejected {
            return;
        }
        if was == Status::Accepted {
            for &e in &self.edge_lists[id] {
                self.load[e] -= 1;
            }
        }
        self.status[id] = Status::Rejected;
        let cost = self.costs[id].clone();
        self.rejected_cost += &cost;
        let kind = if was == Status::Accepted { EventKind::Preempt } else { kind };
        self.event(kind, id, cost);
    }

    fn accept(&mut self, id: RequestId, kind: EventKind) {
        self.status[id] = Status::Accepted;
        for &e in &self.edge_lists[id] {
            self.load[e] += 1;
            if self.load[e] > self.caps[e] {
                self.capacity_violation = true;
            }
        }
        self.event(kind, id, Rational::zero());
    }

    /// Applies one round for `request`, drawing from `rng`.
    pub fn apply_round<R: RngCore>(&mut self, request: &Request, round: &FractionalRound, rng: &mut R) {
        let id = request.id;
        debug_assert_eq!(round.arrival, id);
        self.status.push(Status::Pending);
        self.permanent.push(false);
        self.costs.push(request.cost().clone());
        self.edge_lists.push(request.edges().to_vec());
        self.event(EventKind::Arrive, id, Rational::zero());
        for &p in &round.permanent {
            self.permanent[p] = true;
        }

        // step 1: pruning
        for &e in request.edges() {
            self.members[e].push(id);
            if !self.pruned[e] && self.members[e].len() as u64 >= self.prune_limit {
                self.pruned[e] = true;
                let victims: Vec<RequestId> = self.members[e]
                    .iter()
                    .copied()
                    .filter(|&i| i != id && self.status[i] == Status::Accepted && !self.permanent[i])
                    .collect();
                for v in victims {
                    self.reject(v, EventKind::Preempt);
                }
            }
        }
        if request.edges().iter().any(|&e| self.pruned[e]) {
            self.reject(id, EventKind::RejectOnArrival);
        }

        // step 2: deterministic rejections
        for &c in &round.condemned {
            let kind = if c == id && round.arrival_small {
                EventKind::RejectImmediate
            } else {
                EventKind::RejectOnArrival
            };
            self.reject(c, kind);
        }

        // step 3: one draw per increased request still in play
        for ((i, _), &threshold) in round.increases.iter().zip(&round.thresholds) {
            let live = match self.status[*i] {
                Status::Accepted => !self.permanent[*i],
                Status::Pending => true,
                Status::Rejected => false,
            };
            if !live {
                continue;
            }
            let u = rng.next_u64() as u128;
            if u < threshold {
                self.reject(*i, EventKind::RejectOnArrival);
            }
        }

        // step 4: capacity
        if self.status[id] != Status::Pending {
            return;
        }
        let fits = request.edges().iter().all(|&e| self.load[e] < self.caps[e]);
        if fits {
            let kind = if self.permanent[id] {
                EventKind::AcceptPermanent
            } else {
                EventKind::Accept
            };
            self.accept(id, kind);
            return;
        }
        if self.permanent[id] {
            if let Some(victims) = self.plan_preemption(request) {
                for v in victims {
                    self.reject(v, EventKind::Preempt);
                }
                self.accept(id, EventKind::AcceptPermanent);
                return;
            }
        }
        self.reject(id, EventKind::RejectOnArrival);
    }

    /// Cheapest non-permanent accepted request (lowest id on ties) to evict
    /// from each full edge of `request`; `None` if some edge has none.
    fn plan_preemption(&self, request: &Request) -> Option<Vec<RequestId>> {
        let mut load = self.load.clone();
        let mut victims: Vec<RequestId> = Vec::new();
        for &e in request.edges() {
            if load[e] < self.caps[e] {
                continue;
            }
            let victim = self.members[e]
                .iter()
                .copied()
                .filter(|&i| {
                    i != request.id
                        && self.status[i] == Status::Accepted
                        && !self.permanent[i]
                        && !victims.contains(&i)
                })
                .min_by(|&a, &b| self.costs[a].cmp(&self.costs[b]).then(a.cmp(&b)))?;
            for &f in &self.edge_lists[victim] {
                load[f] -= 1;
            }
            victims.push(victim);
        }
        victims.sort_unstable();
        Some(victims)
    }
}

/// Fractional layer, rounding layer and generator for step-by-step use.
#[derive(Debug, Clone)]
pub struct RandomizedState {
    pub frac: FractionalState,
    pub layer: RoundingLayer,
    pub params: RoundingParams,
    pub rng_seed: u64,
    recorder: RoundRecorder,
    rng: ChaCha8Rng,
}

impl RandomizedState {
    pub fn new(
        instance: &NetworkInstance,
        requests: &[Request],
        config: FractionalConfig,
        variant: Variant,
        seed: u64,
    ) -> Self {
        Self {
            frac: FractionalState::for_sequence(instance, requests, config),
            layer: RoundingLayer::new(instance, true),
            params: RoundingParams::new(variant, instance),
            rng_seed: seed,
            recorder: RoundRecorder::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn process(&mut self, request: &Request) -> Result<FractionalRound, RandomizedError> {
        self.frac.process(request)?;
        let round = self.recorder.record(&self.frac, request.id, &self.params);
        self.layer.apply_round(request, &round, &mut self.rng);
        Ok(round)
    }

    pub fn rejected_cost(&self) -> &Rational {
        self.layer.rejected_cost()
    }
}

/// The fractional run shared by all trials.
#[derive(Debug, Clone)]
pub struct FractionalRun {
    pub rounds: Vec<FractionalRound>,
    pub frac: FractionalState,
    pub params: RoundingParams,
}

pub fn record_rounds(
    instance: &NetworkInstance,
    requests: &[Request],
    config: FractionalConfig,
    variant: Variant,
) -> Result<FractionalRun, RandomizedError> {
    validate_requests(instance, requests)?;
    let params = RoundingParams::new(variant, instance);
    let mut frac = FractionalState::for_sequence(instance, requests, config);
    let mut recorder = RoundRecorder::new();
    let mut rounds = Vec::with_capacity(requests.len());
    for r in requests {
        frac.process(r)?;
        rounds.push(recorder.record(&frac, r.id, &params));
    }
    Ok(FractionalRun { rounds, frac, params })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub seed: u64,
    pub rejected_cost: Rational,
    pub rejected: Vec<RequestId>,
    pub feasible: bool,
    pub trace: Option<DecisionTrace>,
}

pub fn run_trial(
    instance: &NetworkInstance,
    requests: &[Request],
    run: &FractionalRun,
    seed: u64,
    record_trace: bool,
) -> TrialResult {
    let mut layer = RoundingLayer::new(instance, record_trace);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (r, round) in requests.iter().zip(&run.rounds) {
        layer.apply_round(r, round, &mut rng);
    }
    let rejected = (0..requests.len())
        .filter(|&i| layer.status(i) == Status::Rejected)
        .collect();
    TrialResult {
        seed,
        rejected_cost: layer.rejected_cost().clone(),
        rejected,
        feasible: !layer.capacity_violated(),
        trace: layer.trace,
    }
}

#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub variant: Variant,
    pub trials: usize,
    pub mean: Rational,
    pub max: Rational,
    pub std_error: f64,
    pub c_frac: Rational,
    pub q: u64,
    pub bound: f64,
    pub all_feasible: bool,
    pub results: Vec<TrialResult>,
}

impl TrialSummary {
    pub fn mean_f64(&self) -> f64 {
        to_f64(&self.mean)
    }

    pub fn bound_satisfied(&self) -> bool {
        self.mean_f64() <= self.bound
    }
}

/// `24 C LOG2(mc) + 24 + 3 se` (weighted) or `8 C LOG2(m) + 3Q + 3 se`.
pub fn expected_cost_bound(
    variant: Variant,
    instance: &NetworkInstance,
    c_frac: &Rational,
    q: u64,
    std_error: f64,
) -> f64 {
    let c = to_f64(c_frac);
    match variant {
        Variant::Weighted => 24.0 * c * log2_floor_one_f64(instance.mc() as f64) + 24.0 + 3.0 * std_error,
        Variant::Unweighted => {
            8.0 * c * log2_floor_one_f64(instance.edge_count() as f64) + 3.0 * q as f64 + 3.0 * std_error
        }
    }
}

/// Runs one trial per seed in parallel; results are in seed-list order.
pub fn run_trials(
    instance: &NetworkInstance,
    requests: &[Request],
    config: FractionalConfig,
    variant: Variant,
    seeds: &[u64],
    record_traces: bool,
) -> Result<TrialSummary, RandomizedError> {
    let mut seen = std::collections::BTreeSet::new();
    if let Some(&dup) = seeds.iter().find(|&&s| !seen.insert(s)) {
        return Err(RandomizedError::DuplicateSeed(dup));
    }
    let run = record_rounds(instance, requests, config.without_trace(), variant)?;
    let results: Vec<TrialResult> = seeds
        .par_iter()
        .map(|&s| run_trial(instance, requests, &run, s, record_traces))
        .collect();
    Ok(summarize(instance, requests, &run, variant, results))
}

fn summarize(
    instance: &NetworkInstance,
    requests: &[Request],
    run: &FractionalRun,
    variant: Variant,
    results: Vec<TrialResult>,
) -> TrialSummary {
    let trials = results.len();
    let total = results.iter().fold(Rational::zero(), |acc, r| acc + &r.rejected_cost);
    let mean = if trials == 0 {
        Rational::zero()
    } else {
        total / int(trials as i64)
    };
    let max = results
        .iter()
        .map(|r| r.rejected_cost.clone())
        .max()
        .unwrap_or_else(Rational::zero);
    let std_error = if trials < 2 {
        0.0
    } else {
        let m = to_f64(&mean);
        let var = results
            .iter()
            .map(|r| {
                let d = to_f64(&r.rejected_cost) - m;
                d * d
            })
            .sum::<f64>()
            / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    };
    let c_frac = run.frac.fractional_cost();
    let q = max_excess_q(instance, requests);
    let bound = expected_cost_bound(variant, instance, &c_frac, q, std_error);
    TrialSummary {
        variant,
        trials,
        mean,
        max,
        std_error,
        c_frac,
        q,
        bound,
        all_feasible: results.iter().all(|r| r.feasible),
        results,
    }
}

/// Number of rejected requests, as an integer, for unit-cost runs.
pub fn rejected_count(result: &TrialResult) -> u64 {
    result.rejected.len().to_u64().unwrap_or(u64::MAX)
}
