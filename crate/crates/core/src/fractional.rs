//! Fractional online admission control.
//!
//! Every request carries a rejection weight `f_i` that only grows. When an
//! edge has more alive requests than capacity and their weights do not cover
//! the excess, a weight augmentation bumps zero weights to `1/(g c)` and then
//! scales each alive weight by `1 + 1/(n_e p_i)` (costs normalized so the
//! cheapest in-range cost is 1). Requests whose weight reaches 1 are fully
//! rejected and leave the alive sets.
//!
//! Before entering the weight system a request is classified against the
//! current guess `alpha` of the optimum: expensive ones (`p > 2 alpha`) are
//! accepted for good and shrink the residual capacity, cheap ones
//! (`p <= alpha/(m c)`) are rejected outright. `alpha` is either supplied by
//! an oracle or guessed online by doubling.

use std::collections::BTreeSet;

use num::{One, Zero};

use crate::model::{EdgeId, NetworkInstance, Request, RequestId};
use crate::rational::{int, log2_floor_one, min_one, to_f64, Rational};
use crate::trace::{DecisionTrace, EventKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlphaMode {
    /// `alpha` is known up front (normally the fractional optimum).
    Oracle(Rational),
    /// Guess `alpha` at the first overflow and double it whenever the
    /// current period's cost exceeds `doubling_factor * alpha * LOG2(2gc)`.
    Doubling,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalConfig {
    pub mode: AlphaMode,
    pub doubling_factor: Rational,
    pub record_trace: bool,
}

impl FractionalConfig {
    pub fn oracle(alpha: Rational) -> Self {
        Self {
            mode: AlphaMode::Oracle(alpha),
            doubling_factor: int(8),
            record_trace: true,
        }
    }

    pub fn doubling() -> Self {
        Self {
            mode: AlphaMode::Doubling,
            doubling_factor: int(8),
            record_trace: true,
        }
    }

    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostClass {
    BigAccept,
    SmallReject,
    InRange,
}

/// `p > 2 alpha` is big, `p <= alpha / (m c)` is small, everything else in range.
pub fn classify_cost(cost: &Rational, alpha: &Rational, mc: u64) -> CostClass {
    if *cost > alpha * int(2) {
        CostClass::BigAccept
    } else if cost * int(mc as i64) <= *alpha {
        CostClass::SmallReject
    } else {
        CostClass::InRange
    }
}

/// Virtual cost normalization: `min_cost` maps to 1 and `g` is the ratio of
/// the largest to the smallest in-range cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostScale {
    pub min_cost: Rational,
    pub g: Rational,
}

impl CostScale {
    pub fn unit() -> Self {
        Self {
            min_cost: Rational::one(),
            g: Rational::one(),
        }
    }

    pub fn from_costs<'a>(
        costs: impl IntoIterator<Item = &'a Rational>,
        alpha: &Rational,
        mc: u64,
    ) -> Self {
        let mut lo: Option<&Rational> = None;
        let mut hi: Option<&Rational> = None;
        for p in costs {
            if classify_cost(p, alpha, mc) != CostClass::InRange {
                continue;
            }
            if lo.is_none_or(|l| p < l) {
                lo = Some(p);
            }
            if hi.is_none_or(|h| p > h) {
                hi = Some(p);
            }
        }
        match (lo, hi) {
            (Some(lo), Some(hi)) => Self {
                min_cost: lo.clone(),
                g: hi / lo,
            },
            _ => Self::unit(),
        }
    }

    pub fn normalized(&self, cost: &Rational) -> Rational {
        cost / &self.min_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Standing {
    /// Doubling mode before the first overflow: no guess of `alpha` yet.
    Unclassified,
    InRange,
    BigAccepted,
    SmallRejected,
    /// Fully rejected in an earlier doubling period; its cost is sunk.
    Retired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoublingOutcome {
    Unchanged,
    Doubled,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FractionalError {
    #[error("request {got} arrived out of order, expected id {expected}")]
    OutOfOrder { expected: RequestId, got: RequestId },
    #[error("request {request} references edge {edge} outside the instance")]
    UnknownEdge { request: RequestId, edge: EdgeId },
    #[error("weight augmentation on edge {edge} which is already satisfied")]
    SatisfiedEdge { edge: EdgeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestOutcome {
    pub class: Option<CostClass>,
    pub augmentations: u64,
    pub doublings: u32,
}

#[derive(Debug, Clone)]
struct Entry {
    edges: Vec<EdgeId>,
    cost: Rational,
    standing: Standing,
    weight: Rational,
    raised: Rational,
}

#[derive(Debug, Clone)]
pub struct FractionalState {
    edge_count: usize,
    max_capacity: u64,
    residual: Vec<u64>,
    config: FractionalConfig,
    alpha: Option<Rational>,
    scale: CostScale,
    known_costs: Vec<Rational>,
    entries: Vec<Entry>,
    seen: Vec<Vec<RequestId>>,
    alive: Vec<BTreeSet<RequestId>>,
    sunk: Rational,
    small_period: Rational,
    augment_count: u64,
    doublings: u32,
    step_violations: u64,
    max_step: Rational,
    trace: DecisionTrace,
}

impl FractionalState {
    /// `known_costs` is the cost multiset used for normalization (the cost
    /// range is assumed known in advance, ids and order are irrelevant).
    pub fn new(instance: &NetworkInstance, config: FractionalConfig, known_costs: Vec<Rational>) -> Self {
        let mc = instance.mc();
        let (alpha, scale) = match &config.mode {
            AlphaMode::Oracle(a) => (Some(a.clone()), CostScale::from_costs(&known_costs, a, mc)),
            AlphaMode::Doubling => (None, CostScale::unit()),
        };
        Self {
            edge_count: instance.edge_count(),
            max_capacity: instance.max_capacity(),
            residual: instance.capacities().to_vec(),
            config,
            alpha,
            scale,
            known_costs,
            entries: Vec::new(),
            seen: vec![Vec::new(); instance.edge_count()],
            alive: vec![BTreeSet::new(); instance.edge_count()],
            sunk: Rational::zero(),
            small_period: Rational::zero(),
            augment_count: 0,
            doublings: 0,
            step_violations: 0,
            max_step: Rational::zero(),
            trace: DecisionTrace::new(),
        }
    }

    /// Convenience constructor taking the cost range from the request list.
    pub fn for_sequence(instance: &NetworkInstance, requests: &[Request], config: FractionalConfig) -> Self {
        let costs = requests.iter().map(|r| r.cost().clone()).collect();
        Self::new(instance, config, costs)
    }

    fn mc(&self) -> u64 {
        self.edge_count as u64 * self.max_capacity
    }

    pub fn alpha(&self) -> Option<&Rational> {
        self.alpha.as_ref()
    }

    pub fn scale(&self) -> &CostScale {
        &self.scale
    }

    pub fn max_capacity(&self) -> u64 {
        self.max_capacity
    }

    pub fn augment_count(&self) -> u64 {
        self.augment_count
    }

    pub fn doublings(&self) -> u32 {
        self.doublings
    }

    pub fn sunk_cost(&self) -> &Rational {
        &self.sunk
    }

    /// Number of augmentations whose cost increase broke the `3 + 2/c` bound.
    pub fn step_bound_violations(&self) -> u64 {
        self.step_violations
    }

    /// Largest normalized cost increase of a single augmentation so far.
    pub fn max_step_increase(&self) -> &Rational {
        &self.max_step
    }

    pub fn step_bound(&self) -> Rational {
        int(3) + Rational::new(2.into(), (self.max_capacity as i64).into())
    }

    pub fn trace(&self) -> &DecisionTrace {
        &self.trace
    }

    pub fn request_count(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, id: RequestId) -> &Rational {
        &self.entries[id].weight
    }

    pub fn weights(&self) -> Vec<Rational> {
        self.entries.iter().map(|e| e.weight.clone()).collect()
    }

    /// Total weight ever added to request `id`; unaffected by doubling resets.
    pub fn raised(&self, id: RequestId) -> &Rational {
        &self.entries[id].raised
    }

    pub fn standing(&self, id: RequestId) -> Standing {
        self.entries[id].standing
    }

    pub fn cost_of(&self, id: RequestId) -> &Rational {
        &self.entries[id].cost
    }

    pub fn residual_capacity(&self, edge: EdgeId) -> u64 {
        self.residual[edge]
    }

    pub fn alive(&self, edge: EdgeId) -> &BTreeSet<RequestId> {
        &self.alive[edge]
    }

    pub fn seen(&self, edge: EdgeId) -> &[RequestId] {
        &self.seen[edge]
    }

    /// `n_e = |ALIVE_e| - c_e` against the residual capacity.
    pub fn excess(&self, edge: EdgeId) -> i64 {
        self.alive[edge].len() as i64 - self.residual[edge] as i64
    }

    pub fn alive_weight(&self, edge: EdgeId) -> Rational {
        self.alive[edge]
            .iter()
            .fold(Rational::zero(), |acc, &i| acc + &self.entries[i].weight)
    }

    fn deficient(&self, edge: EdgeId) -> bool {
        let n = self.excess(edge);
        n >= 1 && self.alive_weight(edge) < int(n)
    }

    pub fn classify(&self, request: &Request) -> Option<CostClass> {
        self.alpha
            .as_ref()
            .map(|a| classify_cost(request.cost(), a, self.mc()))
    }

    /// Cost of the current doubling period: in-range weights plus small rejections.
    pub fn period_cost(&self) -> Rational {
        self.entries
            .iter()
            .filter(|e| e.standing == Standing::InRange)
            .fold(self.small_period.clone(), |acc, e| acc + min_one(&e.weight) * &e.cost)
    }

    /// `sum min(f_i, 1) p_i` over in-range requests, plus small rejections and sunk cost.
    pub fn fractional_cost(&self) -> Rational {
        self.period_cost() + &self.sunk
    }

    /// Threshold `T(alpha) = factor * alpha * LOG2(2 g c)` of the doubling rule.
    pub fn doubling_threshold(&self) -> Option<Rational> {
        let alpha = self.alpha.as_ref()?;
        let x = int(2) * &self.scale.g * int(self.max_capacity as i64);
        Some(&self.config.doubling_factor * alpha * log2_floor_one(&x))
    }

    fn check_arrival(&self, request: &Request) -> Result<(), FractionalError> {
        if request.id != self.entries.len() {
            return Err(FractionalError::OutOfOrder {
                expected: self.entries.len(),
                got: request.id,
            });
        }
        if let Some(&edge) = request.edges().iter().find(|&&e| e >= self.edge_count) {
            return Err(FractionalError::UnknownEdge {
                request: request.id,
                edge,
            });
        }
        Ok(())
    }

    fn register(&mut self, request: &Request) {
        for &e in request.edges() {
            self.seen[e].push(request.id);
        }
        self.entries.push(Entry {
            edges: request.edges().to_vec(),
            cost: request.cost().clone(),
            standing: Standing::Unclassified,
            weight: Rational::zero(),
            raised: Rational::zero(),
        });
        if self.config.record_trace {
            self.trace.push(EventKind::Arrive, Some(request.id), Rational::zero());
        }
    }

    fn set_alive(&mut self, id: RequestId, alive: bool) {
        for k in 0..self.entries[id].edges.len() {
            let e = self.entries[id].edges[k];
            if alive {
                self.alive[e].insert(id);
            } else {
                self.alive[e].remove(&id);
            }
        }
    }

    fn apply_class(&mut self, id: RequestId, class: CostClass) {
        match class {
            CostClass::BigAccept => {
                self.entries[id].standing = Standing::BigAccepted;
                self.set_alive(id, false);
                for k in 0..self.entries[id].edges.len() {
                    let e = self.entries[id].edges[k];
                    // c_e already 0 stays 0: later requests through e meet zero capacity
                    self.residual[e] = self.residual[e].saturating_sub(1);
                }
                if self.config.record_trace {
                    self.trace.push(EventKind::AcceptPermanent, Some(id), Rational::zero());
                }
            }
            CostClass::SmallReject => {
                self.entries[id].standing = Standing::SmallRejected;
                self.set_alive(id, false);
                let cost = self.entries[id].cost.clone();
                self.small_period += &cost;
                if self.config.record_trace {
                    self.trace.push(EventKind::RejectImmediate, Some(id), cost);
                }
            }
            CostClass::InRange => {
                self.entries[id].standing = Standing::InRange;
                let alive = self.entries[id].weight < Rational::one();
                self.set_alive(id, alive);
            }
        }
    }

    /// A big request none of whose edges has residual capacity left.
    fn blocked(&self, id: RequestId) -> bool {
        self.entries[id].edges.iter().any(|&e| self.residual[e] == 0)
    }

    /// Reclassifies unclassified and in-range requests under the current
    /// guess. In doubling mode a big request on an exhausted edge proves the
    /// optimum exceeds `2 alpha`, so `alpha` is doubled and the pass restarts.
    fn reclassify(&mut self) {
        'retry: loop {
            let alpha = self.alpha.clone().expect("alpha set before reclassifying");
            self.scale = CostScale::from_costs(&self.known_costs, &alpha, self.mc());
            for id in 0..self.entries.len() {
                let standing = self.entries[id].standing;
                if !matches!(standing, Standing::Unclassified | Standing::InRange) {
                    continue;
                }
                let class = classify_cost(&self.entries[id].cost, &alpha, self.mc());
                if class == CostClass::BigAccept && self.config.mode == AlphaMode::Doubling && self.blocked(id) {
                    self.double();
                    continue 'retry;
                }
                if standing == Standing::Unclassified || class != CostClass::InRange {
                    self.apply_class(id, class);
                }
            }
            return;
        }
    }

    /// Classifies the request and routes it: permanent accept, immediate
    /// reject, or the weight system. Restores fractional feasibility on every
    /// edge and, in doubling mode, doubles `alpha` as often as required.
    pub fn process(&mut self, request: &Request) -> Result<RequestOutcome, FractionalError> {
        self.check_arrival(request)?;
        let before = self.augment_count;
        let doublings_before = self.doublings;
        self.register(request);
        let id = request.id;
        let class = match self.alpha.clone() {
            Some(alpha) if self.config.mode != AlphaMode::Doubling => {
                let class = classify_cost(request.cost(), &alpha, self.mc());
                self.apply_class(id, class);
                Some(class)
            }
            Some(_) => {
                self.reclassify();
                self.classify(request)
            }
            None => {
                self.set_alive(id, true);
                let overflow = request.edges().iter().copied().find(|&e| self.excess(e) > 0);
                if let Some(e) = overflow {
                    // first forced rejection: start guessing at the cheapest request on e
                    let alpha = self.seen[e]
                        .iter()
                        .map(|&i| &self.entries[i].cost)
                        .min()
                        .cloned()
                        .expect("overflowing edge has requests");
                    self.alpha = Some(alpha);
                    self.reclassify();
                }
                if self.entries[id].standing == Standing::Unclassified {
                    None
                } else {
                    self.classify(request)
                }
            }
        };
        self.restore_feasibility(request.edges())?;
        while self.maybe_double_alpha()? == DoublingOutcome::Doubled {}
        Ok(RequestOutcome {
            class,
            augmentations: self.augment_count - before,
            doublings: self.doublings - doublings_before,
        })
    }

    /// Enters an in-range request straight into the weight system (no cost
    /// classification) and runs the augmentation loop on its edges.
    pub fn process_request_fractional(&mut self, request: &Request) -> Result<u64, FractionalError> {
        self.check_arrival(request)?;
        let before = self.augment_count;
        self.register(request);
        self.apply_class(request.id, CostClass::InRange);
        self.restore_feasibility(request.edges())?;
        Ok(self.augment_count - before)
    }

    /// Augments the arriving request's edges in ascending order, then sweeps
    /// all edges until none is deficient (an augmentation that fully rejects
    /// a request can uncover an edge handled earlier).
    fn restore_feasibility(&mut self, first: &[EdgeId]) -> Result<(), FractionalError> {
        for &e in first {
            while self.deficient(e) {
                self.weight_augment(e)?;
            }
        }
        loop {
            let mut touched = false;
            for e in 0..self.edge_count {
                while self.deficient(e) {
                    self.weight_augment(e)?;
                    touched = true;
                }
            }
            if !touched {
                return Ok(());
            }
        }
    }

    /// One weight augmentation on `edge`. Returns the increase of
    /// `sum min(f_i, 1) p_i`.
    pub fn weight_augment(&mut self, edge: EdgeId) -> Result<Rational, FractionalError> {
        if !self.deficient(edge) {
            return Err(FractionalError::SatisfiedEdge { edge });
        }
        let n_e = int(self.excess(edge));
        let members: Vec<RequestId> = self.alive[edge].iter().copied().collect();
        let start = Rational::one() / (&self.scale.g * int(self.max_capacity as i64));
        let mut before = Rational::zero();
        let mut after = Rational::zero();
        let mut finished = Vec::new();
        for &i in &members {
            let entry = &mut self.entries[i];
            before += min_one(&entry.weight) * &entry.cost;
            let old = entry.weight.clone();
            if entry.weight.is_zero() {
                entry.weight = start.clone();
            }
            let step = &self.scale.min_cost / (&n_e * &entry.cost);
            entry.weight = &entry.weight * (Rational::one() + step);
            entry.raised += &entry.weight - old;
            after += min_one(&entry.weight) * &entry.cost;
            if entry.weight >= Rational::one() {
                finished.push(i);
            }
        }
        for i in finished {
            self.set_alive(i, false);
        }
        let delta = after - before;
        let normalized = &delta / &self.scale.min_cost;
        if normalized > self.step_bound() {
            self.step_violations += 1;
        }
        if normalized > self.max_step {
            self.max_step = normalized;
        }
        self.augment_count += 1;
        if self.config.record_trace {
            self.trace
                .push_full(EventKind::WeightAugment, None, Some(edge), None, delta.clone());
        }
        Ok(delta)
    }

    /// Doubles `alpha`, sinks the period cost and resets the weights of
    /// requests that are not fully rejected. Reclassification is left to the caller.
    fn double(&mut self) {
        let alpha = self.alpha.take().expect("alpha guessed") * int(2);
        self.alpha = Some(alpha);
        self.sunk += self.period_cost();
        self.small_period = Rational::zero();
        for id in 0..self.entries.len() {
            if self.entries[id].standing != Standing::InRange {
                continue;
            }
            if self.entries[id].weight >= Rational::one() {
                self.entries[id].standing = Standing::Retired;
            } else {
                self.entries[id].weight = Rational::zero();
            }
        }
        self.doublings += 1;
        if self.config.record_trace {
            self.trace.push(EventKind::AlphaDouble, None, Rational::zero());
        }
    }

    /// Doubling rule: once the period cost exceeds `T(alpha)`, double
    /// `alpha`, sink the period cost, reset the weights of requests that are
    /// not fully rejected, reclassify, and restore feasibility.
    pub fn maybe_double_alpha(&mut self) -> Result<DoublingOutcome, FractionalError> {
        if self.config.mode != AlphaMode::Doubling {
            return Ok(DoublingOutcome::Unchanged);
        }
        let Some(threshold) = self.doubling_threshold() else {
            return Ok(DoublingOutcome::Unchanged);
        };
        let period = self.period_cost();
        if period <= threshold {
            return Ok(DoublingOutcome::Unchanged);
        }
        self.double();
        self.reclassify();
        let all: Vec<EdgeId> = (0..self.edge_count).collect();
        self.restore_feasibility(&all)?;
        Ok(DoublingOutcome::Doubled)
    }

    /// First edge whose alive weight does not cover its excess.
    pub fn feasibility_violation(&self) -> Option<EdgeId> {
        (0..self.edge_count).find(|&e| self.alive_weight(e) < int(self.excess(e)))
    }

    /// Checks that the alive sets and excesses agree with the weights.
    pub fn check_alive_sets(&self) -> bool {
        (0..self.edge_count).all(|e| {
            let expected: BTreeSet<RequestId> = self.seen[e]
                .iter()
                .copied()
                .filter(|&i| {
                    let entry = &self.entries[i];
                    matches!(entry.standing, Standing::InRange | Standing::Unclassified)
                        && entry.weight < Rational::one()
                })
                .collect();
            expected == self.alive[e]
        })
    }

    /// `sum f*_i p_i` over in-range requests in normalized units.
    pub fn normalized_alpha(&self, fstar: &[Rational]) -> Rational {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.standing == Standing::InRange)
            .fold(Rational::zero(), |acc, (i, e)| {
                acc + &fstar[i] * self.scale.normalized(&e.cost)
            })
    }

    /// `log2` of the proof potential `prod max(f_i, 1/(gc))^(f*_i p_i)` over
    /// in-range requests, with normalized costs. Diagnostic only.
    pub fn proof_potential_log2(&self, fstar: &[Rational]) -> f64 {
        let floor = Rational::one() / (&self.scale.g * int(self.max_capacity as i64));
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.standing == Standing::InRange)
            .map(|(i, e)| {
                let base = if e.weight > floor { &e.weight } else { &floor };
                to_f64(&(&fstar[i] * self.scale.normalized(&e.cost))) * to_f64(base).log2()
            })
            .sum()
    }

    /// Starting value `-alpha * log2(gc)` of the proof potential.
    pub fn proof_potential_initial_log2(&self, fstar: &[Rational]) -> f64 {
        let gc = &self.scale.g * int(self.max_capacity as i64);
        -to_f64(&self.normalized_alpha(fstar)) * to_f64(&gc).log2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn unit_requests(edge_lists: &[&[usize]]) -> Vec<Request> {
        edge_lists
            .iter()
            .enumerate()
            .map(|(i, e)| Request::new(i, e.to_vec(), int(1)).unwrap())
            .collect()
    }

    #[test]
    fn classification_boundaries() {
        // alpha = 4, m = 2, c = 2
        assert_eq!(classify_cost(&int(10), &int(4), 4), CostClass::BigAccept);
        assert_eq!(classify_cost(&int(1), &int(4), 4), CostClass::SmallReject);
        assert_eq!(classify_cost(&int(3), &int(4), 4), CostClass::InRange);
        assert_eq!(classify_cost(&int(8), &int(4), 4), CostClass::InRange);
    }

    #[test]
    fn two_requests_single_unit_edge() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let reqs = unit_requests(&[&[0], &[0]]);
        let mut st = FractionalState::new(&inst, FractionalConfig::oracle(int(1)), vec![]);
        assert_eq!(st.scale(), &CostScale::unit());
        assert_eq!(st.process_request_fractional(&reqs[0]).unwrap(), 0);
        assert_eq!(st.excess(0), 0);
        assert_eq!(st.process_request_fractional(&reqs[1]).unwrap(), 1);
        // (a) 0 -> 1/(gc) = 1, (b) doubled to 2, both fully rejected
        assert_eq!(st.weight(0), &int(2));
        assert_eq!(st.weight(1), &int(2));
        assert!(st.alive(0).is_empty());
        assert_eq!(st.fractional_cost(), int(2));
        assert_eq!(st.feasibility_violation(), None);
    }

    #[test]
    fn three_requests_capacity_two() {
        let inst = NetworkInstance::new(vec![2]).unwrap();
        let reqs = unit_requests(&[&[0], &[0], &[0]]);
        let mut st = FractionalState::new(&inst, FractionalConfig::oracle(int(1)), vec![]);
        st.process_request_fractional(&reqs[0]).unwrap();
        st.process_request_fractional(&reqs[1]).unwrap();
        assert_eq!(st.process_request_fractional(&reqs[2]).unwrap(), 1);
        // 1/(gc) = 1/2, times (1 + 1/1) = 1
        for i in 0..3 {
            assert_eq!(st.weight(i), &int(1));
        }
        assert_eq!(st.fractional_cost(), int(3));
    }

    #[test]
    fn augment_contract() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let mut st = FractionalState::new(&inst, FractionalConfig::oracle(int(1)), vec![]);
        let r0 = Request::new(0, vec![0], int(1)).unwrap();
        st.process_request_fractional(&r0).unwrap();
        assert_eq!(
            st.weight_augment(0),
            Err(FractionalError::SatisfiedEdge { edge: 0 })
        );
    }

    #[test]
    fn single_alive_request_step() {
        // ALIVE_e = {i}, f_i = 0, n_e = 1, g = c = 1: f goes 0 -> 1 -> 2, delta 1.
        // Build it with a big request eating the only unit of capacity.
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let big = Request::new(0, vec![0], int(100)).unwrap();
        let small = Request::new(1, vec![0], int(1)).unwrap();
        let costs = vec![int(100), int(1)];
        let mut st = FractionalState::new(&inst, FractionalConfig::oracle(int(1)), costs);
        st.process(&big).unwrap();
        assert_eq!(st.residual_capacity(0), 0);
        // register without triggering the loop, then augment by hand
        st.register(&small);
        st.apply_class(1, CostClass::InRange);
        assert_eq!(st.excess(0), 1);
        let delta = st.weight_augment(0).unwrap();
        assert_eq!(st.weight(1), &int(2));
        assert_eq!(delta, int(1));
    }

    #[test]
    fn nonzero_weights_skip_step_a() {
        // ALIVE_e = {0,1,2}, f = 1/4 each, p = 1, c_e = 2 so n_e = 1; only the
        // multiplicative step applies: f -> 1/2 each, delta 3/4.
        let inst = NetworkInstance::new(vec![2]).unwrap();
        let reqs = unit_requests(&[&[0], &[0], &[0]]);
        let mut st = FractionalState::new(&inst, FractionalConfig::oracle(int(1)), vec![]);
        for r in &reqs {
            st.register(r);
            st.apply_class(r.id, CostClass::InRange);
            st.entries[r.id].weight = ratio(1, 4);
        }
        assert_eq!(st.excess(0), 1);
        let delta = st.weight_augment(0).unwrap();
        for i in 0..3 {
            assert_eq!(st.weight(i), &ratio(1, 2));
        }
        assert_eq!(delta, ratio(3, 4));
        // two alive at 1/2 with n_e = 1 is already covered
        st.set_alive(2, false);
        assert_eq!(st.weight_augment(0), Err(FractionalError::SatisfiedEdge { edge: 0 }));
    }

    #[test]
    fn oracle_mode_classifies() {
        let inst = NetworkInstance::new(vec![1, 1]).unwrap();
        let reqs = vec![
            Request::new(0, vec![0], int(10)).unwrap(),
            Request::new(1, vec![0, 1], int(1)).unwrap(),
            Request::new(2, vec![1], int(3)).unwrap(),
        ];
        // alpha = 4, mc = 2: big > 8, small <= 2
        let mut st = FractionalState::for_sequence(&inst, &reqs, FractionalConfig::oracle(int(4)));
        assert_eq!(st.process(&reqs[0]).unwrap().class, Some(CostClass::BigAccept));
        assert_eq!(st.process(&reqs[1]).unwrap().class, Some(CostClass::SmallReject));
        assert_eq!(st.process(&reqs[2]).unwrap().class, Some(CostClass::InRange));
        assert_eq!(st.residual_capacity(0), 0);
        assert_eq!(st.fractional_cost(), int(1));
        assert!(st.check_alive_sets());
        assert_eq!(st.trace().cumulative(), &st.fractional_cost());
    }

    #[test]
    fn empty_run_costs_nothing() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let st = FractionalState::new(&inst, FractionalConfig::doubling(), vec![]);
        assert_eq!(st.fractional_cost(), int(0));
        let st = FractionalState::new(&inst, FractionalConfig::oracle(int(0)), vec![]);
        assert_eq!(st.fractional_cost(), int(0));
    }

    #[test]
    fn clamped_weighted_cost() {
        // weights (2, 1/2), costs (1, 4) -> 1 + 2
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let reqs = vec![
            Request::new(0, vec![0], int(1)).unwrap(),
            Request::new(1, vec![0], int(4)).unwrap(),
        ];
        let mut st = FractionalState::new(&inst, FractionalConfig::oracle(int(1)), vec![]);
        for r in &reqs {
            st.register(r);
            st.apply_class(r.id, CostClass::InRange);
        }
        st.entries[0].weight = int(2);
        st.entries[1].weight = ratio(1, 2);
        assert_eq!(st.fractional_cost(), int(3));
    }

    #[test]
    fn big_request_on_exhausted_edge_doubles_alpha() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let costs = [1, 10, 10];
        let reqs: Vec<Request> = costs
            .iter()
            .enumerate()
            .map(|(i, &p)| Request::new(i, vec![0], int(p)).unwrap())
            .collect();
        let mut st = FractionalState::for_sequence(&inst, &reqs, FractionalConfig::doubling());
        st.process(&reqs[0]).unwrap();
        st.process(&reqs[1]).unwrap();
        assert_eq!(st.alpha(), Some(&int(1)));
        assert_eq!(st.standing(0), Standing::SmallRejected);
        assert_eq!(st.standing(1), Standing::BigAccepted);
        // 10 > 2*alpha until alpha = 8
        let out = st.process(&reqs[2]).unwrap();
        assert_eq!(out.doublings, 3);
        assert_eq!(st.alpha(), Some(&int(8)));
        assert_eq!(st.standing(2), Standing::InRange);
        assert!(*st.weight(2) >= int(1));
        assert_eq!(st.feasibility_violation(), None);
    }

    #[test]
    fn doubling_below_threshold_is_unchanged() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let mut st = FractionalState::new(&inst, FractionalConfig::doubling(), vec![]);
        assert_eq!(st.maybe_double_alpha().unwrap(), DoublingOutcome::Unchanged);
        let r = Request::new(0, vec![0], int(1)).unwrap();
        st.process(&r).unwrap();
        assert!(st.alpha().is_none());
        assert_eq!(st.maybe_double_alpha().unwrap(), DoublingOutcome::Unchanged);
    }

    #[test]
    fn doubling_triggers_and_sinks_cost() {
        // Many unit requests on one unit-capacity edge, known costs spread so
        // the first guess is far too small.
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let reqs = unit_requests(&vec![&[0usize][..]; 40]);
        let costs: Vec<Rational> = reqs.iter().map(|r| r.cost().clone()).collect();
        let mut st = FractionalState::new(&inst, FractionalConfig::doubling(), costs);
        let mut seen_double = false;
        for r in &reqs {
            let sunk_before = st.sunk_cost().clone();
            let alpha_before = st.alpha().cloned();
            let period_before = st.period_cost();
            let out = st.process(r).unwrap();
            if out.doublings > 0 {
                seen_double = true;
                let a0 = alpha_before.unwrap();
                assert_eq!(st.alpha().unwrap(), &(a0 * int(1 << out.doublings)));
                assert!(st.sunk_cost() > &sunk_before);
                assert!(st.sunk_cost() >= &(sunk_before + period_before));
            }
            assert_eq!(st.feasibility_violation(), None);
            assert!(st.check_alive_sets());
        }
        assert!(seen_double);
        assert_eq!(st.trace().cumulative(), &st.fractional_cost());
    }
}
