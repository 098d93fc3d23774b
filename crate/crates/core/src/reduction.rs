//! Set cover with repetitions as admission control.
//!
//! Every element `j` becomes an edge `e_j` with capacity `|S_j|`, the number
//! of sets containing it. Phase one sends one request per set, over the edges
//! of its elements, priced at the set cost; accepting all of them fills every
//! edge exactly. Phase two sends a single-edge request on `e_j` for each
//! demand of `j`. A phase-two request can only fit if some phase-one request
//! through `e_j` was rejected, so the rejected phase-one requests form a
//! multicover.

use std::collections::BTreeSet;

use num::{One, Zero};

use crate::fractional::{FractionalConfig, FractionalError, FractionalState, Standing};
use crate::model::{DemandSequence, ElementId, NetworkInstance, Phase, Request, RequestId, SetCoverInstance, SetId};
use crate::randomized::{record_rounds, run_trial, RandomizedError, Variant};
use crate::rational::{int, min_one, Rational};
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("demand for unknown element {0}")]
    UnknownElement(ElementId),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
    #[error(transparent)]
    Randomized(#[from] RandomizedError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionMap {
    element_count: usize,
    set_count: usize,
    capacities: Vec<u64>,
    phase2_cost: Rational,
}

impl ReductionMap {
    pub fn edge_of(&self, element: ElementId) -> usize {
        element
    }

    /// Phase-one request ids coincide with set ids.
    pub fn set_of(&self, request: RequestId) -> Option<SetId> {
        (request < self.set_count).then_some(request)
    }

    pub fn set_count(&self) -> usize {
        self.set_count
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn phase2_cost(&self) -> &Rational {
        &self.phase2_cost
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: NetworkInstance,
    pub map: ReductionMap,
    pub phase1: Vec<Request>,
}

pub fn build_reduction(sc: &SetCoverInstance) -> Reduction {
    let n = sc.element_count();
    let capacities: Vec<u64> = (0..n).map(|j| sc.sets_containing(j).len() as u64).collect();
    let instance = NetworkInstance::new(capacities.clone()).expect("every element lies in some set");
    let phase1: Vec<Request> = (0..sc.set_count())
        .map(|s| {
            Request::new(s, sc.set(s).to_vec(), sc.set_cost(s).clone())
                .expect("sets are nonempty and duplicate-free")
                .with_phase(Phase::One)
        })
        .collect();
    let total = sc.set_costs().iter().fold(Rational::zero(), |acc, c| acc + c);
    let map = ReductionMap {
        element_count: n,
        set_count: sc.set_count(),
        capacities,
        phase2_cost: int(2) * total + Rational::one(),
    };
    Reduction { instance, map, phase1 }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandRequest {
    pub request: Request,
    /// The demand count exceeds `|S_j|`: no cover can satisfy it.
    pub infeasible: bool,
}

/// The phase-two request for the `k`-th demand (1-based) of `element`.
pub fn demand_to_request(
    map: &ReductionMap,
    id: RequestId,
    element: ElementId,
    k: u64,
) -> Result<DemandRequest, ReductionError> {
    if element >= map.element_count {
        return Err(ReductionError::UnknownElement(element));
    }
    let request = Request::new(id, vec![map.edge_of(element)], map.phase2_cost.clone())
        .expect("positive cost")
        .with_phase(Phase::Two);
    Ok(DemandRequest {
        request,
        infeasible: k > map.capacities[element],
    })
}

/// Phase-one requests followed by one phase-two request per demand.
pub fn full_sequence(reduction: &Reduction, demands: &DemandSequence) -> Result<(Vec<Request>, Vec<usize>), ReductionError> {
    let mut requests = reduction.phase1.clone();
    let mut infeasible = Vec::new();
    for (t, (j, k)) in demands.running().enumerate() {
        let d = demand_to_request(&reduction.map, requests.len(), j, k)?;
        if d.infeasible {
            infeasible.push(t);
        }
        requests.push(d.request);
    }
    Ok((requests, infeasible))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverExtraction {
    pub sets: Vec<SetId>,
    /// Rejected phase-two request ids.
    pub phase2_rejections: Vec<RequestId>,
}

pub fn extract_cover(trace: &DecisionTrace, map: &ReductionMap) -> CoverExtraction {
    split_rejections(trace.rejected_requests(), map)
}

pub fn split_rejections(rejected: impl IntoIterator<Item = RequestId>, map: &ReductionMap) -> CoverExtraction {
    let mut sets = Vec::new();
    let mut phase2_rejections = Vec::new();
    for r in rejected.into_iter().collect::<BTreeSet<_>>() {
        match map.set_of(r) {
            Some(s) => sets.push(s),
            None => phase2_rejections.push(r),
        }
    }
    CoverExtraction { sets, phase2_rejections }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid { element: ElementId, deficit: u64 },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        *self == Verdict::Valid
    }
}

/// Valid iff every element has at least its final demand count of distinct
/// chosen sets; otherwise the first element short of it.
pub fn verify_multicover(sc: &SetCoverInstance, demands: &DemandSequence, cover: &[SetId]) -> Verdict {
    verify_counts(sc, &demands.counts(), cover)
}

pub fn verify_counts(sc: &SetCoverInstance, counts: &[u64], cover: &[SetId]) -> Verdict {
    let chosen: BTreeSet<SetId> = cover.iter().copied().filter(|&s| s < sc.set_count()).collect();
    let mut have = vec![0u64; sc.element_count()];
    for &s in &chosen {
        for &j in sc.set(s) {
            have[j] += 1;
        }
    }
    for (j, &k) in counts.iter().enumerate() {
        if have[j] < k {
            return Verdict::Invalid {
                element: j,
                deficit: k - have[j],
            };
        }
    }
    Verdict::Valid
}

/// Fractional version: `sum_{S in S_j} x_S >= k_j` for every element.
pub fn verify_fractional_multicover(sc: &SetCoverInstance, counts: &[u64], x: &[Rational]) -> Verdict {
    for (j, &k) in counts.iter().enumerate() {
        let have = sc
            .sets_containing(j)
            .iter()
            .fold(Rational::zero(), |acc, &s| acc + &x[s]);
        if have < int(k as i64) {
            let short = int(k as i64) - have;
            return Verdict::Invalid {
                element: j,
                deficit: short.ceil().to_integer().try_into().unwrap_or(u64::MAX),
            };
        }
    }
    Verdict::Valid
}

pub fn cover_cost(sc: &SetCoverInstance, cover: &[SetId]) -> Rational {
    cover.iter().fold(Rational::zero(), |acc, &s| acc + sc.set_cost(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionAlgorithm {
    Fractional,
    Randomized { variant: Variant, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct ReductionOutcome {
    /// Chosen sets: rejected phase-one requests (fully rejected ones for the
    /// fractional algorithm).
    pub cover: Vec<SetId>,
    pub cover_cost: Rational,
    /// Phase-two requests rejected, even partially.
    pub phase2_rejections: Vec<RequestId>,
    /// Demand positions whose count exceeded `|S_j|`.
    pub infeasible_demands: Vec<usize>,
    /// `x_S = min(f_S, 1)` per set (fractional algorithm only).
    pub fractional_cover: Option<Vec<Rational>>,
    pub fractional_cost: Option<Rational>,
    pub verdict: Verdict,
    /// Rejected phase-one cost read from the admission run.
    pub rejected_phase1_cost: Rational,
}

fn fractional_x(frac: &FractionalState, set_count: usize) -> Vec<Rational> {
    (0..set_count)
        .map(|s| match frac.standing(s) {
            Standing::SmallRejected | Standing::Retired => Rational::one(),
            Standing::BigAccepted => Rational::zero(),
            Standing::InRange | Standing::Unclassified => min_one(frac.weight(s)),
        })
        .collect()
}

pub fn run_reduction(
    sc: &SetCoverInstance,
    demands: &DemandSequence,
    algorithm: ReductionAlgorithm,
    config: FractionalConfig,
) -> Result<ReductionOutcome, ReductionError> {
    let reduction = build_reduction(sc);
    let (requests, infeasible_demands) = full_sequence(&reduction, demands)?;
    let counts = demands.counts();
    match algorithm {
        ReductionAlgorithm::Fractional => {
            let mut frac = FractionalState::for_sequence(&reduction.instance, &requests, config);
            for r in &requests {
                frac.process(r)?;
            }
            let x = fractional_x(&frac, sc.set_count());
            let fractional_cost = x
                .iter()
                .zip(sc.set_costs())
                .fold(Rational::zero(), |acc, (xs, c)| acc + xs * c);
            let cover: Vec<SetId> = (0..sc.set_count()).filter(|&s| x[s] == Rational::one()).collect();
            let phase2_rejections = (sc.set_count()..requests.len())
                .filter(|&r| match frac.standing(r) {
                    Standing::BigAccepted => false,
                    Standing::SmallRejected | Standing::Retired => true,
                    Standing::InRange | Standing::Unclassified => !frac.weight(r).is_zero(),
                })
                .collect();
            let verdict = verify_fractional_multicover(sc, &counts, &x);
            Ok(ReductionOutcome {
                cover_cost: cover_cost(sc, &cover),
                cover,
                phase2_rejections,
                infeasible_demands,
                fractional_cover: Some(x),
                fractional_cost: Some(fractional_cost.clone()),
                verdict,
                rejected_phase1_cost: fractional_cost,
            })
        }
        ReductionAlgorithm::Randomized { variant, seed } => {
            let run = record_rounds(&reduction.instance, &requests, config.without_trace(), variant)?;
            let trial = run_trial(&reduction.instance, &requests, &run, seed, true);
            let trace = trial.trace.expect("trace recorded");
            let extraction = extract_cover(&trace, &reduction.map);
            let rejected_phase1_cost = trace
                .events()
                .iter()
                .filter(|e| e.kind.is_reject() && e.request.is_some_and(|r| r < sc.set_count()))
                .fold(Rational::zero(), |acc, e| acc + &e.delta);
            let verdict = verify_counts(sc, &counts, &extraction.sets);
            Ok(ReductionOutcome {
                cover_cost: cover_cost(sc, &extraction.sets),
                cover: extraction.sets,
                phase2_rejections: extraction.phase2_rejections,
                infeasible_demands,
                fractional_cover: None,
                fractional_cost: None,
                verdict,
                rejected_phase1_cost,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::EventKind;

    fn three_sets() -> SetCoverInstance {
        SetCoverInstance::unit(2, vec![vec![0], vec![0, 1], vec![1]]).unwrap()
    }

    #[test]
    fn build_examples() {
        let r = build_reduction(&three_sets());
        assert_eq!(r.instance.capacities(), &[2, 2]);
        let edges: Vec<&[usize]> = r.phase1.iter().map(|q| q.edges()).collect();
        assert_eq!(edges, vec![&[0][..], &[0, 1][..], &[1][..]]);
        assert!(r.instance.max_capacity() <= 3);
        assert_eq!(r.map.phase2_cost(), &int(7));

        let single = build_reduction(&SetCoverInstance::unit(1, vec![vec![0]]).unwrap());
        assert_eq!(single.instance.capacities(), &[1]);
        assert_eq!(single.phase1.len(), 1);
    }

    #[test]
    fn demand_requests() {
        let r = build_reduction(&three_sets());
        let d = demand_to_request(&r.map, 3, 1, 1).unwrap();
        assert_eq!(d.request.edges(), &[1]);
        assert_eq!(d.request.phase, Phase::Two);
        assert!(!d.infeasible);
        assert!(demand_to_request(&r.map, 4, 1, 3).unwrap().infeasible);
        assert_eq!(
            demand_to_request(&r.map, 4, 2, 1).unwrap_err(),
            ReductionError::UnknownElement(2)
        );
    }

    #[test]
    fn verify_examples() {
        let sc = three_sets();
        let none = DemandSequence::new(2, vec![]).unwrap();
        assert_eq!(verify_multicover(&sc, &none, &[]), Verdict::Valid);
        let once = DemandSequence::new(2, vec![0]).unwrap();
        assert_eq!(verify_multicover(&sc, &once, &[1]), Verdict::Valid);
        let twice = DemandSequence::new(2, vec![0, 0]).unwrap();
        assert_eq!(
            verify_multicover(&sc, &twice, &[1]),
            Verdict::Invalid { element: 0, deficit: 1 }
        );
    }

    #[test]
    fn extraction_splits_phases() {
        let r = build_reduction(&three_sets());
        let mut t = DecisionTrace::new();
        t.push(EventKind::Preempt, Some(1), int(1));
        t.push(EventKind::RejectOnArrival, Some(4), int(7));
        let x = extract_cover(&t, &r.map);
        assert_eq!(x.sets, vec![1]);
        assert_eq!(x.phase2_rejections, vec![4]);
    }

    #[test]
    fn end_to_end_small() {
        let sc = three_sets();
        for demands in [vec![], vec![0], vec![0, 0], vec![0, 1, 1]] {
            let ds = DemandSequence::new(2, demands.clone()).unwrap();
            let frac = run_reduction(&sc, &ds, ReductionAlgorithm::Fractional, FractionalConfig::doubling()).unwrap();
            assert!(frac.verdict.is_valid(), "{demands:?}");
            for seed in 0..10 {
                let alg = ReductionAlgorithm::Randomized {
                    variant: Variant::Weighted,
                    seed,
                };
                let out = run_reduction(&sc, &ds, alg, FractionalConfig::doubling()).unwrap();
                assert!(out.phase2_rejections.is_empty());
                assert!(out.verdict.is_valid(), "{demands:?} seed {seed}");
                assert_eq!(out.cover_cost, out.rejected_phase1_cost);
            }
        }
        let none = DemandSequence::new(2, vec![]).unwrap();
        let out = run_reduction(
            &sc,
            &none,
            ReductionAlgorithm::Randomized {
                variant: Variant::Weighted,
                seed: 0,
            },
            FractionalConfig::doubling(),
        )
        .unwrap();
        assert!(out.cover.is_empty());
    }
}
