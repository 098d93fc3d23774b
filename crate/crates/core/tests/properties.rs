mod common;

use admission_core::bicriteria::run_bicriteria;
use admission_core::fractional::{FractionalConfig, FractionalState};
use admission_core::harness::{gen_network, gen_setcover, NetworkGenParams, SetCoverGenParams};
use admission_core::model::max_excess_q;
use admission_core::oracle::{fractional_opt_admission, DEFAULT_BUDGET};
use admission_core::randomized::{record_rounds, run_trial, Variant};
use admission_core::rational::{format_rational, parse_rational};
use admission_core::reduction::{run_reduction, ReductionAlgorithm, Verdict};
use admission_core::{load_network, load_setcover, network_to_json, setcover_to_json, NetworkInstance, Rational, Request};
use common::*;
use num::Zero;
use proptest::prelude::*;

fn network() -> impl Strategy<Value = (NetworkInstance, Vec<Request>)> {
    (1usize..=6, 1u64..=3, 0usize..=12, 1u64..=16, any::<u64>()).prop_map(|(m, c_max, n, hi, seed)| {
        gen_network(&NetworkGenParams {
            m,
            c_max,
            n_requests: n,
            cost_lo: 1,
            cost_hi: hi,
            seed,
        })
        .unwrap()
    })
}

fn setcover(weighted: bool) -> impl Strategy<Value = SetCoverGenParams> {
    (1usize..=5, 1usize..=7, 0usize..=8, any::<u64>()).prop_map(move |(n, m, d, seed)| SetCoverGenParams {
        n,
        m,
        n_demands: d,
        cost_lo: 1,
        cost_hi: if weighted { 5 } else { 1 },
        seed,
    })
}

fn oracle_config(instance: &NetworkInstance, requests: &[Request]) -> FractionalConfig {
    let alpha = fractional_opt_admission(instance, requests, DEFAULT_BUDGET).unwrap().cost;
    FractionalConfig::oracle(alpha)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rational_text_round_trip(n in -10_000i64..10_000, d in 1i64..10_000) {
        let x = Rational::new(n.into(), d.into());
        prop_assert_eq!(parse_rational(&format_rational(&x)).unwrap(), x);
    }

    #[test]
    fn network_json_round_trip((instance, requests) in network()) {
        let text = network_to_json(&instance, &requests);
        let (i2, r2) = load_network(&text).unwrap();
        prop_assert_eq!(&i2, &instance);
        prop_assert_eq!(&r2, &requests);
        prop_assert_eq!(network_to_json(&i2, &r2), text);
    }

    #[test]
    fn setcover_json_round_trip(p in setcover(true)) {
        let (sc, demands) = gen_setcover(&p).unwrap();
        let text = setcover_to_json(&sc, &demands);
        let (s2, d2) = load_setcover(&text).unwrap();
        prop_assert_eq!(s2.sets(), sc.sets());
        prop_assert_eq!(s2.set_costs(), sc.set_costs());
        prop_assert_eq!(d2.demands(), demands.demands());
        prop_assert_eq!(setcover_to_json(&s2, &d2), text);
    }

    #[test]
    fn excess_q_is_monotone_in_the_sequence((instance, requests) in network()) {
        let mut last = 0;
        for k in 0..=requests.len() {
            let q = max_excess_q(&instance, &requests[..k]);
            prop_assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn fractional_invariants_hold_after_every_request((instance, requests) in network(), doubling in any::<bool>()) {
        let config = if doubling { FractionalConfig::doubling() } else { oracle_config(&instance, &requests) };
        let mut state = FractionalState::for_sequence(&instance, &requests, config);
        let mut prev: Vec<Rational> = Vec::new();
        for r in &requests {
            state.process(r).unwrap();
            prop_assert!(state.check_alive_sets());
            prop_assert_eq!(state.feasibility_violation(), None);
            prop_assert_eq!(deficient_edge(&state, &instance, &requests[..=r.id]), None);
            if !doubling {
                for (i, w) in prev.iter().enumerate() {
                    prop_assert!(state.weight(i) >= w);
                }
            }
            prev = state.weights();
        }
        prop_assert_eq!(state.step_bound_violations(), 0);
        if doubling {
            // geometric guesses: the forgotten cost never exceeds the final period's budget
            let bound = state.doubling_threshold().unwrap_or_else(Rational::zero);
            prop_assert!(state.sunk_cost() <= &bound);
        }
    }

    #[test]
    fn randomized_trials_respect_capacity_and_irrevocability(
        (instance, requests) in network(),
        seed in any::<u64>(),
        weighted in any::<bool>(),
    ) {
        let variant = if weighted { Variant::Weighted } else { Variant::Unweighted };
        let config = oracle_config(&instance, &requests);
        let run = record_rounds(&instance, &requests, config.without_trace(), variant).unwrap();
        let trial = run_trial(&instance, &requests, &run, seed, true);
        let trace = trial.trace.as_ref().unwrap();
        prop_assert!(trial.feasible);
        prop_assert_eq!(replay_capacity(trace, &instance, &requests), Ok(()));
        prop_assert_eq!(trace.irrevocability_violation(), None);
        prop_assert_eq!(trace.cumulative(), &trial.rejected_cost);
        let from_ids = trial.rejected.iter().fold(Rational::zero(), |acc, &i| acc + requests[i].cost());
        prop_assert_eq!(from_ids, trial.rejected_cost.clone());
        let again = run_trial(&instance, &requests, &run, seed, true);
        prop_assert_eq!(again, trial);
    }

    #[test]
    fn reduction_yields_valid_covers_with_oracle_alpha(p in setcover(true), seed in any::<u64>()) {
        let (sc, demands) = gen_setcover(&p).unwrap();
        let reduction = admission_core::reduction::build_reduction(&sc);
        let (requests, _) = admission_core::reduction::full_sequence(&reduction, &demands).unwrap();
        let config = oracle_config(&reduction.instance, &requests);
        for alg in [
            ReductionAlgorithm::Fractional,
            ReductionAlgorithm::Randomized { variant: Variant::Weighted, seed },
            ReductionAlgorithm::Randomized { variant: Variant::Unweighted, seed },
        ] {
            let out = run_reduction(&sc, &demands, alg, config.clone()).unwrap();
            prop_assert_eq!(&out.verdict, &Verdict::Valid);
            prop_assert!(out.phase2_rejections.is_empty());
            if out.fractional_cost.is_none() {
                prop_assert_eq!(&out.cover_cost, &out.rejected_phase1_cost);
            }
        }
    }

    #[test]
    fn bicriteria_meets_relaxed_demands(p in setcover(false), quarter in any::<bool>()) {
        let (sc, demands) = gen_setcover(&p).unwrap();
        let eps = if quarter { Rational::new(1.into(), 4.into()) } else { Rational::new(1.into(), 2.into()) };
        let (state, run) = run_bicriteria(&sc, &demands, eps.clone()).unwrap();
        prop_assert!(state.cover_counts_consistent());
        prop_assert!(state.cardinality_bound_holds());
        prop_assert_eq!(state.potential_increases(), 0);
        for (j, &k) in run.demand_counts.iter().enumerate() {
            let need = (Rational::from_integer(1.into()) - &eps) * Rational::from_integer((k as i64).into());
            prop_assert!(Rational::from_integer((run.per_element_coverage[j] as i64).into()) >= need);
        }
        let mut sorted = run.chosen_sets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), run.chosen_sets.len());
    }
}
