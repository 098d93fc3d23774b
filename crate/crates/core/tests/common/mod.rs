#![allow(dead_code)]

use admission_core::fractional::{FractionalState, Standing};
use admission_core::harness::{HotspotParams, NetworkGenParams, SetCoverGenParams};
use admission_core::trace::{DecisionTrace, EventKind};
use admission_core::{NetworkInstance, Rational, Request, SetCoverInstance};
use num::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

/// Minimum rejected cost by enumerating all `2^N` rejection sets.
pub fn brute_integral(instance: &NetworkInstance, requests: &[Request]) -> Rational {
    let n = requests.len();
    assert!(n <= 20);
    let mut best: Option<Rational> = None;
    for mask in 0u32..(1 << n) {
        let mut load = vec![0u64; instance.edge_count()];
        let mut cost = Rational::zero();
        for (i, r) in requests.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cost += r.cost();
            } else {
                for &e in r.edges() {
                    load[e] += 1;
                }
            }
        }
        let ok = load.iter().zip(instance.capacities()).all(|(l, c)| l <= c);
        if ok && best.as_ref().is_none_or(|b| cost < *b) {
            best = Some(cost);
        }
    }
    best.expect("rejecting everything is feasible")
}

/// Minimum multicover cost by enumerating all `2^m` families.
pub fn brute_multicover(sc: &SetCoverInstance, counts: &[u64]) -> Option<Rational> {
    let m = sc.set_count();
    assert!(m <= 20);
    let mut best: Option<Rational> = None;
    for mask in 0u32..(1 << m) {
        let mut have = vec![0u64; sc.element_count()];
        let mut cost = Rational::zero();
        for s in 0..m {
            if mask & (1 << s) != 0 {
                cost += sc.set_cost(s);
                for &j in sc.set(s) {
                    have[j] += 1;
                }
            }
        }
        if have.iter().zip(counts).all(|(h, k)| h >= k) && best.as_ref().is_none_or(|b| cost < *b) {
            best = Some(cost);
        }
    }
    best
}

/// Recomputes `sum_{ALIVE_e} f_i >= n_e` from public state only. `seen`
/// holds the requests that have arrived so far.
pub fn deficient_edge(state: &FractionalState, instance: &NetworkInstance, seen: &[Request]) -> Option<usize> {
    for e in 0..instance.edge_count() {
        let through: Vec<&Request> = seen.iter().filter(|r| r.edges().contains(&e)).collect();
        let big = through
            .iter()
            .filter(|r| state.standing(r.id) == Standing::BigAccepted)
            .count() as u64;
        let residual = instance.capacity(e).saturating_sub(big);
        let alive: Vec<&&Request> = through
            .iter()
            .filter(|r| {
                matches!(state.standing(r.id), Standing::InRange | Standing::Unclassified)
                    && *state.weight(r.id) < int(1)
            })
            .collect();
        let excess = alive.len() as i64 - residual as i64;
        if excess >= 1 {
            let total = alive.iter().fold(Rational::zero(), |acc, r| acc + state.weight(r.id));
            if total < int(excess) {
                return Some(e);
            }
        }
    }
    None
}

/// Replays a randomized decision trace and checks that accepted load never
/// exceeds capacity at any request boundary, and that no rejected request
/// is accepted again.
pub fn replay_capacity(trace: &DecisionTrace, instance: &NetworkInstance, requests: &[Request]) -> Result<(), String> {
    let mut load = vec![0u64; instance.edge_count()];
    let mut accepted = vec![false; requests.len()];
    let mut rejected = vec![false; requests.len()];
    let check = |load: &[u64]| -> Result<(), String> {
        for (e, (&l, &c)) in load.iter().zip(instance.capacities()).enumerate() {
            if l > c {
                return Err(format!("edge {e} carries {l} > {c}"));
            }
        }
        Ok(())
    };
    for ev in trace.events() {
        let Some(r) = ev.request else { continue };
        match ev.kind {
            EventKind::Arrive => check(&load)?,
            EventKind::Accept | EventKind::AcceptPermanent => {
                if rejected[r] {
                    return Err(format!("request {r} accepted after rejection"));
                }
                accepted[r] = true;
                for &e in requests[r].edges() {
                    load[e] += 1;
                }
            }
            EventKind::Preempt | EventKind::RejectOnArrival | EventKind::RejectImmediate => {
                if accepted[r] {
                    accepted[r] = false;
                    for &e in requests[r].edges() {
                        load[e] -= 1;
                    }
                }
                rejected[r] = true;
            }
            _ => {}
        }
    }
    check(&load)
}

/// `count <= coeff * max(1, log2 x)` via floating point with a safety
/// margin; `None` when too close to call.
pub fn le_mul_log2_f64(count: u64, coeff: &Rational, x: &Rational) -> Option<bool> {
    let lhs = count as f64;
    let log = ratio_f64(x).log2().max(1.0);
    let rhs = ratio_f64(coeff) * log;
    if (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0) {
        None
    } else {
        Some(lhs <= rhs)
    }
}

pub fn ratio_f64(x: &Rational) -> f64 {
    x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap()
}

/// Corpus parameters: `m <= 6`, `c <= 3`, at most 14 requests, costs in
/// `[lo, hi]`. Every fifth instance is a hotspot instance.
pub enum CorpusParams {
    Plain(NetworkGenParams),
    Hotspot(HotspotParams),
}

pub fn corpus_params(index: u64, cost_lo: u64, cost_hi: u64) -> CorpusParams {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ index);
    let m = rng.random_range(1..=6usize);
    let c_max = rng.random_range(1..=3u64);
    if index % 5 == 4 {
        CorpusParams::Hotspot(HotspotParams {
            m,
            c_max,
            target: rng.random_range(0..=5),
            extra: rng.random_range(0..=6),
            cost_lo,
            cost_hi,
            seed: index,
        })
    } else {
        CorpusParams::Plain(NetworkGenParams {
            m,
            c_max,
            n_requests: rng.random_range(1..=14),
            cost_lo,
            cost_hi,
            seed: index,
        })
    }
}

pub fn corpus_instance(index: u64, cost_lo: u64, cost_hi: u64) -> (NetworkInstance, Vec<Request>) {
    match corpus_params(index, cost_lo, cost_hi) {
        CorpusParams::Plain(p) => admission_core::harness::gen_network(&p).unwrap(),
        CorpusParams::Hotspot(p) => admission_core::harness::gen_hotspot(&p).unwrap(),
    }
}

pub fn setcover_params(index: u64, n_max: usize, m_max: usize, d_max: usize, weighted: bool) -> SetCoverGenParams {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E7C0 ^ index);
    SetCoverGenParams {
        n: rng.random_range(1..=n_max),
        m: rng.random_range(1..=m_max),
        n_demands: rng.random_range(0..=d_max),
        cost_lo: 1,
        cost_hi: if weighted { 4 } else { 1 },
        seed: index,
    }
}
