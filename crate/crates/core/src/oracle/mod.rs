//! Exact offline optima for small instances.
//!
//! * integral admission control: branch-and-bound over accept/reject decisions
//! * fractional admission control: the covering LP solved by rational simplex
//! * set multicover: branch-and-bound over set choices
//!
//! These are ground truth for every bound the online algorithms are checked
//! against, so all of them are exact.

mod simplex;

use num::{One, Zero};
use serde::Serialize;

use crate::model::{DemandSequence, NetworkInstance, Request, SetCoverInstance};
use crate::rational::{format_rational, Rational};

pub use simplex::{maximize, LpSolution, SimplexError};

pub const DEFAULT_BUDGET: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    IntegralAdmission,
    FractionalAdmission,
    Multicover,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSolution {
    pub kind: OracleKind,
    pub cost: Rational,
    /// Rejected request ids, or chosen set ids for multicover. Ascending.
    pub ids: Vec<usize>,
    /// Optimal fractional rejections `f*_i` (fractional admission only).
    pub frac_weights: Option<Vec<Rational>>,
}

#[derive(Serialize)]
struct SolutionDoc {
    kind: OracleKind,
    cost: String,
    solution: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<String>>,
}

impl OracleSolution {
    pub fn to_json(&self) -> String {
        let doc = SolutionDoc {
            kind: self.kind,
            cost: format_rational(&self.cost),
            solution: self.ids.clone(),
            weights: self
                .frac_weights
                .as_ref()
                .map(|w| w.iter().map(format_rational).collect()),
        };
        serde_json::to_string(&doc).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance has {size} decision variables, over the budget of {budget}")]
    BudgetExceeded { size: usize, budget: usize },
    #[error("element {element} is demanded {demand} times but only {available} sets contain it")]
    Infeasible {
        element: usize,
        demand: u64,
        available: usize,
    },
    #[error("linear program solver failed: {0}")]
    Lp(#[from] SimplexError),
    #[error("internal check failed: {0}")]
    Internal(String),
}

fn edge_members(instance: &NetworkInstance, requests: &[Request]) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); instance.edge_count()];
    for r in requests {
        for &e in r.edges() {
            members[e].push(r.id);
        }
    }
    members
}

/// Sum of the `need` smallest costs in `costs`.
fn cheapest(mut costs: Vec<&Rational>, need: usize) -> Rational {
    costs.sort();
    costs.into_iter().take(need).fold(Rational::zero(), |acc, c| acc + c)
}

struct AdmissionSearch<'a> {
    requests: &'a [Request],
    caps: &'a [u64],
    members: Vec<Vec<usize>>,
    load: Vec<u64>,
    rejected: Vec<bool>,
    best_cost: Rational,
    best: Vec<bool>,
}

impl AdmissionSearch<'_> {
    fn lower_bound(&self, next: usize) -> Rational {
        let mut bound = Rational::zero();
        for (e, members) in self.members.iter().enumerate() {
            let remaining: Vec<&Rational> = members
                .iter()
                .filter(|&&i| i >= next)
                .map(|&i| self.requests[i].cost())
                .collect();
            let total = self.load[e] + remaining.len() as u64;
            if total > self.caps[e] {
                let need = (total - self.caps[e]) as usize;
                let lb = cheapest(remaining, need);
                if lb > bound {
                    bound = lb;
                }
            }
        }
        bound
    }

    fn search(&mut self, next: usize, cost: Rational) {
        if next == self.requests.len() {
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best = self.rejected.clone();
            }
            return;
        }
        if &cost + self.lower_bound(next) >= self.best_cost {
            return;
        }
        let r = &self.requests[next];
        if r.edges().iter().all(|&e| self.load[e] < self.caps[e]) {
            for &e in r.edges() {
                self.load[e] += 1;
            }
            self.search(next + 1, cost.clone());
            for &e in r.edges() {
                self.load[e] -= 1;
            }
        }
        self.rejected[next] = true;
        let with = cost + r.cost();
        self.search(next + 1, with);
        self.rejected[next] = false;
    }
}

/// Minimum total cost of rejected requests such that accepted requests fit
/// every capacity.
pub fn integral_opt_admission(
    instance: &NetworkInstance,
    requests: &[Request],
    budget: usize,
) -> Result<OracleSolution, OracleError> {
    if requests.len() > budget {
        return Err(OracleError::BudgetExceeded {
            size: requests.len(),
            budget,
        });
    }
    let total: Rational = requests.iter().fold(Rational::zero(), |acc, r| acc + r.cost());
    let mut search = AdmissionSearch {
        requests,
        caps: instance.capacities(),
        members: edge_members(instance, requests),
        load: vec![0; instance.edge_count()],
        rejected: vec![false; requests.len()],
        // rejecting everything is always feasible; +1 lets the search record it
        best_cost: total + Rational::one(),
        best: vec![true; requests.len()],
    };
    search.search(0, Rational::zero());
    let ids = (0..requests.len()).filter(|&i| search.best[i]).collect();
    Ok(OracleSolution {
        kind: OracleKind::IntegralAdmission,
        cost: search.best_cost,
        ids,
        frac_weights: None,
    })
}

/// Optimal fractional rejection: `min sum p_i f_i` subject to
/// `sum_{i in REQ_e} f_i >= |REQ_e| - c_e` and `0 <= f_i <= 1`.
///
/// Solved through its packing dual (`max sum b_e y_e - sum z_i`,
/// `sum_{e in r_i} y_e - z_i <= p_i`), whose origin is feasible; the primal
/// weights are read off the final tableau and then re-verified.
pub fn fractional_opt_admission(
    instance: &NetworkInstance,
    requests: &[Request],
    budget: usize,
) -> Result<OracleSolution, OracleError> {
    if requests.len() > budget {
        return Err(OracleError::BudgetExceeded {
            size: requests.len(),
            budget,
        });
    }
    let members = edge_members(instance, requests);
    let tight: Vec<(usize, u64)> = members
        .iter()
        .enumerate()
        .filter_map(|(e, m)| {
            let excess = (m.len() as u64).saturating_sub(instance.capacity(e));
            (excess > 0).then_some((e, excess))
        })
        .collect();
    let n = requests.len();
    if tight.is_empty() {
        return Ok(OracleSolution {
            kind: OracleKind::FractionalAdmission,
            cost: Rational::zero(),
            ids: Vec::new(),
            frac_weights: Some(vec![Rational::zero(); n]),
        });
    }
    // dual variables: y_e for tight edges, then z_i per request
    let width = tight.len() + n;
    let mut a = vec![vec![Rational::zero(); width]; n];
    for (k, &(e, _)) in tight.iter().enumerate() {
        for &i in &members[e] {
            a[i][k] = Rational::one();
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[tight.len() + i] = -Rational::one();
    }
    let b: Vec<Rational> = requests.iter().map(|r| r.cost().clone()).collect();
    let mut c: Vec<Rational> = tight
        .iter()
        .map(|&(_, x)| Rational::from_integer((x as i64).into()))
        .collect();
    c.extend((0..n).map(|_| -Rational::one()));
    let sol = maximize(&a, &b, &c)?;
    let f = sol.dual;

    // certificate: primal feasible and primal cost equals dual objective
    for (i, fi) in f.iter().enumerate() {
        if *fi < Rational::zero() || *fi > Rational::one() {
            return Err(OracleError::Internal(format!("f*_{i} = {fi} outside [0,1]")));
        }
    }
    for &(e, excess) in &tight {
        let covered: Rational = members[e].iter().fold(Rational::zero(), |acc, &i| acc + &f[i]);
        if covered < Rational::from_integer((excess as i64).into()) {
            return Err(OracleError::Internal(format!("edge {e} uncovered by LP solution")));
        }
    }
    let cost: Rational = f
        .iter()
        .zip(requests)
        .fold(Rational::zero(), |acc, (fi, r)| acc + fi * r.cost());
    if cost != sol.objective {
        return Err(OracleError::Internal(format!(
            "duality gap: primal {cost} vs dual {}",
            sol.objective
        )));
    }
    let ids = (0..n).filter(|&i| f[i] == Rational::one()).collect();
    Ok(OracleSolution {
        kind: OracleKind::FractionalAdmission,
        cost,
        ids,
        frac_weights: Some(f),
    })
}

struct CoverSearch<'a> {
    sc: &'a SetCoverInstance,
    need: Vec<u64>,
    chosen: Vec<bool>,
    best_cost: Option<Rational>,
    best: Vec<bool>,
}

impl CoverSearch<'_> {
    /// `None` when some deficit can no longer be met with sets from `next` on.
    fn lower_bound(&self, next: usize) -> Option<Rational> {
        let mut bound = Rational::zero();
        for (j, &deficit) in self.need.iter().enumerate() {
            if deficit == 0 {
                continue;
            }
            let remaining: Vec<&Rational> = self
                .sc
                .sets_containing(j)
                .iter()
                .filter(|&&s| s >= next)
                .map(|&s| self.sc.set_cost(s))
                .collect();
            if (remaining.len() as u64) < deficit {
                return None;
            }
            let lb = cheapest(remaining, deficit as usize);
            if lb > bound {
                bound = lb;
            }
        }
        Some(bound)
    }

    fn search(&mut self, next: usize, cost: Rational) {
        if self.need.iter().all(|&d| d == 0) {
            if self.best_cost.as_ref().is_none_or(|b| cost < *b) {
                self.best_cost = Some(cost);
                self.best = self.chosen.clone();
            }
            return;
        }
        if next == self.sc.set_count() {
            return;
        }
        let Some(lb) = self.lower_bound(next) else {
            return;
        };
        if let Some(best) = &self.best_cost {
            if &cost + lb >= *best {
                return;
            }
        }
        let elements = self.sc.set(next);
        if elements.iter().any(|&j| self.need[j] > 0) {
            let touched: Vec<usize> = elements.iter().copied().filter(|&j| self.need[j] > 0).collect();
            for &j in &touched {
                self.need[j] -= 1;
            }
            self.chosen[next] = true;
            self.search(next + 1, cost.clone() + self.sc.set_cost(next));
            self.chosen[next] = false;
            for &j in &touched {
                self.need[j] += 1;
            }
        }
        self.search(next + 1, cost);
    }
}

/// Cheapest family of distinct sets covering every element `j` at least
/// `k_j` times, where `k_j` is its final demand count.
pub fn opt_multicover(
    sc: &SetCoverInstance,
    demands: &DemandSequence,
    budget: usize,
) -> Result<OracleSolution, OracleError> {
    opt_multicover_counts(sc, &demands.counts(), budget)
}

pub fn opt_multicover_counts(
    sc: &SetCoverInstance,
    counts: &[u64],
    budget: usize,
) -> Result<OracleSolution, OracleError> {
    if sc.set_count() > budget {
        return Err(OracleError::BudgetExceeded {
            size: sc.set_count(),
            budget,
        });
    }
    for (j, &k) in counts.iter().enumerate() {
        let available = sc.sets_containing(j).len();
        if k > available as u64 {
            return Err(OracleError::Infeasible {
                element: j,
                demand: k,
                available,
            });
        }
    }
    let mut search = CoverSearch {
        sc,
        need: counts.to_vec(),
        chosen: vec![false; sc.set_count()],
        best_cost: None,
        best: Vec::new(),
    };
    search.search(0, Rational::zero());
    let cost = search
        .best_cost
        .ok_or_else(|| OracleError::Internal("feasible multicover not found".into()))?;
    let ids = (0..sc.set_count()).filter(|&s| search.best[s]).collect();
    Ok(OracleSolution {
        kind: OracleKind::Multicover,
        cost,
        ids,
        frac_weights: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn reqs(shape: &[(&[usize], i64)]) -> Vec<Request> {
        shape.iter()
            .enumerate()
            .map(|(i, (e, c))| Request::new(i, e.to_vec(), int(*c)).unwrap())
            .collect()
    }

    #[test]
    fn integral_rejects_cheapest_excess() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let r = reqs(&[(&[0], 1), (&[0], 3)]);
        let sol = integral_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.cost, int(1));
        assert_eq!(sol.ids, vec![0]);
    }

    #[test]
    fn everything_fits() {
        let inst = NetworkInstance::new(vec![2, 2]).unwrap();
        let r = reqs(&[(&[0, 1], 1), (&[0], 3), (&[1], 2)]);
        let sol = integral_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.cost, int(0));
        assert!(sol.ids.is_empty());
        let frac = fractional_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        assert_eq!(frac.cost, int(0));
    }

    #[test]
    fn fractional_single_constraint() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let r = reqs(&[(&[0], 1), (&[0], 1)]);
        let sol = fractional_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.cost, int(1));
        let f = sol.frac_weights.unwrap();
        assert_eq!(&f[0] + &f[1], int(1));
    }

    #[test]
    fn fractional_separable_edges() {
        let inst = NetworkInstance::new(vec![1, 1, 1]).unwrap();
        let r = reqs(&[(&[0], 1), (&[0], 1), (&[1], 1), (&[1], 1), (&[2], 1), (&[2], 1)]);
        let sol = fractional_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.cost, int(3));
    }

    #[test]
    fn fractional_beats_integral_on_odd_cycle() {
        // triangle of edges, capacity 1 each, three requests covering pairs:
        // each edge carries two requests, so one must go; fractionally 1/2 each.
        let inst = NetworkInstance::new(vec![1, 1, 1]).unwrap();
        let r = reqs(&[(&[0, 1], 1), (&[1, 2], 1), (&[0, 2], 1)]);
        let frac = fractional_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        let int_sol = integral_opt_admission(&inst, &r, DEFAULT_BUDGET).unwrap();
        assert_eq!(frac.cost, ratio(3, 2));
        assert_eq!(int_sol.cost, int(2));
    }

    #[test]
    fn budget_enforced() {
        let inst = NetworkInstance::new(vec![1]).unwrap();
        let r: Vec<Request> = (0..5).map(|i| Request::new(i, vec![0], int(1)).unwrap()).collect();
        assert!(matches!(
            integral_opt_admission(&inst, &r, 4),
            Err(OracleError::BudgetExceeded { size: 5, budget: 4 })
        ));
    }

    #[test]
    fn multicover_examples() {
        let sc = SetCoverInstance::unit(2, vec![vec![0], vec![0, 1], vec![1]]).unwrap();
        let one = DemandSequence::new(2, vec![0]).unwrap();
        assert_eq!(opt_multicover(&sc, &one, DEFAULT_BUDGET).unwrap().cost, int(1));
        let two = DemandSequence::new(2, vec![0, 0]).unwrap();
        let sol = opt_multicover(&sc, &two, DEFAULT_BUDGET).unwrap();
        assert_eq!(sol.cost, int(2));
        assert_eq!(sol.ids, vec![0, 1]);
        let three = DemandSequence::new(2, vec![0, 0, 0]).unwrap();
        assert!(matches!(
            opt_multicover(&sc, &three, DEFAULT_BUDGET),
            Err(OracleError::Infeasible { element: 0, demand: 3, available: 2 })
        ));
        let none = DemandSequence::new(2, vec![]).unwrap();
        assert_eq!(opt_multicover(&sc, &none, DEFAULT_BUDGET).unwrap().cost, int(0));
    }
}
