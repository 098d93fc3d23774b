//! Instances, requests and demand sequences, plus their JSON file formats.
//!
//! Network files look like
//! `{"edges":[{"id":0,"cap":1}],"requests":[{"edges":[0],"cost":"3/2"}]}` and
//! set-cover files like `{"n":2,"sets":[{"elements":[0],"cost":"1"}],"demands":[0]}`.
//! Edge, set and element ids are dense and 0-based.

use num::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::rational::{Cost, Rational};

pub type EdgeId = usize;
pub type RequestId = usize;
pub type SetId = usize;
pub type ElementId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("{locus}: {message}")]
    Invalid { locus: String, message: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

impl ModelError {
    fn invalid(locus: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Invalid {
            locus: locus.into(),
            message: message.into(),
        }
    }

    fn syntax(e: serde_json::Error) -> Self {
        ModelError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Edge capacities of the network. Topology is irrelevant to the algorithms,
/// only the edge set and its capacities are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkInstance {
    capacities: Vec<u64>,
    max_capacity: u64,
}

impl NetworkInstance {
    pub fn new(capacities: Vec<u64>) -> Result<Self, ModelError> {
        if capacities.is_empty() {
            return Err(ModelError::invalid("edges", "instance needs at least one edge"));
        }
        if let Some(e) = capacities.iter().position(|&c| c == 0) {
            return Err(ModelError::invalid(
                format!("edges[{e}].cap"),
                "capacity must be positive",
            ));
        }
        let max_capacity = *capacities.iter().max().unwrap();
        Ok(Self {
            capacities,
            max_capacity,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacity(&self, edge: EdgeId) -> u64 {
        self.capacities[edge]
    }

    pub fn capacities(&self) -> &[u64] {
        &self.capacities
    }

    pub fn max_capacity(&self) -> u64 {
        self.max_capacity
    }

    /// `m * c`, the product that appears in every threshold.
    pub fn mc(&self) -> u64 {
        self.edge_count() as u64 * self.max_capacity
    }

    /// Recomputes the derived fields and compares them with the stored ones.
    pub fn check(&self) -> bool {
        self.capacities.iter().all(|&c| c >= 1)
            && self.capacities.iter().copied().max() == Some(self.max_capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Phase {
    #[default]
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: RequestId,
    edges: Vec<EdgeId>,
    cost: Rational,
    pub phase: Phase,
}

impl Request {
    /// Edge list is sorted; duplicates and nonpositive costs are rejected.
    pub fn new(id: RequestId, mut edges: Vec<EdgeId>, cost: Rational) -> Result<Self, ModelError> {
        let locus = format!("requests[{id}]");
        if edges.is_empty() {
            return Err(ModelError::invalid(format!("{locus}.edges"), "request has no edges"));
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::invalid(format!("{locus}.edges"), "duplicate edge id"));
        }
        if !cost.is_positive() {
            return Err(ModelError::invalid(format!("{locus}.cost"), "cost must be positive"));
        }
        Ok(Self {
            id,
            edges,
            cost,
            phase: Phase::One,
        })
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn cost(&self) -> &Rational {
        &self.cost
    }

    pub fn contains(&self, edge: EdgeId) -> bool {
        self.edges.binary_search(&edge).is_ok()
    }
}

pub fn validate_requests(instance: &NetworkInstance, requests: &[Request]) -> Result<(), ModelError> {
    for (pos, r) in requests.iter().enumerate() {
        if r.id != pos {
            return Err(ModelError::invalid(
                format!("requests[{pos}]"),
                format!("request id {} out of arrival order", r.id),
            ));
        }
        for (k, &e) in r.edges.iter().enumerate() {
            if e >= instance.edge_count() {
                return Err(ModelError::invalid(
                    format!("requests[{pos}].edges[{k}]"),
                    format!("edge id out of range ({e} >= {})", instance.edge_count()),
                ));
            }
        }
    }
    Ok(())
}

/// Largest excess `|REQ_e| - c_e` over all edges, floored at zero. For unit
/// costs this is a lower bound on the optimal number of rejections.
pub fn max_excess_q(instance: &NetworkInstance, requests: &[Request]) -> u64 {
    let mut counts = vec![0u64; instance.edge_count()];
    for r in requests {
        for &e in r.edges() {
            counts[e] += 1;
        }
    }
    counts
        .iter()
        .zip(instance.capacities())
        .map(|(&n, &c)| n.saturating_sub(c))
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverInstance {
    element_count: usize,
    sets: Vec<Vec<ElementId>>,
    set_costs: Vec<Rational>,
    membership: Vec<Vec<SetId>>,
}

impl SetCoverInstance {
    pub fn new(
        element_count: usize,
        sets: Vec<Vec<ElementId>>,
        set_costs: Vec<Rational>,
    ) -> Result<Self, ModelError> {
        if element_count == 0 {
            return Err(ModelError::invalid("n", "ground set must be nonempty"));
        }
        if sets.len() != set_costs.len() {
            return Err(ModelError::invalid("sets", "one cost per set required"));
        }
        let mut normalized = Vec::with_capacity(sets.len());
        let mut membership = vec![Vec::new(); element_count];
        for (s, mut elements) in sets.into_iter().enumerate() {
            if elements.is_empty() {
                return Err(ModelError::invalid(format!("sets[{s}].elements"), "empty set"));
            }
            elements.sort_unstable();
            elements.dedup();
            for &j in &elements {
                if j >= element_count {
                    return Err(ModelError::invalid(
                        format!("sets[{s}].elements"),
                        format!("element id out of range ({j} >= {element_count})"),
                    ));
                }
                membership[j].push(s);
            }
            if !set_costs[s].is_positive() {
                return Err(ModelError::invalid(format!("sets[{s}].cost"), "cost must be positive"));
            }
            normalized.push(elements);
        }
        if let Some(j) = membership.iter().position(Vec::is_empty) {
            return Err(ModelError::invalid(
                format!("element {j}"),
                "uncoverable element (contained in no set)",
            ));
        }
        Ok(Self {
            element_count,
            sets: normalized,
            set_costs,
            membership,
        })
    }

    pub fn unit(element_count: usize, sets: Vec<Vec<ElementId>>) -> Result<Self, ModelError> {
        let costs = vec![Rational::one(); sets.len()];
        Self::new(element_count, sets, costs)
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, s: SetId) -> &[ElementId] {
        &self.sets[s]
    }

    pub fn sets(&self) -> &[Vec<ElementId>] {
        &self.sets
    }

    pub fn set_cost(&self, s: SetId) -> &Rational {
        &self.set_costs[s]
    }

    pub fn set_costs(&self) -> &[Rational] {
        &self.set_costs
    }

    /// Sets containing element `j`, ascending.
    pub fn sets_containing(&self, j: ElementId) -> &[SetId] {
        &self.membership[j]
    }

    pub fn is_unit_cost(&self) -> bool {
        self.set_costs.iter().all(|c| c.is_one())
    }

    pub fn check_membership(&self) -> bool {
        let mut rebuilt = vec![Vec::new(); self.element_count];
        for (s, elements) in self.sets.iter().enumerate() {
            for &j in elements {
                rebuilt[j].push(s);
            }
        }
        rebuilt == self.membership
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandSequence {
    element_count: usize,
    demands: Vec<ElementId>,
}

impl DemandSequence {
    pub fn new(element_count: usize, demands: Vec<ElementId>) -> Result<Self, ModelError> {
        if let Some(pos) = demands.iter().position(|&j| j >= element_count) {
            return Err(ModelError::invalid(
                format!("demands[{pos}]"),
                format!("demand for unknown element {}", demands[pos]),
            ));
        }
        Ok(Self {
            element_count,
            demands,
        })
    }

    pub fn demands(&self) -> &[ElementId] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    /// Final demand count `k_j` per element.
    pub fn counts(&self) -> Vec<u64> {
        self.prefix_counts(self.demands.len())
    }

    /// Demand counts after the first `len` arrivals.
    pub fn prefix_counts(&self, len: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.element_count];
        for &j in &self.demands[..len] {
            counts[j] += 1;
        }
        counts
    }

    /// Yields `(element, k)` where `k` is the running count including this arrival.
    pub fn running(&self) -> impl Iterator<Item = (ElementId, u64)> + '_ {
        let mut counts = vec![0u64; self.element_count];
        self.demands.iter().map(move |&j| {
            counts[j] += 1;
            (j, counts[j])
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: i64,
    cap: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestDoc {
    edges: Vec<i64>,
    cost: Cost,
    #[serde(default, skip_serializing_if = "is_phase_one")]
    phase: Phase,
}

fn is_phase_one(p: &Phase) -> bool {
    *p == Phase::One
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    edges: Vec<EdgeDoc>,
    requests: Vec<RequestDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetDoc {
    elements: Vec<i64>,
    cost: Cost,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetCoverDoc {
    n: i64,
    sets: Vec<SetDoc>,
    #[serde(default)]
    demands: Vec<i64>,
}

fn to_index(v: i64, locus: &str) -> Result<usize, ModelError> {
    usize::try_from(v).map_err(|_| ModelError::invalid(locus, format!("negative id {v}")))
}

pub fn load_network(text: &str) -> Result<(NetworkInstance, Vec<Request>), ModelError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(ModelError::syntax)?;
    let m = doc.edges.len();
    let mut caps: Vec<Option<u64>> = vec![None; m];
    for (k, edge) in doc.edges.iter().enumerate() {
        let locus = format!("edges[{k}]");
        let id = to_index(edge.id, &format!("{locus}.id"))?;
        if id >= m {
            return Err(ModelError::invalid(
                format!("{locus}.id"),
                format!("edge ids must be dense 0..{m}, got {id}"),
            ));
        }
        if caps[id].is_some() {
            return Err(ModelError::invalid(format!("{locus}.id"), format!("duplicate edge id {id}")));
        }
        if edge.cap <= 0 {
            return Err(ModelError::invalid(format!("{locus}.cap"), "capacity must be positive"));
        }
        caps[id] = Some(edge.cap as u64);
    }
    let instance = NetworkInstance::new(caps.into_iter().map(|c| c.unwrap()).collect())?;
    let mut requests = Vec::with_capacity(doc.requests.len());
    for (i, r) in doc.requests.into_iter().enumerate() {
        let mut edges = Vec::with_capacity(r.edges.len());
        for (k, &e) in r.edges.iter().enumerate() {
            let locus = format!("requests[{i}].edges[{k}]");
            let e = to_index(e, &locus)?;
            if e >= m {
                return Err(ModelError::invalid(locus, format!("edge id out of range ({e} >= {m})")));
            }
            edges.push(e);
        }
        requests.push(Request::new(i, edges, r.cost.0)?.with_phase(r.phase));
    }
    Ok((instance, requests))
}

pub fn network_to_json(instance: &NetworkInstance, requests: &[Request]) -> String {
    let doc = NetworkDoc {
        edges: instance
            .capacities()
            .iter()
            .enumerate()
            .map(|(id, &cap)| EdgeDoc {
                id: id as i64,
                cap: cap as i64,
            })
            .collect(),
        requests: requests
            .iter()
            .map(|r| RequestDoc {
                edges: r.edges().iter().map(|&e| e as i64).collect(),
                cost: Cost(r.cost().clone()),
                phase: r.phase,
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("serializable")
}

pub fn load_setcover(text: &str) -> Result<(SetCoverInstance, DemandSequence), ModelError> {
    let doc: SetCoverDoc = serde_json::from_str(text).map_err(ModelError::syntax)?;
    if doc.n <= 0 {
        return Err(ModelError::invalid("n", "ground set must be nonempty"));
    }
    let n = doc.n as usize;
    let mut sets = Vec::with_capacity(doc.sets.len());
    let mut costs = Vec::with_capacity(doc.sets.len());
    for (s, set) in doc.sets.into_iter().enumerate() {
        let mut elements = Vec::with_capacity(set.elements.len());
        for (k, &j) in set.elements.iter().enumerate() {
            elements.push(to_index(j, &format!("sets[{s}].elements[{k}]"))?);
        }
        sets.push(elements);
        costs.push(set.cost.0);
    }
    let instance = SetCoverInstance::new(n, sets, costs)?;
    let mut demands = Vec::with_capacity(doc.demands.len());
    for (k, &j) in doc.demands.iter().enumerate() {
        demands.push(to_index(j, &format!("demands[{k}]"))?);
    }
    let demands = DemandSequence::new(n, demands)?;
    Ok((instance, demands))
}

pub fn setcover_to_json(instance: &SetCoverInstance, demands: &DemandSequence) -> String {
    let doc = SetCoverDoc {
        n: instance.element_count() as i64,
        sets: instance
            .sets()
            .iter()
            .zip(instance.set_costs())
            .map(|(elements, cost)| SetDoc {
                elements: elements.iter().map(|&j| j as i64).collect(),
                cost: Cost(cost.clone()),
            })
            .collect(),
        demands: demands.demands().iter().map(|&j| j as i64).collect(),
    };
    serde_json::to_string(&doc).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn smallest_network() {
        let text = r#"{"edges":[{"id":0,"cap":1}],"requests":[{"edges":[0],"cost":"1"},{"edges":[0],"cost":1}]}"#;
        let (inst, reqs) = load_network(text).unwrap();
        assert_eq!(inst.edge_count(), 1);
        assert_eq!(inst.max_capacity(), 1);
        assert_eq!(reqs.len(), 2);
        assert_eq!(reqs[1].cost(), &int(1));
    }

    #[test]
    fn edge_out_of_range_is_located() {
        let text = r#"{"edges":[{"id":0,"cap":1},{"id":1,"cap":1},{"id":2,"cap":1}],
                       "requests":[{"edges":[5],"cost":"1"}]}"#;
        let err = load_network(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("edge id out of range"), "{msg}");
        assert!(msg.contains("requests[0].edges[0]"), "{msg}");
    }

    #[test]
    fn max_capacity_and_bad_capacity() {
        let text = r#"{"edges":[{"id":1,"cap":3},{"id":0,"cap":2}],"requests":[]}"#;
        let (inst, _) = load_network(text).unwrap();
        assert_eq!(inst.capacities(), &[2, 3]);
        assert_eq!(inst.max_capacity(), 3);
        assert!(inst.check());
        let bad = r#"{"edges":[{"id":0,"cap":0}],"requests":[]}"#;
        assert!(load_network(bad).unwrap_err().to_string().contains("edges[0].cap"));
        let syntax = r#"{"edges":[{"id":0,"cap":1}],"#;
        assert!(matches!(load_network(syntax), Err(ModelError::Syntax { .. })));
    }

    #[test]
    fn decimal_and_fraction_costs() {
        let text = r#"{"edges":[{"id":0,"cap":1}],"requests":[{"edges":[0],"cost":"3/2"},{"edges":[0],"cost":"0.75"}]}"#;
        let (_, reqs) = load_network(text).unwrap();
        assert_eq!(reqs[0].cost(), &ratio(3, 2));
        assert_eq!(reqs[1].cost(), &ratio(3, 4));
        let zero = r#"{"edges":[{"id":0,"cap":1}],"requests":[{"edges":[0],"cost":"0"}]}"#;
        assert!(load_network(zero).is_err());
    }

    #[test]
    fn setcover_load() {
        let text = r#"{"n":2,"sets":[{"elements":[0],"cost":"1"},{"elements":[0,1],"cost":"1"},{"elements":[1],"cost":"1"}],"demands":[0]}"#;
        let (sc, demands) = load_setcover(text).unwrap();
        assert_eq!(sc.element_count(), 2);
        assert_eq!(sc.set_count(), 3);
        assert_eq!(sc.sets_containing(0), &[0, 1]);
        assert!(sc.check_membership());
        assert_eq!(demands.counts(), vec![1, 0]);
    }

    #[test]
    fn setcover_errors() {
        let uncoverable = r#"{"n":2,"sets":[{"elements":[0],"cost":"1"}],"demands":[]}"#;
        assert!(load_setcover(uncoverable).unwrap_err().to_string().contains("uncoverable element"));
        let empty = r#"{"n":1,"sets":[{"elements":[],"cost":"1"}],"demands":[]}"#;
        assert!(load_setcover(empty).unwrap_err().to_string().contains("empty set"));
        let unknown = r#"{"n":1,"sets":[{"elements":[0],"cost":"1"}],"demands":[3]}"#;
        assert!(load_setcover(unknown).unwrap_err().to_string().contains("unknown element"));
    }

    #[test]
    fn repeated_demands_count_up() {
        let d = DemandSequence::new(1, vec![0, 0, 0]).unwrap();
        let running: Vec<_> = d.running().collect();
        assert_eq!(running, vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(d.counts(), vec![3]);
    }

    #[test]
    fn excess_q() {
        let one = NetworkInstance::new(vec![1]).unwrap();
        let reqs: Vec<_> = (0..3).map(|i| Request::new(i, vec![0], int(1)).unwrap()).collect();
        assert_eq!(max_excess_q(&one, &reqs), 2);
        assert_eq!(max_excess_q(&one, &reqs[..1]), 0);

        // caps [1,2], four requests on edge 0 and two on edge 1
        let two = NetworkInstance::new(vec![1, 2]).unwrap();
        let mut reqs = Vec::new();
        for i in 0..4 {
            let edges = if i < 2 { vec![0, 1] } else { vec![0] };
            reqs.push(Request::new(i, edges, int(1)).unwrap());
        }
        // brute force: per edge counts minus capacity
        let expected = two
            .capacities()
            .iter()
            .enumerate()
            .map(|(e, &c)| {
                let n = reqs.iter().filter(|r| r.contains(e)).count() as i64;
                (n - c as i64).max(0)
            })
            .max()
            .unwrap();
        assert_eq!(expected, 3);
        assert_eq!(max_excess_q(&two, &reqs), 3);
    }
}
