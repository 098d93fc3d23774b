//! Decision traces: the ordered event log every online run produces.

use std::collections::BTreeSet;

use num::Zero;
use serde::Serialize;

use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrive,
    /// Accepted by the rounding layer (may still be preempted later).
    Accept,
    /// Accepted for good (cost above the big-request threshold).
    AcceptPermanent,
    /// Rejected on arrival because its cost is below the small-request threshold.
    RejectImmediate,
    /// A previously accepted request is rejected.
    Preempt,
    /// The arriving request is rejected.
    RejectOnArrival,
    WeightAugment,
    AlphaDouble,
    SetChosen,
}

impl EventKind {
    pub fn is_accept(self) -> bool {
        matches!(self, EventKind::Accept | EventKind::AcceptPermanent)
    }

    pub fn is_reject(self) -> bool {
        matches!(
            self,
            EventKind::RejectImmediate | EventKind::Preempt | EventKind::RejectOnArrival
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub request: Option<usize>,
    pub edge: Option<usize>,
    pub set: Option<usize>,
    pub delta: Rational,
    pub cumulative: Rational,
}

#[derive(Serialize)]
struct EventLine<'a> {
    kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    request: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    set: Option<usize>,
    delta: &'a str,
    cumulative: &'a str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionTrace {
    events: Vec<TraceEvent>,
    cumulative: Rational,
}

impl DecisionTrace {
    pub fn new() -> Self {
        Self {
            events: Vec::new(),
            cumulative: Rational::zero(),
        }
    }

    pub fn push(&mut self, kind: EventKind, request: Option<usize>, delta: Rational) {
        self.push_full(kind, request, None, None, delta);
    }

    pub fn push_full(
        &mut self,
        kind: EventKind,
        request: Option<usize>,
        edge: Option<usize>,
        set: Option<usize>,
        delta: Rational,
    ) {
        self.cumulative += &delta;
        self.events.push(TraceEvent {
            kind,
            request,
            edge,
            set,
            delta,
            cumulative: self.cumulative.clone(),
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn cumulative(&self) -> &Rational {
        &self.cumulative
    }

    /// Request ids with at least one reject-type event, ascending.
    pub fn rejected_requests(&self) -> BTreeSet<usize> {
        self.events
            .iter()
            .filter(|e| e.kind.is_reject())
            .filter_map(|e| e.request)
            .collect()
    }

    /// First request that is accepted after having been rejected, if any.
    pub fn irrevocability_violation(&self) -> Option<usize> {
        let mut rejected = BTreeSet::new();
        for e in &self.events {
            let Some(r) = e.request else { continue };
            if e.kind.is_reject() {
                rejected.insert(r);
            } else if e.kind.is_accept() && rejected.contains(&r) {
                return Some(r);
            }
        }
        None
    }

    /// One JSON object per line, each terminated by `\n`.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let delta = format_rational(&e.delta);
            let cumulative = format_rational(&e.cumulative);
            let line = EventLine {
                kind: e.kind,
                request: e.request,
                edge: e.edge,
                set: e.set,
                delta: &delta,
                cumulative: &cumulative,
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }
}
