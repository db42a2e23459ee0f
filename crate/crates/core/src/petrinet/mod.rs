//! Stochastic workflow nets: immediate transitions with positive weights,
//! firing probability proportional to weight among the enabled set.

mod json;
mod pnml;
mod validate;

pub use json::{parse_net_json, to_net_json};
pub use pnml::{parse_pnml, parse_pnml_with_warnings, to_pnml};
pub use validate::{validate_workflow, ValidationReport, Violation};

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("malformed XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("malformed net JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed net document: {0}")]
    Malformed(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("arc {from} -> {to} references an unknown node")]
    DanglingArc { from: String, to: String },
    #[error("arc {from} -> {to} must connect a place and a transition")]
    InvalidArc { from: String, to: String },
    #[error(
        "transition `{transition}` has invalid weight {weight} (weights must be finite and > 0)"
    )]
    InvalidWeight { transition: String, weight: f64 },
    #[error("place `{place}` holds {tokens} tokens; nets must be 1-safe")]
    UnsafeMarking { place: String, tokens: u32 },
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("firing `{transition}` puts {tokens} tokens on `{place}` (net is not 1-safe)")]
    SafetyViolation {
        transition: String,
        place: String,
        tokens: u32,
    },
    #[error("weight vector has {got} entries, net has {expected} transitions")]
    WeightLength { expected: usize, got: usize },
    #[error("weight entry {index} is {value}; weights must be finite and > 0")]
    NonPositiveWeight { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: String,
    /// `None` marks a silent (tau) transition.
    pub label: Option<String>,
    pub weight: f64,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

/// Token counts indexed like [`StochasticWorkflowNet::places`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn tokens(&self, place: usize) -> u32 {
        self.0[place]
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// Indices of places holding at least one token.
    pub fn marked_places(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i)
    }
}

/// Transition weights in transition (document) order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, NetError> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(NetError::NonPositiveWeight { index, value });
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// An arc as declared in the input document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub source: String,
    pub target: String,
    pub multiplicity: u32,
}

/// A labelled stochastic workflow net. Immutable once built.
///
/// Source and sink are derived from the arc structure: the source is the
/// unique place without incoming arcs, the sink the unique place without
/// outgoing arcs. Nets violating uniqueness still load so that
/// [`validate_workflow`] can report what is wrong with them.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticWorkflowNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    /// Per transition: (place, multiplicity), sorted by place.
    inputs: Vec<Vec<(usize, u32)>>,
    outputs: Vec<Vec<(usize, u32)>>,
    initial: Marking,
    source: Option<usize>,
    sink: Option<usize>,
}

impl StochasticWorkflowNet {
    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, t: usize) -> &Transition {
        &self.transitions[t]
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.places.iter().position(|p| p == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn inputs(&self, t: usize) -> &[(usize, u32)] {
        &self.inputs[t]
    }

    pub fn outputs(&self, t: usize) -> &[(usize, u32)] {
        &self.outputs[t]
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    /// The unique place without incoming arcs, if there is exactly one.
    pub fn source(&self) -> Option<usize> {
        self.source
    }

    /// The unique place without outgoing arcs, if there is exactly one.
    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn weights(&self) -> WeightVector {
        WeightVector(self.transitions.iter().map(|t| t.weight).collect())
    }

    /// Distinct visible labels, in first-occurrence order.
    pub fn visible_labels(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for t in &self.transitions {
            if let Some(l) = t.label.as_deref() {
                if !seen.contains(&l) {
                    seen.push(l);
                }
            }
        }
        seen
    }

    pub fn arcs(&self) -> Vec<Arc> {
        let mut arcs = Vec::new();
        for (t, tr) in self.transitions.iter().enumerate() {
            for &(p, m) in &self.inputs[t] {
                arcs.push(Arc {
                    source: self.places[p].clone(),
                    target: tr.id.clone(),
                    multiplicity: m,
                });
            }
            for &(p, m) in &self.outputs[t] {
                arcs.push(Arc {
                    source: tr.id.clone(),
                    target: self.places[p].clone(),
                    multiplicity: m,
                });
            }
        }
        arcs
    }

    /// Builds a marking from the names of places holding one token each.
    pub fn marking_of(&self, marked: &[&str]) -> Option<Marking> {
        let mut counts = vec![0; self.places.len()];
        for name in marked {
            counts[self.place_index(name)?] += 1;
        }
        Some(Marking(counts))
    }

    pub fn is_enabled(&self, marking: &Marking, t: usize) -> bool {
        self.inputs[t].iter().all(|&(p, m)| marking.0[p] >= m)
    }

    /// Transitions enabled in `marking`, in transition order.
    pub fn enabled(&self, marking: &Marking) -> Vec<usize> {
        let mut out = Vec::new();
        self.enabled_into(marking, &mut out);
        out
    }

    /// Like [`enabled`](Self::enabled) but reuses `out`.
    pub fn enabled_into(&self, marking: &Marking, out: &mut Vec<usize>) {
        out.clear();
        out.extend((0..self.transitions.len()).filter(|&t| self.is_enabled(marking, t)));
    }

    /// `W(t) / sum of W(t')` over the transitions enabled in `marking`.
    pub fn firing_probability(&self, marking: &Marking, t: usize) -> Result<f64, NetError> {
        if !self.is_enabled(marking, t) {
            return Err(NetError::NotEnabled(self.transitions[t].id.clone()));
        }
        let total: f64 = self
            .enabled(marking)
            .iter()
            .map(|&u| self.transitions[u].weight)
            .sum();
        Ok(self.transitions[t].weight / total)
    }

    pub fn fire(&self, marking: &Marking, t: usize) -> Result<Marking, NetError> {
        let mut next = marking.clone();
        self.fire_in_place(&mut next, t)?;
        Ok(next)
    }

    /// Fires `t`, updating `marking`. On error the marking is left unchanged.
    pub fn fire_in_place(&self, marking: &mut Marking, t: usize) -> Result<(), NetError> {
        if !self.is_enabled(marking, t) {
            return Err(NetError::NotEnabled(self.transitions[t].id.clone()));
        }
        for &(p, m) in &self.inputs[t] {
            marking.0[p] -= m;
        }
        for &(p, m) in &self.outputs[t] {
            marking.0[p] += m;
        }
        if let Some(&(p, _)) = self.outputs[t].iter().find(|&&(p, _)| marking.0[p] > 1) {
            let tokens = marking.0[p];
            for &(q, m) in &self.outputs[t] {
                marking.0[q] -= m;
            }
            for &(q, m) in &self.inputs[t] {
                marking.0[q] += m;
            }
            return Err(NetError::SafetyViolation {
                transition: self.transitions[t].id.clone(),
                place: self.places[p].clone(),
                tokens,
            });
        }
        Ok(())
    }

    /// Draws one of `enabled` with probability proportional to its weight.
    pub fn sample_enabled<R: Rng + ?Sized>(&self, enabled: &[usize], rng: &mut R) -> usize {
        debug_assert!(!enabled.is_empty());
        let total: f64 = enabled.iter().map(|&t| self.transitions[t].weight).sum();
        let mut u = rng.random::<f64>() * total;
        for &t in enabled {
            u -= self.transitions[t].weight;
            if u < 0.0 {
                return t;
            }
        }
        // rounding left u marginally non-negative
        *enabled.last().unwrap()
    }

    /// Same structure, weights replaced by `weights`.
    pub fn with_weights(&self, weights: &WeightVector) -> Result<Self, NetError> {
        if weights.len() != self.transitions.len() {
            return Err(NetError::WeightLength {
                expected: self.transitions.len(),
                got: weights.len(),
            });
        }
        let mut net = self.clone();
        for (t, &w) in net.transitions.iter_mut().zip(weights.as_slice()) {
            t.weight = w;
        }
        Ok(net)
    }

    /// Whether `marking` has a token on the sink place.
    pub fn sink_marked(&self, marking: &Marking) -> bool {
        self.sink.is_some_and(|s| marking.0[s] > 0)
    }

    /// Plays the net out from the initial marking until deadlock. Returns the
    /// visible trace when the run ends with the sink marked, `None` when it
    /// deadlocks elsewhere or exceeds `max_firings`.
    pub fn play_out<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_firings: usize,
    ) -> Result<Option<Vec<String>>, NetError> {
        let mut marking = self.initial.clone();
        let mut enabled = Vec::new();
        let mut trace = Vec::new();
        for _ in 0..=max_firings {
            self.enabled_into(&marking, &mut enabled);
            if enabled.is_empty() {
                return Ok(self.sink_marked(&marking).then_some(trace));
            }
            let t = self.sample_enabled(&enabled, rng);
            self.fire_in_place(&mut marking, t)?;
            if let Some(l) = &self.transitions[t].label {
                trace.push(l.clone());
            }
        }
        Ok(None)
    }
}

/// Incremental construction used by the parsers.
#[derive(Debug, Default)]
pub struct NetBuilder {
    places: Vec<(String, Option<u32>)>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// `tokens = None` leaves the initial marking of the place undeclared.
    pub fn place(&mut self, id: impl Into<String>, tokens: Option<u32>) -> &mut Self {
        self.places.push((id.into(), tokens));
        self
    }

    pub fn transition(
        &mut self,
        id: impl Into<String>,
        label: Option<&str>,
        weight: f64,
    ) -> &mut Self {
        self.transitions.push(Transition {
            id: id.into(),
            label: label.filter(|l| !l.is_empty()).map(str::to_owned),
            weight,
        });
        self
    }

    pub fn arc(
        &mut self,
        source: impl Into<String>,
        target: impl Into<String>,
        multiplicity: u32,
    ) -> &mut Self {
        self.arcs.push(Arc {
            source: source.into(),
            target: target.into(),
            multiplicity,
        });
        self
    }

    pub fn build(&self) -> Result<StochasticWorkflowNet, NetError> {
        enum Node {
            Place(usize),
            Transition(usize),
        }
        let mut ids: HashMap<&str, Node> = HashMap::new();
        for (i, (id, _)) in self.places.iter().enumerate() {
            if ids.insert(id, Node::Place(i)).is_some() {
                return Err(NetError::DuplicateId(id.clone()));
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if ids.insert(&t.id, Node::Transition(i)).is_some() {
                return Err(NetError::DuplicateId(t.id.clone()));
            }
            if !(t.weight.is_finite() && t.weight > 0.0) {
                return Err(NetError::InvalidWeight {
                    transition: t.id.clone(),
                    weight: t.weight,
                });
            }
        }

        let nt = self.transitions.len();
        let np = self.places.len();
        let mut inputs: Vec<HashMap<usize, u32>> = vec![HashMap::new(); nt];
        let mut outputs: Vec<HashMap<usize, u32>> = vec![HashMap::new(); nt];
        for arc in self.arcs.iter().filter(|a| a.multiplicity > 0) {
            let (Some(s), Some(t)) = (ids.get(arc.source.as_str()), ids.get(arc.target.as_str()))
            else {
                return Err(NetError::DanglingArc {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                });
            };
            match (s, t) {
                (Node::Place(p), Node::Transition(t)) => {
                    *inputs[*t].entry(*p).or_default() += arc.multiplicity
                }
                (Node::Transition(t), Node::Place(p)) => {
                    *outputs[*t].entry(*p).or_default() += arc.multiplicity
                }
                _ => {
                    return Err(NetError::InvalidArc {
                        from: arc.source.clone(),
                        to: arc.target.clone(),
                    })
                }
            }
        }
        let sorted = |m: HashMap<usize, u32>| {
            let mut v: Vec<_> = m.into_iter().collect();
            v.sort_unstable();
            v
        };
        let inputs: Vec<Vec<(usize, u32)>> = inputs.into_iter().map(sorted).collect();
        let outputs: Vec<Vec<(usize, u32)>> = outputs.into_iter().map(sorted).collect();

        let mut has_in = vec![false; np];
        let mut has_out = vec![false; np];
        for t in 0..nt {
            inputs[t].iter().for_each(|&(p, _)| has_out[p] = true);
            outputs[t].iter().for_each(|&(p, _)| has_in[p] = true);
        }
        let unique = |flags: &[bool]| {
            let mut it = flags
                .iter()
                .enumerate()
                .filter(|(_, &f)| !f)
                .map(|(i, _)| i);
            match (it.next(), it.next()) {
                (Some(p), None) => Some(p),
                _ => None,
            }
        };
        let source = unique(&has_in);
        let sink = unique(&has_out);

        let declared = self.places.iter().any(|(_, tokens)| tokens.is_some());
        let mut initial = vec![0u32; np];
        if declared {
            for (i, (id, tokens)) in self.places.iter().enumerate() {
                let tokens = tokens.unwrap_or(0);
                if tokens > 1 {
                    return Err(NetError::UnsafeMarking {
                        place: id.clone(),
                        tokens,
                    });
                }
                initial[i] = tokens;
            }
        } else if let Some(s) = source {
            initial[s] = 1;
        }

        Ok(StochasticWorkflowNet {
            places: self.places.iter().map(|(id, _)| id.clone()).collect(),
            transitions: self.transitions.clone(),
            inputs,
            outputs,
            initial: Marking(initial),
            source,
            sink,
        })
    }
}

impl fmt::Display for StochasticWorkflowNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sWN with {} places, {} transitions ({} silent)",
            self.places.len(),
            self.transitions.len(),
            self.transitions.iter().filter(|t| t.is_silent()).count()
        )
    }
}
