//! JSON mirror of the PNML subset (files named `*.net.json`):
//!
//! ```json
//! {
//!   "places": ["source", "p", "sink"],
//!   "transitions": [{"id": "t1", "label": "a"}, {"id": "t2", "label": null}],
//!   "arcs": [{"source": "source", "target": "t1"}, {"source": "t1", "target": "p", "multiplicity": 1}],
//!   "weights": [1.0, 0.5],
//!   "initial_marking": {"source": 1}
//! }
//! ```
//!
//! `weights` and `initial_marking` are optional.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NetBuilder, NetError, StochasticWorkflowNet};

#[derive(Debug, Serialize, Deserialize)]
struct NetDoc {
    places: Vec<String>,
    transitions: Vec<TransitionDoc>,
    arcs: Vec<ArcDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_marking: Option<BTreeMap<String, u32>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionDoc {
    id: String,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArcDoc {
    source: String,
    target: String,
    #[serde(default = "one")]
    multiplicity: u32,
}

fn one() -> u32 {
    1
}

pub fn parse_net_json(text: &str) -> Result<StochasticWorkflowNet, NetError> {
    let doc: NetDoc = serde_json::from_str(text)?;
    if let Some(w) = &doc.weights {
        if w.len() != doc.transitions.len() {
            return Err(NetError::WeightLength {
                expected: doc.transitions.len(),
                got: w.len(),
            });
        }
    }
    if let Some(m) = &doc.initial_marking {
        if let Some(p) = m.keys().find(|p| !doc.places.contains(p)) {
            return Err(NetError::Malformed(format!(
                "initial marking names unknown place `{p}`"
            )));
        }
    }
    let mut b = NetBuilder::new();
    for p in &doc.places {
        let tokens = doc
            .initial_marking
            .as_ref()
            .map(|m| m.get(p).copied().unwrap_or(0));
        b.place(p.clone(), tokens);
    }
    for (i, t) in doc.transitions.iter().enumerate() {
        let w = doc.weights.as_ref().map_or(1.0, |w| w[i]);
        b.transition(t.id.clone(), t.label.as_deref(), w);
    }
    for a in &doc.arcs {
        b.arc(a.source.clone(), a.target.clone(), a.multiplicity);
    }
    b.build()
}

pub fn to_net_json(net: &StochasticWorkflowNet) -> String {
    let initial = net
        .places()
        .iter()
        .enumerate()
        .filter(|&(p, _)| net.initial_marking().tokens(p) > 0)
        .map(|(p, id)| (id.clone(), net.initial_marking().tokens(p)))
        .collect();
    let doc = NetDoc {
        places: net.places().to_vec(),
        transitions: net
            .transitions()
            .iter()
            .map(|t| TransitionDoc {
                id: t.id.clone(),
                label: t.label.clone(),
            })
            .collect(),
        arcs: net
            .arcs()
            .into_iter()
            .map(|a| ArcDoc {
                source: a.source,
                target: a.target,
                multiplicity: a.multiplicity,
            })
            .collect(),
        weights: Some(net.weights().into_inner()),
        initial_marking: Some(initial),
    };
    serde_json::to_string_pretty(&doc).expect("net document serializes")
}
