use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use super::StochasticWorkflowNet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// Every place has an incoming arc.
    NoSource,
    NonUniqueSource {
        places: Vec<String>,
    },
    NoSink,
    NonUniqueSink {
        places: Vec<String>,
    },
    /// The initial marking is not exactly one token on the source.
    InitialMarking {
        marked: Vec<String>,
    },
    /// Nodes that stay off every source-to-sink path, so the net does not
    /// become strongly connected when sink is linked back to source.
    NotConnected {
        nodes: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSource => write!(f, "no source place (every place has an incoming arc)"),
            Violation::NonUniqueSource { places } => {
                write!(f, "non-unique source: {}", places.join(", "))
            }
            Violation::NoSink => write!(f, "no sink place (every place has an outgoing arc)"),
            Violation::NonUniqueSink { places } => {
                write!(f, "non-unique sink: {}", places.join(", "))
            }
            Violation::InitialMarking { marked } => write!(
                f,
                "initial marking must be one token on the source, found tokens on [{}]",
                marked.join(", ")
            ),
            Violation::NotConnected { nodes } => write!(
                f,
                "not strongly connected with a sink->source transition; off-path nodes: {}",
                nodes.join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "workflow net: ok");
        }
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        Ok(())
    }
}

/// Checks the workflow-net shape: unique source and sink, initial marking
/// `{source: 1}`, and strong connectivity once a transition `sink -> source`
/// is added.
pub fn validate_workflow(net: &StochasticWorkflowNet) -> ValidationReport {
    let np = net.places().len();
    let nt = net.transitions().len();
    let mut has_in = vec![false; np];
    let mut has_out = vec![false; np];
    for t in 0..nt {
        net.inputs(t).iter().for_each(|&(p, _)| has_out[p] = true);
        net.outputs(t).iter().for_each(|&(p, _)| has_in[p] = true);
    }
    let names = |flags: &[bool]| -> Vec<String> {
        flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| !f)
            .map(|(p, _)| net.places()[p].clone())
            .collect()
    };

    let mut violations = Vec::new();
    let sources = names(&has_in);
    match sources.len() {
        0 => violations.push(Violation::NoSource),
        1 => {}
        _ => violations.push(Violation::NonUniqueSource { places: sources }),
    }
    let sinks = names(&has_out);
    match sinks.len() {
        0 => violations.push(Violation::NoSink),
        1 => {}
        _ => violations.push(Violation::NonUniqueSink { places: sinks }),
    }

    let m0 = net.initial_marking();
    let shaped = match net.source() {
        Some(s) => (0..np).all(|p| m0.tokens(p) == u32::from(p == s)),
        None => false,
    };
    if !shaped {
        violations.push(Violation::InitialMarking {
            marked: m0
                .marked_places()
                .map(|p| net.places()[p].clone())
                .collect(),
        });
    }

    if let (Some(source), Some(sink)) = (net.source(), net.sink()) {
        let off = off_path_nodes(net, source, sink);
        if !off.is_empty() {
            violations.push(Violation::NotConnected { nodes: off });
        }
    }
    ValidationReport { violations }
}

/// Node ids not both reachable from `source` and co-reachable to `sink`.
/// Node numbering: places `0..np`, transitions `np..np + nt`.
fn off_path_nodes(net: &StochasticWorkflowNet, source: usize, sink: usize) -> Vec<String> {
    let np = net.places().len();
    let nt = net.transitions().len();
    let mut succ = vec![Vec::new(); np + nt];
    let mut pred = vec![Vec::new(); np + nt];
    for t in 0..nt {
        for &(p, _) in net.inputs(t) {
            succ[p].push(np + t);
            pred[np + t].push(p);
        }
        for &(p, _) in net.outputs(t) {
            succ[np + t].push(p);
            pred[p].push(np + t);
        }
    }
    let forward = reach(&succ, source);
    let backward = reach(&pred, sink);
    (0..np + nt)
        .filter(|&v| !(forward[v] && backward[v]))
        .map(|v| {
            if v < np {
                net.places()[v].clone()
            } else {
                net.transitions()[v - np].id.clone()
            }
        })
        .collect()
}

fn reach(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::tests::example_net;
    use crate::petrinet::NetBuilder;

    #[test]
    fn example_net_is_a_workflow_net() {
        assert!(validate_workflow(&example_net()).is_valid());
    }

    #[test]
    fn two_sinks() {
        let mut b = NetBuilder::new();
        b.place("i", None).place("o1", None).place("o2", None);
        b.transition("t", Some("a"), 1.0)
            .arc("i", "t", 1)
            .arc("t", "o1", 1)
            .arc("t", "o2", 1);
        let report = validate_workflow(&b.build().unwrap());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonUniqueSink { .. })));
        assert!(report.to_string().contains("non-unique sink"));
    }

    #[test]
    fn unreachable_middle_place() {
        // i -> t -> o, plus a cycle m -> u -> k -> v -> m hanging off nothing
        let mut b = NetBuilder::new();
        b.place("i", None)
            .place("m", None)
            .place("k", None)
            .place("o", None);
        b.transition("t", Some("a"), 1.0)
            .transition("u", Some("b"), 1.0)
            .transition("v", Some("c"), 1.0)
            .arc("i", "t", 1)
            .arc("t", "o", 1)
            .arc("m", "u", 1)
            .arc("u", "k", 1)
            .arc("k", "v", 1)
            .arc("v", "m", 1);
        let net = b.build().unwrap();
        let report = validate_workflow(&net);
        let off = report
            .violations
            .iter()
            .find_map(|v| match v {
                Violation::NotConnected { nodes } => Some(nodes.clone()),
                _ => None,
            })
            .expect("connectivity violation");
        // reachability oracle: from `i` only {i, t, o} are reachable
        let mut expected = vec!["m", "k", "u", "v"];
        expected.sort();
        let mut got: Vec<_> = off.iter().map(String::as_str).collect();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn bad_initial_marking() {
        let mut b = NetBuilder::new();
        b.place("i", Some(0)).place("o", Some(1));
        b.transition("t", Some("a"), 1.0)
            .arc("i", "t", 1)
            .arc("t", "o", 1);
        let report = validate_workflow(&b.build().unwrap());
        assert_eq!(
            report.violations,
            vec![Violation::InitialMarking {
                marked: vec!["o".into()]
            }]
        );
    }
}
