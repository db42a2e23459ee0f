#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swnabc::eventlog::parse_csv;
use swnabc::petrinet::parse_pnml;
use swnabc::{LogLanguage, NetBuilder, StochasticWorkflowNet};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// The four-trace running example: net with weights 1, 0.3, 0.35, 0.35, 1
/// and a log of 100 cases.
pub fn running_example() -> (StochasticWorkflowNet, LogLanguage) {
    let net =
        parse_pnml(&std::fs::read_to_string(data_path("running-example.pnml")).unwrap()).unwrap();
    let log =
        parse_csv(&std::fs::read_to_string(data_path("running-example.csv")).unwrap()).unwrap();
    (net, log)
}

fn build(
    places: &[&str],
    transitions: &[(&str, Option<&str>, f64)],
    arcs: &[(&str, &str)],
) -> StochasticWorkflowNet {
    let mut b = NetBuilder::new();
    for p in places {
        b.place(*p, None);
    }
    for (id, label, w) in transitions {
        b.transition(*id, *label, *w);
    }
    for (s, t) in arcs {
        b.arc(*s, *t, 1);
    }
    b.build().unwrap()
}

/// Rework loop: a, then b or c, repeated through a silent redo, then d.
pub fn rework_loop_net() -> StochasticWorkflowNet {
    build(
        &["i", "p1", "p2", "o"],
        &[
            ("ta", Some("a"), 1.0),
            ("tb", Some("b"), 0.6),
            ("tc", Some("c"), 0.4),
            ("redo", None, 0.3),
            ("td", Some("d"), 0.7),
        ],
        &[
            ("i", "ta"),
            ("ta", "p1"),
            ("p1", "tb"),
            ("p1", "tc"),
            ("tb", "p2"),
            ("tc", "p2"),
            ("p2", "redo"),
            ("redo", "p1"),
            ("p2", "td"),
            ("td", "o"),
        ],
    )
}

/// Two parallel branches after a: b with a visible repeat e, and c or d.
/// A silent exit closes the loop branch; f joins.
pub fn parallel_loop_net() -> StochasticWorkflowNet {
    build(
        &["i", "p1", "p2", "p3", "p4", "p5", "o"],
        &[
            ("ta", Some("a"), 1.0),
            ("tb", Some("b"), 1.0),
            ("te", Some("e"), 0.25),
            ("exit", None, 0.75),
            ("tc", Some("c"), 0.5),
            ("td", Some("d"), 0.2),
            ("tf", Some("f"), 1.0),
        ],
        &[
            ("i", "ta"),
            ("ta", "p1"),
            ("ta", "p2"),
            ("p1", "tb"),
            ("tb", "p3"),
            ("p3", "te"),
            ("te", "p1"),
            ("p3", "exit"),
            ("exit", "p5"),
            ("p2", "tc"),
            ("p2", "td"),
            ("tc", "p4"),
            ("td", "p4"),
            ("p4", "tf"),
            ("p5", "tf"),
            ("tf", "o"),
        ],
    )
}

/// Log of `cases` simulated traces of `net`.
pub fn sample_log(net: &StochasticWorkflowNet, cases: usize, seed: u64) -> LogLanguage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    let mut done = 0;
    while done < cases {
        if let Some(t) = net.play_out(&mut rng, 10_000).unwrap() {
            *counts.entry(t).or_default() += 1;
            done += 1;
        }
    }
    LogLanguage::from_traces(counts).unwrap()
}

#[derive(Debug, Clone)]
enum Tree {
    Leaf(String),
    Seq(Vec<Tree>),
    Xor(Vec<Tree>),
    And(Vec<Tree>),
}

impl Tree {
    fn transitions(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Seq(c) | Tree::Xor(c) => c.iter().map(Tree::transitions).sum(),
            Tree::And(c) => 2 + c.iter().map(Tree::transitions).sum::<usize>(),
        }
    }
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> Tree {
    const LETTERS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
    if depth == 0 || rng.random_bool(0.4) {
        return Tree::Leaf(LETTERS[rng.random_range(0..LETTERS.len())].to_string());
    }
    let children = (0..rng.random_range(2..=3))
        .map(|_| random_tree(rng, depth - 1))
        .collect();
    match rng.random_range(0..3) {
        0 => Tree::Seq(children),
        1 => Tree::Xor(children),
        _ => Tree::And(children),
    }
}

struct Emitter {
    b: NetBuilder,
    places: usize,
    transitions: usize,
}

impl Emitter {
    fn place(&mut self) -> String {
        self.places += 1;
        let id = format!("p{}", self.places);
        self.b.place(id.clone(), None);
        id
    }

    fn transition(&mut self, label: Option<&str>, rng: &mut ChaCha8Rng) -> String {
        self.transitions += 1;
        let id = format!("t{}", self.transitions);
        self.b
            .transition(id.clone(), label, rng.random_range(0.1..1.0));
        id
    }

    fn emit(&mut self, tree: &Tree, entry: &str, exit: &str, rng: &mut ChaCha8Rng) {
        match tree {
            Tree::Leaf(l) => {
                let t = self.transition(Some(l), rng);
                self.b.arc(entry, t.clone(), 1).arc(t, exit, 1);
            }
            Tree::Seq(children) => {
                let mut from = entry.to_string();
                for (i, c) in children.iter().enumerate() {
                    let to = if i + 1 == children.len() {
                        exit.to_string()
                    } else {
                        self.place()
                    };
                    self.emit(c, &from, &to, rng);
                    from = to;
                }
            }
            Tree::Xor(children) => {
                for c in children {
                    self.emit(c, entry, exit, rng);
                }
            }
            Tree::And(children) => {
                let split = self.transition(None, rng);
                let join = self.transition(None, rng);
                self.b
                    .arc(entry, split.clone(), 1)
                    .arc(join.clone(), exit, 1);
                for c in children {
                    let (i, o) = (self.place(), self.place());
                    self.b
                        .arc(split.clone(), i.clone(), 1)
                        .arc(o.clone(), join.clone(), 1);
                    self.emit(c, &i, &o, rng);
                }
            }
        }
    }
}

/// Random acyclic workflow net from a random process tree, with at most
/// `max_transitions` transitions and random weights in [0.1, 1).
pub fn random_acyclic_net(seed: u64, max_transitions: usize) -> StochasticWorkflowNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let tree = random_tree(&mut rng, 3);
        if !(3..=max_transitions).contains(&tree.transitions()) {
            continue;
        }
        let mut e = Emitter {
            b: NetBuilder::new(),
            places: 0,
            transitions: 0,
        };
        e.b.place("source", None).place("sink", None);
        e.emit(&tree, "source", "sink", &mut rng);
        return e.b.build().unwrap();
    }
}

/// Minimum transport cost by enumerating the vertices of the transportation
/// polytope: every set of `m + n - 1` cells that forms a spanning tree of the
/// bipartite row/column graph determines one basic solution.
pub fn lp_oracle(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let mut best = f64::INFINITY;
    let parent: Vec<usize> = (0..m + n).collect();
    spanning_trees(0, m, n, &parent, &mut Vec::new(), &mut |set| {
        if let Some(x) = tree_flows(set, supply, demand) {
            if x.iter().all(|&v| v >= -1e-12) {
                let c: f64 = set.iter().zip(&x).map(|(&k, v)| v * cost[k]).sum();
                best = best.min(c);
            }
        }
    });
    best
}

fn find(parent: &[usize], mut v: usize) -> usize {
    while parent[v] != v {
        v = parent[v];
    }
    v
}

/// Calls `f` on every cell set forming a spanning tree; cells that would
/// close a cycle are never added.
fn spanning_trees(
    start: usize,
    m: usize,
    n: usize,
    parent: &[usize],
    chosen: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    let need = m + n - 1;
    if chosen.len() == need {
        f(chosen);
        return;
    }
    for c in start..m * n {
        if m * n - c < need - chosen.len() {
            break;
        }
        let (a, b) = (find(parent, c / n), find(parent, m + c % n));
        if a == b {
            continue;
        }
        let mut next = parent.to_vec();
        next[a] = b;
        chosen.push(c);
        spanning_trees(c + 1, m, n, &next, chosen, f);
        chosen.pop();
    }
}

/// Flows on a cell set, found by repeatedly peeling a leaf cell. `None`
/// when the set is not a spanning tree.
fn tree_flows(set: &[usize], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    let mut rem: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut alive = vec![true; set.len()];
    let mut flows = vec![0.0; set.len()];
    let ends = |k: usize| (set[k] / n, m + set[k] % n);
    for _ in 0..set.len() {
        let mut degree = vec![0usize; m + n];
        for k in (0..set.len()).filter(|&k| alive[k]) {
            let (a, b) = ends(k);
            degree[a] += 1;
            degree[b] += 1;
        }
        let (k, leaf) = (0..set.len()).filter(|&k| alive[k]).find_map(|k| {
            let (a, b) = ends(k);
            if degree[a] == 1 {
                Some((k, a))
            } else if degree[b] == 1 {
                Some((k, b))
            } else {
                None
            }
        })?;
        let (a, b) = ends(k);
        let other = if leaf == a { b } else { a };
        flows[k] = rem[leaf];
        rem[other] -= rem[leaf];
        rem[leaf] = 0.0;
        alive[k] = false;
    }
    rem.iter().all(|r| r.abs() < 1e-9).then_some(flows)
}

/// Random probability vector of length `len` with entries bounded away from 0.
pub fn random_masses(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}
