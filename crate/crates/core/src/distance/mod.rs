//! Trace distances, exact Earth Mover's Distance and restricted EMD.

mod transport;

pub use transport::{solve_transport, TransportPlan};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{DumpEntry, LogLanguage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("{side} distribution has total mass {total}, expected 1")]
    Unnormalized { side: &'static str, total: f64 },
    #[error("negative or non-finite mass {mass} on trace {trace:?}")]
    InvalidMass { trace: Vec<String>, mass: f64 },
    #[error("trace {0:?} appears twice in the support")]
    DuplicateSupport(Vec<String>),
    #[error("model assigns no mass to the log support")]
    ZeroModelMass,
    #[error("model mass vector has {got} entries, log support has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("model mass {0} exceeds 1 in residual mode")]
    ExcessMass(f64),
}

/// Levenshtein edit distance (unit-cost insert, delete, substitute).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundDistance {
    /// Levenshtein divided by the longer length; 0 for two empty traces.
    #[default]
    Normalized,
    /// Plain Levenshtein.
    Raw,
}

impl GroundDistance {
    pub fn distance<T: PartialEq>(self, a: &[T], b: &[T]) -> f64 {
        let d = levenshtein(a, b) as f64;
        match self {
            GroundDistance::Raw => d,
            GroundDistance::Normalized => {
                let m = a.len().max(b.len());
                if m == 0 {
                    0.0
                } else {
                    d / m as f64
                }
            }
        }
    }
}

impl fmt::Display for GroundDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroundDistance::Normalized => "normalized",
            GroundDistance::Raw => "raw",
        })
    }
}

impl FromStr for GroundDistance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "raw" => Ok(Self::Raw),
            other => Err(format!(
                "unknown ground distance `{other}` (normalized|raw)"
            )),
        }
    }
}

pub fn ground_distance<T: PartialEq>(a: &[T], b: &[T], mode: GroundDistance) -> f64 {
    mode.distance(a, b)
}

/// Finite distribution over traces. Zero-mass points are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<Vec<String>>,
    mass: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Vec<(Vec<String>, f64)>) -> Result<Self, DistanceError> {
        let mut seen = HashMap::with_capacity(points.len());
        let mut support = Vec::with_capacity(points.len());
        let mut mass = Vec::with_capacity(points.len());
        for (trace, p) in points {
            if !(p.is_finite() && p >= 0.0) {
                return Err(DistanceError::InvalidMass { trace, mass: p });
            }
            if seen.insert(trace.clone(), ()).is_some() {
                return Err(DistanceError::DuplicateSupport(trace));
            }
            support.push(trace);
            mass.push(p);
        }
        Ok(Self { support, mass })
    }

    pub fn from_dump(entries: &[DumpEntry]) -> Result<Self, DistanceError> {
        Self::new(entries.iter().map(|e| (e.trace.clone(), e.p)).collect())
    }

    pub fn from_language(lang: &LogLanguage) -> Self {
        Self {
            support: lang.traces(),
            mass: lang.probabilities().to_vec(),
        }
    }

    pub fn support(&self) -> &[Vec<String>] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Keeps the points whose trace is in `keep`, renormalized to mass 1.
    /// `None` when nothing of positive mass remains.
    pub fn restrict_to(&self, keep: &[Vec<String>]) -> Option<Self> {
        let mut support = Vec::new();
        let mut mass = Vec::new();
        for (t, &p) in self.support.iter().zip(&self.mass) {
            if keep.contains(t) {
                support.push(t.clone());
                mass.push(p);
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return None;
        }
        mass.iter_mut().for_each(|p| *p /= total);
        Some(Self { support, mass })
    }

    fn check_normalized(&self, side: &'static str) -> Result<(), DistanceError> {
        let total = self.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistanceError::Unnormalized { side, total });
        }
        Ok(())
    }
}

/// Exact EMD between two probability distributions over traces.
pub fn emd(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    ground: GroundDistance,
) -> Result<f64, DistanceError> {
    p.check_normalized("first")?;
    q.check_normalized("second")?;
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p.mass[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q.mass[j] > 0.0).collect();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            cost.push(ground.distance(&p.support[i], &q.support[j]));
        }
    }
    let supply: Vec<f64> = rows.iter().map(|&i| p.mass[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| q.mass[j]).collect();
    Ok(solve_transport(&supply, &demand, &cost).cost.max(0.0))
}

/// EMD between `p` and `q` restricted to the support of `p` and renormalized.
pub fn restricted_emd(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    ground: GroundDistance,
) -> Result<RemdOutcome, DistanceError> {
    match q.restrict_to(&p.support) {
        Some(q) => Ok(RemdOutcome {
            distance: emd(p, &q, ground)?,
            zero_mass: false,
        }),
        None => zero_mass_outcome(ground),
    }
}

/// How the model mass outside the log support is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    /// Renormalize the model mass on the log support to 1.
    #[default]
    Renormalize,
    /// Keep the deficit `1 - sum` as a point at maximal distance from every
    /// log trace (1 in normalized mode, `c_m` in raw mode).
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemdOutcome {
    pub distance: f64,
    /// The model put no mass on the log support; `distance` is the
    /// normalized-mode maximum 1.0.
    pub zero_mass: bool,
}

fn zero_mass_outcome(ground: GroundDistance) -> Result<RemdOutcome, DistanceError> {
    match ground {
        GroundDistance::Normalized => Ok(RemdOutcome {
            distance: 1.0,
            zero_mass: true,
        }),
        GroundDistance::Raw => Err(DistanceError::ZeroModelMass),
    }
}

/// Restricted EMD against a fixed log, with the ground-distance matrix
/// between log traces computed once.
#[derive(Debug, Clone)]
pub struct RemdContext {
    ground: GroundDistance,
    log_mass: Vec<f64>,
    /// Row-major `|Supp| x |Supp|`.
    costs: Vec<f64>,
    residual_cost: f64,
}

impl RemdContext {
    pub fn new(lang: &LogLanguage, ground: GroundDistance) -> Self {
        let k = lang.support_size();
        let mut costs = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                costs.push(ground.distance(lang.coded_trace(i), lang.coded_trace(j)));
            }
        }
        let residual_cost = match ground {
            GroundDistance::Normalized => 1.0,
            GroundDistance::Raw => lang.max_len() as f64,
        };
        Self {
            ground,
            log_mass: lang.probabilities().to_vec(),
            costs,
            residual_cost,
        }
    }

    pub fn ground(&self) -> GroundDistance {
        self.ground
    }

    /// `model_mass[i]` is the model probability of the log trace with convex
    /// index `i`. It need not sum to 1.
    pub fn remd(&self, model_mass: &[f64], mode: MassMode) -> Result<RemdOutcome, DistanceError> {
        let k = self.log_mass.len();
        if model_mass.len() != k {
            return Err(DistanceError::LengthMismatch {
                expected: k,
                got: model_mass.len(),
            });
        }
        for (i, &p) in model_mass.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(DistanceError::InvalidMass {
                    trace: vec![format!("#{i}")],
                    mass: p,
                });
            }
        }
        let total: f64 = model_mass.iter().sum();
        let rows: Vec<usize> = (0..k).filter(|&i| self.log_mass[i] > 0.0).collect();
        let supply: Vec<f64> = rows.iter().map(|&i| self.log_mass[i]).collect();
        let cols: Vec<usize> = (0..k).filter(|&j| model_mass[j] > 0.0).collect();
        let mut cost: Vec<f64> = Vec::new();
        let demand: Vec<f64> = match mode {
            MassMode::Renormalize => {
                if total <= 0.0 {
                    return zero_mass_outcome(self.ground);
                }
                for &i in &rows {
                    cost.extend(cols.iter().map(|&j| self.costs[i * k + j]));
                }
                cols.iter().map(|&j| model_mass[j] / total).collect()
            }
            MassMode::Residual => {
                if total > 1.0 + 1e-9 {
                    return Err(DistanceError::ExcessMass(total));
                }
                let residual = (1.0 - total).max(0.0);
                for &i in &rows {
                    cost.extend(cols.iter().map(|&j| self.costs[i * k + j]));
                    cost.push(self.residual_cost);
                }
                let mut d: Vec<f64> = cols.iter().map(|&j| model_mass[j]).collect();
                d.push(residual);
                d
            }
        };
        let plan = solve_transport(&supply, &demand, &cost);
        Ok(RemdOutcome {
            distance: plan.cost.max(0.0),
            zero_mass: false,
        })
    }
}

/// One-shot restricted EMD between a log and model masses over its support.
pub fn remd(
    lang: &LogLanguage,
    model_mass: &[f64],
    ground: GroundDistance,
    mode: MassMode,
) -> Result<RemdOutcome, DistanceError> {
    RemdContext::new(lang, ground).remd(model_mass, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::tests::example_log;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    /// Edit distance by breadth-first search over single edits.
    fn bfs_edit_distance(a: &[u8], b: &[u8], alphabet: &[u8]) -> usize {
        use std::collections::{HashSet, VecDeque};
        let limit = a.len().max(b.len()) + 1;
        let mut seen = HashSet::from([a.to_vec()]);
        let mut queue = VecDeque::from([(a.to_vec(), 0)]);
        while let Some((w, d)) = queue.pop_front() {
            if w == b {
                return d;
            }
            let mut next = Vec::new();
            for i in 0..=w.len() {
                for &c in alphabet {
                    let mut v = w.clone();
                    v.insert(i, c);
                    next.push(v);
                }
                if i < w.len() {
                    let mut v = w.clone();
                    v.remove(i);
                    next.push(v);
                    for &c in alphabet {
                        let mut v = w.clone();
                        v[i] = c;
                        next.push(v);
                    }
                }
            }
            for v in next {
                if v.len() <= limit && seen.insert(v.clone()) {
                    queue.push_back((v, d + 1));
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(&t("abc"), &t("acb")), 2);
        assert_eq!(levenshtein(&t(""), &t("ab")), 2);
        assert_eq!(levenshtein(&t("kitten"), &t("sitting")), 3);
        let n = GroundDistance::Normalized;
        assert!((n.distance(&t("abc"), &t("acb")) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(n.distance::<String>(&[], &[]), 0.0);
        assert_eq!(GroundDistance::Raw.distance(&t("abc"), &t("abd")), 1.0);
    }

    proptest! {
        #[test]
        fn levenshtein_matches_edit_search(
            a in prop::collection::vec(0u8..3, 0..5),
            b in prop::collection::vec(0u8..3, 0..5),
        ) {
            prop_assert_eq!(levenshtein(&a, &b), bfs_edit_distance(&a, &b, &[0, 1, 2]));
        }

        #[test]
        fn levenshtein_is_a_metric(
            a in prop::collection::vec(0u8..5, 0..=10),
            b in prop::collection::vec(0u8..5, 0..=10),
            c in prop::collection::vec(0u8..5, 0..=10),
        ) {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        }
    }

    fn dist(points: &[(&str, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::new(points.iter().map(|(s, p)| (t(s), *p)).collect()).unwrap()
    }

    #[test]
    fn emd_small_cases() {
        let g = GroundDistance::Raw;
        assert!(
            (emd(&dist(&[("abc", 1.0)]), &dist(&[("ab", 1.0)]), g).unwrap() - 1.0).abs() < 1e-15
        );
        let p = dist(&[("a", 0.5), ("b", 0.5)]);
        let q = dist(&[("a", 1.0)]);
        assert!((emd(&p, &q, g).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(emd(&p, &p, g).unwrap(), 0.0);
        assert!(matches!(
            emd(&dist(&[("a", 0.5)]), &q, g),
            Err(DistanceError::Unnormalized { .. })
        ));
    }

    #[test]
    fn distribution_rejects_bad_input() {
        assert!(matches!(
            DiscreteDistribution::new(vec![(t("a"), 0.5), (t("a"), 0.5)]),
            Err(DistanceError::DuplicateSupport(_))
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![(t("a"), -0.1)]),
            Err(DistanceError::InvalidMass { .. })
        ));
    }

    #[test]
    fn mass_move_lower_bound() {
        // disjoint supports: every unit of mass travels at least the minimum distance
        let p = dist(&[("ab", 0.3), ("ba", 0.7)]);
        let q = dist(&[("abc", 0.6), ("bca", 0.4)]);
        let g = GroundDistance::Raw;
        let mut min_d = f64::INFINITY;
        for a in p.support() {
            for b in q.support() {
                min_d = min_d.min(g.distance(a, b));
            }
        }
        assert!(emd(&p, &q, g).unwrap() >= min_d - 1e-12);
    }

    #[test]
    fn remd_identity_and_uniform() {
        let lang = example_log();
        let ctx = RemdContext::new(&lang, GroundDistance::Normalized);
        let own = ctx
            .remd(lang.probabilities(), MassMode::Renormalize)
            .unwrap();
        assert!(own.distance.abs() < 1e-12 && !own.zero_mass);

        // each 0.35 trace sends 0.1 to a 0.15 trace two substitutions away
        let r = ctx
            .remd(&[0.25; 4], MassMode::Renormalize)
            .unwrap()
            .distance;
        assert!((r - 2.0 / 15.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn remd_zero_mass_and_residual() {
        let lang = example_log();
        let n = RemdContext::new(&lang, GroundDistance::Normalized);
        let z = n.remd(&[0.0; 4], MassMode::Renormalize).unwrap();
        assert_eq!((z.distance, z.zero_mass), (1.0, true));
        let raw = RemdContext::new(&lang, GroundDistance::Raw);
        assert_eq!(
            raw.remd(&[0.0; 4], MassMode::Renormalize),
            Err(DistanceError::ZeroModelMass)
        );

        // half the model mass lost: renormalizing recovers the log exactly,
        // the residual mode charges the missing half at distance 1
        let half: Vec<f64> = lang.probabilities().iter().map(|p| p / 2.0).collect();
        assert!(n.remd(&half, MassMode::Renormalize).unwrap().distance.abs() < 1e-12);
        let r = n.remd(&half, MassMode::Residual).unwrap().distance;
        assert!((r - 0.5).abs() < 1e-12);
        assert!(matches!(
            n.remd(&[0.5; 4], MassMode::Residual),
            Err(DistanceError::ExcessMass(_))
        ));
    }

    #[test]
    fn restricted_emd_drops_foreign_traces() {
        let p = dist(&[("ab", 0.5), ("ba", 0.5)]);
        let q = dist(&[("ab", 0.25), ("ba", 0.25), ("zz", 0.5)]);
        let r = restricted_emd(&p, &q, GroundDistance::Normalized).unwrap();
        assert!(r.distance.abs() < 1e-12);
        let r = restricted_emd(&p, &dist(&[("zz", 1.0)]), GroundDistance::Normalized).unwrap();
        assert!(r.zero_mass);
    }

    fn masses(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn emd_symmetry_and_bounds(
            a in prop::collection::vec(prop::collection::vec(0u8..3, 0..4), 1..5),
            b in prop::collection::vec(prop::collection::vec(0u8..3, 0..4), 1..5),
            pm in masses(5),
            qm in masses(5),
        ) {
            let mk = |ts: &[Vec<u8>], ms: &[f64]| {
                let mut seen = Vec::new();
                let mut pts = Vec::new();
                for (tr, &m) in ts.iter().zip(ms) {
                    let s: Vec<String> = tr.iter().map(|x| x.to_string()).collect();
                    if !seen.contains(&s) {
                        seen.push(s.clone());
                        pts.push((s, m));
                    }
                }
                let total: f64 = pts.iter().map(|p| p.1).sum();
                pts.iter_mut().for_each(|p| p.1 /= total);
                DiscreteDistribution::new(pts).unwrap()
            };
            let p = mk(&a, &pm);
            let q = mk(&b, &qm);
            let g = GroundDistance::Normalized;
            let pq = emd(&p, &q, g).unwrap();
            let qp = emd(&q, &p, g).unwrap();
            prop_assert!((pq - qp).abs() < 1e-9);
            prop_assert!(emd(&p, &p, g).unwrap().abs() < 1e-12);
            let mut max_d = 0.0f64;
            for x in p.support() {
                for y in q.support() {
                    max_d = max_d.max(g.distance(x, y));
                }
            }
            prop_assert!(pq <= max_d + 1e-9);
        }
    }
}
