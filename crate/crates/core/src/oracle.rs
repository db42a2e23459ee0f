//! Exact stochastic language of a net, restricted to what the detector of a
//! log can accept.
//!
//! The reachability unfolding is expanded one firing depth at a time. Nodes
//! at the same depth with the same marking and visible trace are merged by
//! summing their probability. Guards, firing cap and acceptance are the
//! detector's, so both see the same sample space.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::detector::default_firing_cap;
use crate::distance::DiscreteDistribution;
use crate::eventlog::LogLanguage;
use crate::petrinet::{Marking, NetError, StochasticWorkflowNet};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("node budget of {budget} exceeded at depth {depth} (accepted mass so far {accepted_mass:.6}, frontier {frontier} nodes)")]
    BudgetExceeded {
        budget: usize,
        depth: usize,
        accepted_mass: f64,
        frontier: usize,
    },
    #[error("weight {0} cannot be represented exactly")]
    Weight(f64),
    #[error("no accepted mass to normalize")]
    ZeroAcceptedMass,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Number type for path probabilities.
pub trait Probability:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_weight(w: f64) -> Result<Self, OracleError>;
    fn as_f64(&self) -> f64;
}

impl Probability for f64 {
    fn from_weight(w: f64) -> Result<Self, OracleError> {
        Ok(w)
    }

    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Probability for BigRational {
    /// Reads the weight through its shortest decimal representation, so
    /// `0.3` becomes `3/10` rather than the nearest binary fraction.
    fn from_weight(w: f64) -> Result<Self, OracleError> {
        if !w.is_finite() {
            return Err(OracleError::Weight(w));
        }
        let text = format!("{w}");
        let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
        let digits: BigInt = format!("{int}{frac}")
            .parse()
            .map_err(|_| OracleError::Weight(w))?;
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        Ok(BigRational::new(digits, denom))
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Defaults to the detector's cap.
    pub firing_cap: Option<usize>,
    pub node_budget: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            firing_cap: None,
            node_budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactLanguage<N> {
    /// Probability of each log trace, by convex index.
    pub probs: Vec<N>,
    /// Guard violations, improper deadlocks and terminated traces outside the log.
    pub rejected_mass: N,
    /// Runs still alive at the firing cap.
    pub truncated_mass: N,
    pub nodes: usize,
}

impl<N: Probability> ExactLanguage<N> {
    pub fn accepted_mass(&self) -> N {
        self.probs.iter().cloned().fold(N::zero(), |a, b| a + b)
    }

    pub fn to_f64(&self) -> ExactLanguage<f64> {
        ExactLanguage {
            probs: self.probs.iter().map(N::as_f64).collect(),
            rejected_mass: self.rejected_mass.as_f64(),
            truncated_mass: self.truncated_mass.as_f64(),
            nodes: self.nodes,
        }
    }

    /// Accepted probabilities renormalized to sum to 1.
    pub fn normalized(&self) -> Result<Vec<f64>, OracleError> {
        let probs: Vec<f64> = self.probs.iter().map(N::as_f64).collect();
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(OracleError::ZeroAcceptedMass);
        }
        Ok(probs.into_iter().map(|p| p / total).collect())
    }
}

/// The normalized restricted language as a distribution over the log traces.
pub fn normalized_restricted<N: Probability>(
    exact: &ExactLanguage<N>,
    lang: &LogLanguage,
) -> Result<DiscreteDistribution, OracleError> {
    let probs = exact.normalized()?;
    let points = lang.traces().into_iter().zip(probs).collect();
    Ok(DiscreteDistribution::new(points).expect("log traces are distinct and masses valid"))
}

pub fn exact_language<N: Probability>(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    cfg: &OracleConfig,
) -> Result<ExactLanguage<N>, OracleError> {
    let weights = net
        .weights()
        .as_slice()
        .iter()
        .map(|&w| N::from_weight(w))
        .collect::<Result<Vec<N>, _>>()?;
    let codes: Vec<Option<Option<u32>>> = net
        .transitions()
        .iter()
        .map(|t| match &t.label {
            None => Some(None),
            Some(l) => lang.letter_code(l).map(Some),
        })
        .collect();
    let cap = cfg
        .firing_cap
        .unwrap_or_else(|| default_firing_cap(net, lang));
    let maxima = lang.letter_maxima();

    let mut probs = vec![N::zero(); lang.support_size()];
    let mut rejected = N::zero();
    let mut nodes = 1usize;
    let mut level: HashMap<(Marking, Vec<u32>), N> =
        HashMap::from([((net.initial_marking().clone(), Vec::new()), N::one())]);
    let mut enabled = Vec::new();

    for depth in 0..=cap {
        if level.is_empty() {
            break;
        }
        let mut next: HashMap<(Marking, Vec<u32>), N> = HashMap::new();
        for ((marking, trace), mass) in level.drain() {
            net.enabled_into(&marking, &mut enabled);
            if enabled.is_empty() {
                match lang.index_of_coded(&trace) {
                    Some(i) if net.sink_marked(&marking) => probs[i] = probs[i].clone() + mass,
                    _ => rejected = rejected + mass,
                }
                continue;
            }
            if depth == cap {
                // still alive at the cap: put it back for the truncated tally
                next.insert((marking, trace), mass);
                continue;
            }
            let total = enabled
                .iter()
                .fold(N::zero(), |a, &t| a + weights[t].clone());
            for &t in &enabled {
                let p = mass.clone() * weights[t].clone() / total.clone();
                let admitted = match codes[t] {
                    None => false,
                    Some(None) => true,
                    Some(Some(c)) => {
                        let i = c as usize - 1;
                        let count = trace.iter().filter(|&&x| x == c).count() as u32;
                        count < maxima[i] && trace.len() < lang.max_len()
                    }
                };
                if !admitted {
                    rejected = rejected + p;
                    continue;
                }
                let m = net.fire(&marking, t)?;
                let mut tr = trace.clone();
                if let Some(Some(c)) = codes[t] {
                    tr.push(c);
                }
                let slot = next.entry((m, tr)).or_insert_with(N::zero);
                *slot = slot.clone() + p;
            }
        }
        nodes += next.len();
        if nodes > cfg.node_budget {
            let accepted_mass = probs.iter().map(N::as_f64).sum();
            return Err(OracleError::BudgetExceeded {
                budget: cfg.node_budget,
                depth,
                accepted_mass,
                frontier: next.len(),
            });
        }
        level = next;
    }
    let truncated = level.into_values().fold(N::zero(), |a, b| a + b);
    Ok(ExactLanguage {
        probs,
        rejected_mass: rejected,
        truncated_mass: truncated,
        nodes,
    })
}
