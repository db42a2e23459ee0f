use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use super::{default_firing_cap, Detector, Outcome, RejectReason};
use crate::eventlog::LogLanguage;
use crate::petrinet::{NetError, StochasticWorkflowNet};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("invalid estimation parameter: {0}")]
    InvalidParameter(String),
    #[error("no accepted trace after {} runs (rejections: {:?})", .runs_total, .rejections)]
    NoAcceptedTrace {
        runs_total: u64,
        rejections: RejectionCounts,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Settings of one language estimate.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateConfig {
    /// Confidence level of the per-bucket intervals, in (0, 1).
    pub confidence: f64,
    /// Target full width of every interval.
    pub width: f64,
    pub max_runs: u64,
    /// Runs per batch; the stopping rule is checked between batches.
    pub batch_size: u64,
    pub min_runs: u64,
    pub seed: u64,
    pub workers: usize,
    /// `None` uses [`default_firing_cap`].
    pub firing_cap: Option<usize>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            confidence: 0.99,
            width: 0.1,
            max_runs: 2_000_000,
            batch_size: 1000,
            min_runs: 1000,
            seed: 0,
            workers: 1,
            firing_cap: None,
        }
    }
}

impl EstimateConfig {
    pub(crate) fn check(&self) -> Result<(), EstimateError> {
        let bad = |m: &str| Err(EstimateError::InvalidParameter(m.into()));
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)");
        }
        if self.width.is_nan() || self.width <= 0.0 {
            return bad("interval width must be > 0");
        }
        if self.batch_size == 0 || self.max_runs == 0 {
            return bad("batch size and run cap must be positive");
        }
        if self.workers == 0 {
            return bad("at least one worker is required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RejectionCounts {
    pub bound_exceeded: u64,
    pub deadlock_non_final: u64,
    pub not_in_log: u64,
    pub firing_cap: u64,
}

impl RejectionCounts {
    fn add(&mut self, reason: RejectReason) {
        match reason {
            RejectReason::BoundExceeded => self.bound_exceeded += 1,
            RejectReason::DeadlockNonFinal => self.deadlock_non_final += 1,
            RejectReason::NotInLog => self.not_in_log += 1,
            RejectReason::FiringCap => self.firing_cap += 1,
        }
    }

    fn merge(&mut self, o: &Self) {
        self.bound_exceeded += o.bound_exceeded;
        self.deadlock_non_final += o.deadlock_non_final;
        self.not_in_log += o.not_in_log;
        self.firing_cap += o.firing_cap;
    }
}

/// Distribution over the log's convex indices, conditional on acceptance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageEstimate {
    pub probs: Vec<f64>,
    pub counts: Vec<u64>,
    pub runs_total: u64,
    pub runs_accepted: u64,
    pub rejections: RejectionCounts,
    pub confidence: f64,
    pub width: f64,
    pub seed: u64,
    /// Whether every interval reached `width` before the run cap.
    pub converged: bool,
    /// Widest confidence interval at stop time.
    pub achieved_width: f64,
}

impl LanguageEstimate {
    pub fn acceptance_ratio(&self) -> f64 {
        self.runs_accepted as f64 / self.runs_total as f64
    }

    /// Unconditional probability of each log trace (`probs` times the
    /// acceptance ratio).
    pub fn restricted_mass(&self) -> Vec<f64> {
        let r = self.runs_total as f64;
        self.counts.iter().map(|&c| c as f64 / r).collect()
    }

    /// Language dump plus a `meta` object.
    pub fn to_json(&self, lang: &LogLanguage) -> serde_json::Value {
        serde_json::json!({
            "language": lang.dump_with(&self.probs),
            "meta": {
                "runs": self.runs_total,
                "runs_accepted": self.runs_accepted,
                "acceptance_ratio": self.acceptance_ratio(),
                "confidence": self.confidence,
                "width": self.width,
                "achieved_width": self.achieved_width,
                "converged": self.converged,
                "seed": self.seed,
                "rejections": self.rejections,
            }
        })
    }
}

#[derive(Default)]
struct Tally {
    counts: Vec<u64>,
    runs: u64,
    accepted: u64,
    rejections: RejectionCounts,
}

fn run_batch(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    firing_cap: usize,
    seed: u64,
    batch: u64,
    runs: u64,
) -> Result<Tally, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let mut det = Detector::new(net, lang, firing_cap);
    let mut tally = Tally {
        counts: vec![0; lang.support_size()],
        ..Tally::default()
    };
    for _ in 0..runs {
        match det.run(&mut rng)? {
            Outcome::Accepted(i) => {
                tally.counts[i] += 1;
                tally.accepted += 1;
            }
            Outcome::Rejected(r) => tally.rejections.add(r),
        }
        tally.runs += 1;
    }
    Ok(tally)
}

/// Widest normal-approximation interval over all buckets.
fn max_interval_width(counts: &[u64], accepted: u64, z: f64) -> f64 {
    let n = accepted as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            2.0 * z * (p * (1.0 - p) / n).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Estimates the probability of every log trace under `net` by repeated
/// detector runs.
///
/// Runs are drawn in batches; batch `b` uses the ChaCha stream `b` of
/// `seed`, so the result does not depend on how batches are spread over
/// workers except through where the stopping rule is evaluated (after every
/// round of `workers` batches). Sampling stops once every bucket's
/// `confidence` interval is at most `width` wide, or at `max_runs`.
pub fn estimate_language(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    cfg: &EstimateConfig,
) -> Result<LanguageEstimate, EstimateError> {
    cfg.check()?;
    let z = Normal::standard().inverse_cdf((1.0 + cfg.confidence) / 2.0);
    let cap = cfg
        .firing_cap
        .unwrap_or_else(|| default_firing_cap(net, lang));

    let mut total = Tally {
        counts: vec![0; lang.support_size()],
        ..Tally::default()
    };
    let mut next_batch = 0u64;
    let mut converged = false;
    let mut width = f64::INFINITY;
    while total.runs < cfg.max_runs {
        let remaining = cfg.max_runs - total.runs;
        let sizes: Vec<(u64, u64)> = (0..cfg.workers as u64)
            .map(|k| {
                let done = k * cfg.batch_size;
                (
                    next_batch + k,
                    cfg.batch_size.min(remaining.saturating_sub(done)),
                )
            })
            .filter(|&(_, n)| n > 0)
            .collect();
        next_batch += sizes.len() as u64;
        let tallies: Vec<Result<Tally, NetError>> = if sizes.len() == 1 {
            vec![run_batch(net, lang, cap, cfg.seed, sizes[0].0, sizes[0].1)]
        } else {
            sizes
                .par_iter()
                .map(|&(b, n)| run_batch(net, lang, cap, cfg.seed, b, n))
                .collect()
        };
        for t in tallies {
            let t = t?;
            total.runs += t.runs;
            total.accepted += t.accepted;
            total.rejections.merge(&t.rejections);
            for (a, b) in total.counts.iter_mut().zip(&t.counts) {
                *a += b;
            }
        }
        if total.accepted > 0 {
            width = max_interval_width(&total.counts, total.accepted, z);
            if total.runs >= cfg.min_runs && width <= cfg.width {
                converged = true;
                break;
            }
        }
    }

    if total.accepted == 0 {
        return Err(EstimateError::NoAcceptedTrace {
            runs_total: total.runs,
            rejections: total.rejections,
        });
    }
    let acc = total.accepted as f64;
    Ok(LanguageEstimate {
        probs: total.counts.iter().map(|&c| c as f64 / acc).collect(),
        counts: total.counts,
        runs_total: total.runs,
        runs_accepted: total.accepted,
        rejections: total.rejections,
        confidence: cfg.confidence,
        width: cfg.width,
        seed: cfg.seed,
        converged,
        achieved_width: width,
    })
}
