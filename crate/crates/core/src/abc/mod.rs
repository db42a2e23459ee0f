//! Weight discovery by approximate Bayesian computation.
//!
//! Layer 1 is plain rejection sampling from the uniform prior on
//! `[w_min, 1]^k`. Every later layer sets its tolerance to the median score
//! of the previous one, then fills each particle slot by perturbing an
//! ancestor (drawn by importance weight) with a truncated-normal kernel
//! until the proposal scores strictly below the tolerance. Discovery stops
//! when a layer improves on its own tolerance by less than `zeta`.
//!
//! A particle is accepted when its score is strictly below the tolerance,
//! in every layer. Since the next tolerance is the median of such scores,
//! tolerances strictly decrease.

mod kernel;
mod output;

pub use kernel::{kernel_density, kernel_log_density, kernel_sample, kernel_update};
pub use output::{weights_json, write_posterior_csv};

use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{estimate_language, EstimateConfig, EstimateError};
use crate::distance::{GroundDistance, MassMode, RemdContext};
use crate::eventlog::LogLanguage;
use crate::petrinet::{StochasticWorkflowNet, WeightVector};

#[derive(Debug, Error)]
pub enum AbcError {
    #[error("invalid discovery parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "layer 1: no prior draw scored below eps1 = {eps1} within {attempts} attempts \
         for one particle; try a larger eps1"
    )]
    RejectionCap { eps1: f64, attempts: u64 },
    #[error("failed to build the worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcConfig {
    pub particles: usize,
    pub eps1: f64,
    pub zeta: f64,
    pub confidence: f64,
    pub width: f64,
    pub max_runs: u64,
    pub max_layers: usize,
    pub seed: u64,
    pub workers: usize,
    pub ground: GroundDistance,
    pub w_min: f64,
    pub var_min: f64,
    pub rejection_attempt_cap: u64,
    pub smc_attempt_cap: u64,
    pub firing_cap: Option<usize>,
}

impl Default for AbcConfig {
    fn default() -> Self {
        Self {
            particles: 100,
            eps1: 1.0,
            zeta: 0.005,
            confidence: 0.99,
            width: 0.1,
            max_runs: 2_000_000,
            max_layers: 100,
            seed: 0,
            workers: 1,
            ground: GroundDistance::Normalized,
            w_min: 1e-9,
            var_min: 1e-6,
            rejection_attempt_cap: 10_000,
            smc_attempt_cap: 100_000,
            firing_cap: None,
        }
    }
}

impl AbcConfig {
    pub fn check(&self) -> Result<(), AbcError> {
        let bad = |m: String| Err(AbcError::InvalidParameter(m));
        if self.particles < 2 {
            return bad(format!(
                "particles must be at least 2, got {}",
                self.particles
            ));
        }
        if !(self.eps1 >= 0.0 && self.eps1.is_finite()) {
            return bad(format!(
                "eps1 must be a non-negative number, got {}",
                self.eps1
            ));
        }
        if self.zeta.is_nan() || self.zeta <= 0.0 {
            return bad(format!("zeta must be positive, got {}", self.zeta));
        }
        if self.max_layers < 1 {
            return bad("max_layers must be at least 1".into());
        }
        if self.workers < 1 {
            return bad("workers must be at least 1".into());
        }
        if !(self.w_min > 0.0 && self.w_min < 1.0) {
            return bad(format!("w_min must lie in (0, 1), got {}", self.w_min));
        }
        if self.var_min.is_nan() || self.var_min <= 0.0 {
            return bad(format!("var_min must be positive, got {}", self.var_min));
        }
        if self.rejection_attempt_cap == 0 || self.smc_attempt_cap == 0 {
            return bad("attempt caps must be positive".into());
        }
        self.estimate_config(0)
            .check()
            .map_err(|e| AbcError::InvalidParameter(e.to_string()))
    }

    fn estimate_config(&self, seed: u64) -> EstimateConfig {
        EstimateConfig {
            confidence: self.confidence,
            width: self.width,
            max_runs: self.max_runs,
            seed,
            workers: 1,
            firing_cap: self.firing_cap,
            ..EstimateConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Particle {
    pub w: Vec<f64>,
    pub score: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreResult {
    pub score: f64,
    pub runs: u64,
    /// The weighted net produced no accepted run (or the estimate failed).
    pub degenerate: bool,
}

/// Scores weight vectors against one log: estimate, then restricted EMD.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    net: &'a StochasticWorkflowNet,
    lang: &'a LogLanguage,
    remd: RemdContext,
}

impl<'a> Scorer<'a> {
    pub fn new(
        net: &'a StochasticWorkflowNet,
        lang: &'a LogLanguage,
        ground: GroundDistance,
    ) -> Self {
        Self {
            net,
            lang,
            remd: RemdContext::new(lang, ground),
        }
    }

    /// Failures to simulate or to find any accepted run score 1.0.
    pub fn score(&self, w: &[f64], est: &EstimateConfig) -> ScoreResult {
        let degenerate = |runs| ScoreResult {
            score: 1.0,
            runs,
            degenerate: true,
        };
        let net = match WeightVector::new(w.to_vec()).and_then(|w| self.net.with_weights(&w)) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("cannot apply weights {w:?}: {e}");
                return degenerate(0);
            }
        };
        let est = match estimate_language(&net, self.lang, est) {
            Ok(e) => e,
            Err(EstimateError::NoAcceptedTrace { runs_total, .. }) => {
                return degenerate(runs_total)
            }
            Err(e) => {
                log::warn!("simulation failed for weights {w:?}: {e}");
                return degenerate(0);
            }
        };
        match self.remd.remd(&est.probs, MassMode::Renormalize) {
            Ok(r) => ScoreResult {
                score: r.distance,
                runs: est.runs_total,
                degenerate: r.zero_mass,
            },
            Err(e) => {
                log::warn!("distance failed for weights {w:?}: {e}");
                degenerate(est.runs_total)
            }
        }
    }
}

/// One-shot score of a weight vector.
pub fn score(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    w: &[f64],
    ground: GroundDistance,
    est: &EstimateConfig,
) -> ScoreResult {
    Scorer::new(net, lang, ground).score(w, est)
}

/// Median; the mean of the two middle values for an even count.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Tolerance of the next layer: the median score of `particles`.
pub fn adaptive_tolerance(particles: &[Particle]) -> f64 {
    median(&particles.iter().map(|p| p.score).collect::<Vec<_>>())
}

/// Categorical draw of an ancestor index by importance weight.
pub fn select_ancestor<R: Rng + ?Sized>(index: &WeightedIndex<f64>, rng: &mut R) -> usize {
    index.sample(rng)
}

/// Normalized importance weights of `proposals` against the previous layer:
/// `delta_j ∝ 1 / sum_j' delta'_j' K(w_j | w'_j')`, computed in log space.
pub fn importance_weights(
    proposals: &[Vec<f64>],
    previous: &[Particle],
    variances: &[f64],
    w_min: f64,
) -> Vec<f64> {
    let log_delta: Vec<f64> = proposals
        .iter()
        .map(|w| {
            let terms: Vec<f64> = previous
                .iter()
                .filter(|p| p.delta > 0.0)
                .map(|p| p.delta.ln() + kernel_log_density(w, &p.w, variances, w_min, 1.0))
                .collect();
            -log_sum_exp(&terms)
        })
        .collect();
    let max = log_delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_delta.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|d| d / total).collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub layer: usize,
    pub tolerance: f64,
    pub particles: Vec<Particle>,
    /// Kernel variances used to propose this layer (empty for layer 1).
    pub variances: Vec<f64>,
    pub attempts: u64,
    pub runs: u64,
}

impl Population {
    pub fn median_score(&self) -> f64 {
        adaptive_tolerance(&self.particles)
    }

    pub fn best(&self) -> Option<&Particle> {
        self.particles
            .iter()
            .min_by(|a, b| a.score.total_cmp(&b.score))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// A layer improved on its tolerance by less than zeta.
    Converged,
    /// The next tolerance would be 0, which no score can undercut.
    ZeroTolerance,
    MaxLayers,
    /// An SMC layer could not fill a slot; the report ends at the previous layer.
    AttemptCap,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerSummary {
    pub layer: usize,
    pub tolerance: f64,
    pub median_score: f64,
    pub best_score: f64,
    pub attempts: u64,
    pub runs: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryReport {
    pub config: AbcConfig,
    pub transitions: Vec<String>,
    pub layers: Vec<LayerSummary>,
    pub best: Particle,
    pub best_layer: usize,
    pub total_runs: u64,
    pub wall_clock_secs: f64,
    pub termination: Termination,
    pub warnings: Vec<String>,
    /// Every population, layer 1 first.
    #[serde(skip)]
    pub populations: Vec<Population>,
}

impl DiscoveryReport {
    pub fn tolerances(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.tolerance).collect()
    }

    pub fn final_population(&self) -> &Population {
        self.populations
            .last()
            .expect("a report holds at least one layer")
    }
}

/// RNG of one particle slot of one layer.
fn slot_rng(seed: u64, layer: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((layer as u64) << 32) | slot as u64);
    rng
}

fn prior_draw<R: Rng + ?Sized>(k: usize, w_min: f64, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| rng.random::<f64>().max(w_min)).collect()
}

struct SlotResult {
    particle: Option<(Vec<f64>, f64)>,
    attempts: u64,
    runs: u64,
}

fn fill_slot(
    scorer: &Scorer<'_>,
    cfg: &AbcConfig,
    tolerance: f64,
    cap: u64,
    rng: &mut ChaCha8Rng,
    mut propose: impl FnMut(&mut ChaCha8Rng) -> Vec<f64>,
) -> SlotResult {
    let mut runs = 0;
    for attempt in 1..=cap {
        let w = propose(rng);
        let est = cfg.estimate_config(rng.random());
        let s = scorer.score(&w, &est);
        runs += s.runs;
        if s.score < tolerance {
            return SlotResult {
                particle: Some((w, s.score)),
                attempts: attempt,
                runs,
            };
        }
    }
    SlotResult {
        particle: None,
        attempts: cap,
        runs,
    }
}

fn run_layer(
    pool: &rayon::ThreadPool,
    cfg: &AbcConfig,
    layer: usize,
    tolerance: f64,
    cap: u64,
    slot: impl Fn(&mut ChaCha8Rng, f64, u64) -> SlotResult + Sync,
) -> Vec<SlotResult> {
    pool.install(|| {
        (0..cfg.particles)
            .into_par_iter()
            .map(|j| slot(&mut slot_rng(cfg.seed, layer, j), tolerance, cap))
            .collect()
    })
}

/// Layer 1: uniform prior draws accepted when they score below `eps1`.
pub fn rejection_sample(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    cfg: &AbcConfig,
) -> Result<Population, AbcError> {
    cfg.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    rejection_layer(&pool, &Scorer::new(net, lang, cfg.ground), cfg)
}

fn rejection_layer(
    pool: &rayon::ThreadPool,
    scorer: &Scorer<'_>,
    cfg: &AbcConfig,
) -> Result<Population, AbcError> {
    let k = scorer.net.transitions().len();
    let results = run_layer(
        pool,
        cfg,
        1,
        cfg.eps1,
        cfg.rejection_attempt_cap,
        |rng, tol, cap| {
            fill_slot(scorer, cfg, tol, cap, rng, |rng| {
                prior_draw(k, cfg.w_min, rng)
            })
        },
    );
    let attempts = results.iter().map(|r| r.attempts).sum();
    let runs = results.iter().map(|r| r.runs).sum();
    let n = cfg.particles as f64;
    let particles = results
        .into_iter()
        .map(|r| {
            r.particle
                .map(|(w, score)| Particle {
                    w,
                    score,
                    delta: 1.0 / n,
                })
                .ok_or(AbcError::RejectionCap {
                    eps1: cfg.eps1,
                    attempts: cfg.rejection_attempt_cap,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Population {
        layer: 1,
        tolerance: cfg.eps1,
        particles,
        variances: Vec::new(),
        attempts,
        runs,
    })
}

/// One SMC layer from a frozen previous population. `None` when some slot
/// hit the attempt cap.
fn smc_layer(
    pool: &rayon::ThreadPool,
    scorer: &Scorer<'_>,
    cfg: &AbcConfig,
    prev: &Population,
    tolerance: f64,
) -> (Option<Population>, u64, u64) {
    let variances = kernel_update(&prev.particles, cfg.var_min);
    let deltas: Vec<f64> = prev.particles.iter().map(|p| p.delta).collect();
    let ancestors =
        WeightedIndex::new(&deltas).expect("previous deltas are positive and normalized");
    let layer = prev.layer + 1;
    let results = run_layer(
        pool,
        cfg,
        layer,
        tolerance,
        cfg.smc_attempt_cap,
        |rng, tol, cap| {
            fill_slot(scorer, cfg, tol, cap, rng, |rng| {
                let a = select_ancestor(&ancestors, rng);
                kernel_sample(&prev.particles[a].w, &variances, cfg.w_min, 1.0, rng)
            })
        },
    );
    let attempts = results.iter().map(|r| r.attempts).sum();
    let runs = results.iter().map(|r| r.runs).sum();
    let Some(accepted) = results
        .into_iter()
        .map(|r| r.particle)
        .collect::<Option<Vec<_>>>()
    else {
        return (None, attempts, runs);
    };
    let proposals: Vec<Vec<f64>> = accepted.iter().map(|(w, _)| w.clone()).collect();
    let deltas = importance_weights(&proposals, &prev.particles, &variances, cfg.w_min);
    let particles = accepted
        .into_iter()
        .zip(deltas)
        .map(|((w, score), delta)| Particle { w, score, delta })
        .collect();
    let pop = Population {
        layer,
        tolerance,
        particles,
        variances,
        attempts,
        runs,
    };
    (Some(pop), attempts, runs)
}

fn log_layer(pop: &Population, total_runs: u64) {
    log::info!(
        "layer {}: tolerance {:.6}, median score {:.6}, acceptance rate {:.3}, {} simulations so far",
        pop.layer,
        pop.tolerance,
        pop.median_score(),
        pop.particles.len() as f64 / pop.attempts as f64,
        total_runs
    );
}

/// Full ABC-SMC discovery of the transition weights of `net` for `lang`.
pub fn smc_discover(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    cfg: &AbcConfig,
) -> Result<DiscoveryReport, AbcError> {
    cfg.check()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    let scorer = Scorer::new(net, lang, cfg.ground);
    let mut warnings = Vec::new();
    let mut total_runs = 0;

    let first = rejection_layer(&pool, &scorer, cfg)?;
    total_runs += first.runs;
    log_layer(&first, total_runs);
    let mut populations = vec![first];
    let termination = loop {
        if populations.len() >= cfg.max_layers {
            break Termination::MaxLayers;
        }
        let prev = populations.last().unwrap();
        let tolerance = prev.median_score();
        if tolerance <= 0.0 {
            break Termination::ZeroTolerance;
        }
        let (pop, attempts, runs) = smc_layer(&pool, &scorer, cfg, prev, tolerance);
        total_runs += runs;
        let Some(pop) = pop else {
            let msg = format!(
                "layer {} stopped: a particle found no proposal below tolerance {tolerance:.6} \
                 within {} attempts ({attempts} attempts in total); reporting layers 1..={}",
                prev.layer + 1,
                cfg.smc_attempt_cap,
                prev.layer
            );
            log::warn!("{msg}");
            warnings.push(msg);
            break Termination::AttemptCap;
        };
        let improvement = pop.tolerance - pop.median_score();
        log_layer(&pop, total_runs);
        populations.push(pop);
        if improvement < cfg.zeta {
            break Termination::Converged;
        }
    };

    let (best_layer, best) = populations
        .iter()
        .filter_map(|p| p.best().map(|b| (p.layer, b)))
        .min_by(|a, b| a.1.score.total_cmp(&b.1.score))
        .map(|(l, b)| (l, b.clone()))
        .expect("populations are non-empty");
    let layers = populations
        .iter()
        .map(|p| LayerSummary {
            layer: p.layer,
            tolerance: p.tolerance,
            median_score: p.median_score(),
            best_score: p.best().map_or(f64::NAN, |b| b.score),
            attempts: p.attempts,
            runs: p.runs,
        })
        .collect();
    Ok(DiscoveryReport {
        config: cfg.clone(),
        transitions: net.transitions().iter().map(|t| t.id.clone()).collect(),
        layers,
        best,
        best_layer,
        total_runs,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        termination,
        warnings,
        populations,
    })
}
