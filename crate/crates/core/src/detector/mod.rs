//! Language detection by simulation.
//!
//! A run plays the net out from its initial marking and watches the visible
//! activities go by, keeping the word-mapping value `w`, the visible length
//! `c` and per-letter counts `c_i`. A visible firing that would push some
//! `c_i` above the log maximum `l_i` or the length above `c_m` blocks the
//! run. Silent firings leave the counters untouched. A run is accepted when
//! the net deadlocks with the sink marked and `w` is the value of a log
//! trace; its outcome is then that trace's convex index.

mod estimate;
pub mod word;

pub use estimate::{estimate_language, EstimateConfig, EstimateError, LanguageEstimate};
pub use word::{
    word_map, word_map_codes, LetterMap, UnknownLetter, WordAccumulator, WordMappingValue,
};

use rand::Rng;
use serde::Serialize;

use crate::eventlog::LogLanguage;
use crate::petrinet::{Marking, NetError, StochasticWorkflowNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// A visible firing exceeded `l_i` or `c_m`, or its label is not in the log alphabet.
    BoundExceeded,
    /// Deadlock without the sink marked.
    DeadlockNonFinal,
    /// Proper termination, but the trace is not in the log.
    NotInLog,
    /// The run exceeded the firing cap (silent livelock guard).
    FiringCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted(usize),
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorRunResult {
    pub outcome: Outcome,
    pub fired_count: usize,
    /// Visible activities seen, as log letter codes.
    pub visible_trace: Vec<u32>,
}

/// Default cap on the number of firings per run: `10 * (c_m + |T|)`.
pub fn default_firing_cap(net: &StochasticWorkflowNet, lang: &LogLanguage) -> usize {
    10 * (lang.max_len() + net.transitions().len())
}

#[derive(Debug, Clone, Copy)]
enum Letter {
    Silent,
    /// Label outside the log alphabet: never synchronises.
    Foreign,
    Code(u32),
}

/// Detector bound to one net and one log, with reusable run state.
#[derive(Debug, Clone)]
pub struct Detector<'a> {
    net: &'a StochasticWorkflowNet,
    lang: &'a LogLanguage,
    letters: Vec<Letter>,
    firing_cap: usize,
    marking: Marking,
    enabled: Vec<usize>,
    counts: Vec<u32>,
    word: WordAccumulator,
    trace: Vec<u32>,
    fired: usize,
}

impl<'a> Detector<'a> {
    pub fn new(net: &'a StochasticWorkflowNet, lang: &'a LogLanguage, firing_cap: usize) -> Self {
        let letters = net
            .transitions()
            .iter()
            .map(|t| match &t.label {
                None => Letter::Silent,
                Some(l) => lang.letter_code(l).map_or(Letter::Foreign, Letter::Code),
            })
            .collect();
        Self {
            net,
            lang,
            letters,
            firing_cap,
            marking: net.initial_marking().clone(),
            enabled: Vec::with_capacity(net.transitions().len()),
            counts: vec![0; lang.alphabet().len()],
            word: WordAccumulator::new(lang.alphabet().len() as u32),
            trace: Vec::with_capacity(lang.max_len()),
            fired: 0,
        }
    }

    /// Whether firing `t` from the current state keeps the detector guards.
    fn admits(&self, t: usize) -> bool {
        match self.letters[t] {
            Letter::Silent => true,
            Letter::Foreign => false,
            Letter::Code(c) => {
                let i = c as usize - 1;
                self.counts[i] < self.lang.letter_maxima()[i]
                    && self.trace.len() < self.lang.max_len()
            }
        }
    }

    /// One run. The visible trace stays available through [`Self::visible_trace`].
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Outcome, NetError> {
        self.marking.clone_from(self.net.initial_marking());
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.word.reset();
        self.trace.clear();
        self.fired = 0;

        loop {
            self.net.enabled_into(&self.marking, &mut self.enabled);
            if self.enabled.is_empty() {
                if !self.net.sink_marked(&self.marking) {
                    return Ok(Outcome::Rejected(RejectReason::DeadlockNonFinal));
                }
                let hit = match self.word.small() {
                    Some(w) => self.lang.convex_index_small(w),
                    None => self.lang.convex_index(&self.word.value()),
                };
                return Ok(match hit {
                    Some(i) => Outcome::Accepted(i),
                    None => Outcome::Rejected(RejectReason::NotInLog),
                });
            }
            if self.fired >= self.firing_cap {
                return Ok(Outcome::Rejected(RejectReason::FiringCap));
            }
            // every continuation blocks the detector
            if self.enabled.iter().all(|&t| !self.admits(t)) {
                return Ok(Outcome::Rejected(RejectReason::BoundExceeded));
            }
            let t = self.net.sample_enabled(&self.enabled, rng);
            if !self.admits(t) {
                return Ok(Outcome::Rejected(RejectReason::BoundExceeded));
            }
            self.net.fire_in_place(&mut self.marking, t)?;
            self.fired += 1;
            if let Letter::Code(c) = self.letters[t] {
                self.word.push(c);
                self.counts[c as usize - 1] += 1;
                self.trace.push(c);
            }
        }
    }

    pub fn visible_trace(&self) -> &[u32] {
        &self.trace
    }

    pub fn fired_count(&self) -> usize {
        self.fired
    }
}

/// Simulates one run of `net` synchronised with the detector of `lang`.
pub fn run_detector<R: Rng + ?Sized>(
    net: &StochasticWorkflowNet,
    lang: &LogLanguage,
    firing_cap: usize,
    rng: &mut R,
) -> Result<DetectorRunResult, NetError> {
    let mut d = Detector::new(net, lang, firing_cap);
    let outcome = d.run(rng)?;
    Ok(DetectorRunResult {
        outcome,
        fired_count: d.fired,
        visible_trace: d.trace,
    })
}
