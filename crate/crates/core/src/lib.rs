//! Weight discovery for stochastic workflow nets by approximate Bayesian
//! computation, with the supporting net, log, detector and distance code.

pub mod abc;
pub mod detector;
pub mod distance;
pub mod eventlog;
pub mod oracle;
pub mod petrinet;

pub use abc::{smc_discover, AbcConfig, AbcError, DiscoveryReport, Particle, Population};
pub use detector::{
    estimate_language, run_detector, Detector, EstimateConfig, EstimateError, LanguageEstimate,
    Outcome, RejectReason, WordMappingValue,
};
pub use distance::{
    emd, levenshtein, remd, DiscreteDistribution, DistanceError, GroundDistance, MassMode,
    RemdContext,
};
pub use eventlog::{parse_log, LogError, LogFormat, LogLanguage};
pub use oracle::{exact_language, normalized_restricted, ExactLanguage, OracleConfig, OracleError};
pub use petrinet::{
    Marking, NetBuilder, NetError, StochasticWorkflowNet, Transition, WeightVector,
};
