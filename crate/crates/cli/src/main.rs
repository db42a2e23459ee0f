use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use swnabc::abc::{weights_json, write_posterior_csv};
use swnabc::distance::restricted_emd;
use swnabc::eventlog::parse_language_dump;
use swnabc::petrinet::validate_workflow;
use swnabc::{
    emd, estimate_language, exact_language, smc_discover, AbcConfig, AbcError,
    DiscreteDistribution, EstimateConfig, EstimateError, ExactLanguage, GroundDistance,
    OracleConfig, OracleError,
};

mod inputs;

use inputs::{read_log, read_net, read_workflow_net, OutDir};

/// Weight discovery and stochastic-language tools for workflow nets.
#[derive(Debug, Parser)]
#[command(name = "swnabc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a net is a workflow net and compare its labels with a log.
    Validate { net: PathBuf, log: PathBuf },
    /// Estimate the net's language restricted to the log by simulation.
    EstimateLang {
        net: PathBuf,
        log: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compute the net's exact language restricted to the log.
    ExactLang {
        net: PathBuf,
        log: PathBuf,
        /// Exact rational arithmetic instead of floating point.
        #[arg(long)]
        rational: bool,
        #[arg(long)]
        node_budget: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Earth Mover's Distance between two language dumps.
    Emd {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, value_enum, default_value_t = Ground::Normalized)]
        ground: Ground,
        /// Restrict the second language to the support of the first and renormalize.
        #[arg(long)]
        restricted: bool,
    },
    /// Discover transition weights by ABC-SMC.
    Discover {
        net: PathBuf,
        log: PathBuf,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        max_layers: Option<usize>,
        #[arg(long, value_enum)]
        ground: Option<Ground>,
        /// JSON file with discovery settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Confidence level of the per-trace intervals.
    #[arg(long)]
    confidence: Option<f64>,
    /// Target full width of the per-trace intervals.
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    max_runs: Option<u64>,
    /// Random seed; drawn at random and echoed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "swnabc-out")]
    out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Ground {
    Normalized,
    Raw,
}

impl From<Ground> for GroundDistance {
    fn from(g: Ground) -> Self {
        match g {
            Ground::Normalized => GroundDistance::Normalized,
            Ground::Raw => GroundDistance::Raw,
        }
    }
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 1;
const INPUT: u8 = 2;
const ALGORITHM: u8 = 3;

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn summary(pairs: &[(&str, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{}", line.join(" "));
}

fn validate(net_path: &Path, log_path: &Path) -> Result<(), Failure> {
    let net = read_net(net_path).exit_with(INPUT)?;
    let lang = read_log(log_path).exit_with(INPUT)?;
    let report = validate_workflow(&net);
    eprintln!("{}", report.to_string().trim_end());
    let labels = net.visible_labels();
    let unlabeled: Vec<&str> = lang
        .alphabet()
        .iter()
        .map(String::as_str)
        .filter(|a| !labels.contains(a))
        .collect();
    let unused: Vec<&str> = labels
        .iter()
        .copied()
        .filter(|l| lang.letter_code(l).is_none())
        .collect();
    for a in &unlabeled {
        log::warn!("log activity unlabeled in net: {a}");
    }
    for l in &unused {
        log::warn!("net label absent from log: {l}");
    }
    let valid = report.is_valid() && unlabeled.is_empty();
    summary(&[
        ("valid", valid.to_string()),
        ("violations", report.violations.len().to_string()),
        ("log_activities", lang.alphabet().len().to_string()),
        ("net_labels", labels.len().to_string()),
        ("unlabeled_log_activities", unlabeled.join(",")),
        ("unused_net_labels", unused.join(",")),
    ]);
    if valid {
        Ok(())
    } else {
        Err(Failure {
            code: INPUT,
            error: anyhow!("validation failed"),
        })
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        log::info!("no seed given, using {s}");
        s
    })
}

fn estimate(net_path: &Path, log_path: &Path, sim: &SimArgs, out: &OutArgs) -> Result<(), Failure> {
    let net = read_workflow_net(net_path).exit_with(INPUT)?;
    let lang = read_log(log_path).exit_with(INPUT)?;
    let defaults = EstimateConfig::default();
    let cfg = EstimateConfig {
        confidence: sim.confidence.unwrap_or(defaults.confidence),
        width: sim.width.unwrap_or(defaults.width),
        max_runs: sim.max_runs.unwrap_or(defaults.max_runs),
        seed: resolve_seed(sim.seed),
        workers: sim.workers.unwrap_or_else(default_workers),
        ..defaults
    };
    let dir = OutDir::new(&out.out, out.force, &["language.json"]).exit_with(USAGE)?;
    let est = estimate_language(&net, &lang, &cfg).map_err(|e| Failure {
        code: match e {
            EstimateError::InvalidParameter(_) => USAGE,
            _ => ALGORITHM,
        },
        error: e.into(),
    })?;
    if !est.converged {
        log::warn!(
            "stopped at {} runs with interval width {:.6} above the target {}",
            est.runs_total,
            est.achieved_width,
            cfg.width
        );
    }
    dir.write_json("language.json", &est.to_json(&lang))
        .exit_with(ALGORITHM)?;
    summary(&[
        ("command", "estimate-lang".into()),
        ("runs", est.runs_total.to_string()),
        ("accepted", est.runs_accepted.to_string()),
        ("converged", est.converged.to_string()),
        ("confidence", cfg.confidence.to_string()),
        ("width", cfg.width.to_string()),
        ("max_runs", cfg.max_runs.to_string()),
        ("seed", cfg.seed.to_string()),
        ("workers", cfg.workers.to_string()),
        ("out", dir.path("language.json").display().to_string()),
    ]);
    Ok(())
}

fn exact(
    net_path: &Path,
    log_path: &Path,
    rational: bool,
    node_budget: Option<usize>,
    out: &OutArgs,
) -> Result<(), Failure> {
    let net = read_workflow_net(net_path).exit_with(INPUT)?;
    let lang = read_log(log_path).exit_with(INPUT)?;
    let cfg = OracleConfig {
        node_budget: node_budget.unwrap_or(OracleConfig::default().node_budget),
        ..OracleConfig::default()
    };
    let dir = OutDir::new(&out.out, out.force, &["language.json"]).exit_with(USAGE)?;
    let to_failure = |e: OracleError| Failure {
        code: ALGORITHM,
        error: e.into(),
    };
    let (ex, exact_text) = if rational {
        let ex: ExactLanguage<BigRational> =
            exact_language(&net, &lang, &cfg).map_err(to_failure)?;
        let text: Vec<String> = ex.probs.iter().map(ToString::to_string).collect();
        (ex.to_f64(), Some(text))
    } else {
        (
            exact_language::<f64>(&net, &lang, &cfg).map_err(to_failure)?,
            None,
        )
    };
    let mut meta = serde_json::json!({
        "mode": if rational { "rational" } else { "float" },
        "accepted_mass": ex.accepted_mass(),
        "rejected_mass": ex.rejected_mass,
        "truncated_mass": ex.truncated_mass,
        "nodes": ex.nodes,
    });
    if let Some(text) = exact_text {
        meta["exact"] = text.into();
    }
    let doc = serde_json::json!({
        "language": lang.dump_with(&ex.probs),
        "meta": meta,
    });
    dir.write_json("language.json", &doc).exit_with(ALGORITHM)?;
    summary(&[
        ("command", "exact-lang".into()),
        ("mode", if rational { "rational" } else { "float" }.into()),
        ("accepted_mass", ex.accepted_mass().to_string()),
        ("rejected_mass", ex.rejected_mass.to_string()),
        ("truncated_mass", ex.truncated_mass.to_string()),
        ("out", dir.path("language.json").display().to_string()),
    ]);
    Ok(())
}

fn read_dump(path: &Path) -> anyhow::Result<DiscreteDistribution> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries =
        parse_language_dump(&text).with_context(|| format!("parsing {}", path.display()))?;
    DiscreteDistribution::from_dump(&entries).with_context(|| format!("in {}", path.display()))
}

fn distance(first: &Path, second: &Path, ground: Ground, restricted: bool) -> Result<(), Failure> {
    let p = read_dump(first).exit_with(INPUT)?;
    let q = read_dump(second).exit_with(INPUT)?;
    let (d, zero_mass) = if restricted {
        let r = restricted_emd(&p, &q, ground.into()).exit_with(INPUT)?;
        (r.distance, r.zero_mass)
    } else {
        (emd(&p, &q, ground.into()).exit_with(INPUT)?, false)
    };
    if zero_mass {
        log::warn!("the second language has no mass on the support of the first");
    }
    summary(&[
        ("emd", d.to_string()),
        ("ground", GroundDistance::from(ground).to_string()),
        ("restricted", restricted.to_string()),
        ("zero_mass", zero_mass.to_string()),
    ]);
    Ok(())
}

struct DiscoverArgs<'a> {
    particles: Option<usize>,
    eps1: Option<f64>,
    zeta: Option<f64>,
    max_layers: Option<usize>,
    ground: Option<Ground>,
    config: Option<&'a Path>,
    sim: &'a SimArgs,
}

/// Config file first, then flags; the seed and worker count are always resolved.
fn discover_config(args: &DiscoverArgs<'_>) -> anyhow::Result<AbcConfig> {
    let (mut cfg, file_seed, file_workers) = match args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let has = |k: &str| value.get(k).is_some();
            let (seed, workers) = (has("seed"), has("workers"));
            let cfg: AbcConfig = serde_json::from_value(value)
                .with_context(|| format!("invalid settings in {}", path.display()))?;
            (cfg, seed, workers)
        }
        None => (AbcConfig::default(), false, false),
    };
    let sim = args.sim;
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v.into();
            }
        };
    }
    set!(particles, args.particles);
    set!(eps1, args.eps1);
    set!(zeta, args.zeta);
    set!(max_layers, args.max_layers);
    set!(ground, args.ground);
    set!(confidence, sim.confidence);
    set!(width, sim.width);
    set!(max_runs, sim.max_runs);
    if sim.seed.is_some() || !file_seed {
        cfg.seed = resolve_seed(sim.seed);
    }
    if let Some(w) = sim.workers {
        cfg.workers = w;
    } else if !file_workers {
        cfg.workers = default_workers();
    }
    Ok(cfg)
}

fn discover(
    net_path: &Path,
    log_path: &Path,
    args: &DiscoverArgs<'_>,
    out: &OutArgs,
) -> Result<(), Failure> {
    let cfg = discover_config(args).exit_with(USAGE)?;
    let net = read_workflow_net(net_path).exit_with(INPUT)?;
    let lang = read_log(log_path).exit_with(INPUT)?;
    let files = ["report.json", "posterior.csv", "weights.json"];
    let dir = OutDir::new(&out.out, out.force, &files).exit_with(USAGE)?;
    let report = smc_discover(&net, &lang, &cfg).map_err(|e| Failure {
        code: match e {
            AbcError::InvalidParameter(_) => USAGE,
            _ => ALGORITHM,
        },
        error: e.into(),
    })?;
    dir.write_json("report.json", &report)
        .exit_with(ALGORITHM)?;
    let mut csv = Vec::new();
    write_posterior_csv(&report, &mut csv).exit_with(ALGORITHM)?;
    dir.write_bytes("posterior.csv", &csv)
        .exit_with(ALGORITHM)?;
    dir.write_json("weights.json", &weights_json(&report))
        .exit_with(ALGORITHM)?;
    let tolerances: Vec<String> = report
        .tolerances()
        .iter()
        .map(|t| format!("{t:.6}"))
        .collect();
    summary(&[
        ("command", "discover".into()),
        ("layers", report.layers.len().to_string()),
        ("best_score", report.best.score.to_string()),
        (
            "termination",
            serde_json::to_value(report.termination)
                .unwrap()
                .as_str()
                .unwrap_or("")
                .into(),
        ),
        ("total_runs", report.total_runs.to_string()),
        ("tolerances", tolerances.join(",")),
        ("particles", cfg.particles.to_string()),
        ("eps1", cfg.eps1.to_string()),
        ("zeta", cfg.zeta.to_string()),
        ("confidence", cfg.confidence.to_string()),
        ("width", cfg.width.to_string()),
        ("max_runs", cfg.max_runs.to_string()),
        ("max_layers", cfg.max_layers.to_string()),
        ("ground", cfg.ground.to_string()),
        ("seed", cfg.seed.to_string()),
        ("workers", cfg.workers.to_string()),
        ("out", dir.root().display().to_string()),
    ]);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { net, log } => validate(net, log),
        Command::EstimateLang { net, log, sim, out } => estimate(net, log, sim, out),
        Command::ExactLang {
            net,
            log,
            rational,
            node_budget,
            out,
        } => exact(net, log, *rational, *node_budget, out),
        Command::Emd {
            first,
            second,
            ground,
            restricted,
        } => distance(first, second, *ground, *restricted),
        Command::Discover {
            net,
            log,
            particles,
            eps1,
            zeta,
            max_layers,
            ground,
            config,
            sim,
            out,
        } => {
            let args = DiscoverArgs {
                particles: *particles,
                eps1: *eps1,
                zeta: *zeta,
                max_layers: *max_layers,
                ground: *ground,
                config: config.as_deref(),
                sim,
            };
            discover(net, log, &args, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
