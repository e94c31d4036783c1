//! Command-line front end: `seqparadox <subcommand> [flags]`.
//!
//! Every flag can also be supplied through `--config <file>`, a flat
//! `key = value` file whose keys mirror the long flag names; command-line
//! flags take precedence. Stochastic commands require an explicit seed (on
//! the command line or in the config file) so there is no silent
//! nondeterminism; `reproduce-example` carries a documented default seed
//! because it is a fixed reproduction.
//!
//! Human-readable output goes to stdout at the precision of the original
//! analysis write-up; machine-readable artifacts (`--output json|csv`) are
//! emitted at full precision, to stdout or atomically to `--out <path>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bayes::{
    default_mcmc_step, hier_density, hier_posterior, sample_mcmc, DesignPrior, PosteriorSummary,
    SummaryMethod, ThetaPrior,
};
use crate::calibration::{
    bias_mc_study, greedy_miscalibration_demo, replicates_to_csv, run_sbc_replicates,
    selection_shift_study, BiasMcReport, PosteriorKind, SelectionShiftReport, StratumStats,
    UniformityReport, UniverseConfig,
};
use crate::error::{Error, Result};
use crate::freq::{bias_corrected_estimate, mle};
use crate::stats::rng::RngStream;
use crate::trial::{
    simulate_trial, summarize, DesignConfig, Investigator, TrialData, TrialSummary,
};

/// The bundled worked-example data (first-stage and second-stage
/// observations at the printed precision of the source tables).
pub const TABLE1_CSV: &str = include_str!("../data/table1.csv");

/// Documented default seed of `reproduce-example`; every other stochastic
/// command requires an explicit `--seed`.
pub const REPRODUCE_DEFAULT_SEED: u64 = 0x5EED;

const DEFAULT_QUANTILES: &str = "0.025,0.5,0.975";

#[derive(Parser, Debug)]
#[command(
    name = "seqparadox",
    version,
    about = "Frequentist and Bayesian analyses of a one-interim group-sequential trial",
    propagate_version = true
)]
struct Cli {
    /// Flat key = value config file; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write the machine-readable artifact to this path (atomically).
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Artifact format; without --out, the artifact replaces the
    /// human-readable stdout report.
    #[arg(long, global = true, value_enum, value_name = "FORMAT")]
    output: Option<OutputFormat>,

    /// Size of the worker pool for replicate-parallel studies (never
    /// changes results, only wall-clock time).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduce the worked example end to end from the bundled fixture.
    ReproduceExample(ReproduceArgs),
    /// Simulate one two-stage trial and emit it in the y1,y2,x CSV layout.
    Simulate(SimulateArgs),
    /// Frequentist estimates (MLE and bias-corrected) from a data file.
    Estimate(EstimateArgs),
    /// Posterior summaries (conjugate and hierarchical) from a data file.
    Posterior(PosteriorArgs),
    /// Monte Carlo verification of the closed-form bias formulas.
    BiasStudy(BiasStudyArgs),
    /// Calibration studies: SBC or the selection-shift demonstration.
    Calibrate(CalibrateArgs),
    /// Greedy stopping-rule miscalibration demo (Beta-Bernoulli).
    GreedyDemo(GreedyDemoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InvestigatorArg {
    A,
    B,
}

impl From<InvestigatorArg> for Investigator {
    fn from(v: InvestigatorArg) -> Self {
        match v {
            InvestigatorArg::A => Investigator::A,
            InvestigatorArg::B => Investigator::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Sbc,
    SelectionShift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PosteriorKindArg {
    Conjugate,
    Hierarchical,
}

#[derive(Args, Debug, Default)]
struct DesignFlags {
    /// Observations per stage (defaults to the fixture's 5; ignored when
    /// the data file fixes it).
    #[arg(long)]
    n: Option<usize>,
    /// Known observation standard deviation σ.
    #[arg(long)]
    sigma: Option<f64>,
    /// Continuation threshold ψ (continue iff first-stage mean ≤ ψ).
    #[arg(long)]
    psi: Option<f64>,
    /// Whose design: A (fixed size 2n) or B (sequential).
    #[arg(long, value_enum)]
    investigator: Option<InvestigatorArg>,
}

#[derive(Args, Debug, Default)]
struct PriorFlags {
    /// Effect prior mean μ.
    #[arg(long)]
    mu: Option<f64>,
    /// Effect prior standard deviation τ.
    #[arg(long)]
    tau: Option<f64>,
    /// Use the (improper) flat effect prior instead of N(μ, τ²).
    #[arg(long, default_value_t = false)]
    flat: bool,
    /// Threshold prior intercept a in Ψ = a + bΘ + ε.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Threshold prior slope b.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Threshold prior noise sd ω.
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[command(flatten)]
    design: DesignFlags,
    #[command(flatten)]
    prior: PriorFlags,
    /// Analyze this data file instead of the bundled fixture.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Post-burn-in MCMC draws per posterior.
    #[arg(long)]
    mcmc_draws: Option<usize>,
    /// MCMC burn-in iterations.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Seed (documented default: 0x5EED).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of θ grid points for the density curves.
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignFlags,
    /// True effect θ to simulate under.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Seed (required).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    design: DesignFlags,
    /// Trial data CSV in the y1,y2,x layout (default: bundled fixture).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PosteriorArgs {
    #[command(flatten)]
    design: DesignFlags,
    #[command(flatten)]
    prior: PriorFlags,
    /// Trial data CSV in the y1,y2,x layout (default: bundled fixture).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Comma-separated posterior quantile probabilities.
    #[arg(long)]
    quantiles: Option<String>,
    /// Also summarize this many post-burn-in MCMC draws (needs --seed).
    #[arg(long)]
    mcmc_draws: Option<usize>,
    /// MCMC burn-in iterations.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Seed (required only with --mcmc-draws).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct BiasStudyArgs {
    #[command(flatten)]
    design: DesignFlags,
    /// True effect θ to simulate under.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Monte Carlo replicates (at least 10^4).
    #[arg(long)]
    reps: Option<usize>,
    /// Seed (required).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    design: DesignFlags,
    #[command(flatten)]
    prior: PriorFlags,
    /// Which study to run.
    #[arg(long, value_enum, default_value_t = StudyKind::Sbc)]
    study: StudyKind,
    /// Posterior evaluated by the SBC study.
    #[arg(long, value_enum)]
    posterior: Option<PosteriorKindArg>,
    /// Keep the threshold fixed at ψ (no design prior in the universe).
    #[arg(long, default_value_t = false)]
    fixed_psi: bool,
    /// Retain only replicates with this continuation indicator (0 or 1).
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    condition_x: Option<u8>,
    /// Selection-shift only: condition on this observed first-stage mean
    /// instead of simulating each replicate's own first stage.
    #[arg(long, allow_hyphen_values = true)]
    reference_ybar1: Option<f64>,
    /// Replicates (retained quota when conditioning).
    #[arg(long)]
    reps: Option<usize>,
    /// Seed (required).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GreedyDemoArgs {
    /// Bernoulli draws per replicate.
    #[arg(long)]
    n_total: Option<usize>,
    /// Beta prior shape α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Beta prior shape β.
    #[arg(long)]
    beta: Option<f64>,
    /// Replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed (required).
    #[arg(long)]
    seed: Option<u64>,
}

/// Entry point for `main`: parses `std::env::args`, runs, and maps errors
/// to a nonzero exit status (clap itself exits 2 on usage errors).
pub fn run() -> i32 {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    match execute(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Testable entry point: parses the given argv (including the binary name)
/// and writes all stdout output to `out`.
pub fn run_from<I, T>(args: I, out: &mut (dyn Write + Send)) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::InvalidConfig(format!("argument error: {e}")))?;
    execute(cli, out)
}

fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = ConfigMap::load(cli.config.as_deref())?;
    let sink = Sink {
        out_path: resolve_opt_path(cli.out, &cfg, "out"),
        format: match cli.output {
            Some(f) => Some(f),
            None => cfg.get_parsed_with(
                "output",
                |s| match s {
                    "json" => Ok(OutputFormat::Json),
                    "csv" => Ok(OutputFormat::Csv),
                    other => Err(format!("unknown output format {other:?} (json|csv)")),
                },
            )?,
        },
    };
    let workers = resolve_opt(cli.workers, &cfg, "workers")?;
    with_workers(workers, || match cli.command {
        Command::ReproduceExample(args) => cmd_reproduce(args, &cfg, &sink, out),
        Command::Simulate(args) => cmd_simulate(args, &cfg, &sink, out),
        Command::Estimate(args) => cmd_estimate(args, &cfg, &sink, out),
        Command::Posterior(args) => cmd_posterior(args, &cfg, &sink, out),
        Command::BiasStudy(args) => cmd_bias_study(args, &cfg, &sink, out),
        Command::Calibrate(args) => cmd_calibrate(args, &cfg, &sink, out),
        Command::GreedyDemo(args) => cmd_greedy_demo(args, &cfg, &sink, out),
    })
}

/// Runs `f` inside a dedicated rayon pool when a worker count is given.
/// All studies are deterministic per replicate stream, so this only
/// affects scheduling.
fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?
            .install(f),
    }
}

// ---------------------------------------------------------------------------
// Config file + flag resolution
// ---------------------------------------------------------------------------

/// Key–value pairs from `--config`; keys mirror long flag names.
struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                    context: format!("{}:{}", path.display(), lineno + 1),
                    reason: format!("expected `key = value`, found {raw:?}"),
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get_parsed_with<T>(
        &self,
        key: &str,
        parse: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => parse(raw).map(Some).map_err(|reason| Error::Parse {
                context: format!("config key `{key}`"),
                reason,
            }),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get_parsed_with(key, |raw| {
            raw.parse::<T>().map_err(|e| format!("cannot parse {raw:?}: {e}"))
        })
    }
}

/// Flag > config file > default.
fn resolve<T: FromStr>(flag: Option<T>, cfg: &ConfigMap, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

/// Flag > config file, no default.
fn resolve_opt<T: FromStr>(flag: Option<T>, cfg: &ConfigMap, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => Some(v),
        None => cfg.get(key)?,
    })
}

fn resolve_opt_path(flag: Option<PathBuf>, cfg: &ConfigMap, key: &str) -> Option<PathBuf> {
    flag.or_else(|| cfg.0.get(key).map(PathBuf::from))
}

/// A stochastic command refuses to run without a seed.
fn resolve_seed(flag: Option<u64>, cfg: &ConfigMap) -> Result<u64> {
    resolve_opt(flag, cfg, "seed")?.ok_or_else(|| {
        Error::InvalidConfig(
            "--seed is required for stochastic commands (pass the flag or set `seed` in the config file)"
                .to_string(),
        )
    })
}

fn resolve_investigator(
    flag: Option<InvestigatorArg>,
    cfg: &ConfigMap,
    default: Investigator,
) -> Result<Investigator> {
    if let Some(v) = flag {
        return Ok(v.into());
    }
    Ok(cfg
        .get_parsed_with("investigator", |s| match s {
            "A" | "a" => Ok(Investigator::A),
            "B" | "b" => Ok(Investigator::B),
            other => Err(format!("unknown investigator {other:?} (A|B)")),
        })?
        .unwrap_or(default))
}

/// Resolves the design flags against the fixture defaults
/// (n = 5, σ = 2, ψ = 1, investigator B). `n_from_data` overrides the per-
/// stage count when the data file fixes it.
fn resolve_design(
    flags: &DesignFlags,
    cfg: &ConfigMap,
    n_from_data: Option<usize>,
) -> Result<DesignConfig> {
    let n = match n_from_data {
        Some(n) => n,
        None => resolve(flags.n, cfg, "n", 5)?,
    };
    DesignConfig::new(
        n,
        resolve(flags.sigma, cfg, "sigma", 2.0)?,
        resolve(flags.psi, cfg, "psi", 1.0)?,
        resolve_investigator(flags.investigator, cfg, Investigator::B)?,
    )
}

/// Resolves the prior flags against the worked-example defaults
/// (μ = 1, τ = 2, a = −0.5, b = 1, ω = 0.1).
fn resolve_priors(flags: &PriorFlags, cfg: &ConfigMap) -> Result<(ThetaPrior, DesignPrior)> {
    let flat = flags.flat || cfg.get::<bool>("flat")?.unwrap_or(false);
    let theta_prior = if flat {
        ThetaPrior::Flat
    } else {
        ThetaPrior::normal(
            resolve(flags.mu, cfg, "mu", 1.0)?,
            resolve(flags.tau, cfg, "tau", 2.0)?,
        )?
    };
    let design_prior = DesignPrior::new(
        resolve(flags.a, cfg, "a", -0.5)?,
        resolve(flags.b, cfg, "b", 1.0)?,
        resolve(flags.omega, cfg, "omega", 0.1)?,
    )?;
    Ok((theta_prior, design_prior))
}

fn parse_quantiles(spec: &str) -> Result<Vec<f64>> {
    let probs: Vec<f64> = spec
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                context: "quantile list".to_string(),
                reason: format!("cannot parse {s:?}: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    for &p in &probs {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(
                "quantiles",
                format!("probability {p} must lie strictly inside (0, 1)"),
            ));
        }
    }
    Ok(probs)
}

fn load_data(path: Option<&Path>) -> Result<TrialData> {
    match path {
        Some(p) => TrialData::from_csv(&std::fs::read_to_string(p)?),
        None => TrialData::from_csv(TABLE1_CSV),
    }
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Sink {
    out_path: Option<PathBuf>,
    format: Option<OutputFormat>,
}

impl Sink {
    /// Routes a command's human report and artifact: with `--out` the
    /// artifact goes to the file (built fully before any byte is written,
    /// then renamed into place) and the human report to stdout; with only
    /// `--output` the artifact replaces the stdout report.
    fn emit(
        &self,
        human: &str,
        artifact: impl FnOnce(OutputFormat) -> Result<String>,
        out: &mut (dyn Write + Send),
    ) -> Result<()> {
        match (&self.out_path, self.format) {
            (Some(path), format) => {
                let rendered = artifact(format.unwrap_or(OutputFormat::Json))?;
                write_atomic(path, &rendered)?;
                write!(out, "{human}")?;
                writeln!(out, "wrote {}", path.display())?;
            }
            (None, Some(format)) => {
                let rendered = artifact(format)?;
                write!(out, "{rendered}")?;
            }
            (None, None) => write!(out, "{human}")?,
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp.{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

// ---------------------------------------------------------------------------
// reproduce-example
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct McmcBlock {
    mean: f64,
    sd: f64,
    acceptance_rate: f64,
    tuning_warning: bool,
    draws: usize,
    burn_in: usize,
    step: f64,
}

#[derive(Serialize)]
struct DensityGrid {
    theta: Vec<f64>,
    conjugate: Vec<f64>,
    hierarchical: Vec<f64>,
}

#[derive(Serialize)]
struct ReproduceReport {
    design: DesignConfig,
    summary: TrialSummary,
    mle: f64,
    bias_corrected: Option<f64>,
    conjugate: PosteriorSummary,
    hierarchical: PosteriorSummary,
    mcmc_conjugate: McmcBlock,
    mcmc_hierarchical: McmcBlock,
    seed: u64,
    density_grid: DensityGrid,
}

fn cmd_reproduce(
    args: ReproduceArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let data = load_data(args.data.as_deref())?;
    let design = resolve_design(&args.design, cfg, Some(data.n()))?;
    if !data.is_consistent_with(&design) {
        return Err(Error::InconsistentData(
            "data file does not match the design".to_string(),
        ));
    }
    let (theta_prior, design_prior) = resolve_priors(&args.prior, cfg)?;
    let seed = resolve(args.seed, cfg, "seed", REPRODUCE_DEFAULT_SEED)?;
    let mcmc_draws = resolve(args.mcmc_draws, cfg, "mcmc-draws", 200_000)?;
    let burn_in = resolve(args.burn_in, cfg, "burn-in", crate::bayes::DEFAULT_BURN_IN)?;
    let grid_points = resolve(args.grid_points, cfg, "grid-points", 201)?;
    if grid_points < 2 {
        return Err(Error::InvalidConfig(
            "grid-points must be at least 2".to_string(),
        ));
    }

    let summary = summarize(&data);
    let mle_hat = mle(&summary);
    let bias_corrected = match (design.investigator, summary.x) {
        (Investigator::B, true) => Some(bias_corrected_estimate(&summary, &design)?),
        _ => None,
    };

    let probs = parse_quantiles(DEFAULT_QUANTILES)?;
    let design_a = DesignConfig {
        investigator: Investigator::A,
        ..design
    };
    let conj_post = hier_posterior(&summary, &theta_prior, &design_prior, &design_a)?;
    let hier_post = hier_posterior(&summary, &theta_prior, &design_prior, &design)?;
    let conjugate = PosteriorSummary::from_closed_form(&conj_post, &probs)?;
    let hierarchical = PosteriorSummary::from_closed_form(&hier_post, &probs)?;

    let run_chain = |post, stream| -> Result<McmcBlock> {
        let step = default_mcmc_step(post);
        let mut rng = RngStream::new(seed, stream);
        let sample = sample_mcmc(post, mcmc_draws, burn_in, step, &mut rng)?;
        let drawn = PosteriorSummary::from_draws(post, &sample.draws, &probs, SummaryMethod::Mcmc)?;
        Ok(McmcBlock {
            mean: drawn.mean,
            sd: drawn.sd,
            acceptance_rate: sample.acceptance_rate,
            tuning_warning: sample.tuning_warning,
            draws: mcmc_draws,
            burn_in,
            step,
        })
    };
    let mcmc_conjugate = run_chain(&conj_post, 0)?;
    let mcmc_hierarchical = run_chain(&hier_post, 1)?;

    let spread = |s: &PosteriorSummary| (s.mean - 4.5 * s.sd, s.mean + 4.5 * s.sd);
    let (lo_c, hi_c) = spread(&conjugate);
    let (lo_h, hi_h) = spread(&hierarchical);
    let (lo, hi) = (lo_c.min(lo_h), hi_c.max(hi_h));
    let step_width = (hi - lo) / (grid_points - 1) as f64;
    let theta_grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * step_width).collect();
    let density_grid = DensityGrid {
        conjugate: theta_grid.iter().map(|&t| hier_density(t, &conj_post)).collect(),
        hierarchical: theta_grid.iter().map(|&t| hier_density(t, &hier_post)).collect(),
        theta: theta_grid,
    };

    let report = ReproduceReport {
        design,
        summary,
        mle: mle_hat,
        bias_corrected,
        conjugate,
        hierarchical,
        mcmc_conjugate,
        mcmc_hierarchical,
        seed,
        density_grid,
    };

    let mut human = String::new();
    let _ = writeln!(human, "Two-investigator worked example");
    let _ = writeln!(
        human,
        "  design: n = {} per stage, sigma = {}, psi = {}, investigator {}",
        report.design.n, report.design.sigma, report.design.psi, report.design.investigator
    );
    let _ = writeln!(
        human,
        "  data:   {} first-stage obs, x = {} ({})",
        report.summary.n,
        u8::from(report.summary.x),
        if report.summary.x { "continued" } else { "stopped" },
    );
    let _ = writeln!(human);
    let _ = writeln!(human, "Frequentist");
    let _ = writeln!(
        human,
        "  MLE (pooled mean)          {:.2}  (= {:.4})",
        report.mle, report.mle
    );
    match report.bias_corrected {
        Some(bc) => {
            let _ = writeln!(
                human,
                "  bias-corrected estimate    {:.1}   (= {:.4})",
                bc, bc
            );
        }
        None => {
            let _ = writeln!(
                human,
                "  bias-corrected estimate    (not defined for this design/outcome)"
            );
        }
    }
    let _ = writeln!(human);
    let _ = writeln!(human, "Bayesian posteriors");
    let _ = writeln!(
        human,
        "  conjugate       mean {:.4}   sd {:.4}   mode {:.4}",
        report.conjugate.mean, report.conjugate.sd, report.conjugate.mode
    );
    let _ = writeln!(
        human,
        "  hierarchical    mean {:.4}   sd {:.4}   mode {:.4}",
        report.hierarchical.mean, report.hierarchical.sd, report.hierarchical.mode
    );
    let _ = writeln!(
        human,
        "  MCMC conjugate      mean {:.2}   (acceptance {:.2}, {} draws)",
        report.mcmc_conjugate.mean, report.mcmc_conjugate.acceptance_rate, mcmc_draws
    );
    let _ = writeln!(
        human,
        "  MCMC hierarchical   mean {:.2}   (acceptance {:.2}, {} draws)",
        report.mcmc_hierarchical.mean, report.mcmc_hierarchical.acceptance_rate, mcmc_draws
    );
    let _ = writeln!(
        human,
        "  density curves: {} points on [{:.3}, {:.3}]",
        grid_points, lo, hi
    );

    sink.emit(
        &human,
        |format| match format {
            OutputFormat::Json => to_json_pretty(&report),
            OutputFormat::Csv => {
                let mut csv = String::from("theta,conjugate_density,hierarchical_density\n");
                for i in 0..report.density_grid.theta.len() {
                    let _ = writeln!(
                        csv,
                        "{},{},{}",
                        report.density_grid.theta[i],
                        report.density_grid.conjugate[i],
                        report.density_grid.hierarchical[i]
                    );
                }
                Ok(csv)
            }
        },
        out,
    )
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SimulateReport {
    design: DesignConfig,
    theta: f64,
    seed: u64,
    summary: TrialSummary,
    data: TrialData,
}

fn cmd_simulate(
    args: SimulateArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let design = resolve_design(&args.design, cfg, None)?;
    let theta = resolve_opt(args.theta, cfg, "theta")?
        .ok_or_else(|| Error::InvalidConfig("--theta is required for simulate".to_string()))?;
    let seed = resolve_seed(args.seed, cfg)?;
    let mut rng = RngStream::new(seed, 0);
    let data = simulate_trial(&design, theta, &mut rng)?;
    let summary = summarize(&data);

    let human = format!(
        "simulated trial (theta = {theta}, seed = {seed}): x = {} ({}), ybar1 = {:.4}, ybar = {:.4}, total obs = {}\n",
        u8::from(summary.x),
        if summary.x { "continued" } else { "stopped" },
        summary.ybar1,
        summary.ybar,
        data.sample_size(),
    );
    let report = SimulateReport {
        design,
        theta,
        seed,
        summary,
        data: data.clone(),
    };
    sink.emit(
        &human,
        |format| match format {
            OutputFormat::Json => to_json_pretty(&report),
            OutputFormat::Csv => Ok(data.to_csv()),
        },
        out,
    )
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EstimateReport {
    design: DesignConfig,
    summary: TrialSummary,
    mle: f64,
    /// Plug-in bias-corrected estimate; absent when the correction does not
    /// apply (investigator A, or a stopped trial).
    bias_corrected: Option<f64>,
    note: Option<String>,
}

fn cmd_estimate(
    args: EstimateArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let data = load_data(args.data.as_deref())?;
    let design = resolve_design(&args.design, cfg, Some(data.n()))?;
    if !data.is_consistent_with(&design) {
        return Err(Error::InconsistentData(
            "data file does not match the design".to_string(),
        ));
    }
    let summary = summarize(&data);
    let mle_hat = mle(&summary);
    let (bias_corrected, note) = match (design.investigator, summary.x) {
        (Investigator::B, true) => (Some(bias_corrected_estimate(&summary, &design)?), None),
        (Investigator::B, false) => (
            None,
            Some("no correction: the trial stopped (x = 0), where the plug-in correction is undefined".to_string()),
        ),
        (Investigator::A, _) => (
            None,
            Some("no correction: investigator A's fixed design is unbiased".to_string()),
        ),
    };

    let mut human = String::new();
    let _ = writeln!(
        human,
        "estimates (n = {}, sigma = {}, psi = {}, investigator {}):",
        design.n, design.sigma, design.psi, design.investigator
    );
    let _ = writeln!(human, "  MLE (pooled mean)        {:.4}", mle_hat);
    match (bias_corrected, &note) {
        (Some(bc), _) => {
            let _ = writeln!(human, "  bias-corrected estimate  {:.4}", bc);
        }
        (None, Some(n)) => {
            let _ = writeln!(human, "  bias-corrected estimate  n/a ({n})");
        }
        (None, None) => unreachable!("a missing correction always carries a note"),
    }
    let report = EstimateReport {
        design,
        summary,
        mle: mle_hat,
        bias_corrected,
        note,
    };
    sink.emit(
        &human,
        |format| match format {
            OutputFormat::Json => to_json_pretty(&report),
            OutputFormat::Csv => {
                let mut csv = String::from("quantity,value\n");
                let _ = writeln!(csv, "mle,{}", report.mle);
                if let Some(bc) = report.bias_corrected {
                    let _ = writeln!(csv, "bias_corrected,{bc}");
                }
                Ok(csv)
            }
        },
        out,
    )
}

// ---------------------------------------------------------------------------
// posterior
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PosteriorReport {
    design: DesignConfig,
    summary: TrialSummary,
    theta_prior: ThetaPrior,
    design_prior: DesignPrior,
    conjugate: PosteriorSummary,
    hierarchical: PosteriorSummary,
    mcmc: Option<PosteriorSummary>,
}

fn cmd_posterior(
    args: PosteriorArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let data = load_data(args.data.as_deref())?;
    let design = resolve_design(&args.design, cfg, Some(data.n()))?;
    if !data.is_consistent_with(&design) {
        return Err(Error::InconsistentData(
            "data file does not match the design".to_string(),
        ));
    }
    let (theta_prior, design_prior) = resolve_priors(&args.prior, cfg)?;
    let quantile_spec = resolve(args.quantiles, cfg, "quantiles", DEFAULT_QUANTILES.to_string())?;
    let probs = parse_quantiles(&quantile_spec)?;
    let summary = summarize(&data);

    let design_a = DesignConfig {
        investigator: Investigator::A,
        ..design
    };
    let conj_post = hier_posterior(&summary, &theta_prior, &design_prior, &design_a)?;
    let hier_post = hier_posterior(&summary, &theta_prior, &design_prior, &design)?;
    let conjugate = PosteriorSummary::from_closed_form(&conj_post, &probs)?;
    let hierarchical = PosteriorSummary::from_closed_form(&hier_post, &probs)?;

    let mcmc_draws = resolve_opt(args.mcmc_draws, cfg, "mcmc-draws")?;
    let mcmc = match mcmc_draws {
        None => None,
        Some(m) => {
            let seed = resolve_seed(args.seed, cfg)?;
            let burn_in = resolve(args.burn_in, cfg, "burn-in", crate::bayes::DEFAULT_BURN_IN)?;
            let mut rng = RngStream::new(seed, 0);
            let sample = sample_mcmc(&hier_post, m, burn_in, default_mcmc_step(&hier_post), &mut rng)?;
            Some(PosteriorSummary::from_draws(
                &hier_post,
                &sample.draws,
                &probs,
                SummaryMethod::Mcmc,
            )?)
        }
    };

    let mut human = String::new();
    let _ = writeln!(
        human,
        "posteriors (investigator {}, x = {}):",
        design.investigator,
        u8::from(summary.x)
    );
    let _ = writeln!(
        human,
        "  conjugate       mean {:.4}   sd {:.4}   mode {:.4}",
        conjugate.mean, conjugate.sd, conjugate.mode
    );
    let _ = writeln!(
        human,
        "  hierarchical    mean {:.4}   sd {:.4}   mode {:.4}",
        hierarchical.mean, hierarchical.sd, hierarchical.mode
    );
    if let Some(m) = &mcmc {
        let _ = writeln!(
            human,
            "  MCMC            mean {:.4}   sd {:.4}   ({} draws)",
            m.mean,
            m.sd,
            mcmc_draws.unwrap_or(0)
        );
    }
    for (key, value) in &hierarchical.quantiles {
        let _ = writeln!(human, "  hierarchical q{key:<6} {value:.4}");
    }

    let report = PosteriorReport {
        design,
        summary,
        theta_prior,
        design_prior,
        conjugate,
        hierarchical,
        mcmc,
    };
    sink.emit(
        &human,
        |format| match format {
            OutputFormat::Json => to_json_pretty(&report),
            OutputFormat::Csv => {
                let mut csv = String::from("posterior,quantity,value\n");
                for (name, s) in [("conjugate", &report.conjugate), ("hierarchical", &report.hierarchical)] {
                    let _ = writeln!(csv, "{name},mean,{}", s.mean);
                    let _ = writeln!(csv, "{name},mode,{}", s.mode);
                    let _ = writeln!(csv, "{name},sd,{}", s.sd);
                    for (key, value) in &s.quantiles {
                        let _ = writeln!(csv, "{name},q{key},{value}");
                    }
                }
                Ok(csv)
            }
        },
        out,
    )
}

// ---------------------------------------------------------------------------
// bias-study
// ---------------------------------------------------------------------------

fn cmd_bias_study(
    args: BiasStudyArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let design = resolve_design(&args.design, cfg, None)?;
    let theta = resolve_opt(args.theta, cfg, "theta")?
        .ok_or_else(|| Error::InvalidConfig("--theta is required for bias-study".to_string()))?;
    let reps = resolve(args.reps, cfg, "reps", 1_000_000)?;
    let seed = resolve_seed(args.seed, cfg)?;
    let report = bias_mc_study(theta, &design, reps, seed)?;

    let mut human = String::new();
    let _ = writeln!(
        human,
        "bias study at theta = {theta} ({} replicates, seed {seed}):",
        report.n_reps
    );
    let closed = report.closed_form.as_ref();
    let line = |label: &str, mc: Option<&StratumStats>, cf: Option<f64>| -> String {
        match (mc, cf) {
            (Some(mc), Some(cf)) => format!(
                "  {label:<22} mc {:.5} +/- {:.5}   closed form {:.5}",
                mc.mean, mc.se, cf
            ),
            (Some(mc), None) => format!("  {label:<22} mc {:.5} +/- {:.5}", mc.mean, mc.se),
            (None, Some(cf)) => format!("  {label:<22} (empty stratum)      closed form {:.5}", cf),
            (None, None) => format!("  {label:<22} (empty stratum)"),
        }
    };
    let _ = writeln!(
        human,
        "{}",
        line("marginal mean", Some(&report.marginal), closed.map(|c| c.marginal_mean))
    );
    let _ = writeln!(
        human,
        "{}",
        line("mean | stopped (x=0)", report.stopped.as_ref(), closed.map(|c| c.cond_mean_stop))
    );
    let _ = writeln!(
        human,
        "{}",
        line(
            "mean | continued (x=1)",
            report.continued.as_ref(),
            closed.map(|c| c.cond_mean_continue)
        )
    );
    let _ = writeln!(
        human,
        "{}",
        line(
            "continuation prob",
            Some(&report.continuation_prob),
            closed.map(|c| c.continuation_prob)
        )
    );

    sink.emit(
        &human,
        |format| match format {
            OutputFormat::Json => to_json_pretty(&report),
            OutputFormat::Csv => Ok(bias_report_csv(&report)),
        },
        out,
    )
}

fn bias_report_csv(report: &BiasMcReport) -> String {
    let mut csv = String::from("quantity,closed_form,mc_estimate,mc_se,n\n");
    let closed = report.closed_form.as_ref();
    let mut row = |name: &str, cf: Option<f64>, mc: Option<&StratumStats>| {
        let cf = cf.map(|v| v.to_string()).unwrap_or_default();
        match mc {
            Some(s) => {
                let _ = writeln!(csv, "{name},{cf},{},{},{}", s.mean, s.se, s.n);
            }
            None => {
                let _ = writeln!(csv, "{name},{cf},,,0");
            }
        }
    };
    row("marginal_mean", closed.map(|c| c.marginal_mean), Some(&report.marginal));
    row("cond_mean_stop", closed.map(|c| c.cond_mean_stop), report.stopped.as_ref());
    row(
        "cond_mean_continue",
        closed.map(|c| c.cond_mean_continue),
        report.continued.as_ref(),
    );
    row(
        "continuation_prob",
        closed.map(|c| c.continuation_prob),
        Some(&report.continuation_prob),
    );
    csv
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SbcReport {
    posterior: &'static str,
    condition_on_x: Option<bool>,
    report: UniformityReport,
}

fn cmd_calibrate(
    args: CalibrateArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let design = resolve_design(&args.design, cfg, None)?;
    let (theta_prior, design_prior) = resolve_priors(&args.prior, cfg)?;
    let fixed_psi = args.fixed_psi || cfg.get::<bool>("fixed-psi")?.unwrap_or(false);
    let universe = UniverseConfig {
        theta_prior,
        design_prior: if fixed_psi { None } else { Some(design_prior) },
        design,
        n_reps: resolve(args.reps, cfg, "reps", 2000)?,
        master_seed: resolve_seed(args.seed, cfg)?,
    };

    match args.study {
        StudyKind::Sbc => {
            let posterior = match args.posterior {
                Some(PosteriorKindArg::Conjugate) => PosteriorKind::Conjugate,
                Some(PosteriorKindArg::Hierarchical) | None => PosteriorKind::Hierarchical,
            };
            let condition_on_x = resolve_opt(args.condition_x, cfg, "condition-x")?.map(|v| v != 0);
            let (report, replicates) = run_sbc_replicates(&universe, posterior, condition_on_x)?;
            let posterior_name = match posterior {
                PosteriorKind::Conjugate => "conjugate",
                PosteriorKind::Hierarchical => "hierarchical",
            };
            let human = format!(
                "SBC ({posterior_name} posterior{}): n_used = {}, n_attempted = {}, KS = {:.4}, p = {:.4} -> {}\n",
                match condition_on_x {
                    Some(true) => ", conditioned on x = 1",
                    Some(false) => ", conditioned on x = 0",
                    None => "",
                },
                report.n_used,
                report.n_attempted,
                report.ks_statistic,
                report.ks_p_value,
                if report.passes(0.01) { "calibrated at alpha = 0.01" } else { "MISCALIBRATED at alpha = 0.01" },
            );
            sink.emit(
                &human,
                |format| match format {
                    OutputFormat::Json => to_json_pretty(&SbcReport {
                        posterior: posterior_name,
                        condition_on_x,
                        report,
                    }),
                    OutputFormat::Csv => Ok(replicates_to_csv(&replicates)),
                },
                out,
            )
        }
        StudyKind::SelectionShift => {
            let reference = resolve_opt(args.reference_ybar1, cfg, "reference-ybar1")?;
            let report = selection_shift_study(&universe, reference)?;
            let mut human = String::new();
            let _ = writeln!(
                human,
                "selection shift ({} replicates{}):",
                report.n_reps,
                match reference {
                    Some(r) => format!(", conditioned on observed ybar1 = {r}"),
                    None => ", marginal over first stages".to_string(),
                }
            );
            let stratum_line = |label: &str, s: Option<&StratumStats>| match s {
                Some(s) => format!("  {label:<22} mean {:.4} +/- {:.4}  (n = {})", s.mean, s.se, s.n),
                None => format!("  {label:<22} (empty stratum)"),
            };
            let _ = writeln!(human, "{}", stratum_line("overall", Some(&report.overall)));
            let _ = writeln!(human, "{}", stratum_line("continued (x=1)", report.continued.as_ref()));
            let _ = writeln!(human, "{}", stratum_line("stopped (x=0)", report.stopped.as_ref()));
            sink.emit(
                &human,
                |format| match format {
                    OutputFormat::Json => to_json_pretty(&report),
                    OutputFormat::Csv => Ok(selection_shift_csv(&report)),
                },
                out,
            )
        }
    }
}

fn selection_shift_csv(report: &SelectionShiftReport) -> String {
    let mut csv = String::from("stratum,n,mean,se\n");
    let mut row = |name: &str, s: Option<&StratumStats>| {
        if let Some(s) = s {
            let _ = writeln!(csv, "{name},{},{},{}", s.n, s.mean, s.se);
        } else {
            let _ = writeln!(csv, "{name},0,,");
        }
    };
    row("overall", Some(&report.overall));
    row("continued", report.continued.as_ref());
    row("stopped", report.stopped.as_ref());
    csv
}

// ---------------------------------------------------------------------------
// greedy-demo
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GreedyReport {
    n_total: usize,
    alpha: f64,
    beta: f64,
    naive: UniformityReport,
    full: UniformityReport,
}

fn cmd_greedy_demo(
    args: GreedyDemoArgs,
    cfg: &ConfigMap,
    sink: &Sink,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let n_total = resolve(args.n_total, cfg, "n-total", 50)?;
    let alpha = resolve(args.alpha, cfg, "alpha", 1.0)?;
    let beta = resolve(args.beta, cfg, "beta", 1.0)?;
    let reps = resolve(args.reps, cfg, "reps", 2000)?;
    let seed = resolve_seed(args.seed, cfg)?;
    let (naive, full) = greedy_miscalibration_demo(n_total, (alpha, beta), reps, seed)?;

    let verdict = |r: &UniformityReport| if r.passes(0.01) { "calibrated" } else { "MISCALIBRATED" };
    let human = format!(
        "greedy demo (N = {n_total}, Beta({alpha}, {beta}), {reps} replicates):\n  naive prefix posterior  KS p = {:.2e} -> {}\n  full-data posterior     KS p = {:.4} -> {}\n",
        naive.ks_p_value,
        verdict(&naive),
        full.ks_p_value,
        verdict(&full),
    );
    let report = GreedyReport {
        n_total,
        alpha,
        beta,
        naive,
        full,
    };
    sink.emit(
        &human,
        |format| match format {
            OutputFormat::Json => to_json_pretty(&report),
            OutputFormat::Csv => {
                let mut csv = String::from("posterior,bin_lo,bin_hi,count\n");
                for (name, rep) in [("naive", &report.naive), ("full", &report.full)] {
                    for (i, count) in rep.histogram.iter().enumerate() {
                        let _ = writeln!(
                            csv,
                            "{name},{},{},{count}",
                            i as f64 / rep.histogram.len() as f64,
                            (i + 1) as f64 / rep.histogram.len() as f64
                        );
                    }
                }
                Ok(csv)
            }
        },
        out,
    )
}
