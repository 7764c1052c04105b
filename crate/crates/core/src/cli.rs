//! Command-line interface.
//!
//! Exit codes: 0 success, 2 invalid input or missing file, 3 degenerate
//! instance, 4 solver not applicable (exact single-class solver with K > 1),
//! 5 instance too large for an exact method. Diagnostics go to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::asymptotic_report;
use crate::engine::format_sig;
use crate::error::{MarketError, Result};
use crate::experiments::{
    generate_scheme, replay_manifest, run_figure_experiment, write_experiment, AppealNoise, ExperimentConfig,
    RunManifest, SchemeSpec, VisibilityProfile,
};
use crate::model::{PopularitySignal, Ranking};
use crate::policies::{
    brute_force_two_class_logit, performance_ranking_bruteforce, solve_two_class_logit, PerformanceSolver,
    ASSORTMENT_ENUMERATION_MAX_ITEMS,
};
use crate::{MarketConfig, TwoClassLogitInstance};

const MAX_GAP_CHECK_ITEMS: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "trialmarket", version, about = "Trial-offer market simulator and ranking optimizer")]
pub struct Cli {
    /// Worker threads for simulations (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a figure experiment and write CSVs plus a manifest.
    Simulate(SimulateArgs),
    /// Compute a performance ranking for a market file.
    Optimize(OptimizeArgs),
    /// Print limit purchase probabilities of the four policies as JSON.
    Asymptotics(InstanceArgs),
    /// Solve a two-class logit assortment instance through the ranking oracle.
    Reduce2cl(ReduceArgs),
    /// Write a generated scheme market as JSON.
    Scheme(SchemeArgs),
}

#[derive(Debug, Args)]
pub struct VisibilityArgs {
    /// Power-law exponent of the position visibilities.
    #[arg(long, default_value_t = 0.8, conflicts_with = "uniform_visibility")]
    pub visibility_exponent: f64,
    /// Give every position visibility 1.
    #[arg(long)]
    pub uniform_visibility: bool,
    #[arg(long, value_enum, default_value_t = NoiseArg::Multiplicative)]
    pub appeal_noise: NoiseArg,
}

impl VisibilityArgs {
    fn profile(&self) -> VisibilityProfile {
        if self.uniform_visibility {
            VisibilityProfile::Uniform
        } else {
            VisibilityProfile::PowerLaw {
                exponent: self.visibility_exponent,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    Multiplicative,
    Additive,
}

impl From<NoiseArg> for AppealNoise {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Multiplicative => AppealNoise::Multiplicative,
            NoiseArg::Additive => AppealNoise::Additive,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment description file (JSON).
    #[arg(long, conflicts_with_all = ["manifest", "scheme"])]
    pub config: Option<PathBuf>,
    /// Replay the experiment recorded in a manifest.
    #[arg(long, conflicts_with = "scheme")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<u8>,
    /// Figure id, e.g. me-scheme1 or profiles-scheme3-sqssi.
    #[arg(long)]
    pub figure: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub items: usize,
    #[arg(long, default_value_t = 5_000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub z: f64,
    #[command(flatten)]
    pub visibility: VisibilityArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    /// exact1 for K = 1, bruteforce up to 8 items, swap otherwise.
    Auto,
    Exact1,
    Bruteforce,
    Swap,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Market file (JSON).
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 1_000)]
    pub max_passes: usize,
    /// Global purchase counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<u64>>,
    /// Also write the ranking as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Market file (JSON).
    #[arg(long)]
    pub instance: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleArg {
    Bruteforce,
    Swap,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Two-class logit file (JSON with V1, V2, revenues, alpha).
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = OracleArg::Bruteforce)]
    pub oracle: OracleArg,
    #[arg(long, default_value_t = 1_000)]
    pub max_passes: usize,
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    #[arg(long)]
    pub scheme: u8,
    #[arg(long, default_value_t = 50)]
    pub items: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub z: f64,
    #[command(flatten)]
    pub visibility: VisibilityArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code for an error.
pub fn exit_code(err: &MarketError) -> i32 {
    match err {
        MarketError::InvalidInstance(_)
        | MarketError::InvalidArgument(_)
        | MarketError::UnknownFigure(_)
        | MarketError::Io(_) => 2,
        MarketError::DegenerateInstance(_)
        | MarketError::UndefinedShare
        | MarketError::TieBreakingViolation(_)
        | MarketError::Undefined(_) => 3,
        MarketError::UnsupportedSolver(_) => 4,
        MarketError::SizeLimit { .. } => 5,
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| MarketError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| MarketError::Io(format!("{}: {e}", path.display())))
}

fn load_market(path: &Path) -> Result<MarketConfig> {
    Ok(serde_json::from_str(&read_file(path)?)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn one_based(ranking: &Ranking) -> Vec<usize> {
    ranking.order().into_iter().map(|i| i + 1).collect()
}

fn simulate(args: &SimulateArgs, threads: Option<usize>) -> Result<()> {
    if let Some(path) = &args.manifest {
        let manifest = RunManifest::load(path)?;
        let (_, same) = replay_manifest(&manifest, &args.out, threads)?;
        if same {
            eprintln!("replay matches every recorded checksum");
        } else {
            eprintln!("replay differs from the recorded checksums");
            return Err(MarketError::InvalidInstance("manifest replay mismatch".into()));
        }
        return Ok(());
    }
    let config = match (&args.config, args.scheme) {
        (Some(path), _) => ExperimentConfig::from_json(&read_file(path)?)?,
        (None, Some(scheme)) => ExperimentConfig {
            scheme,
            figure: args.figure.clone(),
            num_items: args.items,
            horizon: args.horizon,
            replications: args.reps,
            seed: args.seed,
            z: args.z,
            visibility_profile: args.visibility.profile(),
            appeal_noise: args.visibility.appeal_noise.into(),
        },
        (None, None) => {
            return Err(MarketError::InvalidArgument(
                "one of --config, --manifest or --scheme is required".into(),
            ))
        }
    };
    let run = run_figure_experiment(&config, threads)?;
    let manifest = write_experiment(&run, &args.out)?;
    for o in &manifest.outputs {
        eprintln!("wrote {}", args.out.join(&o.path).display());
    }
    Ok(())
}

fn optimize(args: &OptimizeArgs) -> Result<()> {
    let market = load_market(&args.instance)?;
    let signal = match &args.counts {
        Some(c) => PopularitySignal::Global(c.clone()),
        None => PopularitySignal::zeros(market.num_items()),
    };
    let (name, solver) = match args.solver {
        SolverArg::Exact1 => ("exact1", PerformanceSolver::Exact1Class),
        SolverArg::Bruteforce => ("bruteforce", PerformanceSolver::BruteForce),
        SolverArg::Swap => (
            "swap",
            PerformanceSolver::SwapHeuristic {
                max_passes: args.max_passes,
            },
        ),
        SolverArg::Auto if market.num_classes() == 1 => ("exact1", PerformanceSolver::Exact1Class),
        SolverArg::Auto if market.num_items() <= MAX_GAP_CHECK_ITEMS => ("bruteforce", PerformanceSolver::BruteForce),
        SolverArg::Auto => (
            "swap",
            PerformanceSolver::SwapHeuristic {
                max_passes: args.max_passes,
            },
        ),
    };
    let sol = solver.run(&market, &signal)?;
    let reference = if market.num_items() <= MAX_GAP_CHECK_ITEMS {
        Some(performance_ranking_bruteforce(&market, &signal)?.1)
    } else {
        None
    };
    print_json(&json!({
        "solver": name,
        "exact": sol.exact,
        "heuristic": !sol.exact,
        "order": one_based(&sol.ranking),
        "objective": sol.objective,
        "bruteforce_objective": reference,
        "gap": reference.map(|r| r - sol.objective),
    }))?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["position", "item"])?;
        for (pos, item) in one_based(&sol.ranking).into_iter().enumerate() {
            w.write_record([(pos + 1).to_string(), item.to_string()])?;
        }
        w.write_record(["objective", &format_sig(sol.objective)])?;
        let bytes = w.into_inner().map_err(|e| MarketError::Io(e.to_string()))?;
        write_file(path, &bytes)?;
    }
    Ok(())
}

fn reduce(args: &ReduceArgs) -> Result<()> {
    let inst: TwoClassLogitInstance = serde_json::from_str(&read_file(&args.instance)?)?;
    let oracle = match args.oracle {
        OracleArg::Bruteforce => PerformanceSolver::BruteForce,
        OracleArg::Swap => PerformanceSolver::SwapHeuristic {
            max_passes: args.max_passes,
        },
    };
    let sol = solve_two_class_logit(&inst, &oracle)?;
    let check = if inst.num_products() <= ASSORTMENT_ENUMERATION_MAX_ITEMS {
        Some(brute_force_two_class_logit(&inst)?)
    } else {
        None
    };
    let one = |s: &[usize]| s.iter().map(|i| i + 1).collect::<Vec<_>>();
    print_json(&json!({
        "assortment": one(&sol.assortment),
        "value": sol.value,
        "exact": sol.exact,
        "enumeration_assortment": check.as_ref().map(|c| one(&c.assortment)),
        "enumeration_value": check.as_ref().map(|c| c.value),
    }))
}

fn scheme(args: &SchemeArgs) -> Result<()> {
    let spec = SchemeSpec {
        scheme: args.scheme,
        num_items: args.items,
        seed: args.seed,
        z: args.z,
        visibility: args.visibility.profile(),
        appeal_noise: args.visibility.appeal_noise.into(),
    };
    let market = generate_scheme(&spec)?;
    let text = serde_json::to_string_pretty(&market)? + "\n";
    match &args.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, cli.threads),
        Command::Optimize(a) => optimize(a),
        Command::Asymptotics(a) => print_json(&asymptotic_report(&load_market(&a.instance)?)),
        Command::Reduce2cl(a) => reduce(a),
        Command::Scheme(a) => scheme(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&MarketError::Io("x".into())), 2);
        assert_eq!(exit_code(&MarketError::DegenerateInstance("x".into())), 3);
        assert_eq!(exit_code(&MarketError::UnsupportedSolver("x".into())), 4);
        assert_eq!(
            exit_code(&MarketError::SizeLimit {
                what: "x",
                size: 10,
                limit: 9
            }),
            5
        );
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "trialmarket", "simulate", "--scheme", "1", "--items", "20", "--horizon", "5000", "--reps", "1000",
            "--seed", "7", "--out", "x", "--threads", "2",
        ])
        .unwrap();
        assert_eq!(cli.threads, Some(2));
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!((a.scheme, a.items, a.horizon, a.reps, a.seed), (Some(1), 20, 5000, 1000, 7));
        let cli = Cli::try_parse_from(["trialmarket", "optimize", "--instance", "m.json", "--counts", "1,2,3"]).unwrap();
        let Command::Optimize(a) = cli.command else { panic!() };
        assert_eq!(a.counts, Some(vec![1, 2, 3]));
    }
}
