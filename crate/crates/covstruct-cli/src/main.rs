//! Command-line front end: structure tests, simulation tables, and the
//! combined multiple-contrast test, all emitting versioned JSON documents.
//!
//! Exit codes: 0 when a test ran to a decision (rejection included), 2 on
//! usage or schema errors, 3 on data errors, 4 on numerical degeneracy.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

use covstruct::engine::{run_structure_test, Method, TestConfig};
use covstruct::hotelling::mean_test;
use covstruct::hypothesis::{Domain, HypothesisKind, Variant};
use covstruct::mctp::{sphericity_contrast_test, MctpConfig, QuantileMode};
use covstruct::sim::{run_preset, run_scenario, PresetTable, Scenario, TableRow};
use covstruct::Error;

mod document;
mod io;

use document::{ResultDocument, Timing};

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> CliError {
        CliError { code: 3, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> CliError {
        CliError { code: 4, message: message.into() }
    }
}

/// Errors raised while running a test on already-loaded data.
fn map_run_err(e: Error) -> CliError {
    match &e {
        Error::InvalidParam(_) | Error::Unsupported(_) | Error::Dim { .. } => {
            CliError::usage(e.to_string())
        }
        Error::TooFewRows { .. } => CliError::data(e.to_string()),
        Error::RootSegmentZero { .. } => CliError::numeric(format!(
            "{e}; the root transform has no defined slope on a zero band, so this test cannot \
             proceed (unlike the ratio variant, where a zero band mean forces rejection and \
             exits 0)"
        )),
        Error::DegenerateRatio { band } => CliError::numeric(format!(
            "{e}; a zero mean in band {band} normally forces rejection with exit 0, so hitting \
             this as an error means the transform was evaluated outside a test run"
        )),
        _ => CliError::numeric(e.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "covstruct",
    version,
    about = "Covariance-structure tests, simulation tables, and multiple contrasts"
)]
struct Cli {
    /// Worker thread cap; the COVSTRUCT_THREADS variable sets the default
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a covariance or correlation structure on CSV data
    Test(TestArgs),
    /// Estimate rejection-rate tables for a scenario file or preset
    Simulate(SimulateArgs),
    /// Combined multiple-contrast test with componentwise verdicts
    Mctp(MctpArgs),
}

#[derive(Args)]
struct TestArgs {
    /// CSV data file; rows are observations, columns are variables
    data: PathBuf,
    /// Structure under test, or "hotelling" for the mean test
    #[arg(long)]
    structure: String,
    /// cov or corr; defaults to the structure's natural domain
    #[arg(long)]
    domain: Option<String>,
    /// mc, boot, boot-hstar or boot-hdagger
    #[arg(long, default_value = "boot")]
    method: String,
    /// h (root transform) or g (ratio transform)
    #[arg(long, default_value = "h")]
    variant: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replication count for the chosen method
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Null mean as a comma list; hotelling only
    #[arg(long)]
    mu0: Option<String>,
    /// Skip the first non-blank line of the data file
    #[arg(long)]
    has_header: bool,
    /// Write the document here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("design").required(true).args(["scenario", "preset"])))]
struct SimulateArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// table1, table2, table3, tableA1, tableA2 or tableA3
    #[arg(long)]
    preset: Option<String>,
    /// Override the replication count
    #[arg(long)]
    n_sim: Option<usize>,
    /// Override the design seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write the document here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the table rows as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct MctpArgs {
    /// CSV data file; rows are observations, columns are variables
    data: PathBuf,
    /// Only sphericity ships a contrast set so far
    #[arg(long, default_value = "sphericity")]
    structure: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// signed or absolute calibration quantiles
    #[arg(long, default_value = "signed")]
    mode: String,
    /// Skip the first non-blank line of the data file
    #[arg(long)]
    has_header: bool,
    /// Write the document here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Output {
    document: ResultDocument,
    out: Option<PathBuf>,
    csv: Option<(PathBuf, String)>,
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|cell| {
            cell.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{what}: cannot parse {:?} as a number", cell.trim())))
        })
        .collect()
}

fn cmd_test(args: &TestArgs) -> Result<Output, CliError> {
    let (sample, info) = io::load_csv(&args.data, args.has_header)?;

    let result = if args.structure == "hotelling" {
        let mu0_text = args
            .mu0
            .as_ref()
            .ok_or_else(|| CliError::usage("--structure hotelling requires --mu0"))?;
        let mu0 = DVector::from_vec(parse_f64_list(mu0_text, "--mu0")?);
        let res = mean_test(&sample, &mu0, args.alpha).map_err(map_run_err)?;
        serde_json::to_value(&res).expect("result serializes")
    } else {
        if args.mu0.is_some() {
            return Err(CliError::usage("--mu0 only applies to --structure hotelling"));
        }
        let kind: HypothesisKind =
            args.structure.parse().map_err(|e: Error| CliError::usage(e.to_string()))?;
        let domain = match &args.domain {
            Some(s) => s.parse::<Domain>().map_err(|e| CliError::usage(e.to_string()))?,
            None => kind.default_domain(),
        };
        let variant: Variant =
            args.variant.parse().map_err(|e: Error| CliError::usage(e.to_string()))?;
        let method: Method =
            args.method.parse().map_err(|e: Error| CliError::usage(e.to_string()))?;
        let cfg =
            TestConfig { method, alpha: args.alpha, reps: args.reps, seed: args.seed };
        let res =
            run_structure_test(&sample, kind, domain, variant, &cfg).map_err(map_run_err)?;
        serde_json::to_value(&res).expect("result serializes")
    };

    let mut echo = json!({
        "structure": args.structure,
        "method": args.method,
        "variant": args.variant,
        "alpha": args.alpha,
        "reps": args.reps,
        "seed": args.seed,
        "has_header": args.has_header,
    });
    if let Some(domain) = &args.domain {
        echo["domain"] = json!(domain);
    }
    if let Some(mu0) = &args.mu0 {
        echo["mu0"] = json!(mu0);
    }

    Ok(Output {
        document: ResultDocument::new("test", echo, Some(info), result),
        out: args.out.clone(),
        csv: None,
    })
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{} is not a valid scenario: {e}", path.display())))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Output, CliError> {
    let (rows, echo): (Vec<TableRow>, Value) = if let Some(path) = &args.scenario {
        let mut sc = load_scenario(path)?;
        if let Some(n_sim) = args.n_sim {
            sc.n_sim = n_sim;
        }
        if let Some(seed) = args.seed {
            sc.seed = seed;
        }
        let rows = run_scenario(&sc).map_err(map_run_err)?;
        let echo = json!({ "scenario": serde_json::to_value(&sc).expect("scenario serializes") });
        (rows, echo)
    } else {
        let name = args.preset.as_deref().expect("clap enforces the design group");
        let preset: PresetTable =
            name.parse().map_err(|e: Error| CliError::usage(e.to_string()))?;
        let rows = run_preset(preset, args.n_sim, args.seed).map_err(map_run_err)?;
        let echo = json!({
            "preset": preset.name(),
            "n_sim": args.n_sim.unwrap_or(1000),
            "seed": args.seed.unwrap_or(covstruct::sim::DEFAULT_PRESET_SEED),
        });
        (rows, echo)
    };

    let csv = args.csv.as_ref().map(|path| (path.clone(), io::table_csv(&rows)));
    let result = json!({ "rows": rows });
    Ok(Output {
        document: ResultDocument::new("simulate", echo, None, result),
        out: args.out.clone(),
        csv,
    })
}

fn cmd_mctp(args: &MctpArgs) -> Result<Output, CliError> {
    if args.structure != "sphericity" {
        return Err(CliError::usage(format!(
            "mctp ships contrasts for sphericity only, got {:?}",
            args.structure
        )));
    }
    let mode: QuantileMode = args.mode.parse().map_err(|e: Error| CliError::usage(e.to_string()))?;
    let (sample, info) = io::load_csv(&args.data, args.has_header)?;
    let cfg = MctpConfig { alpha: args.alpha, reps: args.reps, seed: args.seed, mode };
    let res = sphericity_contrast_test(&sample, &cfg).map_err(map_run_err)?;
    let echo = json!({
        "structure": args.structure,
        "alpha": args.alpha,
        "reps": args.reps,
        "seed": args.seed,
        "mode": mode.name(),
        "has_header": args.has_header,
    });
    Ok(Output {
        document: ResultDocument::new(
            "mctp",
            echo,
            Some(info),
            serde_json::to_value(&res).expect("result serializes"),
        ),
        out: args.out.clone(),
        csv: None,
    })
}

fn init_threads(flag: Option<usize>) {
    let threads = flag.or_else(|| {
        std::env::var("COVSTRUCT_THREADS").ok().and_then(|s| s.parse().ok())
    });
    if let Some(k) = threads {
        // a failure here means a pool already exists, which only happens
        // in-process during tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

fn emit(output: Output, started: Instant) -> Result<(), CliError> {
    let mut doc = output.document;
    doc.timing = Some(Timing { seconds: started.elapsed().as_secs_f64() });
    let text = doc.render();
    match &output.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if let Some((path, csv)) = &output.csv {
        std::fs::write(path, csv)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mctp(args) => cmd_mctp(args),
    }
    .and_then(|output| emit(output, started));
    if let Err(e) = outcome {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
