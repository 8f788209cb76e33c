use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qwsearch::harness::{
    self, load_instance, run_suite_with, ExperimentReport, Format, LoadedInstance, SearchKind, SearchRequest,
    SuiteName, SuiteOptions,
};
use qwsearch::search::SearchConfig;

#[derive(Parser)]
#[command(name = "qwsearch", version, about = "Exact quantum walk search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the tolerance of the asserted identities.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value = "json", value_parser = ["csv", "json"])]
    format: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Warn about unknown instance fields instead of rejecting them.
    #[arg(long)]
    lenient: bool,
    /// Record wall-clock time per item (reports are then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Horizon T (even).
    #[arg(long = "T", default_value_t = 64)]
    horizon: usize,
    #[arg(long = "rS")]
    r_s: Option<f64>,
    #[arg(long = "eps-ff")]
    eps_ff: Option<f64>,
    #[arg(long = "aa-rounds")]
    aa_rounds: Option<u32>,
    /// Resistance budget C; defaults to the file's C, then the exact value.
    #[arg(long)]
    budget: Option<f64>,
    /// Fast-forward search: try T = 2, 4, … up to --T and stop at success ≥ 1/2.
    #[arg(long = "sweep-doubling")]
    sweep_doubling: bool,
    /// Keep the per-(t, r_M) trace in the outcome.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Effective resistance R and commute quantity C.
    Resistance {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exact hitting, return and commute statistics.
    Hitting {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample one walk trajectory.
    Simulate {
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Check the walk unitaries against their discriminants.
    QwalkVerify {
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.9])]
        s: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fast-forwarded walk block against D^t.
    Fastforward {
        instance: PathBuf,
        #[arg(long, default_value_t = 16)]
        t: u64,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Fast-forward search: fast-forwarded search with amplitude amplification.
    SearchFf {
        instance: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Simple search: randomized interpolated walks.
    SearchSimple {
        instance: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Fast-forward search on P^t with a fast-forwarded inner walk.
    SearchTstep {
        instance: PathBuf,
        #[arg(long = "t-inner", default_value_t = 1)]
        t_inner: u32,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Invariant suite: electric, classical, quantum, ffwd, search or all.
    Suite {
        #[arg(value_parser = ["electric", "classical", "quantum", "ffwd", "search", "all"])]
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

fn load(path: &PathBuf, common: &Common) -> Result<LoadedInstance, Failure> {
    let li = load_instance(path, common.lenient).map_err(|e| Failure::Usage(e.to_string()))?;
    for w in &li.warnings {
        eprintln!("warning: {w}");
    }
    Ok(li)
}

fn search_request(kind: SearchKind, s: &SearchArgs, seed: u64) -> SearchRequest {
    let mut config = SearchConfig::new(s.horizon, seed);
    config.r_s = s.r_s;
    config.eps_ff = s.eps_ff;
    config.aa_rounds = s.aa_rounds;
    config.budget = s.budget;
    SearchRequest { kind, config, sweep_doubling: s.sweep_doubling, keep_trace: s.trace }
}

fn run(cmd: Command) -> Result<(ExperimentReport, Common), Failure> {
    let run_err = |e: qwsearch::Error| Failure::Run(e.to_string());
    Ok(match cmd {
        Command::Resistance { instance, common } => {
            let li = load(&instance, &common)?;
            (harness::resistance(&li, common.seed).map_err(run_err)?, common)
        }
        Command::Hitting { instance, common } => {
            let li = load(&instance, &common)?;
            (harness::hitting(&li, common.seed).map_err(run_err)?, common)
        }
        Command::Simulate { instance, steps, common } => {
            let li = load(&instance, &common)?;
            (harness::simulate_walk(&li, steps, common.seed).map_err(run_err)?, common)
        }
        Command::QwalkVerify { instance, s, common } => {
            let li = load(&instance, &common)?;
            let tol = common.tolerance.unwrap_or(1e-10);
            (harness::qwalk_verify(&li, &s, tol, common.seed).map_err(run_err)?, common)
        }
        Command::Fastforward { instance, t, eps, common } => {
            let li = load(&instance, &common)?;
            (harness::fastforward(&li, t, eps, common.tolerance, common.seed).map_err(run_err)?, common)
        }
        Command::SearchFf { instance, search, common } => {
            let li = load(&instance, &common)?;
            let req = search_request(SearchKind::FastForward, &search, common.seed);
            (harness::search(&li, &req).map_err(run_err)?, common)
        }
        Command::SearchSimple { instance, search, common } => {
            let li = load(&instance, &common)?;
            let req = search_request(SearchKind::Simple, &search, common.seed);
            (harness::search(&li, &req).map_err(run_err)?, common)
        }
        Command::SearchTstep { instance, t_inner, search, common } => {
            let li = load(&instance, &common)?;
            let req = search_request(SearchKind::TStep(t_inner), &search, common.seed);
            (harness::search(&li, &req).map_err(run_err)?, common)
        }
        Command::Suite { name, common } => {
            let name: SuiteName = name.parse().map_err(|e: qwsearch::Error| Failure::Usage(e.to_string()))?;
            (run_suite_with(name, SuiteOptions { seed: common.seed, timing: common.timing }), common)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, common) = match run(cli.command) {
        Ok(x) => x,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    };
    let format: Format = common.format.parse().expect("validated by clap");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match &common.out {
        Some(path) => {
            if let Err(e) = harness::save_report(&report, path, format) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{}", report.render(format)),
    }
    for row in report.failures() {
        eprintln!("FAIL {} {}: residual {:e} > {:e}", row.instance, row.operation, row.residual, row.tolerance);
    }
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
