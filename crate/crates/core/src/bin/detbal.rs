use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use detailed_balance::anneal::make_schedule;
use detailed_balance::cli::{run_analyze, run_simulate, Profile, RunConfig, Source};
use detailed_balance::grid::BinGrid;
use detailed_balance::series::ColumnSelector;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Control {
    Metropolis,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Desk,
}

/// Test a price series for detailed balance in its returns dynamics.
#[derive(Debug, Parser)]
#[command(name = "detbal", version)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["input", "control", "simulate"]))]
struct Args {
    /// Price file (comma or tab separated, optional header)
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Price column, zero-based index or header name
    #[arg(long, default_value = "0", requires = "input")]
    column: String,

    /// Run against a calibration matrix instead of data
    #[arg(long, value_enum)]
    control: Option<Control>,

    /// Base fixture for the metropolis control
    #[arg(long, default_value = "fat_tail")]
    base: String,

    /// Write a synthetic price file drawn from FIXTURE
    #[arg(long, value_name = "FIXTURE")]
    simulate: Option<String>,

    /// Number of simulated returns
    #[arg(long, default_value_t = 1_000_000)]
    length: usize,

    #[arg(long)]
    bins: Option<usize>,

    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    range: Option<Vec<f64>>,

    #[arg(long)]
    beta1: Option<f64>,

    #[arg(long)]
    beta2: Option<f64>,

    /// Temperature steps n
    #[arg(long)]
    steps: Option<usize>,

    /// Sweeps per temperature
    #[arg(long)]
    sweeps: Option<usize>,

    #[arg(long)]
    epsilon: Option<f64>,

    /// Independent annealing starts
    #[arg(long)]
    starts: Option<usize>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Worker threads (0 = all cores); never changes results
    #[arg(long, default_value_t = 0)]
    jobs: usize,

    #[arg(long, value_enum, default_value = "desk")]
    profile: ProfileArg,

    #[arg(long, default_value = "detbal-out")]
    out: PathBuf,
}

fn config(args: &Args) -> Result<RunConfig, detailed_balance::Error> {
    let source = if let Some(path) = &args.input {
        Source::Input {
            path: path.clone(),
            column: args.column.parse::<ColumnSelector>().unwrap_or_default(),
        }
    } else if let Some(fixture) = &args.simulate {
        Source::Simulate {
            fixture: fixture.clone(),
            length: args.length,
        }
    } else {
        match args.control {
            Some(Control::Metropolis) => Source::Metropolis { base: args.base.clone() },
            _ => Source::Random,
        }
    };
    let profile = match args.profile {
        ProfileArg::Paper => Profile::Paper,
        ProfileArg::Desk => Profile::Desk,
    };
    let mut cfg = RunConfig::new(source, profile, &args.out);
    let (lo, hi) = match args.range.as_deref() {
        Some([lo, hi]) => (*lo, *hi),
        _ => (cfg.grid.lower(), cfg.grid.upper()),
    };
    cfg.grid = BinGrid::new(lo, hi, args.bins.unwrap_or(cfg.grid.bins()))?;
    cfg.schedule = make_schedule(
        args.beta1.unwrap_or(cfg.schedule.beta_start()),
        args.beta2.unwrap_or(cfg.schedule.beta_end()),
        args.steps.unwrap_or(cfg.schedule.steps()),
    )?;
    let a = &mut cfg.anneal;
    a.sweeps_per_temperature = args.sweeps.unwrap_or(a.sweeps_per_temperature);
    a.epsilon = args.epsilon.unwrap_or(a.epsilon);
    a.starts = args.starts.unwrap_or(a.starts);
    a.seed = args.seed;
    a.jobs = args.jobs;
    a.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("detbal: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = if matches!(cfg.source, Source::Simulate { .. }) {
        run_simulate(&cfg).map(|r| {
            println!("wrote {} prices to {}", r.rows, r.prices.display());
        })
    } else {
        run_analyze(&cfg).map(|r| {
            print!("{}", r.summary.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"));
            println!();
            println!("artifacts in {}", cfg.out.display());
        })
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("detbal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
