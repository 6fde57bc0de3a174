//! End-to-end runs: ingest or generate a transition matrix, anneal both the raw
//! and the column-normalized matrix, and write plot-ready artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use crate::action::{action, balance_residuals, ActionValue};
use crate::anneal::{anneal_multi, chain_rng, AnnealConfig, AnnealSchedule, MultiResult};
use crate::controls::{fixtures, metropolis_transition, simulate_chain, uniform_random_transition};
use crate::error::{Error, Result};
use crate::grid::{
    build_transitions, column_normalize, marginal_histogram, BinGrid, Distribution, TransitionMatrix,
};
use crate::series::{compute_returns, parse_price_csv, reconstruct_prices, ColumnSelector};
use crate::tsv::{self, Metadata};

/// RNG stream reserved for the random-control matrix.
pub const RANDOM_CONTROL_STREAM: u64 = u64::MAX;
/// RNG stream reserved for chain simulation.
pub const SIMULATION_STREAM: u64 = u64::MAX - 1;
/// Origin price of simulated series.
pub const SIMULATED_ORIGIN: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Paper,
    Desk,
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        }
    }

    pub fn schedule(&self) -> AnnealSchedule {
        match self {
            Profile::Paper => AnnealSchedule::paper(),
            Profile::Desk => AnnealSchedule::desk(),
        }
    }

    pub fn anneal(&self) -> AnnealConfig {
        match self {
            Profile::Paper => AnnealConfig::paper(),
            Profile::Desk => AnnealConfig::desk(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Input { path: PathBuf, column: ColumnSelector },
    Metropolis { base: String },
    Random,
    Simulate { fixture: String, length: usize },
}

impl Source {
    fn describe(&self) -> String {
        match self {
            Source::Input { path, column } => format!("input {} column {column:?}", path.display()),
            Source::Metropolis { base } => format!("metropolis control, base {base}"),
            Source::Random => "uniform random control".into(),
            Source::Simulate { fixture, length } => format!("simulate {fixture}, length {length}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub grid: BinGrid,
    pub schedule: AnnealSchedule,
    pub anneal: AnnealConfig,
    pub out: PathBuf,
    pub profile: Profile,
}

impl RunConfig {
    pub fn new(source: Source, profile: Profile, out: impl Into<PathBuf>) -> Self {
        Self {
            source,
            grid: BinGrid::default(),
            schedule: profile.schedule(),
            anneal: profile.anneal(),
            out: out.into(),
            profile,
        }
    }

    /// Parameters shared by every artifact header. Thread count is left out
    /// because it never affects results.
    fn metadata(&self) -> Metadata {
        let g = &self.grid;
        let s = &self.schedule;
        let a = &self.anneal;
        Metadata::new()
            .with("source", self.source.describe())
            .with("profile", self.profile.name())
            .with("bins", g.bins())
            .with("range", format!("[{}, {})", g.lower(), g.upper()))
            .with("bin_width", g.width())
            .with("bin_convention", "half-open [lo, hi), upper edge exclusive, out-of-range pairs dropped")
            .with("matrix_convention", "W(x,y): x destination (r(i+1)), y source (r(i))")
            .with("beta1", s.beta_start())
            .with("beta2", s.beta_end())
            .with("steps", s.steps())
            .with("rate_b", s.rate())
            .with("sweeps", a.sweeps_per_temperature)
            .with("epsilon", a.epsilon)
            .with("starts", a.starts)
            .with("seed", a.seed)
            .with("rng", "ChaCha8, chain k = seed_from_u64(seed) on stream k")
    }
}

/// Failure of a run, mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Input(#[from] Error),
    #[error("degenerate transition matrix: no bin pair carries weight (K = 0)")]
    Degenerate,
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Input(_) => 2,
            RunError::Degenerate => 3,
        }
    }
}

/// Outcome of annealing one matrix.
#[derive(Debug, Clone)]
pub struct Minimization {
    pub runs: MultiResult,
    pub best: ActionValue,
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub raw: Minimization,
    pub normalized: Minimization,
    pub dropped_pairs: Option<usize>,
    pub empty_columns: Vec<usize>,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Prepared {
    matrix: TransitionMatrix,
    histogram: Option<(Distribution, &'static str)>,
    dropped_pairs: Option<usize>,
    events: Option<usize>,
    control_seed_note: Option<String>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let grid = &config.grid;
    match &config.source {
        Source::Input { path, column } => {
            let file = fs::File::open(path).map_err(|source| Error::Input {
                path: path.clone(),
                source,
            })?;
            let prices = parse_price_csv(std::io::BufReader::new(file), column)?;
            let returns = compute_returns(&prices)?;
            let histogram = marginal_histogram(&returns, grid)?;
            let transitions = build_transitions(&returns, grid)?;
            Ok(Prepared {
                matrix: transitions.counts,
                histogram: Some((histogram, "empirical returns histogram")),
                dropped_pairs: Some(transitions.dropped_pairs),
                events: Some(returns.len()),
                control_seed_note: None,
            })
        }
        Source::Metropolis { base } => {
            let base = fixtures::by_name(base, grid)?;
            Ok(Prepared {
                matrix: metropolis_transition(&base)?,
                histogram: Some((base, "metropolis base distribution")),
                dropped_pairs: None,
                events: None,
                control_seed_note: None,
            })
        }
        Source::Random => {
            let mut rng = chain_rng(config.anneal.seed, RANDOM_CONTROL_STREAM);
            Ok(Prepared {
                matrix: uniform_random_transition(grid.bins(), &mut rng)?,
                histogram: None,
                dropped_pairs: None,
                events: None,
                control_seed_note: Some(format!(
                    "seed {} stream {RANDOM_CONTROL_STREAM}",
                    config.anneal.seed
                )),
            })
        }
        Source::Simulate { .. } => Err(Error::InvalidConfig(
            "simulate writes a price file; analyze it with an input source".into(),
        )),
    }
}

fn minimize(matrix: &TransitionMatrix, config: &RunConfig) -> Result<Minimization> {
    let runs = anneal_multi(matrix, &config.schedule, &config.anneal)?;
    let best = runs.best().final_s;
    Ok(Minimization { runs, best })
}

fn write_all(dir: &Path, files: Vec<(String, String)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

fn fmt_log(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "-inf".into()
    }
}

/// Reads or builds the transition matrix, minimizes `S` for both `W` and its
/// column-normalized form, and writes every artifact into `config.out`.
/// Nothing is written unless the whole computation succeeds.
pub fn run_analyze(config: &RunConfig) -> std::result::Result<AnalyzeReport, RunError> {
    config.anneal.validate()?;
    let prepared = prepare(config)?;
    let matrix = &prepared.matrix;
    let n = config.grid.bins();
    if action(matrix, &Distribution::uniform(n))?.is_degenerate() {
        return Err(RunError::Degenerate);
    }
    let normalized = column_normalize(matrix);

    let raw = minimize(matrix, config)?;
    let norm = minimize(&normalized.matrix, config)?;

    let meta = config.metadata();
    let grid = &config.grid;
    let mut files = Vec::new();
    files.push((
        "transition_counts.tsv".to_string(),
        tsv::transition_matrix(&meta, grid, matrix),
    ));
    if let Some((hist, what)) = &prepared.histogram {
        files.push((
            "marginal_hist.tsv".to_string(),
            tsv::histogram(&meta.clone().with("content", what), grid, hist),
        ));
    }
    for (label, suffix, m) in [("raw W", "", &raw), ("column-normalized W", "_normalized", &norm)] {
        for r in &m.runs.results {
            let chain_meta = meta
                .clone()
                .with("matrix", label)
                .with("chain", r.chain)
                .with("chain_stream", r.chain)
                .with("initial_S", r.initial_s.s)
                .with("final_S", r.final_s.s);
            files.push((
                format!("anneal_history{suffix}_{}.tsv", r.chain),
                tsv::history(&chain_meta, &r.history),
            ));
        }
        files.push((
            format!("final_w{suffix}.tsv"),
            tsv::aggregate(&meta.clone().with("matrix", label), grid, &m.runs.aggregate),
        ));
    }
    let residuals = balance_residuals(matrix, &raw.runs.best().final_w)?;
    files.push((
        "residuals.tsv".to_string(),
        tsv::residuals(
            &meta
                .clone()
                .with("matrix", "raw W")
                .with("distribution", format!("best chain {}", raw.runs.aggregate.best_chain)),
            grid,
            &residuals,
        ),
    ));

    let summary = summary_text(config, &prepared, &normalized.empty_columns, &raw, &norm);
    files.push(("summary.txt".to_string(), summary.clone()));

    let written = write_all(&config.out, files)?;
    Ok(AnalyzeReport {
        raw,
        normalized: norm,
        dropped_pairs: prepared.dropped_pairs,
        empty_columns: normalized.empty_columns,
        files: written,
        summary,
    })
}

fn summary_text(
    config: &RunConfig,
    prepared: &Prepared,
    empty_columns: &[usize],
    raw: &Minimization,
    norm: &Minimization,
) -> String {
    let mut meta = config.metadata();
    meta.push("format", "key<TAB>value");
    let mut out = meta.render();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push('\t');
        out.push_str(&v);
        out.push('\n');
    };
    kv("source", config.source.describe());
    if let Some(events) = prepared.events {
        kv("return_events", events.to_string());
    }
    if let Some(d) = prepared.dropped_pairs {
        kv("dropped_pairs", d.to_string());
    }
    if let Some(note) = &prepared.control_seed_note {
        kv("control_matrix_rng", note.clone());
    }
    kv(
        "empty_columns",
        if empty_columns.is_empty() {
            "none".into()
        } else {
            empty_columns.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        },
    );
    kv("chain_seeds", format!("master {} streams 0..{}", config.anneal.seed, config.anneal.starts));
    for (prefix, m) in [("raw", raw), ("normalized", norm)] {
        let agg = &m.runs.aggregate;
        kv(&format!("{prefix}.S_min"), m.best.s.to_string());
        kv(&format!("{prefix}.ln_S_min"), fmt_log(m.best.ln()));
        kv(&format!("{prefix}.log10_S_min"), fmt_log(m.best.log10()));
        kv(&format!("{prefix}.S_max"), agg.s_max.to_string());
        kv(&format!("{prefix}.S_spread"), agg.spread().to_string());
        kv(&format!("{prefix}.K"), m.best.k_terms.to_string());
        kv(&format!("{prefix}.best_chain"), agg.best_chain.to_string());
    }
    out
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub prices: PathBuf,
    pub metadata: PathBuf,
    pub rows: usize,
}

/// Writes `simulated_prices.csv` (header `price`, `length + 1` rows starting
/// at 1000) and a `simulated_prices.meta` sidecar.
pub fn run_simulate(config: &RunConfig) -> std::result::Result<SimulateReport, RunError> {
    let (fixture, length) = match &config.source {
        Source::Simulate { fixture, length } => (fixture.as_str(), *length),
        _ => return Err(Error::InvalidConfig("run_simulate needs a simulate source".into()).into()),
    };
    let base = fixtures::by_name(fixture, &config.grid)?;
    let mut rng = chain_rng(config.anneal.seed, SIMULATION_STREAM);
    let returns = simulate_chain(&base, &config.grid, length, &mut rng)?;
    let prices = reconstruct_prices(&returns, SIMULATED_ORIGIN)?;

    let mut csv = String::with_capacity(prices.len() * 20);
    csv.push_str("price\n");
    for p in prices.quotes() {
        csv.push_str(&p.to_string());
        csv.push('\n');
    }
    let meta = Metadata::new()
        .with("fixture", fixture)
        .with("length", length)
        .with("origin", SIMULATED_ORIGIN)
        .with("seed", config.anneal.seed)
        .with("rng", format!("ChaCha8, seed_from_u64(seed) on stream {SIMULATION_STREAM}"))
        .with("bins", config.grid.bins())
        .with("range", format!("[{}, {})", config.grid.lower(), config.grid.upper()))
        .with("proposal", "uniform over bins, accept min(base(x)/base(y), 1)");
    let meta_text = tsv::histogram(&meta, &config.grid, &base);
    let written = write_all(
        &config.out,
        vec![
            ("simulated_prices.csv".into(), csv),
            ("simulated_prices.meta".into(), meta_text),
        ],
    )?;
    Ok(SimulateReport {
        prices: written[0].clone(),
        metadata: written[1].clone(),
        rows: prices.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(source: Source, out: impl Into<PathBuf>) -> RunConfig {
        let mut cfg = RunConfig::new(source, Profile::Desk, out);
        cfg.schedule = crate::anneal::make_schedule(1e-2, 1e6, 10).unwrap();
        cfg.anneal.sweeps_per_temperature = 5;
        cfg.anneal.starts = 2;
        cfg
    }

    #[test]
    fn profiles() {
        let p = RunConfig::new(Source::Random, Profile::Paper, "x");
        assert_eq!(p.schedule.steps(), 800);
        assert_eq!(p.anneal.sweeps_per_temperature, 1600);
        assert_eq!(p.anneal.starts, 48);
        assert_eq!(p.anneal.epsilon, 1e-3);
        assert_eq!(p.grid, BinGrid::default());
        let d = RunConfig::new(Source::Random, Profile::Desk, "x");
        assert_eq!(
            (d.schedule.steps(), d.anneal.sweeps_per_temperature, d.anneal.starts),
            (200, 400, 8)
        );
    }

    #[test]
    fn missing_input_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cfg = tiny(
            Source::Input {
                path: dir.path().join("nope.csv"),
                column: ColumnSelector::default(),
            },
            &out,
        );
        let err = run_analyze(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!out.exists());
    }

    #[test]
    fn all_out_of_range_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("p.csv");
        fs::write(&input, "100\n200\n50\n").unwrap();
        let cfg = tiny(
            Source::Input {
                path: input,
                column: ColumnSelector::default(),
            },
            dir.path().join("out"),
        );
        let err = run_analyze(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn diagonal_only_data_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("p.csv");
        fs::write(&input, "100\n100\n100\n100\n").unwrap();
        let out = dir.path().join("out");
        let cfg = tiny(
            Source::Input {
                path: input,
                column: ColumnSelector::default(),
            },
            &out,
        );
        let err = run_analyze(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(!out.exists());
    }

    #[test]
    fn unknown_fixture_lists_choices() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(
            Source::Simulate {
                fixture: "gaussian".into(),
                length: 10,
            },
            dir.path(),
        );
        let msg = run_simulate(&cfg).unwrap_err().to_string();
        assert!(msg.contains("fat_tail") && msg.contains("uniform"), "{msg}");
    }

    #[test]
    fn simulate_too_short() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(
            Source::Simulate {
                fixture: "fat_tail".into(),
                length: 1,
            },
            dir.path(),
        );
        assert!(run_simulate(&cfg).unwrap_err().to_string().contains("series too short"));
    }

    #[test]
    fn metropolis_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(
            Source::Metropolis {
                base: "two_point".into(),
            },
            dir.path(),
        );
        let report = run_analyze(&cfg).unwrap();
        for name in [
            "transition_counts.tsv",
            "marginal_hist.tsv",
            "anneal_history_0.tsv",
            "anneal_history_1.tsv",
            "anneal_history_normalized_1.tsv",
            "final_w.tsv",
            "final_w_normalized.tsv",
            "residuals.tsv",
            "summary.txt",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let s_min = report
            .raw
            .runs
            .results
            .iter()
            .map(|r| r.final_s.s)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.raw.best.s, s_min);
        assert!(report.summary.contains(&format!("raw.S_min\t{s_min}")));
        assert!(report.summary.contains("raw.log10_S_min"));
        assert!(report.summary.contains("raw.ln_S_min"));
    }
}
