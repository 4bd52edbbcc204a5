//! `lire` command line: index building, single counterfactual queries,
//! baselines, region growth curves, forest statistics and multi-query
//! benchmark reports.
//!
//! Every subcommand is a thin wrapper over `lire-core`; [`run_command`]
//! returns the exit code and both output streams so the surface can be
//! tested in-process. Documents (`index`, `ce`) are always JSON; tables
//! (`bench`, `regions`, `stats`) switch to JSON with `--json`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use lire_core::report::{run_benchmark, BenchmarkConfig};
use lire_core::search::FeatureConstraints;
use lire_core::{
    build_index, dataset_search, enumerate_nonempty_regions, exact_search, find_ce, region_growth_curve, Budget,
    CeQuery, Dataset, FeatureConstraint, Forest, GrowthMode, LireError, LiveRegionIndex, Method, Metric, MetricKind,
    QueryDocument, TargetSet,
};
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NO_TARGET: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Engine(LireError),
}

impl From<LireError> for CliError {
    fn from(e: LireError) -> Self {
        CliError::Engine(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Exit code for an engine error: unreachable targets are 2, solver
/// breakdowns 3, everything caused by the inputs 1.
pub fn exit_code(e: &LireError) -> u8 {
    match e {
        LireError::NoLiveTarget | LireError::AllTargetsInfeasible | LireError::NoQualifyingRow => EXIT_NO_TARGET,
        LireError::IllConditioned(_) | LireError::Infeasible => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "lire", version, about = "Live-region counterfactual explanations for decision forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the live-region index and serialize it.
    Index(IndexArgs),
    /// Answer one counterfactual query.
    Ce(CeArgs),
    /// Compare search methods over seeded queries.
    Bench(BenchArgs),
    /// Region growth curve over tree prefixes or depth cuts.
    Regions(RegionsArgs),
    /// Forest statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Forest document (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Dataset: CSV of floats, one row per instance.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Serialized index (input for `ce`, output for `index`).
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "l2sq")]
    metric: MetricArg,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    budget_regions: Option<usize>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// The dataset's first line is a header.
    #[arg(long)]
    header: bool,
    /// Zero-based label column, dropped from the features.
    #[arg(long)]
    label_col: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    L2sq,
    L1,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L2sq => MetricKind::L2Squared,
            MetricArg::L1 => MetricKind::L1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Lire,
    Exact,
    Dataset,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lire => Method::Lire,
            MethodArg::Exact => Method::Exact,
            MethodArg::Dataset => Method::Dataset,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    ByTrees,
    ByDepth,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CeArgs {
    #[command(flatten)]
    common: Common,
    /// Query document (exchange format) instead of the query flags.
    #[arg(long, conflicts_with_all = ["source", "source_row", "target_class", "target_interval", "fix", "bound", "margin"])]
    query: Option<PathBuf>,
    /// Source instance, comma separated.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "source_row")]
    source: Option<String>,
    /// Source instance taken from the dataset.
    #[arg(long)]
    source_row: Option<usize>,
    /// Admissible class (repeatable, union).
    #[arg(long)]
    target_class: Vec<usize>,
    /// Admissible output interval `lo:hi` (repeatable, union).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "target_class")]
    target_interval: Vec<String>,
    /// Fix a feature: `d=v` (index or feature name).
    #[arg(long, allow_hyphen_values = true)]
    fix: Vec<String>,
    /// Bound a feature: `d=lo:hi`.
    #[arg(long, allow_hyphen_values = true)]
    bound: Vec<String>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long, value_enum, default_value = "lire")]
    method: MethodArg,
    /// Enumeration cap for `--method exact`.
    #[arg(long, default_value_t = 1_000_000)]
    cap: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    queries: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lire,dataset")]
    methods: Vec<MethodArg>,
    /// Enumeration cap for the exact method.
    #[arg(long, default_value_t = 1_000_000)]
    cap: usize,
}

#[derive(Debug, Args)]
struct RegionsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "by-trees")]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    common: Common,
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run_command<S: AsRef<str>>(argv: &[S]) -> CommandOutput {
    let cli = match Cli::try_parse_from(argv.iter().map(AsRef::as_ref)) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CommandOutput { code: EXIT_USAGE, stdout: String::new(), stderr: text }
            } else {
                CommandOutput { code: EXIT_OK, stdout: text, stderr: String::new() }
            };
        }
    };
    let result = match &cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Ce(a) => cmd_ce(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Regions(a) => cmd_regions(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(stdout) => CommandOutput { code: EXIT_OK, stdout, stderr: String::new() },
        Err(CliError::Usage(msg)) => CommandOutput { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {msg}\n") },
        Err(CliError::Engine(e)) => {
            CommandOutput { code: exit_code(&e), stdout: String::new(), stderr: format!("error: {e}\n") }
        }
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).or_else(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_forest(common: &Common) -> CliResult<Forest> {
    Ok(Forest::from_json(&read_file(&common.model)?)?)
}

fn load_data(common: &Common) -> CliResult<Option<Dataset>> {
    let Some(path) = &common.data else { return Ok(None) };
    if !path.exists() {
        return usage(format!("cannot read {}: no such file", path.display()));
    }
    Ok(Some(Dataset::load_csv(path, common.header, common.label_col)?))
}

fn require_data(common: &Common) -> CliResult<Dataset> {
    load_data(common)?.map_or_else(|| usage("--data is required"), Ok)
}

fn budget(common: &Common) -> Budget {
    Budget { regions: common.budget_regions, millis: common.timeout_ms }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("report types serialize");
    s.push('\n');
    s
}

fn cmd_index(a: &IndexArgs) -> CliResult<String> {
    let forest = load_forest(&a.common)?;
    let data = require_data(&a.common)?;
    let index = build_index(&forest, &data)?;
    let doc = index.to_json();
    match &a.common.index {
        None => Ok(doc + "\n"),
        Some(path) => {
            std::fs::write(path, &doc).or_else(|e| usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(if a.common.json {
                to_json(&serde_json::json!({ "M": index.len(), "index": path.display().to_string() }))
            } else {
                format!("{} live regions -> {}\n", index.len(), path.display())
            })
        }
    }
}

fn parse_number(text: &str, what: &str) -> CliResult<f64> {
    text.trim().parse().or_else(|_| usage(format!("{what}: {text:?} is not a number")))
}

fn parse_range(text: &str, what: &str) -> CliResult<(f64, f64)> {
    let Some((lo, hi)) = text.split_once(':') else { return usage(format!("{what}: expected lo:hi, got {text:?}")) };
    Ok((parse_number(lo, what)?, parse_number(hi, what)?))
}

/// Feature reference by index or, when the forest names its features, by name.
fn parse_feature(forest: &Forest, text: &str) -> CliResult<usize> {
    if let Ok(d) = text.parse::<usize>() {
        return Ok(d);
    }
    forest
        .feature_names()
        .and_then(|names| names.iter().position(|n| n == text))
        .map_or_else(|| usage(format!("unknown feature {text:?}")), Ok)
}

fn query_from_flags(a: &CeArgs, forest: &Forest, data: Option<&Dataset>) -> CliResult<CeQuery> {
    let source = match (&a.source, a.source_row) {
        (Some(s), None) => s.split(',').map(|v| parse_number(v, "--source")).collect::<CliResult<Vec<f64>>>()?,
        (None, Some(n)) => {
            let Some(data) = data else { return usage("--source-row needs --data") };
            if n >= data.len() {
                return usage(format!("--source-row {n} out of range (N = {})", data.len()));
            }
            data.row(n).to_vec()
        }
        _ => return usage("one of --source or --source-row is required"),
    };
    let target = if !a.target_class.is_empty() {
        TargetSet::classes(a.target_class.iter().copied())?
    } else if !a.target_interval.is_empty() {
        let iv = a.target_interval.iter().map(|t| parse_range(t, "--target-interval")).collect::<CliResult<Vec<_>>>()?;
        TargetSet::intervals(iv)?
    } else {
        return usage("one of --target-class or --target-interval is required");
    };
    let mut constraints = FeatureConstraints::new();
    for f in &a.fix {
        let Some((d, v)) = f.split_once('=') else { return usage(format!("--fix: expected d=v, got {f:?}")) };
        constraints.insert(parse_feature(forest, d)?, FeatureConstraint::Fixed(parse_number(v, "--fix")?));
    }
    for b in &a.bound {
        let Some((d, range)) = b.split_once('=') else { return usage(format!("--bound: expected d=lo:hi, got {b:?}")) };
        let d = parse_feature(forest, d)?;
        let (lo, hi) = parse_range(range, "--bound")?;
        if constraints.insert(d, FeatureConstraint::Bounds(lo, hi)).is_some() {
            return usage(format!("feature {d} is both fixed and bounded"));
        }
    }
    let metric = Metric { kind: a.common.metric.into(), weights: None };
    Ok(CeQuery { constraints, margin: a.margin.unwrap_or(0.0), ..CeQuery::new(source, metric, target) })
}

fn load_index(a: &CeArgs, forest: &Forest, data: Option<&Dataset>) -> CliResult<LiveRegionIndex> {
    match (&a.common.index, data) {
        (Some(path), _) => {
            let index = LiveRegionIndex::from_json(&read_file(path)?)?;
            index.validate(data.map(|d| (forest, d)))?;
            if (index.task(), index.n_features(), index.n_outputs())
                != (forest.task(), forest.n_features(), forest.n_outputs())
            {
                return usage("index does not match the model");
            }
            Ok(index)
        }
        (None, Some(data)) => Ok(build_index(forest, data)?),
        (None, None) => usage("--index or --data is required"),
    }
}

fn cmd_ce(a: &CeArgs) -> CliResult<String> {
    let forest = load_forest(&a.common)?;
    let data = load_data(&a.common)?;
    let mut query = match &a.query {
        Some(path) => QueryDocument::parse(&read_file(path)?)?.to_query()?,
        None => query_from_flags(a, &forest, data.as_ref())?,
    };
    if a.common.budget_regions.is_some() || a.common.timeout_ms.is_some() {
        query.budget = budget(&a.common);
    }
    let result = match a.method {
        MethodArg::Lire => find_ce(&forest, &load_index(a, &forest, data.as_ref())?, &query)?,
        MethodArg::Dataset => {
            let Some(data) = &data else { return usage("--method dataset needs --data") };
            dataset_search(&forest, data, &query)?
        }
        MethodArg::Exact => exact_search(&forest, &enumerate_nonempty_regions(&forest, a.cap)?, &query)?,
    };
    Ok(to_json(&result))
}

fn cmd_bench(a: &BenchArgs) -> CliResult<String> {
    let forest = load_forest(&a.common)?;
    let data = require_data(&a.common)?;
    if a.queries == 0 {
        return usage("--queries must be positive");
    }
    let mut methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    methods.dedup();
    let config = BenchmarkConfig {
        queries: a.queries,
        seed: a.common.seed,
        metric: a.common.metric.into(),
        methods,
        cap: a.cap,
        budget: budget(&a.common),
    };
    let report = run_benchmark(&forest, &data, &config)?;
    Ok(if a.common.json { to_json(&report) } else { report.to_table() })
}

fn cmd_regions(a: &RegionsArgs) -> CliResult<String> {
    let forest = load_forest(&a.common)?;
    let data = require_data(&a.common)?;
    let mode = match a.mode {
        ModeArg::ByTrees => GrowthMode::ByTrees,
        ModeArg::ByDepth => GrowthMode::ByDepth,
    };
    let curve = region_growth_curve(&forest, &data, mode, a.cap)?;
    Ok(if a.common.json { to_json(&curve) } else { curve.to_table() })
}

fn cmd_stats(a: &StatsArgs) -> CliResult<String> {
    let stats = load_forest(&a.common)?.stats();
    Ok(if a.common.json {
        to_json(&stats)
    } else {
        format!("T\tDelta\tL\n{}\t{}\t{}\n", stats.trees, stats.mean_depth, stats.mean_leaves)
    })
}
