use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use disc_core::bench::{
    self, run_suite, run_suite_on, run_tree_suite, run_zoom_suite, SuiteConfig, TreeSuiteConfig, ZoomSuiteConfig,
};
use disc_core::data::{load_csv, save_csv, write_csv, CsvKind, DataDistribution, GeneratorSpec};
use disc_core::disc::{solve_with_state, verify, Algorithm, DiverseSubset, SolveOptions, Verification};
use disc_core::mtree::{QueryMode, SplitPolicy};
use disc_core::zoom::{local_zoom, zoom, LocalZoomReport, ZoomDiff, ZoomVariant};
use disc_core::{Dataset, MTree, MTreeConfig, Metric};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "disc", version, about = "Radius-based diversification over an M-tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Build the index over a dataset and print its statistics as JSON.
    Index(IndexArgs),
    /// Compute a diverse subset.
    Disc(DiscArgs),
    /// Adapt a stored solution to a new radius.
    Zoom(ZoomArgs),
    /// Run a benchmark suite and write one CSV row per run.
    Bench(BenchArgs),
    /// Summarize a benchmark CSV into plot-ready means.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Distribution {
    Uniform,
    Clustered,
}

impl From<Distribution> for DataDistribution {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Uniform => DataDistribution::Uniform,
            Distribution::Clustered => DataDistribution::Clustered,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    TopDown,
    BottomUp,
}

impl From<Mode> for QueryMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::TopDown => QueryMode::TopDown,
            Mode::BottomUp => QueryMode::BottomUp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "clustered")]
    distribution: Distribution,
    #[arg(short, long, default_value_t = 10_000)]
    n: usize,
    #[arg(short, long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = disc_core::data::DEFAULT_CLUSTERS)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Dataset CSV with a header row.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    kind: CsvKind,
    /// Min-max normalize numeric columns into [0,1] on load.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
}

#[derive(Args)]
struct TreeArgs {
    /// Maximum entries per node.
    #[arg(long, default_value_t = 50)]
    capacity: usize,
    #[arg(long, default_value = "min-overlap")]
    split_policy: SplitPolicy,
    /// Seed for the random split policy.
    #[arg(long, default_value_t = 0)]
    tree_seed: u64,
}

impl TreeArgs {
    fn config(&self) -> MTreeConfig {
        MTreeConfig {
            node_capacity: self.capacity,
            split_policy: self.split_policy,
            seed: self.tree_seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Also count every object's neighborhood at this radius while building.
    #[arg(long)]
    count_radius: Option<f64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiscArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(short, long)]
    radius: f64,
    #[arg(short, long, default_value = "grey-greedy")]
    algorithm: Algorithm,
    #[arg(long, value_enum, default_value = "top-down")]
    query_mode: Mode,
    /// `json` writes a solution file that `zoom` accepts; `csv` writes `rank,id`.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ZoomArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Solution file written by `disc` or an earlier `zoom`.
    #[arg(short, long)]
    solution: PathBuf,
    /// The new radius.
    #[arg(short, long)]
    radius: f64,
    #[arg(short, long, default_value = "greedy")]
    variant: ZoomVariant,
    /// Zoom only around this member of the solution.
    #[arg(long)]
    focus: Option<usize>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// Every algorithm at every radius.
    Solvers,
    /// Zoom ladders compared with solving from scratch.
    Zoom,
    /// Split policies and node capacities.
    Tree,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// JSON config for the suite; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run the solver suite on this CSV instead of generated data.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    distribution: Option<Distribution>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(short, long)]
    d: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Comma-separated node capacities (several only for the tree suite).
    #[arg(long, value_delimiter = ',')]
    capacity: Vec<usize>,
    /// Comma-separated split policies (several only for the tree suite).
    #[arg(long, value_delimiter = ',')]
    split_policy: Vec<SplitPolicy>,
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',')]
    variants: Vec<ZoomVariant>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Record wall-clock milliseconds per row.
    #[arg(long)]
    timing: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV written by `bench`; stdin when omitted.
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// What `disc` writes and `zoom` reads back.
#[derive(Serialize, Deserialize)]
struct SolutionFile {
    metric: Metric,
    subset: DiverseSubset,
    /// For a local zoom this checks the local result against its region.
    verification: Verification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diff: Option<ZoomDiff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    local: Option<LocalZoomReport>,
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Index(args) => index(args),
        Command::Disc(args) => disc(args),
        Command::Zoom(args) => zoom_cmd(args),
        Command::Bench(args) => bench_cmd(args),
        Command::Report(args) => report(args),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn load(args: &InputArgs) -> Result<Arc<Dataset>> {
    let data = load_csv(&args.input, args.kind, args.normalize)
        .with_context(|| format!("loading {}", args.input.display()))?;
    args.metric.check(data.kind())?;
    Ok(Arc::new(data))
}

fn gen(args: GenArgs) -> Result<()> {
    let spec = GeneratorSpec {
        distribution: args.distribution.into(),
        n: args.n,
        d: args.d,
        clusters: args.clusters,
        seed: args.seed,
        ..GeneratorSpec::uniform(args.n, args.d, args.seed)
    };
    let data = spec.generate()?;
    match &args.out {
        Some(path) => save_csv(&data, path)?,
        None => {
            let mut out = output(None)?;
            write_csv(&data, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn index(args: IndexArgs) -> Result<()> {
    let data = load(&args.input)?;
    let mut config = args.tree.config();
    if let Some(r) = args.count_radius {
        config = config.counting(r);
    }
    let tree = MTree::build(data, args.input.metric, config)?;
    write_json(&tree.stats(), args.out.as_deref())
}

fn disc(args: DiscArgs) -> Result<()> {
    let data = load(&args.input)?;
    let metric = args.input.metric;
    let tree = MTree::build(data.clone(), metric, args.tree.config())?;
    let opts = SolveOptions { query_mode: args.query_mode.into() };
    let (subset, _) = solve_with_state(&tree, args.radius, args.algorithm, opts)?;
    let verification = verify(&data, metric, &subset.ids, args.radius)?;
    match args.format {
        Format::Json => {
            let file = SolutionFile { metric, subset, verification, diff: None, local: None };
            write_json(&file, args.out.as_deref())
        }
        Format::Csv => {
            let mut text = String::from("rank,id\n");
            for (rank, id) in subset.ids.iter().enumerate() {
                text.push_str(&format!("{rank},{id}\n"));
            }
            write_text(&text, args.out.as_deref())
        }
    }
}

fn zoom_cmd(args: ZoomArgs) -> Result<()> {
    let data = load(&args.input)?;
    let metric = args.input.metric;
    let raw =
        std::fs::read_to_string(&args.solution).with_context(|| format!("reading {}", args.solution.display()))?;
    let base: SolutionFile = serde_json::from_str(&raw).context("parsing the solution file")?;
    if base.metric != metric {
        bail!("solution was computed under {} but --metric is {metric}", base.metric);
    }
    let tree = MTree::build(data.clone(), metric, args.tree.config())?;
    let file = match args.focus {
        Some(focus) => {
            let out = local_zoom(&tree, &base.subset, focus, args.radius, args.variant)?;
            SolutionFile {
                metric,
                subset: out.subset,
                verification: out.report.verification,
                diff: Some(out.diff),
                local: Some(out.report),
            }
        }
        None => {
            let out = zoom(&tree, &base.subset, args.radius, args.variant)?;
            let verification = verify(&data, metric, &out.subset.ids, args.radius)?;
            SolutionFile { metric, subset: out.subset, verification, diff: Some(out.diff), local: None }
        }
    };
    write_json(&file, args.out.as_deref())
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let raw = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

impl BenchArgs {
    fn apply_dataset(&self, spec: &mut GeneratorSpec) {
        if let Some(d) = self.distribution {
            spec.distribution = d.into();
        }
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(d) = self.d {
            spec.d = d;
        }
        if let Some(c) = self.clusters {
            spec.clusters = c;
        }
    }

    fn apply_tree(&self, tree: &mut MTreeConfig) -> Result<()> {
        match self.capacity[..] {
            [] => {}
            [c] => tree.node_capacity = c,
            _ => bail!("several capacities are only meaningful for the tree suite"),
        }
        match self.split_policy[..] {
            [] => {}
            [p] => tree.split_policy = p,
            _ => bail!("several split policies are only meaningful for the tree suite"),
        }
        Ok(())
    }

    fn reject(&self, what: &str, given: bool) -> Result<()> {
        if given {
            bail!("--{what} does not apply to this suite");
        }
        Ok(())
    }
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let config = args.config.as_deref();
    let csv = match args.suite {
        Suite::Solvers => {
            args.reject("variants", !args.variants.is_empty())?;
            let mut cfg: SuiteConfig = read_config(config)?;
            args.apply_dataset(&mut cfg.dataset);
            args.apply_tree(&mut cfg.tree)?;
            if let Some(m) = args.metric {
                cfg.metric = m;
            }
            if !args.radii.is_empty() {
                cfg.radii = args.radii.clone();
            }
            if !args.algorithms.is_empty() {
                cfg.algorithms = args.algorithms.clone();
            }
            if !args.seeds.is_empty() {
                cfg.seeds = args.seeds.clone();
            }
            cfg.timing |= args.timing;
            let rows = match &args.input {
                Some(path) => {
                    let data = Arc::new(load_csv(path, CsvKind::Auto, false)?);
                    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    run_suite_on(&data, &label, &cfg)?
                }
                None => run_suite(&cfg)?,
            };
            bench::to_csv_string(&rows)?
        }
        Suite::Zoom => {
            args.reject("input", args.input.is_some())?;
            args.reject("algorithms", !args.algorithms.is_empty())?;
            let mut cfg: ZoomSuiteConfig = read_config(config)?;
            args.apply_dataset(&mut cfg.dataset);
            args.apply_tree(&mut cfg.tree)?;
            if let Some(m) = args.metric {
                cfg.metric = m;
            }
            if !args.radii.is_empty() {
                cfg.radii = args.radii.clone();
            }
            if !args.variants.is_empty() {
                cfg.variants = args.variants.clone();
            }
            if !args.seeds.is_empty() {
                cfg.seeds = args.seeds.clone();
            }
            cfg.timing |= args.timing;
            bench::to_csv_string(&run_zoom_suite(&cfg)?)?
        }
        Suite::Tree => {
            args.reject("input", args.input.is_some())?;
            args.reject("variants", !args.variants.is_empty())?;
            let mut cfg: TreeSuiteConfig = read_config(config)?;
            args.apply_dataset(&mut cfg.dataset);
            if let Some(m) = args.metric {
                cfg.metric = m;
            }
            if !args.capacity.is_empty() {
                cfg.capacities = args.capacity.clone();
            }
            if !args.split_policy.is_empty() {
                cfg.policies = args.split_policy.clone();
            }
            match args.radii[..] {
                [] => {}
                [r] => cfg.radius = r,
                _ => bail!("the tree suite runs a single radius"),
            }
            match args.algorithms[..] {
                [] => {}
                [a] => cfg.algorithm = a,
                _ => bail!("the tree suite runs a single algorithm"),
            }
            if !args.seeds.is_empty() {
                cfg.seeds = args.seeds.clone();
            }
            cfg.timing |= args.timing;
            bench::to_csv_string(&run_tree_suite(&cfg)?)?
        }
    };
    write_text(&csv, args.out.as_deref())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut text = String::new();
    match &args.input {
        Some(p) => {
            File::open(p).with_context(|| format!("opening {}", p.display()))?.read_to_string(&mut text)?;
        }
        None => {
            io::stdin().read_to_string(&mut text)?;
        }
    }
    write_text(&bench::report_csv(text.as_bytes())?, args.out.as_deref())
}
