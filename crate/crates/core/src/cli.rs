//! Command-line interface.
//!
//! Exit codes: `0` success, `2` invalid input or parameters, `3` disconnected
//! contiguity graph, `1` anything else (such as a failed write). Outputs are
//! fully computed before anything is written, so a failing command leaves no
//! partial primary output.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{bakers_gamma, cut_by_count, nmi};
use crate::engine::{cluster, Constraint, ContiguityGraph, MergeTree};
use crate::heights::{all_heights, compute_heights, cophenetic_matrix, linkage_heights, HeightKind};
use crate::io;
use crate::proximity::{
    kernel_to_dissimilarity, points_to_dissimilarity, similarity_to_kernel, validate_dissimilarity,
    DissimilarityMatrix, LambdaStrategy, Metric,
};
use crate::simulation::{run_experiment, PerturbationConfig};
use crate::{Error, Result};

/// Environment variable capping the number of simulation worker threads.
pub const THREADS_ENV: &str = "WARDLINK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "wardlink", version, about = "Ward-linkage hierarchical clustering with dendrogram diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster an input file and write the merge tree.
    Cluster {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        constraint: ConstraintArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the four height sequences of a tree and their reversal flags.
    Heights {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        constraint: ConstraintArgs,
        /// Existing merge tree; clustered from the input when omitted.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut a merge tree into a given number of clusters.
    Cut {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two trees (Baker's gamma) or two partitions (NMI).
    Compare(CompareArgs),
    /// Run the seeded perturbation experiment.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write SVG line charts of the mean curves.
        #[arg(long)]
        svg: bool,
    },
    /// Check an input file and report problems.
    Validate {
        #[command(flatten)]
        input: InputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Points,
    Dissimilarity,
    Kernel,
    Similarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricName {
    Euclidean,
    Power,
    Manhattan,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: InputKind,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub metric: MetricName,
    /// Exponent for `--metric power`.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// `gershgorin`, `exact_eigen` or `fixed:<value>` (similarity input only).
    #[arg(long, default_value = "exact_eigen")]
    pub lambda_strategy: String,
}

#[derive(Debug, Clone, Args)]
pub struct ConstraintArgs {
    /// `none`, `path`, or a file of `i j` edges.
    #[arg(long, default_value = "none")]
    pub constraint: String,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long, requires = "tree_b", conflicts_with_all = ["partition_a", "partition_b"])]
    pub tree_a: Option<PathBuf>,
    #[arg(long, requires = "tree_a")]
    pub tree_b: Option<PathBuf>,
    /// Height used for the cophenetic matrices: m, ess, i or ibar.
    #[arg(long, default_value = "m")]
    pub height: String,
    /// Data behind both trees; needed for the i and ibar heights.
    #[arg(long, requires = "kind")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<InputKind>,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub metric: MetricName,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value = "exact_eigen")]
    pub lambda_strategy: String,
    #[arg(long, requires = "partition_b")]
    pub partition_a: Option<PathBuf>,
    #[arg(long, requires = "partition_a")]
    pub partition_b: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Disconnected { .. } => 3,
        Error::Input(_) | Error::Parameter(_) | Error::NotKernel { .. } | Error::SizeMismatch { .. } | Error::Csv(_) => 2,
        Error::Io(_) => 1,
    }
}

/// Loads the input and turns it into dissimilarities.
fn load(args: &InputArgs) -> Result<DissimilarityMatrix> {
    let text = io::read_text(&args.input)?;
    let d = match args.kind {
        InputKind::Points => {
            let metric = match args.metric {
                MetricName::Euclidean => Metric::Euclidean,
                MetricName::Power => Metric::Power(args.alpha),
                MetricName::Manhattan => Metric::Manhattan,
            };
            points_to_dissimilarity(&io::parse_points(&text)?, metric)?
        }
        InputKind::Dissimilarity => io::parse_dissimilarity(&text)?,
        InputKind::Kernel => kernel_to_dissimilarity(&io::parse_kernel(&text)?)?,
        InputKind::Similarity => {
            let strategy: LambdaStrategy = args.lambda_strategy.parse()?;
            let (kernel, _) = similarity_to_kernel(&io::parse_similarity(&text)?, strategy)?;
            kernel_to_dissimilarity(&kernel)?
        }
    };
    let report = validate_dissimilarity(&d);
    if !report.is_valid() {
        return Err(Error::Input(report.summary()));
    }
    Ok(d)
}

fn parse_constraint(value: &str, n: usize) -> Result<Constraint> {
    match value {
        "none" => Ok(Constraint::None),
        "path" => Ok(Constraint::Path),
        file => {
            let graph: ContiguityGraph = io::parse_edges(&io::read_text(Path::new(file))?, n)?;
            Ok(Constraint::Graph(graph))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_tree(path: &Path) -> Result<MergeTree> {
    io::parse_tree(&io::read_text(path)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cluster { input, constraint, out } => {
            let d = load(&input)?;
            let tree = cluster(&d, parse_constraint(&constraint.constraint, d.n())?)?;
            emit(out.as_deref(), &io::tree_to_csv(&tree)?)
        }
        Command::Heights { input, constraint, tree, out } => {
            let d = load(&input)?;
            let tree = match tree {
                Some(path) => read_tree(&path)?,
                None => cluster(&d, parse_constraint(&constraint.constraint, d.n())?)?,
            };
            emit(out.as_deref(), &io::heights_to_csv(&all_heights(&tree, &d)?)?)
        }
        Command::Cut { tree, k, out } => {
            let p = cut_by_count(&read_tree(&tree)?, k)?;
            emit(out.as_deref(), &io::partition_to_csv(&p)?)
        }
        Command::Compare(args) => compare(args),
        Command::Simulate { config, seed, out, svg } => simulate(config.as_deref(), seed, &out, svg),
        Command::Validate { input } => validate(&input),
    }
}

fn compare(args: CompareArgs) -> Result<()> {
    if let (Some(a), Some(b)) = (&args.partition_a, &args.partition_b) {
        let pa = io::parse_partition(&io::read_text(a)?)?;
        let pb = io::parse_partition(&io::read_text(b)?)?;
        let value = nmi(&pa, &pb)?;
        return emit(args.out.as_deref(), &format!("nmi,{}\n", io::format_float(value)));
    }
    let (Some(a), Some(b)) = (&args.tree_a, &args.tree_b) else {
        return Err(Error::Parameter("give --tree-a/--tree-b or --partition-a/--partition-b".into()));
    };
    let kind: HeightKind = args.height.parse()?;
    let trees = [read_tree(a)?, read_tree(b)?];
    if trees[0].n() != trees[1].n() {
        return Err(Error::SizeMismatch { expected: trees[0].n(), found: trees[1].n() });
    }
    let heights: Vec<Vec<f64>> = match kind {
        HeightKind::Linkage | HeightKind::Ess => trees.iter().map(|t| linkage_heights(t, kind)).collect(),
        HeightKind::MergerInertia | HeightKind::AvgMergerInertia => {
            let (Some(input), Some(kind_arg)) = (&args.input, args.kind) else {
                return Err(Error::Parameter(format!("--height {kind} needs --input and --kind")));
            };
            let d = load(&InputArgs {
                input: input.clone(),
                kind: kind_arg,
                metric: args.metric,
                alpha: args.alpha,
                lambda_strategy: args.lambda_strategy.clone(),
            })?;
            trees.iter().map(|t| compute_heights(t, &d, kind).map(|h| h.values)).collect::<Result<_>>()?
        }
    };
    let c: Vec<_> = trees.iter().zip(&heights).map(|(t, h)| cophenetic_matrix(t, h)).collect();
    let gamma = bakers_gamma(&c[0], &c[1])?;
    emit(args.out.as_deref(), &format!("bakers_gamma,{}\n", io::format_float(gamma)))
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
    }
}

fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path, svg: bool) -> Result<()> {
    let mut cfg = match config {
        Some(path) => PerturbationConfig::parse(&io::read_text(path)?)?,
        None => PerturbationConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = match thread_cap()? {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot start {threads} worker threads: {e}")))?
            .install(|| run_experiment(&cfg))?,
        None => run_experiment(&cfg)?,
    };
    let mut files = vec![
        ("heights.csv", report.heights_csv()),
        ("reversals.csv", report.reversals_csv()),
        ("cardinals.csv", report.cardinals_csv()),
        ("gamma_nmi.csv", report.gamma_nmi_csv()),
    ];
    if svg {
        files.push(("heights_m.svg", report.curves_svg(HeightKind::Linkage)));
        files.push(("heights_ess.svg", report.curves_svg(HeightKind::Ess)));
    }
    std::fs::create_dir_all(out)?;
    for (name, text) in files {
        std::fs::write(out.join(name), text)?;
    }
    Ok(())
}

fn validate(input: &InputArgs) -> Result<()> {
    let text = io::read_text(&input.input)?;
    let summary = match input.kind {
        InputKind::Dissimilarity => {
            let d = io::parse_dissimilarity(&text)?;
            let report = validate_dissimilarity(&d);
            if !report.is_valid() {
                return Err(Error::Input(report.summary()));
            }
            report.summary()
        }
        _ => format!("{} objects", load(input)?.n()),
    };
    println!("ok: {summary}");
    Ok(())
}
