use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gnpr::clustering::{Agreement, Method};
use gnpr::distance::RankNormalization;
use gnpr::ingestion::{IngestOptions, MissingPolicy, TimeOrder};
use gnpr::representation::BinRule;

use crate::CliError;

/// Cluster random-walk time series by dependence and by distribution.
///
/// Each series is reduced to the ranks of its increments (dependence) and a
/// histogram of its increments on a shared grid (distribution); the distance
/// blends the two with weight θ on dependence.
#[derive(Debug, Parser)]
#[command(name = "gnpr", version, propagate_version = true)]
pub struct Cli {
    /// Seed for stability subsampling and synthetic generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Only log errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Emit log lines and errors as JSON objects.
    #[arg(long, global = true)]
    pub json_logs: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print per-series ranks and histograms as JSON.
    Represent {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bins: BinArgs,
        /// Output file (default: standard output).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compute the pairwise distance matrix.
    Distances {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bins: BinArgs,
        #[command(flatten)]
        distance: DistanceArgs,
        /// Output format; by default chosen from the output extension.
        #[arg(long, value_enum)]
        format: Option<MatrixFormat>,
        /// Output file (default: standard output).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Cluster the series and summarize each cluster.
    Cluster {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bins: BinArgs,
        #[command(flatten)]
        distance: DistanceArgs,
        #[command(flatten)]
        clustering: ClusterArgs,
        /// Also write the summary table (CSV) here.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Assignment JSON (default: standard output).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Score every K in a range by resampling stability.
    Stability {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bins: BinArgs,
        #[command(flatten)]
        distance: DistanceArgs,
        #[command(flatten)]
        clustering: ClusterArgs,
        /// Report JSON (default: standard output).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic panel with known block and group structure.
    Synth(SynthArgs),
    /// Run everything and write all artifacts to a directory.
    Pipeline {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bins: BinArgs,
        #[command(flatten)]
        distance: DistanceArgs,
        #[command(flatten)]
        clustering: ClusterArgs,
        /// Run at θ = 0, 0.5 and 1 and cross-tabulate the partitions.
        #[arg(long)]
        theta_sweep: bool,
        /// Output directory.
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Panel CSV: time label column, then one column per series.
    #[arg(long, short)]
    pub input: PathBuf,
    /// The file holds increments, not levels.
    #[arg(long)]
    pub already_increments: bool,
    /// Series with gaps: fail, or drop them with a warning.
    #[arg(long, value_enum, default_value_t = MissingArg::Reject)]
    pub missing: MissingArg,
    /// How time labels are ordered.
    #[arg(long, value_enum, default_value_t = TimeOrderArg::Lexicographic)]
    pub time_order: TimeOrderArg,
    /// Parse time labels as dates with this format (e.g. %Y-%m-%d).
    #[arg(long, conflicts_with = "time_order")]
    pub date_format: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MissingArg {
    Reject,
    DropSeries,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimeOrderArg {
    Lexicographic,
    Numeric,
}

impl InputArgs {
    pub fn options(&self) -> IngestOptions {
        IngestOptions {
            missing: match self.missing {
                MissingArg::Reject => MissingPolicy::Reject,
                MissingArg::DropSeries => MissingPolicy::DropSeries,
            },
            already_increments: self.already_increments,
            time_order: match (&self.date_format, self.time_order) {
                (Some(fmt), _) => TimeOrder::Date(fmt.clone()),
                (None, TimeOrderArg::Lexicographic) => TimeOrder::Lexicographic,
                (None, TimeOrderArg::Numeric) => TimeOrder::Numeric,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct BinArgs {
    /// Number of equal-width bins over the pooled range.
    #[arg(long, conflicts_with = "bin_width")]
    pub bins: Option<usize>,
    /// Fixed bin width.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Binning rule; inferred from --bins/--bin-width when absent.
    #[arg(long, value_enum)]
    pub bin_rule: Option<BinRuleArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BinRuleArg {
    Count,
    Width,
    /// Freedman–Diaconis width from the pooled interquartile range.
    Fd,
}

impl BinArgs {
    pub fn rule(&self) -> Result<BinRule, CliError> {
        let default_bins = match BinRule::default() {
            BinRule::Count { bins } => bins,
            _ => 100,
        };
        let rule = self.bin_rule.unwrap_or(match (self.bins, self.bin_width) {
            (_, Some(_)) => BinRuleArg::Width,
            _ => BinRuleArg::Count,
        });
        match rule {
            BinRuleArg::Count => {
                if self.bin_width.is_some() {
                    return Err(CliError::Usage("--bin-width does not apply to --bin-rule count".into()));
                }
                Ok(BinRule::Count {
                    bins: self.bins.unwrap_or(default_bins),
                })
            }
            BinRuleArg::Width => match (self.bins, self.bin_width) {
                (None, Some(width)) => Ok(BinRule::Width { width }),
                (Some(_), _) => Err(CliError::Usage("--bins does not apply to --bin-rule width".into())),
                (None, None) => Err(CliError::Usage("--bin-rule width needs --bin-width".into())),
            },
            BinRuleArg::Fd => {
                if self.bins.is_some() || self.bin_width.is_some() {
                    return Err(CliError::Usage("--bin-rule fd takes no --bins or --bin-width".into()));
                }
                Ok(BinRule::FreedmanDiaconis)
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Weight of dependence versus distribution, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Scaling of the squared rank differences.
    #[arg(long, value_enum, default_value_t = NormalizationArg::Standard)]
    pub normalization: NormalizationArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    /// 3 / (M²(M − 1))
    Standard,
    /// 3 / (M(M² − 1)), so that d² = (1 − Spearman ρ) / 2 exactly.
    ExactSpearman,
}

impl NormalizationArg {
    pub fn value(self) -> RankNormalization {
        match self {
            NormalizationArg::Standard => RankNormalization::Standard,
            NormalizationArg::ExactSpearman => RankNormalization::ExactSpearman,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Fixed number of clusters.
    #[arg(long, short, conflicts_with = "k_range")]
    pub k: Option<usize>,
    /// Candidate range for stability selection, e.g. 2..10 (inclusive).
    #[arg(long, value_parser = parse_k_range)]
    pub k_range: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = MethodArg::Average)]
    pub method: MethodArg,
    /// Subsampling runs for stability selection.
    #[arg(long, default_value_t = 20)]
    pub stability_runs: usize,
    /// Fraction of time positions kept per run, in [0.5, 1).
    #[arg(long, default_value_t = 0.7)]
    pub subsample: f64,
    /// Agreement between runs.
    #[arg(long, value_enum, default_value_t = AgreementArg::AdjustedRand)]
    pub agreement: AgreementArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Average,
    Complete,
    Medoids,
}

impl MethodArg {
    pub fn value(self) -> Method {
        match self {
            MethodArg::Average => Method::Average,
            MethodArg::Complete => Method::Complete,
            MethodArg::Medoids => Method::Medoids,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AgreementArg {
    AdjustedRand,
    MinimalMatching,
}

impl AgreementArg {
    pub fn value(self) -> Agreement {
        match self {
            AgreementArg::AdjustedRand => Agreement::AdjustedRand,
            AgreementArg::MinimalMatching => Agreement::MinimalMatching,
        }
    }
}

fn parse_k_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected <min>..<max>, got '{s}'"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a.trim().parse().map_err(|_| format!("bad lower bound in '{s}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad upper bound in '{s}'"))?;
    if a > b {
        return Err(format!("empty range '{s}'"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON spec file; the inline flags below are ignored when given.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Correlation blocks as <count>x<size>.
    #[arg(long, default_value = "4x10")]
    pub blocks: String,
    /// Within-block correlation of the underlying Gaussian factor model.
    #[arg(long, default_value_t = 0.7)]
    pub rho: f64,
    /// Distribution groups, e.g. gaussian,student_t:3,laplace@2 (family[:nu][@scale]).
    #[arg(long, default_value = "gaussian,student_t:3")]
    pub dists: String,
    /// Increments per series (the level panel has one more row).
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Panel CSV to write.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Ground-truth JSON (default: next to the panel, `.truth.json`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}
