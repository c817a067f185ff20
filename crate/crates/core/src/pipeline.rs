//! End-to-end run: load, difference, represent, measure, choose K, cluster,
//! summarize, write artifacts.
//!
//! Every artifact starts with the tool version and the resolved run
//! configuration (as `# ` comment lines in CSV files, as a `provenance`
//! object in JSON files). Nothing time- or schedule-dependent is written, so
//! identical inputs give byte-identical outputs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{
    adjusted_rand, cluster, cluster_summary, linkage, stability_select_k, Agreement,
    ClusterAssignment, ClusterSummary, Merge, Method, StabilityConfig, StabilityReport,
};
use crate::distance::{distance_matrix, DistanceMatrix, DistanceParams, RankNormalization};
use crate::ingestion::{increments_for, load_panel, IncrementPanel, IngestOptions, SeriesPanel};
use crate::representation::{represent, RepresentationConfig};
use crate::{Error, Result};

pub const TOOL: &str = "gnpr";

/// Values of θ visited by a sweep.
pub const SWEEP_THETAS: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Not part of the embedded provenance: moving the outputs does not
    /// change them.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub ingest: IngestOptions,
    pub representation: RepresentationConfig,
    pub theta: f64,
    pub normalization: RankNormalization,
    pub method: Method,
    /// Fixed number of clusters; when absent K is chosen by stability over
    /// `k_min..=k_max`.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub stability_runs: usize,
    pub subsample_fraction: f64,
    pub agreement: Agreement,
    pub seed: u64,
    pub theta_sweep: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stability = StabilityConfig::default();
        Self {
            input: PathBuf::new(),
            output_dir: PathBuf::from("."),
            ingest: IngestOptions::default(),
            representation: RepresentationConfig::default(),
            theta: 0.5,
            normalization: RankNormalization::default(),
            method: Method::default(),
            k: None,
            k_min: stability.k_min,
            k_max: stability.k_max,
            stability_runs: stability.runs,
            subsample_fraction: stability.subsample_fraction,
            agreement: stability.agreement,
            seed: 0,
            theta_sweep: false,
        }
    }
}

impl RunConfig {
    /// Checks the parameters that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        DistanceParams::new(self.theta)?;
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
            }
        } else {
            if self.k_min < 2 || self.k_min > self.k_max {
                return Err(Error::Parameter(format!(
                    "invalid k range {}..{}",
                    self.k_min, self.k_max
                )));
            }
            if self.stability_runs < 2 {
                return Err(Error::Parameter(format!(
                    "need at least 2 stability runs, got {}",
                    self.stability_runs
                )));
            }
            if !(0.5..1.0).contains(&self.subsample_fraction) {
                return Err(Error::Parameter(format!(
                    "subsample fraction must lie in [0.5, 1), got {}",
                    self.subsample_fraction
                )));
            }
        }
        Ok(())
    }

    pub fn stability_config(&self) -> StabilityConfig {
        StabilityConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            runs: self.stability_runs,
            subsample_fraction: self.subsample_fraction,
            seed: self.seed,
            method: self.method,
            agreement: self.agreement,
        }
    }

    fn thetas(&self) -> Vec<f64> {
        if self.theta_sweep {
            SWEEP_THETAS.to_vec()
        } else {
            vec![self.theta]
        }
    }
}

/// Tool name, version and the configuration that produced an artifact.
#[derive(Debug, Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
}

impl<'a, C: Serialize> Provenance<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Self {
            tool: TOOL,
            version: crate::VERSION,
            command,
            config,
        }
    }

    /// Header lines for CSV artifacts.
    pub fn comment_lines(&self) -> Result<Vec<String>> {
        Ok(vec![
            format!("{} {} {}", self.tool, self.version, self.command),
            format!("config: {}", serde_json::to_string(self.config)?),
        ])
    }
}

#[derive(Debug, Serialize)]
struct AssignmentDoc<'a, C: Serialize> {
    provenance: &'a Provenance<'a, C>,
    theta: f64,
    k: usize,
    method: Method,
    labels: BTreeMap<&'a str, usize>,
    summary: &'a ClusterSummary,
    stability: Option<&'a StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    merges: Option<&'a [Merge]>,
}

#[derive(Debug, Serialize)]
struct StabilityDoc<'a, C: Serialize> {
    provenance: &'a Provenance<'a, C>,
    theta: f64,
    #[serde(flatten)]
    report: &'a StabilityReport,
}

/// Contingency table between the partitions found at two values of θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossTab {
    pub row_theta: f64,
    pub col_theta: f64,
    /// `counts[a][b]`: series in cluster `a` at `row_theta` and `b` at
    /// `col_theta`.
    pub counts: Vec<Vec<usize>>,
    pub adjusted_rand: f64,
    /// Every column cluster sits inside a single row cluster.
    pub columns_refine_rows: bool,
}

pub fn cross_tabulate(rows: &ClusterAssignment, cols: &ClusterAssignment) -> Result<CrossTab> {
    if rows.ids != cols.ids {
        return Err(Error::Validation("assignments cover different series".into()));
    }
    let mut counts = vec![vec![0; cols.k]; rows.k];
    for (&a, &b) in rows.labels.iter().zip(&cols.labels) {
        counts[a][b] += 1;
    }
    let columns_refine_rows =
        (0..cols.k).all(|b| counts.iter().filter(|r| r[b] > 0).count() <= 1);
    Ok(CrossTab {
        row_theta: rows.theta.unwrap_or(f64::NAN),
        col_theta: cols.theta.unwrap_or(f64::NAN),
        adjusted_rand: adjusted_rand(&rows.labels, &cols.labels)?,
        counts,
        columns_refine_rows,
    })
}

/// Results for one value of θ.
#[derive(Debug, Clone)]
pub struct ThetaRun {
    pub theta: f64,
    pub matrix: DistanceMatrix,
    pub assignment: ClusterAssignment,
    pub summary: ClusterSummary,
    pub stability: Option<StabilityReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub runs: Vec<ThetaRun>,
    pub crosstabs: Vec<CrossTab>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Loads `config.input` and runs [`run_on_panel`].
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let ingested = load_panel(&config.input, &config.ingest)?;
    let mut outcome = run_on_panel(&ingested.panel, config)?;
    outcome.warnings.splice(0..0, ingested.warnings);
    Ok(outcome)
}

pub fn run_on_panel(panel: &SeriesPanel, config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let increments = increments_for(panel, &config.ingest)?;
    let provenance = Provenance::new("pipeline", config);
    let comment = provenance.comment_lines()?;
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::output(&config.output_dir, e))?;

    let mut files = Vec::new();
    let mut runs = Vec::new();
    for theta in config.thetas() {
        let dir = if config.theta_sweep {
            config.output_dir.join(format!("theta-{theta}"))
        } else {
            config.output_dir.clone()
        };
        fs::create_dir_all(&dir).map_err(|e| Error::output(&dir, e))?;
        let run = analyze(&increments, config, theta)?;
        files.extend(write_theta(&dir, &run, &increments, &provenance, &comment)?);
        runs.push(run);
    }

    let mut crosstabs = Vec::new();
    if config.theta_sweep {
        for a in 0..runs.len() {
            for b in a + 1..runs.len() {
                crosstabs.push(cross_tabulate(&runs[a].assignment, &runs[b].assignment)?);
            }
        }
        #[derive(Serialize)]
        struct CrossTabDoc<'a, C: Serialize> {
            provenance: &'a Provenance<'a, C>,
            tables: &'a [CrossTab],
        }
        let path = config.output_dir.join("crosstab.json");
        write_json(
            &path,
            &CrossTabDoc {
                provenance: &provenance,
                tables: &crosstabs,
            },
        )?;
        files.push(path);
    }
    Ok(PipelineOutcome {
        runs,
        crosstabs,
        warnings: Vec::new(),
        files,
    })
}

/// Distances, K (fixed or chosen by stability), clustering and summary at
/// one value of θ.
pub fn analyze(increments: &IncrementPanel, config: &RunConfig, theta: f64) -> Result<ThetaRun> {
    let params = DistanceParams::new(theta)?.with_normalization(config.normalization);
    let stability = match config.k {
        Some(_) => None,
        None => Some(stability_select_k(
            increments,
            &params,
            &config.representation,
            &config.stability_config(),
        )?),
    };
    let k = config
        .k
        .or(stability.as_ref().map(|s| s.selected_k))
        .expect("k fixed or selected");
    log::info!("theta {theta}: clustering into {k} groups");
    let rep = represent(increments, &config.representation)?;
    let matrix = distance_matrix(&rep, &params)?;
    let assignment = cluster(&matrix, k, config.method)?;
    let summary = cluster_summary(&assignment, increments)?;
    Ok(ThetaRun {
        theta,
        matrix,
        assignment,
        summary,
        stability,
    })
}

fn write_theta(
    dir: &Path,
    run: &ThetaRun,
    increments: &IncrementPanel,
    provenance: &Provenance<'_, RunConfig>,
    comment: &[String],
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();

    let path = dir.join("distances.csv");
    with_file(&path, |w| run.matrix.write_csv(w, comment))?;
    files.push(path);

    let path = dir.join("assignment.json");
    with_file(&path, |w| write_assignment(w, run, provenance))?;
    files.push(path);

    let path = dir.join("summary.csv");
    with_file(&path, |w| run.summary.write_table(w, comment))?;
    files.push(path);

    if let Some(report) = &run.stability {
        let path = dir.join("stability.json");
        with_file(&path, |w| write_stability(w, run.theta, report, provenance))?;
        files.push(path);
    }

    let path = dir.join("observations.csv");
    with_file(&path, |w| write_long(w, &run.assignment, increments, comment))?;
    files.push(path);
    Ok(files)
}

/// Assignment document: θ, K, labels by id, summary rows, stability report
/// and, for hierarchical methods, the merge sequence.
pub fn write_assignment<W: Write, C: Serialize>(
    out: W,
    run: &ThetaRun,
    provenance: &Provenance<'_, C>,
) -> Result<()> {
    let a = &run.assignment;
    let dendrogram = a.method.linkage().map(|l| linkage(&run.matrix, l));
    let doc = AssignmentDoc {
        provenance,
        theta: run.theta,
        k: a.k,
        method: a.method,
        labels: a.ids.iter().map(String::as_str).zip(a.labels.iter().copied()).collect(),
        summary: &run.summary,
        stability: run.stability.as_ref(),
        merges: dendrogram.as_ref().map(|d| d.merges()),
    };
    json_to(out, &doc)
}

pub fn write_stability<W: Write, C: Serialize>(
    out: W,
    theta: f64,
    report: &StabilityReport,
    provenance: &Provenance<'_, C>,
) -> Result<()> {
    json_to(
        out,
        &StabilityDoc {
            provenance,
            theta,
            report,
        },
    )
}

/// One row per pooled observation: `cluster,series,position,value`, clusters
/// named `C1…` as in the summary table.
pub fn write_long<W: Write>(
    mut out: W,
    assignment: &ClusterAssignment,
    increments: &IncrementPanel,
    comment: &[String],
) -> Result<()> {
    let io = |e| Error::output("<output>", e);
    for line in comment {
        writeln!(out, "# {line}").map_err(io)?;
    }
    writeln!(out, "cluster,series,position,value").map_err(io)?;
    let position: BTreeMap<&str, usize> = increments
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    for (label, members) in assignment.members().iter().enumerate() {
        for &m in members {
            let id = assignment.ids[m].as_str();
            let row = position.get(id).ok_or_else(|| {
                Error::Validation(format!("series {id} not in panel"))
            })?;
            let field = crate::distance::csv_field(id);
            for (t, v) in increments.row(*row).iter().enumerate() {
                writeln!(out, "C{},{field},{t},{v}", label + 1).map_err(io)?;
            }
        }
    }
    Ok(())
}

fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::output(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::output(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    with_file(path, |w| json_to(w, value))
}

/// Pretty-printed JSON followed by a newline.
pub fn json_to<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::output("<output>", e))
}
