use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use gnpr::clustering::{stability_select_k, StabilityReport};
use gnpr::distance::{distance_matrix, DistanceParams};
use gnpr::ingestion::{increments_for, load_panel, IncrementPanel, SeriesPanel};
use gnpr::pipeline::{analyze, json_to, run_on_panel, write_assignment, write_stability, Provenance, RunConfig};
use gnpr::representation::{represent, Grid, SeriesRecord};
use gnpr::synthetic::{generate_panel, parse_blocks, parse_groups, GroundTruth, SyntheticSpec};

use crate::args::{BinArgs, ClusterArgs, Cli, Command, DistanceArgs, InputArgs, MatrixFormat, SynthArgs};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Candidate range used when neither --k nor --k-range is given, clipped to
/// N − 1.
const DEFAULT_K_RANGE: (usize, usize) = (2, 10);

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Represent { input, bins, output } => {
            let (panel, increments) = load(input)?;
            let config = resolve(cli, &panel, input, bins, None, None)?;
            let rep = represent(&increments, &config.representation)?;
            #[derive(Serialize)]
            struct Doc<'a> {
                provenance: Provenance<'a, RunConfig>,
                grid: Grid,
                n_obs: usize,
                series: Vec<SeriesRecord<'a>>,
            }
            let doc = Doc {
                provenance: Provenance::new("represent", &config),
                grid: rep.grid(),
                n_obs: rep.n_obs(),
                series: rep.records(),
            };
            emit(output.as_deref(), |w| Ok(json_to(w, &doc)?))
        }
        Command::Distances {
            input,
            bins,
            distance,
            format,
            output,
        } => {
            let (panel, increments) = load(input)?;
            let config = resolve(cli, &panel, input, bins, Some(distance), None)?;
            let rep = represent(&increments, &config.representation)?;
            let params = DistanceParams::new(config.theta)?.with_normalization(config.normalization);
            let matrix = distance_matrix(&rep, &params)?;
            let provenance = Provenance::new("distances", &config);
            let format = format.unwrap_or(match output.as_ref().and_then(|p| p.extension()) {
                Some(ext) if ext == "json" => MatrixFormat::Json,
                _ => MatrixFormat::Csv,
            });
            match format {
                MatrixFormat::Csv => {
                    let comment = provenance.comment_lines()?;
                    emit(output.as_deref(), |w| Ok(matrix.write_csv(w, &comment)?))
                }
                MatrixFormat::Json => {
                    #[derive(Serialize)]
                    struct Doc<'a> {
                        provenance: &'a Provenance<'a, RunConfig>,
                        matrix: &'a gnpr::distance::DistanceMatrix,
                    }
                    let doc = Doc {
                        provenance: &provenance,
                        matrix: &matrix,
                    };
                    emit(output.as_deref(), |w| Ok(json_to(w, &doc)?))
                }
            }
        }
        Command::Cluster {
            input,
            bins,
            distance,
            clustering,
            summary,
            output,
        } => {
            let (panel, increments) = load(input)?;
            let config = resolve(cli, &panel, input, bins, Some(distance), Some(clustering))?;
            let run = analyze(&increments, &config, config.theta)?;
            let provenance = Provenance::new("cluster", &config);
            if let Some(path) = summary {
                let comment = provenance.comment_lines()?;
                emit(Some(path), |w| Ok(run.summary.write_table(w, &comment)?))?;
            }
            log::info!(
                "{} series in {} clusters, sizes {:?}",
                run.assignment.ids.len(),
                run.assignment.k,
                run.assignment.sizes()
            );
            emit(output.as_deref(), |w| Ok(write_assignment(w, &run, &provenance)?))
        }
        Command::Stability {
            input,
            bins,
            distance,
            clustering,
            output,
        } => {
            if clustering.k.is_some() {
                return Err(CliError::Usage("stability scores a range: use --k-range, not --k".into()));
            }
            let (panel, increments) = load(input)?;
            let config = resolve(cli, &panel, input, bins, Some(distance), Some(clustering))?;
            let params = DistanceParams::new(config.theta)?.with_normalization(config.normalization);
            let report: StabilityReport =
                stability_select_k(&increments, &params, &config.representation, &config.stability_config())?;
            log::info!("selected K = {} (scores {:?})", report.selected_k, report.scores);
            let provenance = Provenance::new("stability", &config);
            emit(output.as_deref(), |w| Ok(write_stability(w, config.theta, &report, &provenance)?))
        }
        Command::Synth(args) => synth(cli, args),
        Command::Pipeline {
            input,
            bins,
            distance,
            clustering,
            theta_sweep,
            output,
        } => {
            let (panel, _) = load(input)?;
            let mut config = resolve(cli, &panel, input, bins, Some(distance), Some(clustering))?;
            config.theta_sweep = *theta_sweep;
            config.output_dir = output.clone();
            let outcome = run_on_panel(&panel, &config)?;
            for run in &outcome.runs {
                log::info!(
                    "theta {}: K = {}, sizes {:?}",
                    run.theta,
                    run.assignment.k,
                    run.assignment.sizes()
                );
            }
            log::info!("wrote {} files under {}", outcome.files.len(), output.display());
            Ok(())
        }
    }
}

fn load(input: &InputArgs) -> Result<(SeriesPanel, IncrementPanel)> {
    let options = input.options();
    let ingested = load_panel(&input.input, &options)?;
    for warning in &ingested.warnings {
        log::warn!("{warning}");
    }
    let increments = increments_for(&ingested.panel, &options)?;
    log::info!(
        "loaded {} series, {} increments each",
        increments.n_series(),
        increments.n_obs()
    );
    Ok((ingested.panel, increments))
}

/// Full run configuration from the command-line flags, with the K range
/// defaulted to what the panel allows.
fn resolve(
    cli: &Cli,
    panel: &SeriesPanel,
    input: &InputArgs,
    bins: &BinArgs,
    distance: Option<&DistanceArgs>,
    clustering: Option<&ClusterArgs>,
) -> Result<RunConfig> {
    let mut config = RunConfig {
        input: input.input.clone(),
        ingest: input.options(),
        seed: cli.seed.unwrap_or(0),
        ..RunConfig::default()
    };
    config.representation.binning = bins.rule()?;
    if let Some(d) = distance {
        config.theta = d.theta;
        config.normalization = d.normalization.value();
    }
    if let Some(c) = clustering {
        config.method = c.method.value();
        config.k = c.k;
        config.stability_runs = c.stability_runs;
        config.subsample_fraction = c.subsample;
        config.agreement = c.agreement.value();
        let (k_min, k_max) = match c.k_range {
            Some(range) => range,
            None => (
                DEFAULT_K_RANGE.0,
                DEFAULT_K_RANGE.1.min(panel.n_series().saturating_sub(1)),
            ),
        };
        config.k_min = k_min;
        config.k_max = k_max;
    }
    config.validate()?;
    Ok(config)
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| gnpr::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<SyntheticSpec>(&text).map_err(gnpr::Error::from)?
        }
        None => {
            let (count, size) = parse_blocks(&args.blocks)?;
            SyntheticSpec::blocks(count, size, args.rho, parse_groups(&args.dists)?, args.m, 0)
        }
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let (panel, truth) = generate_panel(&spec)?;
    let provenance = Provenance::new("synth", &spec);
    let comment = provenance.comment_lines()?;
    emit(Some(&args.output), |w| Ok(panel.write_csv(w, &comment)?))?;

    let truth_path = args.truth.clone().unwrap_or_else(|| truth_path_for(&args.output));
    #[derive(Serialize)]
    struct Doc<'a> {
        provenance: &'a Provenance<'a, SyntheticSpec>,
        #[serde(flatten)]
        truth: &'a GroundTruth,
    }
    emit(Some(&truth_path), |w| {
        Ok(json_to(
            w,
            &Doc {
                provenance: &provenance,
                truth: &truth,
            },
        )?)
    })?;
    log::info!(
        "wrote {} series of {} observations to {} and truth to {}",
        panel.n_series(),
        panel.len(),
        args.output.display(),
        truth_path.display()
    );
    Ok(())
}

fn truth_path_for(panel: &Path) -> PathBuf {
    let stem = panel.file_stem().map_or_else(|| "panel".into(), |s| s.to_string_lossy().into_owned());
    panel.with_file_name(format!("{stem}.truth.json"))
}

/// Writes to `path`, or to standard output when absent.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let output_error = |p: &Path, source| {
        CliError::from(gnpr::Error::Output {
            path: p.to_path_buf(),
            source,
        })
    };
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| output_error(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| output_error(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush().map_err(|e| output_error(Path::new("<stdout>"), e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_file_sits_next_to_panel() {
        assert_eq!(truth_path_for(Path::new("out/panel.csv")), PathBuf::from("out/panel.truth.json"));
        assert_eq!(truth_path_for(Path::new("data")), PathBuf::from("data.truth.json"));
    }
}
