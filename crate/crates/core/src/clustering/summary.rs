//! Per-cluster descriptive statistics over pooled member observations.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use super::ClusterAssignment;
use crate::ingestion::{IncrementPanel, SeriesPanel};
use crate::representation::quantile_sorted;
use crate::{Error, Result};

/// Anything that exposes named numeric series.
pub trait Observations {
    fn ids(&self) -> &[String];
    fn series(&self, i: usize) -> &[f64];
}

impl Observations for SeriesPanel {
    fn ids(&self) -> &[String] {
        SeriesPanel::ids(self)
    }

    fn series(&self, i: usize) -> &[f64] {
        &self.values()[i]
    }
}

impl Observations for IncrementPanel {
    fn ids(&self) -> &[String] {
        IncrementPanel::ids(self)
    }

    fn series(&self, i: usize) -> &[f64] {
        self.row(i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cluster: usize,
    pub mean: f64,
    pub quantile_10: f64,
    pub quantile_90: f64,
    pub size: usize,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ClusterSummary {
    pub rows: Vec<SummaryRow>,
}

impl ClusterSummary {
    /// Wide table with one column per cluster and the rows
    /// `Mean`, `Quantile 10%`, `Quantile 90%`, `Size`.
    pub fn write_table<W: Write>(&self, mut out: W, comment: &[String]) -> Result<()> {
        let io = |e| Error::output("<output>", e);
        for line in comment {
            writeln!(out, "# {line}").map_err(io)?;
        }
        let mut header = String::from("statistic");
        for row in &self.rows {
            header.push_str(&format!(",C{}", row.cluster + 1));
        }
        writeln!(out, "{header}").map_err(io)?;
        let stat_line = |name: &str, f: &dyn Fn(&SummaryRow) -> String| {
            let mut line = String::from(name);
            for row in &self.rows {
                line.push(',');
                line.push_str(&f(row));
            }
            line
        };
        writeln!(out, "{}", stat_line("Mean", &|r| r.mean.to_string())).map_err(io)?;
        writeln!(out, "{}", stat_line("Quantile 10%", &|r| r.quantile_10.to_string())).map_err(io)?;
        writeln!(out, "{}", stat_line("Quantile 90%", &|r| r.quantile_90.to_string())).map_err(io)?;
        writeln!(out, "{}", stat_line("Size", &|r| r.size.to_string())).map_err(io)?;
        Ok(())
    }
}

/// Mean and linear-interpolation 10%/90% quantiles of the pooled
/// observations of each cluster, rows ordered by decreasing mean.
pub fn cluster_summary(assignment: &ClusterAssignment, panel: &impl Observations) -> Result<ClusterSummary> {
    let position: HashMap<&str, usize> =
        panel.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let missing: Vec<String> = assignment
        .ids
        .iter()
        .filter(|id| !position.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "assignment ids not in panel: {}",
            missing.join(", ")
        )));
    }
    if assignment.labels.len() != assignment.ids.len() {
        return Err(Error::Dimension {
            expected: assignment.ids.len(),
            got: assignment.labels.len(),
        });
    }

    let mut rows = Vec::with_capacity(assignment.k);
    for (cluster, members) in assignment.members().into_iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Validation(format!("cluster {cluster} is empty")));
        }
        let mut pool: Vec<f64> = members
            .iter()
            .flat_map(|&m| panel.series(position[assignment.ids[m].as_str()]).iter().copied())
            .collect();
        let mean = pool.iter().sum::<f64>() / pool.len() as f64;
        pool.sort_by(|a, b| a.total_cmp(b));
        rows.push(SummaryRow {
            cluster,
            mean,
            quantile_10: quantile_sorted(&pool, 0.1),
            quantile_90: quantile_sorted(&pool, 0.9),
            size: members.len(),
            observations: pool.len(),
        });
    }
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.cluster.cmp(&b.cluster)));
    Ok(ClusterSummary { rows })
}
