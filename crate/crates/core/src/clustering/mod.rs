//! Partitioning from a precomputed distance matrix.
//!
//! Labels of a [`ClusterAssignment`] are canonical: cluster 0 is the largest,
//! ties go to the cluster holding the smallest id. Two runs that find the
//! same partition therefore produce identical label arrays.

mod agreement;
mod hierarchical;
mod medoids;
mod stability;
mod summary;

use serde::{Deserialize, Serialize};

pub use agreement::{adjusted_rand, minimal_matching, Agreement};
pub use hierarchical::{linkage, naive_linkage, Dendrogram, Linkage, Merge};
pub use medoids::{k_medoids, MedoidsFit};
pub use stability::{
    draw_subsamples, stability_from_subsamples, stability_select_k, StabilityConfig,
    StabilityReport,
};
pub use summary::{cluster_summary, ClusterSummary, Observations, SummaryRow};

use crate::distance::DistanceMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Average-linkage (UPGMA) hierarchical clustering.
    #[default]
    Average,
    Complete,
    /// PAM with a farthest-point build step.
    Medoids,
}

impl Method {
    /// The hierarchical linkage, `None` for medoids.
    pub fn linkage(self) -> Option<Linkage> {
        match self {
            Method::Average => Some(Linkage::Average),
            Method::Complete => Some(Linkage::Complete),
            Method::Medoids => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub method: Method,
    pub theta: Option<f64>,
}

impl ClusterAssignment {
    /// Member indices of each cluster, by label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }
}

/// Maximum number of PAM swap rounds.
const MEDOID_ROUNDS: usize = 100;

pub fn cluster(matrix: &DistanceMatrix, k: usize, method: Method) -> Result<ClusterAssignment> {
    let n = matrix.n();
    if k < 1 || k > n || (k < 2 && n >= 2) {
        return Err(Error::Parameter(format!("k = {k} outside [2, {n}]")));
    }
    let raw = match method.linkage() {
        Some(l) => linkage(matrix, l).cut(k)?,
        None => k_medoids(matrix, k, MEDOID_ROUNDS)?.labels,
    };
    Ok(ClusterAssignment {
        ids: matrix.ids().to_vec(),
        labels: canonical_labels(&raw, matrix.ids()),
        k,
        method,
        theta: matrix.theta(),
    })
}

/// Renumbers clusters by decreasing size, ties by smallest member id.
pub fn canonical_labels(raw: &[usize], ids: &[String]) -> Vec<usize> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<usize, (usize, &str)> = BTreeMap::new();
    for (&label, id) in raw.iter().zip(ids) {
        let entry = groups.entry(label).or_insert((0, id.as_str()));
        entry.0 += 1;
        if id.as_str() < entry.1 {
            entry.1 = id;
        }
    }
    let mut order: Vec<(usize, usize, &str)> =
        groups.into_iter().map(|(label, (size, min_id))| (label, size, min_id)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(b.2)));
    let mut map = std::collections::HashMap::new();
    for (new, (old, _, _)) in order.into_iter().enumerate() {
        map.insert(old, new);
    }
    raw.iter().map(|l| map[l]).collect()
}
