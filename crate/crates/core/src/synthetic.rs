//! Ground-truth panels: correlation blocks subdivided into marginal
//! distribution groups.
//!
//! Series `n` in block `b` and group `g` has increments
//!
//! ```text
//! Z_n(t) = √ρ_b · F_b(t) + √(1 − ρ_b) · ε_n(t)
//! X_n(t) = s_g · Q_g(Φ(Z_n(t)))
//! ```
//!
//! with `F_b` and `ε_n` i.i.d. standard normal and `Q_g` the quantile function
//! of the group's family scaled to unit variance: a one-factor Gaussian
//! copula per block with the marginals swapped in. Dependence (ranks) is
//! set by the blocks alone and the marginal by the group alone, so
//! clustering on ranks should recover the blocks, on histograms the groups,
//! and on both the block × group cells.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::clustering::{adjusted_rand, ClusterAssignment};
use crate::ingestion::{IncrementPanel, SeriesPanel};
use crate::{Error, Result};

fn default_nu() -> f64 {
    3.0
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT {
        #[serde(default = "default_nu")]
        nu: f64,
    },
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub size: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionGroup {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

/// How series are spread over distribution groups.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GroupAssignment {
    /// Each block is cut into contiguous, near-equal runs, one per group.
    #[default]
    CrossProduct,
    Explicit { labels: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_series: usize,
    pub m_obs: usize,
    pub correlation_blocks: Vec<CorrelationBlock>,
    pub distribution_groups: Vec<DistributionGroup>,
    #[serde(default)]
    pub assignment: GroupAssignment,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub ids: Vec<String>,
    pub dependence_labels: Vec<usize>,
    pub distribution_labels: Vec<usize>,
    /// `block · groups + group`
    pub product_labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    Dependence,
    Distribution,
    Product,
}

impl GroundTruth {
    pub fn labels(&self, which: TruthKind) -> &[usize] {
        match which {
            TruthKind::Dependence => &self.dependence_labels,
            TruthKind::Distribution => &self.distribution_labels,
            TruthKind::Product => &self.product_labels,
        }
    }
}

impl SyntheticSpec {
    /// Equal-size blocks sharing one correlation, crossed with the given
    /// groups.
    pub fn blocks(
        n_blocks: usize,
        block_size: usize,
        rho: f64,
        groups: Vec<DistributionGroup>,
        m_obs: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_series: n_blocks * block_size,
            m_obs,
            correlation_blocks: vec![CorrelationBlock { size: block_size, rho }; n_blocks],
            distribution_groups: groups,
            assignment: GroupAssignment::CrossProduct,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.correlation_blocks.is_empty() || self.distribution_groups.is_empty() {
            return bad("need at least one correlation block and one distribution group".into());
        }
        let total: usize = self.correlation_blocks.iter().map(|b| b.size).sum();
        if total != self.n_series {
            return bad(format!("block sizes sum to {total}, n_series is {}", self.n_series));
        }
        if self.m_obs < 2 {
            return bad(format!("m_obs must be at least 2, got {}", self.m_obs));
        }
        for b in &self.correlation_blocks {
            if b.size == 0 {
                return bad("empty correlation block".into());
            }
            if !(0.0..1.0).contains(&b.rho) {
                return bad(format!("rho must lie in [0, 1), got {}", b.rho));
            }
        }
        for g in &self.distribution_groups {
            if !(g.scale.is_finite() && g.scale > 0.0) {
                return bad(format!("scale must be positive, got {}", g.scale));
            }
            if let Family::StudentT { nu } = g.family {
                if !(nu.is_finite() && nu > 2.0) {
                    return bad(format!("student_t needs nu > 2 for finite variance, got {nu}"));
                }
            }
        }
        if let GroupAssignment::Explicit { labels } = &self.assignment {
            if labels.len() != self.n_series {
                return bad(format!(
                    "{} explicit group labels for {} series",
                    labels.len(),
                    self.n_series
                ));
            }
            let g = self.distribution_groups.len();
            if let Some(l) = labels.iter().find(|&&l| l >= g) {
                return bad(format!("group label {l} out of range for {g} groups"));
            }
        }
        Ok(())
    }

    fn truth(&self) -> GroundTruth {
        let n = self.n_series;
        let groups = self.distribution_groups.len();
        let width = n.saturating_sub(1).to_string().len();
        let mut dependence = Vec::with_capacity(n);
        let mut cross = Vec::with_capacity(n);
        for (b, block) in self.correlation_blocks.iter().enumerate() {
            for j in 0..block.size {
                dependence.push(b);
                cross.push(j * groups / block.size);
            }
        }
        let distribution = match &self.assignment {
            GroupAssignment::CrossProduct => cross,
            GroupAssignment::Explicit { labels } => labels.clone(),
        };
        let product = dependence
            .iter()
            .zip(&distribution)
            .map(|(b, g)| b * groups + g)
            .collect();
        GroundTruth {
            ids: (0..n).map(|i| format!("S{i:0width$}")).collect(),
            dependence_labels: dependence,
            distribution_labels: distribution,
            product_labels: product,
        }
    }
}

/// Monotone map from a standard normal draw to the family's unit-variance
/// marginal, `Q(Φ(z))`, evaluated through the lower tail so that large |z|
/// keeps full precision.
enum Marginal {
    Gaussian,
    StudentT(StudentsT, f64),
    Laplace,
}

impl Marginal {
    fn new(family: Family) -> Result<Self> {
        Ok(match family {
            Family::Gaussian => Marginal::Gaussian,
            Family::StudentT { nu } => {
                let dist = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::Parameter(e.to_string()))?;
                Marginal::StudentT(dist, ((nu - 2.0) / nu).sqrt())
            }
            Family::Laplace => Marginal::Laplace,
        })
    }

    fn apply(&self, z: f64) -> f64 {
        if let Marginal::Gaussian = self {
            return z;
        }
        let tail = 0.5 * erfc(z.abs() / std::f64::consts::SQRT_2);
        let magnitude = match self {
            Marginal::Gaussian => unreachable!(),
            Marginal::StudentT(dist, unit) => -dist.inverse_cdf(tail) * unit,
            // scale 1/√2 gives variance 2·b² = 1
            Marginal::Laplace => -std::f64::consts::FRAC_1_SQRT_2 * (2.0 * tail).ln(),
        };
        magnitude.copysign(z)
    }
}

/// Increment panel and its ground truth. Deterministic in `spec.seed`.
pub fn generate_increments(spec: &SyntheticSpec) -> Result<(IncrementPanel, GroundTruth)> {
    spec.validate()?;
    let truth = spec.truth();
    let marginals: Vec<Marginal> = spec
        .distribution_groups
        .iter()
        .map(|g| Marginal::new(g.family))
        .collect::<Result<_>>()?;
    let loadings: Vec<(f64, f64)> = spec
        .correlation_blocks
        .iter()
        .map(|b| (b.rho.sqrt(), (1.0 - b.rho).sqrt()))
        .collect();

    let n = spec.n_series;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = vec![Vec::with_capacity(spec.m_obs); n];
    let mut factors = vec![0.0; spec.correlation_blocks.len()];
    for _ in 0..spec.m_obs {
        for f in factors.iter_mut() {
            *f = rng.sample(StandardNormal);
        }
        for (s, row) in values.iter_mut().enumerate() {
            let b = truth.dependence_labels[s];
            let g = truth.distribution_labels[s];
            let (common, own) = loadings[b];
            let z = common * factors[b] + own * rng.sample::<f64, _>(StandardNormal);
            row.push(spec.distribution_groups[g].scale * marginals[g].apply(z));
        }
    }
    let panel = IncrementPanel::new(truth.ids.clone(), values)?;
    Ok((panel, truth))
}

/// Level panel (cumulative sums from 0, M + 1 observations) and truth.
pub fn generate_panel(spec: &SyntheticSpec) -> Result<(SeriesPanel, GroundTruth)> {
    let (inc, truth) = generate_increments(spec)?;
    let m = spec.m_obs;
    let width = m.to_string().len();
    let index = (0..=m).map(|t| format!("{t:0width$}")).collect();
    let levels = inc
        .values()
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            std::iter::once(0.0)
                .chain(row.iter().map(|x| {
                    acc += x;
                    acc
                }))
                .collect()
        })
        .collect();
    Ok((SeriesPanel::new(truth.ids.clone(), index, levels)?, truth))
}

/// Adjusted Rand index of an assignment against one of the truth labelings.
pub fn score_recovery(assignment: &ClusterAssignment, truth: &GroundTruth, which: TruthKind) -> Result<f64> {
    if assignment.ids != truth.ids {
        return Err(Error::Validation(
            "assignment and ground truth list different series ids".into(),
        ));
    }
    adjusted_rand(&assignment.labels, truth.labels(which))
}

/// Parses `"4x10"` into four blocks of ten series.
pub fn parse_blocks(text: &str) -> Result<(usize, usize)> {
    let err = || Error::Parameter(format!("expected blocks as <count>x<size>, got '{text}'"));
    let (count, size) = text.split_once(['x', 'X']).ok_or_else(err)?;
    let count: usize = count.trim().parse().map_err(|_| err())?;
    let size: usize = size.trim().parse().map_err(|_| err())?;
    if count == 0 || size == 0 {
        return Err(err());
    }
    Ok((count, size))
}

/// Parses a comma-separated list such as `gaussian,student_t:3,laplace@2`:
/// family name, optional `:ν` for Student-t, optional `@scale`.
pub fn parse_groups(text: &str) -> Result<Vec<DistributionGroup>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let err = || Error::Parameter(format!("cannot parse distribution '{item}'"));
            let (head, scale) = match item.split_once('@') {
                Some((h, s)) => (h, s.parse::<f64>().map_err(|_| err())?),
                None => (item, 1.0),
            };
            let (name, param) = match head.split_once(':') {
                Some((n, p)) => (n, Some(p.parse::<f64>().map_err(|_| err())?)),
                None => (head, None),
            };
            let family = match (name, param) {
                ("gaussian", None) => Family::Gaussian,
                ("laplace", None) => Family::Laplace,
                ("student_t", nu) => Family::StudentT {
                    nu: nu.unwrap_or_else(default_nu),
                },
                _ => return Err(err()),
            };
            Ok(DistributionGroup { family, scale })
        })
        .collect()
}
