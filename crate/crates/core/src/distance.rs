//! Empirical distances between represented series.
//!
//! ```text
//! d₁² = 3 / (M²(M−1)) · Σᵢ (rkˣ(i) − rkʸ(i))²
//! d₀² = ½ · Σₖ (√gˣ(k) − √gʸ(k))²
//! d_θ² = θ·d₁² + (1−θ)·d₀²
//! ```
//!
//! With the default normalization `d₁²` reaches `(M+1)/M` for reversed ranks,
//! not 1. [`RankNormalization::ExactSpearman`] uses `M(M²−1)` instead, which
//! makes `d₁² = (1 − ρ_S)/2` exactly.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::representation::{BinnedDensity, Grid, NonParamRepresentation, RankVector, SeriesRepr};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankNormalization {
    /// `3 / (M²(M−1))`
    #[default]
    Standard,
    /// `3 / (M(M²−1))`
    ExactSpearman,
}

impl RankNormalization {
    fn factor(self, m: usize) -> f64 {
        let m = m as f64;
        match self {
            RankNormalization::Standard => 3.0 / (m * m * (m - 1.0)),
            RankNormalization::ExactSpearman => 3.0 / (m * (m * m - 1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceParams {
    theta: f64,
    #[serde(default)]
    normalization: RankNormalization,
}

impl DistanceParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Parameter(format!("theta must lie in [0, 1], got {theta}")));
        }
        Ok(Self {
            theta,
            normalization: RankNormalization::Standard,
        })
    }

    pub fn with_normalization(mut self, normalization: RankNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn normalization(&self) -> RankNormalization {
        self.normalization
    }
}

fn squared_rank_gap(x: &RankVector, y: &RankVector) -> Result<u64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(&a, &b)| {
            let d = u64::from(a.abs_diff(b));
            d * d
        })
        .sum())
}

pub fn d1_squared(x: &RankVector, y: &RankVector, normalization: RankNormalization) -> Result<f64> {
    let gap = squared_rank_gap(x, y)?;
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(normalization.factor(x.len()) * gap as f64)
}

/// Dependence distance with the default normalization, in `[0, √((M+1)/M)]`.
pub fn d1_empirical(x: &RankVector, y: &RankVector) -> Result<f64> {
    Ok(d1_squared(x, y, RankNormalization::Standard)?.sqrt())
}

fn check_grids(x: &BinnedDensity, y: &BinnedDensity) -> Result<()> {
    if x.grid() != y.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", x.grid(), y.grid())));
    }
    Ok(())
}

fn hellinger_half_sum(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .zip(y)
        .map(|(&p, &q)| {
            let d = p.sqrt() - q.sqrt();
            d * d
        })
        .sum::<f64>()
}

pub fn d0_squared(x: &BinnedDensity, y: &BinnedDensity) -> Result<f64> {
    check_grids(x, y)?;
    Ok(hellinger_half_sum(x.masses(), y.masses()))
}

/// Hellinger distance between two histograms on the same grid, in `[0, 1]`.
pub fn d0_empirical(x: &BinnedDensity, y: &BinnedDensity) -> Result<f64> {
    Ok(d0_squared(x, y)?.sqrt())
}

fn blend(theta: f64, d1_sq: f64, d0_sq: f64) -> f64 {
    (theta * d1_sq + (1.0 - theta) * d0_sq).sqrt()
}

pub fn d_theta(x: SeriesRepr<'_>, y: SeriesRepr<'_>, params: &DistanceParams) -> Result<f64> {
    let d1_sq = d1_squared(x.ranks, y.ranks, params.normalization)?;
    let d0_sq = d0_squared(x.density, y.density)?;
    Ok(blend(params.theta, d1_sq, d0_sq))
}

/// Provenance of a computed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub grid: Grid,
    pub n_obs: usize,
    pub normalization: RankNormalization,
}

/// Symmetric N×N matrix with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    theta: Option<f64>,
    meta: Option<MatrixMeta>,
    #[serde(serialize_with = "rows")]
    values: Vec<f64>,
}

fn rows<S: serde::Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let n = (values.len() as f64).sqrt().round() as usize;
    s.collect_seq(values.chunks(n.max(1)))
}

impl DistanceMatrix {
    /// Wraps an externally built dissimilarity matrix after checking that it
    /// is square, symmetric, zero on the diagonal, finite and nonnegative.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Validation(format!("invalid distance {v} at ({i}, {j})")));
                }
                if v != values[j * n + i] {
                    return Err(Error::Validation(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            ids,
            theta: None,
            meta: None,
            values,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn meta(&self) -> Option<&MatrixMeta> {
        self.meta.as_ref()
    }

    /// CSV with a header row and a leading column of ids. `comment` lines are
    /// written first, prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: &[String]) -> Result<()> {
        let io = |e| Error::output("<output>", e);
        for line in comment {
            writeln!(out, "# {line}").map_err(io)?;
        }
        write!(out, "id").map_err(io)?;
        for id in &self.ids {
            write!(out, ",{}", csv_field(id)).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for (i, id) in self.ids.iter().enumerate() {
            write!(out, "{}", csv_field(id)).map_err(io)?;
            for v in self.row(i) {
                write!(out, ",{v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

/// All pairwise `d_θ` values. Pairs are independent, so the result does not
/// depend on the number of worker threads.
pub fn distance_matrix(rep: &NonParamRepresentation, params: &DistanceParams) -> Result<DistanceMatrix> {
    let n = rep.n_series();
    let m = rep.n_obs();
    let factor = params.normalization.factor(m);
    let roots: Vec<Vec<f64>> = rep
        .densities()
        .iter()
        .map(|d| d.masses().iter().map(|p| p.sqrt()).collect())
        .collect();
    for d in rep.densities() {
        check_grids(&rep.densities()[0], d)?;
    }
    for r in rep.ranks() {
        if r.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: r.len(),
            });
        }
    }

    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = rep.ranks()[i].as_slice();
            let si = &roots[i];
            (i + 1..n)
                .map(|j| {
                    let gap: u64 = ri
                        .iter()
                        .zip(rep.ranks()[j].as_slice())
                        .map(|(&a, &b)| {
                            let d = u64::from(a.abs_diff(b));
                            d * d
                        })
                        .sum();
                    let d0_sq = 0.5
                        * si.iter()
                            .zip(&roots[j])
                            .map(|(a, b)| {
                                let d = a - b;
                                d * d
                            })
                            .sum::<f64>();
                    blend(params.theta, factor * gap as f64, d0_sq)
                })
                .collect()
        })
        .collect();

    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix {
        ids: rep.ids().to_vec(),
        theta: Some(params.theta),
        meta: Some(MatrixMeta {
            grid: rep.grid(),
            n_obs: m,
            normalization: params.normalization,
        }),
        values,
    })
}
