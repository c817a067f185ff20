//! Empirical image of the nonparametric map: per-series bijective rank
//! vectors (dependence part) and binned marginal distributions on one shared
//! grid (distribution part).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingestion::IncrementPanel;
use crate::{Error, Result};

/// Upper bound on the number of bins of a shared grid.
pub const MAX_BINS: usize = 1 << 24;

/// Ranks `1..=M` of a series, a permutation by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RankVector(Vec<u32>);

impl RankVector {
    /// Wraps ranks that must form a permutation of `1..=len`.
    pub fn from_ranks(ranks: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; ranks.len()];
        for &r in &ranks {
            let slot = (r as usize).checked_sub(1).and_then(|i| seen.get_mut(i));
            match slot {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::Validation(format!(
                        "ranks are not a permutation of 1..={}",
                        ranks.len()
                    )))
                }
            }
        }
        Ok(Self(ranks))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Bijective rank function.
///
/// `rank[i] = #{k : x[k] < x[i] or (x[k] == x[i] and σ(k) ≤ σ(i))}`, so ties
/// are broken by `tie_order` (σ, a 0-based permutation of `0..M`). `None`
/// means σ = identity: equal values are ranked by arrival.
pub fn rank_function(observations: &[f64], tie_order: Option<&[usize]>) -> Result<RankVector> {
    let m = observations.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    if m > u32::MAX as usize {
        return Err(Error::Parameter(format!("series of length {m} too long to rank")));
    }
    if let Some(i) = observations.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite observation at position {i}")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    match tie_order {
        None => order.sort_by(|&a, &b| cmp_values(observations[a], observations[b])),
        Some(sigma) => {
            check_permutation(sigma, m)?;
            order.sort_unstable_by(|&a, &b| {
                cmp_values(observations[a], observations[b]).then(sigma[a].cmp(&sigma[b]))
            });
        }
    }
    let mut ranks = vec![0u32; m];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos as u32 + 1;
    }
    Ok(RankVector(ranks))
}

// IEEE comparison: -0.0 and 0.0 tie, as `<` and `==` do in the predicate.
fn cmp_values(a: f64, b: f64) -> std::cmp::Ordering {
    a.partial_cmp(&b).expect("finite values are totally ordered")
}

fn check_permutation(sigma: &[usize], m: usize) -> Result<()> {
    if sigma.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: sigma.len(),
        });
    }
    let mut seen = vec![false; m];
    for &s in sigma {
        if s >= m || std::mem::replace(&mut seen[s], true) {
            return Err(Error::Validation(format!(
                "tie order is not a permutation of 0..{m}"
            )));
        }
    }
    Ok(())
}

/// A regular grid `[origin + k·width, origin + (k+1)·width)`, `k < bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: f64,
    pub width: f64,
    pub bins: usize,
}

impl Grid {
    pub fn new(origin: f64, width: f64, bins: usize) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Parameter(format!("bin width must be positive, got {width}")));
        }
        if !origin.is_finite() {
            return Err(Error::Parameter(format!("grid origin must be finite, got {origin}")));
        }
        if bins == 0 || bins > MAX_BINS {
            return Err(Error::Parameter(format!(
                "bin count must be in 1..={MAX_BINS}, got {bins}"
            )));
        }
        Ok(Self { origin, width, bins })
    }

    /// Unbounded bin position `⌊(x − origin)/width⌋`. Monotone in `x`.
    fn position(&self, x: f64) -> f64 {
        ((x - self.origin) / self.width).floor()
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let p = self.position(x);
        (p >= 0.0 && p < self.bins as f64).then_some(p as usize)
    }

    fn high(&self) -> f64 {
        self.origin + self.bins as f64 * self.width
    }
}

/// Histogram of one series: per-bin probability masses on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedDensity {
    origin: f64,
    width: f64,
    masses: Vec<f64>,
}

impl BinnedDensity {
    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn grid(&self) -> Grid {
        Grid {
            origin: self.origin,
            width: self.width,
            bins: self.masses.len(),
        }
    }

    /// Builds a density from explicit masses, which must be nonnegative and
    /// sum to one within 1e-12.
    pub fn from_masses(grid: Grid, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.bins {
            return Err(Error::Dimension {
                expected: grid.bins,
                got: masses.len(),
            });
        }
        if masses.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Validation("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("masses sum to {total}, not 1")));
        }
        Ok(Self {
            origin: grid.origin,
            width: grid.width,
            masses,
        })
    }
}

/// Histogram estimate: `masses[k]` is the fraction of observations falling
/// in `[origin + k·width, origin + (k+1)·width)`.
pub fn empirical_margin(
    observations: &[f64],
    origin: f64,
    width: f64,
    bin_count: usize,
) -> Result<BinnedDensity> {
    let grid = Grid::new(origin, width, bin_count)?;
    margin_on(observations, &grid)
}

fn margin_on(observations: &[f64], grid: &Grid) -> Result<BinnedDensity> {
    if observations.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut counts = vec![0usize; grid.bins];
    for &x in observations {
        let k = grid.bin_of(x).ok_or(Error::OutOfRange {
            value: x,
            low: grid.origin,
            high: grid.high(),
        })?;
        counts[k] += 1;
    }
    let m = observations.len() as f64;
    Ok(BinnedDensity {
        origin: grid.origin,
        width: grid.width,
        masses: counts.into_iter().map(|c| c as f64 / m).collect(),
    })
}

/// How the shared bin width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BinRule {
    /// Pooled range split into this many bins.
    Count { bins: usize },
    Width { width: f64 },
    /// `2·IQR·M^(-1/3)` on the pooled observations.
    FreedmanDiaconis,
}

impl Default for BinRule {
    fn default() -> Self {
        BinRule::Count { bins: 100 }
    }
}

impl BinRule {
    fn width_for(&self, sorted_pool: &[f64], m: usize) -> Result<f64> {
        let lo = sorted_pool[0];
        let hi = sorted_pool[sorted_pool.len() - 1];
        let range = hi - lo;
        let width = match *self {
            BinRule::Count { bins } => {
                if bins == 0 {
                    return Err(Error::Parameter("bin count must be at least 1".into()));
                }
                range / bins as f64
            }
            BinRule::Width { width } => {
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::Parameter(format!(
                        "bin width must be positive, got {width}"
                    )));
                }
                return Ok(width);
            }
            BinRule::FreedmanDiaconis => {
                let iqr = quantile_sorted(sorted_pool, 0.75) - quantile_sorted(sorted_pool, 0.25);
                if iqr > 0.0 {
                    2.0 * iqr / (m as f64).cbrt()
                } else {
                    range / 100.0
                }
            }
        };
        // Every observation equal: any positive width gives a one-bin spike.
        Ok(if width > 0.0 { width } else { 1.0 })
    }
}

/// Grid starting at the pooled minimum and covering the pooled maximum.
pub fn shared_grid(rows: &[Vec<f64>], rule: &BinRule) -> Result<Grid> {
    let mut pool: Vec<f64> = rows.iter().flatten().copied().collect();
    if pool.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if pool.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite observation in panel".into()));
    }
    pool.sort_by(|a, b| a.total_cmp(b));
    let m = rows.first().map_or(0, Vec::len).max(1);
    let width = rule.width_for(&pool, m)?;
    let origin = pool[0];
    let probe = Grid {
        origin,
        width,
        bins: usize::MAX,
    };
    let last = probe.position(pool[pool.len() - 1]);
    if !(last.is_finite() && last < MAX_BINS as f64) {
        return Err(Error::Parameter(format!(
            "bin width {width} needs more than {MAX_BINS} bins for the pooled range"
        )));
    }
    Grid::new(origin, width, last as usize + 1)
}

/// Linear-interpolation quantile of already sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    pub binning: BinRule,
}

/// Rank vectors and histograms of a whole panel; all histograms share one
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NonParamRepresentation {
    ids: Vec<String>,
    ranks: Vec<RankVector>,
    densities: Vec<BinnedDensity>,
    grid: Grid,
}

/// Borrowed view of one series' representation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRepr<'a> {
    pub ranks: &'a RankVector,
    pub density: &'a BinnedDensity,
}

#[derive(Debug, Serialize)]
pub struct SeriesRecord<'a> {
    pub id: &'a str,
    pub ranks: &'a RankVector,
    pub density: &'a BinnedDensity,
}

impl NonParamRepresentation {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn ranks(&self) -> &[RankVector] {
        &self.ranks
    }

    pub fn densities(&self) -> &[BinnedDensity] {
        &self.densities
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n_series(&self) -> usize {
        self.ids.len()
    }

    pub fn n_obs(&self) -> usize {
        self.ranks[0].len()
    }

    pub fn series(&self, i: usize) -> SeriesRepr<'_> {
        SeriesRepr {
            ranks: &self.ranks[i],
            density: &self.densities[i],
        }
    }

    pub fn records(&self) -> Vec<SeriesRecord<'_>> {
        self.ids
            .iter()
            .zip(&self.ranks)
            .zip(&self.densities)
            .map(|((id, ranks), density)| SeriesRecord { id, ranks, density })
            .collect()
    }
}

pub fn represent(panel: &IncrementPanel, config: &RepresentationConfig) -> Result<NonParamRepresentation> {
    let grid = shared_grid(panel.values(), &config.binning)?;
    represent_on_grid(panel, grid)
}

/// Represents a panel on a caller-supplied grid, which must cover every
/// observation.
pub fn represent_on_grid(panel: &IncrementPanel, grid: Grid) -> Result<NonParamRepresentation> {
    let per_series: Vec<(RankVector, BinnedDensity)> = panel
        .values()
        .par_iter()
        .map(|row| Ok((rank_function(row, None)?, margin_on(row, &grid)?)))
        .collect::<Result<_>>()?;
    let (ranks, densities) = per_series.into_iter().unzip();
    Ok(NonParamRepresentation {
        ids: panel.ids().to_vec(),
        ranks,
        densities,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal evaluation of the rank predicate over all pairs.
    fn predicate_ranks(x: &[f64], sigma: &[usize]) -> Vec<u32> {
        (0..x.len())
            .map(|i| {
                (0..x.len())
                    .filter(|&k| x[k] < x[i] || (x[k] == x[i] && sigma[k] <= sigma[i]))
                    .count() as u32
            })
            .collect()
    }

    fn identity(m: usize) -> Vec<usize> {
        (0..m).collect()
    }

    #[test]
    fn tie_broken_by_arrival() {
        let x = [2.0, 5.0, 2.0];
        let expected = predicate_ranks(&x, &identity(3));
        assert_eq!(expected, vec![1, 3, 2]);
        assert_eq!(rank_function(&x, None).unwrap().as_slice(), &expected[..]);
    }

    #[test]
    fn sorted_and_constant_inputs() {
        assert_eq!(rank_function(&[1.0, 2.0, 3.0, 4.0], None).unwrap().as_slice(), &[1, 2, 3, 4]);
        let x = [7.0, 7.0, 7.0];
        assert_eq!(predicate_ranks(&x, &identity(3)), vec![1, 2, 3]);
        assert_eq!(rank_function(&x, None).unwrap().as_slice(), &[1, 2, 3]);
    }

    #[test]
    fn custom_tie_order() {
        let x = [7.0, 7.0, 7.0];
        let sigma = [2, 0, 1];
        assert_eq!(
            rank_function(&x, Some(&sigma)).unwrap().as_slice(),
            &predicate_ranks(&x, &sigma)[..]
        );
        assert!(matches!(
            rank_function(&x, Some(&[0, 0, 1])),
            Err(Error::Validation(_))
        ));
        assert!(rank_function(&x, Some(&[0, 1])).is_err());
    }

    #[test]
    fn signed_zeros_tie() {
        let x = [0.0, -0.0, 0.0];
        assert_eq!(rank_function(&x, None).unwrap().as_slice(), &[1, 2, 3]);
    }

    #[test]
    fn rejects_short_or_non_finite() {
        assert!(rank_function(&[1.0], None).is_err());
        assert!(rank_function(&[1.0, f64::NAN], None).is_err());
    }

    #[test]
    fn histogram_counts() {
        let d = empirical_margin(&[0.1, 0.9, 1.5], 0.0, 1.0, 2).unwrap();
        assert_eq!(d.masses(), &[2.0 / 3.0, 1.0 / 3.0]);

        let d = empirical_margin(&[0.2, 0.3, 0.4], 0.0, 1.0, 3).unwrap();
        assert_eq!(d.masses(), &[1.0, 0.0, 0.0]);

        let x = [0.1, 0.2, 1.1, 1.2, 2.1, 2.2, 3.1, 3.2];
        let d = empirical_margin(&x, 0.0, 1.0, 4).unwrap();
        assert_eq!(d.masses(), &[0.25; 4]);
    }

    #[test]
    fn histogram_range_errors() {
        assert!(matches!(
            empirical_margin(&[0.5, 2.0], 0.0, 1.0, 2),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            empirical_margin(&[-0.1], 0.0, 1.0, 2),
            Err(Error::OutOfRange { .. })
        ));
        assert!(empirical_margin(&[0.5], 0.0, 0.0, 2).is_err());
    }

    fn panel(rows: Vec<Vec<f64>>) -> IncrementPanel {
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        IncrementPanel::new(ids, rows).unwrap()
    }

    #[test]
    fn single_series_panel() {
        let rep = represent(&panel(vec![vec![0.3, -1.0, 2.0]]), &Default::default()).unwrap();
        assert_eq!(rep.n_series(), 1);
        assert_eq!(rep.ranks()[0].as_slice(), &[2, 1, 3]);
        assert_eq!(rep.densities().len(), 1);
    }

    #[test]
    fn identical_series_share_representation() {
        let row = vec![0.5, -0.25, 3.0, 1.0];
        let rep = represent(&panel(vec![row.clone(), row]), &Default::default()).unwrap();
        assert_eq!(rep.ranks()[0], rep.ranks()[1]);
        assert_eq!(rep.densities()[0], rep.densities()[1]);
    }

    #[test]
    fn fixed_count_grid_on_pooled_range() {
        let p = panel(vec![vec![-3.0, 0.5, 1.0], vec![2.0, 3.0, -1.5]]);
        let config = RepresentationConfig {
            binning: BinRule::Count { bins: 6 },
        };
        let rep = represent(&p, &config).unwrap();
        assert_eq!(rep.grid().origin, -3.0);
        assert_eq!(rep.grid().width, 1.0);
        // The pooled maximum opens its own half-open bin.
        assert_eq!(rep.grid().bins, 7);
        assert_eq!(rep.densities()[1].masses()[6], 1.0 / 3.0);
    }

    #[test]
    fn degenerate_panel_is_a_spike() {
        let rep = represent(&panel(vec![vec![4.0; 5]]), &Default::default()).unwrap();
        assert_eq!(rep.densities()[0].masses(), &[1.0]);
        assert_eq!(rep.ranks()[0].as_slice(), &[1, 2, 3, 4, 5]);
    }

    #[test]
    fn width_and_fd_rules() {
        let rows = vec![vec![0.0, 0.25, 0.5, 0.75, 1.0]];
        let g = shared_grid(&rows, &BinRule::Width { width: 0.5 }).unwrap();
        assert_eq!((g.origin, g.width, g.bins), (0.0, 0.5, 3));
        let g = shared_grid(&rows, &BinRule::FreedmanDiaconis).unwrap();
        assert!((g.width - 2.0 * 0.5 / 5f64.cbrt()).abs() < 1e-15);
        assert!(shared_grid(&rows, &BinRule::Width { width: 1e-12 }).is_err());
        assert!(shared_grid(&rows, &BinRule::Count { bins: 0 }).is_err());
    }

    #[test]
    fn linear_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.1) - 1.4).abs() < 1e-15);
        assert!((quantile_sorted(&s, 0.9) - 4.6).abs() < 1e-15);
    }

    fn values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        // Small integer grid so ties are frequent.
        proptest::collection::vec((-6i32..6).prop_map(|v| f64::from(v) / 2.0), 2..max_len)
    }

    proptest! {
        #[test]
        fn ranks_are_a_permutation(x in values(60)) {
            let r = rank_function(&x, None).unwrap();
            let mut sorted = r.as_slice().to_vec();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (1..=x.len() as u32).collect::<Vec<_>>());
        }

        #[test]
        fn order_and_tie_consistency(x in values(40)) {
            let r = rank_function(&x, None).unwrap();
            let r = r.as_slice();
            for i in 0..x.len() {
                for j in 0..x.len() {
                    if x[i] < x[j] || (x[i] == x[j] && i < j) {
                        prop_assert!(r[i] < r[j]);
                    }
                }
            }
        }

        #[test]
        fn agrees_with_predicate(x in values(30), shuffle in any::<u64>()) {
            let m = x.len();
            let mut sigma: Vec<usize> = (0..m).collect();
            // cheap deterministic shuffle
            let mut s = shuffle;
            for i in (1..m).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                sigma.swap(i, (s >> 33) as usize % (i + 1));
            }
            let r = rank_function(&x, Some(&sigma)).unwrap();
            prop_assert_eq!(r.as_slice(), &predicate_ranks(&x, &sigma)[..]);
        }

        #[test]
        fn matches_sorted_position_for_distinct_values(
            set in proptest::collection::btree_set(-1000i32..1000, 2..=8),
            perm_seed in any::<u64>(),
        ) {
            let mut x: Vec<f64> = set.into_iter().map(f64::from).collect();
            let mut s = perm_seed;
            for i in (1..x.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                x.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut sorted = x.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let oracle: Vec<u32> = x
                .iter()
                .map(|v| sorted.iter().position(|s| s == v).unwrap() as u32 + 1)
                .collect();
            let ranks = rank_function(&x, None).unwrap();
            prop_assert_eq!(ranks.as_slice(), &oracle[..]);
        }

        #[test]
        fn ranks_invariant_under_increasing_maps(
            x in proptest::collection::vec(-5.0f64..5.0, 2..50)
        ) {
            let base = rank_function(&x, None).unwrap();
            let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 2.0 * v).collect();
            let shifted: Vec<f64> = x.iter().map(|v| 4.0 * v + 1.0).collect();
            prop_assert_eq!(&rank_function(&cubed, None).unwrap(), &base);
            prop_assert_eq!(&rank_function(&shifted, None).unwrap(), &base);
        }

        #[test]
        fn histograms_normalized(
            rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 2..200), 1..5),
            bins in 1usize..300,
        ) {
            let m = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| (0..m).map(|i| r[i % r.len()]).collect()).collect();
            let p = panel(rows);
            let rep = represent(&p, &RepresentationConfig { binning: BinRule::Count { bins } }).unwrap();
            for d in rep.densities() {
                let total: f64 = d.masses().iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                prop_assert!(d.masses().iter().all(|&p| p >= 0.0));
                prop_assert_eq!(d.grid(), rep.grid());
            }
        }
    }
}
