//! Agreement between two partitions of the same items.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agreement {
    #[default]
    AdjustedRand,
    /// Fraction of items kept by the best one-to-one matching of clusters.
    MinimalMatching,
}

impl Agreement {
    /// Score in `[0, 1]`. Negative adjusted Rand values (worse than chance)
    /// count as zero.
    pub fn score(self, a: &[usize], b: &[usize]) -> Result<f64> {
        match self {
            Agreement::AdjustedRand => Ok(adjusted_rand(a, b)?.max(0.0)),
            Agreement::MinimalMatching => minimal_matching(a, b),
        }
    }
}

struct Contingency {
    table: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let compress = |labels: &[usize]| {
        let mut map = HashMap::new();
        let dense: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        (dense, map.len())
    };
    let (da, ka) = compress(a);
    let (db, kb) = compress(b);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&i, &j) in da.iter().zip(&db) {
        table[i][j] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency { table, rows, cols })
}

fn pairs(c: u64) -> f64 {
    (c * c.saturating_sub(1) / 2) as f64
}

/// Hubert–Arabie adjusted Rand index, in `[-1, 1]`; 1 exactly when the
/// partitions agree up to relabeling.
pub fn adjusted_rand(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let n = a.len() as u64;
    let index: f64 = c.table.iter().flatten().map(|&x| pairs(x)).sum();
    let sum_rows: f64 = c.rows.iter().map(|&x| pairs(x)).sum();
    let sum_cols: f64 = c.cols.iter().map(|&x| pairs(x)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    // Zero only when both partitions are all-singletons or both a single block.
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `1 − minimal matching distance`: the largest fraction of items that can
/// be kept in place under a one-to-one pairing of the two sets of clusters.
pub fn minimal_matching(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    let size = c.rows.len().max(c.cols.len());
    let weight = |i: usize, j: usize| -> i64 {
        c.table.get(i).and_then(|r| r.get(j)).map_or(0, |&v| v as i64)
    };
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|i| (0..size).map(|j| -weight(i, j)).collect())
        .collect();
    let assignment = hungarian(&cost);
    let kept: i64 = assignment.iter().enumerate().map(|(i, &j)| weight(i, j)).sum();
    Ok(kept as f64 / a.len() as f64)
}

/// Minimum-cost perfect matching on a square matrix; returns the column
/// assigned to each row. O(n³) potentials method.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = i64::MAX / 4;
    // 1-based with a virtual column 0
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_v = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = inf;
            let mut col1 = 0;
            for col in 1..=n {
                if !used[col] {
                    let cur = cost[r - 1][col - 1] - u[r] - v[col];
                    if cur < min_v[col] {
                        min_v[col] = cur;
                        way[col] = col0;
                    }
                    if min_v[col] < delta {
                        delta = min_v[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_v[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for col in 1..=n {
        if owner[col] > 0 {
            out[owner[col] - 1] = col - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Rand-index bookkeeping over every unordered pair of items.
    fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => both += 1.0,
                    (true, false) => only_a += 1.0,
                    (false, true) => only_b += 1.0,
                    (false, false) => neither += 1.0,
                }
            }
        }
        let total = both + only_a + only_b + neither;
        let same_a = both + only_a;
        let same_b = both + only_b;
        let expected = same_a * same_b / total;
        (both - expected) / (0.5 * (same_a + same_b) - expected)
    }

    #[test]
    fn identical_and_relabelled() {
        assert_eq!(adjusted_rand(&[0, 0, 1, 2], &[0, 0, 1, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn crossed_partitions_match_pair_counting() {
        let a = [0, 0, 1, 1];
        let b = [0, 1, 0, 1];
        // pairs: same-in-a {01, 23}, same-in-b {02, 13}, none shared.
        // expected = 2·2/6, max = 2 → (0 − 2/3)/(2 − 2/3) = −0.5
        let ari = adjusted_rand(&a, &b).unwrap();
        assert!((ari - pair_count_ari(&a, &b)).abs() < 1e-15);
        assert!((ari + 0.5).abs() < 1e-15);
        assert_eq!(Agreement::AdjustedRand.score(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn random_labels_match_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(5..60);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let got = adjusted_rand(&a, &b).unwrap();
            let want = pair_count_ari(&a, &b);
            if want.is_finite() {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_partitions() {
        assert_eq!(adjusted_rand(&[0, 1, 2], &[5, 6, 7]).unwrap(), 1.0);
        assert_eq!(adjusted_rand(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(adjusted_rand(&[3], &[4]).unwrap(), 1.0);
        assert!(matches!(adjusted_rand(&[0], &[0, 1]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn matching_agreement() {
        assert_eq!(minimal_matching(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(minimal_matching(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        // unequal cluster counts: best pairing keeps {0,1,2} and {4}
        assert_eq!(minimal_matching(&[0, 0, 0, 1, 1], &[0, 0, 0, 0, 1]).unwrap(), 0.8);
    }

    #[test]
    fn hungarian_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(1..6);
            let cost: Vec<Vec<i64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-20..20)).collect())
                .collect();
            let got = hungarian(&cost);
            let got_cost: i64 = got.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = i64::MAX;
            permute(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum());
            });
            assert_eq!(got_cost, best);
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            visit(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, visit);
            p.swap(k, i);
        }
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_relabel_invariant(
            a in proptest::collection::vec(0usize..4, 2..40),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
            prop_assert_eq!(adjusted_rand(&a, &b).unwrap(), adjusted_rand(&b, &a).unwrap());
            let shifted: Vec<usize> = a.iter().map(|l| 10 - l).collect();
            prop_assert_eq!(adjusted_rand(&a, &shifted).unwrap(), 1.0);
            let r = adjusted_rand(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }
}
