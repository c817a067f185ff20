//! Partitioning around medoids.
//!
//! Build: the first medoid is the medoid of the whole set (smallest row
//! sum); each further medoid is the point farthest from its nearest chosen
//! medoid. Swap: classic PAM, applying the best improving (medoid, point)
//! exchange until none improves the total distance. Ties resolve to the
//! smallest index everywhere, so the result is deterministic.

use serde::Serialize;

use crate::distance::DistanceMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedoidsFit {
    pub medoids: Vec<usize>,
    /// Position in `medoids` of each point's medoid.
    pub labels: Vec<usize>,
    pub cost: f64,
    pub swaps: usize,
}

pub fn k_medoids(matrix: &DistanceMatrix, k: usize, max_rounds: usize) -> Result<MedoidsFit> {
    let n = matrix.n();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} outside [1, {n}]")));
    }
    let mut medoids = build(matrix, k);
    let mut swaps = 0;
    for _ in 0..max_rounds {
        let (nearest, second) = nearest_two(matrix, &medoids);
        let current: f64 = nearest.iter().map(|&(_, d)| d).sum();
        let tolerance = 1e-12 * current.max(1.0);
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let to_cand = matrix.get(j, cand);
                    let (owner, d_near) = nearest[j];
                    let replaced = if owner == slot {
                        second[j].min(to_cand)
                    } else {
                        d_near.min(to_cand)
                    };
                    delta += replaced - d_near;
                }
                if delta < -tolerance && best.is_none_or(|(_, _, bd)| delta < bd) {
                    best = Some((slot, cand, delta));
                }
            }
        }
        match best {
            Some((slot, cand, _)) => {
                medoids[slot] = cand;
                swaps += 1;
            }
            None => break,
        }
    }
    let (nearest, _) = nearest_two(matrix, &medoids);
    let mut labels: Vec<usize> = nearest.iter().map(|&(slot, _)| slot).collect();
    for (slot, &m) in medoids.iter().enumerate() {
        labels[m] = slot;
    }
    let cost = (0..n).map(|j| matrix.get(j, medoids[labels[j]])).sum();
    Ok(MedoidsFit {
        medoids,
        labels,
        cost,
        swaps,
    })
}

fn build(matrix: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = matrix.n();
    let row_sum = |i: usize| matrix.row(i).iter().sum::<f64>();
    let first = (1..n).fold(0, |best, i| if row_sum(i) < row_sum(best) { i } else { best });
    let mut medoids = vec![first];
    let mut gap: Vec<f64> = (0..n).map(|j| matrix.get(j, first)).collect();
    while medoids.len() < k {
        let mut pick = None;
        for j in 0..n {
            if medoids.contains(&j) {
                continue;
            }
            if pick.is_none_or(|p: usize| gap[j] > gap[p]) {
                pick = Some(j);
            }
        }
        let p = pick.expect("k <= n leaves a candidate");
        medoids.push(p);
        for (j, g) in gap.iter_mut().enumerate() {
            *g = g.min(matrix.get(j, p));
        }
    }
    medoids
}

/// For each point: (slot, distance) of its nearest medoid, and the distance
/// to the second nearest (infinite when k = 1).
fn nearest_two(matrix: &DistanceMatrix, medoids: &[usize]) -> (Vec<(usize, f64)>, Vec<f64>) {
    (0..matrix.n())
        .map(|j| {
            let mut near = (0, f64::INFINITY);
            let mut second = f64::INFINITY;
            for (slot, &m) in medoids.iter().enumerate() {
                let d = matrix.get(j, m);
                if d < near.1 {
                    second = near.1;
                    near = (slot, d);
                } else if d < second {
                    second = d;
                }
            }
            (near, second)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::canonical_labels;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    /// All set partitions of `0..n` into exactly `k` nonempty blocks.
    fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn go(i: usize, n: usize, k: usize, cur: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                if used == k {
                    out.push(cur.clone());
                }
                return;
            }
            for b in 0..=used.min(k - 1) {
                cur.push(b);
                go(i + 1, n, k, cur, used.max(b + 1), out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(0, n, k, &mut Vec::new(), 0, &mut out);
        out
    }

    fn medoid_objective(dm: &DistanceMatrix, labels: &[usize], k: usize) -> f64 {
        (0..k)
            .map(|b| {
                let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == b).collect();
                members
                    .iter()
                    .map(|&m| members.iter().map(|&j| dm.get(j, m)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    #[test]
    fn partition_enumeration_counts() {
        // Stirling numbers of the second kind
        assert_eq!(partitions(6, 3).len(), 90);
        assert_eq!(partitions(6, 2).len(), 31);
        assert_eq!(partitions(4, 4).len(), 1);
    }

    #[test]
    fn planted_blocks_match_exhaustive_search() {
        // points on a line: three tight blocks of two
        let xs = [0.0, 0.3, 5.0, 5.4, 11.0, 11.1];
        let rows = xs.iter().map(|a| xs.iter().map(|b| f64::abs(a - b)).collect()).collect();
        let dm = DistanceMatrix::from_rows(ids(6), rows).unwrap();

        let mut best = (f64::INFINITY, Vec::new());
        for p in partitions(6, 3) {
            let cost = medoid_objective(&dm, &p, 3);
            if cost < best.0 {
                best = (cost, p);
            }
        }
        let fit = k_medoids(&dm, 3, 100).unwrap();
        assert_eq!(canonical_labels(&fit.labels, dm.ids()), canonical_labels(&best.1, dm.ids()));
        assert!((fit.cost - best.0).abs() < 1e-12);
    }

    #[test]
    fn swap_improves_on_build() {
        // The build step picks the global medoid first, which is a poor
        // medoid for a two-cluster split; the swap phase must fix it.
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 10.0, 11.0, 12.0];
        let rows = xs.iter().map(|a| xs.iter().map(|b| f64::abs(a - b)).collect()).collect();
        let dm = DistanceMatrix::from_rows(ids(8), rows).unwrap();
        let fit = k_medoids(&dm, 2, 100).unwrap();
        let mut meds = fit.medoids.clone();
        meds.sort_unstable();
        assert_eq!(meds, vec![2, 6]);
        assert_eq!(fit.cost, 6.0 + 2.0);
        assert!(fit.swaps >= 1);
    }

    #[test]
    fn duplicates_keep_clusters_nonempty() {
        let rows = vec![vec![0.0; 4]; 4];
        let dm = DistanceMatrix::from_rows(ids(4), rows).unwrap();
        let fit = k_medoids(&dm, 3, 10).unwrap();
        let mut seen = fit.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, vec![0, 1, 2]);
    }
}
