//! Agglomerative clustering with average or complete linkage.
//!
//! Both linkages are reducible, so the nearest-neighbour chain algorithm
//! builds the same hierarchy as the textbook closest-pair loop in O(N²)
//! time. Merges are reported sorted by height, in the scipy layout: leaves
//! are `0..N`, the node created by merge `s` is `N + s`.

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    Average,
    Complete,
}

impl Linkage {
    #[inline]
    fn update(self, d_ac: f64, d_bc: f64, size_a: usize, size_b: usize) -> f64 {
        match self {
            Linkage::Average => {
                (size_a as f64 * d_ac + size_b as f64 * d_bc) / (size_a + size_b) as f64
            }
            Linkage::Complete => d_ac.max(d_bc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
    // Leaf representatives of each merge, used for cutting.
    #[serde(skip)]
    pairs: Vec<(usize, usize)>,
}

impl Dendrogram {
    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_leaves(&self) -> usize {
        self.n
    }

    /// Flat partition into `k` clusters obtained by undoing the last `k − 1`
    /// merges. Labels are arbitrary but consistent within one call.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n {
            return Err(Error::Parameter(format!("cannot cut {} leaves into {k} clusters", self.n)));
        }
        let mut uf = UnionFind::new(self.n);
        for &(a, b) in &self.pairs[..self.n - k] {
            uf.union(a, b);
        }
        Ok((0..self.n).map(|i| uf.find(i)).collect())
    }
}

pub fn linkage(matrix: &DistanceMatrix, method: Linkage) -> Dendrogram {
    let n = matrix.n();
    let mut d: Vec<f64> = (0..n).flat_map(|i| matrix.row(i).to_vec()).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap();
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            // The previous chain element wins ties, then the smallest index.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[a * n + p]);
            for c in 0..n {
                if active[c] && c != a && d[a * n + c] < best_d {
                    best = Some(c);
                    best_d = d[a * n + c];
                }
            }
            let b = best.unwrap_or_else(|| {
                (0..n).find(|&c| active[c] && c != a).expect("two active clusters remain")
            });
            if Some(b) == prev {
                chain.truncate(chain.len() - 2);
                break (a, b);
            }
            chain.push(b);
        };

        let height = d[a * n + b];
        let (keep, gone) = (a.min(b), a.max(b));
        for c in 0..n {
            if active[c] && c != a && c != b {
                let v = method.update(d[a * n + c], d[b * n + c], size[a], size[b]);
                d[keep * n + c] = v;
                d[c * n + keep] = v;
            }
        }
        size[keep] = size[a] + size[b];
        active[gone] = false;
        raw.push((keep, gone, height));
    }

    raw.sort_by(|x, y| x.2.total_cmp(&y.2));
    relabel(n, raw)
}

fn relabel(n: usize, raw: Vec<(usize, usize, f64)>) -> Dendrogram {
    let mut uf = UnionFind::new(n);
    let mut node_of_root: Vec<usize> = (0..n).collect();
    let mut node_size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(raw.len());
    let mut pairs = Vec::with_capacity(raw.len());
    for (step, (a, b, height)) in raw.into_iter().enumerate() {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (na, nb) = (node_of_root[ra], node_of_root[rb]);
        let node = n + step;
        node_size[node] = node_size[na] + node_size[nb];
        let root = uf.union(ra, rb);
        node_of_root[root] = node;
        merges.push(Merge {
            left: na.min(nb),
            right: na.max(nb),
            height,
            size: node_size[node],
        });
        pairs.push((a, b));
    }
    Dendrogram { n, merges, pairs }
}

/// Closest-pair agglomeration in O(N³). Reference implementation for tests
/// and small inputs; ties go to the lexicographically smallest pair.
pub fn naive_linkage(matrix: &DistanceMatrix, method: Linkage) -> Dendrogram {
    let n = matrix.n();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut raw = Vec::new();
    let between = |x: &[usize], y: &[usize]| -> f64 {
        let all = x.iter().flat_map(|&i| y.iter().map(move |&j| matrix.get(i, j)));
        match method {
            Linkage::Average => all.sum::<f64>() / (x.len() * y.len()) as f64,
            Linkage::Complete => all.fold(f64::NEG_INFINITY, f64::max),
        }
    };
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let h = between(&clusters[i], &clusters[j]);
                if h < best.2 {
                    best = (i, j, h);
                }
            }
        }
        let (i, j, h) = best;
        raw.push((clusters[i][0], clusters[j][0], h));
        let moved = clusters.remove(j);
        clusters[i].extend(moved);
    }
    relabel(n, raw)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let root = ra.min(rb);
        self.parent[ra.max(rb)] = root;
        root
    }
}
