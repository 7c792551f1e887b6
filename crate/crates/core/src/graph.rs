//! k-NN snapshot graphs and the layer-indexed dynamic graph.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::similarity::{similarity, Metric, SimilarityMatrix};
use crate::tensor_io::{LabelVector, LayerFeatureSet};

/// Directed top-k selection before symmetrization.
///
/// `neighbors[i]` lists node `i`'s picks in rank order (most similar first),
/// each with its similarity as weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedKnn {
    pub k: usize,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl DirectedKnn {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Dense row-major view of the directed adjacency.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut dense = vec![0.0; n * n];
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                dense[i * n + j] = w;
            }
        }
        dense
    }
}

/// Orders candidates by descending similarity, then ascending index.
fn rank(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Picks the `k` most similar other nodes for every node. Ties go to the smaller index.
pub fn knn_select(sim: &SimilarityMatrix, k: usize) -> Result<DirectedKnn> {
    let n = sim.n();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "k must satisfy 1 <= k <= N-1 = {}, got k = {k}",
            n - 1
        )));
    }
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut candidates: Vec<(usize, f64)> = sim
                .row(i)
                .iter()
                .copied()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .collect();
            if k < candidates.len() {
                candidates.select_nth_unstable_by(k - 1, rank);
                candidates.truncate(k);
            }
            candidates.sort_by(rank);
            candidates
        })
        .collect();
    Ok(DirectedKnn { k, neighbors })
}

/// Weighted undirected graph of one layer, stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGraph {
    pub layer_index: usize,
    pub k: usize,
    /// Number of undirected edges whose symmetrized weight was negative and set to 0.
    pub clamped_edges: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl SnapshotGraph {
    /// Builds a graph from undirected edges `(i, j, w)`. Duplicate pairs,
    /// self-loops, negative or non-finite weights are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if i == j {
                return Err(Error::Data(format!("self-loop at node {i}")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Data(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            pairs.push((i.min(j), i.max(j), w));
        }
        pairs.sort_by_key(|&(i, j, _)| (i, j));
        if pairs.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Data("duplicate edge".into()));
        }
        Ok(Self::from_sorted_pairs(n, &pairs, 0, 0, 0))
    }

    fn from_sorted_pairs(
        n: usize,
        pairs: &[(usize, usize, f64)],
        layer_index: usize,
        k: usize,
        clamped_edges: usize,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in pairs {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
        }
        SnapshotGraph {
            layer_index,
            k,
            clamped_edges,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.adjacency[i];
        row.binary_search_by_key(&j, |&(v, _)| v).map_or(0.0, |pos| row[pos].1)
    }

    /// Node strength: sum of incident edge weights.
    pub fn strength(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, w)| w).sum()
    }

    /// Undirected edges `(i, j, w)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&(j, _)| j > i).map(move |&(j, w)| (i, j, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Sum of `a_ij` over all ordered pairs, i.e. twice the total edge weight.
    pub fn total_weight(&self) -> f64 {
        self.adjacency.iter().flat_map(|row| row.iter().map(|&(_, w)| w)).sum()
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for row in &mut g.adjacency {
            for e in row.iter_mut() {
                e.1 *= factor;
            }
        }
        g
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut dense = vec![0.0; n * n];
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, w) in row {
                dense[i * n + j] = w;
            }
        }
        dense
    }

    /// Writes `src,dst,weight` rows with `src < dst` in lexicographic order.
    pub fn write_edge_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("src,dst,weight\n");
        for (i, j, w) in self.edges() {
            out.push_str(&format!("{i},{j},{w}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Symmetrizes a directed selection as `(A + A^T) / 2`, then clamps negative weights to 0.
pub fn symmetrize(directed: &DirectedKnn, layer_index: usize) -> SnapshotGraph {
    let n = directed.n();
    let mut half_edges: Vec<(usize, usize, f64)> = directed
        .neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, w)| (i.min(j), i.max(j), w)))
        .collect();
    half_edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

    let mut pairs = Vec::with_capacity(half_edges.len());
    let mut clamped = 0;
    let mut idx = 0;
    while idx < half_edges.len() {
        let (i, j, w) = half_edges[idx];
        let (sum, step) = match half_edges.get(idx + 1) {
            Some(&(i2, j2, w2)) if (i2, j2) == (i, j) => (w + w2, 2),
            _ => (w, 1),
        };
        let mut weight = sum / 2.0;
        if weight < 0.0 {
            weight = 0.0;
            clamped += 1;
        }
        pairs.push((i, j, weight));
        idx += step;
    }
    SnapshotGraph::from_sorted_pairs(n, &pairs, layer_index, directed.k, clamped)
}

/// Top-k selection followed by symmetrization.
pub fn build_knn(sim: &SimilarityMatrix, k: usize) -> Result<SnapshotGraph> {
    Ok(symmetrize(&knn_select(sim, k)?, 0))
}

/// One snapshot per layer over a shared set of nodes.
#[derive(Debug, Clone)]
pub struct DynamicGraph {
    pub snapshots: Vec<SnapshotGraph>,
    pub labels: LabelVector,
    pub layer_names: Vec<String>,
    pub metric: Metric,
    pub k: usize,
}

impl DynamicGraph {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn clamped_edges_per_layer(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.clamped_edges).collect()
    }
}

/// Builds every layer's snapshot with the same metric and `k`.
///
/// Layers are processed one after another so only one similarity matrix is
/// alive at a time; the work inside each layer runs in parallel.
pub fn build_dynamic_graph(run: &LayerFeatureSet, metric: Metric, k: usize) -> Result<DynamicGraph> {
    let names = run.layer_names();
    let snapshots = run
        .layers
        .iter()
        .zip(&names)
        .enumerate()
        .map(|(idx, (features, name))| {
            let sim = similarity(features, metric).map_err(|e| e.in_layer(name))?;
            let directed = knn_select(&sim, k).map_err(|e| e.in_layer(name))?;
            Ok(symmetrize(&directed, idx))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicGraph {
        snapshots,
        labels: run.labels.clone(),
        layer_names: names,
        metric,
        k,
    })
}
