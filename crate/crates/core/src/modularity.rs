//! Weighted Newman-Girvan modularity of ground-truth communities.
//!
//! For a symmetric adjacency `a` with strengths `s_i = sum_j a_ij` and
//! `two_w = sum_ij a_ij`,
//!
//! ```text
//! Q = 1/two_w * sum_ij (a_ij - s_i s_j / two_w) * [c_i == c_j]
//! ```
//!
//! The production path aggregates per community and runs in `O(E + N)`;
//! [`modularity_bruteforce`] evaluates the double sum literally.

use rayon::prelude::*;

use crate::analysis::ModularityCurve;
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, SnapshotGraph};
use crate::tensor_io::LabelVector;

/// Largest graph the brute-force reference accepts.
pub const BRUTEFORCE_MAX_N: usize = 512;

/// Assignment of every node to a community `0..n_communities`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    community_of: Vec<usize>,
    n_communities: usize,
}

impl Partition {
    pub fn new(community_of: Vec<usize>, n_communities: usize) -> Result<Self> {
        if let Some(&c) = community_of.iter().find(|&&c| c >= n_communities) {
            return Err(Error::Data(format!("community id {c} not below {n_communities}")));
        }
        Ok(Partition {
            community_of,
            n_communities,
        })
    }

    /// Ground-truth communities: one per class label.
    pub fn from_labels(labels: &LabelVector) -> Self {
        Partition {
            community_of: labels.as_slice().to_vec(),
            n_communities: labels.n_classes(),
        }
    }

    pub fn len(&self) -> usize {
        self.community_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.community_of.is_empty()
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn community(&self, node: usize) -> usize {
        self.community_of[node]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.community_of
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularityValue {
    pub q: f64,
    /// `sum_ij a_ij` over ordered pairs.
    pub total_weight_2w: f64,
    /// Weight of ordered pairs inside each community.
    pub per_community_internal: Vec<f64>,
    /// Summed node strength of each community.
    pub per_community_strength: Vec<f64>,
}

impl ModularityValue {
    fn from_aggregates(total: f64, internal: Vec<f64>, strength: Vec<f64>) -> Self {
        let q = internal
            .iter()
            .zip(&strength)
            .map(|(&e, &a)| e / total - (a / total) * (a / total))
            .sum();
        ModularityValue {
            q,
            total_weight_2w: total,
            per_community_internal: internal,
            per_community_strength: strength,
        }
    }
}

fn check_inputs(graph: &SnapshotGraph, partition: &Partition) -> Result<()> {
    if graph.n() != partition.len() {
        return Err(Error::Shape(format!(
            "partition covers {} nodes, graph has {}",
            partition.len(),
            graph.n()
        )));
    }
    Ok(())
}

/// Modularity via per-community aggregation. Empty communities contribute nothing.
pub fn modularity(graph: &SnapshotGraph, partition: &Partition) -> Result<ModularityValue> {
    check_inputs(graph, partition)?;
    let mut internal = vec![0.0; partition.n_communities()];
    let mut strength = vec![0.0; partition.n_communities()];
    let mut total = 0.0;
    for i in 0..graph.n() {
        let ci = partition.community(i);
        let mut s_i = 0.0;
        for &(j, w) in graph.neighbors(i) {
            s_i += w;
            if partition.community(j) == ci {
                internal[ci] += w;
            }
        }
        strength[ci] += s_i;
        total += s_i;
    }
    if total <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    Ok(ModularityValue::from_aggregates(total, internal, strength))
}

/// Literal double loop over all ordered node pairs. Reference only.
pub fn modularity_bruteforce(graph: &SnapshotGraph, partition: &Partition) -> Result<ModularityValue> {
    check_inputs(graph, partition)?;
    let n = graph.n();
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::Parameter(format!(
            "brute-force modularity limited to N <= {BRUTEFORCE_MAX_N}, got {n}"
        )));
    }
    let a = graph.to_dense();
    let mut two_w = 0.0;
    for v in &a {
        two_w += v;
    }
    if two_w <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let s: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j]).sum()).collect();

    let mut sum = 0.0;
    let mut internal = vec![0.0; partition.n_communities()];
    for i in 0..n {
        for j in 0..n {
            if partition.community(i) == partition.community(j) {
                sum += a[i * n + j] - s[i] * s[j] / two_w;
                internal[partition.community(i)] += a[i * n + j];
            }
        }
    }
    let mut strength = vec![0.0; partition.n_communities()];
    for i in 0..n {
        strength[partition.community(i)] += s[i];
    }
    Ok(ModularityValue {
        q: sum / two_w,
        total_weight_2w: two_w,
        per_community_internal: internal,
        per_community_strength: strength,
    })
}

/// Ground-truth modularity of every snapshot, in layer order.
pub fn modularity_curve(dg: &DynamicGraph) -> Result<ModularityCurve> {
    let partition = Partition::from_labels(&dg.labels);
    let values = dg
        .snapshots
        .par_iter()
        .zip(dg.layer_names.par_iter())
        .map(|(g, name)| modularity(g, &partition).map(|m| m.q).map_err(|e| e.in_layer(name)))
        .collect::<Result<Vec<_>>>()?;
    ModularityCurve::new(values, dg.layer_names.clone())
}
