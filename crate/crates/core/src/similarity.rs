//! Pairwise sample similarity for one layer.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::FeatureMatrix;

/// Rows whose norm (cosine) or variance (Pearson) falls below this are rejected.
pub const DEGENERATE_THRESHOLD: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Pearson,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Pearson => "pearson",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "pearson" => Ok(Metric::Pearson),
            other => Err(Error::Parameter(format!(
                "metric must be 'cosine' or 'pearson', got '{other}'"
            ))),
        }
    }
}

/// Dense symmetric `N x N` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Vec<f64>,
    n: usize,
    metric: Metric,
}

impl SimilarityMatrix {
    /// Wraps an existing row-major matrix after checking it is square and exactly symmetric.
    pub fn from_dense(values: Vec<f64>, n: usize, metric: Metric) -> Result<Self> {
        if values.len() != n * n || n < 2 {
            return Err(Error::Shape(format!(
                "{} values do not form a square matrix of side >= 2",
                values.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if values[i * n + j].to_bits() != values[j * n + i].to_bits() {
                    return Err(Error::Data(format!("similarity not symmetric at ({i}, {j})")));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("similarity contains non-finite values".into()));
        }
        Ok(SimilarityMatrix { values, n, metric })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Dot product with four interleaved accumulators combined in a fixed order,
/// so the result never depends on how pairs are scheduled across threads.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in chunks * 4..a.len() {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Cosine of the angle between every pair of rows.
pub fn cosine_similarity(features: &FeatureMatrix) -> Result<SimilarityMatrix> {
    let rows: Vec<&[f64]> = features.rows().collect();
    let norms = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let norm = dot(r, r).sqrt();
            if norm < DEGENERATE_THRESHOLD {
                Err(Error::DegenerateVector {
                    index: i,
                    reason: "l2 norm is zero",
                })
            } else {
                Ok(norm)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise(&rows, &norms, Metric::Cosine))
}

/// Pearson correlation between every pair of rows: cosine of the mean-centered rows.
pub fn pearson_similarity(features: &FeatureMatrix) -> Result<SimilarityMatrix> {
    let m = features.n_features() as f64;
    let centered: Vec<Vec<f64>> = features
        .rows()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / m;
            r.iter().map(|v| v - mean).collect()
        })
        .collect();
    let rows: Vec<&[f64]> = centered.iter().map(Vec::as_slice).collect();
    let norms = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ss = dot(r, r);
            if ss / m < DEGENERATE_THRESHOLD {
                Err(Error::DegenerateVector {
                    index: i,
                    reason: "row has zero variance",
                })
            } else {
                Ok(ss.sqrt())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise(&rows, &norms, Metric::Pearson))
}

pub fn similarity(features: &FeatureMatrix, metric: Metric) -> Result<SimilarityMatrix> {
    match metric {
        Metric::Cosine => cosine_similarity(features),
        Metric::Pearson => pearson_similarity(features),
    }
}

fn pairwise(rows: &[&[f64]], norms: &[f64], metric: Metric) -> SimilarityMatrix {
    let n = rows.len();
    // upper triangle, one entry per unordered pair
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| (dot(rows[i], rows[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0))
                .collect()
        })
        .collect();

    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        values[i * n + i] = 1.0;
        for (off, &s) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix { values, n, metric }
}
