//! Layer-by-layer k-NN graphs over neural network feature representations,
//! scored by the modularity of the ground-truth class communities.
//!
//! The pipeline loads one feature matrix per layer ([`tensor_io`]), turns each
//! into a pairwise similarity matrix ([`similarity`]), keeps the top-k
//! neighbours of every sample and symmetrizes ([`graph`]), and scores every
//! snapshot against the class labels ([`modularity`]). [`analysis`] turns the
//! resulting curve into difference matrices, plateau/descent intervals and
//! prune plans. [`synth`] generates runs with known class separation.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod graph;
pub mod modularity;
pub mod render;
pub mod similarity;
pub mod synth;
pub mod tensor_io;

pub use analysis::{
    compare_runs, detect_segments, difference_matrix, prune_plan, CurveSegments, DifferenceMatrix, ModularityCurve,
    PrunePlan,
};
pub use error::{Error, Result};
pub use graph::{build_dynamic_graph, build_knn, DynamicGraph, SnapshotGraph};
pub use modularity::{modularity, modularity_bruteforce, modularity_curve, Partition};
pub use similarity::{cosine_similarity, pearson_similarity, Metric, SimilarityMatrix};
pub use tensor_io::{load_run, FeatureMatrix, LabelVector, LayerFeatureSet, RunManifest};

/// Builds the dynamic graph of a run and scores every layer.
pub fn run_curve(run: &LayerFeatureSet, metric: Metric, k: usize) -> Result<(DynamicGraph, ModularityCurve)> {
    let dg = build_dynamic_graph(run, metric, k)?;
    let curve = modularity_curve(&dg)?;
    Ok((dg, curve))
}

/// Full analysis of one run: curve, segments, prune candidates and run parameters.
pub fn analyze(run: &LayerFeatureSet, metric: Metric, k: usize, epsilon: f64) -> Result<analysis::AnalysisReport> {
    let (dg, curve) = run_curve(run, metric, k)?;
    let segments = detect_segments(&curve, epsilon)?;
    let plan = prune_plan(&curve, &segments, &run.manifest)?;
    Ok(analysis::AnalysisReport {
        curve: curve.values,
        layers: curve.layer_names,
        epsilon,
        plateaus: segments.plateaus,
        descents: segments.descents,
        prune_candidates: plan.candidates,
        clamped_edges_per_layer: dg.clamped_edges_per_layer(),
        params: analysis::ReportParams {
            k,
            n: run.n_samples(),
            metric: metric.to_string(),
        },
    })
}
