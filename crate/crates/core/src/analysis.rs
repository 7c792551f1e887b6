//! Downstream analysis of a modularity curve: layer difference matrices,
//! plateau and descent detection, prune plans and cross-run comparison.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::RunManifest;

pub const DEFAULT_EPSILON: f64 = 0.005;
/// Minimum number of consecutive flat steps that make a plateau.
pub const DEFAULT_MIN_PLATEAU_RUN: usize = 2;

/// Modularity per layer, shallow to deep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularityCurve {
    pub values: Vec<f64>,
    pub layer_names: Vec<String>,
}

impl ModularityCurve {
    pub fn new(values: Vec<f64>, layer_names: Vec<String>) -> Result<Self> {
        if values.len() != layer_names.len() {
            return Err(Error::Shape(format!(
                "{} values but {} layer names",
                values.len(),
                layer_names.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("modularity value {v} outside [-1, 1]")));
        }
        Ok(ModularityCurve { values, layer_names })
    }

    /// Curve with generated names `layer_0`, `layer_1`, ...
    pub fn unnamed(values: Vec<f64>) -> Result<Self> {
        let names = (0..values.len()).map(|i| format!("layer_{i}")).collect();
        Self::new(values, names)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Steps `M[i+1] - M[i]`.
    pub fn deltas(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `D[i][j] = |M[i] - M[j]|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix {
    values: Vec<f64>,
    n: usize,
}

impl DifferenceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn difference_matrix(curve: &ModularityCurve) -> Result<DifferenceMatrix> {
    let n = curve.len();
    if n == 0 {
        return Err(Error::Shape("difference matrix of an empty curve".into()));
    }
    let m = &curve.values;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = (m[i] - m[j]).abs();
        }
    }
    Ok(DifferenceMatrix { values, n })
}

/// Layer intervals `[start, end]` where the curve is flat or falling.
///
/// Intervals never share a step; a plateau and a descent may touch at a
/// common endpoint layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSegments {
    pub plateaus: Vec<(usize, usize)>,
    pub descents: Vec<(usize, usize)>,
    pub epsilon: f64,
    pub min_run: usize,
}

pub fn detect_segments(curve: &ModularityCurve, epsilon: f64) -> Result<CurveSegments> {
    detect_segments_with(curve, epsilon, DEFAULT_MIN_PLATEAU_RUN)
}

/// Scans consecutive steps. Maximal runs of steps `<= -epsilon` are descents;
/// maximal runs of at least `min_run` steps with `|step| < epsilon` are plateaus.
pub fn detect_segments_with(curve: &ModularityCurve, epsilon: f64, min_run: usize) -> Result<CurveSegments> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    if min_run == 0 {
        return Err(Error::Parameter("min_run must be >= 1".into()));
    }
    let deltas = curve.deltas();
    let is_descent = |d: f64| d <= -epsilon;
    let is_flat = |d: f64| d.abs() < epsilon;

    let (mut plateaus, mut descents) = (Vec::new(), Vec::new());
    let mut i = 0;
    while i < deltas.len() {
        let kind: Option<&dyn Fn(f64) -> bool> = if is_descent(deltas[i]) {
            Some(&is_descent)
        } else if is_flat(deltas[i]) {
            Some(&is_flat)
        } else {
            None
        };
        let Some(pred) = kind else {
            i += 1;
            continue;
        };
        let start = i;
        while i < deltas.len() && pred(deltas[i]) {
            i += 1;
        }
        // steps start..i cover layers start..=i
        if is_descent(deltas[start]) {
            descents.push((start, i));
        } else if i - start >= min_run {
            plateaus.push((start, i));
        }
    }
    Ok(CurveSegments {
        plateaus,
        descents,
        epsilon,
        min_run,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneReason {
    Plateau,
    Descent,
}

impl fmt::Display for PruneReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneReason::Plateau => "plateau",
            PruneReason::Descent => "descent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneCandidate {
    pub layer: usize,
    pub name: String,
    pub reason: PruneReason,
    pub eligible: bool,
}

/// Layers recommended for removal. Advisory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunePlan {
    pub epsilon: f64,
    pub candidates: Vec<PruneCandidate>,
}

impl PrunePlan {
    pub fn eligible(&self) -> impl Iterator<Item = &PruneCandidate> {
        self.candidates.iter().filter(|c| c.eligible)
    }
}

/// Every plateau layer after the first of its interval and every layer entered
/// by a drop becomes a candidate. Only repeatable layers are eligible.
pub fn prune_plan(curve: &ModularityCurve, segments: &CurveSegments, manifest: &RunManifest) -> Result<PrunePlan> {
    if manifest.layers.len() != curve.len() {
        return Err(Error::Shape(format!(
            "curve has {} layers, manifest has {}",
            curve.len(),
            manifest.layers.len()
        )));
    }
    let in_range = |&(s, e): &(usize, usize)| s < e && e < curve.len();
    if !segments.plateaus.iter().chain(&segments.descents).all(in_range) {
        return Err(Error::Shape("segment interval outside the curve".into()));
    }

    let mut candidates: Vec<PruneCandidate> = segments
        .plateaus
        .iter()
        .map(|iv| (iv, PruneReason::Plateau))
        .chain(segments.descents.iter().map(|iv| (iv, PruneReason::Descent)))
        .flat_map(|(&(start, end), reason)| (start + 1..=end).map(move |layer| (layer, reason)))
        .map(|(layer, reason)| PruneCandidate {
            layer,
            name: manifest.layers[layer].name.clone(),
            reason,
            eligible: manifest.layers[layer].repeatable,
        })
        .collect();
    candidates.sort_by_key(|c| c.layer);
    Ok(PrunePlan {
        epsilon: segments.epsilon,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub length: usize,
    pub peak: f64,
    pub peak_layer: usize,
    pub peak_name: String,
}

/// One stage row of an alignment: the stage's last value in every curve, if present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedStage {
    pub stage: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub curves: Vec<CurveSummary>,
    pub max_peak_difference: f64,
    pub tolerance: f64,
    pub peaks_agree: bool,
    pub stages: Vec<AlignedStage>,
}

/// Stage key of a layer name: everything before the last `.`, or the whole name.
fn stage_key(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(prefix, _)| prefix)
}

/// Compares curves of model variants: peaks, and values aligned by stage prefix.
pub fn compare_runs(curves: &[ModularityCurve], tolerance: f64) -> Result<AlignmentReport> {
    if curves.len() < 2 {
        return Err(Error::Parameter(format!(
            "comparison needs at least 2 curves, got {}",
            curves.len()
        )));
    }
    if curves.iter().any(ModularityCurve::is_empty) {
        return Err(Error::Parameter("cannot compare an empty curve".into()));
    }
    let summaries: Vec<CurveSummary> = curves
        .iter()
        .map(|c| {
            // first occurrence wins on ties
            let (peak_layer, peak) =
                c.values
                    .iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (i, v)| if v > best.1 { (i, v) } else { best },
                    );
            CurveSummary {
                length: c.len(),
                peak,
                peak_layer,
                peak_name: c.layer_names[peak_layer].clone(),
            }
        })
        .collect();
    let hi = summaries.iter().map(|s| s.peak).fold(f64::NEG_INFINITY, f64::max);
    let lo = summaries.iter().map(|s| s.peak).fold(f64::INFINITY, f64::min);

    let mut keys: Vec<&str> = Vec::new();
    for c in curves {
        for name in &c.layer_names {
            let key = stage_key(name);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    let stages = keys
        .iter()
        .map(|&key| AlignedStage {
            stage: key.to_string(),
            values: curves
                .iter()
                .map(|c| {
                    c.layer_names
                        .iter()
                        .zip(&c.values)
                        .filter(|(n, _)| stage_key(n) == key)
                        .map(|(_, &v)| v)
                        .next_back()
                })
                .collect(),
        })
        .collect();

    Ok(AlignmentReport {
        curves: summaries,
        max_peak_difference: hi - lo,
        tolerance,
        peaks_agree: hi - lo <= tolerance,
        stages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub k: usize,
    pub n: usize,
    pub metric: String,
}

/// Machine-readable result of analysing one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub curve: Vec<f64>,
    pub layers: Vec<String>,
    pub epsilon: f64,
    pub plateaus: Vec<(usize, usize)>,
    pub descents: Vec<(usize, usize)>,
    pub prune_candidates: Vec<PruneCandidate>,
    pub clamped_edges_per_layer: Vec<usize>,
    pub params: ReportParams,
}

impl AnalysisReport {
    pub fn curve(&self) -> Result<ModularityCurve> {
        ModularityCurve::new(self.curve.clone(), self.layers.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::LayerEntry;

    fn curve(v: &[f64]) -> ModularityCurve {
        ModularityCurve::unnamed(v.to_vec()).unwrap()
    }

    fn manifest(repeatable: &[bool]) -> RunManifest {
        RunManifest {
            model_name: "m".into(),
            dataset_name: "d".into(),
            n_classes: 2,
            labels_file: "labels.npy".into(),
            layers: repeatable
                .iter()
                .enumerate()
                .map(|(i, &r)| LayerEntry {
                    name: format!("layer_{i}"),
                    file: format!("layer_{i}.npy").into(),
                    repeatable: r,
                    stage: None,
                })
                .collect(),
        }
    }

    #[test]
    fn difference_examples() {
        let d = difference_matrix(&curve(&[0.2])).unwrap();
        assert_eq!(d.get(0, 0), 0.0);

        let d = difference_matrix(&curve(&[0.1, 0.4, 0.35])).unwrap();
        assert!((d.get(0, 1) - 0.3).abs() < 1e-15);
        assert!((d.get(0, 2) - 0.25).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(d.get(i, j).to_bits(), d.get(j, i).to_bits());
            }
        }
        assert!(matches!(difference_matrix(&curve(&[])), Err(Error::Shape(_))));
    }

    #[test]
    fn plateau_example() {
        // deltas 0.2, 0.01, -0.005, 0.295
        let s = detect_segments(&curve(&[0.1, 0.3, 0.31, 0.305, 0.6]), 0.02).unwrap();
        assert_eq!(s.plateaus, vec![(1, 3)]);
        assert!(s.descents.is_empty());
    }

    #[test]
    fn increasing_curve_has_no_segments() {
        let s = detect_segments(&curve(&[0.0, 0.05, 0.1, 0.2, 0.5]), 0.02).unwrap();
        assert!(s.plateaus.is_empty() && s.descents.is_empty());
    }

    #[test]
    fn descent_example() {
        let s = detect_segments(&curve(&[0.5, 0.4, 0.3]), 0.02).unwrap();
        assert_eq!(s.descents, vec![(0, 2)]);
        assert!(s.plateaus.is_empty());
    }

    #[test]
    fn single_flat_step_is_not_a_plateau() {
        let s = detect_segments(&curve(&[0.1, 0.3, 0.301, 0.5]), 0.02).unwrap();
        assert!(s.plateaus.is_empty());
    }

    #[test]
    fn descent_and_plateau_touch() {
        let s = detect_segments(&curve(&[0.5, 0.4, 0.401, 0.402, 0.6]), 0.02).unwrap();
        assert_eq!(s.descents, vec![(0, 1)]);
        assert_eq!(s.plateaus, vec![(1, 3)]);
    }

    #[test]
    fn bad_epsilon() {
        for eps in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                detect_segments(&curve(&[0.1, 0.2]), eps),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn prune_plan_examples() {
        let c = curve(&[0.1, 0.3, 0.31, 0.305, 0.6]);
        let s = detect_segments(&c, 0.02).unwrap();
        let plan = prune_plan(&c, &s, &manifest(&[false, false, true, true, false])).unwrap();
        let got: Vec<_> = plan
            .candidates
            .iter()
            .map(|c| (c.layer, c.reason, c.eligible))
            .collect();
        assert_eq!(
            got,
            vec![(2, PruneReason::Plateau, true), (3, PruneReason::Plateau, true)]
        );

        let inc = curve(&[0.0, 0.1, 0.2]);
        let s = detect_segments(&inc, 0.02).unwrap();
        assert!(prune_plan(&inc, &s, &manifest(&[true; 3]))
            .unwrap()
            .candidates
            .is_empty());

        let drop = curve(&[0.2, 0.4, 0.3, 0.5]);
        let s = detect_segments(&drop, 0.02).unwrap();
        let plan = prune_plan(&drop, &s, &manifest(&[true, true, false, true])).unwrap();
        assert_eq!(plan.candidates.len(), 1);
        assert_eq!(plan.candidates[0].layer, 2);
        assert_eq!(plan.candidates[0].reason, PruneReason::Descent);
        assert!(!plan.candidates[0].eligible);

        assert!(matches!(
            prune_plan(&drop, &s, &manifest(&[true; 3])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn compare_examples() {
        let a = curve(&[0.1, 0.5, 0.6]);
        let r = compare_runs(&[a.clone(), a.clone()], 0.01).unwrap();
        assert_eq!(r.max_peak_difference, 0.0);
        assert!(r.peaks_agree);

        let b = curve(&[0.1, 0.5, 0.59, 0.6]);
        let r = compare_runs(&[a.clone(), b], 0.01).unwrap();
        assert_eq!(r.max_peak_difference, 0.0);
        assert_eq!((r.curves[0].length, r.curves[1].length), (3, 4));
        assert_eq!(r.stages.len(), 4);
        assert_eq!(r.stages[3].values, vec![None, Some(0.6)]);

        assert!(matches!(compare_runs(&[a], 0.01), Err(Error::Parameter(_))));
    }

    #[test]
    fn compare_aligns_by_stage_prefix() {
        let a = ModularityCurve::new(
            vec![0.1, 0.2, 0.3, 0.5],
            vec!["conv1".into(), "conv4_x.0".into(), "conv4_x.1".into(), "fc".into()],
        )
        .unwrap();
        let b = ModularityCurve::new(
            vec![0.1, 0.25, 0.45],
            vec!["conv1".into(), "conv4_x.0".into(), "fc".into()],
        )
        .unwrap();
        let r = compare_runs(&[a, b], 0.1).unwrap();
        let stages: Vec<_> = r.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(stages, vec!["conv1", "conv4_x", "fc"]);
        assert_eq!(r.stages[1].values, vec![Some(0.3), Some(0.25)]);
        assert!(r.peaks_agree);
    }
}
