//! Synthetic layer features with a controllable class-separation schedule.
//!
//! Generation consumes a ChaCha8 stream seeded with `seed` in a fixed order:
//!
//! 1. `K x M` standard normals, one row per class, each normalized onto the unit sphere;
//! 2. `N x M` standard normals scaled by `noise_sigma`, one row per sample.
//!
//! Labels are assigned round-robin (`label[i] = i mod K`). Layer `l` of sample
//! `i` is `schedule[l] * center[label[i]] + noise[i]`, so a sample keeps its
//! noise across layers and only the class signal changes with depth.

use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor_io::{FeatureMatrix, LabelVector, LayerEntry, LayerFeatureSet, RunManifest};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_layers: usize,
    /// Class-center multiplier per layer.
    pub separation_schedule: Vec<f64>,
    /// Standard deviation of each noise coordinate.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Spec whose schedule rises linearly from `start` to `end`.
    #[allow(clippy::too_many_arguments)]
    pub fn linear(
        n_samples: usize,
        n_classes: usize,
        n_features: usize,
        n_layers: usize,
        start: f64,
        end: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        SynthSpec {
            n_samples,
            n_classes,
            n_features,
            n_layers,
            separation_schedule: linear_schedule(n_layers, start, end),
            noise_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = |m: String| Err(Error::Parameter(m));
        if self.n_classes < 2 {
            return p(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.n_samples < self.n_classes {
            return p(format!(
                "number of classes K = {} exceeds number of samples N = {}",
                self.n_classes, self.n_samples
            ));
        }
        if self.n_features == 0 {
            return p("n_features must be >= 1".into());
        }
        if self.n_layers == 0 {
            return p("n_layers must be >= 1".into());
        }
        if self.separation_schedule.len() != self.n_layers {
            return p(format!(
                "separation schedule has {} entries for {} layers",
                self.separation_schedule.len(),
                self.n_layers
            ));
        }
        if self.separation_schedule.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return p("separation schedule entries must be finite and >= 0".into());
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return p(format!("noise sigma must be > 0, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

/// `n` evenly spaced values from `start` to `end` inclusive.
pub fn linear_schedule(n: usize, start: f64, end: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Schedule that stays constant over `plateau` and rises in equal steps
/// from `start` to `end` everywhere else.
pub fn plateau_schedule(n_layers: usize, start: f64, end: f64, plateau: &RangeInclusive<usize>) -> Result<Vec<f64>> {
    if !plateau.is_empty() && *plateau.end() >= n_layers {
        return Err(Error::Parameter(format!(
            "plateau range {}..={} outside layers 0..={}",
            plateau.start(),
            plateau.end(),
            n_layers.saturating_sub(1)
        )));
    }
    let flat = |step: usize| plateau.contains(&step) && plateau.contains(&(step + 1));
    let rising = (0..n_layers.saturating_sub(1)).filter(|&s| !flat(s)).count();
    if rising > 0 && end <= start {
        return Err(Error::Parameter(format!(
            "plateau fixture needs end > start, got {start} .. {end}"
        )));
    }
    let inc = if rising > 0 { (end - start) / rising as f64 } else { 0.0 };
    let mut schedule = Vec::with_capacity(n_layers);
    let mut s = start;
    for layer in 0..n_layers {
        if layer > 0 && !flat(layer - 1) {
            s += inc;
        }
        schedule.push(s);
    }
    Ok(schedule)
}

fn layer_name(i: usize, n_layers: usize) -> String {
    let width = (n_layers.saturating_sub(1)).to_string().len().max(2);
    format!("layer_{i:0width$}")
}

/// Generates the run described by `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<LayerFeatureSet> {
    spec.validate()?;
    let (n, k, m) = (spec.n_samples, spec.n_classes, spec.n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut centers: Vec<f64> = Vec::with_capacity(k * m);
    for _ in 0..k {
        let row: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Parameter("degenerate class center draw".into()));
        }
        centers.extend(row.iter().map(|v| v / norm));
    }
    let noise: Vec<f64> = (0..n * m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            spec.noise_sigma * z
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();

    let layers = spec
        .separation_schedule
        .iter()
        .map(|&sep| {
            let mut data = Vec::with_capacity(n * m);
            for (i, &y) in labels.iter().enumerate() {
                let center = &centers[y * m..(y + 1) * m];
                let eps = &noise[i * m..(i + 1) * m];
                data.extend(center.iter().zip(eps).map(|(c, e)| sep * c + e));
            }
            FeatureMatrix::new(data, n, m)
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = RunManifest {
        model_name: "synthetic".into(),
        dataset_name: format!("synthetic-seed{}", spec.seed),
        n_classes: k,
        labels_file: "labels.npy".into(),
        layers: (0..spec.n_layers)
            .map(|i| {
                let name = layer_name(i, spec.n_layers);
                LayerEntry {
                    file: format!("{name}.npy").into(),
                    name,
                    repeatable: false,
                    stage: None,
                }
            })
            .collect(),
    };
    LayerFeatureSet::new(manifest, layers, LabelVector::new(labels, k)?)
}

/// Like [`generate`], but replaces the schedule with one that is flat over
/// `plateau` and rises elsewhere, spanning the first and last entries of
/// `spec.separation_schedule`. An empty range yields a plain ramp.
pub fn generate_plateau_fixture(spec: &SynthSpec, plateau: RangeInclusive<usize>) -> Result<LayerFeatureSet> {
    spec.validate()?;
    let start = spec.separation_schedule[0];
    let end = *spec.separation_schedule.last().unwrap();
    let schedule = plateau_schedule(spec.n_layers, start, end, &plateau)?;
    generate(&SynthSpec {
        separation_schedule: schedule,
        ..spec.clone()
    })
}

/// Marks the layers in `range` as repeatable.
pub fn mark_repeatable(set: &mut LayerFeatureSet, range: RangeInclusive<usize>) {
    for (i, entry) in set.manifest.layers.iter_mut().enumerate() {
        entry.repeatable = range.contains(&i);
    }
}
