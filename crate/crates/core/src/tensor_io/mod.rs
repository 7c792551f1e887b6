//! Feature matrices, label vectors and run manifests on disk.
//!
//! Tensors use the `.npy` container (see [`npy`]). A run directory holds one
//! tensor per layer, a label vector and a JSON manifest tying them together.

pub mod npy;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use npy::{NpyArray, NpyData};

/// Storage width of a feature tensor. Values are always held as `f64` in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    F32,
    F64,
}

/// Dense row-major `n_samples x n_features` matrix of activations.
///
/// Row `r` is sample `r`. Higher-rank activations `(N, C, W, H)` are flattened
/// so that element `(n, c, w, h)` lands in column `c*W*H + w*H + h`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_samples: usize,
    n_features: usize,
    dtype: ElementType,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_samples: usize, n_features: usize) -> Result<Self> {
        Self::build(data, n_samples, n_features, ElementType::F64)
    }

    /// Builds a matrix whose storage width is 32-bit; values are widened exactly.
    pub fn from_f32(data: Vec<f32>, n_samples: usize, n_features: usize) -> Result<Self> {
        let wide = data.into_iter().map(f64::from).collect();
        Self::build(wide, n_samples, n_features, ElementType::F32)
    }

    /// Builds a matrix from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Shape("rows have differing lengths".into()));
        }
        Self::new(rows.concat(), rows.len(), n_features)
    }

    fn build(data: Vec<f64>, n_samples: usize, n_features: usize, dtype: ElementType) -> Result<Self> {
        if n_samples < 2 || n_features < 1 {
            return Err(Error::Shape(format!(
                "feature matrix must be at least 2 x 1, got {n_samples} x {n_features}"
            )));
        }
        if data.len() != n_samples * n_features {
            return Err(Error::Shape(format!(
                "{} values do not fill a {n_samples} x {n_features} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at sample {}, feature {}",
                data[pos],
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(FeatureMatrix {
            data,
            n_samples,
            n_features,
            dtype,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn dtype(&self) -> ElementType {
        self.dtype
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_features)
    }

    /// A new matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            if i >= self.n_samples {
                return Err(Error::Parameter(format!(
                    "row index {i} out of range for {} samples",
                    self.n_samples
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::build(data, indices.len(), self.n_features, self.dtype)
    }
}

/// Ground-truth class label of every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelVector {
    /// Checks that every label is below `n_classes` and at least two classes occur.
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!(
                "label {bad} is not below the class count {n_classes}"
            )));
        }
        let distinct: HashSet<usize> = labels.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(Error::Data(format!(
                "labels must contain at least 2 distinct classes, found {}",
                distinct.len()
            )));
        }
        Ok(LabelVector { labels, n_classes })
    }

    /// Uses `1 + max(label)` as the class count.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, n_classes)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Indices of a class-balanced subsample of size `n`: the first rows of
    /// each class in file order, returned ascending. Present classes each get
    /// `n / K` rows and the first `n % K` of them (by class id) one more.
    /// `n == len()` selects everything.
    pub fn balanced_prefix(&self, n: usize) -> Result<Vec<usize>> {
        let total = self.labels.len();
        if n > total {
            return Err(Error::Parameter(format!(
                "n = {n} exceeds the {total} available samples"
            )));
        }
        if n == total {
            return Ok((0..total).collect());
        }
        if n < 2 {
            return Err(Error::Parameter(format!("n must be >= 2, got {n}")));
        }
        let counts = self.class_counts();
        let present: Vec<usize> = (0..self.n_classes).filter(|&c| counts[c] > 0).collect();
        let (base, rem) = (n / present.len(), n % present.len());
        let mut quota = vec![0usize; self.n_classes];
        for (rank, &c) in present.iter().enumerate() {
            quota[c] = base + usize::from(rank < rem);
            if quota[c] > counts[c] {
                return Err(Error::Parameter(format!(
                    "n = {n} needs {} samples of class {c}, only {} available",
                    quota[c], counts[c]
                )));
            }
        }
        let mut taken = vec![0usize; self.n_classes];
        let mut picked = Vec::with_capacity(n);
        for (i, &l) in self.labels.iter().enumerate() {
            if taken[l] < quota[l] {
                taken[l] += 1;
                picked.push(i);
            }
        }
        Ok(picked)
    }

    /// Labels of the given samples, keeping the class count.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.labels[i]).collect(), self.n_classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub file: PathBuf,
    #[serde(default)]
    pub repeatable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

/// JSON manifest describing one extraction run. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(rename = "model")]
    pub model_name: String,
    #[serde(rename = "dataset")]
    pub dataset_name: String,
    #[serde(rename = "num_classes")]
    pub n_classes: usize,
    pub labels_file: PathBuf,
    pub layers: Vec<LayerEntry>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Format("manifest lists no layers".into()));
        }
        let mut seen = HashSet::new();
        for layer in &self.layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::Format(format!(
                    "duplicate layer name '{}' in manifest",
                    layer.name
                )));
            }
        }
        Ok(())
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }
}

/// Per-layer features of one batch plus the shared labels, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFeatureSet {
    pub manifest: RunManifest,
    pub layers: Vec<FeatureMatrix>,
    pub labels: LabelVector,
}

impl LayerFeatureSet {
    pub fn new(manifest: RunManifest, layers: Vec<FeatureMatrix>, labels: LabelVector) -> Result<Self> {
        manifest.validate()?;
        if manifest.layers.len() != layers.len() {
            return Err(Error::Shape(format!(
                "manifest lists {} layers but {} matrices were given",
                manifest.layers.len(),
                layers.len()
            )));
        }
        for (entry, m) in manifest.layers.iter().zip(&layers) {
            if m.n_samples() != labels.len() {
                return Err(
                    Error::Shape(format!("{} samples but {} labels", m.n_samples(), labels.len()))
                        .in_layer(&entry.name),
                );
            }
        }
        Ok(LayerFeatureSet {
            manifest,
            layers,
            labels,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.manifest.layer_names()
    }

    /// Restricts every layer and the labels to the given samples.
    pub fn subsample(&self, indices: &[usize]) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|m| m.select_rows(indices))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.manifest.clone(), layers, self.labels.select(indices)?)
    }
}

fn with_path(err: Error, path: &Path) -> Error {
    let p = path.display();
    match err {
        Error::Format(m) => Error::Format(format!("{p}: {m}")),
        Error::Data(m) => Error::Data(format!("{p}: {m}")),
        Error::Shape(m) => Error::Shape(format!("{p}: {m}")),
        other => other,
    }
}

fn read_array(path: &Path) -> Result<NpyArray> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    npy::read_npy(&mut BufReader::new(file)).map_err(|e| with_path(e, path))
}

/// Reads a float tensor of rank >= 2 and flattens trailing axes.
pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let arr = read_array(path)?;
    if arr.shape.len() < 2 {
        return Err(with_path(
            Error::Shape(format!("feature tensor must have rank >= 2, got shape {:?}", arr.shape)),
            path,
        ));
    }
    let n = arr.shape[0];
    let m: usize = arr.shape[1..].iter().product();
    let result = match arr.data {
        NpyData::F32(v) => FeatureMatrix::from_f32(v, n, m),
        NpyData::F64(v) => FeatureMatrix::new(v, n, m),
        other => Err(Error::Format(format!(
            "feature tensors must be <f4 or <f8, found {}",
            other.dtype().descr()
        ))),
    };
    result.map_err(|e| with_path(e, path))
}

/// Writes the matrix as a 2-D tensor in its storage width.
pub fn write_feature_matrix(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let data = match matrix.dtype {
        // exact: the values originated from f32
        ElementType::F32 => NpyData::F32(matrix.data.iter().map(|&v| v as f32).collect()),
        ElementType::F64 => NpyData::F64(matrix.data.clone()),
    };
    write_array(path.as_ref(), &[matrix.n_samples, matrix.n_features], &data)
}

fn write_array(path: &Path, shape: &[usize], data: &NpyData) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    npy::write_npy(&mut w, shape, data)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_label_file(path: &Path) -> Result<Vec<usize>> {
    let arr = read_array(path)?;
    if arr.shape.len() != 1 {
        return Err(with_path(
            Error::Shape(format!("labels must be 1-D, got shape {:?}", arr.shape)),
            path,
        ));
    }
    let raw: Vec<i64> = match arr.data {
        NpyData::I64(v) => v,
        NpyData::I32(v) => v.into_iter().map(i64::from).collect(),
        other => {
            return Err(with_path(
                Error::Format(format!("labels must be <i8 or <i4, found {}", other.dtype().descr())),
                path,
            ))
        }
    };
    raw.into_iter()
        .enumerate()
        .map(|(i, l)| {
            usize::try_from(l).map_err(|_| with_path(Error::Data(format!("negative label {l} at sample {i}")), path))
        })
        .collect()
}

/// Reads a label vector and checks its length; the class count is `1 + max(label)`.
pub fn read_labels(path: impl AsRef<Path>, expected_n: usize) -> Result<LabelVector> {
    let path = path.as_ref();
    let labels = read_label_file(path)?;
    if labels.len() != expected_n {
        return Err(with_path(
            Error::Shape(format!("expected {expected_n} labels, found {}", labels.len())),
            path,
        ));
    }
    LabelVector::from_labels(labels).map_err(|e| with_path(e, path))
}

pub fn write_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let data = NpyData::I64(labels.labels.iter().map(|&l| l as i64).collect());
    write_array(path.as_ref(), &[labels.len()], &data)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: invalid manifest: {e}", path.display())))?;
    manifest.validate().map_err(|e| with_path(e, path))?;
    Ok(manifest)
}

/// Loads every layer referenced by a manifest together with its labels.
pub fn load_run(manifest_path: impl AsRef<Path>) -> Result<LayerFeatureSet> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));

    let labels_path = base.join(&manifest.labels_file);
    let raw = read_label_file(&labels_path)?;
    let labels = LabelVector::new(raw, manifest.n_classes).map_err(|e| with_path(e, &labels_path))?;

    let layers = manifest
        .layers
        .par_iter()
        .map(|entry| {
            let m = read_feature_matrix(base.join(&entry.file)).map_err(|e| e.in_layer(&entry.name))?;
            if m.n_samples() != labels.len() {
                return Err(Error::Shape(format!(
                    "{} has {} samples but the run has {} labels",
                    entry.file.display(),
                    m.n_samples(),
                    labels.len()
                ))
                .in_layer(&entry.name));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;

    LayerFeatureSet::new(manifest, layers, labels)
}

/// Writes a complete run directory: one tensor per layer, labels and
/// `manifest.json`. Returns the manifest path.
pub fn write_run(set: &LayerFeatureSet, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (entry, m) in set.manifest.layers.iter().zip(&set.layers) {
        write_feature_matrix(m, dir.join(&entry.file))?;
    }
    write_labels(&set.labels, dir.join(&set.manifest.labels_file))?;
    let manifest_path = dir.join("manifest.json");
    let mut text =
        serde_json::to_string_pretty(&set.manifest).map_err(|e| Error::Format(format!("serializing manifest: {e}")))?;
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn small_matrix_round_trip() {
        let dir = tmp();
        let p = dir.path().join("m.npy");
        let m = FeatureMatrix::from_rows(&[vec![1., 2., 3.], vec![4., 5., 6.]]).unwrap();
        write_feature_matrix(&m, &p).unwrap();
        let back = read_feature_matrix(&p).unwrap();
        assert_eq!(back.n_samples(), 2);
        assert_eq!(back.n_features(), 3);
        assert_eq!(back.as_slice(), &[1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn rank_four_tensor_flattens_channel_major() {
        let (n, c, w, h) = (2, 3, 2, 2);
        // value encodes its own (n, c, w, h) index
        let mut data = Vec::new();
        for ni in 0..n {
            for ci in 0..c {
                for wi in 0..w {
                    for hi in 0..h {
                        data.push((ni * 1000 + ci * 100 + wi * 10 + hi) as f64);
                    }
                }
            }
        }
        let dir = tmp();
        let p = dir.path().join("t.npy");
        let mut f = File::create(&p).unwrap();
        npy::write_npy(&mut f, &[n, c, w, h], &NpyData::F64(data)).unwrap();
        drop(f);

        let m = read_feature_matrix(&p).unwrap();
        assert_eq!((m.n_samples(), m.n_features()), (2, 12));
        for ni in 0..n {
            for ci in 0..c {
                for wi in 0..w {
                    for hi in 0..h {
                        let col = ci * w * h + wi * h + hi;
                        assert_eq!(m.row(ni)[col], (ni * 1000 + ci * 100 + wi * 10 + hi) as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn nan_is_data_error() {
        let dir = tmp();
        let p = dir.path().join("nan.npy");
        let mut f = File::create(&p).unwrap();
        npy::write_npy(&mut f, &[2, 2], &NpyData::F32(vec![1.0, f32::NAN, 0.0, 1.0])).unwrap();
        drop(f);
        assert!(matches!(read_feature_matrix(&p), Err(Error::Data(_))));
    }

    #[test]
    fn rank_one_is_shape_error() {
        let dir = tmp();
        let p = dir.path().join("v.npy");
        let mut f = File::create(&p).unwrap();
        npy::write_npy(&mut f, &[4], &NpyData::F64(vec![1.0; 4])).unwrap();
        drop(f);
        assert!(matches!(read_feature_matrix(&p), Err(Error::Shape(_))));
    }

    #[test]
    fn denormals_survive_round_trip() {
        let dir = tmp();
        let tiny = f64::from_bits(1); // smallest positive subnormal
        let m = FeatureMatrix::new(vec![tiny, -tiny, 1e-310, 0.0, -0.0, 2.5e-320], 2, 3).unwrap();
        let p = dir.path().join("d.npy");
        write_feature_matrix(&m, &p).unwrap();
        let back = read_feature_matrix(&p).unwrap();
        let bits = |x: &FeatureMatrix| x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m), bits(&back));

        let small = f32::from_bits(3);
        let m32 = FeatureMatrix::from_f32(vec![small, 1.0, -small, 0.5], 2, 2).unwrap();
        let p32 = dir.path().join("d32.npy");
        write_feature_matrix(&m32, &p32).unwrap();
        let back32 = read_feature_matrix(&p32).unwrap();
        assert_eq!(back32.dtype(), ElementType::F32);
        assert_eq!(bits(&m32), bits(&back32));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let m = FeatureMatrix::new(vec![1.0; 4], 2, 2).unwrap();
        let err = write_feature_matrix(&m, "/nonexistent-dir/xyz/m.npy").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn labels_cases() {
        let dir = tmp();
        let p = dir.path().join("l.npy");
        let write = |v: Vec<i64>| {
            let mut f = File::create(&p).unwrap();
            npy::write_npy(&mut f, &[v.len()], &NpyData::I64(v)).unwrap();
        };

        write(vec![0, 1, 0, 1]);
        let l = read_labels(&p, 4).unwrap();
        assert_eq!(l.n_classes(), 2);

        write(vec![0, 0, 0, 0]);
        assert!(matches!(read_labels(&p, 4), Err(Error::Data(_))));

        write(vec![0, 1, 0]);
        assert!(matches!(read_labels(&p, 4), Err(Error::Shape(_))));

        write(vec![0, -1, 1, 0]);
        assert!(matches!(read_labels(&p, 4), Err(Error::Data(m)) if m.contains("negative")));
    }

    #[test]
    fn balanced_prefix_takes_first_rows_per_class() {
        let l = LabelVector::new(vec![0, 1, 1, 0, 2, 0, 1, 2, 0, 0], 3).unwrap();
        assert_eq!(l.balanced_prefix(6).unwrap(), vec![0, 1, 2, 3, 4, 7]);
        // 7 = 3 + 2 + 2, extra row to class 0
        assert_eq!(l.balanced_prefix(7).unwrap(), vec![0, 1, 2, 3, 4, 5, 7]);
        assert_eq!(l.balanced_prefix(10).unwrap(), (0..10).collect::<Vec<_>>());
        assert!(matches!(l.balanced_prefix(11), Err(Error::Parameter(_))));
        // class 2 has only 2 rows
        assert!(matches!(l.balanced_prefix(9), Err(Error::Parameter(_))));
    }

    #[test]
    fn manifest_json_uses_external_field_names() {
        let json = r#"{"model": "vgg16", "dataset": "cifar10", "num_classes": 10,
            "labels_file": "labels.npy",
            "layers": [{"name": "l0", "file": "l0.npy", "repeatable": false},
                       {"name": "l1", "file": "l1.npy", "repeatable": true, "stage": "conv4_x"}]}"#;
        let m: RunManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.model_name, "vgg16");
        assert_eq!(m.n_classes, 10);
        assert_eq!(m.layers[1].stage.as_deref(), Some("conv4_x"));
        let back = serde_json::to_value(&m).unwrap();
        assert_eq!(back["num_classes"], 10);
        assert!(back["layers"][0].get("stage").is_none());
    }
}
