//! Acceptance suite. Each criterion prints one PASS/FAIL line with its timing;
//! the process exits non-zero if any criterion fails.

// `!(a < b)` is deliberate: NaN must fail a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use modgraph::analysis::{detect_segments, difference_matrix, prune_plan, ModularityCurve};
use modgraph::cli::{cmd_analyze, AnalyzeArgs, GraphArgs};
use modgraph::graph::{knn_select, symmetrize};
use modgraph::synth::{generate, generate_plateau_fixture, mark_repeatable, SynthSpec};
use modgraph::tensor_io::npy::{read_npy, write_npy, NpyData};
use modgraph::tensor_io::{read_feature_matrix, write_feature_matrix, write_run};
use modgraph::{
    cosine_similarity, modularity, modularity_bruteforce, pearson_similarity, run_curve, FeatureMatrix, Metric,
    Partition, SnapshotGraph,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn q(g: &SnapshotGraph, p: &Partition) -> f64 {
    modularity(g, p).expect("modularity").q
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> SnapshotGraph {
    let p: f64 = rng.random_range(0.1..0.9);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j, rng.random_range(0.01..1.0)));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1, 1.0));
    }
    SnapshotGraph::from_edges(n, &edges).unwrap()
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Partition {
    let c = rng.random_range(2..=6);
    Partition::new((0..n).map(|_| rng.random_range(0..c)).collect(), c).unwrap()
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, m: usize) -> FeatureMatrix {
    let data = (0..n * m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    FeatureMatrix::new(data, n, m).unwrap()
}

fn random_curve(rng: &mut ChaCha8Rng) -> ModularityCurve {
    let len = rng.random_range(2..=16);
    let mut v = 0.0;
    let mut values = vec![v];
    for _ in 1..len {
        v += match rng.random_range(0..4) {
            0 => 0.0,
            1 => rng.random_range(-0.004..0.004),
            2 => rng.random_range(0.01..0.05),
            _ => rng.random_range(-0.05..-0.01),
        };
        values.push(v);
    }
    ModularityCurve::unnamed(values).unwrap()
}

fn permuted(g: &SnapshotGraph, perm: &[usize]) -> SnapshotGraph {
    let edges: Vec<_> = g.edges().map(|(i, j, w)| (perm[i], perm[j], w)).collect();
    SnapshotGraph::from_edges(g.n(), &edges).unwrap()
}

fn fmt_curve(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn c1_anchors() -> Outcome {
    let tri = SnapshotGraph::from_edges(
        6,
        &[(0, 1, 1.), (1, 2, 1.), (0, 2, 1.), (3, 4, 1.), (4, 5, 1.), (3, 5, 1.)],
    )
    .unwrap();
    let two = Partition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
    let got = q(&tri, &two);
    ensure!((got - 0.5).abs() < 1e-12, "two triangles: Q = {got}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.random_range(2..40);
        let g = random_graph(&mut rng, n);
        let got = q(&g, &Partition::new(vec![0; n], 1).unwrap());
        ensure!(got.abs() < 1e-12, "single community: Q = {got}");
    }

    for c in 1..=8usize {
        for size in [2usize, 3, 5] {
            let mut edges = Vec::new();
            for b in 0..c {
                for i in 0..size {
                    for j in i + 1..size {
                        edges.push((b * size + i, b * size + j, 1.0));
                    }
                }
            }
            let g = SnapshotGraph::from_edges(c * size, &edges).unwrap();
            let p = Partition::new((0..c * size).map(|i| i / size).collect(), c).unwrap();
            let got = q(&g, &p);
            let want = 1.0 - 1.0 / c as f64;
            ensure!(
                (got - want).abs() < 1e-12,
                "{c} cliques of {size}: Q = {got}, want {want}"
            );
        }
    }

    let path = SnapshotGraph::from_edges(4, &[(0, 1, 1.), (1, 2, 1.), (2, 3, 1.)]).unwrap();
    let got = q(&path, &Partition::new(vec![0, 0, 1, 1], 2).unwrap());
    ensure!((got - 1.0 / 6.0).abs() < 1e-12, "4-path: Q = {got}");
    Ok("triangles 0.5, single community 0, C cliques 1-1/C, path 1/6".into())
}

fn c2_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let n = rng.random_range(2..=64);
        let g = random_graph(&mut rng, n);
        let p = random_partition(&mut rng, n);
        let fast = q(&g, &p);
        let slow = modularity_bruteforce(&g, &p).unwrap().q;
        let d = (fast - slow).abs();
        worst = worst.max(d);
        ensure!(d < 1e-12, "graph {t}: fast {fast} vs brute force {slow}");
    }
    Ok(format!("1000 graphs, max |fast - brute| = {worst:.2e}"))
}

fn c3_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let n = rng.random_range(2..=64);
        let g = random_graph(&mut rng, n);
        let p = random_partition(&mut rng, n);
        let base = q(&g, &p);
        for c in [1e-3, 7.3, 1e4] {
            let d = (q(&g.scaled(c), &p) - base).abs();
            worst = worst.max(d);
            ensure!(d < 1e-12, "instance {t}: scale {c} moved Q by {d}");
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut comm = vec![0; n];
        for i in 0..n {
            comm[perm[i]] = p.community(i);
        }
        let pp = Partition::new(comm, p.n_communities()).unwrap();
        let d = (q(&permuted(&g, &perm), &pp) - base).abs();
        worst = worst.max(d);
        ensure!(d < 1e-12, "instance {t}: permutation moved Q by {d}");
    }
    for t in 0..100 {
        let curve = random_curve(&mut rng);
        let c: f64 = rng.random_range(-0.15..0.15);
        let shifted = ModularityCurve::unnamed(curve.values.iter().map(|v| v + c).collect()).unwrap();
        let a = detect_segments(&curve, 0.005).unwrap();
        let b = detect_segments(&shifted, 0.005).unwrap();
        ensure!(
            a.plateaus == b.plateaus && a.descents == b.descents,
            "curve {t}: shift {c} changed segments {a:?} -> {b:?}"
        );
    }
    Ok(format!(
        "scale, permutation, shift on 100 instances each, max dQ = {worst:.2e}"
    ))
}

fn c4_similarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_p, mut worst_s) = (0.0f64, 0.0f64);
    for t in 0..100 {
        let n = rng.random_range(2..=24);
        let m = rng.random_range(2..=40);
        let f = random_features(&mut rng, n, m);
        let centered: Vec<f64> = f
            .rows()
            .flat_map(|r| {
                let mean = r.iter().sum::<f64>() / m as f64;
                r.iter().map(move |v| v - mean)
            })
            .collect();
        let pearson = pearson_similarity(&f).unwrap();
        let cos_c = cosine_similarity(&FeatureMatrix::new(centered, n, m).unwrap()).unwrap();
        let cos = cosine_similarity(&f).unwrap();
        let scales: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let scaled: Vec<f64> = f
            .rows()
            .zip(&scales)
            .flat_map(|(r, s)| r.iter().map(move |v| v * s))
            .collect();
        let cos_s = cosine_similarity(&FeatureMatrix::new(scaled, n, m).unwrap()).unwrap();
        for i in 0..n {
            ensure!(
                pearson.get(i, i) == 1.0 && cos.get(i, i) == 1.0,
                "matrix {t}: S_ii != 1 at {i}"
            );
            for j in 0..n {
                let dp = (pearson.get(i, j) - cos_c.get(i, j)).abs();
                let ds = (cos_s.get(i, j) - cos.get(i, j)).abs();
                worst_p = worst_p.max(dp);
                worst_s = worst_s.max(ds);
                ensure!(dp < 1e-10, "matrix {t}: pearson vs centered cosine differ by {dp}");
                ensure!(ds < 1e-12, "matrix {t}: row scaling moved cosine by {ds}");
            }
        }
    }
    Ok(format!(
        "100 matrices, pearson gap {worst_p:.2e}, scaling gap {worst_s:.2e}"
    ))
}

fn c5_rising() -> Outcome {
    let mut finals = Vec::new();
    for seed in 0..5 {
        let spec = SynthSpec::linear(500, 10, 256, 10, 0.0, 4.0, 0.5, seed);
        let (_, curve) = run_curve(&generate(&spec).unwrap(), Metric::Cosine, 3).unwrap();
        let v = &curve.values;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                ensure!(
                    v[j] >= v[i] - 0.02,
                    "seed {seed}: M[{j}] = {} < M[{i}] - 0.02 ({})",
                    v[j],
                    fmt_curve(v)
                );
            }
        }
        let last = *v.last().unwrap();
        ensure!(last > 0.5, "seed {seed}: final Q {last} <= 0.5");
        finals.push(format!("{last:.3}"));
    }
    Ok(format!("5 seeds non-decreasing, final Q {}", finals.join(", ")))
}

fn c6_flat() -> Outcome {
    let seeds = 20;
    let mut sum_abs = [0.0; 10];
    for seed in 0..seeds {
        let spec = SynthSpec::linear(500, 10, 256, 10, 0.0, 0.0, 0.5, seed);
        let (_, curve) = run_curve(&generate(&spec).unwrap(), Metric::Cosine, 3).unwrap();
        for (s, v) in sum_abs.iter_mut().zip(&curve.values) {
            *s += v.abs();
        }
    }
    let mean: Vec<f64> = sum_abs.iter().map(|s| s / seeds as f64).collect();
    let worst = mean.iter().copied().fold(0.0, f64::max);
    ensure!(worst <= 0.05, "mean |M| per layer {}", fmt_curve(&mean));
    Ok(format!("20 seeds, max per-layer mean |M| = {worst:.4}"))
}

fn c7_plateau() -> Outcome {
    for seed in 0..5 {
        let spec = SynthSpec::linear(500, 10, 256, 8, 0.0, 4.0, 0.5, seed);
        let mut set = generate_plateau_fixture(&spec, 3..=5).unwrap();
        mark_repeatable(&mut set, 3..=5);
        let (_, curve) = run_curve(&set, Metric::Cosine, 3).unwrap();
        let seg = detect_segments(&curve, 0.005).unwrap();
        ensure!(
            seg.plateaus == vec![(3, 5)],
            "seed {seed}: plateaus {:?} on curve {}",
            seg.plateaus,
            fmt_curve(&curve.values)
        );
        let plan = prune_plan(&curve, &seg, &set.manifest).unwrap();
        let eligible: Vec<usize> = plan.eligible().map(|c| c.layer).collect();
        ensure!(eligible == vec![4, 5], "seed {seed}: eligible layers {eligible:?}");
    }
    Ok("plateau [3,5] on 5/5 seeds, layers 4,5 eligible".into())
}

fn c8_k_insensitivity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let spec = SynthSpec::linear(500, 10, 256, 10, 3.0, 6.0, 0.5, seed);
        let set = generate(&spec).unwrap();
        let curves: Vec<Vec<f64>> = [3, 5, 7, 9, 11]
            .iter()
            .map(|&k| run_curve(&set, Metric::Cosine, k).unwrap().1.values)
            .collect();
        for l in 0..10 {
            let col = curves.iter().map(|c| c[l]);
            let gap = col.clone().fold(f64::MIN, f64::max) - col.fold(f64::MAX, f64::min);
            worst = worst.max(gap);
            ensure!(gap < 0.1, "seed {seed}, layer {l}: gap {gap}");
        }
    }
    Ok(format!("k in 3..11 on 3 seeds, max gap {worst:.4}"))
}

fn c9_graph_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in 0..200 {
        let n = rng.random_range(2..=40);
        let k = rng.random_range(1..n);
        let m = rng.random_range(1..=12);
        let f = random_features(&mut rng, n, m);
        let sim = cosine_similarity(&f).unwrap();
        let d = knn_select(&sim, k).unwrap();
        for (i, row) in d.neighbors.iter().enumerate() {
            ensure!(
                row.len() == k.min(n - 1),
                "instance {t}: node {i} has out-degree {}",
                row.len()
            );
            ensure!(row.iter().all(|&(j, _)| j != i), "instance {t}: self loop at {i}");
        }
        let dense = symmetrize(&d, 0).to_dense();
        for i in 0..n {
            ensure!(dense[i * n + i] == 0.0, "instance {t}: diagonal at {i}");
            for j in 0..n {
                ensure!(
                    dense[i * n + j] == dense[j * n + i],
                    "instance {t}: asymmetry at ({i},{j})"
                );
            }
        }
    }
    // Nodes 1, 2, 3 are equally similar to node 0.
    let f = FeatureMatrix::from_rows(&[
        vec![1., 0., 0.],
        vec![1., 1., 0.],
        vec![1., 0., 1.],
        vec![1., 0., -1.],
        vec![-1., 0., 0.],
    ])
    .unwrap();
    let d = knn_select(&cosine_similarity(&f).unwrap(), 2).unwrap();
    let picks: Vec<usize> = d.neighbors[0].iter().map(|&(j, _)| j).collect();
    ensure!(picks == vec![1, 2], "tie fixture picked {picks:?}");
    Ok("200 random graphs, tie fixture picks [1, 2]".into())
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn c10_format_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let specials64 = [0.0, -0.0, f64::MIN_POSITIVE, 5e-324, f64::MAX, -1.5e-310];
    let mut v64: Vec<f64> = (0..60).map(|_| rng.sample::<f64, _>(StandardNormal) * 1e3).collect();
    v64[..specials64.len()].copy_from_slice(&specials64);
    let specials32 = [0.0f32, -0.0, f32::MIN_POSITIVE, 1e-45, f32::MAX, -3e-39];
    let mut v32: Vec<f32> = (0..60).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    v32[..specials32.len()].copy_from_slice(&specials32);

    for (name, m) in [
        ("f64", FeatureMatrix::new(v64.clone(), 6, 10).unwrap()),
        ("f32", FeatureMatrix::from_f32(v32.clone(), 6, 10).unwrap()),
    ] {
        let path = tmp.path().join(format!("{name}.npy"));
        write_feature_matrix(&m, &path).map_err(|e| e.to_string())?;
        let back = read_feature_matrix(&path).map_err(|e| e.to_string())?;
        ensure!(back.dtype() == m.dtype(), "{name}: dtype changed");
        let same = back
            .as_slice()
            .iter()
            .zip(m.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(same, "{name}: values not bit-identical");
    }
    for data in [NpyData::F64(v64), NpyData::F32(v32)] {
        let mut buf = Vec::new();
        write_npy(&mut buf, &[3, 4, 5], &data).unwrap();
        ensure!(
            buf.len() % 64 == (data.len() * data.dtype().size()) % 64,
            "header not 64-aligned"
        );
        let back = read_npy(&mut buf.as_slice()).map_err(|e| e.to_string())?;
        let same = match (&back.data, &data) {
            (NpyData::F64(a), NpyData::F64(b)) => a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            (NpyData::F32(a), NpyData::F32(b)) => a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            _ => false,
        };
        ensure!(same && back.shape == vec![3, 4, 5], "raw npy round trip differs");
    }

    let spec = SynthSpec::linear(120, 6, 32, 5, 0.0, 3.0, 0.5, 7);
    let manifest = write_run(&generate(&spec).unwrap(), tmp.path().join("run")).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, threads) in [1, 4, 1].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let args = AnalyzeArgs {
            graph: GraphArgs {
                manifest: manifest.clone(),
                k: 5,
                metric: "cosine".into(),
            },
            epsilon: 0.005,
            out: out.clone(),
            format: "json,csv,svg".into(),
            edges: true,
            dump_similarity: false,
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| cmd_analyze(&args)).map_err(|e| e.to_string())?;
        outputs.push(dir_bytes(&out));
    }
    ensure!(outputs[0].contains_key("curve.svg"), "no SVG written");
    ensure!(
        outputs[0] == outputs[1] && outputs[1] == outputs[2],
        "analyze outputs differ between runs"
    );
    Ok(format!(
        "f32/f64 bit-exact, {} analyze outputs byte-identical over 3 runs",
        outputs[0].len()
    ))
}

fn c11_difference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..100 {
        let len = rng.random_range(1..=40);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-0.5..1.0)).collect();
        let d = difference_matrix(&ModularityCurve::unnamed(values.clone()).unwrap()).unwrap();
        for i in 0..len {
            ensure!(d.get(i, i) == 0.0, "curve {t}: D[{i},{i}] != 0");
            for j in 0..len {
                ensure!(d.get(i, j) == d.get(j, i), "curve {t}: asymmetric at ({i},{j})");
                ensure!(
                    d.get(i, j) == (values[i] - values[j]).abs(),
                    "curve {t}: D[{i},{j}] wrong"
                );
            }
        }
    }
    Ok("100 curves exact".into())
}

fn main() {
    type Criterion = (u32, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "exact modularity anchors", 1, c1_anchors),
        (2, "fast vs brute-force modularity", 30, c2_oracle),
        (3, "scale, permutation and shift invariance", 10, c3_invariance),
        (4, "similarity identities", 10, c4_similarity),
        (5, "rising curve on separating synth runs", 60, c5_rising),
        (6, "flat curve without class signal", 120, c6_flat),
        (7, "plateau localization and prune eligibility", 60, c7_plateau),
        (8, "k-insensitivity on well-separated runs", 120, c8_k_insensitivity),
        (9, "k-NN graph contracts", 5, c9_graph_contracts),
        (10, "tensor format and output determinism", 10, c10_format_determinism),
        (11, "difference matrix exactness", 1, c11_difference),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > Duration::from_secs(limit) => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit}s"))
            }
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  criterion {id:>2}: {name} ({detail}) [{elapsed:.2?} / {limit}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {id:>2}: {name}: {why} [{elapsed:.2?} / {limit}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
