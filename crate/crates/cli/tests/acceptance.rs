//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xai_core::counterfactual::{mace_cf, wachter_ce, CfProblem, MaceConfig, WachterConfig};
use xai_core::data::{Cell, Row, TabularBatch, TabularSchema};
use xai_core::fixtures::{income_batch, spiky_series, IncomeRule};
use xai_core::global::{ale, morris, pdp};
use xai_core::local::{integrated_gradients, kernel_shap, lime_explain, LimeConfig, ShapConfig};
use xai_core::models::{
    fit_detector, spawn_external, train_builtin, BuiltinKind, FnModel, LinearModel, MlpModel, ModelHandle, ModelSpec,
    Targets, Task, TrainConfig,
};
use xai_core::pipeline::Pipeline;
use xai_core::preprocessing::{FittedTransform, TransformConfig};
use xai_core::stats::argmax;
use xai_core::timeseries::{segments, ts_counterfactual, ts_shap_detector, TsCfConfig, TsShapConfig};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

fn identity_pipe(d: usize, handle: ModelHandle) -> Pipeline {
    let schema = TabularSchema::continuous(&names(d)).unwrap();
    Pipeline::new(FittedTransform::identity(&schema).unwrap(), handle).unwrap()
}

fn num(v: &[f64]) -> Row {
    v.iter().map(|&x| Cell::Num(x)).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Shapley values by enumerating every coalition. `v[mask]` is the value of
/// the coalition whose members are the set bits of `mask`.
fn shapley_from_values(v: &[f64], d: usize) -> Vec<f64> {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..d)
        .map(|i| {
            (0..1usize << d)
                .filter(|m| m & (1 << i) == 0)
                .map(|m| {
                    let s = m.count_ones() as usize;
                    fact(s) * fact(d - s - 1) / fact(d) * (v[m | (1 << i)] - v[m])
                })
                .sum()
        })
        .collect()
}

/// Brute-force interventional Shapley values of output `k`.
fn brute_force_shap(handle: &ModelHandle, x: &[f64], background: &[Vec<f64>], k: usize) -> Vec<f64> {
    let d = x.len();
    let v: Vec<f64> = (0..1usize << d)
        .map(|m| {
            let rows: Vec<Vec<f64>> = background
                .iter()
                .map(|b| (0..d).map(|j| if m & (1 << j) != 0 { x[j] } else { b[j] }).collect())
                .collect();
            let preds = handle.predict(&rows).unwrap();
            preds.iter().map(|p| p[k]).sum::<f64>() / rows.len() as f64
        })
        .collect();
    shapley_from_values(&v, d)
}

fn c1_exact_shapley_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for t in 0..50u64 {
        let d = 2 + (t as usize % 7);
        let handle = match t % 3 {
            0 => {
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                ModelSpec::Linear(LinearModel::new(vec![w], vec![rng.random_range(-1.0..1.0)]).unwrap()).into_handle()
            }
            1 => {
                let x = random_matrix(&mut rng, 60, d);
                let y: Vec<f64> = x.iter().map(|r| r[0].sin() + r[d - 1] * r[0] + r.iter().sum::<f64>()).collect();
                let cfg = TrainConfig { seed: t, max_depth: 4, ..Default::default() };
                train_builtin(BuiltinKind::Tree, &x, &Targets::Values(y), &cfg).unwrap()
            }
            _ => ModelSpec::Mlp(MlpModel::random(&[d, 6, 1], Task::Regression, t)).into_handle(),
        };
        let n_bg = 1 + (t as usize * 5) % 16;
        let bg = random_matrix(&mut rng, n_bg, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let oracle = brute_force_shap(&handle, &x, &bg, 0);
        let pipe = identity_pipe(d, handle);
        let background = TabularBatch::from_matrix(&names(d), &bg).unwrap();
        let got = kernel_shap(&pipe, &background, &num(&x), &ShapConfig::default(), t).map_err(|e| e.to_string())?;
        for (j, (g, o)) in got.scores().iter().zip(&oracle).enumerate() {
            ensure!(close(*g, *o, 1e-6), "model {t} (d={d}) feature {j}: kernel {g} vs brute force {o}");
        }
    }
    let took = start.elapsed();
    ensure!(took <= Duration::from_secs(60), "took {took:?}");
    Ok(())
}

fn c2_shap_axioms() -> Check {
    // Symmetric in x0 and x1, x3 is a dummy.
    let f = |x: &[f64]| vec![(x[0] + x[1]).powi(2) + 3.0 * x[2] + (x[0] * x[1]).sin()];
    let handle = FnModel::new(Some(4), 1, f).handle(Task::Regression);
    let pipe = identity_pipe(4, handle);
    let mut bg = Vec::new();
    for (a, b, c, e) in [(0.1, -0.7, 0.3, 1.0), (1.2, 0.4, -0.5, -2.0), (-0.3, 0.9, 0.0, 0.5)] {
        bg.push(vec![a, b, c, e]);
        bg.push(vec![b, a, c, -e]);
    }
    let background = TabularBatch::from_matrix(&names(4), &bg).unwrap();
    let x = [0.8, 0.8, -1.1, 3.0];
    let attr = kernel_shap(&pipe, &background, &num(&x), &ShapConfig::default(), 0).map_err(|e| e.to_string())?;
    let phi = attr.scores();
    let base = attr.base_value.ok_or("no base value")?;
    let fx = f(&x)[0];
    ensure!(close(base + phi.iter().sum::<f64>(), fx, 1e-6), "exact efficiency: {} vs {fx}", base + phi.iter().sum::<f64>());
    ensure!(close(phi[0], phi[1], 1e-6), "symmetry: {} vs {}", phi[0], phi[1]);
    ensure!(close(phi[3], 0.0, 1e-6), "dummy: {}", phi[3]);

    // 14 features: 2^14 coalitions exceed the default budget, so sampling.
    let d = 14;
    let g = |x: &[f64]| {
        let lin: f64 = x.iter().enumerate().map(|(j, v)| j as f64 * v).sum();
        vec![lin + x[0] * x[1] * x[2] + (x[3] - x[4]).powi(2) + x[5].tanh() * x[6]]
    };
    let pipe = identity_pipe(d, FnModel::new(Some(d), 1, g).handle(Task::Regression));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let background = TabularBatch::from_matrix(&names(d), &random_matrix(&mut rng, 30, d)).unwrap();
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let attr = kernel_shap(&pipe, &background, &num(&x), &ShapConfig::default(), 9).map_err(|e| e.to_string())?;
    let total = attr.base_value.ok_or("no base value")? + attr.total();
    ensure!(close(total, g(&x)[0], 1e-3), "sampled efficiency: {total} vs {}", g(&x)[0]);
    Ok(())
}

fn c3_integrated_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let models = [
        ModelSpec::Mlp(MlpModel::random(&[4, 8, 8, 1], Task::Regression, 1)).into_handle(),
        ModelSpec::Mlp(MlpModel::random(&[4, 6, 3], Task::Classification, 2)).into_handle(),
    ];
    for (mi, h) in models.iter().enumerate() {
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fx = h.predict(&[x.clone(), b.clone()]).unwrap();
            for k in 0..h.n_outputs() {
                let (scores, _) = integrated_gradients(h, &x, &b, 256, k).map_err(|e| e.to_string())?;
                let gap = scores.iter().sum::<f64>() - (fx[0][k] - fx[1][k]);
                ensure!(gap.abs() <= 1e-4, "MLP {mi} output {k}: completeness gap {gap}");
            }
        }
    }

    let w = vec![vec![1.5, -2.0, 0.25, 4.0, -0.5], vec![0.3, 0.0, -1.0, 2.0, 1.0]];
    let h = ModelSpec::Linear(LinearModel::new(w.clone(), vec![0.5, -0.5]).unwrap()).into_handle();
    for _ in 0..20 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        for (k, wk) in w.iter().enumerate() {
            let (scores, _) = integrated_gradients(&h, &x, &b, 256, k).map_err(|e| e.to_string())?;
            for j in 0..5 {
                let expect = wk[j] * (x[j] - b[j]);
                // Equal up to the rounding of averaging 256 identical gradients.
                ensure!(close(scores[j], expect, 1e-12 * expect.abs().max(1.0)), "linear: {} vs {expect}", scores[j]);
            }
        }
    }

    let step = 1e-5;
    for i in 0..100 {
        let h = &models[i % 2];
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        for k in 0..h.n_outputs() {
            let g = h.gradient(&x, k).map_err(|e| e.to_string())?;
            for j in 0..4 {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[j] += step;
                down[j] -= step;
                let p = h.predict(&[up, down]).unwrap();
                let fd = (p[0][k] - p[1][k]) / (2.0 * step);
                ensure!(close(g[j], fd, 1e-4), "point {i} output {k} input {j}: {} vs {fd}", g[j]);
            }
        }
    }
    Ok(())
}

fn c4_global_effects() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let weird = |x: &[f64]| vec![x[0] * x[1] + (3.0 * x[2]).sin() + if x[1] > 0.3 { 2.0 } else { -1.0 }, x[0].exp()];
    let tree_x = random_matrix(&mut rng, 80, 3);
    let tree_y: Vec<f64> = tree_x.iter().map(|r| r[0] * r[1] - r[2]).collect();
    let tree = train_builtin(BuiltinKind::Tree, &tree_x, &Targets::Values(tree_y), &TrainConfig::default()).unwrap();
    let models = [FnModel::new(Some(3), 2, weird).handle(Task::Regression), tree];
    for (mi, h) in models.iter().enumerate() {
        for n in [1, 7, 20] {
            let bg = random_matrix(&mut rng, n, 3);
            let pipe = identity_pipe(3, h.clone());
            let background = TabularBatch::from_matrix(&names(3), &bg).unwrap();
            for (fi, feature) in names(3).iter().enumerate() {
                let res = pdp(&pipe, &background, feature, 6, 0).map_err(|e| e.to_string())?;
                for (g, cell) in res.grid.iter().enumerate() {
                    let value = cell.as_f64().ok_or("non-numeric grid")?;
                    let mut sums = vec![0.0; h.n_outputs()];
                    for row in &bg {
                        let mut z = row.clone();
                        z[fi] = value;
                        for (s, p) in sums.iter_mut().zip(&h.predict(&[z]).unwrap()[0]) {
                            *s += p;
                        }
                    }
                    for (k, s) in sums.iter().enumerate() {
                        let oracle = s / n as f64;
                        ensure!(res.means[g][k] == oracle, "model {mi} n={n} {feature} grid {g}: {} vs {oracle}", res.means[g][k]);
                    }
                }
            }
        }
    }

    let w = [2.5, -1.25, 0.4];
    let lin = ModelSpec::Linear(LinearModel::new(vec![w.to_vec()], vec![1.0]).unwrap()).into_handle();
    let pipe = identity_pipe(3, lin);
    let bg = random_matrix(&mut rng, 300, 3);
    let background = TabularBatch::from_matrix(&names(3), &bg).unwrap();
    for (j, feature) in names(3).iter().enumerate() {
        let res = ale(&pipe, &background, feature, 8).map_err(|e| e.to_string())?;
        for e in 1..res.edges.len() {
            let slope = (res.effects[e][0] - res.effects[e - 1][0]) / (res.edges[e] - res.edges[e - 1]);
            ensure!(close(slope, w[j], 1e-6), "ALE {feature} bin {e}: slope {slope} vs {}", w[j]);
        }
    }

    let bounds = [(-1.0, 3.0), (0.0, 10.0), (5.0, 5.5)];
    let res = morris(&pipe, &bounds, 12, 4, 8).map_err(|e| e.to_string())?;
    for j in 0..3 {
        let expect = w[j] * (bounds[j].1 - bounds[j].0);
        ensure!(close(res.mu[j][0], expect, 1e-9 * expect.abs().max(1.0)), "Morris mu {j}: {} vs {expect}", res.mu[j][0]);
        ensure!(res.sigma[j][0] <= 1e-9, "Morris sigma {j}: {}", res.sigma[j][0]);
    }
    Ok(())
}

fn c5_lime_ranking() -> Check {
    let start = Instant::now();
    let std = [1.0, 2.0, 0.5, 3.0, 1.0];
    let w = [1.0, 0.8, 2.0, 0.1, -0.5];
    let expect = argmax(&std.iter().zip(&w).map(|(s, w)| (s * w as &f64).abs()).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let train: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            std.iter()
                .map(|s| {
                    // Sum of uniforms: roughly normal with the given std.
                    let u: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
                    u * s
                })
                .collect()
        })
        .collect();
    let train = TabularBatch::from_matrix(&names(5), &train).unwrap();
    let pipe = identity_pipe(5, ModelSpec::Linear(LinearModel::new(vec![w.to_vec()], vec![0.0]).unwrap()).into_handle());
    let instance = num(&std);
    let mut hits = 0;
    for seed in 0..10 {
        let attr = lime_explain(&pipe, &train, &instance, &LimeConfig::default(), seed).map_err(|e| e.to_string())?;
        let top = argmax(&attr.scores().iter().map(|s| s.abs()).collect::<Vec<_>>());
        hits += usize::from(top == expect);
    }
    ensure!(hits >= 9, "top feature matched in {hits}/10 seeds");
    let took = start.elapsed();
    ensure!(took <= Duration::from_secs(30), "took {took:?}");
    Ok(())
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn c6_counterfactuals() -> Check {
    // 1-D logistic: p(class 1) = sigmoid(w (x - c)).
    let (w, c) = (1.5, 0.7);
    let lin = LinearModel::new(vec![vec![0.0], vec![w]], vec![0.0, -w * c]).unwrap();
    let pipe = identity_pipe(1, ModelSpec::Logistic(lin).into_handle());
    let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.2 - 5.0]).collect();
    let train = TabularBatch::from_matrix(&names(1), &rows).unwrap();
    let x0 = -2.0;
    let problem = CfProblem::new(&pipe, &train, num(&[x0])).map_err(|e| e.to_string())?.with_target(Some(1));
    let std = {
        let v: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let crossing = (0..1_000_000).map(|i| x0 + i as f64 * 1e-5).find(|&x| sigmoid(w * (x - c)) > 0.5).ok_or("no crossing")?;
    let oracle = (crossing - x0) / std;
    let r = wachter_ce(&pipe, &problem, &WachterConfig::default()).map_err(|e| e.to_string())?;
    ensure!(r.found, "wachter found nothing");
    let got = r.examples[0].distance;
    ensure!((got - oracle).abs() / oracle <= 0.05, "wachter distance {got} vs grid oracle {oracle}");
    let mut examples = r.examples.clone();

    // Majority vote over three binary features.
    let rows: Vec<Vec<f64>> = (0..8).map(|i| (0..3).map(|j| f64::from((i >> j) & 1)).collect()).collect();
    let train = TabularBatch::from_matrix(&names(3), &rows).unwrap();
    let vote = |x: &[f64]| {
        let s: f64 = x.iter().sum();
        if s >= 2.0 { vec![0.0, 1.0] } else { vec![1.0 - s / 3.0, s / 3.0] }
    };
    let pipe3 = identity_pipe(3, FnModel::new(Some(3), 2, vote).handle(Task::Classification));
    let problem = CfProblem::new(&pipe3, &train, num(&[0.0, 0.0, 0.0])).map_err(|e| e.to_string())?.with_target(Some(1));
    let cfg = MaceConfig { n_examples: 3, ..Default::default() };
    let r = mace_cf(&pipe3, &train, &problem, &cfg).map_err(|e| e.to_string())?;
    let min_l0 = (0..8u32)
        .filter(|m| argmax(&vote(&(0..3).map(|j| f64::from((m >> j) & 1)).collect::<Vec<_>>())) == 1)
        .map(u32::count_ones)
        .min()
        .unwrap() as usize;
    ensure!(r.found, "mace found nothing");
    ensure!(min_l0 == 2, "exhaustive minimum is {min_l0}");
    ensure!(r.examples[0].changes.len() == min_l0, "mace changed {} features", r.examples[0].changes.len());

    for ex in r.examples.iter().filter(|e| e.valid) {
        let p = pipe3.predict_row(&ex.values).unwrap();
        ensure!(argmax(&p) == 1, "mace example does not re-verify: {p:?}");
    }
    examples.retain(|e| e.valid);
    for ex in &examples {
        let p = pipe.predict_row(&ex.values).unwrap();
        ensure!(argmax(&p) == 1, "wachter example does not re-verify: {p:?}");
    }
    Ok(())
}

fn c7_income_capital_gain() -> Check {
    let train = income_batch(500, 17, IncomeRule::CapitalGainOnly).unwrap();
    let transform = FittedTransform::fit(&TransformConfig::default(), &train).unwrap();
    let x = transform.transform(&train).unwrap();
    let t = train.schema().target_index().unwrap();
    let labels: Vec<usize> = train.column_cells(t).map(|c| usize::from(c.as_label() == Some(">50K"))).collect();
    let targets = Targets::Classes { labels, names: vec!["<=50K".into(), ">50K".into()] };
    let handle = train_builtin(BuiltinKind::Tree, &x, &targets, &TrainConfig::default()).unwrap();
    let pipe = Pipeline::new(transform, handle).unwrap();
    let negatives: Vec<&Row> =
        train.rows().iter().filter(|r| argmax(&pipe.predict_row(r).unwrap()) == 0).take(10).collect();
    ensure!(negatives.len() == 10, "too few negative rows");
    for row in negatives {
        let problem = CfProblem::new(&pipe, &train, row.clone()).map_err(|e| e.to_string())?.with_target(Some(1));
        let r = mace_cf(&pipe, &train, &problem, &MaceConfig::default()).map_err(|e| e.to_string())?;
        ensure!(r.found, "no counterfactual for {row:?}");
        let changed: Vec<&str> = r.examples[0].changes.iter().map(|c| c.feature.as_str()).collect();
        ensure!(changed == ["capital_gain"], "changed {changed:?} for {row:?}");
    }
    Ok(())
}

fn c8_timeseries() -> Check {
    let spike = 5;
    let (train, window) = spiky_series(300, 16, spike, 8).unwrap();
    let detector = fit_detector(&train, 3.0).map_err(|e| e.to_string())?;
    ensure!(detector.detect(&window).is_anomaly, "spiked window not flagged");
    let cfg = TsShapConfig { n_segments: 4, ..Default::default() };
    let attr = ts_shap_detector(&detector, &window, None, &cfg, 0).map_err(|e| e.to_string())?;
    ensure!(attr.exact, "4 segments must be solved exactly");
    let segs = segments(16, 4).unwrap();
    let v: Vec<f64> = (0..16usize)
        .map(|m| {
            let vals: Vec<f64> = window
                .values()
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let s = segs.iter().position(|&(a, b)| a <= i && i < b).unwrap();
                    if m & (1 << s) != 0 { x } else { detector.train_mean }
                })
                .collect();
            detector.score_values(&vals)
        })
        .collect();
    let oracle = shapley_from_values(&v, 4);
    for (s, (g, o)) in attr.scores.iter().zip(&oracle).enumerate() {
        ensure!(close(*g, *o, 1e-9), "segment {s}: {g} vs oracle {o}");
    }
    let top = argmax(&attr.scores.iter().map(|s| s.abs()).collect::<Vec<_>>());
    let (a, b) = segs[top];
    ensure!(a <= spike && spike < b, "largest |phi| on segment {top} = [{a}, {b})");
    let cf = ts_counterfactual(&detector, &window, None, &TsCfConfig::default()).map_err(|e| e.to_string())?;
    ensure!(cf.valid && !detector.is_anomalous(&cf.modified), "repaired window still anomalous");
    Ok(())
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn xai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xai")).args(args).env_remove("XAI_SEED").output().expect("run xai")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_ok(args: &[&str]) -> Check {
    let out = xai(args);
    ensure!(out.status.code() == Some(0), "xai {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn train_model(dir: &Path) -> Result<PathBuf, String> {
    let model = dir.join("model.json");
    let (data, schema) = (fixtures().join("income.csv"), fixtures().join("income.schema.json"));
    run_ok(&["train", "--kind", "tree", "--data", path(&data), "--schema", path(&schema), "--target", "income", "--out", path(&model)])?;
    Ok(model)
}

fn explain_args<'a>(data: &'a str, schema: &'a str, model: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["explain", "--data", data, "--schema", schema, "--model", model, "--explainers", "lime,shap,pdp,mace-greedy", "--out", out]
}

fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = train_model(dir.path())?;
    let (data, schema) = (fixtures().join("income.csv"), fixtures().join("income.schema.json"));
    let mut bundles = Vec::new();
    let mut reports = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("bundle{run}.json"));
        let mut args = explain_args(path(&data), path(&schema), path(&model), path(&out));
        args.extend(["--seed", "7", "--params", r#"{"shap": {"n_coalitions": 256}}"#]);
        run_ok(&args)?;
        let html = dir.path().join(format!("report{run}.html"));
        run_ok(&["report", path(&out), "--out", path(&html)])?;
        bundles.push(std::fs::read(&out).unwrap());
        reports.push(std::fs::read(&html).unwrap());
    }
    ensure!(bundles[0] == bundles[1], "bundles differ between equal-seed runs");
    ensure!(reports[0] == reports[1], "reports differ for identical bundles");
    Ok(())
}

fn c10_protocol() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("wire.log");
    let echo = env!("CARGO_BIN_EXE_xai-echo-model").to_string();
    let argv = vec![echo.clone(), "--log".into(), path(&log).into()];
    {
        let handle = spawn_external(&argv, Some(3)).map_err(|e| e.to_string())?;
        let x = vec![vec![1.5, 0.0, 2.0], vec![-4.0, 1.0, 1.0]];
        let y = handle.predict(&x).map_err(|e| e.to_string())?;
        ensure!(y == vec![vec![1.5], vec![-4.0]], "echo outputs {y:?}");
    }
    // Dropping the handle sends shutdown and reaps the child.
    let wire = std::fs::read_to_string(&log).map_err(|e| e.to_string())?;
    let types: Vec<String> = wire
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["type"].as_str().unwrap().to_string())
        .collect();
    ensure!(types == ["spec", "predict", "shutdown"], "wire messages {types:?}");

    let (data, schema) = (fixtures().join("income.csv"), fixtures().join("income.schema.json"));
    let cmd = format!("{echo} --malformed-at 2");
    let out = xai(&["explain", "--data", path(&data), "--schema", path(&schema), "--model-cmd", &cmd, "--explainers", "lime"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure!(out.status.code() == Some(4), "malformed reply exited {:?}: {stderr}", out.status.code());
    ensure!(stderr.contains("request id 2"), "offending id missing from diagnostics: {stderr}");
    Ok(())
}

fn c11_end_to_end() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = train_model(dir.path())?;
    let (data, schema) = (fixtures().join("income.csv"), fixtures().join("income.schema.json"));
    let bundle = dir.path().join("bundle.json");
    run_ok(&explain_args(path(&data), path(&schema), path(&model), path(&bundle)))?;
    let html = dir.path().join("report.html");
    run_ok(&["report", path(&bundle), "--out", path(&html)])?;
    let took = start.elapsed();
    ensure!(took <= Duration::from_secs(120), "took {took:?}");
    let report = std::fs::read_to_string(&html).map_err(|e| e.to_string())?;
    for name in ["lime", "shap", "pdp", "mace-greedy"] {
        let n = report.matches(&format!("data-explainer=\"{name}\"")).count();
        ensure!(n == 1, "{n} panels for {name}");
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("1 exact Shapley oracle equivalence", c1_exact_shapley_oracle),
        ("2 SHAP axioms", c2_shap_axioms),
        ("3 integrated gradients", c3_integrated_gradients),
        ("4 PDP, ALE and Morris oracles", c4_global_effects),
        ("5 LIME ranking sanity", c5_lime_ranking),
        ("6 counterfactual validity and sparsity", c6_counterfactuals),
        ("7 income counterfactual changes capital_gain only", c7_income_capital_gain),
        ("8 time-series spike attribution and repair", c8_timeseries),
        ("9 determinism", c9_determinism),
        ("10 subprocess protocol conformance", c10_protocol),
        ("11 end-to-end train, explain, report", c11_end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(()) => println!("PASS criterion {name} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
