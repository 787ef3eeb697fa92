//! Acceptance suite. Runs every criterion in sequence (timings are measured,
//! so nothing else should compete for the CPU), prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fedecg::balancing::{plan_balance, ros_rus, smote_rus, BalanceMode};
use fedecg::experiment::{run_on_table, synthesize, ExperimentConfig, PipelineConfig, Scenario};
use fedecg::features::{
    detect_r_peaks, dwt, energy_entropy, morphological_features, FeatureRegistry, RegistryConfig,
};
use fedecg::federation::{
    audit_partition, fedavg, iid_indices, noniid_indices, run_federation, train_centralized, ClientState,
    FederationConfig,
};
use fedecg::metrics::evaluate;
use fedecg::nn::{
    gradient_check, init_params, Architecture, DnnConfig, GradCheckConfig, LstmConfig, ModelConfig, ModelParams,
    ShapeTable, TrainConfig,
};
use fedecg::normalization::{fit_robust_scaler_with, ClientValues, Transcript};
use fedecg::pipeline::extract_table;
use fedecg::selection::{fit_gbdt, importance, GbdtConfig};
use fedecg::signal::{synth_with_profile, DiagnosisCode, RhythmProfile, SUPPORTED_CLASSES};
use fedecg::table::FeatureTable;

type Outcome = (bool, String);

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Array2<f64>, Vec<usize>) {
    let x: Array2<f64> = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    let y = (0..rows).map(|_| rng.random_range(0..27)).collect();
    (x, y)
}

fn c1_gradients() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = Vec::new();
    for (cfg, per_block) in [
        (ModelConfig::Dnn(DnnConfig::default()), Some(200)),
        (ModelConfig::Lstm(LstmConfig::default()), None),
    ] {
        let p = init_params(&cfg, 7).unwrap();
        let (x, y) = random_batch(&mut rng, 8, 120);
        let gc = GradCheckConfig { per_block, seed: 3, ..Default::default() };
        let r = gradient_check(&p, &cfg, x.view(), &y, &gc).unwrap();
        worst.push((cfg.architecture(), r.max_component_error()));
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = worst.iter().all(|(_, e)| *e < 1e-4) && secs < 60.0;
    let detail = worst.iter().map(|(a, e)| format!("{a} {e:.2e}")).collect::<Vec<_>>().join(", ");
    (ok, format!("gradient check max rel err {detail} (< 1e-4), {secs:.1} s (< 60 s)"))
}

/// Linear-interpolated quantile of the pooled sorted values.
fn pooled_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn c2_quantiles() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let registry = FeatureRegistry::from_names(&["rr_mean"]).unwrap();
    let eps = 2e-9;
    let mut worst = 0.0f64;
    let mut transcript_ok = true;
    let mut messages = 0;
    for _ in 0..200 {
        let n_clients = rng.random_range(1..=8);
        let scale = [0.01, 1.0, 50.0, 1000.0][rng.random_range(0..4)];
        let shift = rng.random_range(-100.0..100.0);
        let clients: Vec<Vec<f64>> = (0..n_clients)
            .map(|_| {
                let n = rng.random_range(1..=500);
                (0..n)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            (rng.random_range(0..5) as f64) * scale + shift
                        } else {
                            rng.random_range(-1.0..1.0) * scale + shift
                        }
                    })
                    .collect()
            })
            .collect();
        let oracles: Vec<ClientValues> = clients.iter().map(|c| ClientValues::single(c.clone())).collect();
        let mut log = Transcript::default();
        let s = fit_robust_scaler_with(&oracles, &registry, (-1.0, 1.0), eps, Some(&mut log)).unwrap();
        let mut pooled: Vec<f64> = clients.concat();
        pooled.sort_by(f64::total_cmp);
        let f = &s.scales()[0];
        for (got, q) in [(f.q25, 0.25), (f.median, 0.5), (f.q75, 0.75)] {
            worst = worst.max((got - pooled_quantile(&pooled, q)).abs());
        }
        let json = serde_json::to_value(&log).unwrap();
        for (k, msgs) in json["per_client"].as_array().unwrap().iter().enumerate() {
            for m in msgs.as_array().unwrap() {
                let keys: BTreeSet<&str> = m.as_object().unwrap().keys().map(String::as_str).collect();
                let count = m["count"].as_u64().unwrap_or(u64::MAX) as usize;
                transcript_ok &= keys == BTreeSet::from(["count", "threshold"]) && count <= clients[k].len();
                messages += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = worst <= 2.0 * eps && transcript_ok && secs < 30.0;
    (
        ok,
        format!(
            "federated quantiles: 200 federations, max |err| {worst:.2e} (<= {:.0e}), {messages} messages all (threshold, count): {transcript_ok}, {secs:.1} s (< 30 s)",
            2.0 * eps
        ),
    )
}

fn random_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize, classes: usize) -> FeatureTable {
    let labels: Vec<usize> = (0..rows).map(|i| i % classes).collect();
    let x = Array2::from_shape_fn((rows, cols), |(i, j)| {
        rng.random_range(-1.0..1.0) + if j % classes == labels[i] { 1.5 } else { 0.0 }
    });
    FeatureTable::new((0..rows).map(|i| format!("r{i}")).collect(), x, labels).unwrap()
}

fn c3_fedavg() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut centralized_ok = true;
    for model in [
        ModelConfig::Dnn(DnnConfig { input_dim: 10, hidden_layers: 2, hidden_units: 24, ..Default::default() }),
        ModelConfig::Lstm(LstmConfig { input_dim: 10, step_dim: 5, units: 6, ..Default::default() }),
    ] {
        let data = random_table(&mut rng, 90, 10, 3);
        let (val, test) = (random_table(&mut rng, 12, 10, 3), random_table(&mut rng, 12, 10, 3));
        for rounds in [1, 3] {
            let cfg = FederationConfig {
                clients: 1,
                max_rounds: rounds,
                patience: 0,
                k: 10,
                model,
                train: TrainConfig { epochs: 2, batch_size: 16, learning_rate: 5e-3, ..Default::default() },
                seed: 11,
                ..Default::default()
            };
            let mut clients = [ClientState::new(0, data.clone())];
            let h = run_federation(&cfg, &mut clients, &val, &test).unwrap();
            let central = train_centralized(&cfg, &data, rounds).unwrap();
            centralized_ok &= h.final_params.unwrap().to_blob() == central.to_blob();
        }
    }

    let vec_params = |v: &[f64]| {
        let mut s = ShapeTable::new(Architecture::Dnn, 1, 1);
        s.push("w", &[v.len()]);
        ModelParams::from_values(s, v.to_vec()).unwrap()
    };
    let examples_ok = fedavg(&[vec_params(&[0.0, 0.0]), vec_params(&[4.0, 8.0])], &[1, 3]).unwrap().values()
        == [3.0, 6.0]
        && fedavg(&[vec_params(&[1.0]), vec_params(&[2.0]), vec_params(&[3.0])], &[5, 5, 5]).unwrap().values()
            == [2.0];

    let params: Vec<ModelParams> = (0..8)
        .map(|_| vec_params(&(0..300).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()))
        .collect();
    let sizes = [40, 7, 40, 13, 7, 99, 40, 1];
    let base = fedavg(&params, &sizes).unwrap().to_blob();
    let mut order: Vec<usize> = (0..8).collect();
    let mut shuffles_ok = true;
    for _ in 0..100 {
        order.shuffle(&mut rng);
        let p: Vec<ModelParams> = order.iter().map(|&i| params[i].clone()).collect();
        let s: Vec<usize> = order.iter().map(|&i| sizes[i]).collect();
        shuffles_ok &= fedavg(&p, &s).unwrap().to_blob() == base;
    }
    (
        centralized_ok && examples_ok && shuffles_ok,
        format!(
            "FedAvg: one client bitwise = centralized: {centralized_ok}, weighted-mean examples exact: {examples_ok}, 100 shuffles invariant: {shuffles_ok}"
        ),
    )
}

fn labelled_table(counts: &[usize]) -> FeatureTable {
    let mut labels = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(c, n));
    }
    let x = Array2::from_shape_fn((labels.len(), 2), |(i, j)| (i * (j + 1)) as f64 * 0.01);
    FeatureTable::new((0..labels.len()).map(|i| format!("r{i}")).collect(), x, labels).unwrap()
}

fn c4_balancing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut targets_ok, mut spread_ok, mut tau_ok) = (true, true, true);
    let mut cases = 0;
    for trial in 0..60 {
        let classes = rng.random_range(2..=27);
        let counts: Vec<usize> = (0..classes)
            .map(|_| if rng.random_bool(0.15) { 0 } else { rng.random_range(1..150) })
            .collect();
        if counts.iter().all(|&n| n == 0) {
            continue;
        }
        let t = labelled_table(&counts);
        for beta in [0.0, 0.5, 1.0] {
            for mode in [BalanceMode::RosRus, BalanceMode::SmoteRus] {
                let plan = plan_balance(&t.class_counts(), beta, mode).unwrap();
                let out = match mode {
                    BalanceMode::RosRus => ros_rus(&t, &plan, trial).unwrap(),
                    BalanceMode::SmoteRus => smote_rus(&t, &plan, 5, trial).unwrap(),
                };
                targets_ok &= out.class_counts().to_vec() == plan.targets;
                if beta == 1.0 {
                    let present: Vec<usize> = plan.targets.iter().copied().filter(|&n| n > 0).collect();
                    spread_ok &= present.iter().max().unwrap() - present.iter().min().unwrap() <= 1;
                }
                cases += 1;
            }
        }
    }
    for _ in 0..200 {
        let a = rng.random_range(1..500usize);
        let b = rng.random_range(1..500usize);
        for beta in [0.0, 0.5, 1.0] {
            let plan = plan_balance(&[a, b], beta, BalanceMode::RosRus).unwrap();
            let tau = ((a.max(b) - a.min(b)) as f64 * beta).round() as usize;
            tau_ok &= plan.executed() == tau && plan.tau == tau;
            let out = ros_rus(&labelled_table(&[a, b]), &plan, 1).unwrap();
            let done = out.class_counts()[0].abs_diff(a) + out.class_counts()[1].abs_diff(b);
            tau_ok &= done == tau;
        }
    }
    (
        targets_ok && spread_ok && tau_ok,
        format!(
            "balancing: {cases} random plans hit T_c exactly: {targets_ok}, beta=1 max-min <= 1: {spread_ok}, two-class executed ops = tau (600 cases): {tau_ok}"
        ),
    )
}

fn c5_partitioning() -> Outcome {
    let n = 37_704;
    let weights: Vec<f64> = (0..27).map(|c| 0.8f64.powi(c)).collect();
    let total: f64 = weights.iter().sum();
    let mut labels = Vec::with_capacity(n);
    for (c, w) in weights.iter().enumerate() {
        let k = if c == 26 { n - labels.len() } else { (w / total * n as f64).round() as usize };
        labels.extend(std::iter::repeat_n(c, k));
    }
    let mut global = [0usize; 27];
    for &l in &labels {
        global[l] += 1;
    }

    let parts = iid_indices(&labels, 4, 5).unwrap();
    let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
    let mut max_dev = 0.0f64;
    for p in &parts {
        let mut h = [0usize; 27];
        for &r in p {
            h[labels[r]] += 1;
        }
        for c in 0..27 {
            max_dev = max_dev.max((h[c] as f64 - global[c] as f64 / 4.0).abs());
        }
    }
    let distinct: BTreeSet<usize> = parts.iter().flatten().copied().collect();
    let iid_ok = sizes == [9_426; 4] && max_dev <= 1.0 && distinct.len() == n;

    let parts = noniid_indices(n, 4, 5).unwrap();
    let audit = audit_partition(&labels, &parts);
    let nonidd_sizes = parts.iter().all(|p| p.len() == 9_426);
    let noniid_ok = nonidd_sizes && audit.max_rel_deviation > 0.2 && audit.unused_records >= 1;
    (
        iid_ok && noniid_ok,
        format!(
            "partitioning: IID sizes {sizes:?}, max per-class deviation {max_dev:.2} records (<= 1); Non-IID max relative deviation {:.1}% (> 20%), {} unused records (>= 1)",
            audit.max_rel_deviation * 100.0,
            audit.unused_records
        ),
    )
}

fn c6_metrics() -> Outcome {
    let m = evaluate(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
    let example_ok = (m.accuracy - 0.75).abs() < 1e-12 && (m.f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..300);
        let k = rng.random_range(1..=27);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let p: Vec<usize> = y
            .iter()
            .map(|&t| if rng.random_bool(0.6) { t } else { rng.random_range(0..k) })
            .collect();
        let b = evaluate(&y, &p).unwrap();
        worst = worst.max((b.accuracy - b.recall).abs());
    }
    (
        example_ok && worst < 1e-12,
        format!(
            "metrics: example accuracy {:.4} F1 {:.10} (0.7333333333 +/- 1e-9); micro identity over 1000 matrices max |acc - weighted recall| {worst:.1e}",
            m.accuracy, m.f1
        ),
    )
}

struct EndToEnd {
    table: FeatureTable,
    registry: FeatureRegistry,
    extraction: f64,
}

fn e2e_config(scenario: Scenario, clients: usize, parallel: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        scenario,
        clients,
        rounds: 10,
        seed: 2024,
        pipeline: PipelineConfig { k: 60, beta: 1.0, balancing: BalanceMode::RosRus, ..Default::default() },
        model: ModelConfig::Dnn(DnnConfig::default()),
        ..Default::default()
    };
    // every run goes the full ten rounds so late-round stability is observable
    cfg.federation.delta = 0.0;
    cfg.federation.parallel = parallel;
    cfg
}

fn build_e2e() -> EndToEnd {
    let t = Instant::now();
    let ds = synthesize(&SUPPORTED_CLASSES, 400, 257.0, 16.0, 2024).unwrap();
    let registry = FeatureRegistry::new(RegistryConfig::default());
    let table = extract_table(&ds, &registry, 257.0, 16.0).unwrap();
    EndToEnd { table, registry, extraction: t.elapsed().as_secs_f64() }
}

fn c7_end_to_end(e: &EndToEnd) -> Outcome {
    let t = Instant::now();
    let run = |s: Scenario, n: usize| run_on_table(&e2e_config(s, n, false), &e.table, &e.registry, n, 0.0).unwrap();
    let cl = run(Scenario::Cl, 1);
    let iid = run(Scenario::FlIid, 4);
    let non = run(Scenario::FlNonIid, 4);
    let total = e.extraction + t.elapsed().as_secs_f64();
    let (f_cl, f_iid, f_non) = (cl.history.test.f1, iid.history.test.f1, non.history.test.f1);
    let a = f_cl >= 0.85;
    let b = (f_iid - f_cl).abs() <= 0.10;
    let c = f_non <= f_iid + 0.02 && (f_non - f_cl).abs() <= 0.15;
    let mut late = 0.0f64;
    for o in [&cl, &iid, &non] {
        let r = &o.history.rounds;
        for i in 8..r.len() {
            late = late.max((r[i].f1 - r[i - 1].f1).abs());
        }
    }
    let d = late < 0.01 && [&cl, &iid, &non].iter().all(|o| o.history.rounds.len() == 10);
    let time_ok = total < 15.0 * 60.0;
    (
        a && b && c && d && time_ok,
        format!(
            "end-to-end: (a) CL F1 {f_cl:.4} (>= 0.85): {a}; (b) FL-IID F1 {f_iid:.4} within 0.10: {b}; (c) FL-NonIID F1 {f_non:.4}: {c}; (d) max val-F1 change after round 8 {late:.4} (< 0.01): {d}; {:.1} min (< 15)",
            total / 60.0
        ),
    )
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

fn c8_sweep(e: &EndToEnd) -> Outcome {
    let mut per_round = Vec::new();
    for n in [2, 4, 6, 8, 10] {
        let o = run_on_table(&e2e_config(Scenario::FlIid, n, true), &e.table, &e.registry, n, 0.0).unwrap();
        let mut t: Vec<f64> = o.history.rounds.iter().map(|r| r.parallel_seconds).collect();
        per_round.push((n, median(&mut t)));
    }
    let ok = per_round.windows(2).all(|w| w[1].1 <= w[0].1 * 1.10);
    let detail = per_round.iter().map(|(n, s)| format!("N={n}: {s:.3} s")).collect::<Vec<_>>().join(", ");
    (ok, format!("client sweep: per-round parallel time {detail} (non-increasing within 10%)"))
}

fn c9_features() -> Outcome {
    let constant = vec![3.7; 4096];
    let coeffs = dwt(&constant).unwrap();
    let max_detail = coeffs[1..].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let entropy = energy_entropy(&[1.0, -1.0, 1.0, 1.0]);

    let mut rr_ok = true;
    let mut rr_seen = Vec::new();
    for seed in 0..5 {
        let mut profile = RhythmProfile::sinus(60.0);
        profile.rate_spread = 0.0;
        let s = synth_with_profile(DiagnosisCode::NSR, &profile, seed, 257.0, 16.0).unwrap();
        let peaks = detect_r_peaks(s.recording.channel(1), 257.0).unwrap();
        let rr_mean = morphological_features(&s.recording, &peaks)[3];
        rr_ok &= (rr_mean - 1.0).abs() <= 0.05;
        rr_seen.push(rr_mean);
    }

    let mut names_ok = true;
    for cfg in [RegistryConfig { include_signal_stats: false }, RegistryConfig { include_signal_stats: true }] {
        let reg = FeatureRegistry::new(cfg);
        let names = reg.names();
        names_ok &= FeatureRegistry::from_names(&names).unwrap() == reg;
        names_ok &= names.iter().enumerate().all(|(i, n)| reg.index_of(n) == Some(i));
    }
    let ok = max_detail < 1e-9 && entropy == 2.0 && rr_ok && names_ok;
    let rr_worst = rr_seen.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    (
        ok,
        format!(
            "features: constant-signal max |detail| {max_detail:.1e} (< 1e-9); uniform entropy {entropy} (= 2.0); 60 bpm rr_mean max deviation {:.2}% (<= 5%); registry round-trip: {names_ok}",
            rr_worst * 100.0
        ),
    )
}

fn c10_selection() -> Outcome {
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cols = 25;
        let mut planted: Vec<usize> = (0..cols).collect();
        planted.shuffle(&mut rng);
        planted.truncate(3);
        let rows = 300;
        let x: Array2<f64> = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
        let y: Vec<usize> = (0..rows)
            .map(|i| {
                let v = [x[[i, planted[0]]], x[[i, planted[1]]], x[[i, planted[2]]]];
                (0..3).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
            })
            .collect();
        let model = fit_gbdt(&x, &y, &GbdtConfig::default()).unwrap();
        let top: BTreeSet<usize> = importance(&model).ranking[..3].iter().copied().collect();
        if top == planted.iter().copied().collect() {
            hits += 1;
        }
    }
    (hits >= 95, format!("selection: planted features ranked top-3 in {hits}/100 runs (>= 95)"))
}

fn main() {
    let t = Instant::now();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |id: usize, o: Outcome| {
        println!("{} [{id}] {}", if o.0 { "PASS" } else { "FAIL" }, o.1);
        results.push((id, o));
    };
    report(1, c1_gradients());
    report(2, c2_quantiles());
    report(3, c3_fedavg());
    report(4, c4_balancing());
    report(5, c5_partitioning());
    report(6, c6_metrics());
    let e = build_e2e();
    report(7, c7_end_to_end(&e));
    report(8, c8_sweep(&e));
    report(9, c9_features());
    report(10, c10_selection());
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.0).map(|(i, _)| *i).collect();
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        t.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
