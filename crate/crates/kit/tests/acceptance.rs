//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::Instant;

use qpu_core::cubeedge::{generate_dataset, uniform_rotation, GenConfig};
use qpu_core::layers::{
    flatten_grads, BridgeMode, DenseLayer, Layer, ModelGraph, ModelKind, QpuFcLayer, SignalGrad,
};
use qpu_core::opcount::count_qfc_forward;
use qpu_core::qpu::{chain_forward, chain_forward_tree_with_depth, qpu_forward, QpuParams};
use qpu_core::quat::{rotate_vector, AngleAxis};
use qpu_core::Quaternion;
use qpu_kit::bench::bench_chain;
use qpu_kit::train::{evaluate, train, Scenario, TrainConfig};
use qpu_kit::Executor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn interior_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if let Ok(aa) = AngleAxis::new(rng.random_range(0.2..6.0), axis) {
            return aa.to_quaternion();
        }
    }
}

/// Max real-part and imaginary-part deviations over `trials` random QPUs
/// with 8 inputs each.
fn rotation_trials(trials: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut real, mut imag) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let qs: Vec<Quaternion> = (0..8).map(|_| uniform_rotation(&mut rng)).collect();
        let params = QpuParams::new((0..8).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-1.0..1.0));
        let r = uniform_rotation(&mut rng);
        let moved: Vec<Quaternion> = qs.iter().map(|q| Quaternion { s: q.s, v: rotate_vector(r, q.v) }).collect();
        let (y, _) = qpu_forward(&qs, &params).unwrap();
        let (y2, _) = qpu_forward(&moved, &params).unwrap();
        real = real.max((y.s - y2.s).abs());
        let ry = rotate_vector(r, y.v);
        let d = [ry[0] - y2.v[0], ry[1] - y2.v[1], ry[2] - y2.v[2]];
        imag = imag.max((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
    }
    (real, imag)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let (real, _) = rotation_trials(1000);
    let secs = t.elapsed().as_secs_f64();
    outcome(real <= 1e-9 && secs < 5.0, format!("max real-part deviation {real:.2e} over 1000 trials in {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let (_, imag) = rotation_trials(1000);
    outcome(imag <= 1e-9, format!("max ‖R(Im y) − Im y′‖ {imag:.2e} over 1000 trials"))
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + h;
            let up = f(&x);
            x[i] = x0 - h;
            let down = f(&x);
            x[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut l1 = QpuFcLayer::new(6, 8, &mut rng);
    l1.biases = (0..8).map(|_| rng.random_range(-0.3..0.3)).collect();
    let mut l2 = QpuFcLayer::new(8, 4, &mut rng);
    l2.biases = (0..4).map(|_| rng.random_range(-0.3..0.3)).collect();
    let mut head = DenseLayer::new(4, 5, false, &mut rng);
    head.biases = (0..5).map(|_| rng.random_range(-0.3..0.3)).collect();
    let model = ModelGraph::new(
        6,
        vec![Layer::QpuFc(l1), Layer::QpuFc(l2), Layer::Bridge { mode: BridgeMode::KeepReal }, Layer::Dense(head)],
    )
    .unwrap();
    let batch: Vec<(Vec<Quaternion>, usize)> =
        (0..4).map(|_| ((0..6).map(|_| interior_quat(&mut rng)).collect(), rng.random_range(0..5))).collect();

    let loss = |m: &ModelGraph, inputs: &[Vec<Quaternion>]| -> f64 {
        inputs.iter().zip(&batch).map(|(qs, (_, label))| m.loss(qs, *label).unwrap()).sum::<f64>() / 4.0
    };
    let mut analytic_p = vec![0.0; model.param_count()];
    let mut analytic_x = Vec::new();
    for (qs, label) in &batch {
        let (_, gin, grads) = model.loss_and_grads(qs, *label).unwrap();
        for (a, g) in analytic_p.iter_mut().zip(flatten_grads(&grads)) {
            *a += g / 4.0;
        }
        let SignalGrad::Quats(g) = gin else { unreachable!() };
        analytic_x.extend(g.iter().flatten().map(|x| x / 4.0));
    }
    let inputs: Vec<Vec<Quaternion>> = batch.iter().map(|(qs, _)| qs.clone()).collect();
    let numeric_p = central_difference(
        |p| {
            let mut m = model.clone();
            m.set_flat_params(p).unwrap();
            loss(&m, &inputs)
        },
        &model.flat_params(),
    );
    let flat_x: Vec<f64> = inputs.iter().flatten().flat_map(|q| q.to_array()).collect();
    let numeric_x = central_difference(
        |x| {
            let qs: Vec<Quaternion> = x.chunks_exact(4).map(|c| Quaternion::from_array([c[0], c[1], c[2], c[3]])).collect();
            let split: Vec<Vec<Quaternion>> = qs.chunks(6).map(|c| c.to_vec()).collect();
            loss(&model, &split)
        },
        &flat_x,
    );
    // relative error with an absolute floor for near-zero entries
    let rel = |a: &[f64], n: &[f64]| {
        a.iter().zip(n).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4)).fold(0.0, f64::max)
    };
    let (ep, ex) = (rel(&analytic_p, &numeric_p), rel(&analytic_x, &numeric_x));
    let secs = t.elapsed().as_secs_f64();
    outcome(
        ep <= 1e-5 && ex <= 1e-5 && secs < 30.0,
        format!(
            "{} parameters max rel err {ep:.2e}, {} inputs max rel err {ex:.2e}, {secs:.2}s",
            analytic_p.len(),
            analytic_x.len()
        ),
    )
}

fn ceil_log2(n: usize) -> u32 {
    let mut depth = 0;
    while (1usize << depth) < n {
        depth += 1;
    }
    depth
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let all: Vec<Quaternion> = (0..1024).map(|_| uniform_rotation(&mut rng)).collect();
    let exec = Executor::new(0).unwrap();
    let ns: Vec<usize> = (1..=64).chain([127, 128, 1023, 1024]).collect();
    let mut worst = 0.0f64;
    let mut depth_ok = true;
    for &n in &ns {
        let ps = &all[..n];
        let oracle = ps[1..].iter().fold(ps[0], |acc, p| acc * *p).normalized();
        let (seq, _) = chain_forward(ps).unwrap();
        let (tree, d1) = chain_forward_tree_with_depth(ps).unwrap();
        let (pooled, d2) = exec.chain_tree(ps).unwrap();
        worst = worst.max(oracle.max_abs_diff(seq)).max(oracle.max_abs_diff(tree)).max(oracle.max_abs_diff(pooled));
        depth_ok &= d1 == ceil_log2(n) && d2 == ceil_log2(n);
    }
    let row = &bench_chain(&[1024], 15, 4, &exec).unwrap()[0];
    let faster = row.tree_secs < row.sequential_secs;
    outcome(
        worst <= 1e-12 && depth_ok && faster,
        format!(
            "max diff {worst:.2e} over {} lengths, depths {}, N=1024 sequential {:.0} ns vs tree {:.0} ns on {} thread(s)",
            ns.len(),
            if depth_ok { "= ⌈log₂N⌉" } else { "WRONG" },
            row.sequential_secs * 1e9,
            row.tree_secs * 1e9,
            exec.threads()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let qs: Vec<Quaternion> = (0..4).map(|_| interior_quat(&mut rng)).collect();
    let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, counts) = count_qfc_forward(&w, &[0.1, -0.2, 0.3], &qs).unwrap();
    outcome(counts.mul == 156, format!("N=4, M=3: {} multiplications (expected 156)", counts.mul))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let qfc = QpuFcLayer::new(16, 8, &mut rng).weights.len();
    let dense = DenseLayer::new(64, 32, false, &mut rng).weights.len();
    outcome(qfc == 128 && dense == 2048 && qfc * 16 == dense, format!("QPU-FC(16,8) {qfc} weights vs dense(64→32) {dense}"))
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let exec = Executor::new(0).unwrap();
    let data = generate_dataset(&GenConfig::default()).unwrap();
    let sigmas = [0.0, 0.02, 0.04];
    let tests: Vec<_> = sigmas
        .iter()
        .map(|&sigma| generate_dataset(&GenConfig { sigma, n_train: 0, ..GenConfig::default() }).unwrap().test)
        .collect();

    // acc[model][sigma] = (scenario i, scenario ii)
    let mut acc = Vec::new();
    for kind in ModelKind::ALL {
        let cfg = TrainConfig { model: kind, ..TrainConfig::default() };
        let model = cfg.build_model(&data.config).unwrap();
        let trained = train(model, &data.train, &cfg, &exec, |_, _| Ok(())).unwrap().model;
        let per_sigma: Vec<(f64, f64)> = sigmas
            .iter()
            .zip(&tests)
            .map(|(&sigma, test)| {
                let i = evaluate(&trained, test, sigma, Scenario::NoRotation, 7, &exec).unwrap().accuracy;
                let ii = evaluate(&trained, test, sigma, Scenario::ArbitraryRotation, 7, &exec).unwrap().accuracy;
                (i, ii)
            })
            .collect();
        for (sigma, (i, ii)) in sigmas.iter().zip(&per_sigma) {
            println!("    {:<9} sigma={sigma:<4} scenario-i {:>6.2}%  scenario-ii {:>6.2}%", kind.name(), i * 100.0, ii * 100.0);
        }
        acc.push(per_sigma);
    }
    let (rmlp, rinv) = (&acc[0], &acc[2]);
    let a = (rinv[0].0 - rinv[0].1).abs() * 100.0 <= 0.5;
    let b = (0..sigmas.len()).all(|s| rinv[s].1 > rmlp[s].1);
    let c = acc.iter().all(|m| m[0].0 >= 0.31);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        a && b && c && secs < 900.0,
        format!("(a) {} (b) {} (c) {} in {secs:.0}s", ok(a), ok(b), ok(c)),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "failed"
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 rotation invariance", criterion_1),
        ("2 rotation equivariance", criterion_2),
        ("3 gradient correctness", criterion_3),
        ("4 tree/sequential equivalence", criterion_4),
        ("5 operation count", criterion_5),
        ("6 parameter ratio", criterion_6),
        ("7 CubeEdge experiment", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
