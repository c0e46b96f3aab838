//! Tree reduction, operation counts, parameter budgets and layer stacking.

mod common;

use common::unit_quats;
use qpu_core::grad::{finite_diff_gradient, max_relative_error};
use qpu_core::layers::{
    flatten_grads, AdjacencyWeights, BridgeMode, DenseLayer, Layer, ModelGraph, ModelKind, ModelOptions, QpuFcLayer,
};
use qpu_core::opcount::count_qfc_forward;
use qpu_core::qpu::{chain_forward, chain_forward_tree_with_depth, qpu_backward, qpu_forward, tree_depth, QpuParams};
use qpu_core::quat::Quaternion;
use rand::Rng;

#[test]
fn tree_matches_sequential_for_every_length_up_to_1024() {
    let mut rng = common::rng(31);
    let all = unit_quats(&mut rng, 1024);
    for n in 1..=1024 {
        let (seq, _) = chain_forward(&all[..n]).unwrap();
        let (tree, depth) = chain_forward_tree_with_depth(&all[..n]).unwrap();
        assert!(seq.max_abs_diff(tree) <= 1e-12, "n={n}: {:e}", seq.max_abs_diff(tree));
        let expect = if n == 1 { 0 } else { (n as f64).log2().ceil() as u32 };
        assert_eq!(depth, expect, "n={n}");
        assert_eq!(tree_depth(n), expect);
    }
    assert_eq!(tree_depth(8), 3);
    assert_eq!(tree_depth(1024), 10);
}

#[test]
fn tree_of_one_is_the_input() {
    let q = Quaternion::new(0.5, 0.5, 0.5, 0.5);
    assert_eq!(chain_forward_tree_with_depth(&[q]).unwrap(), (q, 0));
    assert!(chain_forward_tree_with_depth(&[]).is_err());
}

#[test]
fn operation_count_formula() {
    let mut rng = common::rng(32);
    for (n, m) in [(1, 1), (2, 1), (4, 1), (4, 3), (7, 5), (16, 8)] {
        let qs = unit_quats(&mut rng, n);
        let layer = QpuFcLayer::new(n, m, &mut rng);
        let (ys, counts) = count_qfc_forward(&layer.weights, &layer.biases, &qs).unwrap();
        let (nn, mm) = (n as u64, m as u64);
        assert_eq!(counts.mul, (17 * nn - 16) * mm, "n={n} m={m}");
        assert_eq!(counts.add, (13 * nn - 12) * mm, "n={n} m={m}");
        // the counted pass is the production pass
        assert_eq!(ys, layer.forward(&qs).unwrap().0);
    }
}

#[test]
fn operation_count_examples() {
    let mut rng = common::rng(33);
    let qs = unit_quats(&mut rng, 4);
    let (_, one) = count_qfc_forward(&[0.3, 1.0, -0.4, 2.0], &[0.1], &qs).unwrap();
    assert_eq!(one.mul, 52);
    let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, three) = count_qfc_forward(&w, &[0.0, 0.2, -0.2], &qs).unwrap();
    assert_eq!(three.mul, 156);
}

#[test]
fn qpu_fc_uses_a_sixteenth_of_the_dense_parameters() {
    let mut rng = common::rng(34);
    let qfc = QpuFcLayer::new(16, 8, &mut rng);
    let dense = DenseLayer::new(64, 32, false, &mut rng);
    assert_eq!(qfc.weights.len(), 128);
    assert_eq!(dense.weights.len(), 2048);
    assert_eq!(qfc.weights.len() * 16, dense.weights.len());
    assert_eq!(qfc.param_count(), 16 * 8 + 8);
}

/// Fits a single QPU to `targets`, comparing outputs up to the double cover.
fn one_layer_fit_error(inputs: &[Vec<Quaternion>], targets: &[Quaternion]) -> f64 {
    let n = inputs[0].len();
    let err_of = |p: &QpuParams| -> f64 {
        let mut worst: f64 = 0.0;
        for (qs, t) in inputs.iter().zip(targets) {
            let y = qpu_forward(qs, p).unwrap().0;
            worst = worst.max(y.max_abs_diff(*t).min(y.max_abs_diff(-*t)));
        }
        worst
    };
    let mse_and_grad = |p: &QpuParams| -> (f64, Vec<f64>) {
        let mut loss = 0.0;
        let mut g = vec![0.0; n + 1];
        for (qs, t) in inputs.iter().zip(targets) {
            let (y, tape) = qpu_forward(qs, p).unwrap();
            let t = if y.max_abs_diff(*t) <= y.max_abs_diff(-*t) { *t } else { -*t };
            let d = (y - t).to_array();
            loss += d.iter().map(|x| x * x).sum::<f64>();
            let up = d.map(|x| 2.0 * x);
            let gr = qpu_backward(qs, p, Some(&tape), up).unwrap();
            for (gi, dw) in g.iter_mut().zip(&gr.dw) {
                *gi += dw;
            }
            g[n] += gr.db;
        }
        (loss, g)
    };

    let grid = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
    let mut starts = Vec::new();
    for &w0 in &grid {
        for &w1 in &grid {
            for &b in &[-0.5, 0.0, 0.5] {
                starts.push(QpuParams::new(vec![w0, w1], b));
            }
        }
    }
    starts.sort_by(|a, b| err_of(a).total_cmp(&err_of(b)));

    let mut best = f64::INFINITY;
    for start in starts.into_iter().take(12) {
        let mut p = start;
        let mut lr = 0.05;
        let (mut loss, _) = mse_and_grad(&p);
        for _ in 0..400 {
            let (_, g) = mse_and_grad(&p);
            let mut trial = p.clone();
            for (w, d) in trial.w.iter_mut().zip(&g) {
                *w -= lr * d;
            }
            trial.b -= lr * g[n];
            let (l, _) = mse_and_grad(&trial);
            if l < loss {
                p = trial;
                loss = l;
                lr *= 1.2;
            } else {
                lr *= 0.5;
            }
        }
        best = best.min(err_of(&p));
    }
    best
}

#[test]
fn two_stacked_layers_are_not_one_layer() {
    let l1 = QpuFcLayer::from_parts(2, 2, vec![1.3, -0.7, 0.4, 1.1], vec![0.2, -0.3]).unwrap();
    let l2 = QpuFcLayer::from_parts(2, 1, vec![0.9, 1.4], vec![0.1]).unwrap();
    let mut rng = common::rng(35);
    let inputs: Vec<Vec<Quaternion>> = (0..16).map(|_| unit_quats(&mut rng, 2)).collect();
    let targets: Vec<Quaternion> =
        inputs.iter().map(|qs| l2.forward(&l1.forward(qs).unwrap().0).unwrap().0[0]).collect();
    let err = one_layer_fit_error(&inputs, &targets);
    assert!(err > 1e-3, "a single layer fit the stack to {err:e}");
}

#[test]
fn one_layer_targets_are_recovered_by_the_fit() {
    // The search itself must be able to find an exact single-layer solution.
    let truth = QpuParams::new(vec![1.1, -0.6], 0.2);
    let mut rng = common::rng(36);
    let inputs: Vec<Vec<Quaternion>> = (0..16).map(|_| unit_quats(&mut rng, 2)).collect();
    let targets: Vec<Quaternion> = inputs.iter().map(|qs| qpu_forward(qs, &truth).unwrap().0).collect();
    assert!(one_layer_fit_error(&inputs, &targets) < 1e-4);
}

fn small_model(bridge: BridgeMode, rng: &mut impl Rng) -> ModelGraph {
    let adj = AdjacencyWeights::new(3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let mut l1 = QpuFcLayer::new(3, 4, rng);
    l1.biases = (0..4).map(|_| rng.random_range(-0.3..0.3)).collect();
    let l2 = QpuFcLayer::new(4, 3, rng);
    let width = 3 * bridge.width_per_quaternion();
    let mut dense = DenseLayer::new(width, 5, true, rng);
    dense.biases = (0..5).map(|_| rng.random_range(0.0..0.3)).collect();
    let head = DenseLayer::new(5, 4, false, rng);
    let layers = vec![
        Layer::Aggregate(adj),
        Layer::QpuFc(l1),
        Layer::QpuFc(l2),
        Layer::Bridge { mode: bridge },
        Layer::Dense(dense),
        Layer::Dense(head),
    ];
    ModelGraph::new(3, layers).unwrap()
}

#[test]
fn model_gradients_match_finite_differences_for_every_bridge() {
    let mut rng = common::rng(37);
    for mode in BridgeMode::ALL {
        let model = small_model(mode, &mut rng);
        let qs = unit_quats(&mut rng, 3);
        let before = model.flat_params();
        let (_, _, grads) = model.loss_and_grads(&qs, 2).unwrap();
        assert_eq!(model.flat_params(), before, "backward touched the parameters");
        let analytic = flatten_grads(&grads);
        let numeric = finite_diff_gradient(
            |p| {
                let mut m = model.clone();
                m.set_flat_params(p).unwrap();
                m.loss(&qs, 2).unwrap()
            },
            &before,
            1e-6,
        );
        let err = max_relative_error(&analytic, &numeric, 1e-4);
        assert!(err <= 1e-5, "{mode:?}: {err:e}");
    }
}

#[test]
fn built_models_have_the_documented_shapes() {
    for kind in ModelKind::ALL {
        let model = ModelGraph::build(kind, ModelOptions::new(6, 32, 1)).unwrap();
        assert_eq!(model.output_shape().unwrap(), qpu_core::layers::Shape::Reals(32));
        let logits = model.logits(&[Quaternion::IDENTITY; 6]).unwrap();
        assert!(logits.iter().all(|x| x.is_finite()));
    }
}
