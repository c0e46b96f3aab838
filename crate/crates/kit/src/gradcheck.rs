//! Finite-difference check of every parameter and input gradient of a model,
//! grouped into a table by layer.

use qpu_core::grad::{finite_diff_gradient, max_relative_error};
use qpu_core::layers::{
    flatten_grads, AdjacencyWeights, BridgeMode, DenseLayer, Layer, ModelGraph, QpuFcLayer, SignalGrad,
};
use qpu_core::quat::AngleAxis;
use qpu_core::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const STEP: f64 = 1e-6;
/// Gradients smaller than this are compared in absolute terms.
pub const FLOOR: f64 = 1e-4;

pub const TARGETS: [&str; 4] = ["qmlp", "qmlp_rinv", "rmlp", "aggregate"];

#[derive(Clone, Debug, Serialize)]
pub struct GradRow {
    pub name: String,
    pub count: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// A batch of labelled inputs.
pub type Batch = Vec<(Vec<Quaternion>, usize)>;

fn layer_name(layer: &Layer) -> String {
    match layer {
        Layer::QpuFc(l) => format!("qpu-fc {}->{}", l.n_in, l.n_out),
        Layer::Aggregate(a) => format!("aggregate {}", a.n),
        Layer::Bridge { mode } => format!("bridge {}", mode.name()),
        Layer::Dense(d) => format!("dense {}->{}", d.n_in, d.n_out),
    }
}

/// Unit quaternion whose rotation angle stays inside `[0.2, 6]`, away from
/// the arccos clamp.
pub fn interior_quaternion(rng: &mut impl Rng) -> Quaternion {
    loop {
        let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if let Ok(aa) = AngleAxis::new(rng.random_range(0.2..6.0), axis) {
            return aa.to_quaternion();
        }
    }
}

pub fn random_batch(size: usize, inputs: usize, classes: usize, rng: &mut impl Rng) -> Batch {
    (0..size)
        .map(|_| ((0..inputs).map(|_| interior_quaternion(rng)).collect(), rng.random_range(0..classes)))
        .collect()
}

pub fn batch_loss(model: &ModelGraph, batch: &Batch) -> Result<f64> {
    let mut sum = 0.0;
    for (qs, label) in batch {
        sum += model.loss(qs, *label)?;
    }
    Ok(sum / batch.len() as f64)
}

/// Analytic gradients of the mean batch loss: flat parameters and flat inputs.
pub fn analytic_gradients(model: &ModelGraph, batch: &Batch) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = 1.0 / batch.len() as f64;
    let mut params = vec![0.0; model.param_count()];
    let mut inputs = Vec::new();
    for (qs, label) in batch {
        let (_, gin, grads) = model.loss_and_grads(qs, *label)?;
        for (p, g) in params.iter_mut().zip(flatten_grads(&grads)) {
            *p += k * g;
        }
        match gin {
            SignalGrad::Quats(g) => inputs.extend(g.iter().flatten().map(|x| k * x)),
            SignalGrad::Reals(_) => return Err(Error::Contradiction("model input is not quaternion".into())),
        }
    }
    Ok((params, inputs))
}

pub fn gradcheck_model(model: &ModelGraph, batch: &Batch, tol: f64) -> Result<Vec<GradRow>> {
    let (analytic_p, analytic_x) = analytic_gradients(model, batch)?;
    let flat = model.flat_params();
    let numeric_p = finite_diff_gradient(
        |p| {
            let mut m = model.clone();
            m.set_flat_params(p).expect("same length");
            batch_loss(&m, batch).expect("shapes checked")
        },
        &flat,
        STEP,
    );
    let x: Vec<f64> = batch.iter().flat_map(|(qs, _)| qs.iter().flat_map(|q| q.to_array())).collect();
    let n_in = model.input * 4;
    let numeric_x = finite_diff_gradient(
        |x| {
            let b: Batch = batch
                .iter()
                .enumerate()
                .map(|(i, (_, label))| {
                    let qs = x[i * n_in..(i + 1) * n_in]
                        .chunks_exact(4)
                        .map(|c| Quaternion::from_array([c[0], c[1], c[2], c[3]]))
                        .collect();
                    (qs, *label)
                })
                .collect();
            batch_loss(model, &b).expect("shapes checked")
        },
        &x,
        STEP,
    );

    let mut rows = Vec::new();
    let mut row = |name: String, a: &[f64], n: &[f64]| {
        if a.is_empty() {
            return;
        }
        let err = max_relative_error(a, n, FLOOR);
        rows.push(GradRow { name, count: a.len(), max_rel_err: err, pass: err <= tol });
    };
    let mut at = 0;
    for (i, layer) in model.layers.iter().enumerate() {
        let (w, b) = layer.params();
        let name = layer_name(layer);
        row(format!("{i}: {name} weights"), &analytic_p[at..at + w.len()], &numeric_p[at..at + w.len()]);
        at += w.len();
        row(format!("{i}: {name} biases"), &analytic_p[at..at + b.len()], &numeric_p[at..at + b.len()]);
        at += b.len();
    }
    row("inputs".into(), &analytic_x, &numeric_x);
    Ok(rows)
}

/// Small model for one of [`TARGETS`] with nonzero biases everywhere.
pub fn target_model(name: &str, seed: u64) -> Result<ModelGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qfc = |n_in, n_out, rng: &mut ChaCha8Rng| {
        let mut l = QpuFcLayer::new(n_in, n_out, rng);
        l.biases = (0..n_out).map(|_| rng.random_range(-0.3..0.3)).collect();
        Layer::QpuFc(l)
    };
    let dense = |n_in, n_out, rectify, rng: &mut ChaCha8Rng| {
        let mut d = DenseLayer::new(n_in, n_out, rectify, rng);
        d.biases = (0..n_out).map(|_| rng.random_range(0.0..0.3)).collect();
        Layer::Dense(d)
    };
    let layers = match name {
        "qmlp" | "qmlp_rinv" => {
            let mode = if name == "qmlp" { BridgeMode::Flatten4 } else { BridgeMode::KeepReal };
            let l1 = qfc(6, 8, &mut rng);
            let l2 = qfc(8, 4, &mut rng);
            vec![l1, l2, Layer::Bridge { mode }, dense(4 * mode.width_per_quaternion(), 5, false, &mut rng)]
        }
        "rmlp" => vec![
            Layer::Bridge { mode: BridgeMode::Flatten4 },
            dense(24, 10, true, &mut rng),
            dense(10, 5, false, &mut rng),
        ],
        "aggregate" => {
            let adj = AdjacencyWeights::new(6, (0..36).map(|_| rng.random_range(-1.0..1.0)).collect())?;
            let l = qfc(6, 3, &mut rng);
            vec![
                Layer::Aggregate(adj),
                l,
                Layer::Bridge { mode: BridgeMode::AngleAxis },
                dense(12, 5, false, &mut rng),
            ]
        }
        other => return Err(Error::Contradiction(format!("unknown gradcheck target `{other}`"))),
    };
    Ok(ModelGraph::new(6, layers)?)
}
