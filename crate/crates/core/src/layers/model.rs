use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::aggregate::{graph_aggregate_backward, graph_aggregate_taped, AdjacencyWeights};
use super::bridge::{bridge_backward, bridge_forward, BridgeMode};
use super::dense::DenseLayer;
use super::loss::{argmax, softmax_cross_entropy};
use super::qfc::QpuFcLayer;
use crate::error::{Error, Result};
use crate::qpu::{ChainTape, TapeMode};
use crate::quat::Quaternion;

/// Activation flowing between layers.
#[derive(Clone, Debug, PartialEq)]
pub enum Signal {
    Quats(Vec<Quaternion>),
    Reals(Vec<f64>),
}

/// Gradient with respect to a [`Signal`]; quaternions get 4-vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum SignalGrad {
    Quats(Vec<[f64; 4]>),
    Reals(Vec<f64>),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    Quats(usize),
    Reals(usize),
}

impl Signal {
    pub fn shape(&self) -> Shape {
        match self {
            Signal::Quats(q) => Shape::Quats(q.len()),
            Signal::Reals(r) => Shape::Reals(r.len()),
        }
    }

    pub fn into_reals(self) -> Option<Vec<f64>> {
        match self {
            Signal::Reals(r) => Some(r),
            Signal::Quats(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Layer {
    QpuFc(QpuFcLayer),
    Aggregate(AdjacencyWeights),
    Bridge { mode: BridgeMode },
    Dense(DenseLayer),
}

/// Parameter gradients of one layer, laid out like its parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerGrads {
    pub fn add_assign(&mut self, other: &LayerGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|x| *x *= k);
    }
}

fn mismatch(what: &'static str) -> Error {
    Error::SignalKind(what)
}

impl Layer {
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match (self, input) {
            (Layer::QpuFc(l), Shape::Quats(n)) => {
                crate::error::check_width("qpu-fc input", l.n_in, n)?;
                Ok(Shape::Quats(l.n_out))
            }
            (Layer::Aggregate(a), Shape::Quats(n)) => {
                crate::error::check_width("aggregate input", a.n, n)?;
                Ok(Shape::Quats(n))
            }
            (Layer::Bridge { mode }, Shape::Quats(n)) => Ok(Shape::Reals(n * mode.width_per_quaternion())),
            (Layer::Dense(d), Shape::Reals(n)) => {
                crate::error::check_width("dense input", d.n_in, n)?;
                Ok(Shape::Reals(d.n_out))
            }
            _ => Err(mismatch("layer expects the other signal kind")),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::QpuFc(l) => l.param_count(),
            Layer::Aggregate(a) => a.a.len(),
            Layer::Bridge { .. } => 0,
            Layer::Dense(d) => d.param_count(),
        }
    }

    /// Number of multiplicative weights (biases excluded).
    pub fn weight_count(&self) -> usize {
        match self {
            Layer::QpuFc(l) => l.weights.len(),
            Layer::Aggregate(a) => a.a.len(),
            Layer::Bridge { .. } => 0,
            Layer::Dense(d) => d.weights.len(),
        }
    }

    /// `(weights, biases)`; empty slices for parameter-free layers.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        match self {
            Layer::QpuFc(l) => (&mut l.weights, &mut l.biases),
            Layer::Aggregate(a) => (&mut a.a, &mut []),
            Layer::Bridge { .. } => (&mut [], &mut []),
            Layer::Dense(d) => (&mut d.weights, &mut d.biases),
        }
    }

    pub fn params(&self) -> (&[f64], &[f64]) {
        match self {
            Layer::QpuFc(l) => (&l.weights, &l.biases),
            Layer::Aggregate(a) => (&a.a, &[]),
            Layer::Bridge { .. } => (&[], &[]),
            Layer::Dense(d) => (&d.weights, &d.biases),
        }
    }

    fn forward(&self, x: &Signal) -> Result<(Signal, Option<Vec<ChainTape>>)> {
        match (self, x) {
            (Layer::QpuFc(l), Signal::Quats(qs)) => {
                let (ys, tapes) = l.forward(qs)?;
                Ok((Signal::Quats(ys), tapes))
            }
            (Layer::Aggregate(a), Signal::Quats(qs)) => {
                let (ys, tapes) = graph_aggregate_taped(a, qs)?;
                Ok((Signal::Quats(ys), Some(tapes)))
            }
            (Layer::Bridge { mode }, Signal::Quats(qs)) => Ok((Signal::Reals(bridge_forward(*mode, qs)), None)),
            (Layer::Dense(d), Signal::Reals(r)) => Ok((Signal::Reals(d.forward(r)?), None)),
            _ => Err(mismatch("layer expects the other signal kind")),
        }
    }

    fn backward(
        &self,
        x: &Signal,
        y: &Signal,
        tapes: Option<&[ChainTape]>,
        g: &SignalGrad,
    ) -> Result<(SignalGrad, LayerGrads)> {
        match (self, x, y, g) {
            (Layer::QpuFc(l), Signal::Quats(qs), _, SignalGrad::Quats(up)) => {
                let gr = l.backward(qs, tapes, up)?;
                Ok((SignalGrad::Quats(gr.inputs), LayerGrads { weights: gr.weights, biases: gr.biases }))
            }
            (Layer::Aggregate(a), Signal::Quats(qs), _, SignalGrad::Quats(up)) => {
                let recomputed;
                let tapes = match tapes {
                    Some(t) => t,
                    None => {
                        recomputed = graph_aggregate_taped(a, qs)?.1;
                        &recomputed
                    }
                };
                let (dq, da) = graph_aggregate_backward(a, qs, tapes, up)?;
                Ok((SignalGrad::Quats(dq), LayerGrads { weights: da, biases: Vec::new() }))
            }
            (Layer::Bridge { mode }, Signal::Quats(qs), _, SignalGrad::Reals(up)) => {
                crate::error::check_width("bridge upstream", qs.len() * mode.width_per_quaternion(), up.len())?;
                Ok((SignalGrad::Quats(bridge_backward(*mode, qs, up)), LayerGrads::default()))
            }
            (Layer::Dense(d), Signal::Reals(xr), Signal::Reals(yr), SignalGrad::Reals(up)) => {
                let gr = d.backward(xr, yr, up)?;
                Ok((SignalGrad::Reals(gr.inputs), LayerGrads { weights: gr.weights, biases: gr.biases }))
            }
            _ => Err(mismatch("layer expects the other signal kind")),
        }
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    pub activations: Vec<Signal>,
    pub tapes: Vec<Option<Vec<ChainTape>>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Signal {
        self.activations.last().expect("trace holds the input")
    }
}

/// Ordered stack of layers.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelGraph {
    pub input: usize,
    pub layers: Vec<Layer>,
}

/// The three CubeEdge classifiers.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    Rmlp,
    Qmlp,
    QmlpRinv,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rmlp, ModelKind::Qmlp, ModelKind::QmlpRinv];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rmlp => "rmlp",
            ModelKind::Qmlp => "qmlp",
            ModelKind::QmlpRinv => "qmlp_rinv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name || k.name().replace('_', "-") == name)
    }

    /// Bridge between the quaternion and real parts when not overridden.
    pub fn default_bridge(self) -> BridgeMode {
        match self {
            ModelKind::Rmlp | ModelKind::Qmlp => BridgeMode::Flatten4,
            ModelKind::QmlpRinv => BridgeMode::KeepReal,
        }
    }
}

/// Construction options shared by the CubeEdge models.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ModelOptions {
    /// Input quaternions per sample.
    pub inputs: usize,
    pub classes: usize,
    pub bridge: Option<BridgeMode>,
    pub tape_mode: TapeMode,
    pub seed: u64,
}

impl ModelOptions {
    pub fn new(inputs: usize, classes: usize, seed: u64) -> Self {
        Self { inputs, classes, bridge: None, tape_mode: TapeMode::Store, seed }
    }
}

/// Width of the feature map every model hands to its classifier.
pub const FEATURE_WIDTH: usize = 256;
const QPU_HIDDEN: usize = 32;

impl ModelGraph {
    pub fn new(input: usize, layers: Vec<Layer>) -> Result<Self> {
        let model = Self { input, layers };
        model.output_shape()?;
        Ok(model)
    }

    /// Builds one of the CubeEdge classifiers.
    ///
    /// * RMLP: flatten → dense(4N→128)+ReLU → dense(128→256)+ReLU → dense(256→C)
    /// * QMLP: QPU-FC(N→32) → QPU-FC(32→64) → flatten → dense(256→C)
    /// * QMLP-RInv: QPU-FC(N→32) → QPU-FC(32→256) → real parts → dense(256→C)
    pub fn build(kind: ModelKind, opts: ModelOptions) -> Result<Self> {
        if opts.inputs == 0 || opts.classes < 2 {
            return Err(Error::InvalidConfig("model needs inputs and at least two classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let bridge = opts.bridge.unwrap_or(kind.default_bridge());
        let qfc = |n_in, n_out, rng: &mut ChaCha8Rng| {
            Layer::QpuFc(QpuFcLayer::new(n_in, n_out, rng).with_tape_mode(opts.tape_mode))
        };
        let layers = match kind {
            ModelKind::Rmlp => {
                let width = opts.inputs * bridge.width_per_quaternion();
                alloc::vec![
                    Layer::Bridge { mode: bridge },
                    Layer::Dense(DenseLayer::new(width, 128, true, &mut rng)),
                    Layer::Dense(DenseLayer::new(128, FEATURE_WIDTH, true, &mut rng)),
                    Layer::Dense(DenseLayer::new(FEATURE_WIDTH, opts.classes, false, &mut rng)),
                ]
            }
            ModelKind::Qmlp | ModelKind::QmlpRinv => {
                // The last QPU layer is sized so the bridged feature map has
                // FEATURE_WIDTH reals under the model's default bridge.
                let out = FEATURE_WIDTH / kind.default_bridge().width_per_quaternion();
                let first = qfc(opts.inputs, QPU_HIDDEN, &mut rng);
                let second = qfc(QPU_HIDDEN, out, &mut rng);
                let width = out * bridge.width_per_quaternion();
                alloc::vec![
                    first,
                    second,
                    Layer::Bridge { mode: bridge },
                    Layer::Dense(DenseLayer::new(width, opts.classes, false, &mut rng)),
                ]
            }
        };
        Self::new(opts.inputs, layers)
    }

    pub fn output_shape(&self) -> Result<Shape> {
        self.layers.iter().try_fold(Shape::Quats(self.input), |s, l| l.output_shape(s))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn set_tape_mode(&mut self, mode: TapeMode) {
        for layer in &mut self.layers {
            if let Layer::QpuFc(l) = layer {
                l.tape_mode = mode;
            }
        }
    }

    /// Zero gradients shaped like the parameters.
    pub fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers
            .iter()
            .map(|l| {
                let (w, b) = l.params();
                LayerGrads { weights: alloc::vec![0.0; w.len()], biases: alloc::vec![0.0; b.len()] }
            })
            .collect()
    }

    pub fn forward(&self, input: &[Quaternion]) -> Result<ForwardTrace> {
        crate::error::check_width("model input", self.input, input.len())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut tapes = Vec::with_capacity(self.layers.len());
        activations.push(Signal::Quats(input.to_vec()));
        for layer in &self.layers {
            let (y, t) = layer.forward(activations.last().expect("input pushed"))?;
            activations.push(y);
            tapes.push(t);
        }
        Ok(ForwardTrace { activations, tapes })
    }

    /// Final output without keeping intermediate state.
    pub fn infer(&self, input: &[Quaternion]) -> Result<Signal> {
        crate::error::check_width("model input", self.input, input.len())?;
        let mut x = Signal::Quats(input.to_vec());
        for layer in &self.layers {
            x = layer.forward(&x)?.0;
        }
        Ok(x)
    }

    pub fn logits(&self, input: &[Quaternion]) -> Result<Vec<f64>> {
        self.infer(input)?.into_reals().ok_or(mismatch("model output is not real-valued"))
    }

    pub fn predict(&self, input: &[Quaternion]) -> Result<usize> {
        Ok(argmax(&self.logits(input)?))
    }

    /// Returns the gradient with respect to the model input and the parameter
    /// gradients of every layer.
    pub fn backward(&self, trace: &ForwardTrace, grad_out: SignalGrad) -> Result<(SignalGrad, Vec<LayerGrads>)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gx, lg) = layer.backward(
                &trace.activations[i],
                &trace.activations[i + 1],
                trace.tapes[i].as_deref(),
                &g,
            )?;
            g = gx;
            grads.push(lg);
        }
        grads.reverse();
        Ok((g, grads))
    }

    /// Cross-entropy loss of one sample with gradients.
    pub fn loss_and_grads(&self, input: &[Quaternion], label: usize) -> Result<(f64, SignalGrad, Vec<LayerGrads>)> {
        let trace = self.forward(input)?;
        let logits = match trace.output() {
            Signal::Reals(r) => r,
            Signal::Quats(_) => return Err(mismatch("model output is not real-valued")),
        };
        let (loss, dlogits) = softmax_cross_entropy(logits, label)?;
        let (gin, grads) = self.backward(&trace, SignalGrad::Reals(dlogits))?;
        Ok((loss, gin, grads))
    }

    pub fn loss(&self, input: &[Quaternion], label: usize) -> Result<f64> {
        softmax_cross_entropy(&self.logits(input)?, label).map(|(l, _)| l)
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            let (w, b) = layer.params();
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`ModelGraph::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        crate::error::check_width("flat parameters", self.param_count(), flat.len())?;
        let mut at = 0;
        for layer in &mut self.layers {
            let (w, b) = layer.params_mut();
            w.copy_from_slice(&flat[at..at + w.len()]);
            at += w.len();
            b.copy_from_slice(&flat[at..at + b.len()]);
            at += b.len();
        }
        Ok(())
    }
}

/// Flattens per-layer gradients in [`ModelGraph::flat_params`] order.
pub fn flatten_grads(grads: &[LayerGrads]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.weights.iter().chain(&g.biases).copied()).collect()
}
