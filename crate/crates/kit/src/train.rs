//! Mini-batch training and the two CubeEdge evaluation scenarios.

use qpu_core::cubeedge::{featurize_vertices, rotate_vertices, uniform_rotation, GenConfig, Sample};
use qpu_core::layers::{BridgeMode, LayerGrads, ModelGraph, ModelKind, ModelOptions};
use qpu_core::optim::{Optimizer, OptimizerKind};
use qpu_core::qpu::TapeMode;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Executor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Seeds initialization and shuffling.
    pub seed: u64,
    pub model: ModelKind,
    /// Replaces the model's default bridge when set.
    pub bridge: Option<BridgeMode>,
    pub tape_mode: TapeMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::ADAM,
            seed: 0,
            model: ModelKind::Qmlp,
            bridge: None,
            tape_mode: TapeMode::Store,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Contradiction("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contradiction("learning rate must be a positive number".into()));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !unit(beta1) || !unit(beta2) || eps.is_nan() || eps <= 0.0 {
                return Err(Error::Contradiction("adam needs betas in [0, 1) and a positive epsilon".into()));
            }
        }
        if self.model == ModelKind::QmlpRinv && self.bridge.is_some_and(|b| b != BridgeMode::KeepReal) {
            return Err(Error::Contradiction("qmlp_rinv is defined by the keep-real bridge".into()));
        }
        Ok(())
    }

    pub fn build_model(&self, data: &GenConfig) -> Result<ModelGraph> {
        let opts = ModelOptions {
            inputs: data.feature_len(),
            classes: data.classes(),
            bridge: self.bridge,
            tape_mode: self.tape_mode,
            seed: self.seed,
        };
        Ok(ModelGraph::build(self.model, opts)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the epoch's batches, each taken before its update.
    pub loss: f64,
    /// Running minimum of `loss`, including the initial loss.
    pub smoothed_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ModelGraph,
    /// Mean training loss of the initial model.
    pub initial_loss: f64,
    pub history: Vec<EpochStats>,
}

fn check_inputs(model: &ModelGraph, samples: &[Sample]) -> Result<()> {
    let classes = match model.output_shape()? {
        qpu_core::layers::Shape::Reals(c) => c,
        qpu_core::layers::Shape::Quats(_) => return Err(Error::Contradiction("model output is not real".into())),
    };
    for s in samples {
        if s.features.len() != model.input {
            return Err(Error::Contradiction(format!(
                "dataset has {} features per sample, model expects {}",
                s.features.len(),
                model.input
            )));
        }
        if s.label >= classes {
            return Err(Error::Contradiction(format!("label {} but the model has {classes} classes", s.label)));
        }
    }
    Ok(())
}

/// Summed loss and summed gradients of `batch`. Per-sample work runs on the
/// pool; the reduction walks the batch in order, so the result does not
/// depend on the thread count.
pub fn batch_gradients(model: &ModelGraph, batch: &[&Sample], exec: &Executor) -> Result<(f64, Vec<LayerGrads>)> {
    let per_sample = exec.map_indexed(batch.len(), |i| {
        let s = batch[i];
        model.loss_and_grads(&s.features, s.label).map(|(loss, _, grads)| (loss, grads))
    });
    let mut total = model.zero_grads();
    let mut loss = 0.0;
    for r in per_sample {
        let (l, g) = r?;
        loss += l;
        for (t, x) in total.iter_mut().zip(&g) {
            t.add_assign(x);
        }
    }
    Ok((loss, total))
}

pub fn mean_loss(model: &ModelGraph, samples: &[Sample], exec: &Executor) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let losses = exec.map_indexed(samples.len(), |i| model.loss(&samples[i].features, samples[i].label));
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / samples.len() as f64)
}

/// Trains `model` on `samples`. `on_epoch` sees every
/// finished epoch together with the current model.
pub fn train(
    mut model: ModelGraph,
    samples: &[Sample],
    config: &TrainConfig,
    exec: &Executor,
    mut on_epoch: impl FnMut(&EpochStats, &ModelGraph) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_inputs(&model, samples)?;
    model.set_tape_mode(config.tape_mode);
    let initial_loss = mean_loss(&model, samples, exec)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = initial_loss;

    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &batch, exec)?;
            epoch_loss += loss;
            let k = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(k));
            optimizer.step_model(&mut model, &grads)?;
        }
        let loss = if samples.is_empty() { 0.0 } else { epoch_loss / samples.len() as f64 };
        best = best.min(loss);
        let stats = EpochStats { epoch, loss, smoothed_loss: best };
        on_epoch(&stats, &model)?;
        history.push(stats);
    }
    Ok(TrainOutcome { model, initial_loss, history })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Test skeletons as generated.
    NoRotation,
    /// Every test skeleton gets its own uniform random rotation before
    /// featurization.
    ArbitraryRotation,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::NoRotation, Scenario::ArbitraryRotation];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NoRotation => "no-rotation",
            Scenario::ArbitraryRotation => "arbitrary-rotation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub sigma: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `None` for classes absent from the test set.
    pub per_class: Vec<Option<f64>>,
}

/// Features of test sample `index` under `scenario`.
pub fn scenario_features(sample: &Sample, scenario: Scenario, rotation_seed: u64, index: usize) -> Result<Vec<qpu_core::Quaternion>> {
    match scenario {
        Scenario::NoRotation => Ok(sample.features.clone()),
        Scenario::ArbitraryRotation => {
            let mut rng = ChaCha8Rng::seed_from_u64(rotation_seed);
            rng.set_stream(index as u64);
            let q = uniform_rotation(&mut rng);
            Ok(featurize_vertices(&rotate_vertices(&sample.vertices, q))?.qs)
        }
    }
}

pub fn evaluate(
    model: &ModelGraph,
    samples: &[Sample],
    sigma: f64,
    scenario: Scenario,
    rotation_seed: u64,
    exec: &Executor,
) -> Result<EvalReport> {
    check_inputs(model, samples)?;
    let classes = match model.output_shape()? {
        qpu_core::layers::Shape::Reals(c) => c,
        qpu_core::layers::Shape::Quats(_) => unreachable!("checked above"),
    };
    let predictions = exec.map_indexed(samples.len(), |i| {
        let qs = scenario_features(&samples[i], scenario, rotation_seed, i)?;
        Ok::<_, Error>(model.predict(&qs)?)
    });
    let mut hits = vec![0usize; classes];
    let mut seen = vec![0usize; classes];
    for (s, p) in samples.iter().zip(predictions) {
        seen[s.label] += 1;
        if p? == s.label {
            hits[s.label] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    let total = samples.len();
    Ok(EvalReport {
        scenario,
        sigma,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        correct,
        total,
        per_class: hits.iter().zip(&seen).map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64)).collect(),
    })
}
