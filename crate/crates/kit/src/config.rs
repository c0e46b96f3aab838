//! Run settings: built-in defaults, an optional TOML file, then flags.

use std::path::{Path, PathBuf};

use qpu_core::cubeedge::GenConfig;
use qpu_core::layers::{BridgeMode, ModelKind};
use qpu_core::optim::OptimizerKind;
use qpu_core::qpu::TapeMode;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::{Scenario, TrainConfig};

/// Every setting, each optional. Used for both the config file and the
/// command-line flags; keys match the flag names with `_` for `-`.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub n_edges: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub shear_range: Option<f64>,
    pub train_noise: Option<bool>,
    pub model: Option<String>,
    pub bridge: Option<String>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub optimizer: Option<String>,
    pub scenario: Option<String>,
    pub tape_mode: Option<String>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
}

impl Overrides {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::ConfigFile { path: path.into(), message: e.message().to_string() })
    }
}

/// Resolved settings. Printed at the start of every run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub sigma: f64,
    pub n_edges: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub shear_range: f64,
    pub train_noise: bool,
    pub model: String,
    /// `default` keeps the model's own bridge.
    pub bridge: String,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub optimizer: String,
    /// `no-rotation`, `arbitrary-rotation` or `both`.
    pub scenario: String,
    pub tape_mode: String,
    /// 0 uses every available core.
    pub threads: usize,
    pub out: PathBuf,
    /// Empty when the dataset is generated from the settings above.
    pub data: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        let gen = GenConfig::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            sigma: gen.sigma,
            n_edges: gen.n_edges,
            n_train: gen.n_train,
            n_test: gen.n_test,
            shear_range: gen.shear_range,
            train_noise: gen.train_noise,
            model: train.model.name().into(),
            bridge: "default".into(),
            epochs: train.epochs,
            lr: train.learning_rate,
            batch: train.batch_size,
            optimizer: "adam".into(),
            scenario: "both".into(),
            tape_mode: "store".into(),
            threads: 0,
            out: PathBuf::from("runs/qpu"),
            data: PathBuf::new(),
        }
    }
}

fn bad(what: &str, value: &str, allowed: &str) -> Error {
    Error::Contradiction(format!("unknown {what} `{value}` (expected one of {allowed})"))
}

pub fn parse_model(s: &str) -> Result<ModelKind> {
    ModelKind::from_name(s).ok_or_else(|| bad("model", s, "rmlp, qmlp, qmlp_rinv"))
}

/// `None` for `default`.
pub fn parse_bridge(s: &str) -> Result<Option<BridgeMode>> {
    if s == "default" {
        return Ok(None);
    }
    BridgeMode::from_name(&s.replace('_', "-"))
        .map(Some)
        .ok_or_else(|| bad("bridge", s, "default, keep-real, keep-imaginary, flatten4, angle-axis"))
}

pub fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::ADAM),
        _ => Err(bad("optimizer", s, "sgd, adam")),
    }
}

pub fn parse_scenarios(s: &str) -> Result<Vec<Scenario>> {
    match s {
        "both" => Ok(Scenario::ALL.to_vec()),
        _ => Scenario::from_name(s).map(|x| vec![x]).ok_or_else(|| bad("scenario", s, "no-rotation, arbitrary-rotation, both")),
    }
}

pub fn parse_tape_mode(s: &str) -> Result<TapeMode> {
    match s {
        "store" => Ok(TapeMode::Store),
        "recompute" => Ok(TapeMode::Recompute),
        _ => Err(bad("tape mode", s, "store, recompute")),
    }
}

impl Settings {
    /// Flags win over the file, the file over built-in defaults.
    pub fn resolve(flags: &Overrides, file: Option<&Overrides>) -> Result<Self> {
        let none = Overrides::default();
        let file = file.unwrap_or(&none);
        let d = Settings::default();
        macro_rules! pick {
            ($f:ident) => {
                flags.$f.clone().or_else(|| file.$f.clone()).unwrap_or(d.$f)
            };
        }
        let s = Settings {
            seed: pick!(seed),
            sigma: pick!(sigma),
            n_edges: pick!(n_edges),
            n_train: pick!(n_train),
            n_test: pick!(n_test),
            shear_range: pick!(shear_range),
            train_noise: pick!(train_noise),
            model: pick!(model),
            bridge: pick!(bridge),
            epochs: pick!(epochs),
            lr: pick!(lr),
            batch: pick!(batch),
            optimizer: pick!(optimizer),
            scenario: pick!(scenario),
            tape_mode: pick!(tape_mode),
            threads: pick!(threads),
            out: pick!(out),
            data: pick!(data),
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        self.gen_config().validate()?;
        self.train_config()?.validate()?;
        parse_scenarios(&self.scenario)?;
        Ok(())
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n_edges: self.n_edges,
            n_train: self.n_train,
            n_test: self.n_test,
            sigma: self.sigma,
            shear_range: self.shear_range,
            seed: self.seed,
            train_noise: self.train_noise,
        }
    }

    /// Replaces the data settings with those stored in a dataset file. The
    /// seed is left alone since it also drives training.
    pub fn adopt_data(&mut self, g: &GenConfig) {
        self.n_edges = g.n_edges;
        self.n_train = g.n_train;
        self.n_test = g.n_test;
        self.sigma = g.sigma;
        self.shear_range = g.shear_range;
        self.train_noise = g.train_noise;
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            learning_rate: self.lr,
            optimizer: parse_optimizer(&self.optimizer)?,
            seed: self.seed,
            model: parse_model(&self.model)?,
            bridge: parse_bridge(&self.bridge)?,
            tape_mode: parse_tape_mode(&self.tape_mode)?,
        })
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        parse_scenarios(&self.scenario).expect("checked on resolve")
    }

    pub fn data_path(&self) -> Option<&Path> {
        (!self.data.as_os_str().is_empty()).then_some(self.data.as_path())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat settings serialize")
    }
}
