//! `qpu`: generate CubeEdge data, train and evaluate the QPU models, check
//! gradients and rotation invariance, and benchmark the chain product.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qpu_core::cubeedge::{class_histogram, generate_dataset, Dataset, GenConfig};
use qpu_core::layers::ModelGraph;
use rand::SeedableRng;

use qpu_kit::bench::{bench_chain, default_lengths};
use qpu_kit::checkpoint::{checkpoint_path, load_checkpoint, save_checkpoint, Checkpoint};
use qpu_kit::config::{Overrides, Settings};
use qpu_kit::format::{load_dataset, save_dataset};
use qpu_kit::gradcheck::{gradcheck_model, random_batch, target_model, TARGETS};
use qpu_kit::invariance::verify_invariance;
use qpu_kit::metrics::{EpochRecord, MetricsLog};
use qpu_kit::train::{evaluate, train, EvalReport, Scenario};
use qpu_kit::{Error, Executor};

/// File name of the dataset inside a `gen-data` output directory.
const DATASET_FILE: &str = "cubeedge.bin";

#[derive(Parser, Debug)]
#[command(name = "qpu", version, about = "Quaternion product unit toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a CubeEdge dataset and print its class histogram.
    GenData {
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Train a model; writes checkpoints and a metrics log under --out.
    Train {
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        common: CommonFlags,
        #[arg(long = "data", value_name = "DATA", help = "Dataset file or gen-data directory; generated from the data flags when absent [default: none]")]
        data_path: Option<PathBuf>,
        #[arg(long, help = "Evaluation scenario: no-rotation, arbitrary-rotation or both [default: both]")]
        scenario: Option<String>,
    },
    /// Evaluate a checkpoint under one or both rotation scenarios.
    Eval {
        #[arg(long, help = "Checkpoint file written by train (required)")]
        checkpoint: PathBuf,
        #[arg(long, help = "Seed of the per-sample test rotations [default: 0]")]
        seed: Option<u64>,
        #[arg(long, help = "Test-set noise when regenerating from the checkpoint [default: checkpoint's]")]
        sigma: Option<f64>,
        #[arg(long, help = "Dataset file or gen-data directory [default: regenerate from checkpoint]")]
        data: Option<PathBuf>,
        #[arg(long, help = "Evaluation scenario: no-rotation, arbitrary-rotation or both [default: both]")]
        scenario: Option<String>,
        #[arg(long, help = "Worker threads, 0 for all cores [default: 0]")]
        threads: Option<usize>,
        #[arg(long, help = "TOML file supplying defaults for these flags [default: none]")]
        config: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value = "qmlp", help = "Model to check: qmlp, qmlp_rinv, rmlp, aggregate or all")]
        layers: String,
        #[arg(long, default_value_t = 1e-5, help = "Largest accepted relative error")]
        tol: f64,
        #[arg(long, help = "Seed of the model and the batch [default: 0]")]
        seed: Option<u64>,
        #[arg(long, help = "Tape strategy: store or recompute [default: store]")]
        tape_mode: Option<String>,
        #[arg(long, help = "TOML file supplying defaults for these flags [default: none]")]
        config: Option<PathBuf>,
    },
    /// Measure QPU rotation invariance over random trials.
    VerifyInvariance {
        #[arg(long, default_value_t = 1000, help = "Number of random trials")]
        trials: usize,
        #[arg(long, default_value_t = 8, help = "Input quaternions per QPU")]
        inputs: usize,
        #[arg(long, help = "Seed of the trials [default: 0]")]
        seed: Option<u64>,
        #[arg(long, help = "Worker threads, 0 for all cores [default: 0]")]
        threads: Option<usize>,
        #[arg(long, help = "TOML file supplying defaults for these flags [default: none]")]
        config: Option<PathBuf>,
    },
    /// Time sequential against tree chain products.
    Bench {
        #[arg(long, default_value_t = 7, help = "Timed batches per chain length; the best is kept")]
        reps: usize,
        #[arg(long, help = "Seed of the benchmarked chains [default: 0]")]
        seed: Option<u64>,
        #[arg(long, help = "Worker threads, 0 for all cores [default: 0]")]
        threads: Option<usize>,
        #[arg(long, help = "Also write the table as JSON to this file [default: none]")]
        out: Option<PathBuf>,
        #[arg(long, help = "TOML file supplying defaults for these flags [default: none]")]
        config: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct DataFlags {
    #[arg(long, help = "Seed for data, initialization and shuffling [default: 0]")]
    seed: Option<u64>,
    #[arg(long, help = "Test-set vertex noise standard deviation [default: 0]")]
    sigma: Option<f64>,
    #[arg(long, help = "Edges per skeleton; 2^(n-2) classes [default: 7]")]
    n_edges: Option<usize>,
    #[arg(long, help = "Training samples [default: 2000]")]
    n_train: Option<usize>,
    #[arg(long, help = "Test samples [default: 2000]")]
    n_test: Option<usize>,
    #[arg(long, help = "Shear factors drawn from [-r, r] [default: 0.5]")]
    shear_range: Option<f64>,
    #[arg(long, help = "Add vertex noise to the training split too [default: false]")]
    train_noise: bool,
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    #[arg(long, help = "Model: rmlp, qmlp or qmlp_rinv [default: qmlp]")]
    model: Option<String>,
    #[arg(long, help = "Bridge: default, keep-real, keep-imaginary, flatten4 or angle-axis [default: default]")]
    bridge: Option<String>,
    #[arg(long, help = "Training epochs [default: 50]")]
    epochs: Option<usize>,
    #[arg(long, help = "Learning rate [default: 0.001]")]
    lr: Option<f64>,
    #[arg(long, help = "Mini-batch size [default: 32]")]
    batch: Option<usize>,
    #[arg(long, help = "Optimizer: sgd or adam [default: adam]")]
    optimizer: Option<String>,
    #[arg(long, help = "Tape strategy: store or recompute [default: store]")]
    tape_mode: Option<String>,
}

#[derive(Args, Debug, Default)]
struct CommonFlags {
    #[arg(long, help = "Worker threads, 0 for all cores [default: 0]")]
    threads: Option<usize>,
    #[arg(long, help = "Output directory [default: runs/qpu]")]
    out: Option<PathBuf>,
    #[arg(long, help = "TOML file supplying defaults for these flags [default: none]")]
    config: Option<PathBuf>,
}

impl DataFlags {
    fn apply(&self, o: &mut Overrides) {
        o.seed = self.seed;
        o.sigma = self.sigma;
        o.n_edges = self.n_edges;
        o.n_train = self.n_train;
        o.n_test = self.n_test;
        o.shear_range = self.shear_range;
        o.train_noise = self.train_noise.then_some(true);
    }
}

impl ModelFlags {
    fn apply(&self, o: &mut Overrides) {
        o.model = self.model.clone();
        o.bridge = self.bridge.clone();
        o.epochs = self.epochs;
        o.lr = self.lr;
        o.batch = self.batch;
        o.optimizer = self.optimizer.clone();
        o.tape_mode = self.tape_mode.clone();
    }
}

impl CommonFlags {
    fn apply(&self, o: &mut Overrides) {
        o.threads = self.threads;
        o.out = self.out.clone();
    }
}

fn resolve(flags: &Overrides, config: Option<&Path>) -> Result<Settings, Error> {
    resolve_with_file(flags, config).map(|(s, _)| s)
}

/// Also hands back the parsed config file.
fn resolve_with_file(flags: &Overrides, config: Option<&Path>) -> Result<(Settings, Option<Overrides>), Error> {
    let file = config.map(Overrides::load).transpose()?;
    let settings = Settings::resolve(flags, file.as_ref())?;
    println!("# resolved configuration");
    print!("{}", settings.to_toml());
    if let Some(c) = config {
        println!("# config file: {}", c.display());
    }
    println!();
    Ok((settings, file))
}

fn dataset_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(DATASET_FILE)
    } else {
        path.to_path_buf()
    }
}

fn print_histogram(data: &Dataset) {
    let classes = data.config.classes();
    let train = class_histogram(&data.train, classes);
    let test = class_histogram(&data.test, classes);
    println!("{:>5} {:>6} {:>6}", "class", "train", "test");
    for c in 0..classes {
        println!("{c:>5} {:>6} {:>6}", train[c], test[c]);
    }
    println!("{:>5} {:>6} {:>6}", "total", data.train.len(), data.test.len());
}

fn print_reports(label: &str, reports: &[EvalReport]) {
    for r in reports {
        println!(
            "{label} scenario={} sigma={} accuracy={:.4} ({}/{})",
            r.scenario.name(),
            r.sigma,
            r.accuracy,
            r.correct,
            r.total
        );
    }
}

fn gen_data(data: &DataFlags, common: &CommonFlags) -> Result<(), Error> {
    let mut o = Overrides::default();
    data.apply(&mut o);
    common.apply(&mut o);
    let s = resolve(&o, common.config.as_deref())?;
    let dataset = generate_dataset(&s.gen_config())?;
    let path = s.out.join(DATASET_FILE);
    save_dataset(&path, &dataset)?;
    print_histogram(&dataset);
    println!("wrote {}", path.display());
    Ok(())
}

fn load_or_generate(s: &Settings) -> Result<Dataset, Error> {
    match s.data_path() {
        Some(p) => {
            let d = load_dataset(&dataset_file(p))?;
            let g = &d.config;
            println!("loaded {} ({} train, {} test)", p.display(), d.train.len(), d.test.len());
            println!(
                "dataset header: n_edges={} sigma={} shear_range={} seed={} train_noise={}",
                g.n_edges, g.sigma, g.shear_range, g.seed, g.train_noise
            );
            Ok(d)
        }
        None => Ok(generate_dataset(&s.gen_config())?),
    }
}

fn run_train(
    data: &DataFlags,
    model: &ModelFlags,
    common: &CommonFlags,
    data_path: &Option<PathBuf>,
    scenario: &Option<String>,
) -> Result<(), Error> {
    let mut o = Overrides::default();
    data.apply(&mut o);
    model.apply(&mut o);
    common.apply(&mut o);
    o.data = data_path.clone();
    o.scenario = scenario.clone();
    let mut s = resolve(&o, common.config.as_deref())?;
    let exec = Executor::new(s.threads)?;
    let dataset = load_or_generate(&s)?;
    s.adopt_data(&dataset.config);
    let cfg = s.train_config()?;
    let net = cfg.build_model(&dataset.config)?;
    println!("model {} with {} parameters, {} threads", cfg.model.name(), net.param_count(), exec.threads());

    std::fs::create_dir_all(&s.out).map_err(|e| Error::io(&s.out, e))?;
    std::fs::write(s.out.join("config.toml"), s.to_toml()).map_err(|e| Error::io(&s.out, e))?;
    let mut log = MetricsLog::create(&s.out.join("metrics.jsonl"))?;
    let scenarios = s.scenarios();
    let sigma = dataset.config.sigma;
    let started = Instant::now();
    let outcome = train(net, &dataset.train, &cfg, &exec, |stats, m| {
        let mut rec = EpochRecord {
            epoch: stats.epoch,
            train_loss: stats.loss,
            smoothed_loss: stats.smoothed_loss,
            acc_no_rotation: None,
            acc_arbitrary_rotation: None,
        };
        for &sc in &scenarios {
            let acc = Some(evaluate(m, &dataset.test, sigma, sc, s.seed, &exec)?.accuracy);
            match sc {
                Scenario::NoRotation => rec.acc_no_rotation = acc,
                Scenario::ArbitraryRotation => rec.acc_arbitrary_rotation = acc,
            }
        }
        log.append(&rec)?;
        let ckpt = Checkpoint::new(stats.epoch, cfg.clone(), dataset.config.clone(), m.clone());
        save_checkpoint(&checkpoint_path(&s.out, stats.epoch), &ckpt)?;
        let fmt = |a: Option<f64>| a.map_or("-".to_string(), |a| format!("{a:.4}"));
        println!(
            "epoch {:>3} loss {:.5} smoothed {:.5} acc(no-rot) {} acc(rot) {} [{:.1}s]",
            stats.epoch,
            stats.loss,
            stats.smoothed_loss,
            fmt(rec.acc_no_rotation),
            fmt(rec.acc_arbitrary_rotation),
            started.elapsed().as_secs_f64()
        );
        Ok(())
    })?;
    if cfg.epochs == 0 {
        let ckpt = Checkpoint::new(0, cfg.clone(), dataset.config.clone(), outcome.model.clone());
        save_checkpoint(&checkpoint_path(&s.out, 0), &ckpt)?;
    }
    println!("initial loss {:.5}", outcome.initial_loss);
    let reports = scenarios
        .iter()
        .map(|&sc| evaluate(&outcome.model, &dataset.test, sigma, sc, s.seed, &exec))
        .collect::<Result<Vec<_>, _>>()?;
    print_reports("final", &reports);
    println!("checkpoint {}", checkpoint_path(&s.out, cfg.epochs).display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    checkpoint: &Path,
    seed: Option<u64>,
    sigma: Option<f64>,
    data: &Option<PathBuf>,
    scenario: &Option<String>,
    threads: Option<usize>,
    config: Option<&Path>,
) -> Result<(), Error> {
    let o = Overrides { seed, sigma, data: data.clone(), scenario: scenario.clone(), threads, ..Overrides::default() };
    let (s, file) = resolve_with_file(&o, config)?;
    let ckpt = load_checkpoint(checkpoint)?;
    let exec = Executor::new(s.threads)?;
    let dataset = match s.data_path() {
        Some(_) => load_or_generate(&s)?,
        None => {
            let file_sigma = file.as_ref().and_then(|f| f.sigma);
            let gen = GenConfig { sigma: sigma.or(file_sigma).unwrap_or(ckpt.data.sigma), n_train: 0, ..ckpt.data.clone() };
            generate_dataset(&gen)?
        }
    };
    println!("checkpoint {} (epoch {}, model {})", checkpoint.display(), ckpt.epoch, ckpt.train.model.name());
    let reports = s
        .scenarios()
        .into_iter()
        .map(|sc| evaluate(&ckpt.model, &dataset.test, dataset.config.sigma, sc, s.seed, &exec))
        .collect::<Result<Vec<_>, _>>()?;
    print_reports("eval", &reports);
    for r in &reports {
        let per_class: Vec<String> =
            r.per_class.iter().map(|a| a.map_or("-".to_string(), |a| format!("{a:.2}"))).collect();
        println!("per-class {}: {}", r.scenario.name(), per_class.join(" "));
    }
    Ok(())
}

/// Returns whether every row passed.
fn run_gradcheck(layers: &str, tol: f64, o: &Overrides, config: Option<&Path>) -> Result<bool, Error> {
    let s = resolve(o, config)?;
    let targets: Vec<&str> = if layers == "all" { TARGETS.to_vec() } else { vec![layers] };
    let mut all_pass = true;
    println!("{:<10} {:<36} {:>6} {:>12} {:>6}", "model", "parameters", "count", "max rel err", "result");
    for name in targets {
        let mut model: ModelGraph = target_model(name, s.seed)?;
        model.set_tape_mode(qpu_kit::config::parse_tape_mode(&s.tape_mode)?);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(1));
        let batch = random_batch(4, model.input, 5, &mut rng);
        for row in gradcheck_model(&model, &batch, tol)? {
            all_pass &= row.pass;
            let verdict = if row.pass { "PASS" } else { "FAIL" };
            println!("{name:<10} {:<36} {:>6} {:>12.3e} {verdict:>6}", row.name, row.count, row.max_rel_err);
        }
    }
    println!("{}", if all_pass { "gradcheck PASS" } else { "gradcheck FAIL" });
    Ok(all_pass)
}

/// Tolerance on both invariance deviations.
const INVARIANCE_TOL: f64 = 1e-9;

fn run_verify(trials: usize, inputs: usize, o: &Overrides, config: Option<&Path>) -> Result<bool, Error> {
    let s = resolve(o, config)?;
    let exec = Executor::new(s.threads)?;
    let started = Instant::now();
    let r = verify_invariance(trials, inputs, s.seed, &exec)?;
    let ok = r.max_real_dev <= INVARIANCE_TOL && r.max_imag_dev <= INVARIANCE_TOL;
    println!("trials {} inputs {}", r.trials, r.inputs);
    println!("max real-part deviation   {:.3e}", r.max_real_dev);
    println!("max imaginary deviation   {:.3e}", r.max_imag_dev);
    println!("elapsed {:.3}s", started.elapsed().as_secs_f64());
    println!("{} (tolerance {INVARIANCE_TOL:e})", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run_bench(reps: usize, o: &Overrides, out: &Option<PathBuf>, config: Option<&Path>) -> Result<(), Error> {
    let s = resolve(o, config)?;
    let exec = Executor::new(s.threads)?;
    let rows = bench_chain(&default_lengths(), reps, s.seed, &exec)?;
    println!("threads {}", exec.threads());
    println!(
        "{:>5} {:>5} {:>8} {:>12} {:>12} {:>8} {:>10} {:>7} {:>9}",
        "N", "depth", "log2 N", "seq (ns)", "tree (ns)", "speedup", "max diff", "muls", "17N-16"
    );
    for r in &rows {
        println!(
            "{:>5} {:>5} {:>8} {:>12.1} {:>12.1} {:>8.2} {:>10.1e} {:>7} {:>9}",
            r.n,
            r.depth,
            r.expected_depth,
            r.sequential_secs * 1e9,
            r.tree_secs * 1e9,
            r.speedup(),
            r.max_diff,
            r.muls,
            r.formula_muls
        );
    }
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Exit status per failure class; each also gets its own message prefix.
fn exit_code(e: &Error) -> (u8, &'static str) {
    match e {
        Error::MissingFile(_) => (3, "missing file"),
        Error::Contradiction(_) | Error::ConfigFile { .. } => (4, "invalid configuration"),
        Error::Core(qpu_core::Error::InvalidConfig(_)) => (4, "invalid configuration"),
        Error::Format(_) | Error::Checkpoint { .. } => (5, "bad file format"),
        Error::Io { .. } => (6, "io error"),
        Error::Core(_) | Error::ThreadPool(_) => (1, "error"),
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::GenData { data, common } => gen_data(&data, &common).map(|_| true),
        Command::Train { data, model, common, data_path, scenario } => {
            run_train(&data, &model, &common, &data_path, &scenario).map(|_| true)
        }
        Command::Eval { checkpoint, seed, sigma, data, scenario, threads, config } => {
            run_eval(&checkpoint, seed, sigma, &data, &scenario, threads, config.as_deref()).map(|_| true)
        }
        Command::Gradcheck { layers, tol, seed, tape_mode, config } => {
            let o = Overrides { seed, tape_mode, ..Overrides::default() };
            run_gradcheck(&layers, tol, &o, config.as_deref())
        }
        Command::VerifyInvariance { trials, inputs, seed, threads, config } => {
            let o = Overrides { seed, threads, ..Overrides::default() };
            run_verify(trials, inputs, &o, config.as_deref())
        }
        Command::Bench { reps, seed, threads, out, config } => {
            let o = Overrides { seed, threads, ..Overrides::default() };
            run_bench(reps, &o, &out, config.as_deref()).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let (code, kind) = exit_code(&e);
            eprintln!("error: {kind}: {e}");
            ExitCode::from(code)
        }
    }
}
