//! Training loops: progressive-K ISL in one dimension, ISL-slicing and the
//! per-marginal baseline in several, plus the Pareto-ISL noise setup.
//!
//! Both trainers step one epoch at a time so callers can interleave their own
//! evaluation; `train_*` run a whole configuration.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::diff_engine::checkpoint::{read_params, write_params};
use crate::diff_engine::{adam_step, mlp_forward, AdamState, GeneratorSpec, ParamVector};
use crate::distributions::{sample_noise, sample_target, sample_unit_sphere, NoiseSpec, TargetSpec};
use crate::error::{IslError, Result};
use crate::isl_loss::{
    axis_directions, isl_loss_and_gradient, marginal_isl_loss, sliced_isl_loss, IslHyperparams, LossAndGrad,
    Standardizer, SurrogateSettings,
};
use crate::matrix::Matrix;
use crate::rank_stats::{chi2_uniformity, hard_rank, Chi2Outcome, RankHistogram};
use crate::rng::RandomSource;

/// Seconds since the call; `None` on wasm32, which has no clock in std.
#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> Option<f64> {
    let start = std::time::Instant::now();
    move || Some(start.elapsed().as_secs_f64())
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> Option<f64> {
    || None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "isl_1d")]
    Isl1d,
    ParetoIsl,
    IslSliced,
    IslMarginal,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Isl1d => "isl_1d",
            Method::ParetoIsl => "pareto_isl",
            Method::IslSliced => "isl_sliced",
            Method::IslMarginal => "isl_marginal",
        }
    }

    pub fn is_one_dimensional(self) -> bool {
        matches!(self, Method::Isl1d | Method::ParetoIsl)
    }
}

fn default_k_max() -> usize {
    10
}
fn default_batch_size() -> usize {
    100
}
fn default_dataset_size() -> usize {
    1000
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_projections() -> usize {
    10
}
fn default_chi2_alpha() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub target: TargetSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub hyper: SurrogateSettings,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Strictly increasing, ending at `k_max`; even numbers up to `k_max` when
    /// absent.
    #[serde(default)]
    pub k_schedule: Option<Vec<usize>>,
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_dataset_size")]
    pub dataset_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// When set, the step size follows a cosine from `learning_rate` down to
    /// this value over `epochs`; constant otherwise.
    #[serde(default)]
    pub lr_final: Option<f64>,
    /// Random directions per iteration (slicing only).
    #[serde(default = "default_projections")]
    pub projections: usize,
    #[serde(default = "default_chi2_alpha")]
    pub chi2_alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Train on median/IQR-standardized data; samples are mapped back.
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Slicing with these unit directions instead of random ones.
    #[serde(default)]
    pub fixed_directions: Option<Vec<Vec<f64>>>,
}

/// Even numbers `2, 4, ..` up to `k_max`, always ending at `k_max`.
pub fn default_k_schedule(k_max: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (1..=k_max / 2).map(|i| 2 * i).collect();
    if s.last() != Some(&k_max) {
        s.push(k_max);
    }
    s
}

impl TrainConfig {
    pub fn new(target: TargetSpec, noise: NoiseSpec, generator: GeneratorSpec, epochs: usize) -> Self {
        TrainConfig {
            target,
            noise,
            generator,
            hyper: SurrogateSettings::default(),
            k_max: default_k_max(),
            k_schedule: None,
            epochs,
            batch_size: default_batch_size(),
            dataset_size: default_dataset_size(),
            learning_rate: default_learning_rate(),
            lr_final: None,
            projections: default_projections(),
            chi2_alpha: default_chi2_alpha(),
            seed: 0,
            standardize: true,
            fixed_directions: None,
        }
    }

    pub fn schedule(&self) -> Vec<usize> {
        self.k_schedule
            .clone()
            .unwrap_or_else(|| default_k_schedule(self.k_max))
    }

    /// Step size for a 1-based epoch.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_final {
            None => self.learning_rate,
            Some(end) => {
                if self.epochs <= 1 {
                    return self.learning_rate;
                }
                let t = ((epoch.max(1) - 1) as f64 / (self.epochs - 1) as f64).min(1.0);
                end + 0.5 * (self.learning_rate - end) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IslError::InvalidConfig(m));
        self.target.validate()?;
        self.noise.validate()?;
        self.generator.validate()?;
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.dataset_size == 0 || self.batch_size == 0 || self.batch_size > self.dataset_size {
            return bad(format!(
                "need 1 <= batch_size <= dataset_size, got {} and {}",
                self.batch_size, self.dataset_size
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if let Some(f) = self.lr_final {
            if !(f >= 0.0) || !f.is_finite() {
                return bad(format!("lr_final must be finite and >= 0, got {f}"));
            }
        }
        if !(self.chi2_alpha > 0.0 && self.chi2_alpha < 1.0) {
            return bad(format!("chi2_alpha must lie in (0, 1), got {}", self.chi2_alpha));
        }
        if self.projections == 0 {
            return bad("projections must be >= 1".into());
        }
        let schedule = self.schedule();
        if schedule.first().is_none_or(|&k| k == 0) || schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("k_schedule must be positive and strictly increasing, got {schedule:?}"));
        }
        if schedule.last() != Some(&self.k_max) {
            return bad(format!("k_schedule {schedule:?} must end at k_max = {}", self.k_max));
        }
        self.hyper.at_k(self.k_max).validate()?;
        if self.generator.input_dim() != self.noise.dim {
            return Err(IslError::shape(
                format!("generator input width {} (noise dim)", self.noise.dim),
                self.generator.input_dim(),
            ));
        }
        if self.generator.output_dim() != self.target.dim() {
            return Err(IslError::shape(
                format!("generator output width {} (target dim)", self.target.dim()),
                self.generator.output_dim(),
            ));
        }
        if let Some(dirs) = &self.fixed_directions {
            if dirs.is_empty() || dirs.iter().any(|d| d.len() != self.target.dim()) {
                return bad("fixed_directions must be a nonempty list of target-dimension vectors".into());
            }
        }
        Ok(())
    }
}

/// What happened in one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// K used for the updates of this epoch.
    pub k: usize,
    /// Mean surrogate loss over the epoch's minibatches.
    pub loss: f64,
    /// Uniformity test on hard ranks after the epoch (1D training only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi2: Option<Chi2Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub epochs: Vec<EpochRecord>,
    pub final_k: usize,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn total_wall_clock_secs(&self) -> f64 {
        self.epochs.iter().filter_map(|e| e.wall_clock_secs).sum()
    }

    pub fn clear_timings(&mut self) {
        self.epochs.iter_mut().for_each(|e| e.wall_clock_secs = None);
    }

    /// K never decreases and never exceeds `k_max`.
    pub fn check_k_schedule(&self, k_max: usize) -> Result<()> {
        for w in self.epochs.windows(2) {
            if w[1].k < w[0].k {
                return Err(IslError::InvalidConfig(format!("K decreased at epoch {}", w[1].epoch)));
            }
        }
        if self.epochs.iter().any(|e| e.k > k_max) {
            return Err(IslError::InvalidConfig(format!("K exceeded k_max = {k_max}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GeneratorMeta {
    spec: GeneratorSpec,
    noise: NoiseSpec,
    transform: Standardizer,
}

/// A trained generator together with its noise law and the map back to data
/// units.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedGenerator {
    pub spec: GeneratorSpec,
    pub params: ParamVector,
    pub noise: NoiseSpec,
    pub transform: Standardizer,
}

impl TrainedGenerator {
    pub fn dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Push noise rows through the network and back to data units.
    pub fn map(&self, z: &Matrix) -> Result<Matrix> {
        Ok(self.transform.inverse(&mlp_forward(&self.params, &self.spec, z)?))
    }

    pub fn sample(&self, n: usize, rng: &mut RandomSource) -> Result<Matrix> {
        self.map(&sample_noise(&self.noise, n, rng)?)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let meta = GeneratorMeta {
            spec: self.spec.clone(),
            noise: self.noise.clone(),
            transform: self.transform.clone(),
        };
        write_params(w, &self.params, &meta)
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let (params, meta): (ParamVector, GeneratorMeta) = read_params(r)?;
        if params.layout != meta.spec.layout() {
            return Err(IslError::Checkpoint("parameter layout does not match the generator spec".into()));
        }
        Ok(TrainedGenerator {
            spec: meta.spec,
            params,
            noise: meta.noise,
            transform: meta.transform,
        })
    }
}

/// Result of a full training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub report: TrainReport,
    pub generator: TrainedGenerator,
}

fn diverged(epoch: usize) -> impl Fn(IslError) -> IslError {
    move |e| match e {
        IslError::NonFinite(reason) => IslError::Diverged { epoch, reason },
        other => other,
    }
}

/// State shared by both trainers.
struct Core {
    config: TrainConfig,
    params: ParamVector,
    adam: AdamState,
    data: Matrix,
    transform: Standardizer,
    shuffle_rng: RandomSource,
    noise_rng: RandomSource,
    epoch: usize,
    records: Vec<EpochRecord>,
}

impl Core {
    fn new(config: TrainConfig, data: Option<Matrix>) -> Result<Self> {
        config.validate()?;
        let root = RandomSource::new(config.seed);
        let data = match data {
            Some(d) => {
                if d.cols() != config.target.dim() {
                    return Err(IslError::shape(config.target.dim(), d.cols()));
                }
                if d.rows() < config.batch_size {
                    return Err(IslError::InvalidConfig(format!(
                        "{} observations cannot fill a batch of {}",
                        d.rows(),
                        config.batch_size
                    )));
                }
                d
            }
            None => sample_target(&config.target, config.dataset_size, &mut root.substream("data"))?,
        };
        let transform = if config.standardize {
            Standardizer::fit(&data)?
        } else {
            Standardizer::identity(data.cols())
        };
        let params = config.generator.init_params()?;
        let adam = AdamState::new(params.len(), config.learning_rate);
        Ok(Core {
            data: transform.forward(&data),
            transform,
            params,
            adam,
            shuffle_rng: root.substream("shuffle"),
            noise_rng: root.substream("noise"),
            epoch: 0,
            records: Vec::new(),
            config,
        })
    }

    /// Advances the epoch counter and sets the epoch's step size.
    fn begin_epoch(&mut self) -> usize {
        self.epoch += 1;
        self.adam.learning_rate = self.config.learning_rate_at(self.epoch);
        self.epoch
    }

    fn batches(&mut self) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.data.rows()).collect();
        self.shuffle_rng.shuffle(&mut idx);
        idx.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect()
    }

    fn apply(&mut self, lg: &LossAndGrad) -> Result<()> {
        adam_step(&mut self.adam, &mut self.params.values, &lg.grad.values).map_err(diverged(self.epoch))
    }

    fn set_params(&mut self, params: ParamVector) -> Result<()> {
        let layout = self.config.generator.layout();
        if params.layout != layout || params.values.len() != layout.len {
            return Err(IslError::shape(format!("{} parameters", layout.len), params.values.len()));
        }
        self.adam = AdamState::new(params.len(), self.config.learning_rate);
        self.params = params;
        Ok(())
    }

    fn generator(&self) -> TrainedGenerator {
        TrainedGenerator {
            spec: self.config.generator.clone(),
            params: self.params.clone(),
            noise: self.config.noise.clone(),
            transform: self.transform.clone(),
        }
    }

    fn finish(self, method: Method, final_k: usize) -> TrainRun {
        let generator = self.generator();
        TrainRun {
            report: TrainReport {
                method,
                epochs: self.records,
                final_k,
                metrics: BTreeMap::new(),
                checkpoint: None,
            },
            generator,
        }
    }
}

/// Progressive-K training of a generator with one output.
///
/// Each epoch is one pass of minibatch updates at the current K. Afterwards
/// every training observation is ranked against K fresh fakes, and when the
/// Pearson test accepts uniformity K moves to the next schedule entry.
pub struct Trainer1d {
    core: Core,
    method: Method,
    schedule: Vec<usize>,
    stage: usize,
    gate_rng: RandomSource,
}

impl Trainer1d {
    pub fn new(config: TrainConfig) -> Result<Self> {
        Self::build(config, None, Method::Isl1d)
    }

    /// Train on the given observations instead of sampling the target.
    pub fn with_data(config: TrainConfig, data: Matrix) -> Result<Self> {
        Self::build(config, Some(data), Method::Isl1d)
    }

    fn build(config: TrainConfig, data: Option<Matrix>, method: Method) -> Result<Self> {
        if config.target.dim() != 1 || config.generator.output_dim() != 1 {
            return Err(IslError::InvalidConfig("1D training needs a 1D target and generator output".into()));
        }
        let gate_rng = RandomSource::new(config.seed).substream("gate");
        let schedule = config.schedule();
        let core = Core::new(config, data)?;
        Ok(Trainer1d {
            core,
            method,
            schedule,
            stage: 0,
            gate_rng,
        })
    }

    pub fn current_k(&self) -> usize {
        self.schedule[self.stage]
    }

    pub fn epochs_run(&self) -> usize {
        self.core.epoch
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.core.records
    }

    /// Replace the initial weights (resets the optimizer state).
    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        self.core.set_params(params)
    }

    pub fn generator(&self) -> TrainedGenerator {
        self.core.generator()
    }

    /// Hard-rank histogram of the (standardized) training set against fresh
    /// generator draws.
    fn gate_histogram(&mut self, k: usize) -> Result<RankHistogram> {
        let core = &self.core;
        let n = core.data.rows();
        let z = sample_noise(&core.config.noise, n * k, &mut self.gate_rng)?;
        let fakes = mlp_forward(&core.params, &core.config.generator, &z)?.into_vec();
        let mut hist = RankHistogram::new(k);
        for (i, y) in core.data.as_slice().iter().enumerate() {
            hist.record(hard_rank(*y, &fakes[i * k..(i + 1) * k])?);
        }
        Ok(hist)
    }

    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        let elapsed = stopwatch();
        let epoch = self.core.begin_epoch();
        let k = self.current_k();
        let hyper: IslHyperparams = self.core.config.hyper.at_k(k);
        let mut total = 0.0;
        let batches = self.core.batches();
        for batch in &batches {
            let core = &mut self.core;
            let real: Vec<f64> = batch.iter().map(|&i| core.data.get(i, 0)).collect();
            let noise = sample_noise(&core.config.noise, hyper.fakes_per_projection(real.len()), &mut core.noise_rng)?;
            let lg = isl_loss_and_gradient(&core.params, &real, &noise, &hyper, &core.config.generator)
                .map_err(diverged(epoch))?;
            core.apply(&lg)?;
            total += lg.loss;
        }
        let hist = self.gate_histogram(k)?;
        let chi2 = chi2_uniformity(&hist, self.core.config.chi2_alpha)?;
        if chi2.accept && self.stage + 1 < self.schedule.len() {
            self.stage += 1;
        }
        self.core.records.push(EpochRecord {
            epoch,
            k,
            loss: total / batches.len() as f64,
            chi2: Some(chi2),
            wall_clock_secs: elapsed(),
        });
        Ok(self.core.records.last().expect("just pushed"))
    }

    pub fn finish(self) -> TrainRun {
        let k = self.current_k();
        self.core.finish(self.method, k)
    }
}

/// How a multivariate trainer projects each minibatch.
#[derive(Clone, Debug, PartialEq)]
pub enum Projections {
    /// `m` fresh uniform directions per iteration.
    Random { m: usize },
    /// The same unit directions every iteration.
    Fixed(Matrix),
    /// Sum of the per-coordinate losses.
    Marginal,
}

/// ISL-slicing (or the per-marginal baseline) at a fixed K = `k_max`.
///
/// Each iteration draws the directions, one minibatch and a fresh block of K
/// fakes per direction, and takes one Adam step on the mean projected loss.
pub struct TrainerSliced {
    core: Core,
    projections: Projections,
    proj_rng: RandomSource,
}

impl TrainerSliced {
    pub fn new(config: TrainConfig, marginal: bool) -> Result<Self> {
        Self::build(config, None, marginal)
    }

    pub fn with_data(config: TrainConfig, data: Matrix, marginal: bool) -> Result<Self> {
        Self::build(config, Some(data), marginal)
    }

    fn build(config: TrainConfig, data: Option<Matrix>, marginal: bool) -> Result<Self> {
        let projections = if marginal {
            Projections::Marginal
        } else if let Some(dirs) = &config.fixed_directions {
            Projections::Fixed(Matrix::from_rows(dirs)?)
        } else {
            Projections::Random { m: config.projections }
        };
        let proj_rng = RandomSource::new(config.seed).substream("projections");
        let core = Core::new(config, data)?;
        Ok(TrainerSliced {
            core,
            projections,
            proj_rng,
        })
    }

    pub fn k(&self) -> usize {
        self.core.config.k_max
    }

    pub fn epochs_run(&self) -> usize {
        self.core.epoch
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.core.records
    }

    /// Replace the initial weights (resets the optimizer state).
    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        self.core.set_params(params)
    }

    pub fn generator(&self) -> TrainedGenerator {
        self.core.generator()
    }

    fn method(&self) -> Method {
        match self.projections {
            Projections::Marginal => Method::IslMarginal,
            _ => Method::IslSliced,
        }
    }

    /// One optimizer step on the given minibatch; returns the loss.
    fn step(&mut self, batch: &[usize], hyper: &IslHyperparams) -> Result<f64> {
        let d = self.core.data.cols();
        let directions = match &self.projections {
            Projections::Random { m } => sample_unit_sphere(d, *m, &mut self.proj_rng)?,
            Projections::Fixed(dirs) => dirs.clone(),
            Projections::Marginal => axis_directions(d),
        };
        let core = &mut self.core;
        let real = core.data.select_rows(batch);
        let rows = directions.rows() * hyper.fakes_per_projection(batch.len());
        let noise = sample_noise(&core.config.noise, rows, &mut core.noise_rng)?;
        let gen = &core.config.generator;
        let lg = match self.projections {
            Projections::Marginal => marginal_isl_loss(&core.params, &real, &noise, hyper, gen),
            _ => sliced_isl_loss(&core.params, &real, &noise, &directions, hyper, gen),
        }
        .map_err(diverged(core.epoch))?;
        core.apply(&lg)?;
        Ok(lg.loss)
    }

    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        let elapsed = stopwatch();
        self.core.begin_epoch();
        let hyper = self.core.config.hyper.at_k(self.k());
        let batches = self.core.batches();
        let mut total = 0.0;
        for batch in &batches {
            total += self.step(batch, &hyper)?;
        }
        let k = self.k();
        self.core.records.push(EpochRecord {
            epoch: self.core.epoch,
            k,
            loss: total / batches.len() as f64,
            chi2: None,
            wall_clock_secs: elapsed(),
        });
        Ok(self.core.records.last().expect("just pushed"))
    }

    /// Runs `iterations` single minibatch steps outside the epoch bookkeeping;
    /// used to time the per-iteration cost.
    pub fn run_iterations(&mut self, iterations: usize) -> Result<f64> {
        let hyper = self.core.config.hyper.at_k(self.k());
        let mut last = f64::NAN;
        let mut pending: Vec<Vec<usize>> = Vec::new();
        for _ in 0..iterations {
            if pending.is_empty() {
                pending = self.core.batches();
                pending.reverse();
            }
            let batch = pending.pop().expect("refilled");
            last = self.step(&batch, &hyper)?;
        }
        Ok(last)
    }

    pub fn finish(self) -> TrainRun {
        let (method, k) = (self.method(), self.k());
        self.core.finish(method, k)
    }
}

pub fn train_isl_1d(config: TrainConfig) -> Result<TrainRun> {
    let epochs = config.epochs;
    let mut t = Trainer1d::new(config)?;
    for _ in 0..epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

fn run_sliced(mut t: TrainerSliced, epochs: usize) -> Result<TrainRun> {
    for _ in 0..epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

pub fn train_isl_sliced(config: TrainConfig) -> Result<TrainRun> {
    if config.target.dim() < 2 {
        return Err(IslError::InvalidConfig("slicing needs a target of dimension >= 2".into()));
    }
    let epochs = config.epochs;
    run_sliced(TrainerSliced::new(config, false)?, epochs)
}

pub fn train_isl_marginal(config: TrainConfig) -> Result<TrainRun> {
    let epochs = config.epochs;
    run_sliced(TrainerSliced::new(config, true)?, epochs)
}

/// Pareto-ISL: GPD noise fitted to the data's tail, then progressive-K
/// training. `xi` overrides the Hill estimate.
pub fn train_pareto_isl(config: TrainConfig, xi: Option<f64>) -> Result<TrainRun> {
    config.validate()?;
    let root = RandomSource::new(config.seed);
    let data = sample_target(&config.target, config.dataset_size, &mut root.substream("data"))?;
    let config = pareto_isl_setup(data.as_slice(), config, xi)?;
    let epochs = config.epochs;
    let mut t = Trainer1d::build(config, Some(data), Method::ParetoIsl)?;
    for _ in 0..epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

/// Hill estimate of the tail index from the `k_top` largest observations:
/// `mean_i ln(X_(i) / X_(k_top + 1))` over descending order statistics.
pub fn hill_estimator(data: &[f64], k_top: usize) -> Result<f64> {
    if k_top == 0 {
        return Err(IslError::Domain("k_top must be >= 1".into()));
    }
    if data.len() < k_top + 1 {
        return Err(IslError::Domain(format!("need more than k_top = {k_top} observations, got {}", data.len())));
    }
    if data.iter().any(|x| x.is_nan()) {
        return Err(IslError::NonFinite("NaN in tail sample".into()));
    }
    let mut v = data.to_vec();
    v.select_nth_unstable_by(k_top, |a, b| b.total_cmp(a));
    let threshold = v[k_top];
    if !(threshold > 0.0) {
        return Err(IslError::Domain(format!("order statistic {} is nonpositive ({threshold})", k_top + 1)));
    }
    let mut top = v[..k_top].to_vec();
    top.sort_by(f64::total_cmp);
    Ok(top.iter().map(|x| (x / threshold).ln()).sum::<f64>() / k_top as f64)
}

/// Order statistics used for the tail index: 1% of the sample, kept in
/// `[50, 2000]`.
pub fn default_k_top(n: usize) -> usize {
    (n / 100).clamp(50, 2000)
}

/// Swap in GPD noise with `sigma = 1` and the Hill tail index of `|data|`
/// (or `xi` when given). Data with both signs get symmetric GPD noise so a
/// piecewise-linear generator can produce both tails. The generator must be
/// piecewise linear.
pub fn pareto_isl_setup(data: &[f64], mut config: TrainConfig, xi: Option<f64>) -> Result<TrainConfig> {
    if !config.generator.is_piecewise_linear() {
        return Err(IslError::InvalidGenerator(
            "Pareto-ISL needs relu/identity activations so tails stay unbounded".into(),
        ));
    }
    let Some(&first) = data.first() else {
        return Err(IslError::Empty("no data for the tail estimate".into()));
    };
    if data.iter().all(|&x| x == first) {
        return Err(IslError::Degenerate("all observations are equal".into()));
    }
    let xi = match xi {
        Some(x) => x,
        None => {
            let abs: Vec<f64> = data.iter().map(|x| x.abs()).collect();
            hill_estimator(&abs, default_k_top(abs.len()))?
        }
    };
    let two_sided = data.iter().any(|&x| x < 0.0);
    let dim = config.noise.dim;
    config.noise = if two_sided {
        NoiseSpec::symmetric_gpd(xi, 1.0, dim)
    } else {
        NoiseSpec::gpd(xi, 1.0, dim)
    };
    config.noise.validate()?;
    Ok(config)
}
