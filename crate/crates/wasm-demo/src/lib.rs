//! WebAssembly bindings for the static demo page in `www/`.

use isl_core::diff_engine::{Activation, GeneratorSpec};
use isl_core::distributions::{gpd_ccdf, sample_noise, sample_target, NoiseSpec, TargetSpec};
use isl_core::metrics::mode_coverage;
use isl_core::rank_stats::{chi2_uniformity, rank_histogram};
use isl_core::training::{TrainConfig, TrainerSliced};
use isl_core::{IslError, Matrix, RandomSource};
use wasm_bindgen::prelude::*;

fn js(e: IslError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct RankTest {
    counts: Vec<u32>,
    statistic: f64,
    p_value: f64,
    accept: bool,
}

#[wasm_bindgen]
impl RankTest {
    pub fn counts(&self) -> Vec<u32> {
        self.counts.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn statistic(&self) -> f64 {
        self.statistic
    }
    #[wasm_bindgen(getter)]
    pub fn p_value(&self) -> f64 {
        self.p_value
    }
    #[wasm_bindgen(getter)]
    pub fn accept(&self) -> bool {
        self.accept
    }
}

/// Ranks `n` draws of N(0, 1) among `k` draws of the model N(shift, scale)
/// and tests the histogram for uniformity at level 0.05.
#[wasm_bindgen]
pub fn rank_test(shift: f64, scale: f64, k: usize, n: usize, seed: u64) -> Result<RankTest, JsError> {
    let data = TargetSpec::Gaussian { mean: 0.0, std: 1.0 };
    let model = TargetSpec::Gaussian { mean: shift, std: scale };
    let root = RandomSource::new(seed);
    let real = sample_target(&data, n, &mut root.substream("data")).map_err(js)?;
    let hist = rank_histogram(
        real.as_slice(),
        |m, rng: &mut RandomSource| sample_target(&model, m, rng).map(Matrix::into_vec),
        k,
        &mut root.substream("model"),
    )
    .map_err(js)?;
    let chi2 = chi2_uniformity(&hist, 0.05).map_err(js)?;
    Ok(RankTest {
        counts: hist.counts().iter().map(|&c| c as u32).collect(),
        statistic: chi2.statistic,
        p_value: chi2.p_value,
        accept: chi2.accept,
    })
}

#[wasm_bindgen]
pub struct GpdTail {
    z: Vec<f64>,
    empirical: Vec<f64>,
    analytic: Vec<f64>,
}

#[wasm_bindgen]
impl GpdTail {
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }
    pub fn empirical(&self) -> Vec<f64> {
        self.empirical.clone()
    }
    pub fn analytic(&self) -> Vec<f64> {
        self.analytic.clone()
    }
}

/// Empirical and analytic CCDF of `n` GPD(xi, sigma) draws at `points`
/// order statistics spread evenly in log-probability.
#[wasm_bindgen]
pub fn gpd_tail(xi: f64, sigma: f64, n: usize, points: usize, seed: u64) -> Result<GpdTail, JsError> {
    if n < 2 || points < 2 {
        return Err(JsError::new("n and points must be >= 2"));
    }
    let spec = NoiseSpec::gpd(xi, sigma, 1);
    let mut s = sample_noise(&spec, n, &mut RandomSource::new(seed)).map_err(js)?.into_vec();
    s.sort_by(f64::total_cmp);
    let mut out = GpdTail { z: vec![], empirical: vec![], analytic: vec![] };
    let mut last = usize::MAX;
    for j in 0..points {
        // exceedance counts from n down to 1, log-spaced
        let count = (n as f64).powf(1.0 - j as f64 / (points - 1) as f64).round() as usize;
        let i = n - count.clamp(1, n);
        if i == last {
            continue;
        }
        last = i;
        out.z.push(s[i]);
        out.empirical.push((n - i) as f64 / n as f64);
        out.analytic.push(gpd_ccdf(s[i], xi, sigma));
    }
    Ok(out)
}

/// Stepwise sliced training of a small MLP on the eight-Gaussian ring.
#[wasm_bindgen]
pub struct RingTrainer {
    trainer: TrainerSliced,
    target: TargetSpec,
    iterations: usize,
}

#[wasm_bindgen]
impl RingTrainer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, projections: usize, k: usize, learning_rate: f64) -> Result<RingTrainer, JsError> {
        let target = TargetSpec::ring2d();
        let gen = GeneratorSpec::mlp(2, &[32, 32], 2, Activation::Tanh, seed);
        let mut c = TrainConfig::new(target.clone(), NoiseSpec::standard_normal(2), gen, 1);
        c.k_max = k;
        c.projections = projections;
        c.learning_rate = learning_rate;
        c.seed = seed;
        let trainer = TrainerSliced::new(c, false).map_err(js)?;
        Ok(RingTrainer { trainer, target, iterations: 0 })
    }

    /// Runs `iterations` optimizer steps; returns the last minibatch loss.
    pub fn step(&mut self, iterations: usize) -> Result<f64, JsError> {
        let loss = self.trainer.run_iterations(iterations).map_err(js)?;
        self.iterations += iterations;
        Ok(loss)
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `n` generator samples, interleaved as x0, y0, x1, y1, ...
    pub fn samples(&self, n: usize, seed: u64) -> Result<Vec<f64>, JsError> {
        let s = self.trainer.generator().sample(n, &mut RandomSource::new(seed)).map_err(js)?;
        Ok(s.into_vec())
    }

    /// Number of ring modes with at least one of `n` samples within three
    /// standard deviations.
    pub fn modes(&self, n: usize, seed: u64) -> Result<usize, JsError> {
        let layout = self.target.mode_layout().expect("ring has modes");
        let s = self.trainer.generator().sample(n, &mut RandomSource::new(seed)).map_err(js)?;
        Ok(mode_coverage(&s, &layout).map_err(js)?.n_modes)
    }
}
