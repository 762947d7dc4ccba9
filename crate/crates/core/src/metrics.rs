//! Evaluation metrics: KS distance, MAE/MSE against the optimal monotone map,
//! the log-log CCDF tail area, mode coverage and histogram KL / JS divergences.

use serde::{Deserialize, Serialize};

use crate::diff_engine::{mlp_forward, GeneratorSpec, ParamVector};
use crate::distributions::{sample_noise, target_quantile, NoiseSpec, TargetSpec};
use crate::error::{IslError, Result};
use crate::matrix::Matrix;
use crate::rng::RandomSource;

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(IslError::Empty("metric needs a nonempty sample".into()));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(IslError::NonFinite("NaN in sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov statistic, by an exact sweep over the merged
/// sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against an analytic CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let a = sorted(a)?;
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// What a sample is compared against in [`ks_distance`].
pub enum KsReference<'a> {
    Sample(&'a [f64]),
    Cdf(&'a dyn Fn(f64) -> f64),
}

pub fn ks_distance(a: &[f64], reference: KsReference<'_>) -> Result<f64> {
    match reference {
        KsReference::Sample(b) => ks_two_sample(a, b),
        KsReference::Cdf(f) => ks_one_sample(a, f),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaeMse {
    pub mae: f64,
    pub mse: f64,
    /// Monte Carlo sample size; heavy-tailed targets make MSE depend on it.
    pub n_mc: usize,
}

/// MAE and MSE between `map` and the optimal monotone map
/// `g*(z) = F_target^-1(F_noise(z))`, averaged over `n_mc` noise draws.
pub fn mae_mse_of_map(
    map: impl Fn(&Matrix) -> Result<Matrix>,
    noise: &NoiseSpec,
    target: &TargetSpec,
    n_mc: usize,
    rng: &mut RandomSource,
) -> Result<MaeMse> {
    if noise.dim != 1 || target.dim() != 1 {
        return Err(IslError::Unsupported(format!(
            "optimal map needs 1D noise and target, got noise dim {} and target {}",
            noise.dim,
            target.name()
        )));
    }
    let z = sample_noise(noise, n_mc, rng)?;
    let g = map(&z)?;
    if g.rows() != n_mc || g.cols() != 1 {
        return Err(IslError::shape(format!("{n_mc}x1 generator output"), format!("{}x{}", g.rows(), g.cols())));
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    let lo = f64::EPSILON / 2.0;
    for (&zi, &gi) in z.as_slice().iter().zip(g.as_slice()) {
        // keep the quantile finite when the noise CDF rounds to 0 or 1
        let u = noise.cdf(zi).clamp(lo, 1.0 - lo);
        let d = target_quantile(target, u)? - gi;
        abs += d.abs();
        sq += d * d;
    }
    let n = n_mc as f64;
    Ok(MaeMse {
        mae: abs / n,
        mse: sq / n,
        n_mc,
    })
}

pub fn mae_mse_vs_optimal(
    params: &ParamVector,
    gen: &GeneratorSpec,
    noise: &NoiseSpec,
    target: &TargetSpec,
    n_mc: usize,
    rng: &mut RandomSource,
) -> Result<MaeMse> {
    mae_mse_of_map(|z| mlp_forward(params, gen, z), noise, target, n_mc, rng)
}

fn descending_positive(xs: &[f64], what: &str) -> Result<Vec<f64>> {
    if let Some(x) = xs.iter().find(|&&x| !(x > 0.0)) {
        return Err(IslError::Domain(format!("{what} sample has nonpositive entry {x}")));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Area between the log-log CCDF curves of `real` and `gen`:
/// `|sum_i [ln Fr^-1(i/n) - ln Fg^-1(i/n)] ln((i+1)/i)|` with empirical inverse
/// CCDFs read off the descending order statistics.
pub fn accdf_area(real: &[f64], gen: &[f64]) -> Result<f64> {
    if real.len() < 2 || gen.is_empty() {
        return Err(IslError::Empty("accdf_area needs n >= 2 real and a nonempty generated sample".into()));
    }
    let r = descending_positive(real, "real")?;
    let g = descending_positive(gen, "generated")?;
    let (n, ng) = (r.len(), g.len());
    let mut area = 0.0;
    for i in 1..=n {
        // smallest j with j / ng >= i / n
        let j = (i * ng).div_ceil(n);
        let w = ((i + 1) as f64 / i as f64).ln();
        area += (r[i - 1].ln() - g[j - 1].ln()) * w;
    }
    Ok(area.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeLayout {
    pub centers: Vec<Vec<f64>>,
    pub std: f64,
}

impl ModeLayout {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.centers.first() else {
            return Err(IslError::Empty("mode layout has no centers".into()));
        };
        if self.centers.iter().any(|c| c.len() != first.len()) {
            return Err(IslError::shape("centers of equal dimension", "ragged centers"));
        }
        if !(self.std > 0.0) {
            return Err(IslError::Domain(format!("mode std must be positive, got {}", self.std)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// Nearest center and its squared distance; ties go to the lowest index.
    fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoverage {
    pub n_modes: usize,
    /// Percentage of samples within three standard deviations of their
    /// nearest center.
    pub pct_hq: f64,
}

pub fn mode_coverage(samples: &Matrix, layout: &ModeLayout) -> Result<ModeCoverage> {
    layout.validate()?;
    if samples.rows() == 0 {
        return Err(IslError::Empty("mode_coverage needs samples".into()));
    }
    if samples.cols() != layout.dim() {
        return Err(IslError::shape(layout.dim(), samples.cols()));
    }
    let radius2 = (3.0 * layout.std).powi(2);
    let mut hit = vec![false; layout.centers.len()];
    let mut hq = 0usize;
    for x in samples.iter_rows() {
        let (i, d2) = layout.nearest(x);
        if d2 <= radius2 {
            hq += 1;
            hit[i] = true;
        }
    }
    Ok(ModeCoverage {
        n_modes: hit.iter().filter(|&&h| h).count(),
        pct_hq: 100.0 * hq as f64 / samples.rows() as f64,
    })
}

pub const DEFAULT_BINS: usize = 64;

/// Regular grid over an axis-aligned box; out-of-box points land in edge bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bins_per_axis: usize,
}

impl HistogramGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, bins_per_axis: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(IslError::shape("matching nonempty bounds", format!("{} vs {}", lower.len(), upper.len())));
        }
        if bins_per_axis == 0 {
            return Err(IslError::Domain("bins_per_axis must be positive".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(u > l) || !l.is_finite() || !u.is_finite() {
                return Err(IslError::Domain(format!("zero-area bounds [{l}, {u}]")));
            }
        }
        Ok(HistogramGrid {
            lower,
            upper,
            bins_per_axis,
        })
    }

    /// Box `mean +- 3 std` per coordinate of a reference sample.
    pub fn around(reference: &Matrix, bins_per_axis: usize) -> Result<Self> {
        if reference.rows() < 2 {
            return Err(IslError::Empty("histogram bounds need at least two points".into()));
        }
        let n = reference.rows() as f64;
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for c in 0..reference.cols() {
            let col = reference.col(c);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let half = 3.0 * var.sqrt();
            lower.push(mean - half);
            upper.push(mean + half);
        }
        HistogramGrid::new(lower, upper, bins_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn cells(&self) -> usize {
        self.bins_per_axis.pow(self.dim() as u32)
    }

    fn cell(&self, x: &[f64]) -> usize {
        let b = self.bins_per_axis;
        let mut idx = 0;
        for (d, &v) in x.iter().enumerate() {
            let t = (v - self.lower[d]) / (self.upper[d] - self.lower[d]);
            let k = if t.is_nan() || t < 0.0 {
                0
            } else {
                ((t * b as f64) as usize).min(b - 1)
            };
            idx = idx * b + k;
        }
        idx
    }

    /// Normalized cell frequencies.
    pub fn frequencies(&self, sample: &Matrix) -> Result<Vec<f64>> {
        if sample.cols() != self.dim() {
            return Err(IslError::shape(self.dim(), sample.cols()));
        }
        if sample.rows() == 0 {
            return Err(IslError::Empty("histogram of an empty sample".into()));
        }
        let mut counts = vec![0.0; self.cells()];
        for x in sample.iter_rows() {
            counts[self.cell(x)] += 1.0;
        }
        let n = sample.rows() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        Ok(counts)
    }
}

fn smoothed(freq: &[f64], n: usize) -> Vec<f64> {
    let eps = 1.0 / (n as f64 * freq.len() as f64);
    let z = 1.0 + eps * freq.len() as f64;
    freq.iter().map(|f| (f + eps) / z).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

fn check_hist_dim(grid: &HistogramGrid) -> Result<()> {
    if grid.dim() > 2 {
        return Err(IslError::Unsupported(format!("histogram divergences support D <= 2, got {}", grid.dim())));
    }
    Ok(())
}

/// `KL(p || q)` between grid histograms. Both histograms get additive
/// smoothing `1 / (M * cells)` so `q` has no empty cells and `KL(p, p) = 0`.
pub fn kl_histogram(p: &Matrix, q: &Matrix, grid: &HistogramGrid) -> Result<f64> {
    check_hist_dim(grid)?;
    let ps = smoothed(&grid.frequencies(p)?, p.rows());
    let qs = smoothed(&grid.frequencies(q)?, q.rows());
    Ok(kl(&ps, &qs))
}

/// Jensen-Shannon divergence (natural log, so at most `ln 2`).
pub fn js_histogram(p: &Matrix, q: &Matrix, grid: &HistogramGrid) -> Result<f64> {
    check_hist_dim(grid)?;
    let pf = grid.frequencies(p)?;
    let qf = grid.frequencies(q)?;
    let m: Vec<f64> = pf.iter().zip(&qf).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((0.5 * kl(&pf, &m) + 0.5 * kl(&qf, &m)).min(std::f64::consts::LN_2))
}

/// Mean over coordinates of the 1D JS divergence, each on a grid around the
/// reference marginal.
pub fn mean_marginal_js(reference: &Matrix, other: &Matrix, bins: usize) -> Result<f64> {
    if reference.cols() != other.cols() {
        return Err(IslError::shape(reference.cols(), other.cols()));
    }
    let mut total = 0.0;
    for c in 0..reference.cols() {
        let r = Matrix::column(reference.col(c));
        let o = Matrix::column(other.col(c));
        let grid = HistogramGrid::around(&r, bins)?;
        total += js_histogram(&r, &o, &grid)?;
    }
    Ok(total / reference.cols() as f64)
}
