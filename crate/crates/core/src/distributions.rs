//! Latent-noise families and synthetic targets.
//!
//! All samplers take an explicit [`RandomSource`]; Gaussian draws use Box–Muller
//! and every other law is sampled by inverse CDF, so output depends only on
//! `(spec, n, seed)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{IslError, Result};
use crate::matrix::Matrix;
use crate::rng::RandomSource;
use crate::special::{normal_cdf, normal_quantile};

const WEIGHT_TOL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-10;

/// Inverse CDF of the generalized Pareto law.
///
/// `u` is the upper-tail probability: the result `z` satisfies
/// `S(z; xi, sigma) = u` with `S(z) = (1 + xi z / sigma)^(-1/xi)`
/// (`exp(-z / sigma)` when `xi == 0`). Feeding a uniform `u` gives a GPD draw.
pub fn gpd_inverse_cdf(u: f64, xi: f64, sigma: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(IslError::Domain(format!("u = {u} is not in (0, 1)")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(IslError::Domain(format!("sigma = {sigma} must be positive")));
    }
    if !xi.is_finite() {
        return Err(IslError::Domain(format!("xi = {xi} must be finite")));
    }
    let ln_u = u.ln();
    if xi == 0.0 {
        return Ok(-sigma * ln_u);
    }
    // (u^-xi - 1) / xi, written with expm1 so small xi stays accurate.
    Ok(sigma * (-xi * ln_u).exp_m1() / xi)
}

/// Complementary CDF of the generalized Pareto law.
pub fn gpd_ccdf(z: f64, xi: f64, sigma: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if xi == 0.0 {
        return (-z / sigma).exp();
    }
    let base = 1.0 + xi * z / sigma;
    if base <= 0.0 {
        // past the right end point of a bounded (xi < 0) law
        return 0.0;
    }
    (-base.ln() / xi).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpdComponent {
    pub xi: f64,
    pub sigma: f64,
    pub weight: f64,
}

/// Latent-noise family. Every coordinate of a noise vector is drawn
/// independently from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Lognormal { log_mean: f64, log_std: f64 },
    Gpd { xi: f64, sigma: f64 },
    /// GPD magnitude with a fair random sign: two heavy tails of index `xi`.
    SymmetricGpd { xi: f64, sigma: f64 },
    GpdMixture { components: Vec<GpdComponent> },
}

fn default_dim() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub family: NoiseFamily,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::standard_normal(1)
    }
}

fn check_weights(weights: impl Iterator<Item = f64>, what: &str) -> std::result::Result<(), String> {
    let mut total = 0.0;
    let mut count = 0;
    for w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(format!("{what} weight {w} must be nonnegative"));
        }
        total += w;
        count += 1;
    }
    if count == 0 {
        return Err(format!("{what} needs at least one component"));
    }
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(format!("{what} weights sum to {total}, expected 1"));
    }
    Ok(())
}

impl NoiseSpec {
    pub fn standard_normal(dim: usize) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gaussian { mean: 0.0, std: 1.0 },
            dim,
        }
    }

    pub fn gpd(xi: f64, sigma: f64, dim: usize) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gpd { xi, sigma },
            dim,
        }
    }

    pub fn symmetric_gpd(xi: f64, sigma: f64, dim: usize) -> Self {
        NoiseSpec {
            family: NoiseFamily::SymmetricGpd { xi, sigma },
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IslError::InvalidNoise(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        match &self.family {
            NoiseFamily::Gaussian { mean, std } => {
                if !mean.is_finite() || !(*std > 0.0) {
                    return bad(format!("gaussian needs finite mean and std > 0, got ({mean}, {std})"));
                }
            }
            NoiseFamily::Uniform { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return bad(format!("uniform needs low < high, got ({low}, {high})"));
                }
            }
            NoiseFamily::Lognormal { log_mean, log_std } => {
                if !log_mean.is_finite() || !(*log_std > 0.0) {
                    return bad(format!("lognormal needs log_std > 0, got {log_std}"));
                }
            }
            NoiseFamily::Gpd { xi, sigma } | NoiseFamily::SymmetricGpd { xi, sigma } => {
                if !xi.is_finite() || !(*sigma > 0.0) {
                    return bad(format!("gpd needs finite xi and sigma > 0, got ({xi}, {sigma})"));
                }
            }
            NoiseFamily::GpdMixture { components } => {
                for c in components {
                    if !c.xi.is_finite() || !(c.sigma > 0.0) {
                        return bad(format!("gpd component needs sigma > 0, got {}", c.sigma));
                    }
                }
                check_weights(components.iter().map(|c| c.weight), "gpd mixture")
                    .map_err(IslError::InvalidNoise)?;
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut RandomSource) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { mean, std } => rng.normal(*mean, *std),
            NoiseFamily::Uniform { low, high } => rng.uniform(*low, *high),
            NoiseFamily::Lognormal { log_mean, log_std } => rng.normal(*log_mean, *log_std).exp(),
            NoiseFamily::Gpd { xi, sigma } => {
                let u = rng.uniform_open();
                gpd_inverse_cdf(u, *xi, *sigma).expect("validated gpd parameters")
            }
            NoiseFamily::SymmetricGpd { xi, sigma } => {
                let negative = rng.below(2) == 0;
                let u = rng.uniform_open();
                let z = gpd_inverse_cdf(u, *xi, *sigma).expect("validated gpd parameters");
                if negative {
                    -z
                } else {
                    z
                }
            }
            NoiseFamily::GpdMixture { components } => {
                let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
                let c = &components[rng.categorical(&weights)];
                let u = rng.uniform_open();
                gpd_inverse_cdf(u, c.xi, c.sigma).expect("validated gpd parameters")
            }
        }
    }

    /// CDF of one coordinate.
    pub fn cdf(&self, z: f64) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { mean, std } => normal_cdf((z - mean) / std),
            NoiseFamily::Uniform { low, high } => ((z - low) / (high - low)).clamp(0.0, 1.0),
            NoiseFamily::Lognormal { log_mean, log_std } => {
                if z <= 0.0 {
                    0.0
                } else {
                    normal_cdf((z.ln() - log_mean) / log_std)
                }
            }
            NoiseFamily::Gpd { xi, sigma } => 1.0 - gpd_ccdf(z, *xi, *sigma),
            NoiseFamily::SymmetricGpd { xi, sigma } => {
                if z >= 0.0 {
                    1.0 - 0.5 * gpd_ccdf(z, *xi, *sigma)
                } else {
                    0.5 * gpd_ccdf(-z, *xi, *sigma)
                }
            }
            NoiseFamily::GpdMixture { components } => components
                .iter()
                .map(|c| c.weight * (1.0 - gpd_ccdf(z, c.xi, c.sigma)))
                .sum(),
        }
    }
}

/// Draw `n` i.i.d. noise vectors as the rows of an `n x dim` matrix.
pub fn sample_noise(spec: &NoiseSpec, n: usize, rng: &mut RandomSource) -> Result<Matrix> {
    spec.validate()?;
    if n == 0 {
        return Err(IslError::Domain("sample_noise needs n >= 1".into()));
    }
    let data = (0..n * spec.dim).map(|_| spec.draw(rng)).collect();
    Matrix::from_vec(n, spec.dim, data)
}

/// A one-dimensional law usable as a target or a mixture component.
///
/// `Pareto` is the classical law with CDF `1 - (scale / x)^shape` on `x >= scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law1d {
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Cauchy { loc: f64, scale: f64 },
    Pareto { scale: f64, shape: f64 },
}

impl Law1d {
    fn validate(&self) -> std::result::Result<(), String> {
        let ok = match self {
            Law1d::Gaussian { mean, std } => mean.is_finite() && *std > 0.0,
            Law1d::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Law1d::Cauchy { loc, scale } => loc.is_finite() && *scale > 0.0,
            Law1d::Pareto { scale, shape } => *scale > 0.0 && *shape > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid parameters for {self:?}"))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Law1d::Gaussian { mean, std } => normal_cdf((x - mean) / std),
            Law1d::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Law1d::Cauchy { loc, scale } => 0.5 + ((x - loc) / scale).atan() / PI,
            Law1d::Pareto { scale, shape } => {
                if x <= scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(shape)
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Law1d::Gaussian { mean, std } => mean + std * normal_quantile(u),
            Law1d::Uniform { low, high } => low + (high - low) * u,
            Law1d::Cauchy { loc, scale } => loc + scale * (PI * (u - 0.5)).tan(),
            Law1d::Pareto { scale, shape } => scale * (1.0 - u).powf(-1.0 / shape),
        }
    }

    fn sample(&self, rng: &mut RandomSource) -> f64 {
        match *self {
            Law1d::Gaussian { mean, std } => rng.normal(mean, std),
            _ => self.quantile(rng.uniform_open()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    #[serde(flatten)]
    pub law: Law1d,
}

fn d_ring_radius() -> f64 {
    2.0
}
fn d_ring_std() -> f64 {
    0.02
}
fn d_grid_spacing() -> f64 {
    2.0
}
fn d_grid_std() -> f64 {
    0.05
}
fn d_moon_radius() -> f64 {
    2.0
}
fn d_moon_noise() -> f64 {
    0.1
}
fn d_circle_radius() -> f64 {
    3.0
}
fn d_circle_std() -> f64 {
    0.2
}
fn d_inner() -> f64 {
    1.0
}
fn d_outer() -> f64 {
    3.0
}
fn d_radial_std() -> f64 {
    0.1
}
fn d_heavy_loc() -> f64 {
    0.5
}
fn d_heavy_scale() -> f64 {
    1.0
}

/// Synthetic target distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian {
        mean: f64,
        std: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Cauchy {
        loc: f64,
        scale: f64,
    },
    Pareto {
        scale: f64,
        shape: f64,
    },
    Mixture1d {
        components: Vec<MixtureComponent>,
    },
    /// Eight Gaussians evenly spaced on a circle.
    Ring2d {
        #[serde(default = "d_ring_radius")]
        radius: f64,
        #[serde(default = "d_ring_std")]
        std: f64,
    },
    /// 25 Gaussians on a 5x5 grid centred at the origin.
    Grid2d {
        #[serde(default = "d_grid_spacing")]
        spacing: f64,
        #[serde(default = "d_grid_std")]
        std: f64,
    },
    DualMoon {
        #[serde(default = "d_moon_radius")]
        radius: f64,
        #[serde(default = "d_moon_noise")]
        noise: f64,
    },
    CircleGaussians {
        #[serde(default = "d_circle_radius")]
        radius: f64,
        #[serde(default = "d_circle_std")]
        std: f64,
    },
    TwoRings {
        #[serde(default = "d_inner")]
        inner_radius: f64,
        #[serde(default = "d_outer")]
        outer_radius: f64,
        #[serde(default = "d_radial_std")]
        radial_std: f64,
    },
    /// `x = A z + eps` with `z ~ N(0, 10 I_d)`, `A ~ N(0, 1)` entrywise (drawn once
    /// from `matrix_seed`), `eps ~ N(0, 0.01 I_D)`.
    LinearGaussianHd {
        dim: usize,
        latent_dim: usize,
        #[serde(default)]
        matrix_seed: u64,
    },
    /// `X0 = A + B`, `X1 = sign(A - B) |A - B|^(1/2)`, `A, B ~ Cauchy(loc, scale)`.
    HeavyTail2d {
        #[serde(default = "d_heavy_loc")]
        loc: f64,
        #[serde(default = "d_heavy_scale")]
        scale: f64,
    },
}

pub const RING_MODES: usize = 8;
pub const GRID_SIDE: usize = 5;

impl TargetSpec {
    pub fn ring2d() -> Self {
        TargetSpec::Ring2d {
            radius: d_ring_radius(),
            std: d_ring_std(),
        }
    }

    pub fn grid2d() -> Self {
        TargetSpec::Grid2d {
            spacing: d_grid_spacing(),
            std: d_grid_std(),
        }
    }

    pub fn heavy_tail_2d() -> Self {
        TargetSpec::HeavyTail2d {
            loc: d_heavy_loc(),
            scale: d_heavy_scale(),
        }
    }

    fn equal_mixture(laws: Vec<Law1d>) -> Self {
        let w = 1.0 / laws.len() as f64;
        TargetSpec::Mixture1d {
            components: laws
                .into_iter()
                .map(|law| MixtureComponent { weight: w, law })
                .collect(),
        }
    }

    /// Equal mixture of N(5, 2) and N(-1, 1).
    pub fn model_1() -> Self {
        Self::equal_mixture(vec![
            Law1d::Gaussian { mean: 5.0, std: 2.0 },
            Law1d::Gaussian { mean: -1.0, std: 1.0 },
        ])
    }

    /// Equal mixture of N(5, 2), N(-1, 1) and N(-10, 3).
    pub fn model_2() -> Self {
        Self::equal_mixture(vec![
            Law1d::Gaussian { mean: 5.0, std: 2.0 },
            Law1d::Gaussian { mean: -1.0, std: 1.0 },
            Law1d::Gaussian { mean: -10.0, std: 3.0 },
        ])
    }

    /// Equal mixture of N(-5, 2) and a Pareto law with shape 5, scale 1.
    pub fn model_3() -> Self {
        Self::equal_mixture(vec![
            Law1d::Gaussian { mean: -5.0, std: 2.0 },
            Law1d::Pareto { scale: 1.0, shape: 5.0 },
        ])
    }

    /// Equal mixture of Cauchy(-1, 0.7) and Cauchy(1, 0.85).
    pub fn model_4() -> Self {
        Self::equal_mixture(vec![
            Law1d::Cauchy { loc: -1.0, scale: 0.7 },
            Law1d::Cauchy { loc: 1.0, scale: 0.85 },
        ])
    }

    /// Short name used in reports and CSV rows.
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::Gaussian { .. } => "gaussian",
            TargetSpec::Uniform { .. } => "uniform",
            TargetSpec::Cauchy { .. } => "cauchy",
            TargetSpec::Pareto { .. } => "pareto",
            TargetSpec::Mixture1d { .. } => "mixture1d",
            TargetSpec::Ring2d { .. } => "ring2d",
            TargetSpec::Grid2d { .. } => "grid2d",
            TargetSpec::DualMoon { .. } => "dual_moon",
            TargetSpec::CircleGaussians { .. } => "circle_gaussians",
            TargetSpec::TwoRings { .. } => "two_rings",
            TargetSpec::LinearGaussianHd { .. } => "linear_gaussian_hd",
            TargetSpec::HeavyTail2d { .. } => "heavy_tail_2d",
        }
    }

    /// Output dimension of a draw.
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Gaussian { .. }
            | TargetSpec::Uniform { .. }
            | TargetSpec::Cauchy { .. }
            | TargetSpec::Pareto { .. }
            | TargetSpec::Mixture1d { .. } => 1,
            TargetSpec::LinearGaussianHd { dim, .. } => *dim,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IslError::InvalidTarget(m));
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(IslError::InvalidTarget(format!("{name} must be > 0, got {v}")))
            }
        };
        match self {
            TargetSpec::Mixture1d { components } => {
                for c in components {
                    c.law.validate().map_err(IslError::InvalidTarget)?;
                }
                check_weights(components.iter().map(|c| c.weight), "mixture1d")
                    .map_err(IslError::InvalidTarget)?;
            }
            TargetSpec::Ring2d { radius, std } => {
                positive("radius", *radius)?;
                positive("std", *std)?;
            }
            TargetSpec::Grid2d { spacing, std } => {
                positive("spacing", *spacing)?;
                positive("std", *std)?;
            }
            TargetSpec::DualMoon { radius, noise } => {
                positive("radius", *radius)?;
                positive("noise", *noise)?;
            }
            TargetSpec::CircleGaussians { radius, std } => {
                positive("radius", *radius)?;
                positive("std", *std)?;
            }
            TargetSpec::TwoRings {
                inner_radius,
                outer_radius,
                radial_std,
            } => {
                positive("inner_radius", *inner_radius)?;
                positive("outer_radius", *outer_radius)?;
                positive("radial_std", *radial_std)?;
            }
            TargetSpec::LinearGaussianHd { dim, latent_dim, .. } => {
                if *latent_dim == 0 || *dim == 0 {
                    return bad("linear_gaussian_hd needs dim, latent_dim >= 1".into());
                }
            }
            TargetSpec::HeavyTail2d { loc, scale } => {
                if !loc.is_finite() {
                    return bad(format!("loc must be finite, got {loc}"));
                }
                positive("scale", *scale)?;
            }
            other => {
                other
                    .as_law()
                    .expect("1D kind")
                    .validate()
                    .map_err(IslError::InvalidTarget)?;
            }
        }
        Ok(())
    }

    fn as_law(&self) -> Option<Law1d> {
        match *self {
            TargetSpec::Gaussian { mean, std } => Some(Law1d::Gaussian { mean, std }),
            TargetSpec::Uniform { low, high } => Some(Law1d::Uniform { low, high }),
            TargetSpec::Cauchy { loc, scale } => Some(Law1d::Cauchy { loc, scale }),
            TargetSpec::Pareto { scale, shape } => Some(Law1d::Pareto { scale, shape }),
            _ => None,
        }
    }

    /// CDF of a one-dimensional target.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if let Some(law) = self.as_law() {
            return Ok(law.cdf(x));
        }
        match self {
            TargetSpec::Mixture1d { components } => {
                Ok(components.iter().map(|c| c.weight * c.law.cdf(x)).sum())
            }
            other => Err(IslError::Unsupported(format!(
                "cdf of the {}-dimensional target {}",
                other.dim(),
                other.name()
            ))),
        }
    }

    /// Mixing matrix of the high-dimensional linear-Gaussian model (`dim x latent_dim`).
    pub fn mixing_matrix(&self) -> Option<Matrix> {
        match *self {
            TargetSpec::LinearGaussianHd {
                dim,
                latent_dim,
                matrix_seed,
            } => {
                let mut rng = RandomSource::new(matrix_seed).substream("mixing_matrix");
                let data = (0..dim * latent_dim).map(|_| rng.standard_normal()).collect();
                Some(Matrix::from_vec(dim, latent_dim, data).expect("sized"))
            }
            _ => None,
        }
    }

    /// Mode centres and per-mode std for the Gaussian-mixture benchmarks.
    pub fn mode_layout(&self) -> Option<crate::metrics::ModeLayout> {
        use crate::metrics::ModeLayout;
        match *self {
            TargetSpec::Ring2d { radius, std } => Some(ModeLayout {
                centers: ring_centers(radius, RING_MODES),
                std,
            }),
            TargetSpec::CircleGaussians { radius, std } => Some(ModeLayout {
                centers: ring_centers(radius, RING_MODES),
                std,
            }),
            TargetSpec::Grid2d { spacing, std } => Some(ModeLayout {
                centers: grid_centers(spacing),
                std,
            }),
            _ => None,
        }
    }
}

fn ring_centers(radius: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

fn grid_centers(spacing: f64) -> Vec<Vec<f64>> {
    let half = (GRID_SIDE as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(GRID_SIDE * GRID_SIDE);
    for i in 0..GRID_SIDE {
        for j in 0..GRID_SIDE {
            out.push(vec![
                spacing * (i as f64 - half),
                spacing * (j as f64 - half),
            ]);
        }
    }
    out
}

fn cauchy(rng: &mut RandomSource, loc: f64, scale: f64) -> f64 {
    Law1d::Cauchy { loc, scale }.sample(rng)
}

/// Draw `n` i.i.d. target samples as the rows of an `n x dim` matrix.
pub fn sample_target(spec: &TargetSpec, n: usize, rng: &mut RandomSource) -> Result<Matrix> {
    spec.validate()?;
    if n == 0 {
        return Err(IslError::Domain("sample_target needs n >= 1".into()));
    }
    let d = spec.dim();
    let mut out = Matrix::zeros(n, d);
    match spec {
        TargetSpec::Mixture1d { components } => {
            let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
            for i in 0..n {
                let c = rng.categorical(&weights);
                out.set(i, 0, components[c].law.sample(rng));
            }
        }
        TargetSpec::Ring2d { .. } | TargetSpec::CircleGaussians { .. } | TargetSpec::Grid2d { .. } => {
            let layout = spec.mode_layout().expect("mixture benchmark");
            for i in 0..n {
                let c = &layout.centers[rng.below(layout.centers.len())];
                out.set(i, 0, rng.normal(c[0], layout.std));
                out.set(i, 1, rng.normal(c[1], layout.std));
            }
        }
        TargetSpec::DualMoon { radius, noise } => {
            for i in 0..n {
                let t = rng.uniform(0.0, PI);
                let (x, y) = if rng.below(2) == 0 {
                    (radius * t.cos(), radius * t.sin())
                } else {
                    (radius * (1.0 - t.cos()), radius * (0.5 - t.sin()))
                };
                out.set(i, 0, x - radius / 2.0 + rng.normal(0.0, *noise));
                out.set(i, 1, y - radius / 4.0 + rng.normal(0.0, *noise));
            }
        }
        TargetSpec::TwoRings {
            inner_radius,
            outer_radius,
            radial_std,
        } => {
            for i in 0..n {
                let r0 = if rng.below(2) == 0 { *inner_radius } else { *outer_radius };
                let r = rng.normal(r0, *radial_std);
                let t = rng.uniform(0.0, std::f64::consts::TAU);
                out.set(i, 0, r * t.cos());
                out.set(i, 1, r * t.sin());
            }
        }
        TargetSpec::LinearGaussianHd { dim, latent_dim, .. } => {
            let a = spec.mixing_matrix().expect("linear model");
            let z_std = 10f64.sqrt();
            let mut z = vec![0.0; *latent_dim];
            for i in 0..n {
                for zj in z.iter_mut() {
                    *zj = rng.normal(0.0, z_std);
                }
                let row = out.row_mut(i);
                for (r, x) in row.iter_mut().enumerate().take(*dim) {
                    let az: f64 = a.row(r).iter().zip(&z).map(|(a, z)| a * z).sum();
                    *x = az + rng.normal(0.0, 0.1);
                }
            }
        }
        TargetSpec::HeavyTail2d { loc, scale } => {
            for i in 0..n {
                let a = cauchy(rng, *loc, *scale);
                let b = cauchy(rng, *loc, *scale);
                let diff = a - b;
                out.set(i, 0, a + b);
                out.set(i, 1, diff.signum() * diff.abs().sqrt());
            }
        }
        other => {
            let law = other.as_law().expect("1D kind");
            for i in 0..n {
                out.set(i, 0, law.sample(rng));
            }
        }
    }
    Ok(out)
}

/// Quantile `F^{-1}(u)` of a one-dimensional target. Mixtures are inverted by
/// bisection to an absolute tolerance of 1e-10.
pub fn target_quantile(spec: &TargetSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    if !(u > 0.0 && u < 1.0) {
        return Err(IslError::Domain(format!("u = {u} is not in (0, 1)")));
    }
    if let Some(law) = spec.as_law() {
        return Ok(law.quantile(u));
    }
    match spec {
        TargetSpec::Mixture1d { components } => {
            // The mixture quantile lies between the extreme component quantiles.
            let qs = components.iter().filter(|c| c.weight > 0.0).map(|c| c.law.quantile(u));
            let (mut lo, mut hi) = qs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
                (lo.min(q), hi.max(q))
            });
            let cdf = |x: f64| components.iter().map(|c| c.weight * c.law.cdf(x)).sum::<f64>();
            if hi - lo <= BISECTION_TOL {
                return Ok(0.5 * (lo + hi));
            }
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        other => Err(IslError::Unsupported(format!(
            "quantile of the {}-dimensional target {}",
            other.dim(),
            other.name()
        ))),
    }
}

/// `m` directions drawn uniformly on the unit sphere of `R^dim`.
pub fn sample_unit_sphere(dim: usize, m: usize, rng: &mut RandomSource) -> Result<Matrix> {
    if dim == 0 || m == 0 {
        return Err(IslError::Domain(format!(
            "sample_unit_sphere needs dim >= 1 and m >= 1, got ({dim}, {m})"
        )));
    }
    let mut out = Matrix::zeros(m, dim);
    for i in 0..m {
        let row = out.row_mut(i);
        loop {
            for x in row.iter_mut() {
                *x = rng.standard_normal();
            }
            let norm2: f64 = row.iter().map(|x| x * x).sum();
            if norm2 >= f64::MIN_POSITIVE && norm2.is_finite() {
                let norm = norm2.sqrt();
                for x in row.iter_mut() {
                    *x /= norm;
                }
                break;
            }
        }
    }
    Ok(out)
}
