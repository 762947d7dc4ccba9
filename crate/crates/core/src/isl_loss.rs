//! Differentiable surrogates of the rank statistic.
//!
//! For a real observation `y` and generated samples `f_1..f_K` the soft rank is
//! `sum_i sigmoid(alpha (y - f_i))`. Soft ranks are binned with RBF kernels
//! `exp(-(a - k)^2 / (2 nu^2))` centred at `k = 0..K`, and the loss is the
//! `l1` (or `l2`) distance between the resulting vector `q` and the uniform
//! vector `1/(K+1)`. Unlike `d_K` there is no extra `1/(K+1)` prefactor.
//!
//! By default `q` is rescaled to sum to one before the comparison. The raw
//! kernel sums over-count interior bins relative to the two edge bins, which
//! moves the minimizer of the population loss away from the data law (towards
//! an under-dispersed generator); normalizing, with `nu` small enough that
//! neighbouring kernels barely overlap, removes most of that bias.
//!
//! Sums over observations and over fakes are taken in sorted order, so the loss
//! does not depend on the order of either batch.

use serde::{Deserialize, Serialize};

use crate::diff_engine::{mlp_forward_taped, sigmoid, GeneratorSpec, ParamVector, Tape, Var};
use crate::error::{IslError, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

pub const DEFAULT_ALPHA: f64 = 10.0;
pub const DEFAULT_NU: f64 = 0.3;
const DIRECTION_NORM_TOL: f64 = 1e-9;
// exp(-x) underflows to zero past this point
const KERNEL_CUTOFF: f64 = 745.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IslHyperparams {
    pub k: usize,
    pub alpha: f64,
    pub nu: f64,
    pub norm: Norm,
    /// Draw `K` fresh fakes for every observation (the default in configs)
    /// instead of sharing one set of `K` fakes across the batch.
    pub fresh_fakes_per_datum: bool,
    /// Rescale `q` to sum to one before comparing it with the uniform vector.
    pub normalize_histogram: bool,
}

impl IslHyperparams {
    pub fn new(k: usize) -> Self {
        IslHyperparams {
            k,
            alpha: DEFAULT_ALPHA,
            nu: DEFAULT_NU,
            norm: Norm::L1,
            fresh_fakes_per_datum: false,
            normalize_histogram: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(IslError::Domain("K must be >= 1".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(IslError::Domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(IslError::Domain(format!("nu must be > 0, got {}", self.nu)));
        }
        Ok(())
    }

    /// Noise rows consumed by one projection of a batch of `n_real` observations.
    pub fn fakes_per_projection(&self, n_real: usize) -> usize {
        if self.fresh_fakes_per_datum {
            n_real * self.k
        } else {
            self.k
        }
    }
}

/// The K-independent part of [`IslHyperparams`], as it appears in configs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSettings {
    pub alpha: f64,
    pub nu: f64,
    pub norm: Norm,
    pub fresh_fakes_per_datum: bool,
    pub normalize_histogram: bool,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        SurrogateSettings {
            alpha: DEFAULT_ALPHA,
            nu: DEFAULT_NU,
            norm: Norm::L1,
            fresh_fakes_per_datum: true,
            normalize_histogram: true,
        }
    }
}

impl SurrogateSettings {
    pub fn at_k(&self, k: usize) -> IslHyperparams {
        IslHyperparams {
            k,
            alpha: self.alpha,
            nu: self.nu,
            norm: self.norm,
            fresh_fakes_per_datum: self.fresh_fakes_per_datum,
            normalize_histogram: self.normalize_histogram,
        }
    }
}

fn sorted_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}

/// `sum_i sigmoid(alpha (y - fake_i))`, a value in `[0, K]`.
pub fn soft_rank(y: f64, fake: &[f64], alpha: f64) -> f64 {
    sorted_sum(fake.iter().map(|f| sigmoid(alpha * (y - f))).collect())
}

#[inline]
fn kernel(a: f64, center: f64, nu: f64) -> f64 {
    let d = a - center;
    (-(d * d) / (2.0 * nu * nu)).exp()
}

/// RBF soft histogram `q[k] = 1/N sum_i exp(-(a_i - k)^2 / (2 nu^2))`, `k = 0..K`.
/// `q` need not sum to one.
pub fn rbf_soft_histogram(soft_ranks: &[f64], k: usize, nu: f64) -> Vec<f64> {
    let n = soft_ranks.len() as f64;
    (0..=k)
        .map(|bin| sorted_sum(soft_ranks.iter().map(|&a| kernel(a, bin as f64, nu)).collect()) / n)
        .collect()
}

/// `|| 1/(K+1) - q ||` in the chosen norm.
pub fn isl_surrogate_loss(q: &[f64], norm: Norm) -> f64 {
    let u = 1.0 / q.len() as f64;
    match norm {
        Norm::L1 => q.iter().map(|x| (u - x).abs()).sum(),
        Norm::L2 => q.iter().map(|x| (u - x) * (u - x)).sum::<f64>().sqrt(),
    }
}

/// Where the fakes of observation `n` live within a projection's fake block.
#[derive(Clone, Copy)]
enum FakeSharing {
    Shared,
    PerDatum,
}

fn sum_sorted_vars(tape: &mut Tape, mut vars: Vec<Var>) -> Var {
    vars.sort_by(|a, b| tape.value(*a).total_cmp(&tape.value(*b)));
    tape.sum(&vars)
}

/// Builds the surrogate loss of one 1D projection on the tape.
fn surrogate_on_tape(tape: &mut Tape, reals: &[f64], fakes: &[Var], sharing: FakeSharing, hyper: &IslHyperparams) -> Var {
    let k = hyper.k;
    let n = reals.len();
    let inv_two_nu2 = 1.0 / (2.0 * hyper.nu * hyper.nu);
    let mut bins: Vec<Vec<Var>> = vec![Vec::with_capacity(n); k + 1];
    for (i, &y) in reals.iter().enumerate() {
        let block = match sharing {
            FakeSharing::Shared => fakes,
            FakeSharing::PerDatum => &fakes[i * k..(i + 1) * k],
        };
        let terms: Vec<Var> = block
            .iter()
            .map(|&f| {
                let t = tape.affine(f, -hyper.alpha, hyper.alpha * y);
                tape.sigmoid(t)
            })
            .collect();
        let a = sum_sorted_vars(tape, terms);
        let a_val = tape.value(a);
        for (bin, slot) in bins.iter_mut().enumerate() {
            let d = a_val - bin as f64;
            if d * d * inv_two_nu2 > KERNEL_CUTOFF {
                continue;
            }
            let centered = tape.affine(a, 1.0, -(bin as f64));
            let sq = tape.square(centered);
            let scaled = tape.affine(sq, -inv_two_nu2, 0.0);
            slot.push(tape.exp(scaled));
        }
    }
    let u = 1.0 / (k as f64 + 1.0);
    let inv_n = 1.0 / n as f64;
    let mut q: Vec<Var> = bins
        .into_iter()
        .map(|terms| {
            let s = if terms.is_empty() {
                tape.leaf(0.0)
            } else {
                sum_sorted_vars(tape, terms)
            };
            tape.affine(s, inv_n, 0.0)
        })
        .collect();
    if hyper.normalize_histogram {
        let total = tape.sum(&q);
        q = q.iter().map(|&v| tape.div(v, total)).collect();
    }
    let deviations: Vec<Var> = q.iter().map(|&v| tape.affine(v, -1.0, u)).collect();
    match hyper.norm {
        Norm::L1 => {
            let abs: Vec<Var> = deviations.iter().map(|&d| tape.abs(d)).collect();
            tape.sum(&abs)
        }
        Norm::L2 => {
            let sq: Vec<Var> = deviations.iter().map(|&d| tape.square(d)).collect();
            let s = tape.sum(&sq);
            tape.sqrt(s)
        }
    }
}

/// Loss value and its gradient with respect to the generator parameters.
#[derive(Clone, Debug)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: ParamVector,
    /// Per-projection surrogate losses, in projection order.
    pub per_projection: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reduction {
    Mean,
    Sum,
}

fn axis_of(direction: &[f64]) -> Option<usize> {
    let mut axis = None;
    for (j, &c) in direction.iter().enumerate() {
        if c == 1.0 && axis.is_none() {
            axis = Some(j);
        } else if c != 0.0 {
            return None;
        }
    }
    axis
}

fn projected_loss(
    params: &ParamVector,
    gen: &GeneratorSpec,
    real: &Matrix,
    noise: &Matrix,
    directions: &Matrix,
    hyper: &IslHyperparams,
    reduction: Reduction,
) -> Result<LossAndGrad> {
    hyper.validate()?;
    gen.validate()?;
    let n_real = real.rows();
    if n_real == 0 {
        return Err(IslError::Empty("real batch must hold at least one observation".into()));
    }
    let d = gen.output_dim();
    if real.cols() != d {
        return Err(IslError::shape(format!("real batch width {d}"), real.cols()));
    }
    if directions.cols() != d || directions.rows() == 0 {
        return Err(IslError::shape(
            format!("m x {d} directions with m >= 1"),
            format!("{}x{}", directions.rows(), directions.cols()),
        ));
    }
    for (i, s) in directions.iter_rows().enumerate() {
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > DIRECTION_NORM_TOL {
            return Err(IslError::Domain(format!("direction {i} has norm {norm}, expected 1")));
        }
    }
    let m = directions.rows();
    let block = hyper.fakes_per_projection(n_real);
    let shared_noise = if noise.rows() == block {
        true
    } else if noise.rows() == m * block {
        false
    } else {
        return Err(IslError::shape(
            format!("{block} or {} noise rows", m * block),
            noise.rows(),
        ));
    };
    let sharing = if hyper.fresh_fakes_per_datum {
        FakeSharing::PerDatum
    } else {
        FakeSharing::Shared
    };

    let (outputs, mlp_tape) = mlp_forward_taped(params, gen, noise)?;
    let per_dir_nodes = n_real * hyper.k * 2 + n_real * (hyper.k + 1) * 4 + block;
    let mut tape = Tape::with_capacity(outputs.as_slice().len() + m * per_dir_nodes, m * per_dir_nodes * 2);
    let leaves: Vec<Var> = outputs.as_slice().iter().map(|&v| tape.leaf(v)).collect();

    let mut losses = Vec::with_capacity(m);
    for (p, s) in directions.iter_rows().enumerate() {
        let rows = if shared_noise { 0..block } else { p * block..(p + 1) * block };
        let (reals, fakes): (Vec<f64>, Vec<Var>) = match axis_of(s) {
            Some(j) => (real.col(j), rows.map(|r| leaves[r * d + j]).collect()),
            None => (
                real.project(s),
                rows.map(|r| tape.dot_const(&leaves[r * d..(r + 1) * d], s)).collect(),
            ),
        };
        losses.push(surrogate_on_tape(&mut tape, &reals, &fakes, sharing, hyper));
    }
    let total = tape.sum(&losses);
    let out = match reduction {
        Reduction::Sum => total,
        Reduction::Mean => tape.affine(total, 1.0 / m as f64, 0.0),
    };
    let loss = tape.value(out);
    let per_projection = losses.iter().map(|&l| tape.value(l)).collect();
    if !loss.is_finite() {
        return Err(IslError::NonFinite(format!("surrogate loss is {loss}")));
    }
    let grads = tape.backward(out, 1.0)?;
    let out_grad = Matrix::from_vec(
        outputs.rows(),
        outputs.cols(),
        leaves.iter().map(|&v| grads.wrt(v)).collect(),
    )?;
    let grad = mlp_tape.backward(&out_grad)?;
    Ok(LossAndGrad {
        loss,
        grad,
        per_projection,
    })
}

/// One-dimensional surrogate loss and gradient.
///
/// `noise` holds `K` rows (one fake set shared by the batch) or `N*K` rows when
/// `hyper.fresh_fakes_per_datum` is set (block `n` belongs to observation `n`).
pub fn isl_loss_and_gradient(
    params: &ParamVector,
    real: &[f64],
    noise: &Matrix,
    hyper: &IslHyperparams,
    gen: &GeneratorSpec,
) -> Result<LossAndGrad> {
    if gen.output_dim() != 1 {
        return Err(IslError::shape("generator output width 1", gen.output_dim()));
    }
    let real = Matrix::column(real.to_vec());
    let axis = Matrix::column(vec![1.0]);
    projected_loss(params, gen, &real, noise, &axis, hyper, Reduction::Sum)
}

/// Sliced surrogate: the mean over `directions` of the 1D surrogate on the
/// projected real and generated batches.
///
/// `noise` holds either one fake block shared by every direction or `m` blocks,
/// one per direction.
pub fn sliced_isl_loss(
    params: &ParamVector,
    real: &Matrix,
    noise: &Matrix,
    directions: &Matrix,
    hyper: &IslHyperparams,
    gen: &GeneratorSpec,
) -> Result<LossAndGrad> {
    projected_loss(params, gen, real, noise, directions, hyper, Reduction::Mean)
}

/// Per-marginal baseline: the sum over coordinate axes of the 1D surrogate.
pub fn marginal_isl_loss(
    params: &ParamVector,
    real: &Matrix,
    noise: &Matrix,
    hyper: &IslHyperparams,
    gen: &GeneratorSpec,
) -> Result<LossAndGrad> {
    let axes = axis_directions(gen.output_dim());
    projected_loss(params, gen, real, noise, &axes, hyper, Reduction::Sum)
}

/// The `d` canonical unit vectors as rows.
pub fn axis_directions(d: usize) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        m.set(i, i, 1.0);
    }
    m
}

/// Per-coordinate affine map to zero median and unit interquartile range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(data: &Matrix) -> Result<Self> {
        if data.rows() == 0 {
            return Err(IslError::Empty("cannot standardize an empty dataset".into()));
        }
        let mut center = Vec::with_capacity(data.cols());
        let mut scale = Vec::with_capacity(data.cols());
        for c in 0..data.cols() {
            let mut col = data.col(c);
            col.sort_by(f64::total_cmp);
            let iqr = sorted_quantile(&col, 0.75) - sorted_quantile(&col, 0.25);
            if !(iqr > 0.0) || !iqr.is_finite() {
                return Err(IslError::Degenerate(format!("coordinate {c} has zero interquartile range")));
            }
            center.push(sorted_quantile(&col, 0.5));
            scale.push(iqr);
        }
        Ok(Standardizer { center, scale })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.center[c]) / self.scale[c];
            }
        }
        out
    }

    pub fn inverse(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.center[c] + self.scale[c] * *v;
            }
        }
        out
    }
}
