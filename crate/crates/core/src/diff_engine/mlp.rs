//! Fully connected generator networks over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{IslError, Result};
use crate::matrix::Matrix;
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative from the pre-activation `z` and output `a`; ReLU uses 0 at 0.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::Relu | Activation::Identity)
    }
}

/// Architecture of an MLP generator: `layer_widths = [input, hidden..., output]`
/// and one activation per affine layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    /// Hidden layers share `hidden_activation`; the output layer is affine.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, hidden_activation: Activation, seed: u64) -> Self {
        let mut layer_widths = vec![input];
        layer_widths.extend_from_slice(hidden);
        layer_widths.push(output);
        let mut activations = vec![hidden_activation; hidden.len()];
        activations.push(Activation::Identity);
        GeneratorSpec {
            layer_widths,
            activations,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(IslError::InvalidGenerator(
                "need at least an input and an output width".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(IslError::InvalidGenerator(format!(
                "widths must be positive: {:?}",
                self.layer_widths
            )));
        }
        if self.activations.len() != self.layer_widths.len() - 1 {
            return Err(IslError::InvalidGenerator(format!(
                "{} layers but {} activations",
                self.layer_widths.len() - 1,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated")
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.activations.iter().all(|a| a.is_piecewise_linear())
    }

    pub fn layout(&self) -> ParamLayout {
        let mut layers = Vec::with_capacity(self.activations.len());
        let mut offset = 0;
        for w in self.layer_widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            layers.push(LayerSlice {
                fan_in,
                fan_out,
                offset,
            });
            offset += fan_in * fan_out + fan_out;
        }
        ParamLayout { layers, len: offset }
    }

    /// Kaiming-uniform weights for ReLU layers, Xavier-uniform for tanh and
    /// LeCun-uniform for affine layers; biases uniform in `±1/sqrt(fan_in)`.
    /// Each layer draws from its own sub-streams, so widening a later layer does
    /// not perturb earlier rows.
    pub fn init_params(&self) -> Result<ParamVector> {
        self.validate()?;
        let layout = self.layout();
        let mut values = vec![0.0; layout.len];
        let root = RandomSource::new(self.seed).substream("generator_init");
        for (l, (slice, act)) in layout.layers.iter().zip(&self.activations).enumerate() {
            let bound = match act {
                Activation::Relu => (6.0 / slice.fan_in as f64).sqrt(),
                Activation::Tanh => (6.0 / (slice.fan_in + slice.fan_out) as f64).sqrt(),
                Activation::Identity => (3.0 / slice.fan_in as f64).sqrt(),
            };
            let mut wr = root.substream_indexed("weights", l as u64);
            for v in &mut values[slice.weights()] {
                *v = wr.uniform(-bound, bound);
            }
            let b_bound = 1.0 / (slice.fan_in as f64).sqrt();
            let mut br = root.substream_indexed("biases", l as u64);
            for v in &mut values[slice.biases()] {
                *v = br.uniform(-b_bound, b_bound);
            }
        }
        Ok(ParamVector { layout, values })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlice {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerSlice {
    /// Row-major `fan_out x fan_in` weight block.
    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn biases(&self) -> std::ops::Range<usize> {
        let s = self.offset + self.fan_in * self.fan_out;
        s..s + self.fan_out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub layers: Vec<LayerSlice>,
    pub len: usize,
}

/// Flat parameter vector with its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len {
            return Err(IslError::shape(format!("{} parameters", layout.len), values.len()));
        }
        Ok(ParamVector { layout, values })
    }

    pub fn zeros_like(other: &ParamVector) -> Self {
        ParamVector {
            layout: other.layout.clone(),
            values: vec![0.0; other.values.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn add_assign(&mut self, other: &ParamVector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

fn check_params(params: &ParamVector, spec: &GeneratorSpec) -> Result<()> {
    spec.validate()?;
    let layout = spec.layout();
    if params.layout != layout || params.values.len() != layout.len {
        return Err(IslError::shape(
            format!("{} parameters for {:?}", layout.len, spec.layer_widths),
            params.values.len(),
        ));
    }
    Ok(())
}

fn affine_forward(w: &[f64], b: &[f64], x: &Matrix, fan_out: usize) -> Matrix {
    let fan_in = x.cols();
    // column-major copy so the inner loop runs over outputs and vectorizes;
    // each output still accumulates its inputs in index order
    let mut wt = vec![0.0; w.len()];
    for o in 0..fan_out {
        for i in 0..fan_in {
            wt[i * fan_out + o] = w[o * fan_in + i];
        }
    }
    let mut z = Matrix::zeros(x.rows(), fan_out);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let zr = z.row_mut(r);
        zr.copy_from_slice(b);
        for (i, &xi) in xr.iter().enumerate() {
            // inactive ReLU units contribute nothing
            if xi == 0.0 {
                continue;
            }
            for (zo, &wio) in zr.iter_mut().zip(&wt[i * fan_out..(i + 1) * fan_out]) {
                *zo += wio * xi;
            }
        }
    }
    z
}

/// Evaluate the network on the rows of `input`.
pub fn mlp_forward(params: &ParamVector, spec: &GeneratorSpec, input: &Matrix) -> Result<Matrix> {
    check_params(params, spec)?;
    if input.cols() != spec.input_dim() {
        return Err(IslError::shape(format!("input width {}", spec.input_dim()), input.cols()));
    }
    let mut x = input.clone();
    for (slice, act) in params.layout.layers.iter().zip(&spec.activations) {
        let mut z = affine_forward(&params.values[slice.weights()], &params.values[slice.biases()], &x, slice.fan_out);
        for v in z.as_mut_slice() {
            *v = act.apply(*v);
        }
        x = z;
    }
    Ok(x)
}

/// Forward activations recorded for one reverse pass.
#[derive(Debug)]
pub struct MlpTape {
    params: ParamVector,
    activations: Vec<Activation>,
    // inputs[l] feeds layer l; pre[l] and post[l] are its pre/post activations
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

/// Forward pass that keeps what the backward pass needs.
pub fn mlp_forward_taped(params: &ParamVector, spec: &GeneratorSpec, input: &Matrix) -> Result<(Matrix, MlpTape)> {
    check_params(params, spec)?;
    if input.cols() != spec.input_dim() {
        return Err(IslError::shape(format!("input width {}", spec.input_dim()), input.cols()));
    }
    let mut inputs = Vec::new();
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut x = input.clone();
    for (slice, act) in params.layout.layers.iter().zip(&spec.activations) {
        let z = affine_forward(&params.values[slice.weights()], &params.values[slice.biases()], &x, slice.fan_out);
        let mut a = z.clone();
        for v in a.as_mut_slice() {
            *v = act.apply(*v);
        }
        inputs.push(x);
        pre.push(z);
        x = a.clone();
        post.push(a);
    }
    let tape = MlpTape {
        params: params.clone(),
        activations: spec.activations.clone(),
        inputs,
        pre,
        post,
    };
    Ok((x, tape))
}

impl MlpTape {
    /// Gradient of a scalar loss w.r.t. the parameters, given the loss
    /// gradient w.r.t. every network output. Consumes the tape.
    pub fn backward(self, output_grad: &Matrix) -> Result<ParamVector> {
        let last = self.post.last().expect("at least one layer");
        if output_grad.rows() != last.rows() || output_grad.cols() != last.cols() {
            return Err(IslError::shape(
                format!("{}x{} output gradient", last.rows(), last.cols()),
                format!("{}x{}", output_grad.rows(), output_grad.cols()),
            ));
        }
        let mut grad = ParamVector::zeros_like(&self.params);
        let mut g = output_grad.clone();
        for l in (0..self.pre.len()).rev() {
            let slice = &self.params.layout.layers[l];
            let act = self.activations[l];
            let (z, a, x) = (&self.pre[l], &self.post[l], &self.inputs[l]);
            // dZ = G * act'(Z)
            for ((gv, &zv), &av) in g.as_mut_slice().iter_mut().zip(z.as_slice()).zip(a.as_slice()) {
                *gv *= act.derivative(zv, av);
            }
            let (fan_in, fan_out) = (slice.fan_in, slice.fan_out);
            {
                let gw = &mut grad.values[slice.offset..slice.offset + fan_in * fan_out + fan_out];
                let (dw, db) = gw.split_at_mut(fan_in * fan_out);
                for r in 0..g.rows() {
                    let gr = g.row(r);
                    let xr = x.row(r);
                    for o in 0..fan_out {
                        let go = gr[o];
                        if go == 0.0 {
                            continue;
                        }
                        db[o] += go;
                        let row = &mut dw[o * fan_in..(o + 1) * fan_in];
                        for (d, xi) in row.iter_mut().zip(xr) {
                            *d += go * xi;
                        }
                    }
                }
            }
            if l > 0 {
                let w = &self.params.values[slice.weights()];
                let mut dx = Matrix::zeros(g.rows(), fan_in);
                for r in 0..g.rows() {
                    let gr = g.row(r);
                    let dxr = dx.row_mut(r);
                    for o in 0..fan_out {
                        let go = gr[o];
                        if go == 0.0 {
                            continue;
                        }
                        for (d, wi) in dxr.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                            *d += go * wi;
                        }
                    }
                }
                g = dx;
            }
        }
        Ok(grad)
    }
}
