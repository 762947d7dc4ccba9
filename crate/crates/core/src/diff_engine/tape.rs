//! Scalar reverse-mode tape.
//!
//! Nodes are appended in evaluation order, each with its parents and the local
//! partial derivative toward each parent, so one reverse sweep over the node
//! list accumulates all adjoints.

use crate::error::{IslError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
pub struct Tape {
    values: Vec<f64>,
    // node i owns parents[starts[i]..starts[i + 1]]
    starts: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            starts: vec![0],
            parents: Vec::new(),
            partials: Vec::new(),
            consumed: false,
        }
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        let mut starts = Vec::with_capacity(nodes + 1);
        starts.push(0);
        Tape {
            values: Vec::with_capacity(nodes),
            starts,
            parents: Vec::with_capacity(edges),
            partials: Vec::with_capacity(edges),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: f64) -> Var {
        let id = self.values.len() as u32;
        self.values.push(value);
        self.starts.push(self.parents.len() as u32);
        Var(id)
    }

    fn edge(&mut self, parent: Var, partial: f64) {
        self.parents.push(parent.0);
        self.partials.push(partial);
    }

    fn unary(&mut self, x: Var, value: f64, dx: f64) -> Var {
        self.edge(x, dx);
        self.push(value)
    }

    fn binary(&mut self, x: Var, dx: f64, y: Var, dy: f64, value: f64) -> Var {
        self.edge(x, dx);
        self.edge(y, dy);
        self.push(value)
    }

    /// Input variable (also used for constants: a leaf with no parents).
    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    pub fn add(&mut self, x: Var, y: Var) -> Var {
        let v = self.value(x) + self.value(y);
        self.binary(x, 1.0, y, 1.0, v)
    }

    pub fn sub(&mut self, x: Var, y: Var) -> Var {
        let v = self.value(x) - self.value(y);
        self.binary(x, 1.0, y, -1.0, v)
    }

    pub fn mul(&mut self, x: Var, y: Var) -> Var {
        let (a, b) = (self.value(x), self.value(y));
        self.binary(x, b, y, a, a * b)
    }

    pub fn div(&mut self, x: Var, y: Var) -> Var {
        let (a, b) = (self.value(x), self.value(y));
        self.binary(x, 1.0 / b, y, -a / (b * b), a / b)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 0.0)
    }

    /// `a * x + b` for constants `a`, `b`.
    pub fn affine(&mut self, x: Var, a: f64, b: f64) -> Var {
        let v = a * self.value(x) + b;
        self.unary(x, v, a)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let a = self.value(x);
        self.unary(x, a * a, 2.0 * a)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let s = self.value(x).sqrt();
        let d = if s > 0.0 { 0.5 / s } else { 0.0 };
        self.unary(x, s, d)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let e = self.value(x).exp();
        self.unary(x, e, e)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let a = self.value(x);
        self.unary(x, a.ln(), 1.0 / a)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let s = sigmoid(self.value(x));
        self.unary(x, s, s * (1.0 - s))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x).tanh();
        self.unary(x, t, 1.0 - t * t)
    }

    /// ReLU with subgradient 0 at 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let a = self.value(x);
        if a > 0.0 {
            self.unary(x, a, 1.0)
        } else {
            self.unary(x, 0.0, 0.0)
        }
    }

    /// |x| with subgradient 0 at 0.
    pub fn abs(&mut self, x: Var) -> Var {
        let a = self.value(x);
        let d = if a > 0.0 {
            1.0
        } else if a < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(x, a.abs(), d)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut v = 0.0;
        for &x in xs {
            v += self.value(x);
            self.edge(x, 1.0);
        }
        self.push(v)
    }

    /// `sum_i c_i x_i` for constant coefficients.
    pub fn dot_const(&mut self, xs: &[Var], coeffs: &[f64]) -> Var {
        debug_assert_eq!(xs.len(), coeffs.len());
        let mut v = 0.0;
        for (&x, &c) in xs.iter().zip(coeffs) {
            v += c * self.value(x);
            self.edge(x, c);
        }
        self.push(v)
    }

    /// Reverse sweep from `output`, seeded with `upstream`. A tape supports a
    /// single backward pass.
    pub fn backward(&mut self, output: Var, upstream: f64) -> Result<Gradients> {
        if self.consumed {
            return Err(IslError::TapeConsumed);
        }
        self.consumed = true;
        let mut adj = vec![0.0; self.values.len()];
        adj[output.index()] = upstream;
        for i in (0..=output.index()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (self.starts[i] as usize, self.starts[i + 1] as usize);
            for j in s..e {
                adj[self.parents[j] as usize] += a * self.partials[j];
            }
        }
        Ok(Gradients { adjoints: adj })
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.adjoints[v.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let th = t.leaf(3.0);
        let y = t.mul(th, th);
        let g = t.backward(y, 1.0).unwrap();
        assert_eq!(g.wrt(th), 6.0);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let mut t = Tape::new();
        let th = t.leaf(2.0);
        let c = t.leaf(5.0);
        let g = t.backward(c, 1.0).unwrap();
        assert_eq!(g.wrt(th), 0.0);
    }

    #[test]
    fn second_backward_fails() {
        let mut t = Tape::new();
        let x = t.leaf(1.0);
        let y = t.exp(x);
        t.backward(y, 1.0).unwrap();
        assert!(matches!(t.backward(y, 1.0), Err(IslError::TapeConsumed)));
    }

    #[test]
    fn subgradients_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(0.0);
        let r = t.relu(x);
        let a = t.abs(x);
        let s = t.add(r, a);
        let g = t.backward(s, 1.0).unwrap();
        assert_eq!(g.wrt(x), 0.0);
    }

    #[test]
    fn composite_matches_finite_differences() {
        let f = |t: &mut Tape, x: Var, y: Var| {
            let a = t.mul(x, y);
            let b = t.sigmoid(a);
            let c = t.tanh(y);
            let d = t.div(b, c);
            let e = t.ln(d);
            let s = t.sqrt(x);
            let h = t.dot_const(&[e, s, x], &[0.5, 2.0, -1.0]);
            t.square(h)
        };
        let (x0, y0) = (1.3, 0.7);
        let mut t = Tape::new();
        let (x, y) = (t.leaf(x0), t.leaf(y0));
        let out = f(&mut t, x, y);
        let g = t.backward(out, 1.0).unwrap();
        let eval = |a: f64, b: f64| {
            let mut t = Tape::new();
            let (x, y) = (t.leaf(a), t.leaf(b));
            let o = f(&mut t, x, y);
            t.value(o)
        };
        let h = 1e-6;
        let dx = (eval(x0 + h, y0) - eval(x0 - h, y0)) / (2.0 * h);
        let dy = (eval(x0, y0 + h) - eval(x0, y0 - h)) / (2.0 * h);
        assert_abs_diff_eq!(g.wrt(x), dx, epsilon = 1e-7);
        assert_abs_diff_eq!(g.wrt(y), dy, epsilon = 1e-7);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(1e4), 1.0);
        assert_eq!(sigmoid(-1e4), 0.0);
        assert!(sigmoid(-745.0) >= 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
