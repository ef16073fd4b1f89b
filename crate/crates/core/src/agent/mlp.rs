//! Fully connected tanh network with reverse-mode gradients.

use rand::Rng;

use crate::rng::standard_normal;
use crate::scalar::Real;

/// Dense layer, `weights` row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs] }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, &b)| {
            row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi)
        }));
    }
}

/// Hidden layers use tanh, the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
}

/// Layer activations from a forward pass; `0` is the input, the last entry the output.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Real> Mlp<T> {
    /// All-zero network with layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need an input and an output width");
        Self { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() }
    }

    /// Orthogonal weights scaled by `hidden_gain` (output layer: `output_gain`), zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let gain = if l == last { output_gain } else { hidden_gain };
            layer.weights = orthogonal_matrix(layer.outputs, layer.inputs, gain, rng);
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_traced(&self, x: &[T]) -> Trace<T> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.apply(&activations[l], &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        Trace { activations }
    }

    /// Adds `∂(grad_out · output)/∂params` to `grad`, laid out like [`Mlp::write_flat`].
    pub fn backward(&self, trace: &Trace<T>, grad_out: &[T], grad: &mut [T]) {
        debug_assert_eq!(grad.len(), self.param_count());
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.param_count();
        }
        let mut delta = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let (gw, gb) = grad[offsets[l]..offsets[l] + layer.param_count()].split_at_mut(layer.weights.len());
            for (o, &d) in delta.iter().enumerate() {
                gb[o] = gb[o] + d;
                if d == T::zero() {
                    continue;
                }
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g = *g + d * a;
                }
            }
            if l == 0 {
                break;
            }
            // hidden activations are tanh outputs: d tanh = 1 − a²
            let mut prev = vec![T::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p = *p + w * d;
                }
            }
            for (p, &a) in prev.iter_mut().zip(input) {
                *p = *p * (T::one() - a * a);
            }
            delta = prev;
        }
    }

    pub fn write_flat(&self, out: &mut Vec<T>) {
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
    }

    /// Loads parameters from the front of `src`, returning how many were consumed.
    pub fn read_flat(&mut self, src: &[T]) -> usize {
        let mut off = 0;
        for layer in &mut self.layers {
            let (nw, nb) = (layer.weights.len(), layer.bias.len());
            layer.weights.copy_from_slice(&src[off..off + nw]);
            layer.bias.copy_from_slice(&src[off + nw..off + nw + nb]);
            off += nw + nb;
        }
        off
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn zero_output_layer(&mut self) {
        let last = self.layers.len() - 1;
        let layer = &mut self.layers[last];
        layer.weights.iter_mut().chain(layer.bias.iter_mut()).for_each(|v| *v = T::zero());
    }
}

/// `rows × cols` matrix whose rows (or columns, whichever are fewer) are
/// orthonormal, scaled by `gain`.
fn orthogonal_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<T> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| standard_normal(rng)).collect();
        // two Gram–Schmidt passes keep the basis orthogonal to rounding
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut w = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = if rows <= cols { basis[r][c] } else { basis[c][r] };
            w[r * cols + c] = T::lit(gain * v);
        }
    }
    w
}
