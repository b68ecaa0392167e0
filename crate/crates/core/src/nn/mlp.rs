//! Dense feed-forward network with tanh hidden layers and a linear output.
//!
//! Parameters live in one flat vector. Each layer contributes its weight
//! matrix (row-major, `out × in`) followed by its bias vector, layers in order.
//! The same layout is used by the checkpoint format.

use rand::Rng;

use crate::error::{Error, Result};

pub const HIDDEN_SIZES: [usize; 2] = [32, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations of one forward pass, input first, output last.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least the input")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Network with all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParams(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Mlp::zeros(sizes)?;
        net.set_params(&params)?;
        Ok(net)
    }

    /// Uniform init in `±1/√fan_in`; the output layer is additionally scaled
    /// by `output_scale`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Mlp::zeros(sizes)?;
        let n_layers = net.num_layers();
        let mut offset = 0;
        for layer in 0..n_layers {
            let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if layer + 1 == n_layers { output_scale } else { 1.0 };
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound) * scale;
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// `[input, 32, 16, output]`.
    pub fn standard<R: Rng + ?Sized>(input: usize, output: usize, output_scale: f64, rng: &mut R) -> Result<Self> {
        Mlp::init(&[input, HIDDEN_SIZES[0], HIDDEN_SIZES[1], output], output_scale, rng)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }
    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }
    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }
    pub fn num_params(&self) -> usize {
        self.params.len()
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// (weights, biases) of `layer`.
    fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let offset: usize = self.sizes[..=layer].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
        let w = &self.params[offset..offset + i * o];
        let b = &self.params[offset + i * o..offset + i * o + o];
        (w, b)
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..=layer].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.activations.pop().unwrap())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let n_layers = self.num_layers();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for layer in 0..n_layers {
            let (w, b) = self.layer(layer);
            let h = activations.last().unwrap();
            let hidden = layer + 1 < n_layers;
            let out: Vec<f64> = b
                .iter()
                .zip(w.chunks_exact(h.len()))
                .map(|(&bias, row)| {
                    let z = bias + row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
                    if hidden {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Backpropagates `upstream = ∂L/∂output` through `trace`, adding
    /// `∂L/∂θ` into `grad` (length [`num_params`](Self::num_params)).
    /// Returns `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(upstream.len(), self.output_dim(), "upstream gradient size");
        assert_eq!(grad.len(), self.num_params(), "gradient buffer size");
        let n_layers = self.num_layers();
        let mut g = upstream.to_vec();
        for layer in (0..n_layers).rev() {
            let out = &trace.activations[layer + 1];
            if layer + 1 < n_layers {
                for (gi, h) in g.iter_mut().zip(out) {
                    *gi *= 1.0 - h * h;
                }
            }
            let input = &trace.activations[layer];
            let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
            let offset = self.layer_offset(layer);
            let (gw, gb) = grad[offset..offset + i * o + o].split_at_mut(i * o);
            for (r, &gz) in g.iter().enumerate() {
                for (dw, x) in gw[r * i..(r + 1) * i].iter_mut().zip(input) {
                    *dw += gz * x;
                }
                gb[r] += gz;
            }
            let (w, _) = self.layer(layer);
            let mut prev = vec![0.0; i];
            for (r, &gz) in g.iter().enumerate() {
                for (p, wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                    *p += gz * wv;
                }
            }
            g = prev;
        }
        g
    }

    /// Gradient of `upstream · output(x)` with respect to the parameters.
    pub fn param_gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let trace = self.trace(x)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut grad = vec![0.0; self.num_params()];
        self.backward(&trace, upstream, &mut grad);
        Ok(grad)
    }

    /// Forward-mode directional derivative: returns `(output, J·direction)`
    /// where `J = ∂output/∂θ`.
    pub fn jvp(&self, x: &[f64], direction: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        if direction.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: direction.len(),
            });
        }
        let n_layers = self.num_layers();
        let mut h = x.to_vec();
        let mut dh = vec![0.0; x.len()];
        for layer in 0..n_layers {
            let (w, b) = self.layer(layer);
            let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
            let offset = self.layer_offset(layer);
            let dw = &direction[offset..offset + i * o];
            let db = &direction[offset + i * o..offset + i * o + o];
            let hidden = layer + 1 < n_layers;
            let mut next = Vec::with_capacity(o);
            let mut dnext = Vec::with_capacity(o);
            for r in 0..o {
                let row = &w[r * i..(r + 1) * i];
                let drow = &dw[r * i..(r + 1) * i];
                let mut z = b[r];
                let mut dz = db[r];
                for k in 0..i {
                    z += row[k] * h[k];
                    dz += drow[k] * h[k] + row[k] * dh[k];
                }
                if hidden {
                    let t = z.tanh();
                    next.push(t);
                    dnext.push((1.0 - t * t) * dz);
                } else {
                    next.push(z);
                    dnext.push(dz);
                }
            }
            h = next;
            dh = dnext;
        }
        Ok((h, dh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn zero_params_zero_output() {
        let net = Mlp::zeros(&[5, 32, 16, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.num_params(), 5 * 32 + 32 + 32 * 16 + 16 + 16 * 2 + 2);
    }

    #[test]
    fn single_linear_layer() {
        let net = Mlp::from_params(&[1, 1], vec![1.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[0.37]).unwrap(), vec![0.37]);
        let g = net.param_gradient(&[0.37], &[1.0]).unwrap();
        assert_eq!(g, vec![0.37, 1.0]);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let net = Mlp::standard(5, 2, 1.0, &mut rng_from(1, &[])).unwrap();
        let g = net.param_gradient(&[0.1; 5], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 3, got: 1 })));
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::zeros(&[3, 0, 2]).is_err());
        assert!(Mlp::from_params(&[1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn init_respects_bounds_and_output_scale() {
        let net = Mlp::standard(5, 2, 0.01, &mut rng_from(2, &[])).unwrap();
        let (w0, b0) = net.layer(0);
        assert!(w0.iter().all(|w| w.abs() < 1.0 / 5f64.sqrt()));
        assert!(b0.iter().all(|&b| b == 0.0));
        let (w2, _) = net.layer(2);
        assert!(w2.iter().all(|w| w.abs() < 0.01 / 4.0));
    }

    #[test]
    fn forward_is_pure() {
        let net = Mlp::standard(5, 2, 1.0, &mut rng_from(3, &[])).unwrap();
        let x = [0.3, -0.1, 2.0, 0.0, 0.02];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}
