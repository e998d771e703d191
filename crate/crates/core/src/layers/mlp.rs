//! Shallow multilayer perceptrons: the baseline hypothesis space and the
//! conditioner nets inside Real NVP couplings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Hidden-layer nonlinearity tag. The final layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation value itself.
    #[inline]
    pub(crate) fn deriv_from_value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Recorded forward pass: the input to each affine layer plus the output.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Fully connected net: affine layers with `activation` between them and an
/// affine output. Weights are row-major (out x in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl MlpNet {
    /// All-zero parameters.
    pub fn zeros(layer_dims: Vec<usize>) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(
                "mlp dims",
                "need at least input and output dims, all positive",
            ));
        }
        let weights = layer_dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(MlpNet {
            layer_dims,
            weights,
            biases,
            activation: Activation::Tanh,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(layer_dims: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut net = MlpNet::zeros(layer_dims)?;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let fan_in = net.layer_dims[l];
            let fan_out = net.layer_dims[l + 1];
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn in_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    fn n_affine(&self) -> usize {
        self.layer_dims.len() - 1
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn affine(&self, l: usize, a: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
        let w = &self.weights[l];
        let b = &self.biases[l];
        (0..n_out)
            .map(|i| {
                let row = &w[i * n_in..(i + 1) * n_in];
                b[i] + row.iter().zip(a).map(|(wij, aj)| wij * aj).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in 0..self.n_affine() {
            a = self.affine(l, &a);
            if l + 1 < self.n_affine() {
                for v in a.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
        }
        Ok(a)
    }

    /// Forward pass keeping the per-layer inputs the backward pass needs.
    pub fn forward_trace(&self, x: &[f64]) -> Result<MlpTrace> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.n_affine());
        let mut a = x.to_vec();
        for l in 0..self.n_affine() {
            inputs.push(a.clone());
            a = self.affine(l, &a);
            if l + 1 < self.n_affine() {
                for v in a.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
        }
        Ok(MlpTrace { inputs, output: a })
    }

    /// Reverse sweep over a recorded trace.
    /// Returns (input cotangent, flat parameter cotangent).
    pub fn backward(&self, trace: &MlpTrace, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if upstream.len() != self.out_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim(),
                got: upstream.len(),
            });
        }
        let inputs = &trace.inputs;
        let mut grads = vec![0.0; self.param_count()];
        let mut d = upstream.to_vec();

        // Offsets of each affine layer's weights in the flat layout.
        let mut offsets = Vec::with_capacity(self.n_affine());
        let mut off = 0;
        for l in 0..self.n_affine() {
            offsets.push(off);
            off += self.layer_dims[l] * self.layer_dims[l + 1] + self.layer_dims[l + 1];
        }

        for l in (0..self.n_affine()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let a = &inputs[l];
            let base = offsets[l];
            for i in 0..n_out {
                let di = d[i];
                for j in 0..n_in {
                    grads[base + i * n_in + j] = di * a[j];
                }
                grads[base + n_in * n_out + i] = di;
            }
            // d_prev = W^T d, through the activation when not at the input.
            let w = &self.weights[l];
            let mut d_prev = vec![0.0; n_in];
            for i in 0..n_out {
                let di = d[i];
                for j in 0..n_in {
                    d_prev[j] += w[i * n_in + j] * di;
                }
            }
            if l > 0 {
                for (dp, aj) in d_prev.iter_mut().zip(a) {
                    *dp *= self.activation.deriv_from_value(*aj);
                }
            }
            d = d_prev;
        }
        Ok((d, grads))
    }

    /// Reverse-mode products for an upstream cotangent on the output.
    /// Returns (input cotangent, flat parameter cotangent).
    pub fn vjp(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.forward_trace(x)?;
        self.backward(&trace, upstream)
    }

    /// Exact Jacobian of the output with respect to the input, assembled from
    /// one reverse sweep per output coordinate.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Mat> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        let mut jac = Mat::zeros(n_out, n_in);
        let mut basis = vec![0.0; n_out];
        for i in 0..n_out {
            basis[i] = 1.0;
            let (row, _) = self.vjp(x, &basis)?;
            basis[i] = 0.0;
            for j in 0..n_in {
                jac.set(i, j, row[j]);
            }
        }
        Ok(jac)
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        for l in 0..self.n_affine() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
    }

    /// Consume `self.param_count()` values from the front of `src`.
    pub fn load_params(&mut self, src: &mut &[f64]) {
        for l in 0..self.n_affine() {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&src[..nw]);
            *src = &src[nw..];
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&src[..nb]);
            *src = &src[nb..];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_maps_to_zero() {
        let net = MlpNet::zeros(vec![3, 5, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_identity_layer_is_identity() {
        let mut net = MlpNet::zeros(vec![2, 2]).unwrap();
        net.weights[0] = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(net.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = MlpNet::zeros(vec![2, 2]).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn param_roundtrip_preserves_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = MlpNet::glorot(vec![2, 7, 3], &mut rng).unwrap();
        let mut flat = Vec::new();
        net.append_params(&mut flat);
        assert_eq!(flat.len(), net.param_count());
        let mut copy = MlpNet::zeros(vec![2, 7, 3]).unwrap();
        let mut src = flat.as_slice();
        copy.load_params(&mut src);
        assert!(src.is_empty());
        assert_eq!(copy, net);
    }

    /// Parameter and input VJPs against central finite differences.
    #[test]
    fn gradcheck_against_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = MlpNet::glorot(vec![3, 8, 2], &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (dx, dp) = net.vjp(&x, &u).unwrap();

        let h = 1e-6;
        // scalar objective <u, f(x)>
        let obj = |net: &MlpNet, x: &[f64]| -> f64 {
            net.forward(x)
                .unwrap()
                .iter()
                .zip(&u)
                .map(|(a, b)| a * b)
                .sum()
        };
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (obj(&net, &xp) - obj(&net, &xm)) / (2.0 * h);
            let rel = (dx[k] - fd).abs() / fd.abs().max(1e-9);
            assert!(rel <= 1e-6, "input {k}: {} vs {}", dx[k], fd);
        }
        let mut flat = Vec::new();
        net.append_params(&mut flat);
        for k in (0..flat.len()).step_by(7) {
            let mut fp = flat.clone();
            let mut fm = flat.clone();
            fp[k] += h;
            fm[k] -= h;
            let mut np = net.clone();
            let mut nm = net.clone();
            np.load_params(&mut fp.as_slice());
            nm.load_params(&mut fm.as_slice());
            let fd = (obj(&np, &x) - obj(&nm, &x)) / (2.0 * h);
            let rel = (dp[k] - fd).abs() / fd.abs().max(1e-9);
            assert!(rel <= 1e-6, "param {k}: {} vs {}", dp[k], fd);
        }
    }

    #[test]
    fn input_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpNet::glorot(vec![2, 6, 2], &mut rng).unwrap();
        let x = [0.2, -0.4];
        let jac = net.input_jacobian(&x).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fp = net.forward(&xp).unwrap();
            let fm = net.forward(&xm).unwrap();
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((jac.get(i, j) - fd).abs() <= 1e-8, "({i},{j})");
            }
        }
    }
}
