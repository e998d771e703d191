//! Real NVP affine coupling layers.
//!
//! One block of coordinates passes through unchanged; the other is scaled by
//! exp(s(passive)) and shifted by t(passive). Both directions are exact:
//! the inverse divides by the same scale and subtracts the same shift.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::mlp::MlpNet;
use crate::linalg::Mat;

/// Affine coupling: `y_passive = x_passive`,
/// `y_active = x_active * exp(s(x_passive)) + t(x_passive)`.
///
/// `mask_parity` selects the passive block: `false` takes the first `split`
/// coordinates, `true` the last `split`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealNvpLayer {
    pub dim: usize,
    pub split: usize,
    pub mask_parity: bool,
    pub s_net: MlpNet,
    pub t_net: MlpNet,
}

impl RealNvpLayer {
    pub fn new(
        dim: usize,
        split: usize,
        mask_parity: bool,
        s_net: MlpNet,
        t_net: MlpNet,
    ) -> Result<Self> {
        if split == 0 || split >= dim {
            return Err(Error::invalid("realnvp split", "requires 0 < split < dim"));
        }
        for (name, net) in [("s_net", &s_net), ("t_net", &t_net)] {
            if net.in_dim() != split || net.out_dim() != dim - split {
                return Err(Error::invalid(
                    "realnvp nets",
                    format!(
                        "{name} must map {} -> {}, got {} -> {}",
                        split,
                        dim - split,
                        net.in_dim(),
                        net.out_dim()
                    ),
                ));
            }
        }
        Ok(RealNvpLayer {
            dim,
            split,
            mask_parity,
            s_net,
            t_net,
        })
    }

    /// Glorot-initialized conditioner nets with one hidden layer of `hidden` units.
    pub fn glorot<R: Rng>(
        dim: usize,
        split: usize,
        mask_parity: bool,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let s_net = MlpNet::glorot(vec![split, hidden, dim - split], rng)?;
        let t_net = MlpNet::glorot(vec![split, hidden, dim - split], rng)?;
        RealNvpLayer::new(dim, split, mask_parity, s_net, t_net)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Index ranges (passive, active) under the current mask.
    fn blocks(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        if self.mask_parity {
            (self.dim - self.split..self.dim, 0..self.dim - self.split)
        } else {
            (0..self.split, self.split..self.dim)
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let (pr, ar) = self.blocks();
        let xp = &x[pr.clone()];
        let s = self.s_net.forward(xp)?;
        let t = self.t_net.forward(xp)?;
        let mut y = x.to_vec();
        for (k, i) in ar.enumerate() {
            y[i] = x[i] * s[k].exp() + t[k];
        }
        Ok(y)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let (pr, ar) = self.blocks();
        let yp = &y[pr.clone()];
        let s = self.s_net.forward(yp)?;
        let t = self.t_net.forward(yp)?;
        let mut x = y.to_vec();
        for (k, i) in ar.enumerate() {
            x[i] = (y[i] - t[k]) * (-s[k]).exp();
        }
        Ok(x)
    }

    /// Log of the forward Jacobian determinant: the sum of the s outputs.
    pub fn log_det_forward(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let (pr, _) = self.blocks();
        Ok(self.s_net.forward(&x[pr])?.iter().sum())
    }

    /// Reverse-mode products in the chosen direction; parameter cotangents are
    /// laid out as s_net params then t_net params.
    pub fn vjp(&self, forward: bool, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(x)?;
        self.check(upstream)?;
        let (pr, ar) = self.blocks();
        let xp = &x[pr.clone()];
        let s_trace = self.s_net.forward_trace(xp)?;
        let t_trace = self.t_net.forward_trace(xp)?;
        let s = &s_trace.output;
        let t = &t_trace.output;
        let m = self.dim - self.split;

        // Cotangents flowing into the two conditioner nets.
        let mut s_up = vec![0.0; m];
        let mut t_up = vec![0.0; m];
        let mut input_cot = vec![0.0; self.dim];

        if forward {
            for (k, i) in ar.clone().enumerate() {
                let es = s[k].exp();
                input_cot[i] = upstream[i] * es;
                s_up[k] = upstream[i] * x[i] * es;
                t_up[k] = upstream[i];
            }
        } else {
            for (k, i) in ar.clone().enumerate() {
                let ems = (-s[k]).exp();
                let xa = (x[i] - t[k]) * ems; // recovered active block
                input_cot[i] = upstream[i] * ems;
                s_up[k] = -upstream[i] * xa;
                t_up[k] = -upstream[i] * ems;
            }
        }

        let (s_in, s_par) = self.s_net.backward(&s_trace, &s_up)?;
        let (t_in, t_par) = self.t_net.backward(&t_trace, &t_up)?;
        for (k, i) in pr.enumerate() {
            input_cot[i] = upstream[i] + s_in[k] + t_in[k];
        }

        let mut params = s_par;
        params.extend_from_slice(&t_par);
        Ok((input_cot, params))
    }

    /// Exact Jacobian in the chosen direction.
    pub fn jacobian(&self, forward: bool, x: &[f64]) -> Result<Mat> {
        self.check(x)?;
        let (pr, ar) = self.blocks();
        let xp = &x[pr.clone()];
        let s = self.s_net.forward(xp)?;
        let t = self.t_net.forward(xp)?;
        let js = self.s_net.input_jacobian(xp)?;
        let jt = self.t_net.input_jacobian(xp)?;

        let mut jac = Mat::zeros(self.dim, self.dim);
        for i in pr.clone() {
            jac.set(i, i, 1.0);
        }
        for (k, i) in ar.enumerate() {
            if forward {
                let es = s[k].exp();
                jac.set(i, i, es);
                for (c, j) in pr.clone().enumerate() {
                    jac.set(i, j, x[i] * es * js.get(k, c) + jt.get(k, c));
                }
            } else {
                let ems = (-s[k]).exp();
                let xa = (x[i] - t[k]) * ems;
                jac.set(i, i, ems);
                for (c, j) in pr.clone().enumerate() {
                    jac.set(i, j, -xa * js.get(k, c) - ems * jt.get(k, c));
                }
            }
        }
        Ok(jac)
    }

    pub fn param_count(&self) -> usize {
        self.s_net.param_count() + self.t_net.param_count()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        self.s_net.append_params(out);
        self.t_net.append_params(out);
    }

    pub fn load_params(&mut self, src: &mut &[f64]) {
        self.s_net.load_params(src);
        self.t_net.load_params(src);
    }
}
