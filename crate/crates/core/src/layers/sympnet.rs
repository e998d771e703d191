//! SympNet building blocks: unit-triangular linear modules and shear
//! activation modules. Every sublayer is a symplectic shear, so arbitrary
//! stacks stay symplectic at any parameter values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::mlp::Activation;
use crate::linalg::Mat;

/// Symmetric n x n matrix stored as its upper triangle (row-major, diagonal included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    pub n: usize,
    pub upper: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        r * self.n - r * (r + 1) / 2 + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.idx(i, j)]
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Accumulate the stored-triangle cotangent of `w = S v` given the
    /// cotangent `u` on w: dL/dupper(i,j) = u_i v_j + u_j v_i (i < j), u_i v_i on
    /// the diagonal.
    fn accumulate_grad(&self, u: &[f64], v: &[f64], sign: f64, out: &mut [f64]) {
        for i in 0..self.n {
            for j in i..self.n {
                let g = if i == j {
                    u[i] * v[i]
                } else {
                    u[i] * v[j] + u[j] * v[i]
                };
                out[self.idx(i, j)] += sign * g;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.upper.len()
    }
}

/// Which phase-space half a shear writes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Up,
    Low,
}

/// Linear symplectic module: alternating unit-triangular sublayers
/// (p, q) -> (p + S_k q, q) for even k and (p, q) -> (p, q + S_k p) for odd k,
/// followed by a bias shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SympNetLinearModule {
    pub dim_half: usize,
    pub sublayers: Vec<SymMat>,
    pub bias: Vec<f64>,
}

impl SympNetLinearModule {
    pub fn zeros(dim_half: usize, n_sublayers: usize) -> Self {
        SympNetLinearModule {
            dim_half,
            sublayers: (0..n_sublayers).map(|_| SymMat::zeros(dim_half)).collect(),
            bias: vec![0.0; 2 * dim_half],
        }
    }

    /// Entries drawn uniformly from [-0.01, 0.01], zero bias.
    pub fn small_random<R: Rng>(dim_half: usize, n_sublayers: usize, rng: &mut R) -> Self {
        let mut m = SympNetLinearModule::zeros(dim_half, n_sublayers);
        for s in m.sublayers.iter_mut() {
            for v in s.upper.iter_mut() {
                *v = rng.gen_range(-0.01..0.01);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        2 * self.dim_half
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn sublayer_parity(k: usize) -> Parity {
        if k % 2 == 0 {
            Parity::Up
        } else {
            Parity::Low
        }
    }

    fn apply_sublayer(&self, k: usize, z: &mut [f64], sign: f64) {
        let n = self.dim_half;
        let s = &self.sublayers[k];
        let (p, q) = z.split_at_mut(n);
        // Shears write one block from the other, so no temporary is needed.
        match Self::sublayer_parity(k) {
            Parity::Up => {
                for i in 0..n {
                    let dot: f64 = (0..n).map(|j| s.get(i, j) * q[j]).sum();
                    p[i] += sign * dot;
                }
            }
            Parity::Low => {
                for i in 0..n {
                    let dot: f64 = (0..n).map(|j| s.get(i, j) * p[j]).sum();
                    q[i] += sign * dot;
                }
            }
        }
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let mut z = z.to_vec();
        for k in 0..self.sublayers.len() {
            self.apply_sublayer(k, &mut z, 1.0);
        }
        for (v, b) in z.iter_mut().zip(&self.bias) {
            *v += b;
        }
        Ok(z)
    }

    pub fn inverse(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        let mut z = w.to_vec();
        for (v, b) in z.iter_mut().zip(&self.bias) {
            *v -= b;
        }
        for k in (0..self.sublayers.len()).rev() {
            self.apply_sublayer(k, &mut z, -1.0);
        }
        Ok(z)
    }

    pub fn vjp(&self, forward: bool, z: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(z)?;
        self.check(upstream)?;
        let n = self.dim_half;
        let n_sub = self.sublayers.len();

        // Replay the pass caching the input to every sublayer.
        let mut stages = Vec::with_capacity(n_sub);
        let mut cur = z.to_vec();
        if forward {
            for k in 0..n_sub {
                stages.push(cur.clone());
                self.apply_sublayer(k, &mut cur, 1.0);
            }
        } else {
            for (v, b) in cur.iter_mut().zip(&self.bias) {
                *v -= b;
            }
            for k in (0..n_sub).rev() {
                stages.push(cur.clone());
                self.apply_sublayer(k, &mut cur, -1.0);
            }
        }

        let mut grads = vec![0.0; self.param_count()];
        let sub_offsets: Vec<usize> = self
            .sublayers
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s.param_count();
                Some(o)
            })
            .collect();
        let bias_offset = self.param_count() - 2 * n;

        let mut cot = upstream.to_vec();
        if forward {
            // Bias applied last: its cotangent is the raw upstream.
            for i in 0..2 * n {
                grads[bias_offset + i] = cot[i];
            }
            for k in (0..n_sub).rev() {
                let stage = &stages[k];
                self.backprop_sublayer(k, stage, &mut cot, 1.0, &mut grads[sub_offsets[k]..]);
            }
        } else {
            // The inverse pass applied sublayers n_sub-1 .. 0, so backward
            // visits them in ascending order; stages[i] fed sublayer n_sub-1-i.
            for k in 0..n_sub {
                let stage = &stages[n_sub - 1 - k];
                self.backprop_sublayer(k, stage, &mut cot, -1.0, &mut grads[sub_offsets[k]..]);
            }
            for i in 0..2 * n {
                grads[bias_offset + i] = -cot[i];
            }
        }
        Ok((cot, grads))
    }

    /// Backward through one shear `target += sign * S_k source`, updating `cot`
    /// in place and accumulating the S_k gradient into `grad_slice`.
    fn backprop_sublayer(
        &self,
        k: usize,
        stage_input: &[f64],
        cot: &mut [f64],
        sign: f64,
        grad_slice: &mut [f64],
    ) {
        let n = self.dim_half;
        let s = &self.sublayers[k];
        let (cp, cq) = cot.split_at_mut(n);
        match Self::sublayer_parity(k) {
            Parity::Up => {
                for i in 0..n {
                    let dot: f64 = (0..n).map(|j| s.get(i, j) * cp[j]).sum();
                    cq[i] += sign * dot;
                }
                s.accumulate_grad(cp, &stage_input[n..], sign, grad_slice);
            }
            Parity::Low => {
                for i in 0..n {
                    let dot: f64 = (0..n).map(|j| s.get(i, j) * cq[j]).sum();
                    cp[i] += sign * dot;
                }
                s.accumulate_grad(cq, &stage_input[..n], sign, grad_slice);
            }
        }
    }

    pub fn jacobian(&self, forward: bool, _z: &[f64]) -> Result<Mat> {
        let n = self.dim_half;
        let d = 2 * n;
        let mut total = Mat::identity(d);
        let order: Vec<usize> = if forward {
            (0..self.sublayers.len()).collect()
        } else {
            (0..self.sublayers.len()).rev().collect()
        };
        let sign = if forward { 1.0 } else { -1.0 };
        for k in order {
            let mut factor = Mat::identity(d);
            match Self::sublayer_parity(k) {
                Parity::Up => {
                    for i in 0..n {
                        for j in 0..n {
                            factor.set(i, n + j, sign * self.sublayers[k].get(i, j));
                        }
                    }
                }
                Parity::Low => {
                    for i in 0..n {
                        for j in 0..n {
                            factor.set(n + i, j, sign * self.sublayers[k].get(i, j));
                        }
                    }
                }
            }
            total = factor.matmul(&total);
        }
        Ok(total)
    }

    pub fn param_count(&self) -> usize {
        self.sublayers
            .iter()
            .map(SymMat::param_count)
            .sum::<usize>()
            + self.bias.len()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        for s in &self.sublayers {
            out.extend_from_slice(&s.upper);
        }
        out.extend_from_slice(&self.bias);
    }

    pub fn load_params(&mut self, src: &mut &[f64]) {
        for s in self.sublayers.iter_mut() {
            let n = s.upper.len();
            s.upper.copy_from_slice(&src[..n]);
            *src = &src[n..];
        }
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[..nb]);
        *src = &src[nb..];
    }
}

/// Shear activation module: (p, q) -> (p + scale . sigma(q), q) for `Up`
/// parity, the mirrored shear for `Low`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SympNetActivationModule {
    pub dim_half: usize,
    pub scale: Vec<f64>,
    pub parity: Parity,
    pub activation: Activation,
}

impl SympNetActivationModule {
    pub fn zeros(dim_half: usize, parity: Parity) -> Self {
        SympNetActivationModule {
            dim_half,
            scale: vec![0.0; dim_half],
            parity,
            activation: Activation::Tanh,
        }
    }

    /// Scales drawn uniformly from [-0.01, 0.01].
    pub fn small_random<R: Rng>(dim_half: usize, parity: Parity, rng: &mut R) -> Self {
        let mut m = SympNetActivationModule::zeros(dim_half, parity);
        for v in m.scale.iter_mut() {
            *v = rng.gen_range(-0.01..0.01);
        }
        m
    }

    pub fn dim(&self) -> usize {
        2 * self.dim_half
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// (source range, target range) of the shear.
    fn ranges(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let n = self.dim_half;
        match self.parity {
            Parity::Up => (n..2 * n, 0..n),
            Parity::Low => (0..n, n..2 * n),
        }
    }

    fn shear(&self, z: &[f64], sign: f64) -> Vec<f64> {
        let (src, dst) = self.ranges();
        let mut out = z.to_vec();
        for (k, (i, j)) in dst.zip(src).enumerate() {
            out[i] += sign * self.scale[k] * self.activation.apply(z[j]);
        }
        out
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(self.shear(z, 1.0))
    }

    pub fn inverse(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        // The source block is untouched, so subtracting the same shear is exact.
        Ok(self.shear(w, -1.0))
    }

    pub fn vjp(&self, forward: bool, z: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(z)?;
        self.check(upstream)?;
        let sign = if forward { 1.0 } else { -1.0 };
        let (src, dst) = self.ranges();
        let mut cot = upstream.to_vec();
        let mut grads = vec![0.0; self.dim_half];
        for (k, (i, j)) in dst.zip(src).enumerate() {
            let a = self.activation.apply(z[j]);
            grads[k] = sign * upstream[i] * a;
            cot[j] += sign * self.scale[k] * self.activation.deriv_from_value(a) * upstream[i];
        }
        Ok((cot, grads))
    }

    pub fn jacobian(&self, forward: bool, z: &[f64]) -> Result<Mat> {
        self.check(z)?;
        let sign = if forward { 1.0 } else { -1.0 };
        let (src, dst) = self.ranges();
        let mut jac = Mat::identity(self.dim());
        for (k, (i, j)) in dst.zip(src).enumerate() {
            let a = self.activation.apply(z[j]);
            jac.set(i, j, sign * self.scale[k] * self.activation.deriv_from_value(a));
        }
        Ok(jac)
    }

    pub fn param_count(&self) -> usize {
        self.dim_half
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.scale);
    }

    pub fn load_params(&mut self, src: &mut &[f64]) {
        let n = self.scale.len();
        self.scale.copy_from_slice(&src[..n]);
        *src = &src[n..];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_module_is_identity() {
        let m = SympNetLinearModule::zeros(1, 4);
        let z = vec![0.4, -0.2];
        assert_eq!(m.forward(&z).unwrap(), z);
        let a = SympNetActivationModule::zeros(1, Parity::Up);
        assert_eq!(a.forward(&z).unwrap(), z);
    }

    #[test]
    fn single_up_sublayer_hand_value() {
        let mut m = SympNetLinearModule::zeros(1, 1);
        m.sublayers[0].upper[0] = 2.0;
        assert_eq!(m.forward(&[1.0, 1.0]).unwrap(), vec![3.0, 1.0]);
    }

    #[test]
    fn linear_module_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut m = SympNetLinearModule::small_random(1, 8, &mut rng);
        m.bias = vec![0.3, -0.2];
        let mut worst = 0.0_f64;
        for _ in 0..10_000 {
            let z = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let back = m.inverse(&m.forward(&z).unwrap()).unwrap();
            worst = worst.max(crate::linalg::dist(&z, &back));
        }
        assert!(worst <= 1e-12, "worst {worst}");
    }

    #[test]
    fn activation_module_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for parity in [Parity::Up, Parity::Low] {
            let m = SympNetActivationModule::small_random(1, parity, &mut rng);
            for _ in 0..1000 {
                let z = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let back = m.inverse(&m.forward(&z).unwrap()).unwrap();
                let err = crate::linalg::dist(&z, &back);
                assert!(err <= 1e-15, "{err}");
            }
        }
    }

    #[test]
    fn module_jacobians_are_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let j = Mat::symplectic_j(2);
        let lin = SympNetLinearModule::small_random(1, 8, &mut rng);
        let act = SympNetActivationModule::small_random(1, Parity::Low, &mut rng);
        for _ in 0..100 {
            let z = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            for m in [lin.jacobian(true, &z).unwrap(), act.jacobian(true, &z).unwrap()] {
                let res = m.transpose().matmul(&j).matmul(&m).sub(&j).max_abs();
                assert!(res <= 1e-12, "residual {res}");
            }
        }
    }
}
