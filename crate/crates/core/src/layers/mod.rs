//! Invertible trainable layers with exact inverses, exact Jacobians, and
//! reverse-mode products in both directions.
//!
//! Reversible models evaluate every layer twice — once forward, once through
//! its analytic inverse with the same parameters — so each layer exposes
//! `vjp` for either direction and the parameter cotangents of both uses can
//! be accumulated into one slot.

mod henon;
mod mlp;
mod realnvp;
mod sympnet;

pub use henon::HenonLayer;
pub use mlp::{Activation, MlpNet};
pub use realnvp::RealNvpLayer;
pub use sympnet::{Parity, SymMat, SympNetActivationModule, SympNetLinearModule};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Mat;

/// Which map a layer is evaluated as: itself or its analytic inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn is_forward(self) -> bool {
        matches!(self, Direction::Forward)
    }
}

/// One invertible trainable transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    RealNvp(RealNvpLayer),
    Henon(HenonLayer),
    SympLinear(SympNetLinearModule),
    SympActivation(SympNetActivationModule),
}

impl Layer {
    pub fn dim(&self) -> usize {
        match self {
            Layer::RealNvp(l) => l.dim,
            Layer::Henon(l) => l.dim(),
            Layer::SympLinear(l) => l.dim(),
            Layer::SympActivation(l) => l.dim(),
        }
    }

    pub fn apply(&self, dir: Direction, x: &[f64]) -> Result<Vec<f64>> {
        match (self, dir.is_forward()) {
            (Layer::RealNvp(l), true) => l.forward(x),
            (Layer::RealNvp(l), false) => l.inverse(x),
            (Layer::Henon(l), true) => l.forward(x),
            (Layer::Henon(l), false) => l.inverse(x),
            (Layer::SympLinear(l), true) => l.forward(x),
            (Layer::SympLinear(l), false) => l.inverse(x),
            (Layer::SympActivation(l), true) => l.forward(x),
            (Layer::SympActivation(l), false) => l.inverse(x),
        }
    }

    /// Exact reverse-mode products for the chosen direction.
    /// Returns (input cotangent, parameter cotangent in this layer's layout).
    pub fn vjp(&self, dir: Direction, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let fwd = dir.is_forward();
        match self {
            Layer::RealNvp(l) => l.vjp(fwd, x, upstream),
            Layer::Henon(l) => l.vjp(fwd, x, upstream),
            Layer::SympLinear(l) => l.vjp(fwd, x, upstream),
            Layer::SympActivation(l) => l.vjp(fwd, x, upstream),
        }
    }

    /// Exact Jacobian of the chosen direction at `x`.
    pub fn jacobian(&self, dir: Direction, x: &[f64]) -> Result<Mat> {
        let fwd = dir.is_forward();
        match self {
            Layer::RealNvp(l) => l.jacobian(fwd, x),
            Layer::Henon(l) => l.jacobian(fwd, x),
            Layer::SympLinear(l) => l.jacobian(fwd, x),
            Layer::SympActivation(l) => l.jacobian(fwd, x),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::RealNvp(l) => l.param_count(),
            Layer::Henon(l) => l.param_count(),
            Layer::SympLinear(l) => l.param_count(),
            Layer::SympActivation(l) => l.param_count(),
        }
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        match self {
            Layer::RealNvp(l) => l.append_params(out),
            Layer::Henon(l) => l.append_params(out),
            Layer::SympLinear(l) => l.append_params(out),
            Layer::SympActivation(l) => l.append_params(out),
        }
    }

    pub fn load_params(&mut self, src: &mut &[f64]) {
        match self {
            Layer::RealNvp(l) => l.load_params(src),
            Layer::Henon(l) => l.load_params(src),
            Layer::SympLinear(l) => l.load_params(src),
            Layer::SympActivation(l) => l.load_params(src),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_layers(rng: &mut ChaCha8Rng) -> Vec<Layer> {
        vec![
            Layer::RealNvp(RealNvpLayer::glorot(2, 1, false, 16, rng).unwrap()),
            Layer::RealNvp(RealNvpLayer::glorot(2, 1, true, 16, rng).unwrap()),
            Layer::Henon(HenonLayer::small_random(rng)),
            Layer::SympLinear(SympNetLinearModule::small_random(1, 8, rng)),
            Layer::SympActivation(SympNetActivationModule::small_random(1, Parity::Up, rng)),
            Layer::SympActivation(SympNetActivationModule::small_random(1, Parity::Low, rng)),
        ]
    }

    /// Every layer type x both directions against central finite differences.
    #[test]
    fn vjp_matches_finite_differences_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let layers = sample_layers(&mut rng);
        let h = 1e-6;
        for (li, layer) in layers.iter().enumerate() {
            for dir in [Direction::Forward, Direction::Inverse] {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.8..0.8)).collect();
                let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (dx, dp) = layer.vjp(dir, &x, &u).unwrap();

                let obj = |l: &Layer, x: &[f64]| -> f64 {
                    l.apply(dir, x)
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
                    let fd = (obj(layer, &xp) - obj(layer, &xm)) / (2.0 * h);
                    let err = (dx[k] - fd).abs() / fd.abs().max(1e-9);
                    assert!(err <= 1e-6, "layer {li} {dir:?} input {k}: {} vs {fd}", dx[k]);
                }

                let mut flat = Vec::new();
                layer.append_params(&mut flat);
                for k in 0..flat.len() {
                    let mut fp = flat.clone();
                    let mut fm = flat.clone();
                    fp[k] += h;
                    fm[k] -= h;
                    let mut lp = layer.clone();
                    let mut lm = layer.clone();
                    lp.load_params(&mut fp.as_slice());
                    lm.load_params(&mut fm.as_slice());
                    let fd = (obj(&lp, &x) - obj(&lm, &x)) / (2.0 * h);
                    let err = (dp[k] - fd).abs() / fd.abs().max(1e-9);
                    assert!(err <= 1e-6, "layer {li} {dir:?} param {k}: {} vs {fd}", dp[k]);
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_cotangents() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for layer in sample_layers(&mut rng) {
            for dir in [Direction::Forward, Direction::Inverse] {
                let (dx, dp) = layer.vjp(dir, &[0.3, -0.5], &[0.0, 0.0]).unwrap();
                assert!(dx.iter().chain(dp.iter()).all(|v| *v == 0.0));
            }
        }
    }

    /// inverse(forward(x)) round trip across all layer types.
    #[test]
    fn inverse_exactness_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for (li, layer) in sample_layers(&mut rng).iter().enumerate() {
            let mut worst = 0.0_f64;
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y = layer.apply(Direction::Forward, &x).unwrap();
                let back = layer.apply(Direction::Inverse, &y).unwrap();
                worst = worst.max(crate::linalg::dist(&x, &back));
            }
            assert!(worst <= 1e-12, "layer {li}: worst residual {worst}");
        }
    }

    /// Forward Jacobians of Hénon and SympNet layers satisfy M^T J M = J.
    #[test]
    fn symplectic_layer_jacobians() {
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let j = Mat::symplectic_j(2);
        let layers = vec![
            Layer::Henon(HenonLayer::small_random(&mut rng)),
            Layer::SympLinear(SympNetLinearModule::small_random(1, 8, &mut rng)),
            Layer::SympActivation(SympNetActivationModule::small_random(1, Parity::Up, &mut rng)),
        ];
        for layer in &layers {
            let mut worst = 0.0_f64;
            for _ in 0..1000 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let m = layer.jacobian(Direction::Forward, &x).unwrap();
                worst = worst.max(m.transpose().matmul(&j).matmul(&m).sub(&j).max_abs());
            }
            assert!(worst <= 1e-10, "{layer:?}: residual {worst}");
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(400);
        let h = 1e-6;
        for layer in sample_layers(&mut rng) {
            for dir in [Direction::Forward, Direction::Inverse] {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.8..0.8)).collect();
                let jac = layer.jacobian(dir, &x).unwrap();
                for j in 0..2 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let fp = layer.apply(dir, &xp).unwrap();
                    let fm = layer.apply(dir, &xm).unwrap();
                    for i in 0..2 {
                        let fd = (fp[i] - fm[i]) / (2.0 * h);
                        assert!(
                            (jac.get(i, j) - fd).abs() <= 1e-6,
                            "{layer:?} {dir:?} ({i},{j})"
                        );
                    }
                }
            }
        }
    }
}
