//! Polynomial Hénon layers: symplectic by construction.
//!
//! The map is (x, y) -> (y, -x + V'(y)) with quartic potential
//! V(y) = a1 y + a2 y^2 + a3 y^3 + a4 y^4. Its Jacobian has unit determinant
//! at every point and the inverse is the closed form (x̄, ȳ) -> (V'(x̄) - ȳ, x̄).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenonLayer {
    /// Half dimension n; the experiments use n = 1 and only that case is evaluated.
    pub dim_half: usize,
    /// Potential coefficients (a1, a2, a3, a4).
    pub coeffs: [f64; 4],
}

impl HenonLayer {
    pub fn new(coeffs: [f64; 4]) -> Self {
        HenonLayer { dim_half: 1, coeffs }
    }

    /// Coefficients drawn uniformly from [-0.002, 0.002]. Deep quartic stacks
    /// amplify iterates fast; this scale keeps 25-layer compositions tame on
    /// phase-space boxes up to |z| ~ pi, so the structural identities hold to
    /// float precision from the first epoch.
    pub fn small_random<R: Rng>(rng: &mut R) -> Self {
        let mut coeffs = [0.0; 4];
        for c in coeffs.iter_mut() {
            *c = rng.gen_range(-0.002..0.002);
        }
        HenonLayer::new(coeffs)
    }

    pub fn dim(&self) -> usize {
        2 * self.dim_half
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if self.dim_half != 1 {
            return Err(Error::invalid(
                "henon layer",
                "only dim_half = 1 is supported",
            ));
        }
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// V'(y) = a1 + 2 a2 y + 3 a3 y^2 + 4 a4 y^3.
    #[inline]
    pub fn v_prime(&self, y: f64) -> f64 {
        let [a1, a2, a3, a4] = self.coeffs;
        a1 + y * (2.0 * a2 + y * (3.0 * a3 + y * 4.0 * a4))
    }

    /// V''(y) = 2 a2 + 6 a3 y + 12 a4 y^2.
    #[inline]
    fn v_second(&self, y: f64) -> f64 {
        let [_, a2, a3, a4] = self.coeffs;
        2.0 * a2 + y * (6.0 * a3 + y * 12.0 * a4)
    }

    /// dV'/da_k at y, for k = 1..4.
    #[inline]
    fn v_prime_coeff_grad(&self, y: f64) -> [f64; 4] {
        [1.0, 2.0 * y, 3.0 * y * y, 4.0 * y * y * y]
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let (x, y) = (z[0], z[1]);
        Ok(vec![y, -x + self.v_prime(y)])
    }

    pub fn inverse(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        let (xb, yb) = (w[0], w[1]);
        Ok(vec![self.v_prime(xb) - yb, xb])
    }

    pub fn vjp(&self, forward: bool, z: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(z)?;
        self.check(upstream)?;
        let (u1, u2) = (upstream[0], upstream[1]);
        if forward {
            let y = z[1];
            let dv = self.v_prime_coeff_grad(y);
            let input = vec![-u2, u1 + u2 * self.v_second(y)];
            let params = dv.iter().map(|g| u2 * g).collect();
            Ok((input, params))
        } else {
            let xb = z[0];
            let dv = self.v_prime_coeff_grad(xb);
            let input = vec![u1 * self.v_second(xb) + u2, -u1];
            let params = dv.iter().map(|g| u1 * g).collect();
            Ok((input, params))
        }
    }

    pub fn jacobian(&self, forward: bool, z: &[f64]) -> Result<Mat> {
        self.check(z)?;
        let m = if forward {
            [[0.0, 1.0], [-1.0, self.v_second(z[1])]]
        } else {
            [[self.v_second(z[0]), -1.0], [1.0, 0.0]]
        };
        Ok(Mat::from_rows(&[m[0].to_vec(), m[1].to_vec()]))
    }

    pub fn param_count(&self) -> usize {
        4
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.coeffs);
    }

    pub fn load_params(&mut self, src: &mut &[f64]) {
        self.coeffs.copy_from_slice(&src[..4]);
        *src = &src[4..];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_potential_is_quarter_turn() {
        let layer = HenonLayer::new([0.0; 4]);
        assert_eq!(layer.forward(&[1.0, 2.0]).unwrap(), vec![2.0, -1.0]);
        assert_eq!(layer.inverse(&[1.0, 2.0]).unwrap(), vec![-2.0, 1.0]);
        // Fourth iterate is the identity.
        let mut z = vec![0.3, -0.9];
        for _ in 0..4 {
            z = layer.forward(&z).unwrap();
        }
        let err = crate::linalg::dist(&z, &[0.3, -0.9]);
        assert!(err <= 1e-14, "{err}");
    }

    #[test]
    fn quadratic_potential_known_value() {
        // V(y) = y^2, V'(y) = 2y: (1, 2) -> (2, -1 + 4) = (2, 3).
        let layer = HenonLayer::new([0.0, 1.0, 0.0, 0.0]);
        assert_eq!(layer.forward(&[1.0, 2.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn round_trip_over_random_coeffs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut worst = 0.0_f64;
        for _ in 0..10_000 {
            let mut coeffs = [0.0; 4];
            for c in coeffs.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            let layer = HenonLayer::new(coeffs);
            let z = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let back = layer.inverse(&layer.forward(&z).unwrap()).unwrap();
            worst = worst.max(crate::linalg::dist(&z, &back));
        }
        assert!(worst <= 1e-13, "worst residual {worst}");
    }

    #[test]
    fn unit_jacobian_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let layer = HenonLayer::small_random(&mut rng);
            let z = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let j = layer.jacobian(true, &z).unwrap();
            let det = j.get(0, 0) * j.get(1, 1) - j.get(0, 1) * j.get(1, 0);
            assert!((det - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn inverse_of_forward_is_exact_on_same_path() {
        let layer = HenonLayer::new([0.3, -0.7, 0.2, 0.05]);
        let z = vec![0.21, -0.9];
        let w = layer.forward(&z).unwrap();
        let back = layer.inverse(&w).unwrap();
        // x̄ = y exactly, and V'(y) is recomputed bit-identically.
        assert_eq!(back[1], z[1]);
        assert!((back[0] - z[0]).abs() <= 1e-15);
    }
}
