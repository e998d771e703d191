//! The two benchmark Hamiltonian systems.
//!
//! Hénon-Heiles: H = 1/2 (px^2 + py^2 + x^2 + y^2) + lambda (x^2 y - y^3 / 3)
//! on phase space (x, y, px, py).
//!
//! Driven pendulum: H = 1/2 p^2 - nu^2 cos(q) - lambda [0.3 p q sin(2t) + 0.7 p q sin(3t)]
//! on phase space (q, p), 2*pi-periodic in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hénon-Heiles system restricted to a fixed energy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenonHeilesSystem {
    pub lambda: f64,
    pub energy: f64,
}

impl HenonHeilesSystem {
    /// Requires a nonempty section domain {(y, py) : 2E - py^2 - y^2 + (2 lambda / 3) y^3 > 0}.
    ///
    /// For E > 0 the origin is interior; for E = 0 the cubic term must be able
    /// to dominate, which needs lambda != 0.
    pub fn new(lambda: f64, energy: f64) -> Result<Self> {
        if !lambda.is_finite() || !energy.is_finite() {
            return Err(Error::invalid("henon-heiles system", "non-finite parameter"));
        }
        if energy < 0.0 {
            return Err(Error::invalid("henon-heiles system", "energy must be >= 0"));
        }
        if energy == 0.0 && lambda == 0.0 {
            return Err(Error::invalid(
                "henon-heiles system",
                "section domain is empty for E = 0, lambda = 0",
            ));
        }
        Ok(HenonHeilesSystem { lambda, energy })
    }
}

/// Pendulum with natural frequency nu under a 2*pi-periodic drive of amplitude lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivenPendulumSystem {
    pub nu: f64,
    pub lambda: f64,
}

impl DrivenPendulumSystem {
    pub fn new(nu: f64, lambda: f64) -> Result<Self> {
        if !(nu > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("pendulum system", "requires nu > 0"));
        }
        Ok(DrivenPendulumSystem { nu, lambda })
    }
}

/// Hénon-Heiles energy at `state = (x, y, px, py)`.
pub fn hh_energy(state: &[f64], lambda: f64) -> f64 {
    let (x, y, px, py) = (state[0], state[1], state[2], state[3]);
    0.5 * (px * px + py * py + x * x + y * y) + lambda * (x * x * y - y * y * y / 3.0)
}

/// Hamiltonian vector field of the Hénon-Heiles system:
/// (x', y', px', py') = (px, py, -x - 2 lambda x y, -y - lambda (x^2 - y^2)).
pub fn hh_vector_field(state: &[f64], lambda: f64, out: &mut [f64]) {
    let (x, y, px, py) = (state[0], state[1], state[2], state[3]);
    out[0] = px;
    out[1] = py;
    out[2] = -x - 2.0 * lambda * x * y;
    out[3] = -y - lambda * (x * x - y * y);
}

/// Time-dependent pendulum Hamiltonian at `state = (q, p)`.
pub fn pendulum_energy(t: f64, state: &[f64], nu: f64, lambda: f64) -> f64 {
    let (q, p) = (state[0], state[1]);
    0.5 * p * p - nu * nu * q.cos()
        - lambda * (0.3 * p * q * (2.0 * t).sin() + 0.7 * p * q * (3.0 * t).sin())
}

/// Hamiltonian vector field of the driven pendulum:
/// q' = p - lambda q (0.3 sin 2t + 0.7 sin 3t),
/// p' = -nu^2 sin q + lambda p (0.3 sin 2t + 0.7 sin 3t).
pub fn pendulum_vector_field(t: f64, state: &[f64], nu: f64, lambda: f64, out: &mut [f64]) {
    let (q, p) = (state[0], state[1]);
    let drive = 0.3 * (2.0 * t).sin() + 0.7 * (3.0 * t).sin();
    out[0] = p - lambda * q * drive;
    out[1] = -nu * nu * q.sin() + lambda * p * drive;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hh_energy_known_values() {
        assert_eq!(hh_energy(&[0.0, 0.0, 0.0, 0.0], 1.0), 0.0);
        // 1/2 * 1 - 1/3 = 1/6
        let e = hh_energy(&[0.0, 1.0, 0.0, 0.0], 1.0);
        assert!((e - 1.0 / 6.0).abs() < 1e-15, "{e}");
        // cubic term vanishes at y = 0
        assert_eq!(hh_energy(&[1.0, 0.0, 0.0, 0.0], 7.0), 0.5);
    }

    #[test]
    fn hh_field_fixed_points() {
        let mut f = [0.0; 4];
        hh_vector_field(&[0.0, 0.0, 0.0, 0.0], 0.3, &mut f);
        assert_eq!(f, [0.0; 4]);
        // py' = -1 + lambda * 1 = 0 at lambda = 1
        hh_vector_field(&[0.0, 1.0, 0.0, 0.0], 1.0, &mut f);
        assert_eq!(f, [0.0; 4]);
    }

    /// Central finite differences of the Hamiltonian reproduce the field:
    /// q' = dH/dp, p' = -dH/dq.
    #[test]
    fn hh_field_matches_energy_gradient() {
        let lambda = 0.8;
        let z = [0.3, -0.2, 0.15, 0.4];
        let h = 1e-6;
        let grad: Vec<f64> = (0..4)
            .map(|k| {
                let mut zp = z;
                let mut zm = z;
                zp[k] += h;
                zm[k] -= h;
                (hh_energy(&zp, lambda) - hh_energy(&zm, lambda)) / (2.0 * h)
            })
            .collect();
        let expected = [grad[2], grad[3], -grad[0], -grad[1]];
        let mut f = [0.0; 4];
        hh_vector_field(&z, lambda, &mut f);
        for k in 0..4 {
            let rel = (f[k] - expected[k]).abs() / expected[k].abs().max(1e-9);
            assert!(rel <= 1e-6, "component {k}: {} vs {}", f[k], expected[k]);
        }
    }

    #[test]
    fn pendulum_field_fixed_point_and_autonomous_limit() {
        let mut f = [0.0; 2];
        pendulum_vector_field(1.7, &[0.0, 0.0], 0.5, 0.1, &mut f);
        assert_eq!(f, [0.0; 2]);

        pendulum_vector_field(0.9, &[0.4, -0.7], 1.3, 0.0, &mut f);
        assert_eq!(f[0], -0.7);
        assert!((f[1] - (-1.3 * 1.3 * 0.4_f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn pendulum_field_matches_energy_gradient() {
        let (nu, lambda, t) = (0.5, 0.1, 2.3);
        let z = [0.7, -0.4];
        let h = 1e-6;
        let dq = (pendulum_energy(t, &[z[0] + h, z[1]], nu, lambda)
            - pendulum_energy(t, &[z[0] - h, z[1]], nu, lambda))
            / (2.0 * h);
        let dp = (pendulum_energy(t, &[z[0], z[1] + h], nu, lambda)
            - pendulum_energy(t, &[z[0], z[1] - h], nu, lambda))
            / (2.0 * h);
        let mut f = [0.0; 2];
        pendulum_vector_field(t, &z, nu, lambda, &mut f);
        assert!((f[0] - dp).abs() / dp.abs().max(1e-9) <= 1e-6);
        assert!((f[1] + dq).abs() / dq.abs().max(1e-9) <= 1e-6);
    }

    #[test]
    fn system_constructors_validate() {
        assert!(HenonHeilesSystem::new(1.0, 1.0 / 8.0).is_ok());
        assert!(HenonHeilesSystem::new(0.0, 0.0).is_err());
        assert!(HenonHeilesSystem::new(1.0, -0.1).is_err());
        assert!(DrivenPendulumSystem::new(0.5, 0.1).is_ok());
        assert!(DrivenPendulumSystem::new(0.0, 0.1).is_err());
    }
}
