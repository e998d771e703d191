//! Fixed-step classical Runge-Kutta integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings for ground-truth map evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Base RK4 step size.
    pub step: f64,
    /// Target |x| at a refined section crossing.
    pub refine_tol: f64,
    /// Cap on integration time per map evaluation.
    pub max_time: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-3,
            refine_tol: 1e-10,
            max_time: 1000.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.refine_tol > 0.0) || !(self.max_time > 0.0) {
            return Err(Error::invalid(
                "integrator config",
                "step, refine_tol and max_time must all be > 0",
            ));
        }
        Ok(())
    }
}

/// A sampled flow segment: `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("orbit holds at least one state")
    }
}

/// One classical RK4 step of size `dt` from `(t, y)`, writing the result into `out`.
pub fn rk4_step<F>(field: &F, t: f64, y: &[f64], dt: f64, out: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    field(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    field(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    field(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    field(t + dt, &tmp, &mut k4);
    for i in 0..n {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate `field` from `t0` to `t1` with fixed step `cfg.step`, shortening
/// the final step to land exactly on `t1`. All intermediate states are kept.
pub fn integrate<F>(field: &F, x0: &[f64], t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Orbit>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(Error::invalid("time span", "requires t1 > t0"));
    }

    let n = x0.len();
    let mut times = vec![t0];
    let mut states = vec![x0.to_vec()];
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut next = vec![0.0; n];

    while t < t1 {
        let dt = cfg.step.min(t1 - t);
        rk4_step(field, t, &y, dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t });
        }
        // Snap to t1 to avoid a spurious sub-epsilon trailing step.
        t = if t1 - t <= cfg.step { t1 } else { t + dt };
        y.copy_from_slice(&next);
        times.push(t);
        states.push(y.clone());
    }

    Ok(Orbit { times, states })
}
