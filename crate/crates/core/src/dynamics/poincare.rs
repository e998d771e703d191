//! Ground-truth section maps: the Hénon-Heiles first-return map on the
//! x = 0, px > 0 section, and the time-2*pi stroboscopic map of the driven
//! pendulum.

use crate::dynamics::integrate::{rk4_step, IntegratorConfig};
use crate::dynamics::systems::{
    hh_vector_field, pendulum_vector_field, DrivenPendulumSystem, HenonHeilesSystem,
};
use crate::error::{Error, Result};

/// A discrete-time evolution map in section coordinates, together with the
/// momentum reflection that reverses it.
pub trait ReturnMap {
    fn dim(&self) -> usize;
    fn name(&self) -> &'static str;
    fn apply(&self, point: &[f64]) -> Result<Vec<f64>>;
    /// The reversing involution in section coordinates (negates the momentum).
    fn reversal(&self, point: &[f64]) -> Vec<f64>;
    fn config(&self) -> &IntegratorConfig;
    /// Named scalar parameters, for dataset metadata.
    fn params(&self) -> Vec<(&'static str, f64)>;
}

/// Recover px > 0 on the section from (y, py): the unique positive root of
/// H(0, y, px, py) = E, i.e. px = sqrt(2E - py^2 - y^2 + (2 lambda / 3) y^3).
pub fn reconstruct_px(y: f64, py: f64, system: &HenonHeilesSystem) -> Result<f64> {
    let disc =
        2.0 * system.energy - py * py - y * y + 2.0 * system.lambda / 3.0 * y * y * y;
    if disc <= 0.0 {
        return Err(Error::OutsideEnergyShell { discriminant: disc });
    }
    Ok(disc.sqrt())
}

/// First return of the Hénon-Heiles flow to the x = 0, px > 0 section.
///
/// Lifts (y, py) to the energy shell, marches fixed-step RK4 while watching
/// for an ascending x sign change, then bisects the bracketing step down to
/// |x| <= refine_tol. Detection starts after the first full step so the
/// departure point itself is never reported as a return.
pub fn hh_poincare_map(
    point: &[f64],
    system: &HenonHeilesSystem,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (y0, py0) = (point[0], point[1]);
    let px0 = reconstruct_px(y0, py0, system)?;
    let lambda = system.lambda;
    let field = move |_t: f64, s: &[f64], out: &mut [f64]| hh_vector_field(s, lambda, out);

    let mut t = 0.0;
    let mut state = vec![0.0, y0, px0, py0];
    let mut next = vec![0.0; 4];

    while t < cfg.max_time {
        let dt = cfg.step.min(cfg.max_time - t);
        rk4_step(&field, t, &state, dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t });
        }
        if t >= cfg.step && state[0] < 0.0 && next[0] >= 0.0 {
            if let Some(crossing) = refine_crossing(&field, t, &state, dt, cfg) {
                return Ok(vec![crossing[1], crossing[3]]);
            }
            // Tangential grazing; keep marching.
        }
        state.copy_from_slice(&next);
        t += dt;
    }
    Err(Error::NoReturn { t_max: cfg.max_time })
}

/// Bisect the sub-step from `anchor` (where x < 0) until |x| <= refine_tol,
/// re-integrating the shrunken interval with a single RK4 step each trial.
/// Returns None if the crossing has px <= 0.
fn refine_crossing<F>(
    field: &F,
    t_anchor: f64,
    anchor: &[f64],
    dt: f64,
    cfg: &IntegratorConfig,
) -> Option<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut lo = 0.0_f64;
    let mut hi = dt;
    let mut trial = vec![0.0; anchor.len()];
    let mut best: Option<Vec<f64>> = None;

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        rk4_step(field, t_anchor, anchor, mid, &mut trial);
        if trial[0].abs() <= cfg.refine_tol {
            best = Some(trial.clone());
            break;
        }
        if trial[0] < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * dt {
            best = Some(trial.clone());
            break;
        }
    }
    let state = best?;
    if state[2] > 0.0 {
        Some(state)
    } else {
        None
    }
}

/// Flow the driven pendulum from t = 0 to t = 2*pi and return the final (q, p).
pub fn pendulum_stroboscopic_map(
    point: &[f64],
    system: &DrivenPendulumSystem,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (nu, lambda) = (system.nu, system.lambda);
    let field =
        move |t: f64, s: &[f64], out: &mut [f64]| pendulum_vector_field(t, s, nu, lambda, out);

    let t1 = 2.0 * std::f64::consts::PI;
    let mut t = 0.0;
    let mut state = point.to_vec();
    let mut next = vec![0.0; 2];
    while t < t1 {
        let dt = cfg.step.min(t1 - t);
        rk4_step(&field, t, &state, dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t });
        }
        t = if t1 - t <= cfg.step { t1 } else { t + dt };
        state.copy_from_slice(&next);
    }
    Ok(state)
}

/// Hénon-Heiles return map bundled with its integration settings.
#[derive(Debug, Clone)]
pub struct HenonHeilesMap {
    pub system: HenonHeilesSystem,
    pub cfg: IntegratorConfig,
}

impl ReturnMap for HenonHeilesMap {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "henon-heiles"
    }

    fn apply(&self, point: &[f64]) -> Result<Vec<f64>> {
        hh_poincare_map(point, &self.system, &self.cfg)
    }

    fn reversal(&self, point: &[f64]) -> Vec<f64> {
        vec![point[0], -point[1]]
    }

    fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("lambda", self.system.lambda), ("energy", self.system.energy)]
    }
}

/// Driven-pendulum stroboscopic map bundled with its integration settings.
#[derive(Debug, Clone)]
pub struct PendulumMap {
    pub system: DrivenPendulumSystem,
    pub cfg: IntegratorConfig,
}

impl ReturnMap for PendulumMap {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn apply(&self, point: &[f64]) -> Result<Vec<f64>> {
        pendulum_stroboscopic_map(point, &self.system, &self.cfg)
    }

    fn reversal(&self, point: &[f64]) -> Vec<f64> {
        vec![point[0], -point[1]]
    }

    fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("nu", self.system.nu), ("lambda", self.system.lambda)]
    }
}
