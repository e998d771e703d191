//! Iterating learned and ground-truth maps: Poincaré plot data, prediction
//! error curves, and model comparison summaries.

use crate::dynamics::Dataset;
use crate::error::{Error, Result};
use crate::region::Region;
use crate::reversible::{Involution, Model, ModelKind};
use crate::training;

/// One iterated trajectory in section coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOrbit {
    pub points: Vec<Vec<f64>>,
    /// True when iteration stopped early (left the box or the map errored).
    pub truncated: bool,
}

/// Per-seed orbits, in seed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrbitCloud {
    pub orbits: Vec<EvalOrbit>,
}

impl OrbitCloud {
    /// Fraction of requested iterations that stayed inside the box.
    pub fn in_box_fraction(&self, n_iter: usize) -> f64 {
        if self.orbits.is_empty() || n_iter == 0 {
            return 1.0;
        }
        let kept: usize = self.orbits.iter().map(|o| o.points.len() - 1).sum();
        kept as f64 / (self.orbits.len() * n_iter) as f64
    }
}

/// Mean Euclidean prediction error per iteration; entry 0 is exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub mean_error: Vec<f64>,
}

/// Apply `map` up to `n` times from `x0`, truncating when an iterate leaves
/// `bounds` or the map errors (escape). Truncation is a flagged outcome, not
/// an error.
pub fn iterate<F>(map: F, x0: &[f64], n: usize, bounds: &Region) -> EvalOrbit
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut points = vec![x0.to_vec()];
    let mut truncated = false;
    for _ in 0..n {
        match map(points.last().unwrap()) {
            Ok(next) if bounds.contains(&next) => points.push(next),
            _ => {
                truncated = true;
                break;
            }
        }
    }
    EvalOrbit { points, truncated }
}

/// `iterate` over every seed, in order.
pub fn poincare_cloud<F>(map: F, seeds: &[Vec<f64>], n: usize, bounds: &Region) -> OrbitCloud
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    OrbitCloud {
        orbits: seeds.iter().map(|s| iterate(&map, s, n, bounds)).collect(),
    }
}

/// Iterate the model from each truth orbit's initial point and average the
/// Euclidean deviation per iteration. Orbits are compared up to the shortest
/// truth orbit, which must hold at least two points.
pub fn error_curve(model: &Model, truth_orbits: &OrbitCloud) -> Result<ErrorCurve> {
    let len = truth_orbits
        .orbits
        .iter()
        .map(|o| o.points.len())
        .min()
        .unwrap_or(0);
    if len < 2 {
        return Err(Error::invalid(
            "error curve",
            "truth orbits must share a length of at least 2",
        ));
    }
    let mut mean_error = vec![0.0; len];
    for orbit in &truth_orbits.orbits {
        let mut pred = orbit.points[0].clone();
        for (k, truth) in orbit.points[..len].iter().enumerate() {
            if k > 0 {
                pred = model.forward(&pred)?;
            }
            mean_error[k] += crate::linalg::dist(&pred, truth);
        }
    }
    for e in mean_error.iter_mut() {
        *e /= truth_orbits.orbits.len() as f64;
    }
    mean_error[0] = 0.0; // shared initial condition, exact by definition
    Ok(ErrorCurve { mean_error })
}

/// Everything a comparison run evaluates against.
pub struct EvalContext<'a> {
    /// Held-out pairs for loss columns.
    pub val: &'a Dataset,
    /// Ground-truth orbits for prediction-error curves.
    pub truth_orbits: &'a OrbitCloud,
    /// Initial points for Poincaré clouds.
    pub cloud_seeds: &'a [Vec<f64>],
    pub n_iter: usize,
    pub bounds: &'a Region,
    /// Sample points for the structural residual columns.
    pub check_points: &'a [Vec<f64>],
    /// Reversing involution of the ground truth, used for kinds that do not
    /// carry their own.
    pub involution: &'a Involution,
}

/// One model's evaluation summary.
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub name: String,
    pub kind: ModelKind,
    pub params: usize,
    pub val_loss: f64,
    /// Mean Euclidean distance on the validation pairs.
    pub val_metric: f64,
    pub rev_residual: f64,
    pub symp_residual: f64,
    pub error_curve: ErrorCurve,
    pub cloud: OrbitCloud,
    pub in_box_fraction: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ModelEval>,
}

/// Evaluate every named model against the same context.
pub fn compare_report(models: &[(String, &Model)], ctx: &EvalContext) -> Result<Report> {
    let mut rows = Vec::with_capacity(models.len());
    for (name, model) in models {
        if model.dim != ctx.val.dim() {
            return Err(Error::DimensionMismatch {
                expected: ctx.val.dim(),
                got: model.dim,
            });
        }
        let val_loss = training::loss(model, &ctx.val.inputs, &ctx.val.targets)?;
        let val_metric = training::mean_distance(model, &ctx.val.inputs, &ctx.val.targets)?;
        let rev_residual =
            model.reversibility_residual(Some(ctx.involution), ctx.check_points)?;
        let symp_residual = model.symplecticity_residual(ctx.check_points)?;
        let curve = error_curve(model, ctx.truth_orbits)?;
        let cloud = poincare_cloud(
            |x: &[f64]| model.forward(x),
            ctx.cloud_seeds,
            ctx.n_iter,
            ctx.bounds,
        );
        let in_box_fraction = cloud.in_box_fraction(ctx.n_iter);
        rows.push(ModelEval {
            name: name.clone(),
            kind: model.kind,
            params: model.param_count(),
            val_loss,
            val_metric,
            rev_residual,
            symp_residual,
            error_curve: curve,
            cloud,
            in_box_fraction,
        });
    }
    Ok(Report { rows })
}
