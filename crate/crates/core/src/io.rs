//! File formats: dataset CSV with a key-value metadata sidecar, loss-history
//! CSV, JSON model files, and evaluation CSV outputs.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so all files round-trip exactly and identical inputs give
//! byte-identical outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::evaluation::{ErrorCurve, ModelEval, OrbitCloud};
use crate::region::Region;
use crate::reversible::Model;
use crate::training::LossHistory;

/// Sidecar path for a dataset CSV: same stem with a `.meta` extension.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

pub fn write_dataset(csv: &Path, ds: &Dataset) -> Result<()> {
    ds.validate()?;
    let d = ds.dim();
    let mut out = String::new();
    for i in 1..=d {
        write!(out, "x_in_{i},").unwrap();
    }
    for i in 1..=d {
        write!(out, "x_out_{i}").unwrap();
        out.push(if i == d { '\n' } else { ',' });
    }
    for (x, y) in ds.inputs.iter().zip(&ds.targets) {
        let row: Vec<String> = x.iter().chain(y).map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(csv, out)?;
    fs::write(meta_path(csv), render_meta(&ds.meta))?;
    Ok(())
}

fn render_meta(meta: &DatasetMeta) -> String {
    let mut out = String::new();
    writeln!(out, "system = {}", meta.system).unwrap();
    for (k, v) in &meta.params {
        writeln!(out, "param.{k} = {v}").unwrap();
    }
    writeln!(out, "n = {}", meta.n).unwrap();
    writeln!(out, "seed = {}", meta.seed).unwrap();
    let flat: Vec<String> = meta.region.to_flat().iter().map(|v| format!("{v}")).collect();
    writeln!(out, "region = {}", flat.join(" ")).unwrap();
    writeln!(out, "step = {}", meta.step).unwrap();
    writeln!(out, "refine_tol = {}", meta.refine_tol).unwrap();
    writeln!(out, "max_time = {}", meta.max_time).unwrap();
    writeln!(out, "attempts = {}", meta.attempts).unwrap();
    out
}

pub fn read_dataset(csv: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(csv)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::DatasetFormat("empty file".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || cols % 2 != 0 {
        return Err(Error::DatasetFormat(format!(
            "expected an even number of columns, got {cols}"
        )));
    }
    let d = cols / 2;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::DatasetFormat(format!("line {}: {e}", ln + 2)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != cols {
            return Err(Error::DatasetFormat(format!(
                "line {}: expected {cols} values, got {}",
                ln + 2,
                vals.len()
            )));
        }
        inputs.push(vals[..d].to_vec());
        targets.push(vals[d..].to_vec());
    }
    let meta = parse_meta(&fs::read_to_string(meta_path(csv))?)?;
    let ds = Dataset {
        inputs,
        targets,
        meta,
    };
    ds.validate()?;
    Ok(ds)
}

fn parse_meta(text: &str) -> Result<DatasetMeta> {
    let mut system = String::new();
    let mut params = Vec::new();
    let mut n = 0usize;
    let mut seed = 0u64;
    let mut region = None;
    let mut step = 0.0;
    let mut refine_tol = 0.0;
    let mut max_time = 0.0;
    let mut attempts = 0usize;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| Error::DatasetFormat(format!("meta {key}: {e}"));
        match key {
            "system" => system = value.to_string(),
            "n" => n = value.parse().map_err(|e| bad(&e))?,
            "seed" => seed = value.parse().map_err(|e| bad(&e))?,
            "region" => {
                let flat: Vec<f64> = value
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|e| bad(&e)))
                    .collect::<Result<_>>()?;
                region = Some(Region::from_flat(&flat)?);
            }
            "step" => step = value.parse().map_err(|e| bad(&e))?,
            "refine_tol" => refine_tol = value.parse().map_err(|e| bad(&e))?,
            "max_time" => max_time = value.parse().map_err(|e| bad(&e))?,
            "attempts" => attempts = value.parse().map_err(|e| bad(&e))?,
            k if k.starts_with("param.") => {
                params.push((
                    k["param.".len()..].to_string(),
                    value.parse().map_err(|e| bad(&e))?,
                ));
            }
            _ => {}
        }
    }
    Ok(DatasetMeta {
        system,
        params,
        n,
        seed,
        region: region.ok_or_else(|| Error::DatasetFormat("meta missing region".into()))?,
        step,
        refine_tol,
        max_time,
        attempts,
    })
}

pub fn write_history(path: &Path, history: &LossHistory) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss,lr,seconds\n");
    for r in &history.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.val_loss, r.lr, r.seconds
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    model.validate()?;
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    let model: Model =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn write_cloud(path: &Path, cloud: &OrbitCloud) -> Result<()> {
    let mut out = String::from("seed_id,iter,c1,c2\n");
    for (si, orbit) in cloud.orbits.iter().enumerate() {
        for (it, p) in orbit.points.iter().enumerate() {
            writeln!(out, "{si},{it},{},{}", p[0], p[1]).unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_error_curve(path: &Path, curve: &ErrorCurve) -> Result<()> {
    let mut out = String::from("iter,mean_error\n");
    for (it, e) in curve.mean_error.iter().enumerate() {
        writeln!(out, "{it},{e}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// One row per model with named metric columns.
pub fn write_report(path: &Path, rows: &[ModelEval]) -> Result<()> {
    let mut out = String::from(
        "model,kind,params,val_loss,val_metric,rev_residual,symp_residual,\
         error_at_10,in_box_fraction\n",
    );
    for r in rows {
        let err10 = r
            .error_curve
            .mean_error
            .get(10)
            .or(r.error_curve.mean_error.last())
            .copied()
            .unwrap_or(f64::NAN);
        writeln!(
            out,
            "{},{:?},{},{},{},{},{},{},{}",
            r.name,
            r.kind,
            r.params,
            r.val_loss,
            r.val_metric,
            r.rev_residual,
            r.symp_residual,
            err10,
            r.in_box_fraction
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}
