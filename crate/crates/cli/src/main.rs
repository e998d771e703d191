//! `revmap`: dataset generation, training, structural checking and evaluation
//! of reversible/symplectic evolution-map models.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
//! (divergence, infeasible region), 3 structural-check failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use config::RunConfig;
use revmap_core::dynamics::{generate_dataset, ReturnMap};
use revmap_core::evaluation::{self, EvalContext};
use revmap_core::region::Region;
use revmap_core::reversible::{Involution, Model, ModelKind};
use revmap_core::training;
use revmap_core::{io, plot, Error};

type Result<T> = revmap_core::Result<T>;

#[derive(Parser)]
#[command(
    name = "revmap",
    version,
    about = "Learn exactly reversible and symplectic evolution maps from data"
)]
struct Cli {
    /// TOML configuration file; flags and --set override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set training.lr0=1e-2 (repeatable).
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset by evaluating the ground-truth map.
    GenData {
        /// henon-heiles or pendulum.
        #[arg(long)]
        system: Option<String>,
        /// Number of input/output pairs.
        #[arg(long)]
        n: Option<usize>,
        /// Sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a dataset CSV.
    Train {
        /// Dataset CSV (with its .meta sidecar next to it).
        #[arg(long)]
        data: PathBuf,
        /// Hypothesis space: nn, r, hr or sn.
        #[arg(long)]
        model: Option<String>,
        /// Layer count (alias: --layers).
        #[arg(long, visible_alias = "layers")]
        depth: Option<usize>,
        /// Hénon potential degree (must be 4).
        #[arg(long)]
        degree: Option<usize>,
        /// Sublayers per SympNet linear module.
        #[arg(long)]
        sublayers: Option<usize>,
        /// Model init seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Epoch budget.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a model file's structural residuals.
    Check {
        #[arg(long)]
        model: PathBuf,
        /// Sample count for the residual sweep.
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path (default: next to the model file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare trained models against the configured ground truth.
    Eval {
        /// Model files to compare.
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterate a model (or the ground truth) from an initial point.
    Iterate {
        #[arg(long, conflicts_with = "truth")]
        model: Option<PathBuf>,
        /// Iterate the configured ground-truth map instead of a model.
        #[arg(long)]
        truth: bool,
        /// Comma-separated initial point, e.g. --x0 0.1,0.0.
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Orbit CSV path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a model file summary.
    Info {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

fn classify(e: &Error) -> u8 {
    match e {
        Error::OutsideEnergyShell { .. }
        | Error::NoReturn { .. }
        | Error::IntegrationDiverged { .. }
        | Error::RegionInfeasible { .. }
        | Error::TrainingDiverged { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::GenData { system, n, seed, out } => cmd_gen_data(cfg, system, n, seed, out),
        Command::Train {
            data,
            model,
            depth,
            degree,
            sublayers,
            seed,
            epochs,
            out,
        } => cmd_train(cfg, data, model, depth, degree, sublayers, seed, epochs, out),
        Command::Check {
            model,
            points,
            seed,
            out,
        } => cmd_check(model, points, seed, out),
        Command::Eval { models, out } => cmd_eval(cfg, models, out),
        Command::Iterate {
            model,
            truth,
            x0,
            n,
            out,
        } => cmd_iterate(cfg, model, truth, &x0, n, out),
        Command::Info { model } => cmd_info(model),
    }
}

fn out_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag.unwrap_or_else(|| PathBuf::from(&cfg.paths.out_dir));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn sha256_hex(paths: &[&Path]) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(fs::read(p)?);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, extra: &[(String, String)]) -> Result<()> {
    let mut text = format!("command = \"{command}\"\n");
    for (k, v) in extra {
        text.push_str(&format!("{k} = \"{v}\"\n"));
    }
    text.push('\n');
    text.push_str(&cfg.to_toml());
    fs::write(dir.join(format!("{command}.manifest.toml")), text)?;
    Ok(())
}

fn cmd_gen_data(
    mut cfg: RunConfig,
    system: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    if let Some(s) = system {
        cfg.system.name = s;
    }
    if n.is_some() {
        cfg.system.n = n;
    }
    if let Some(s) = seed {
        cfg.system.seed = s;
    }

    let map = cfg.return_map()?;
    let region = cfg.sampling_region()?;
    let dir = out_dir(&cfg, out)?;
    let ds = generate_dataset(map.as_ref(), cfg.dataset_n(), &region, cfg.system.seed)?;

    let csv = dir.join("dataset.csv");
    io::write_dataset(&csv, &ds)?;
    let hash = sha256_hex(&[&csv, &io::meta_path(&csv)])?;
    write_manifest(&dir, "gen-data", &cfg, &[("dataset_sha256".into(), hash)])?;

    let rejected = ds.meta.attempts - ds.len();
    println!(
        "wrote {} pairs for {} to {} ({} draws, {} rejected, rejection rate {:.2}%)",
        ds.len(),
        ds.meta.system,
        csv.display(),
        ds.meta.attempts,
        rejected,
        100.0 * rejected as f64 / ds.meta.attempts as f64
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    mut cfg: RunConfig,
    data: PathBuf,
    model: Option<String>,
    depth: Option<usize>,
    degree: Option<usize>,
    sublayers: Option<usize>,
    seed: Option<u64>,
    epochs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<u8> {
    if let Some(k) = model {
        cfg.model.kind = k;
    }
    if depth.is_some() {
        cfg.model.depth = depth;
    }
    if let Some(d) = degree {
        cfg.model.degree = d;
    }
    if let Some(s) = sublayers {
        cfg.model.sublayers = s;
    }
    if let Some(s) = seed {
        cfg.model.seed = s;
    }
    if let Some(e) = epochs {
        cfg.training.epochs = e;
    }

    let ds = io::read_dataset(&data)?;
    let mut model = cfg.build_model()?;
    model.meta.system = Some(ds.meta.system.clone());
    model.meta.region = Some(ds.meta.region.clone());
    model.meta.config = Some(cfg.to_toml());

    let dir = out_dir(&cfg, out)?;
    let outcome = training::train(&model, &ds, &cfg.training.to_train_config())?;

    let model_path = dir.join("model.json");
    io::write_model(&model_path, &outcome.model)?;
    io::write_history(&dir.join("history.csv"), &outcome.history)?;
    let data_hash = sha256_hex(&[&data, &io::meta_path(&data)])?;
    write_manifest(
        &dir,
        "train",
        &cfg,
        &[
            ("dataset".into(), data.display().to_string()),
            ("dataset_sha256".into(), data_hash),
        ],
    )?;

    if let Some(div) = outcome.divergence {
        eprintln!(
            "training diverged at epoch {} (loss {:.6e}); partial artifacts retained in {}",
            div.epoch,
            div.loss,
            dir.display()
        );
        return Ok(2);
    }
    let last = outcome.history.records.last();
    println!(
        "trained {} ({} params) for {} epochs: train loss {:.6e}, val loss {:.6e} -> {}",
        cfg.model.kind,
        outcome.model.param_count(),
        outcome.history.records.len(),
        last.map_or(f64::NAN, |r| r.train_loss),
        last.map_or(f64::NAN, |r| r.val_loss),
        model_path.display()
    );
    Ok(0)
}

/// Per-kind structural bounds; `None` marks an informational (ungated) metric.
struct CheckRow {
    metric: &'static str,
    value: f64,
    bound: Option<f64>,
}

fn cmd_check(model_path: PathBuf, points: usize, seed: u64, out: Option<PathBuf>) -> Result<u8> {
    let model = io::read_model(&model_path)?;
    let region = model
        .meta
        .region
        .clone()
        .unwrap_or(Region::new(vec![-1.0; model.dim], vec![1.0; model.dim])?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..points).map(|_| region.sample(&mut rng)).collect();

    let fallback_r = Involution::momentum_reflection(model.dim);
    let rev = model.reversibility_residual(Some(&fallback_r), &samples)?;
    let symp = model.symplecticity_residual(&samples)?;
    let inv = match model.kind {
        ModelKind::MlpBaseline => None,
        _ => Some(model.inverse_consistency(&samples)?),
    };

    let gated = model.kind != ModelKind::MlpBaseline;
    let rows = vec![
        CheckRow {
            metric: "reversibility_residual",
            value: rev,
            bound: (gated && model.kind.is_reversible_composition()).then_some(1e-11),
        },
        CheckRow {
            metric: "symplecticity_residual",
            value: symp,
            bound: (gated && model.kind.is_structurally_symplectic()).then_some(1e-10),
        },
        CheckRow {
            metric: "inverse_consistency",
            value: inv.unwrap_or(f64::NAN),
            bound: (gated && inv.is_some()).then_some(1e-11),
        },
    ];

    let mut all_pass = true;
    let mut report = String::from("metric,value,bound,gated,pass\n");
    for row in &rows {
        match row.bound {
            Some(b) => {
                let pass = row.value <= b;
                all_pass &= pass;
                println!(
                    "{:<24} = {:.3e}  (bound {:.0e})  {}",
                    row.metric,
                    row.value,
                    b,
                    if pass { "PASS" } else { "FAIL" }
                );
                report.push_str(&format!(
                    "{},{},{},true,{}\n",
                    row.metric, row.value, b, pass
                ));
            }
            None => {
                println!("{:<24} = {:.3e}  (informational)", row.metric, row.value);
                report.push_str(&format!("{},{},,false,\n", row.metric, row.value));
            }
        }
    }
    if !gated {
        println!("baseline model: no structural claim, informational only");
    }

    let report_path = out.unwrap_or_else(|| model_path.with_extension("check.csv"));
    fs::write(&report_path, report)?;
    Ok(if all_pass { 0 } else { 3 })
}

/// Draw points from `region` that the map accepts.
fn sample_valid_points(
    map: &dyn ReturnMap,
    region: &Region,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut pts = Vec::with_capacity(n);
    let mut attempts = 0;
    while pts.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 1) {
            return Err(Error::RegionInfeasible {
                accepted: pts.len(),
                attempts,
            });
        }
        let p = region.sample(rng);
        if map.apply(&p).is_ok() {
            pts.push(p);
        }
    }
    Ok(pts)
}

fn cmd_eval(cfg: RunConfig, model_paths: Vec<PathBuf>, out: Option<PathBuf>) -> Result<u8> {
    let map = cfg.return_map()?;
    let region = cfg.sampling_region()?;
    let dir = out_dir(&cfg, out)?;

    let named: Vec<(String, Model)> = model_paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into());
            io::read_model(p).map(|m| (name, m))
        })
        .collect::<Result<_>>()?;
    for (name, m) in &named {
        if m.dim != map.dim() {
            return Err(Error::invalid(
                "eval",
                format!("model '{name}' has dim {}, ground truth has {}", m.dim, map.dim()),
            ));
        }
    }

    // Validation pairs, reproduced from the configured generation settings.
    let ds = generate_dataset(map.as_ref(), cfg.dataset_n(), &region, cfg.system.seed)?;
    let (_, val) = training::split_dataset(&ds, cfg.training.split_ratio, cfg.training.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.evaluation.seed);
    let error_ics = sample_valid_points(map.as_ref(), &region, cfg.evaluation.error_orbits, &mut rng)?;
    let cloud_seeds = sample_valid_points(map.as_ref(), &region, cfg.evaluation.n_seeds, &mut rng)?;
    let check_points: Vec<Vec<f64>> = (0..cfg.evaluation.check_points)
        .map(|_| region.sample(&mut rng))
        .collect();

    // Truth orbits for error curves run unboxed; model clouds use the
    // inflated evaluation box.
    let unbounded = Region::new(vec![-1e9; map.dim()], vec![1e9; map.dim()])?;
    let truth_orbits = evaluation::poincare_cloud(
        |x: &[f64]| map.apply(x),
        &error_ics,
        cfg.evaluation.error_iters,
        &unbounded,
    );
    let bounds = region.inflate(cfg.evaluation.box_inflate);
    let truth_cloud = evaluation::poincare_cloud(
        |x: &[f64]| map.apply(x),
        &cloud_seeds,
        cfg.evaluation.n_iter,
        &bounds,
    );

    let involution = Involution::momentum_reflection(map.dim());
    let ctx = EvalContext {
        val: &val,
        truth_orbits: &truth_orbits,
        cloud_seeds: &cloud_seeds,
        n_iter: cfg.evaluation.n_iter,
        bounds: &bounds,
        check_points: &check_points,
        involution: &involution,
    };
    let refs: Vec<(String, &Model)> = named.iter().map(|(n, m)| (n.clone(), m)).collect();
    let report = evaluation::compare_report(&refs, &ctx)?;

    io::write_report(&dir.join("report.csv"), &report.rows)?;
    io::write_cloud(&dir.join("cloud_truth.csv"), &truth_cloud)?;
    fs::write(
        dir.join("cloud_truth.svg"),
        plot::svg_scatter(&truth_cloud, &bounds, &format!("{} ground truth", map.name())),
    )?;
    for row in &report.rows {
        io::write_error_curve(&dir.join(format!("errors_{}.csv", row.name)), &row.error_curve)?;
        io::write_cloud(&dir.join(format!("cloud_{}.csv", row.name)), &row.cloud)?;
        fs::write(
            dir.join(format!("cloud_{}.svg", row.name)),
            plot::svg_scatter(&row.cloud, &bounds, &row.name),
        )?;
    }
    let mut extra = vec![("n_models".to_string(), report.rows.len().to_string())];
    for (p, (name, _)) in model_paths.iter().zip(&named) {
        extra.push((format!("model_sha256_{name}"), sha256_hex(&[p])?));
    }
    write_manifest(&dir, "eval", &cfg, &extra)?;

    println!(
        "{:<12} {:>8} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "model", "params", "val_loss", "metric", "rev_res", "symp_res", "in_box"
    );
    for r in &report.rows {
        println!(
            "{:<12} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.1}%",
            r.name,
            r.params,
            r.val_loss,
            r.val_metric,
            r.rev_residual,
            r.symp_residual,
            100.0 * r.in_box_fraction
        );
    }
    println!("report written to {}", dir.join("report.csv").display());
    Ok(0)
}

fn cmd_iterate(
    cfg: RunConfig,
    model: Option<PathBuf>,
    truth: bool,
    x0: &str,
    n: usize,
    out: Option<PathBuf>,
) -> Result<u8> {
    let x0: Vec<f64> = x0
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid("--x0", e.to_string()))
        })
        .collect::<Result<_>>()?;
    let region = cfg.sampling_region()?;
    let bounds = region.inflate(cfg.evaluation.box_inflate);

    let orbit = if truth {
        let map = cfg.return_map()?;
        evaluation::iterate(|x: &[f64]| map.apply(x), &x0, n, &bounds)
    } else {
        let path = model.ok_or_else(|| Error::invalid("iterate", "need --model or --truth"))?;
        let m = io::read_model(&path)?;
        evaluation::iterate(|x: &[f64]| m.forward(x), &x0, n, &bounds)
    };

    let cloud = evaluation::OrbitCloud {
        orbits: vec![orbit.clone()],
    };
    match out {
        Some(path) => {
            io::write_cloud(&path, &cloud)?;
            println!(
                "wrote {} points to {} (truncated: {})",
                orbit.points.len(),
                path.display(),
                orbit.truncated
            );
        }
        None => {
            for (i, p) in orbit.points.iter().enumerate() {
                println!("{i},{},{}", p[0], p[1]);
            }
        }
    }
    Ok(0)
}

fn cmd_info(model_path: PathBuf) -> Result<u8> {
    let model = io::read_model(&model_path)?;
    println!("file:      {}", model_path.display());
    println!("kind:      {:?}", model.kind);
    println!("dim:       {}", model.dim);
    println!("layers:    {}", model.layers.len());
    println!("params:    {}", model.param_count());
    println!("init seed: {}", model.meta.init_seed);
    if let Some(s) = &model.meta.system {
        println!("system:    {s}");
    }
    if let Some(r) = &model.meta.region {
        println!("region:    {:?}", r.to_flat());
    }
    if let Some(c) = &model.meta.coords {
        println!("coords:    {c}");
    }
    Ok(0)
}
