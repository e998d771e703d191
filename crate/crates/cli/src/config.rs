//! Run configuration: TOML file plus `--set section.key=value` overrides.
//! The effective configuration is always dumped into the run manifest.

use serde::{Deserialize, Serialize};

use revmap_core::dynamics::{
    DrivenPendulumSystem, HenonHeilesMap, HenonHeilesSystem, IntegratorConfig, PendulumMap,
    ReturnMap,
};
use revmap_core::region::Region;
use revmap_core::reversible::Model;
use revmap_core::training::TrainConfig;
use revmap_core::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub evaluation: EvalSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemSection {
    /// "henon-heiles" or "pendulum".
    pub name: String,
    /// Coupling strength (Hénon-Heiles) or drive amplitude (pendulum).
    /// Defaults to 1.0 / 0.1 respectively when absent.
    pub lambda: Option<f64>,
    pub nu: f64,
    pub energy: f64,
    pub step: f64,
    pub refine_tol: f64,
    pub max_time: f64,
    /// Sampling box as [min1, max1, min2, max2]; per-system default when absent.
    pub region: Option<Vec<f64>>,
    /// Dataset size; per-system default (300 / 100) when absent.
    pub n: Option<usize>,
    pub seed: u64,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            name: "henon-heiles".into(),
            lambda: None,
            nu: 0.5,
            energy: 0.125,
            step: 1e-3,
            refine_tol: 1e-10,
            max_time: 1000.0,
            region: None,
            n: None,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// "nn", "r", "hr" or "sn".
    pub kind: String,
    /// Layer count; per-kind default (nn 6, r 6, hr 25, sn 18) when absent.
    pub depth: Option<usize>,
    /// Hidden width of the baseline MLP.
    pub width: usize,
    /// Hidden width of the coupling conditioner nets.
    pub hidden: usize,
    /// Potential degree of Hénon layers (only 4 is supported).
    pub degree: usize,
    /// Unit-triangular factors per SympNet linear module.
    pub sublayers: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "hr".into(),
            depth: None,
            width: 34,
            hidden: 16,
            degree: 4,
            sublayers: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_rate: f64,
    pub split_ratio: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub loss_ratio_stop: Option<f64>,
    pub checkpoint_best: bool,
    pub record_wall_time: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr0: t.lr0,
            decay_rate: t.decay_rate,
            split_ratio: t.split_ratio,
            seed: 2,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            loss_ratio_stop: None,
            checkpoint_best: false,
            record_wall_time: true,
        }
    }
}

impl TrainingSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            decay_rate: self.decay_rate,
            split_ratio: self.split_ratio,
            seed: self.seed,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            loss_ratio_stop: self.loss_ratio_stop,
            checkpoint_best: self.checkpoint_best,
            record_wall_time: self.record_wall_time,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Poincaré cloud seeds.
    pub n_seeds: usize,
    /// Iterations per cloud seed.
    pub n_iter: usize,
    /// Evaluation box: the sampling region inflated by this fraction.
    pub box_inflate: f64,
    /// Ground-truth orbits for the prediction-error curves.
    pub error_orbits: usize,
    pub error_iters: usize,
    /// Residual-check sample count.
    pub check_points: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_seeds: 20,
            n_iter: 500,
            box_inflate: 0.2,
            error_orbits: 5,
            error_iters: 20,
            check_points: 1000,
            seed: 1234,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    pub out_dir: String,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            out_dir: "runs/out".into(),
        }
    }
}

impl RunConfig {
    /// Load from an optional TOML file and apply `section.key=value` overrides.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let table = text
                    .parse::<toml::Table>()
                    .map_err(|e| Error::invalid("config file", e.to_string()))?;
                toml::Value::Table(table)
            }
            None => toml::Value::Table(Default::default()),
        };
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        value
            .try_into()
            .map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            step: self.system.step,
            refine_tol: self.system.refine_tol,
            max_time: self.system.max_time,
        }
    }

    pub fn system_lambda(&self) -> f64 {
        self.system.lambda.unwrap_or(match self.system.name.as_str() {
            "pendulum" => 0.1,
            _ => 1.0,
        })
    }

    pub fn dataset_n(&self) -> usize {
        self.system.n.unwrap_or(match self.system.name.as_str() {
            "pendulum" => 100,
            _ => 300,
        })
    }

    /// Ground-truth map for the configured system.
    pub fn return_map(&self) -> Result<Box<dyn ReturnMap>> {
        let cfg = self.integrator();
        match self.system.name.as_str() {
            "henon-heiles" => Ok(Box::new(HenonHeilesMap {
                system: HenonHeilesSystem::new(self.system_lambda(), self.system.energy)?,
                cfg,
            })),
            "pendulum" => Ok(Box::new(PendulumMap {
                system: DrivenPendulumSystem::new(self.system.nu, self.system_lambda())?,
                cfg,
            })),
            other => Err(Error::invalid(
                "system name",
                format!("unknown system '{other}' (expected henon-heiles or pendulum)"),
            )),
        }
    }

    pub fn sampling_region(&self) -> Result<Region> {
        match &self.system.region {
            Some(flat) => Region::from_flat(flat),
            None => {
                let flat: &[f64] = match self.system.name.as_str() {
                    "pendulum" => &[-std::f64::consts::PI, std::f64::consts::PI, -1.5, 1.5],
                    _ => &[-0.45, 0.65, -0.45, 0.45],
                };
                Region::from_flat(flat)
            }
        }
    }

    /// Instantiate the configured hypothesis space at its init seed.
    pub fn build_model(&self) -> Result<Model> {
        let m = &self.model;
        if m.degree != 4 {
            return Err(Error::invalid(
                "model degree",
                "only degree-4 Hénon potentials are supported",
            ));
        }
        let dim = 2;
        match m.kind.as_str() {
            "nn" => Model::build_mlp_baseline(dim, m.depth.unwrap_or(6), m.width, m.seed),
            "r" => Model::build_reversible_nvp(dim, m.depth.unwrap_or(6), m.hidden, m.seed),
            "hr" => Model::build_reversible_henon(m.depth.unwrap_or(25), m.seed),
            "sn" => Model::build_sympnet(dim, m.depth.unwrap_or(18), m.sublayers, m.seed),
            other => Err(Error::invalid(
                "model kind",
                format!("unknown kind '{other}' (expected nn, r, hr or sn)"),
            )),
        }
    }
}

/// Apply one `section.key=value` override onto the raw TOML value. The value
/// side is parsed as a TOML fragment, so numbers, booleans and arrays work.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::invalid("--set", format!("expected key=value, got '{spec}'")))?;
    // The right-hand side is a TOML value expression; bare words fall back to strings.
    let parsed: toml::Value = raw
        .trim()
        .parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(raw.trim().to_string()));

    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.is_empty() || keys.iter().any(|k| k.is_empty()) {
        return Err(Error::invalid("--set", format!("bad key path '{path}'")));
    }
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::invalid("--set", format!("'{k}' is not a table")))?;
        cur = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| Error::invalid("--set", "path does not end in a table"))?;
    table.insert(keys[keys.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_per_system() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.system_lambda(), 1.0);
        assert_eq!(cfg.dataset_n(), 300);
        let mut p = RunConfig::default();
        p.system.name = "pendulum".into();
        assert_eq!(p.system_lambda(), 0.1);
        assert_eq!(p.dataset_n(), 100);
    }

    #[test]
    fn overrides_apply_and_typecheck() {
        let cfg = RunConfig::load(
            None,
            &[
                "training.lr0=0.01".to_string(),
                "system.name=\"pendulum\"".to_string(),
                "system.region=[-1.0, 1.0, -0.5, 0.5]".to_string(),
                "model.kind=sn".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.training.lr0, 0.01);
        assert_eq!(cfg.system.name, "pendulum");
        assert_eq!(cfg.sampling_region().unwrap().to_flat(), vec![-1.0, 1.0, -0.5, 0.5]);
        assert_eq!(cfg.model.kind, "sn");
    }

    #[test]
    fn effective_config_round_trips() {
        let cfg = RunConfig::load(None, &["training.epochs=12".to_string()]).unwrap();
        let text = cfg.to_toml();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), &text).unwrap();
        let back = RunConfig::load(Some(tmp.path()), &[]).unwrap();
        assert_eq!(back.training.epochs, 12);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn unknown_kind_or_system_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.model.kind = "bogus".into();
        assert!(cfg.build_model().is_err());
        cfg.model.kind = "hr".into();
        cfg.model.degree = 3;
        assert!(cfg.build_model().is_err());
        let mut cfg = RunConfig::default();
        cfg.system.name = "lorenz".into();
        assert!(cfg.return_map().is_err());
    }
}

