use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::levy_model::{validate_triplet, LevyTriplet};
use crate::passage_mc::geometric_horizons;
use crate::simulate::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizons {
    #[serde(rename = "T_min")]
    pub t_min: f64,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    pub points_per_decade: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Crude,
    Importance,
}

fn default_cutoff() -> f64 {
    SimConfig::default().small_jump_cutoff
}

fn default_active_from() -> f64 {
    1.0
}

/// One experiment: a process, a boundary and a horizon grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: LevyTriplet,
    pub boundary: Boundary,
    pub horizons: Horizons,
    pub n_paths: u64,
    pub seed: u64,
    pub dt_max: f64,
    pub bridge_correction: bool,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_cutoff")]
    pub small_jump_cutoff: f64,
    /// Start of the tilt for the importance method.
    #[serde(default = "default_active_from")]
    pub tilt_active_from: f64,
    /// Explicit `[lo, hi]` for the exponent fit; the default window otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(f64, f64)>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt_max: self.dt_max,
            small_jump_cutoff: self.small_jump_cutoff,
            bridge_correction: self.bridge_correction,
        }
    }

    pub fn horizon_grid(&self) -> Result<Vec<f64>> {
        let h = self.horizons;
        geometric_horizons(h.t_min, h.t_max, h.points_per_decade)
    }

    pub fn validate(&self) -> Result<()> {
        validate_triplet(&self.process).into_result()?;
        self.sim_config().validate()?;
        let h = self.horizons;
        if !(h.t_min >= 1.0 && h.t_max.is_finite()) {
            return Err(Error::arg(format!("T_min must be at least 1, got {}", h.t_min)));
        }
        if !(h.t_max >= 100.0 * h.t_min * (1.0 - 1e-12)) {
            return Err(Error::arg(format!(
                "horizons must span at least two decades for an exponent fit, got [{}, {}]",
                h.t_min, h.t_max
            )));
        }
        if !(h.points_per_decade >= 1.0) {
            return Err(Error::arg("points_per_decade must be at least 1"));
        }
        if self.n_paths < crate::passage_mc::MIN_PATHS {
            return Err(Error::arg(format!(
                "n_paths must be at least {}",
                crate::passage_mc::MIN_PATHS
            )));
        }
        if !(self.tilt_active_from >= 0.0) {
            return Err(Error::arg("tilt_active_from must be nonnegative"));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo < hi) {
                return Err(Error::arg(format!("fit window [{lo}, {hi}] is empty")));
            }
        }
        self.horizon_grid()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON of every field that influences the
    /// numbers (all but `output_dir`), as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        // serde_json maps are ordered by key, so this is canonical
        let bytes = serde_json::to_vec(&v)?;
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// A batch of experiments: file paths (relative to the suite file) or
/// inline configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Suite {
    pub experiments: Vec<SuiteEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteEntry {
    Path(PathBuf),
    Inline(Box<ExperimentConfig>),
}

impl Suite {
    pub fn load(path: &Path) -> Result<Vec<(String, Result<ExperimentConfig>)>> {
        let suite: Suite = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(suite
            .experiments
            .into_iter()
            .enumerate()
            .map(|(i, e)| match e {
                SuiteEntry::Path(p) => {
                    let full = base.join(&p);
                    (p.display().to_string(), ExperimentConfig::load(&full))
                }
                SuiteEntry::Inline(cfg) => (format!("inline #{i}"), Ok(*cfg)),
            })
            .collect())
    }
}
