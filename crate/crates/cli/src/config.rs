use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cdt_core::bilevel::{CdtConfig, ProfitWeighting, UpperSolver};
use cdt_core::fem2d::{ModelConfig, SolveOptions};
use serde::{Deserialize, Serialize};

/// Topology run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoConfig {
    pub mesh: ModelConfig,
    pub volume: VolumeBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub seed: u64,
}

/// Exactly one of `v_c` (element volumes) and `mu_c` (fraction of `V_0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeBlock {
    #[serde(default)]
    pub v_c: Option<f64>,
    #[serde(default)]
    pub mu_c: Option<f64>,
    pub mu: f64,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub max_fixed_volume_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub choice: UpperSolver,
    #[serde(default)]
    pub beta_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub perturbation: Option<f64>,
    #[serde(default)]
    pub profit: ProfitWeighting,
    #[serde(default)]
    pub fem: Option<SolveOptions>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl TopoConfig {
    /// Parses JSON for a `.json` extension and TOML otherwise.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn target_volume(&self) -> anyhow::Result<f64> {
        let v0 = (self.mesh.nelx * self.mesh.nely) as f64;
        match (self.volume.v_c, self.volume.mu_c) {
            (Some(v), None) => Ok(v),
            (None, Some(f)) => Ok(f * v0),
            _ => bail!("volume block needs exactly one of `v_c` and `mu_c`"),
        }
    }

    pub fn cdt_config(&self) -> anyhow::Result<CdtConfig> {
        let mut c = CdtConfig::new(self.target_volume()?, self.volume.mu);
        c.omega = self.volume.omega;
        if let Some(k) = self.volume.max_fixed_volume_iters {
            c.max_fixed_volume_iters = k;
        }
        c.solver = self.solver.choice;
        c.beta_schedule = self.solver.beta_schedule.clone();
        if let Some(p) = self.solver.perturbation {
            c.perturbation = p;
        }
        c.profit = self.solver.profit;
        if let Some(f) = self.solver.fem {
            c.fem = f;
        }
        c.seed = self.seed;
        let v0 = (self.mesh.nelx * self.mesh.nely) as f64;
        c.validate(v0)?;
        Ok(c)
    }
}
