use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use aogqa::qa::LearnerConfig;
use aogqa::world::WorldConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub learner: LearnerConfig,
    pub probe: ProbeConfig,
}

/// Held-out subset evaluated after every storyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Every `stride`-th held-out scene.
    pub stride: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { stride: 3 }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.learner.validate()?;
        if self.probe.stride == 0 {
            bail!("probe stride must be positive");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Files of one output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn world(&self) -> PathBuf {
        self.root.join("world")
    }
    pub fn events(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }
    pub fn ledger(&self) -> PathBuf {
        self.root.join("ledger.json")
    }
    pub fn aog(&self) -> PathBuf {
        self.root.join("aog.json")
    }
    pub fn curve(&self) -> PathBuf {
        self.root.join("curve.json")
    }
    pub fn eval(&self) -> PathBuf {
        self.root.join("eval.json")
    }
    pub fn eval_csv(&self) -> PathBuf {
        self.root.join("eval.csv")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report.csv")
    }
}
