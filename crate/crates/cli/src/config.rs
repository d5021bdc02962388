// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use netlist_sentinel::casexai::DEFAULT_K;
use netlist_sentinel::featex::{FeatureConfig, DEFAULT_CAP, DEFAULT_LABEL_PATTERNS};
use netlist_sentinel::metrics::Metric;
use netlist_sentinel::netlist::{load_cell_library, CellLibrary};
use netlist_sentinel::propxai::DEFAULT_THRESHOLD;
use netlist_sentinel::svm::{Gamma, GridSpec, TrainOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON cell library; the builtin library when absent.
    pub cell_library_path: Option<PathBuf>,
    pub label_patterns: Vec<String>,
    pub feature_cap: u32,
    pub skip_control_pins: bool,
    pub split: SplitConfig,
    pub svm: SvmConfig,
    pub propxai: PropConfig,
    pub casexai: CaseConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    #[serde(rename = "C_grid")]
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<Gamma>,
    pub folds: usize,
    pub tol: f64,
    pub max_iter: u64,
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropConfig {
    pub metric: Metric,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseConfig {
    pub k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cell_library_path: None,
            label_patterns: DEFAULT_LABEL_PATTERNS.iter().map(|s| s.to_string()).collect(),
            feature_cap: DEFAULT_CAP,
            skip_control_pins: true,
            split: SplitConfig::default(),
            svm: SvmConfig::default(),
            propxai: PropConfig::default(),
            casexai: CaseConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { fraction: 0.2, seed: 0 }
    }
}

impl Default for SvmConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        let train = TrainOptions::default();
        Self {
            c_grid: grid.c,
            gamma_grid: grid.gamma,
            folds: grid.folds,
            tol: train.tol,
            max_iter: train.max_iter,
            standardize: train.standardize,
        }
    }
}

impl Default for PropConfig {
    fn default() -> Self {
        Self {
            metric: Metric::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.cell_library_path {
            if !p.is_file() {
                bail!("cell library {} does not exist", p.display());
            }
        }
        if self.label_patterns.is_empty() {
            bail!("label_patterns must not be empty");
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            bail!("split.fraction must lie in (0, 1), got {}", self.split.fraction);
        }
        if self.svm.c_grid.is_empty() || self.svm.gamma_grid.is_empty() {
            bail!("svm grids must not be empty");
        }
        if self.svm.folds < 2 {
            bail!("svm.folds must be at least 2");
        }
        if !(self.svm.tol > 0.0) {
            bail!("svm.tol must be positive");
        }
        if !(0.0..=1.0).contains(&self.propxai.threshold) {
            bail!("propxai.threshold must lie in [0, 1], got {}", self.propxai.threshold);
        }
        if self.casexai.k == 0 {
            bail!("casexai.k must be at least 1");
        }
        Ok(())
    }

    pub fn library(&self) -> Result<CellLibrary> {
        match &self.cell_library_path {
            None => Ok(CellLibrary::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                load_cell_library(&text).with_context(|| format!("loading cell library {}", p.display()))
            }
        }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            cap: self.feature_cap,
            skip_control_pins: self.skip_control_pins,
            ..FeatureConfig::default()
        }
    }

    /// Grid search settings; cross-validation folds follow the split seed.
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            c: self.svm.c_grid.clone(),
            gamma: self.svm.gamma_grid.clone(),
            folds: self.svm.folds,
            metric: self.propxai.metric,
            seed: self.split.seed,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            tol: self.svm.tol,
            max_iter: self.svm.max_iter,
            standardize: self.svm.standardize,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"casexai": {"k": 2}, "svm": {"C_grid": [1.0]}}"#).unwrap();
        assert_eq!(cfg.casexai.k, 2);
        assert_eq!(cfg.svm.c_grid, vec![1.0]);
        assert_eq!(cfg.svm.folds, 5);
        assert_eq!(cfg.propxai.metric, Metric::Mcc);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"casexai": {"kk": 2}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
