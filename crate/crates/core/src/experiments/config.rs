//! Study configuration: per-study presets overlaid with a TOML file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::params::SktParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    GapVsN,
    DetOrder,
    Rough,
    Qv,
    Duality,
    Stability,
}

impl StudyKind {
    pub const ALL: [StudyKind; 6] = [
        StudyKind::GapVsN,
        StudyKind::DetOrder,
        StudyKind::Rough,
        StudyKind::Qv,
        StudyKind::Duality,
        StudyKind::Stability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::GapVsN => "gap-vs-n",
            StudyKind::DetOrder => "det-order",
            StudyKind::Rough => "rough",
            StudyKind::Qv => "qv",
            StudyKind::Duality => "duality",
            StudyKind::Stability => "stability",
        }
    }
}

impl std::fmt::Display for StudyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown study `{s}`"))
    }
}

/// Everything a study needs. Fields irrelevant to a study are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub params: SktParams,
    pub m_grid: Vec<usize>,
    pub n_grid: Vec<u64>,
    pub replicas: usize,
    pub t_final: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub m_ref: usize,
    /// Constant target densities `(c1, c2)` and base level of smooth profiles.
    pub base: [f64; 2],
    /// Amplitude of the smooth perturbation of the base level.
    pub amplitude: f64,
    /// Perturbation sizes of the stability study.
    pub epsilons: Vec<f64>,
    /// Rows with `N/M²` below this are flagged.
    pub scale_floor: f64,
    /// Values of the trade-off parameter `a` in the duality suite.
    pub tradeoffs: Vec<f64>,
    pub regular_instances: usize,
    pub singular_instances: usize,
    pub combined_instances: usize,
    /// Write measured wall-clock times; off for byte-stable output.
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl StudyConfig {
    /// Default configuration of each study.
    pub fn preset(study: StudyKind) -> Self {
        let mut c = Self {
            study,
            params: SktParams::new(1.0, 1.0, 0.1, 0.1),
            m_grid: vec![8],
            n_grid: vec![250, 1000, 4000],
            replicas: 64,
            t_final: 0.05,
            snapshots: 65,
            seed: 20240601,
            m_ref: 512,
            base: [1.0, 1.0],
            amplitude: 0.2,
            epsilons: vec![1e-1, 1e-2, 1e-3],
            scale_floor: 4.0,
            tradeoffs: vec![0.1, 1.0, 10.0],
            regular_instances: 100,
            singular_instances: 50,
            combined_instances: 20,
            record_timing: true,
            output: None,
            threads: None,
        };
        match study {
            StudyKind::GapVsN => c.amplitude = 0.0,
            StudyKind::DetOrder => {
                c.m_grid = vec![8, 16, 32];
                c.n_grid = vec![];
                c.replicas = 1;
            }
            StudyKind::Rough => {
                c.m_grid = vec![4];
                c.n_grid = vec![100, 1000, 10000];
                c.t_final = 0.1;
                c.amplitude = 0.5;
            }
            StudyKind::Qv => {
                c.m_grid = vec![4];
                c.n_grid = vec![50];
                c.replicas = 400;
                c.t_final = 0.1;
                c.snapshots = 2;
                c.amplitude = 0.5;
            }
            StudyKind::Duality => {
                c.m_grid = vec![4, 8, 16, 32];
                c.n_grid = vec![50, 200];
                c.replicas = 1;
                c.t_final = 0.02;
                c.snapshots = 5;
            }
            StudyKind::Stability => {
                c.m_grid = vec![8, 16, 32, 64];
                c.n_grid = vec![];
                c.replicas = 1;
                c.t_final = 0.1;
            }
        }
        c
    }

    /// Reads a TOML document. The `study` key selects the preset that the
    /// remaining keys override; `params` may be overridden field by field.
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        let study = match user.get("study") {
            Some(toml::Value::String(s)) => s.parse::<StudyKind>().map_err(ExperimentError::Config)?,
            Some(_) => return Err(ExperimentError::Config("`study` must be a string".into())),
            None => return Err(ExperimentError::Config("missing `study` key".into())),
        };
        Self::preset(study).overlay(user)
    }

    /// Reads a TOML document for a known study. A `study` key, if present,
    /// must agree.
    pub fn from_toml_as(text: &str, study: StudyKind) -> Result<Self, ExperimentError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        match user.get("study") {
            None => {}
            Some(toml::Value::String(s)) if s == study.name() => {}
            Some(other) => {
                return Err(ExperimentError::Config(format!(
                    "config is for study {other}, not {study}"
                )))
            }
        }
        Self::preset(study).overlay(user)
    }

    /// Applies the keys of `user` on top of this configuration.
    pub fn overlay(&self, user: toml::Table) -> Result<Self, ExperimentError> {
        let mut base = toml::Table::try_from(self).map_err(|e| ExperimentError::Config(e.to_string()))?;
        for (k, v) in user {
            match (base.get_mut(&k), v) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
                (_, v) => {
                    base.insert(k, v);
                }
            }
        }
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        self.params
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.snapshots < 2 {
            return bad("at least two snapshots are needed".into());
        }
        if self.m_grid.iter().any(|&m| m < 3) {
            return bad("every M must be at least 3".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be positive".into());
        }
        if self.n_grid.contains(&0) {
            return bad("every N must be positive".into());
        }
        if self.tradeoffs.iter().any(|&a| !(a > 0.0)) {
            return bad("trade-off parameters must be positive".into());
        }
        if self.base.iter().any(|&c| !(c >= 0.0)) || !(self.amplitude >= 0.0) {
            return bad("densities must be nonnegative".into());
        }
        if self.threads == Some(0) {
            return bad("thread budget must be positive".into());
        }
        let needs_ref = matches!(self.study, StudyKind::DetOrder);
        if needs_ref && self.m_grid.iter().any(|&m| self.m_ref % m != 0) {
            return bad(format!("m_ref = {} must be a multiple of every M", self.m_ref));
        }
        Ok(())
    }
}
