//! Declarative experiment descriptions.

use std::path::Path;

use anyhow::{bail, ensure, Context};
use qcs_core::matrices::{is_prime, LogBase, Transform};
use qcs_core::recover::SolverSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FigModified,
    FigBuffer,
    FigChirpPSweep,
    FigChirpKSweep,
    DistortionRate,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::FigModified => "fig_modified",
            ExperimentKind::FigBuffer => "fig_buffer",
            ExperimentKind::FigChirpPSweep => "fig_chirp_p_sweep",
            ExperimentKind::FigChirpKSweep => "fig_chirp_k_sweep",
            ExperimentKind::DistortionRate => "distortion_rate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol_feas")]
    pub tol_feas: f64,
    #[serde(default = "default_tol_obj")]
    pub tol_obj: f64,
}

fn default_max_iter() -> usize {
    50_000
}
fn default_tol_feas() -> f64 {
    1e-6
}
fn default_tol_obj() -> f64 {
    1e-5
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol_feas: default_tol_feas(),
            tol_obj: default_tol_obj(),
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            max_iter: self.max_iter,
            tol_feas: self.tol_feas,
            tol_obj: self.tol_obj,
            ..SolverSettings::default()
        }
    }
}

/// One experiment. Unset optional fields take the desk-scale defaults of the
/// chosen experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_r_list")]
    pub r_list: Vec<usize>,
    #[serde(default)]
    pub m_list: Option<Vec<usize>>,
    #[serde(default)]
    pub p_list: Option<Vec<u64>>,
    #[serde(default)]
    pub k_list: Option<Vec<usize>>,
    #[serde(default)]
    pub l_list: Option<Vec<usize>>,
    /// Prime for the k-sweep and the distortion-rate sweep.
    #[serde(default)]
    pub p: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default = "default_log_base")]
    pub log_base: f64,
    #[serde(default = "default_transform")]
    pub transform: Transform,
    /// Supports are drawn from the first `support_range` coordinates.
    #[serde(default)]
    pub support_range: Option<usize>,
    #[serde(default)]
    pub encoded_c: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_delta() -> f64 {
    0.1
}
fn default_r_list() -> Vec<usize> {
    vec![1, 2]
}
fn default_log_base() -> f64 {
    std::f64::consts::E
}
fn default_transform() -> Transform {
    Transform::Dft
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            n: None,
            k: None,
            delta: default_delta(),
            r_list: default_r_list(),
            m_list: None,
            p_list: None,
            k_list: None,
            l_list: None,
            p: None,
            trials: None,
            master_seed: 0,
            eps: 0.0,
            m_max: None,
            log_base: default_log_base(),
            transform: default_transform(),
            support_range: None,
            encoded_c: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn log_base(&self) -> LogBase {
        LogBase(self.log_base)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(200)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(match self.experiment {
            ExperimentKind::FigModified | ExperimentKind::FigBuffer => 5,
            ExperimentKind::FigChirpPSweep => 4,
            _ => 2,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.experiment {
            ExperimentKind::FigChirpKSweep => 50,
            _ => 20,
        })
    }

    pub fn m_list(&self) -> Vec<usize> {
        self.m_list.clone().unwrap_or_else(|| vec![20, 30, 40, 50, 60, 70])
    }

    pub fn m_max(&self) -> usize {
        self.m_max.unwrap_or_else(|| self.m_list().into_iter().max().unwrap_or(1))
    }

    pub fn p_list(&self, paper_scale: bool) -> Vec<u64> {
        if let Some(p) = &self.p_list {
            return p.clone();
        }
        if paper_scale {
            vec![61, 137, 223, 307, 397, 487, 593, 677, 787]
        } else {
            vec![61, 137, 223, 307]
        }
    }

    pub fn p(&self, paper_scale: bool) -> u64 {
        self.p.unwrap_or(if paper_scale && self.experiment == ExperimentKind::FigChirpKSweep {
            541
        } else {
            61
        })
    }

    pub fn k_list(&self, paper_scale: bool) -> Vec<usize> {
        if let Some(k) = &self.k_list {
            return k.clone();
        }
        if paper_scale {
            (3..=15).collect()
        } else {
            (2..=6).collect()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.delta > 0.0 && self.delta.is_finite(), "delta must be positive");
        ensure!(self.eps >= 0.0, "eps must be nonnegative");
        ensure!(!self.r_list.is_empty() && self.r_list.iter().all(|&r| (1..=6).contains(&r)), "r_list entries must lie in 1..=6");
        ensure!(self.trials.is_none_or(|t| t >= 1), "trials must be at least 1");
        ensure!(self.log_base > 1.0, "log_base must exceed 1");
        if let Some(p) = &self.p_list {
            for &q in p {
                if !is_prime(q) {
                    bail!("p_list entry {q} is not prime");
                }
            }
        }
        if let Some(p) = self.p {
            ensure!(is_prime(p), "p = {p} is not prime");
        }
        if let Some(m) = &self.m_list {
            ensure!(!m.is_empty() && m.iter().all(|&v| v >= 1 && v <= self.n()), "m_list entries must lie in 1..=n");
            ensure!(self.m_max.is_none_or(|mm| m.iter().all(|&v| v <= mm)), "m_list exceeds m_max");
        }
        if let Some(k) = &self.k_list {
            ensure!(!k.is_empty() && k.iter().all(|&v| v >= 1), "k_list entries must be positive");
        }
        if let Some(l) = &self.l_list {
            ensure!(!l.is_empty() && l.iter().all(|&v| v >= 1), "l_list entries must be positive");
        }
        Ok(())
    }
}
