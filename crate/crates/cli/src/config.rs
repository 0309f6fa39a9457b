//! JSON run configuration with full defaulting: an empty config runs the
//! desk-scale demo (J=25 bins, M=10^4, D=101 quadratic probes, 5·10^5 trials,
//! the fitted detector parameters). Every resolved value lands in meta.json
//! so runs are auditable.

use std::path::PathBuf;

use pqdt_core::detector::{DetectorParams, ProbeSchedule, TruncationPolicy};
use pqdt_core::solver::{SmoothingConfig, SolverConfig};
use pqdt_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    Quadratic,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub mode: ProbeMode,
    /// Number of probe states for the quadratic mode.
    pub d: usize,
    /// Quadratic scale s in |α_d|² = (s·d)²; `null` picks the largest scale
    /// whose top probe band fits the Hilbert-space cutoff.
    pub scale: Option<f64>,
    /// Mean photon numbers for the explicit mode.
    pub list: Vec<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            mode: ProbeMode::Quadratic,
            d: 101,
            scale: None,
            list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DimsConfig {
    pub m: usize,
    pub n: usize,
}

impl Default for DimsConfig {
    fn default() -> Self {
        Self { m: 10_000, n: 26 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// 0 selects the available hardware parallelism.
    pub n_workers: usize,
    pub deterministic_reduction: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n_workers: 0,
            deterministic_reduction: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub detector: DetectorParams,
    pub probes: ProbeConfig,
    pub dims: DimsConfig,
    pub trials: u64,
    pub seed: u64,
    pub truncation: TruncationPolicy,
    pub tail_mass_cutoff: f64,
    pub solver: SolverConfig,
    pub engine: EngineConfig,
    pub memory_budget_bytes: u64,
    pub occupancy_threshold: f64,
    pub fidelity_threshold: f64,
    pub workdir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            probes: ProbeConfig::default(),
            dims: DimsConfig::default(),
            trials: 500_000,
            seed: 7,
            truncation: TruncationPolicy::default(),
            tail_mass_cutoff: 1e-12,
            solver: SolverConfig {
                gamma: 1e-5,
                smoothing: SmoothingConfig {
                    enabled: true,
                    ..SmoothingConfig::default()
                },
                ..SolverConfig::default()
            },
            engine: EngineConfig::default(),
            memory_budget_bytes: 8 << 30,
            occupancy_threshold: 1e-3,
            fidelity_threshold: 0.99,
            workdir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidArgument(format!("bad config {p:?}: {e}")))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.n > self.detector.bins + 1 || self.dims.n == 0 {
            return Err(Error::InconsistentOutcomes {
                n: self.dims.n,
                bins: self.detector.bins,
                max: self.detector.bins + 1,
            });
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        self.solver.validate()
    }

    /// Resolves the probe schedule, auto-scaling quadratic schedules to the
    /// Hilbert-space cutoff when no scale is pinned.
    pub fn schedule(&self) -> Result<(ProbeSchedule, f64)> {
        match self.probes.mode {
            ProbeMode::Quadratic => {
                let scale = self
                    .probes
                    .scale
                    .unwrap_or_else(|| ProbeSchedule::auto_quadratic_scale(self.probes.d, self.dims.m));
                Ok((ProbeSchedule::quadratic_scaled(self.probes.d, scale)?, scale))
            }
            ProbeMode::Explicit => {
                Ok((ProbeSchedule::explicit(self.probes.list.clone())?, f64::NAN))
            }
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }
}
