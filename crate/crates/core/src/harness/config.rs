use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::{validate_gamma, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::harness::reference::ReferenceSpec;
use crate::netbus::BusConfig;
use crate::plant::{ImpulseAmplitudes, PlantModel};
use crate::supervisor::ModePolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default = "one")]
    pub delay: usize,
    #[serde(default = "default_h")]
    pub sample_period: f64,
    /// Whether the true parameters are visible to the oracle monitors.
    #[serde(default = "yes")]
    pub oracle: bool,
    /// Overrides the scenario-wide disturbance for this plant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSpec>,
}

impl PlantSpec {
    pub fn model(&self) -> PlantModel {
        PlantModel {
            a: self.a.clone(),
            b: self.b.clone(),
            delay: self.delay,
            sample_period: self.sample_period,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSpec {
    #[default]
    None,
    Explicit {
        times: Vec<u64>,
        amplitudes: ImpulseAmplitudes,
        min_gap: usize,
    },
    Random {
        amplitudes: ImpulseAmplitudes,
        min_gap: usize,
    },
}

impl DisturbanceSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, DisturbanceSpec::None)
    }
}

/// Bus section of a scenario; per-application fields default from the
/// plant order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub d2: usize,
    /// Shared error threshold.
    pub eth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eth_per_app: Option<Vec<f64>>,
    pub minislots_per_cycle: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_slots: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dyn_priorities: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_len: Option<Vec<usize>>,
    #[serde(default = "default_h")]
    pub h: f64,
}

impl BusSpec {
    pub fn bus_config(&self, n_apps: usize) -> BusConfig {
        BusConfig {
            n_apps,
            static_slots: self.static_slots.clone().unwrap_or_else(|| (0..n_apps).collect()),
            dyn_priorities: self.dyn_priorities.clone().unwrap_or_else(|| (0..n_apps).collect()),
            minislots_per_cycle: self.minislots_per_cycle,
            d2: self.d2,
            eth: self.eth_per_app.clone().unwrap_or_else(|| vec![self.eth; n_apps]),
            message_len: self.message_len.clone().unwrap_or_else(|| vec![1; n_apps]),
            h: self.h,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Bound on `|e|` after `settle_after` in disturbance-free runs.
    #[serde(default = "d_tracking")]
    pub tracking: f64,
    #[serde(default = "d_settle")]
    pub settle_after: u64,
    #[serde(default = "d_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "d_orth")]
    pub orthogonality: f64,
    /// Number of final samples over which the orthogonality residual is
    /// judged.
    #[serde(default = "d_orth_tail")]
    pub orth_tail: u64,
    #[serde(default = "d_dv")]
    pub dv: f64,
    #[serde(default = "d_bound")]
    pub bound: f64,
    /// Switches at or after this sample break quiescence.
    #[serde(default = "d_settle")]
    pub quiescent_after: u64,
    /// Window length for the reference sufficient-richness check.
    #[serde(default = "d_sr_window")]
    pub sr_window: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tracking: d_tracking(),
            settle_after: d_settle(),
            rank_tol: d_rank_tol(),
            orthogonality: d_orth(),
            orth_tail: d_orth_tail(),
            dv: d_dv(),
            bound: d_bound(),
            quiescent_after: d_settle(),
            sr_window: d_sr_window(),
        }
    }
}

fn d_tracking() -> f64 {
    1e-3
}
fn d_settle() -> u64 {
    2000
}
fn d_rank_tol() -> f64 {
    1e-6
}
fn d_orth() -> f64 {
    1e-3
}
fn d_orth_tail() -> u64 {
    500
}
fn d_dv() -> f64 {
    1e-9
}
fn d_bound() -> f64 {
    1e3
}
fn d_sr_window() -> usize {
    200
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_h() -> f64 {
    0.01
}
fn default_gammas() -> [f64; 2] {
    [DEFAULT_GAMMA, DEFAULT_GAMMA]
}
fn default_beta0() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    pub plants: Vec<PlantSpec>,
    pub reference: ReferenceSpec,
    pub bus: BusSpec,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub policy: ModePolicy,
    #[serde(default = "default_gammas")]
    pub gammas: [f64; 2],
    #[serde(default = "default_beta0")]
    pub beta0_init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ScenarioConfig {
    pub fn n_apps(&self) -> usize {
        self.plants.len()
    }

    pub fn bus_config(&self) -> BusConfig {
        self.bus.bus_config(self.n_apps())
    }

    pub fn disturbance_for(&self, app: usize) -> &DisturbanceSpec {
        self.plants[app]
            .disturbance
            .as_ref()
            .unwrap_or(&self.disturbance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plants.is_empty() {
            return Err(Error::Config("at least one plant is required".into()));
        }
        for (i, p) in self.plants.iter().enumerate() {
            p.model().validate().map_err(|e| match e {
                Error::NonMinimumPhase { .. } => e,
                other => Error::Config(format!("plant {i}: {other}")),
            })?;
            if p.delay != 1 {
                return Err(Error::Config(format!(
                    "plant {i}: networked plants must have delay 1, got {}",
                    p.delay
                )));
            }
        }
        for g in self.gammas {
            validate_gamma(g)?;
        }
        if !(self.beta0_init.is_finite() && self.beta0_init != 0.0) {
            return Err(Error::Config("beta0_init must be finite and nonzero".into()));
        }
        self.bus_config().validate()?;
        self.reference.validate(self.horizon, self.bus.d2)?;
        Ok(())
    }
}

/// Parses and validates a JSON scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text)?;
    cfg.reference.resolve_relative_to(path.parent());
    cfg.validate()?;
    Ok(cfg)
}
