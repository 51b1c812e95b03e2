//! Scenario configuration.
//!
//! The on-disk format is a flat `key = value` file (TOML syntax, no tables).
//! Every key is optional; missing keys take the defaults below. SNR caps can
//! be given either linear (`snr_bs_max = 600.0`) or in decibels
//! (`snr_bs_max_db = 27.78`), never both.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How leftover channels are handed out once every cellular group holds one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentObjective {
    MaxSumRate,
    MaxServedUsers,
}

/// Knobs of the multi-start log-barrier power solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Random interior starts, in addition to the full-power start.
    pub restarts: usize,
    pub barrier_init: f64,
    pub barrier_decay: f64,
    pub barrier_steps: usize,
    /// Relative objective change between outer iterations that counts as converged.
    pub tolerance: f64,
    /// Central-difference step as a fraction of each link's power cap.
    pub fd_step: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            restarts: 5,
            barrier_init: 1.0,
            barrier_decay: 0.1,
            barrier_steps: 6,
            tolerance: 1e-6,
            fd_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_channels: usize,
    pub n_cellular: usize,
    pub n_d2d: usize,
    /// Hz per channel.
    pub bandwidth: f64,
    pub snr_cellular_max: f64,
    pub snr_d2d_max: f64,
    pub snr_bs_max: f64,
    pub gamma_init: f64,
    pub delta_gamma: f64,
    /// The min-rate weight of a group is `mu_coeff * group size`.
    pub mu_coeff: f64,
    pub path_loss_exponent: f64,
    /// Distance (m) at which the mean channel gain is one.
    pub ref_distance: f64,
    /// Cell radius in meters.
    pub cell_radius: f64,
    pub d2d_dist_min: f64,
    pub d2d_dist_max: f64,
    /// No transmitter may sit closer than this (m) to any receiver.
    pub min_separation: f64,
    pub assignment_objective: AssignmentObjective,
    pub rng_seed: u64,
    pub solver: SolverParams,
    /// Pass cap of the coalitional-game baseline.
    pub coalition_max_passes: usize,
    /// Solver restarts used when the coalitional game scores a candidate move.
    pub coalition_restarts: usize,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_channels: 25,
            n_cellular: 10,
            n_d2d: 15,
            bandwidth: 1.0e6,
            snr_cellular_max: db_to_linear(26.99),
            snr_d2d_max: db_to_linear(26.99),
            snr_bs_max: db_to_linear(27.78),
            gamma_init: 250.0,
            delta_gamma: 250.0,
            mu_coeff: 0.2,
            path_loss_exponent: 4.0,
            ref_distance: 1e4,
            cell_radius: 500.0,
            d2d_dist_min: 10.0,
            d2d_dist_max: 50.0,
            min_separation: 1.0,
            assignment_objective: AssignmentObjective::MaxSumRate,
            rng_seed: 1,
            solver: SolverParams::default(),
            coalition_max_passes: 20,
            coalition_restarts: 1,
        }
    }
}

/// Mirror of [`SystemConfig`] as it appears on disk.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n_channels: Option<usize>,
    n_cellular: Option<usize>,
    n_d2d: Option<usize>,
    bandwidth: Option<f64>,
    snr_cellular_max: Option<f64>,
    snr_cellular_max_db: Option<f64>,
    snr_d2d_max: Option<f64>,
    snr_d2d_max_db: Option<f64>,
    snr_bs_max: Option<f64>,
    snr_bs_max_db: Option<f64>,
    gamma_init: Option<f64>,
    delta_gamma: Option<f64>,
    mu_coeff: Option<f64>,
    path_loss_exponent: Option<f64>,
    ref_distance: Option<f64>,
    cell_radius: Option<f64>,
    d2d_dist_min: Option<f64>,
    d2d_dist_max: Option<f64>,
    min_separation: Option<f64>,
    assignment_objective: Option<AssignmentObjective>,
    rng_seed: Option<u64>,
    solver_restarts: Option<usize>,
    solver_barrier_init: Option<f64>,
    solver_barrier_decay: Option<f64>,
    solver_barrier_steps: Option<usize>,
    solver_tolerance: Option<f64>,
    solver_fd_step: Option<f64>,
    coalition_max_passes: Option<usize>,
    coalition_restarts: Option<usize>,
}

fn snr_field(linear: Option<f64>, db: Option<f64>, key: &str, default: f64) -> Result<f64> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::Config(format!("both {key} and {key}_db given"))),
        (Some(v), None) => Ok(v),
        (None, Some(d)) => Ok(db_to_linear(d)),
        (None, None) => Ok(default),
    }
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = SystemConfig::default();
        let s = SolverParams::default();
        let cfg = SystemConfig {
            n_channels: file.n_channels.unwrap_or(d.n_channels),
            n_cellular: file.n_cellular.unwrap_or(d.n_cellular),
            n_d2d: file.n_d2d.unwrap_or(d.n_d2d),
            bandwidth: file.bandwidth.unwrap_or(d.bandwidth),
            snr_cellular_max: snr_field(
                file.snr_cellular_max,
                file.snr_cellular_max_db,
                "snr_cellular_max",
                d.snr_cellular_max,
            )?,
            snr_d2d_max: snr_field(
                file.snr_d2d_max,
                file.snr_d2d_max_db,
                "snr_d2d_max",
                d.snr_d2d_max,
            )?,
            snr_bs_max: snr_field(
                file.snr_bs_max,
                file.snr_bs_max_db,
                "snr_bs_max",
                d.snr_bs_max,
            )?,
            gamma_init: file.gamma_init.unwrap_or(d.gamma_init),
            delta_gamma: file.delta_gamma.unwrap_or(d.delta_gamma),
            mu_coeff: file.mu_coeff.unwrap_or(d.mu_coeff),
            path_loss_exponent: file.path_loss_exponent.unwrap_or(d.path_loss_exponent),
            ref_distance: file.ref_distance.unwrap_or(d.ref_distance),
            cell_radius: file.cell_radius.unwrap_or(d.cell_radius),
            d2d_dist_min: file.d2d_dist_min.unwrap_or(d.d2d_dist_min),
            d2d_dist_max: file.d2d_dist_max.unwrap_or(d.d2d_dist_max),
            min_separation: file.min_separation.unwrap_or(d.min_separation),
            assignment_objective: file.assignment_objective.unwrap_or(d.assignment_objective),
            rng_seed: file.rng_seed.unwrap_or(d.rng_seed),
            solver: SolverParams {
                restarts: file.solver_restarts.unwrap_or(s.restarts),
                barrier_init: file.solver_barrier_init.unwrap_or(s.barrier_init),
                barrier_decay: file.solver_barrier_decay.unwrap_or(s.barrier_decay),
                barrier_steps: file.solver_barrier_steps.unwrap_or(s.barrier_steps),
                tolerance: file.solver_tolerance.unwrap_or(s.tolerance),
                fd_step: file.solver_fd_step.unwrap_or(s.fd_step),
            },
            coalition_max_passes: file.coalition_max_passes.unwrap_or(d.coalition_max_passes),
            coalition_restarts: file.coalition_restarts.unwrap_or(d.coalition_restarts),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn n_links(&self) -> usize {
        2 * self.n_cellular + self.n_d2d
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let lo = 2 * self.n_cellular;
        let hi = lo + self.n_d2d;
        if self.n_channels < lo || self.n_channels > hi {
            return bad(format!(
                "n_channels = {} outside [2*n_cellular, 2*n_cellular + n_d2d] = [{lo}, {hi}]",
                self.n_channels
            ));
        }
        if self.n_channels == 0 {
            return bad("no channels and no links".into());
        }
        let positive = [
            ("bandwidth", self.bandwidth),
            ("snr_cellular_max", self.snr_cellular_max),
            ("snr_d2d_max", self.snr_d2d_max),
            ("snr_bs_max", self.snr_bs_max),
            ("gamma_init", self.gamma_init),
            ("path_loss_exponent", self.path_loss_exponent),
            ("ref_distance", self.ref_distance),
            ("cell_radius", self.cell_radius),
            ("min_separation", self.min_separation),
            ("solver_barrier_init", self.solver.barrier_init),
            ("solver_tolerance", self.solver.tolerance),
            ("solver_fd_step", self.solver.fd_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("delta_gamma", self.delta_gamma),
            ("mu_coeff", self.mu_coeff),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.solver.barrier_decay > 0.0 && self.solver.barrier_decay < 1.0) {
            return bad(format!(
                "solver_barrier_decay must lie in (0, 1), got {}",
                self.solver.barrier_decay
            ));
        }
        if self.solver.barrier_steps == 0 {
            return bad("solver_barrier_steps must be at least 1".into());
        }
        if !(self.d2d_dist_min > 0.0 && self.d2d_dist_min <= self.d2d_dist_max) {
            return bad(format!(
                "d2d distance range [{}, {}] is empty or non-positive",
                self.d2d_dist_min, self.d2d_dist_max
            ));
        }
        if self.d2d_dist_min >= 2.0 * self.cell_radius {
            return bad("d2d_dist_min does not fit inside the cell".into());
        }
        Ok(())
    }

    /// Overrides one numeric field by name; used by parameter sweeps.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{name} needs a non-negative integer, got {v}"
                )))
            }
        };
        match name {
            "n_channels" => self.n_channels = as_count(value)?,
            "n_cellular" => self.n_cellular = as_count(value)?,
            "n_d2d" => self.n_d2d = as_count(value)?,
            "bandwidth" => self.bandwidth = value,
            "snr_cellular_max" => self.snr_cellular_max = value,
            "snr_d2d_max" => self.snr_d2d_max = value,
            "snr_bs_max" => self.snr_bs_max = value,
            "snr_cellular_max_db" => self.snr_cellular_max = db_to_linear(value),
            "snr_d2d_max_db" => self.snr_d2d_max = db_to_linear(value),
            "snr_bs_max_db" => self.snr_bs_max = db_to_linear(value),
            "gamma_init" => self.gamma_init = value,
            "delta_gamma" => self.delta_gamma = value,
            "mu_coeff" => self.mu_coeff = value,
            "path_loss_exponent" => self.path_loss_exponent = value,
            "ref_distance" => self.ref_distance = value,
            "cell_radius" => self.cell_radius = value,
            "d2d_dist_min" => self.d2d_dist_min = value,
            "d2d_dist_max" => self.d2d_dist_max = value,
            "solver_restarts" => self.solver.restarts = as_count(value)?,
            _ => return Err(Error::Config(format!("unknown sweep parameter `{name}`"))),
        }
        Ok(())
    }

    /// Short stable hash of every field, carried on output rows.
    pub fn fingerprint(&self) -> String {
        let text = format!("{self:?}");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
