//! End-to-end trials, parameter sweeps and CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{coalitional_game, no_reuse_benchmark};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::mode::{assign_channels, plan_group, Allocation, GroupOutcome};
use crate::par::{self, derive_seed, Execution};
use crate::partition::{adjust_gamma, GammaSearch};
use crate::topology::{build_links, generate_topology, FadingMatrix, LinkTable, Topology};

const TAG_TOPOLOGY: u64 = 1;
const TAG_PARTITION: u64 = 2;
const TAG_POWER: u64 = 3;
const TAG_GAME: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    VertexColoring,
    CoalitionalGame,
    NoReuse,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::VertexColoring,
        Algorithm::CoalitionalGame,
        Algorithm::NoReuse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::VertexColoring => "vertex_coloring",
            Algorithm::CoalitionalGame => "coalitional_game",
            Algorithm::NoReuse => "no_reuse",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertex_coloring" | "vc" => Ok(Algorithm::VertexColoring),
            "coalitional_game" | "cg" => Ok(Algorithm::CoalitionalGame),
            "no_reuse" | "nr" => Ok(Algorithm::NoReuse),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// One random network drawn for a trial, shared by every algorithm run on it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub seed: u64,
    pub topology: Topology,
    pub links: LinkTable,
    pub zbar: FadingMatrix,
}

impl Scenario {
    pub fn generate(config: &SystemConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_TOPOLOGY]));
        let topology = generate_topology(config, &mut rng)?;
        let (links, zbar) = build_links(config, &topology)?;
        Ok(Scenario {
            config: config.clone(),
            seed,
            topology,
            links,
            zbar,
        })
    }

    /// Same network, different algorithm parameters. Geometry-changing
    /// parameters must go through [`Scenario::generate`] instead.
    pub fn with_config(&self, config: &SystemConfig) -> Self {
        Scenario {
            config: config.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub solver_unconverged: bool,
    pub bisection_inexact: bool,
    pub game_unconverged: bool,
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.solver_unconverged, "solver_unconverged"),
            (self.bisection_inexact, "bisection_inexact"),
            (self.game_unconverged, "game_unconverged"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&names.join("|"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    /// bits/s
    pub sum_rate: f64,
    pub n_served: usize,
    /// Seconds spent allocating; topology generation is not included.
    pub wall_time: f64,
    pub n_g: usize,
    pub flags: Flags,
}

/// Full output of the graph-coloring pipeline on one scenario.
#[derive(Debug, Clone)]
pub struct ColoringRun {
    pub search: GammaSearch,
    pub groups: Vec<GroupOutcome>,
    pub allocation: Allocation,
}

/// Threshold search, per-group power optimization (lone D2D pairs also pick
/// their mode), then channel assignment.
pub fn vertex_coloring(scenario: &Scenario, exec: Execution) -> Result<ColoringRun> {
    let Scenario {
        config,
        links,
        zbar,
        seed,
        ..
    } = scenario;
    let search = adjust_gamma(
        links,
        zbar,
        config.gamma_init,
        config.delta_gamma,
        config.n_channels,
        derive_seed(*seed, &[TAG_PARTITION]),
    );
    let power_seed = derive_seed(*seed, &[TAG_POWER]);
    let groups = par::map(exec, &search.partition.groups, |members| {
        plan_group(
            members,
            links,
            zbar,
            config,
            config.solver.restarts,
            power_seed,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let allocation = assign_channels(
        &groups,
        links,
        config.n_channels,
        config.assignment_objective,
    )?;
    Ok(ColoringRun {
        search,
        groups,
        allocation,
    })
}

/// Runs one algorithm on an existing scenario.
pub fn run_on(scenario: &Scenario, algorithm: Algorithm, exec: Execution) -> Result<TrialResult> {
    let start = Instant::now();
    let (allocation, n_g, flags) = match algorithm {
        Algorithm::VertexColoring => {
            let run = vertex_coloring(scenario, exec)?;
            let flags = Flags {
                solver_unconverged: run.groups.iter().any(|g| !g.solution.converged),
                bisection_inexact: !run.search.exact,
                game_unconverged: false,
            };
            (run.allocation, run.groups.len(), flags)
        }
        Algorithm::CoalitionalGame => {
            let game_seed = derive_seed(scenario.seed, &[TAG_GAME]);
            let out =
                coalitional_game(&scenario.links, &scenario.zbar, &scenario.config, game_seed)?;
            let flags = Flags {
                solver_unconverged: !out.solver_converged,
                bisection_inexact: false,
                game_unconverged: !out.converged,
            };
            (out.allocation, out.state.coalitions.len(), flags)
        }
        Algorithm::NoReuse => {
            let a = no_reuse_benchmark(&scenario.links, &scenario.zbar, &scenario.config)?;
            (a, scenario.links.len(), Flags::default())
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    Ok(TrialResult {
        algorithm,
        sum_rate: allocation.sum_rate,
        n_served: allocation.n_served,
        wall_time,
        n_g,
        flags,
    })
}

/// Draws the network for `seed` and runs one algorithm on it.
pub fn run_trial(config: &SystemConfig, seed: u64, algorithm: Algorithm) -> Result<TrialResult> {
    let scenario = Scenario::generate(config, seed)?;
    run_on(&scenario, algorithm, Execution::default())
}

/// A parameter and the values it takes, parsed from `name=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (param, list) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep argument `{s}` is not name=v1,v2,...")))?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sweep value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        let param = param.trim().to_string();
        SystemConfig::default().set_param(&param, values[0])?;
        Ok(SweepSpec { param, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub algorithm: Algorithm,
    pub swept_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub config_hash: String,
    pub result: TrialResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub swept_value: Option<f64>,
    pub n_trials: usize,
    pub sum_rate: Stat,
    pub n_served: Stat,
    pub wall_time: Stat,
    pub n_g: Stat,
    pub n_flagged: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: Option<String>,
    pub values: Vec<f64>,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn summary_for(
        &self,
        algorithm: Algorithm,
        swept_value: Option<f64>,
    ) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.algorithm == algorithm && s.swept_value == swept_value)
    }
}

fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Algorithm, Option<f64>, &str)> = Vec::new();
    for r in rows {
        if !keys
            .iter()
            .any(|(a, v, _)| *a == r.algorithm && *v == r.swept_value)
        {
            keys.push((r.algorithm, r.swept_value, &r.config_hash));
        }
    }
    keys.into_iter()
        .map(|(algorithm, swept_value, hash)| {
            let mut subset: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.swept_value == swept_value)
                .collect();
            subset.sort_by_key(|r| r.trial);
            let col = |f: &dyn Fn(&TrialResult) -> f64| {
                Stat::of(&subset.iter().map(|r| f(&r.result)).collect::<Vec<_>>())
            };
            SummaryRow {
                algorithm,
                swept_value,
                n_trials: subset.len(),
                sum_rate: col(&|t| t.sum_rate),
                n_served: col(&|t| t.n_served as f64),
                wall_time: col(&|t| t.wall_time),
                n_g: col(&|t| t.n_g as f64),
                n_flagged: subset
                    .iter()
                    .filter(|r| r.result.flags != Flags::default())
                    .count(),
                config_hash: hash.to_string(),
            }
        })
        .collect()
}

/// What each trial of a batch runs: a config (possibly a swept variant) and
/// the algorithms to run on it.
#[derive(Debug, Clone)]
pub struct Arm {
    pub swept_value: Option<f64>,
    pub config: SystemConfig,
    pub algorithms: Vec<Algorithm>,
}

/// Runs every arm on trials `0..n_trials` with seeds `base_seed + t`. Arms
/// that agree on geometry share the trial's network, so algorithms are
/// compared on identical topologies.
pub fn run_arms(
    arms: &[Arm],
    n_trials: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<SweepResult> {
    if n_trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    for arm in arms {
        arm.config.validate()?;
    }
    let per_trial = par::map_range(exec, n_trials, |t| -> Result<Vec<TrialRow>> {
        let seed = base_seed.wrapping_add(t as u64);
        let mut drawn: Vec<(SystemConfig, Scenario)> = Vec::new();
        let mut rows = Vec::new();
        for arm in arms {
            let scenario = match drawn.iter().find(|(c, _)| same_geometry(c, &arm.config)) {
                Some((_, s)) => s.with_config(&arm.config),
                None => {
                    let s = Scenario::generate(&arm.config, seed)?;
                    drawn.push((arm.config.clone(), s.clone()));
                    s
                }
            };
            let hash = arm.config.fingerprint();
            for &algorithm in &arm.algorithms {
                // Trials already fill the pool; groups inside a trial stay on
                // this thread.
                let result = run_on(&scenario, algorithm, Execution::Sequential)?;
                rows.push(TrialRow {
                    algorithm,
                    swept_value: arm.swept_value,
                    trial: t,
                    seed,
                    config_hash: hash.clone(),
                    result,
                });
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    // Stable order: arm, algorithm, trial.
    let arm_of = |r: &TrialRow| {
        arms.iter()
            .position(|a| a.swept_value == r.swept_value && a.algorithms.contains(&r.algorithm))
    };
    rows.sort_by_key(|r| (arm_of(r), algorithm_rank(r.algorithm), r.trial));
    let summary = summarize(&rows);
    let mut values: Vec<f64> = arms.iter().filter_map(|a| a.swept_value).collect();
    values.dedup();
    Ok(SweepResult {
        param: None,
        values,
        rows,
        summary,
    })
}

fn algorithm_rank(a: Algorithm) -> usize {
    Algorithm::ALL
        .iter()
        .position(|x| *x == a)
        .unwrap_or(usize::MAX)
}

fn same_geometry(a: &SystemConfig, b: &SystemConfig) -> bool {
    a.n_cellular == b.n_cellular
        && a.n_d2d == b.n_d2d
        && a.cell_radius == b.cell_radius
        && a.d2d_dist_min == b.d2d_dist_min
        && a.d2d_dist_max == b.d2d_dist_max
        && a.min_separation == b.min_separation
        && a.path_loss_exponent == b.path_loss_exponent
        && a.ref_distance == b.ref_distance
}

/// Sweeps one parameter, running every algorithm at every value.
pub fn run_sweep(
    config: &SystemConfig,
    sweep: &SweepSpec,
    algorithms: &[Algorithm],
    n_trials: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<SweepResult> {
    let arms = sweep
        .values
        .iter()
        .map(|&v| {
            let mut c = config.clone();
            c.set_param(&sweep.param, v)?;
            Ok(Arm {
                swept_value: Some(v),
                config: c,
                algorithms: algorithms.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = run_arms(&arms, n_trials, base_seed, exec)?;
    out.param = Some(sweep.param.clone());
    Ok(out)
}

/// Graph coloring at each `delta_gamma` next to one coalitional-game run per
/// trial, all on the same networks.
pub fn run_compare(
    config: &SystemConfig,
    delta_gammas: &[f64],
    extra: &[Algorithm],
    n_trials: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<SweepResult> {
    let mut arms = Vec::new();
    for &dg in delta_gammas {
        let mut c = config.clone();
        c.set_param("delta_gamma", dg)?;
        arms.push(Arm {
            swept_value: Some(dg),
            config: c,
            algorithms: vec![Algorithm::VertexColoring],
        });
    }
    if !extra.is_empty() {
        arms.push(Arm {
            swept_value: None,
            config: config.clone(),
            algorithms: extra.to_vec(),
        });
    }
    let mut out = run_arms(&arms, n_trials, base_seed, exec)?;
    out.param = Some("delta_gamma".into());
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const TRIAL_HEADER: [&str; 9] = [
    "algorithm",
    "swept_value",
    "trial",
    "sum_rate_bps",
    "n_served",
    "wall_time_s",
    "n_g",
    "flags",
    "config_hash",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "algorithm",
    "swept_value",
    "n_trials",
    "sum_rate_mean",
    "sum_rate_std",
    "n_served_mean",
    "n_served_std",
    "wall_time_mean",
    "wall_time_std",
    "n_g_mean",
    "n_g_std",
    "n_flagged",
    "config_hash",
];

/// Per-trial CSV. With `timing` off the wall-time column is left empty so the
/// file is a pure function of the inputs.
pub fn write_trials_csv<W: Write>(out: W, rows: &[TrialRow], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            fmt_opt(r.swept_value),
            r.trial.to_string(),
            r.result.sum_rate.to_string(),
            r.result.n_served.to_string(),
            if timing {
                r.result.wall_time.to_string()
            } else {
                String::new()
            },
            r.result.n_g.to_string(),
            r.result.flags.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, summary: &[SummaryRow], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        let time = |x: f64| if timing { x.to_string() } else { String::new() };
        w.write_record([
            s.algorithm.name().to_string(),
            fmt_opt(s.swept_value),
            s.n_trials.to_string(),
            s.sum_rate.mean.to_string(),
            s.sum_rate.std.to_string(),
            s.n_served.mean.to_string(),
            s.n_served.std.to_string(),
            time(s.wall_time.mean),
            time(s.wall_time.std),
            s.n_g.mean.to_string(),
            s.n_g.std.to_string(),
            s.n_flagged.to_string(),
            s.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
