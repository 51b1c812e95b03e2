//! Direct-vs-relayed mode selection for lone D2D pairs, and channel
//! assignment over the final groups.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AssignmentObjective, SystemConfig};
use crate::error::{Error, Result};
use crate::par::derive_seed;
use crate::power::{optimize_group, GroupSolution, PowerProblem};
use crate::rate::single_link_rate;
use crate::topology::{FadingMatrix, LinkTable, TwoHopGains};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    /// Relayed through the base station in two time-shared hops.
    Cellular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecision {
    pub pair_index: usize,
    pub mode: Mode,
    /// Fraction of each block spent on the pair-to-BS hop.
    pub tau_star: f64,
    pub direct_rate: f64,
    pub cellular_rate: f64,
    /// Rate of the chosen mode, bits/s.
    pub rate: f64,
}

/// Compares the direct link with the two-hop relay at full powers.
///
/// The relay splits time so both hops carry the same traffic:
/// `tau * R_up = (1 - tau) * R_down`, giving `tau = R_down / (R_up + R_down)`
/// and throughput `R_up R_down / (R_up + R_down)`. Ties go to the direct link.
pub fn select_mode(
    pair_index: usize,
    two_hop: &TwoHopGains,
    direct_gain: f64,
    config: &SystemConfig,
) -> ModeDecision {
    let b = config.bandwidth;
    let direct_rate = single_link_rate(config.snr_d2d_max * direct_gain, b);
    let up = single_link_rate(config.snr_d2d_max * two_hop.tx_to_bs, b);
    let down = single_link_rate(config.snr_bs_max * two_hop.bs_to_rx, b);
    let (tau_star, cellular_rate) = if up + down > 0.0 {
        (down / (up + down), up * down / (up + down))
    } else {
        (0.5, 0.0)
    };
    let mode = if direct_rate >= cellular_rate {
        Mode::Direct
    } else {
        Mode::Cellular
    };
    ModeDecision {
        pair_index,
        mode,
        tau_star,
        direct_rate,
        cellular_rate,
        rate: direct_rate.max(cellular_rate),
    }
}

/// A group with its optimized powers and, for a lone D2D pair, its mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    pub solution: GroupSolution,
    pub mode: Option<ModeDecision>,
}

impl GroupOutcome {
    pub fn members(&self) -> &[usize] {
        &self.solution.members
    }

    pub fn size(&self) -> usize {
        self.solution.members.len()
    }

    /// Group sum rate; a lone D2D pair reports its chosen mode's rate.
    pub fn rate(&self) -> f64 {
        self.mode
            .as_ref()
            .map_or(self.solution.sum_rate, |m| m.rate)
    }

    /// Power-allocation objective `sum + mu * min`, with the mode rate
    /// standing in for a lone D2D pair.
    pub fn objective(&self, mu_coeff: f64) -> f64 {
        match &self.mode {
            Some(m) => m.rate * (1.0 + mu_coeff),
            None => self.solution.objective,
        }
    }

    pub fn has_cellular(&self, links: &LinkTable) -> bool {
        self.members().iter().any(|&l| links.is_cellular(l))
    }
}

/// Optimizes one group's powers and, if it is a lone D2D link, picks its
/// mode. The solver's random starts come from a stream keyed by `seed` and
/// the member list, so the result does not depend on evaluation order.
pub fn plan_group(
    members: &[usize],
    links: &LinkTable,
    zbar: &FadingMatrix,
    config: &SystemConfig,
    restarts: usize,
    seed: u64,
) -> Result<GroupOutcome> {
    let problem = PowerProblem::for_group(members, links, zbar, config.mu_coeff, config.bandwidth)?;
    let tags: Vec<u64> = members.iter().map(|&m| m as u64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &tags));
    let solution = optimize_group(&problem, restarts, &config.solver, &mut rng)?;
    let mode = match members {
        [only] => links
            .d2d_pair(*only)
            .map(|pair| select_mode(pair, &zbar.two_hop[pair], zbar.get(*only, *only), config)),
        _ => None,
    };
    Ok(GroupOutcome { solution, mode })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Group held by each channel, if any.
    pub channel_map: Vec<Option<usize>>,
    /// Sorted indices of links whose group holds a channel.
    pub served_links: Vec<usize>,
    pub mode_decisions: Vec<ModeDecision>,
    /// bits/s over served groups.
    pub sum_rate: f64,
    pub n_served: usize,
}

impl Allocation {
    pub fn channel_of(&self, group: usize) -> Option<usize> {
        self.channel_map.iter().position(|g| *g == Some(group))
    }
}

/// Indices of the `k` best groups among `candidates` under `objective`;
/// ties go to the lower group index.
pub fn rank_groups(
    groups: &[GroupOutcome],
    candidates: &[usize],
    k: usize,
    objective: AssignmentObjective,
) -> Vec<usize> {
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|&a, &b| {
        let order = match objective {
            AssignmentObjective::MaxSumRate => groups[b].rate().total_cmp(&groups[a].rate()),
            AssignmentObjective::MaxServedUsers => groups[b].size().cmp(&groups[a].size()),
        };
        order.then(a.cmp(&b))
    });
    ranked.truncate(k);
    ranked
}

/// Gives one channel to every group holding a cellular link, then hands the
/// remaining channels to the best other groups. Links of groups left without
/// a channel are not served.
pub fn assign_channels(
    groups: &[GroupOutcome],
    links: &LinkTable,
    n_channels: usize,
    objective: AssignmentObjective,
) -> Result<Allocation> {
    let (cellular, rest): (Vec<usize>, Vec<usize>) =
        (0..groups.len()).partition(|&g| groups[g].has_cellular(links));
    let n_cellular_links = 2 * links.n_cellular;
    if cellular.len() != n_cellular_links {
        return Err(Error::Inconsistent(format!(
            "{} groups hold cellular links, expected {n_cellular_links}",
            cellular.len()
        )));
    }
    if n_channels < n_cellular_links {
        return Err(Error::Inconsistent(format!(
            "{n_channels} channels cannot cover {n_cellular_links} cellular links"
        )));
    }
    let chosen = rank_groups(groups, &rest, n_channels - n_cellular_links, objective);

    let mut channel_map = vec![None; n_channels];
    let mut served_links = Vec::new();
    let mut mode_decisions = Vec::new();
    let mut sum_rate = 0.0;
    for (channel, &g) in cellular.iter().chain(&chosen).enumerate() {
        channel_map[channel] = Some(g);
        served_links.extend_from_slice(groups[g].members());
        sum_rate += groups[g].rate();
    }
    for g in groups {
        if let Some(m) = &g.mode {
            mode_decisions.push(m.clone());
        }
    }
    served_links.sort_unstable();
    Ok(Allocation {
        channel_map,
        n_served: served_links.len(),
        served_links,
        mode_decisions,
        sum_rate,
    })
}
