//! Comparison schemes: a coalition-formation game and dedicated channels
//! without reuse.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AssignmentObjective, SystemConfig};
use crate::error::Result;
use crate::mode::{assign_channels, plan_group, Allocation, GroupOutcome};
use crate::partition::pair_compatible;
use crate::topology::{FadingMatrix, LinkTable};

/// Every link alone at full power (lone D2D pairs in their better mode); all
/// cellular links plus the highest-rate D2D pairs get dedicated channels.
pub fn no_reuse_benchmark(
    links: &LinkTable,
    zbar: &FadingMatrix,
    config: &SystemConfig,
) -> Result<Allocation> {
    let groups = (0..links.len())
        .map(|l| plan_group(&[l], links, zbar, config, 0, 0))
        .collect::<Result<Vec<_>>>()?;
    assign_channels(
        &groups,
        links,
        config.n_channels,
        AssignmentObjective::MaxSumRate,
    )
}

#[derive(Debug, Clone)]
pub struct CoalitionState {
    /// Sorted member lists.
    pub coalitions: Vec<Vec<usize>>,
    /// Group objective of each coalition, parallel to `coalitions`.
    pub objective_cache: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CoalitionOutcome {
    pub state: CoalitionState,
    pub allocation: Allocation,
    /// False when the pass cap was hit while moves were still being accepted.
    pub converged: bool,
    pub passes: usize,
    /// Total objective after the start and after every accepted move.
    pub objective_trace: Vec<f64>,
    pub solver_converged: bool,
}

struct Game<'a> {
    links: &'a LinkTable,
    zbar: &'a FadingMatrix,
    config: &'a SystemConfig,
    seed: u64,
    cache: HashMap<Vec<usize>, GroupOutcome>,
}

impl Game<'_> {
    fn outcome(&mut self, members: &[usize]) -> Result<&GroupOutcome> {
        if !self.cache.contains_key(members) {
            let o = plan_group(
                members,
                self.links,
                self.zbar,
                self.config,
                self.config.coalition_restarts,
                self.seed,
            )?;
            self.cache.insert(members.to_vec(), o);
        }
        Ok(&self.cache[members])
    }

    fn value(&mut self, members: &[usize]) -> Result<f64> {
        let mu = self.config.mu_coeff;
        Ok(self.outcome(members)?.objective(mu))
    }

    /// Whether `link` may join `coalition`: at most one cellular link, and
    /// every pair passes the interference test at the initial threshold.
    fn may_join(&self, link: usize, coalition: &[usize]) -> bool {
        let g = self.config.gamma_init;
        let cellular = self.links.is_cellular(link);
        coalition.iter().all(|&other| {
            !(cellular && self.links.is_cellular(other))
                && pair_compatible(self.links, self.zbar, link, other, g, g)
        })
    }

    /// Objective of the allocation the coalitions would receive: every
    /// cellular coalition plus the best remaining ones up to the channel
    /// budget.
    fn total(&self, coalitions: &[Vec<usize>], values: &[f64]) -> f64 {
        let mut cellular = 0.0;
        let mut others = Vec::new();
        for (c, v) in coalitions.iter().zip(values) {
            if c.iter().any(|&l| self.links.is_cellular(l)) {
                cellular += v;
            } else {
                others.push(*v);
            }
        }
        others.sort_by(|a, b| b.total_cmp(a));
        let budget = self
            .config
            .n_channels
            .saturating_sub(2 * self.links.n_cellular);
        cellular + others.iter().take(budget).sum::<f64>()
    }
}

/// Coalition formation: every link starts alone; links are visited in random
/// order and a link moves to another coalition when the move is feasible and
/// strictly raises the objective of the resulting allocation. Stops after a
/// pass without moves or at the pass cap.
pub fn coalitional_game(
    links: &LinkTable,
    zbar: &FadingMatrix,
    config: &SystemConfig,
    seed: u64,
) -> Result<CoalitionOutcome> {
    let mut game = Game {
        links,
        zbar,
        config,
        seed,
        cache: HashMap::new(),
    };
    let mut coalitions: Vec<Vec<usize>> = (0..links.len()).map(|l| vec![l]).collect();
    let mut values = coalitions
        .iter()
        .map(|c| game.value(c))
        .collect::<Result<Vec<_>>>()?;
    let mut total = game.total(&coalitions, &values);
    let mut trace = vec![total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..links.len()).collect();
    let mut converged = false;
    let mut passes = 0;

    while passes < config.coalition_max_passes {
        passes += 1;
        order.shuffle(&mut rng);
        let mut moved = false;
        for &link in &order {
            let from = coalitions
                .iter()
                .position(|c| c.contains(&link))
                .expect("link in a coalition");
            for to in 0..coalitions.len() {
                if to == from || !game.may_join(link, &coalitions[to]) {
                    continue;
                }
                let left: Vec<usize> = coalitions[from]
                    .iter()
                    .copied()
                    .filter(|&l| l != link)
                    .collect();
                let mut joined = coalitions[to].clone();
                joined.push(link);
                joined.sort_unstable();

                let mut cand = coalitions.clone();
                let mut cand_values = values.clone();
                cand[to] = joined.clone();
                cand_values[to] = game.value(&joined)?;
                if left.is_empty() {
                    cand.remove(from);
                    cand_values.remove(from);
                } else {
                    cand_values[from] = game.value(&left)?;
                    cand[from] = left;
                }
                let cand_total = game.total(&cand, &cand_values);
                if cand_total > total * (1.0 + 1e-12) {
                    coalitions = cand;
                    values = cand_values;
                    total = cand_total;
                    trace.push(total);
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }

    let outcomes = coalitions
        .iter()
        .map(|c| game.outcome(c).cloned())
        .collect::<Result<Vec<_>>>()?;
    let solver_converged = outcomes.iter().all(|o| o.solution.converged);
    let allocation = assign_channels(
        &outcomes,
        links,
        config.n_channels,
        config.assignment_objective,
    )?;
    Ok(CoalitionOutcome {
        state: CoalitionState {
            coalitions,
            objective_cache: values,
        },
        allocation,
        converged,
        passes,
        objective_trace: trace,
        solver_converged,
    })
}
