//! Per-group power allocation.
//!
//! Maximizes `sum_j R_j(P) + mu * min_j R_j(P)` over the power box through
//! the epigraph form `max sum_j R_j + mu r  s.t.  R_j >= r, 0 <= P <= P_max`,
//! solved with a log barrier whose weight shrinks geometrically. Each
//! barrier subproblem is solved by diagonally scaled gradient ascent with
//! backtracking; gradients of the rates come from central differences. The
//! problem is non-convex, so the solver is restarted from random interior
//! points and the best local optimum wins.

use rand::Rng;

use crate::config::SolverParams;
use crate::error::Result;
use crate::rate::{ergodic_rate, GroupChannel};
use crate::topology::{FadingMatrix, LinkTable};

const MAX_INNER_ITERS: usize = 100;
const MAX_BACKTRACKS: usize = 50;
const ARMIJO: f64 = 1e-4;
/// Starts are drawn from `[START_MARGIN, 1 - START_MARGIN]` of each cap.
const START_MARGIN: f64 = 1e-3;
/// Coordinates this close to a bound are tried at the bound itself.
const SNAP: f64 = 1e-3;
/// Groups up to this size also score every on/off power pattern.
const MAX_CORNER_SEARCH: usize = 8;
/// Normalized value of the full-power objective inside the barrier solver.
/// Keeps the barrier weak enough at its initial weight that random starts
/// stay in their own basins.
const OBJECTIVE_UNITS: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct PowerProblem {
    pub members: Vec<usize>,
    /// Channel at full power; `channel.snr_max` holds the caps.
    pub channel: GroupChannel,
    pub mu: f64,
    pub bandwidth: f64,
}

impl PowerProblem {
    /// Problem for the links in `members`, with `mu = mu_coeff * |members|`.
    pub fn for_group(
        members: &[usize],
        links: &LinkTable,
        zbar: &FadingMatrix,
        mu_coeff: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        let caps: Vec<f64> = members.iter().map(|&l| links.snr_max(l)).collect();
        let channel = GroupChannel::from_links(members, caps, links, zbar)?;
        Ok(Self {
            members: members.to_vec(),
            channel,
            mu: mu_coeff * members.len() as f64,
            bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn p_max(&self) -> &[f64] {
        &self.channel.snr_max
    }

    /// Per-link ergodic rates (bits/s) at the given powers.
    pub fn rates(&self, powers: &[f64]) -> Result<Vec<f64>> {
        let ch = self.channel.with_powers(powers);
        (0..self.len())
            .map(|j| ergodic_rate(&ch, j, self.bandwidth))
            .collect()
    }

    fn rates_at_fraction(&self, x: &[f64]) -> Result<Vec<f64>> {
        let powers: Vec<f64> = x.iter().zip(self.p_max()).map(|(f, c)| f * c).collect();
        self.rates(&powers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSolution {
    pub members: Vec<usize>,
    /// Linear SNR per member.
    pub powers: Vec<f64>,
    /// bits/s per member.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub min_rate: f64,
    pub objective: f64,
    /// Epigraph variable at the solution, never above `min_rate`.
    pub epigraph_r: f64,
    pub converged: bool,
}

fn objective_of(rates: &[f64], mu: f64) -> f64 {
    let sum: f64 = rates.iter().sum();
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    sum + mu * if rates.is_empty() { 0.0 } else { min }
}

/// `(sum of rates + mu * min rate, per-link rates)` at the given powers.
pub fn evaluate_objective(problem: &PowerProblem, powers: &[f64]) -> Result<(f64, Vec<f64>)> {
    let rates = problem.rates(powers)?;
    Ok((objective_of(&rates, problem.mu), rates))
}

impl GroupSolution {
    fn from_rates(
        problem: &PowerProblem,
        powers: Vec<f64>,
        rates: Vec<f64>,
        r: f64,
        converged: bool,
    ) -> Self {
        let sum_rate = rates.iter().sum();
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            members: problem.members.clone(),
            objective: objective_of(&rates, problem.mu),
            epigraph_r: r.min(min_rate),
            powers,
            rates,
            sum_rate,
            min_rate,
            converged,
        }
    }

    /// All members at full power.
    pub fn full_power(problem: &PowerProblem) -> Result<Self> {
        let powers = problem.p_max().to_vec();
        let rates = problem.rates(&powers)?;
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self::from_rates(problem, powers, rates, min, true))
    }
}

/// Barrier subproblem in normalized units: power fractions `x` in (0, 1) and
/// rates divided by `scale`.
///
/// For a fixed `x` the barrier objective is strictly concave in the epigraph
/// variable `r`, so `r` is maximized exactly at every iterate and the ascent
/// runs over `x` alone. This removes the stiff direction along
/// `r ~ min_j v_j(x)` that a joint step would have to follow.
struct Barrier<'a> {
    problem: &'a PowerProblem,
    /// bits/s per normalized unit.
    scale: f64,
    fd_step: f64,
    /// Whether the epigraph variable is active (`mu > 0`).
    epigraph: bool,
}

#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    /// Normalized rates at `x`.
    v: Vec<f64>,
    r: f64,
}

impl<'a> Barrier<'a> {
    fn norm_rates(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .problem
            .rates_at_fraction(x)?
            .into_iter()
            .map(|r| r / self.scale)
            .collect())
    }

    /// Maximizer of `mu r + t sum_j ln(v_j - r)`, i.e. the root of
    /// `t sum_j 1 / (v_j - r) = mu`. The gap `v_min - r` lies in
    /// `[t / mu, n t / mu]`.
    fn best_r(&self, v: &[f64], t: f64) -> f64 {
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        if !self.epigraph {
            return vmin;
        }
        let mu = self.problem.mu;
        let excess = |gap: f64| t * v.iter().map(|vj| 1.0 / (vj - vmin + gap)).sum::<f64>() - mu;
        let (mut lo, mut hi) = (t / mu, v.len() as f64 * t / mu);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        vmin - 0.5 * (lo + hi)
    }

    fn point(&self, x: Vec<f64>, t: f64) -> Result<Point> {
        let v = self.norm_rates(&x)?;
        let r = self.best_r(&v, t);
        Ok(Point { x, v, r })
    }

    fn value(&self, p: &Point, t: f64) -> f64 {
        let mut f: f64 = p.v.iter().sum();
        let mut b: f64 = p.x.iter().map(|&x| x.ln() + (1.0 - x).ln()).sum();
        if self.epigraph {
            f += self.problem.mu * p.r;
            b += p.v.iter().map(|&v| (v - p.r).ln()).sum::<f64>();
        }
        f + t * b
    }

    /// Jacobian of normalized rates by central differences; row `k` holds
    /// the derivatives with respect to `x_k`.
    fn rate_jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let mut jac = Vec::with_capacity(n);
        let mut probe = x.to_vec();
        for k in 0..n {
            let lo = (x[k] - self.fd_step).max(0.0);
            let hi = (x[k] + self.fd_step).min(1.0);
            probe[k] = hi;
            let up = self.norm_rates(&probe)?;
            probe[k] = lo;
            let down = self.norm_rates(&probe)?;
            probe[k] = x[k];
            jac.push(
                up.iter()
                    .zip(&down)
                    .map(|(u, d)| (u - d) / (hi - lo))
                    .collect(),
            );
        }
        Ok(jac)
    }

    /// Gradient in `x` of the barrier objective with `r` at its maximizer.
    fn gradient(&self, p: &Point, t: f64) -> Result<Vec<f64>> {
        let jac = self.rate_jacobian(&p.x)?;
        let weight: Vec<f64> =
            p.v.iter()
                .map(|&v| {
                    if self.epigraph {
                        1.0 + t / (v - p.r)
                    } else {
                        1.0
                    }
                })
                .collect();
        Ok(p.x
            .iter()
            .zip(&jac)
            .map(|(&x, row)| {
                t * (1.0 / x - 1.0 / (1.0 - x))
                    + row.iter().zip(&weight).map(|(d, w)| d * w).sum::<f64>()
            })
            .collect())
    }

    fn step(&self, p: &Point, dir: &[f64], alpha: f64, t: f64) -> Result<Option<Point>> {
        let x: Vec<f64> = p.x.iter().zip(dir).map(|(x, d)| x + alpha * d).collect();
        if x.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Ok(None);
        }
        Ok(Some(self.point(x, t)?))
    }

    /// Quasi-Newton (BFGS-scaled) gradient ascent with backtracking at
    /// barrier weight `t`. Returns the final point and whether the
    /// stationarity test was met.
    fn solve(&self, mut p: Point, t: f64, tol: f64) -> Result<(Point, bool)> {
        let n = p.x.len();
        // Inverse-curvature estimate, seeded with the barrier's own diagonal.
        let mut h = vec![0.0; n * n];
        for k in 0..n {
            let x = p.x[k];
            h[k * n + k] = 1.0 / (OBJECTIVE_UNITS + t / (x * x) + t / ((1.0 - x) * (1.0 - x)));
        }
        let mut grad = self.gradient(&p, t)?;
        for _ in 0..MAX_INNER_ITERS {
            let dir: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * grad[j]).sum())
                .collect();
            let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let dir = if slope > 0.0 {
                dir
            } else {
                // Curvature estimate went bad; fall back to the plain gradient.
                slope = grad.iter().map(|g| g * g).sum::<f64>() / OBJECTIVE_UNITS;
                grad.iter().map(|g| g / OBJECTIVE_UNITS).collect()
            };
            if slope.sqrt() < tol {
                return Ok((p, true));
            }
            let f0 = self.value(&p, t);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                if let Some(q) = self.step(&p, &dir, alpha, t)? {
                    if self.value(&q, t) >= f0 + ARMIJO * alpha * slope {
                        accepted = Some(q);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(q) = accepted else {
                // No ascent at the resolution of the difference gradient.
                return Ok((p, slope.sqrt() < tol.sqrt()));
            };
            let new_grad = self.gradient(&q, t)?;
            // BFGS update of the inverse Hessian of the negated objective.
            let s: Vec<f64> = q.x.iter().zip(&p.x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(&new_grad).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-300 {
                let hy: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                    .collect();
                let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                let rho = 1.0 / sy;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] +=
                            rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                    }
                }
            }
            p = q;
            grad = new_grad;
        }
        Ok((p, false))
    }

    /// Full barrier path from power fractions `x0`.
    fn run(&self, x0: Vec<f64>, params: &SolverParams) -> Result<(Point, bool)> {
        let mut t = params.barrier_init;
        let mut p = self.point(x0, t)?;
        let mut last = f64::NAN;
        let mut converged = false;
        for _ in 0..params.barrier_steps {
            p = self.point(p.x, t)?;
            let (q, ok) = self.solve(p, t, 1e-6)?;
            p = q;
            converged = ok;
            let obj = objective_of(&p.v, self.problem.mu);
            if (obj - last).abs() <= params.tolerance * obj.abs() {
                break;
            }
            last = obj;
            t *= params.barrier_decay;
        }
        Ok((p, converged))
    }
}

/// Locally optimal powers for one group.
///
/// A single link transmits at full power. Otherwise the barrier path is run
/// from the full-power corner and from `restarts` random interior points;
/// the best of all visited candidates (including the starts) is returned.
pub fn optimize_group<R: Rng + ?Sized>(
    problem: &PowerProblem,
    restarts: usize,
    params: &SolverParams,
    rng: &mut R,
) -> Result<GroupSolution> {
    let full = GroupSolution::full_power(problem)?;
    if problem.len() <= 1 {
        return Ok(full);
    }
    let n = problem.len();
    let scale = full.objective.max(full.sum_rate).max(1e-300) / OBJECTIVE_UNITS;
    let barrier = Barrier {
        problem,
        scale,
        fd_step: params.fd_step,
        epigraph: problem.mu > 0.0,
    };

    let mut best = full.clone();
    let consider = |best: &mut GroupSolution, x: &[f64], r: f64| -> Result<()> {
        let powers: Vec<f64> = x
            .iter()
            .zip(problem.p_max())
            .map(|(f, c)| (f * c).clamp(0.0, *c))
            .collect();
        let rates = problem.rates(&powers)?;
        let cand = GroupSolution::from_rates(problem, powers, rates, r, false);
        if cand.objective > best.objective {
            *best = cand;
        }
        Ok(())
    };

    // On/off corners of the box. Sum-rate optima often switch links off
    // entirely, and those corners have narrow basins.
    let mut starts = vec![vec![1.0 - START_MARGIN; n]];
    if n <= MAX_CORNER_SEARCH {
        for mask in 1..(1usize << n) - 1 {
            let x: Vec<f64> = (0..n).map(|k| ((mask >> k) & 1) as f64).collect();
            consider(&mut best, &x, f64::NEG_INFINITY)?;
        }
        if best.objective > full.objective {
            let corner = best
                .powers
                .iter()
                .zip(problem.p_max())
                .map(|(p, c)| (p / c).clamp(START_MARGIN, 1.0 - START_MARGIN))
                .collect();
            starts.push(corner);
        }
    }
    for _ in 0..restarts {
        starts.push(
            (0..n)
                .map(|_| rng.random_range(START_MARGIN..1.0 - START_MARGIN))
                .collect(),
        );
    }

    let mut any_converged = false;
    for x0 in starts {
        consider(&mut best, &x0, f64::NEG_INFINITY)?;
        let (p, ok) = barrier.run(x0, params)?;
        any_converged |= ok;
        let r = p.r * scale;
        consider(&mut best, &p.x, r)?;
        // Try pinning near-bound coordinates to the bound.
        let snapped: Vec<f64> =
            p.x.iter()
                .map(|&x| {
                    if x < SNAP {
                        0.0
                    } else if x > 1.0 - SNAP {
                        1.0
                    } else {
                        x
                    }
                })
                .collect();
        if snapped != p.x {
            consider(&mut best, &snapped, r)?;
        }
    }
    best.converged = any_converged;
    Ok(best)
}
