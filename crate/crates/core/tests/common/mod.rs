#![allow(dead_code)]

use d2dsim::partition::ConflictGraph;
use d2dsim::power::{evaluate_objective, PowerProblem};
use d2dsim::rate::GroupChannel;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

/// Random two-link group: caps in [100, 1000], own mean SNR at full power
/// log-uniform in [1, 1e4], cross mean SNR log-uniform in [1e-2, 1e3].
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> PowerProblem {
    let caps = vec![
        rng.random_range(100.0..1000.0),
        rng.random_range(100.0..1000.0),
    ];
    let own = [log_uniform(rng, 1.0, 1e4), log_uniform(rng, 1.0, 1e4)];
    let cross = [log_uniform(rng, 1e-2, 1e3), log_uniform(rng, 1e-2, 1e3)];
    let gains = vec![
        vec![own[0] / caps[0], cross[1] / caps[0]],
        vec![cross[0] / caps[1], own[1] / caps[1]],
    ];
    PowerProblem {
        members: vec![0, 1],
        channel: GroupChannel::new(caps.clone(), caps, gains).unwrap(),
        mu,
        bandwidth: 1e6,
    }
}

/// Largest `key(objective, rates)` over an `n x n` grid spanning the power box.
pub fn grid_best(p: &PowerProblem, n: usize, key: impl Fn(f64, &[f64]) -> f64) -> f64 {
    let caps = p.p_max();
    let mut best = f64::NEG_INFINITY;
    for a in 0..n {
        for b in 0..n {
            let powers = [
                caps[0] * a as f64 / (n - 1) as f64,
                caps[1] * b as f64 / (n - 1) as f64,
            ];
            let (obj, rates) = evaluate_objective(p, &powers).unwrap();
            best = best.max(key(obj, &rates));
        }
    }
    best
}

/// `E ln(1 + sum_k X_k)` for independent exponentials with the given means,
/// by Simpson's rule on `int_0^inf e^{-t} (1 - prod 1/(1 + m_k t)) dt / t`
/// after substituting `t = e^u`.
pub fn log1p_moment_simpson(means: &[f64]) -> f64 {
    if means.is_empty() {
        return 0.0;
    }
    let (lo, hi) = (-60.0_f64, 5.0_f64);
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let f = |u: f64| {
        let t = u.exp();
        let log_prod: f64 = means.iter().map(|m| (m * t).ln_1p()).sum();
        (-t).exp() * -(-log_prod).exp_m1()
    };
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Ergodic rate of `target` (bits/s) from independent quadrature.
pub fn rate_by_simpson(means: &[f64], target: usize, bandwidth: f64) -> f64 {
    let intf: Vec<f64> = means
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != target)
        .map(|(_, m)| *m)
        .collect();
    (log1p_moment_simpson(means) - log1p_moment_simpson(&intf)) * bandwidth / std::f64::consts::LN_2
}

/// Sample mean and standard error of `B log2(1 + S/(1+I))`.
pub fn rate_by_sampling<R: Rng + ?Sized>(
    means: &[f64],
    target: usize,
    bandwidth: f64,
    n: usize,
    rng: &mut R,
) -> (f64, f64) {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut s = 0.0;
        let mut i = 0.0;
        for (k, m) in means.iter().enumerate() {
            let x: f64 = Exp1.sample(rng);
            if k == target {
                s = m * x;
            } else {
                i += m * x;
            }
        }
        let r = bandwidth * (s / (1.0 + i)).ln_1p() / std::f64::consts::LN_2;
        sum += r;
        sum_sq += r * r;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
    (mean, (var.max(0.0) / n as f64).sqrt())
}

/// Smallest number of colors that properly colors `g`, by backtracking.
pub fn chromatic_number(g: &ConflictGraph) -> usize {
    let n = g.n_vertices();
    if n == 0 {
        return 0;
    }
    fn fits(g: &ConflictGraph, colors: &mut [usize], v: usize, k: usize) -> bool {
        if v == colors.len() {
            return true;
        }
        for c in 0..k {
            if (0..v).all(|u| !(g.adjacent(u, v) && colors[u] == c)) {
                colors[v] = c;
                if fits(g, colors, v + 1, k) {
                    return true;
                }
            }
        }
        false
    }
    (1..=n).find(|&k| fits(g, &mut vec![0; n], 0, k)).unwrap()
}

/// All set partitions of `0..n`, each a list of sorted blocks.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![Vec::<Vec<usize>>::new()];
    for v in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(v);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![v]);
            next.push(q);
        }
        out = next;
    }
    out
}
