//! Conflict-graph coloring and threshold search properties.

mod common;

use common::{chromatic_number, log_uniform};
use d2dsim::partition::{adjust_gamma, pair_compatible, partition_at, welsh_powell, ConflictGraph};
use d2dsim::sim::Scenario;
use d2dsim::topology::{FadingMatrix, LinkTable, TwoHopGains};
use d2dsim::SystemConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(nc: usize, nd: usize, n: usize, seed: u64) -> Scenario {
    let config = SystemConfig {
        n_cellular: nc,
        n_d2d: nd,
        n_channels: n,
        ..SystemConfig::default()
    };
    Scenario::generate(&config, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_result_is_a_sound_partition(
        nc in 1usize..=10,
        nd in 1usize..=20,
        extra in 0.0f64..=1.0,
        dg in prop::sample::select(vec![0.0, 50.0, 250.0, 2500.0]),
        seed in any::<u64>(),
    ) {
        let n = 2 * nc + (extra * nd as f64).round() as usize;
        let s = scenario(nc, nd, n, seed);
        let g0 = s.config.gamma_init;
        let r = adjust_gamma(&s.links, &s.zbar, g0, dg, n, seed);
        prop_assert_eq!(r.partition.monochromatic_edges(&r.graph), 0);
        let mut seen = vec![false; s.links.len()];
        for group in &r.partition.groups {
            prop_assert!(group.iter().filter(|&&l| s.links.is_cellular(l)).count() <= 1);
            for (a, &i) in group.iter().enumerate() {
                prop_assert!(!seen[i]);
                seen[i] = true;
                for &j in &group[a + 1..] {
                    prop_assert!(pair_compatible(&s.links, &s.zbar, i, j, g0, g0));
                }
            }
        }
        prop_assert!(seen.iter().all(|&x| x));
        prop_assert!(r.gamma >= g0);
    }

    #[test]
    fn edges_only_grow_with_gamma_without_escalation(
        nd in 2usize..=15,
        seed in any::<u64>(),
        lo in 1.0f64..1e3,
        factor in 1.0f64..100.0,
    ) {
        let s = scenario(2, nd, 4, seed);
        let (a, _) = partition_at(&s.links, &s.zbar, lo, 0.0, seed);
        let (b, _) = partition_at(&s.links, &s.zbar, lo * factor, 0.0, seed);
        for i in 0..s.links.len() {
            for j in 0..s.links.len() {
                prop_assert!(!a.adjacent(i, j) || b.adjacent(i, j));
            }
        }
    }

    #[test]
    fn welsh_powell_is_proper_and_bounded(n in 1usize..=12, density in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < density {
                    edges.push((a, b));
                }
            }
        }
        let g = ConflictGraph::from_edges(n, &edges);
        let p = welsh_powell(&g);
        prop_assert_eq!(p.monochromatic_edges(&g), 0);
        prop_assert!(p.n_groups() >= chromatic_number(&g));
        let max_deg = (0..n).map(|v| g.degree(v)).max().unwrap_or(0);
        prop_assert!(p.n_groups() <= max_deg + 1);
    }
}

#[test]
fn cellular_links_always_conflict() {
    let s = scenario(4, 6, 10, 3);
    let (g, _) = partition_at(&s.links, &s.zbar, 1e-9, 0.0, 1);
    for i in 0..8 {
        for j in 0..8 {
            assert_eq!(g.adjacent(i, j), i != j);
        }
    }
}

/// Six links (one cellular user, four D2D pairs) with random gains.
fn synthetic_six<R: Rng>(rng: &mut R) -> (LinkTable, FadingMatrix) {
    let config = SystemConfig {
        n_cellular: 1,
        n_d2d: 4,
        n_channels: 3,
        ..SystemConfig::default()
    };
    let rows = (0..6)
        .map(|i| {
            (0..6)
                .map(|j| {
                    if i == j {
                        log_uniform(rng, 1e-3, 1.0)
                    } else {
                        log_uniform(rng, 1e-9, 1e-3)
                    }
                })
                .collect()
        })
        .collect();
    let hop = TwoHopGains {
        tx_to_bs: 1e-6,
        bs_to_rx: 1e-6,
    };
    (
        LinkTable::new(&config),
        FadingMatrix::from_rows(rows, vec![hop; 4]).unwrap(),
    )
}

#[test]
fn bisection_lands_in_the_scanned_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g0 = 1.0;
    let mut checked = 0;
    while checked < 30 {
        let (links, zbar) = synthetic_six(&mut rng);
        // Group count over a fine log grid; without escalation it is a
        // deterministic staircase in gamma.
        let grid: Vec<f64> = (0..4000)
            .map(|k| g0 * 10f64.powf(k as f64 * 12.0 / 4000.0))
            .collect();
        let counts: Vec<usize> = grid
            .iter()
            .map(|&g| partition_at(&links, &zbar, g, 0.0, 9).1.n_groups())
            .collect();
        for n in 3..=6 {
            let band: Vec<f64> = grid
                .iter()
                .zip(&counts)
                .filter(|(_, c)| **c == n)
                .map(|(g, _)| *g)
                .collect();
            if band.is_empty() || counts[0] >= n {
                continue;
            }
            let r = adjust_gamma(&links, &zbar, g0, 0.0, n, 9);
            assert_eq!(r.partition.n_groups(), n, "n = {n}");
            assert!(r.exact);
            let step = 10f64.powf(12.0 / 4000.0);
            let (lo, hi) = (band[0] / step, band[band.len() - 1] * step);
            assert!(
                r.gamma >= lo && r.gamma <= hi,
                "gamma {} outside [{lo}, {hi}]",
                r.gamma
            );
            checked += 1;
        }
    }
}

#[test]
fn early_exit_keeps_surplus_groups() {
    // Every pair conflicts, so the first pass already yields one group per link.
    let config = SystemConfig {
        n_cellular: 1,
        n_d2d: 5,
        n_channels: 4,
        ..SystemConfig::default()
    };
    let rows = vec![vec![1.0; 7]; 7];
    let hop = TwoHopGains {
        tx_to_bs: 1e-6,
        bs_to_rx: 1e-6,
    };
    let links = LinkTable::new(&config);
    let zbar = FadingMatrix::from_rows(rows, vec![hop; 5]).unwrap();
    let r = adjust_gamma(&links, &zbar, 250.0, 250.0, 4, 1);
    assert_eq!(r.partition.n_groups(), 7);
    assert_eq!(r.gamma, 250.0);
}
