//! Link partitioning: conflict graph under escalating pairwise interference
//! thresholds, Welsh-Powell coloring, and the threshold search that matches
//! the number of color classes to the channel budget.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::topology::{FadingMatrix, LinkTable};

const MAX_DOUBLINGS: usize = 40;
const MAX_BISECTIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    n: usize,
    adjacency: Vec<bool>,
    /// Per-link thresholds after escalation.
    pub final_thresholds: Vec<f64>,
}

impl ConflictGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![false; n * n],
            final_thresholds: vec![0.0; n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            g.connect(a, b);
        }
        g
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn connect(&mut self, a: usize, b: usize) {
        if a != b {
            self.adjacency[a * self.n + b] = true;
            self.adjacency[b * self.n + a] = true;
        }
    }

    #[inline]
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.n + b]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v * self.n..(v + 1) * self.n]
            .iter()
            .filter(|&&e| e)
            .count()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count() / 2
    }
}

/// Whether links `i` and `j` may share a channel at thresholds
/// `gamma_i`, `gamma_j`: each link's own mean signal at full power must
/// exceed the other's full-power interference by its threshold.
pub fn pair_compatible(
    links: &LinkTable,
    zbar: &FadingMatrix,
    i: usize,
    j: usize,
    gamma_i: f64,
    gamma_j: f64,
) -> bool {
    let (pi, pj) = (links.snr_max(i), links.snr_max(j));
    pi * zbar.get(i, i) / (pj * zbar.get(j, i)) >= gamma_i
        && pj * zbar.get(j, j) / (pi * zbar.get(i, j)) >= gamma_j
}

/// Builds the conflict graph. Pairs are visited in a doubly random order;
/// every compatible pair raises both links' thresholds by `delta_gamma`,
/// so links checked later face stricter limits.
pub fn build_conflict_graph<R: rand::Rng + ?Sized>(
    links: &LinkTable,
    zbar: &FadingMatrix,
    gamma: f64,
    delta_gamma: f64,
    rng: &mut R,
) -> ConflictGraph {
    let n = links.len();
    let mut graph = ConflictGraph::empty(n);
    let mut thresholds = vec![gamma; n];
    let mut outer: Vec<usize> = (0..n).collect();
    outer.shuffle(rng);
    for &i in &outer {
        let mut inner: Vec<usize> = (i + 1..n).collect();
        inner.shuffle(rng);
        for j in inner {
            let both_cellular = links.is_cellular(i) && links.is_cellular(j);
            if both_cellular || !pair_compatible(links, zbar, i, j, thresholds[i], thresholds[j]) {
                graph.connect(i, j);
            } else {
                thresholds[i] += delta_gamma;
                thresholds[j] += delta_gamma;
            }
        }
    }
    graph.final_thresholds = thresholds;
    graph
}

/// Disjoint link groups; each shares one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Group id of every vertex.
    pub fn coloring(&self, n: usize) -> Vec<usize> {
        let mut color = vec![usize::MAX; n];
        for (g, members) in self.groups.iter().enumerate() {
            for &v in members {
                color[v] = g;
            }
        }
        color
    }

    /// Edges of `graph` whose endpoints share a group.
    pub fn monochromatic_edges(&self, graph: &ConflictGraph) -> usize {
        self.groups
            .iter()
            .map(|g| {
                let mut bad = 0;
                for (a, &u) in g.iter().enumerate() {
                    bad += g[a + 1..].iter().filter(|&&v| graph.adjacent(u, v)).count();
                }
                bad
            })
            .sum()
    }
}

/// Greedy coloring in descending-degree order (ties by lower index); each
/// vertex takes the smallest color unused by its colored neighbours.
pub fn welsh_powell(graph: &ConflictGraph) -> Partition {
    let n = graph.n_vertices();
    let mut order: Vec<usize> = (0..n).collect();
    let degrees: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    order.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));

    let mut color = vec![usize::MAX; n];
    let mut n_colors = 0;
    let mut taken = Vec::new();
    for &v in &order {
        taken.clear();
        taken.resize(n_colors + 1, false);
        for u in 0..n {
            if graph.adjacent(v, u) && color[u] != usize::MAX {
                taken[color[u]] = true;
            }
        }
        let c = taken.iter().position(|t| !t).unwrap_or(n_colors);
        color[v] = c;
        n_colors = n_colors.max(c + 1);
    }
    let mut groups = vec![Vec::new(); n_colors];
    for v in 0..n {
        groups[color[v]].push(v);
    }
    Partition { groups }
}

/// Outcome of the threshold search.
#[derive(Debug, Clone)]
pub struct GammaSearch {
    pub partition: Partition,
    pub graph: ConflictGraph,
    pub gamma: f64,
    /// False when the search hit an iteration cap without landing on exactly
    /// `n_channels` groups.
    pub exact: bool,
}

/// One partition pass at threshold `gamma`, replaying `seed`.
pub fn partition_at(
    links: &LinkTable,
    zbar: &FadingMatrix,
    gamma: f64,
    delta_gamma: f64,
    seed: u64,
) -> (ConflictGraph, Partition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = build_conflict_graph(links, zbar, gamma, delta_gamma, &mut rng);
    let partition = welsh_powell(&graph);
    (graph, partition)
}

/// Searches for a threshold giving exactly `n_channels` groups. If the
/// initial threshold already gives at least that many, it is kept. Every
/// inner pass replays the same `seed`, so the group count is a fixed function
/// of the threshold during the search.
pub fn adjust_gamma(
    links: &LinkTable,
    zbar: &FadingMatrix,
    gamma_init: f64,
    delta_gamma: f64,
    n_channels: usize,
    seed: u64,
) -> GammaSearch {
    let run = |gamma: f64| {
        let (graph, partition) = partition_at(links, zbar, gamma, delta_gamma, seed);
        GammaSearch {
            partition,
            graph,
            gamma,
            exact: true,
        }
    };
    let first = run(gamma_init);
    if first.partition.n_groups() >= n_channels {
        return first;
    }

    let mut hi = first;
    for _ in 0..MAX_DOUBLINGS {
        hi = run(2.0 * hi.gamma);
        if hi.partition.n_groups() >= n_channels {
            break;
        }
    }
    if hi.partition.n_groups() < n_channels {
        hi.exact = false;
        return hi;
    }
    if hi.partition.n_groups() == n_channels {
        return hi;
    }

    let mut lo_gamma = hi.gamma / 2.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = run(0.5 * (lo_gamma + hi.gamma));
        match mid.partition.n_groups().cmp(&n_channels) {
            std::cmp::Ordering::Equal => return mid,
            std::cmp::Ordering::Greater => hi = mid,
            std::cmp::Ordering::Less => lo_gamma = mid.gamma,
        }
    }
    hi.exact = false;
    hi
}
