//! Cell geometry, link enumeration and the expected-gain matrix.
//!
//! Links are numbered 0-based in the fixed order: `n_cellular` uplinks, then
//! `n_cellular` downlinks, then `n_d2d` direct D2D links. Uplink `k` and
//! downlink `n_cellular + k` belong to cellular user `k`; link
//! `2 * n_cellular + i` is D2D pair `i`.

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

const PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.dist(Point::ORIGIN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs_position: Point,
    pub cellular_positions: Vec<Point>,
    pub d2d_tx_positions: Vec<Point>,
    pub d2d_rx_positions: Vec<Point>,
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Point::new(r * theta.cos(), r * theta.sin())
}

/// Area-uniform point in the annulus `[r_min, r_max]` around `center`.
fn uniform_in_annulus<R: Rng + ?Sized>(
    rng: &mut R,
    center: Point,
    r_min: f64,
    r_max: f64,
) -> Point {
    let lo = r_min * r_min;
    let hi = r_max * r_max;
    let r = (lo + (hi - lo) * rng.random::<f64>()).sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Samples users uniformly in the cell. Every new node is kept at least
/// `min_separation` away from all nodes placed before it.
pub fn generate_topology<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Topology> {
    let radius = config.cell_radius;
    let sep = config.min_separation;
    let mut placed = vec![Point::ORIGIN];
    let clear = |p: Point, placed: &[Point]| placed.iter().all(|q| p.dist(*q) >= sep);

    let place = |placed: &mut Vec<Point>, sample: &mut dyn FnMut() -> Point| -> Result<Point> {
        for _ in 0..PLACEMENT_RETRIES {
            let p = sample();
            if p.norm() <= radius && clear(p, placed) {
                placed.push(p);
                return Ok(p);
            }
        }
        Err(Error::DegenerateGeometry(format!(
            "could not place a node after {PLACEMENT_RETRIES} attempts"
        )))
    };

    let mut cellular = Vec::with_capacity(config.n_cellular);
    for _ in 0..config.n_cellular {
        cellular.push(place(&mut placed, &mut || uniform_in_disk(rng, radius))?);
    }
    // Transmitters first so the receiver annulus can be rejection-sampled
    // against its own transmitter.
    let mut tx = Vec::with_capacity(config.n_d2d);
    let mut rx = Vec::with_capacity(config.n_d2d);
    for _ in 0..config.n_d2d {
        let t = place(&mut placed, &mut || uniform_in_disk(rng, radius))?;
        let r = place(&mut placed, &mut || {
            uniform_in_annulus(rng, t, config.d2d_dist_min, config.d2d_dist_max)
        })?;
        tx.push(t);
        rx.push(r);
    }
    Ok(Topology {
        bs_position: Point::ORIGIN,
        cellular_positions: cellular,
        d2d_tx_positions: tx,
        d2d_rx_positions: rx,
    })
}

/// A radio endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    BaseStation,
    Cellular(usize),
    D2dTx(usize),
    D2dRx(usize),
}

impl Node {
    pub fn position(self, topo: &Topology) -> Point {
        match self {
            Node::BaseStation => topo.bs_position,
            Node::Cellular(k) => topo.cellular_positions[k],
            Node::D2dTx(i) => topo.d2d_tx_positions[i],
            Node::D2dRx(i) => topo.d2d_rx_positions[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Uplink,
    Downlink,
    D2dDirect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub index: usize,
    pub kind: LinkKind,
    pub tx: Node,
    pub rx: Node,
    /// Linear SNR at full transmit power, `P_max / (B sigma^2)`.
    pub snr_max: f64,
}

impl Link {
    pub fn is_cellular(&self) -> bool {
        self.kind != LinkKind::D2dDirect
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    pub n_cellular: usize,
    pub n_d2d: usize,
    pub links: Vec<Link>,
}

impl LinkTable {
    pub fn new(config: &SystemConfig) -> Self {
        let nc = config.n_cellular;
        let mut links = Vec::with_capacity(config.n_links());
        for k in 0..nc {
            links.push(Link {
                index: k,
                kind: LinkKind::Uplink,
                tx: Node::Cellular(k),
                rx: Node::BaseStation,
                snr_max: config.snr_cellular_max,
            });
        }
        for k in 0..nc {
            links.push(Link {
                index: nc + k,
                kind: LinkKind::Downlink,
                tx: Node::BaseStation,
                rx: Node::Cellular(k),
                snr_max: config.snr_bs_max,
            });
        }
        for i in 0..config.n_d2d {
            links.push(Link {
                index: 2 * nc + i,
                kind: LinkKind::D2dDirect,
                tx: Node::D2dTx(i),
                rx: Node::D2dRx(i),
                snr_max: config.snr_d2d_max,
            });
        }
        Self {
            n_cellular: nc,
            n_d2d: config.n_d2d,
            links,
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn is_cellular(&self, link: usize) -> bool {
        link < 2 * self.n_cellular
    }

    /// Link index of D2D pair `pair`.
    pub fn d2d_link(&self, pair: usize) -> usize {
        2 * self.n_cellular + pair
    }

    /// D2D pair behind `link`, if it is a direct D2D link.
    pub fn d2d_pair(&self, link: usize) -> Option<usize> {
        link.checked_sub(2 * self.n_cellular)
            .filter(|&p| p < self.n_d2d)
    }

    pub fn snr_max(&self, link: usize) -> f64 {
        self.links[link].snr_max
    }
}

/// Expected gains of the two hops used when a D2D pair relays through the BS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoHopGains {
    pub tx_to_bs: f64,
    pub bs_to_rx: f64,
}

/// `zbar[(i, j)]`: expected fading power from the transmitter of link `i` to
/// the receiver of link `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingMatrix {
    n: usize,
    zbar: Vec<f64>,
    pub two_hop: Vec<TwoHopGains>,
}

impl FadingMatrix {
    /// Builds a matrix from explicit rows; mainly for hand-made instances.
    pub fn from_rows(rows: Vec<Vec<f64>>, two_hop: Vec<TwoHopGains>) -> Result<Self> {
        let n = rows.len();
        let mut zbar = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Config("gain matrix must be square".into()));
            }
            zbar.extend(row);
        }
        if let Some(bad) = zbar.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::DegenerateGeometry(format!(
                "gain {bad} is not positive and finite"
            )));
        }
        Ok(Self { n, zbar, two_hop })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, tx_link: usize, rx_link: usize) -> f64 {
        self.zbar[tx_link * self.n + rx_link]
    }
}

/// Mean gain `(d / ref_distance)^(-exponent)`.
pub fn path_gain(dist: f64, config: &SystemConfig) -> f64 {
    (dist / config.ref_distance).powf(-config.path_loss_exponent)
}

pub fn build_links(config: &SystemConfig, topo: &Topology) -> Result<(LinkTable, FadingMatrix)> {
    if topo.cellular_positions.len() != config.n_cellular
        || topo.d2d_tx_positions.len() != config.n_d2d
        || topo.d2d_rx_positions.len() != config.n_d2d
    {
        return Err(Error::Config(
            "topology does not match configured user counts".into(),
        ));
    }
    let table = LinkTable::new(config);
    let n = table.len();
    let gain = |a: Node, b: Node| -> Result<f64> {
        if a == b {
            // Only cellular/cellular entries pair a node with itself (the BS,
            // or a user's own uplink/downlink). Those links never share a
            // channel; the entry is kept finite but is never read.
            return Ok(path_gain(config.min_separation, config));
        }
        let d = a.position(topo).dist(b.position(topo));
        if d <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "{a:?} and {b:?} coincide"
            )));
        }
        Ok(path_gain(d, config))
    };
    let mut zbar = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            zbar.push(gain(table.links[i].tx, table.links[j].rx)?);
        }
    }
    let two_hop = (0..config.n_d2d)
        .map(|p| {
            Ok(TwoHopGains {
                tx_to_bs: gain(Node::D2dTx(p), Node::BaseStation)?,
                bs_to_rx: gain(Node::BaseStation, Node::D2dRx(p))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((table, FadingMatrix { n, zbar, two_hop }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(nc: usize, nd: usize) -> SystemConfig {
        SystemConfig {
            n_cellular: nc,
            n_d2d: nd,
            n_channels: 2 * nc + nd,
            ref_distance: 1.0,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn counts_and_containment() {
        let c = cfg(10, 15);
        let t = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(t.cellular_positions.len(), 10);
        assert_eq!(t.d2d_tx_positions.len(), 15);
        assert_eq!(t.d2d_rx_positions.len(), 15);
        let all = t
            .cellular_positions
            .iter()
            .chain(&t.d2d_tx_positions)
            .chain(&t.d2d_rx_positions);
        for p in all {
            assert!(p.norm() <= c.cell_radius);
        }
        for (tx, rx) in t.d2d_tx_positions.iter().zip(&t.d2d_rx_positions) {
            let d = tx.dist(*rx);
            assert!(
                d >= c.d2d_dist_min - 1e-9 && d <= c.d2d_dist_max + 1e-9,
                "{d}"
            );
        }
    }

    #[test]
    fn same_seed_same_topology() {
        let c = cfg(10, 15);
        let a = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        let (la, za) = build_links(&c, &a).unwrap();
        let (lb, zb) = build_links(&c, &b).unwrap();
        assert_eq!(la, lb);
        assert_eq!(za, zb);
    }

    #[test]
    fn degenerate_range_fixes_pair_distance() {
        let mut c = cfg(3, 8);
        c.d2d_dist_min = 50.0;
        c.d2d_dist_max = 50.0;
        let t = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for (tx, rx) in t.d2d_tx_positions.iter().zip(&t.d2d_rx_positions) {
            assert!((tx.dist(*rx) - 50.0).abs() < 1e-9);
        }
    }

    #[test]
    fn impossible_layout_is_an_error() {
        let mut c = cfg(3, 2);
        c.cell_radius = 1.0;
        c.min_separation = 5.0;
        c.d2d_dist_min = 0.5;
        c.d2d_dist_max = 1.0;
        assert!(matches!(
            generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn enumeration_order_and_caps() {
        let c = cfg(2, 3);
        let table = LinkTable::new(&c);
        let kinds: Vec<_> = table.links.iter().map(|l| l.kind).collect();
        use LinkKind::*;
        assert_eq!(
            kinds,
            vec![Uplink, Uplink, Downlink, Downlink, D2dDirect, D2dDirect, D2dDirect]
        );
        assert_eq!(table.links[0].rx, Node::BaseStation);
        assert_eq!(table.links[2].tx, Node::BaseStation);
        assert_eq!(table.links[2].rx, Node::Cellular(0));
        assert_eq!(table.snr_max(0), c.snr_cellular_max);
        assert_eq!(table.snr_max(3), c.snr_bs_max);
        assert_eq!(table.snr_max(6), c.snr_d2d_max);
        assert_eq!(table.d2d_pair(5), Some(1));
        assert_eq!(table.d2d_pair(3), None);
        assert_eq!(table.d2d_link(2), 6);
    }

    #[test]
    fn gain_at_ten_meters() {
        let c = cfg(1, 1);
        assert!((path_gain(10.0, &c) - 1e-4).abs() < 1e-18);
        let d = SystemConfig::default();
        assert!((path_gain(d.ref_distance, &d) - 1.0).abs() < 1e-15);
        assert!((path_gain(10.0 * d.ref_distance, &d) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn toy_layout_matches_hand_computed_distances() {
        // One cellular user at (30, 40) (50 m from the BS), one D2D pair
        // with Tx at (100, 0) and Rx at (100, 20). Links: 0 uplink,
        // 1 downlink, 2 direct.
        let c = cfg(1, 1);
        let topo = Topology {
            bs_position: Point::ORIGIN,
            cellular_positions: vec![Point::new(30.0, 40.0)],
            d2d_tx_positions: vec![Point::new(100.0, 0.0)],
            d2d_rx_positions: vec![Point::new(100.0, 20.0)],
        };
        let (_, z) = build_links(&c, &topo).unwrap();
        let inv4 = |d: f64| 1.0 / (d * d * d * d);
        let cu_to_dr = (70.0f64 * 70.0 + 20.0 * 20.0).sqrt();
        let dt_to_cu = (70.0f64 * 70.0 + 40.0 * 40.0).sqrt();
        let expect = [
            // tx of uplink (CU) -> rx of {uplink, downlink, direct}
            (0, 0, inv4(50.0)),
            (0, 2, inv4(cu_to_dr)),
            // tx of downlink (BS)
            (1, 1, inv4(50.0)),
            (1, 2, inv4(100.0f64.hypot(20.0))),
            // tx of direct (DT)
            (2, 0, inv4(100.0)),
            (2, 1, inv4(dt_to_cu)),
            (2, 2, inv4(20.0)),
        ];
        for (i, j, want) in expect {
            let got = z.get(i, j);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "({i},{j}): {got} vs {want}"
            );
        }
        assert!((z.two_hop[0].tx_to_bs - inv4(100.0)).abs() < 1e-20);
        assert!((z.two_hop[0].bs_to_rx - inv4(100.0f64.hypot(20.0))).abs() < 1e-20);
    }

    #[test]
    fn coincident_distinct_nodes_rejected() {
        let c = cfg(1, 1);
        let topo = Topology {
            bs_position: Point::ORIGIN,
            cellular_positions: vec![Point::new(30.0, 40.0)],
            d2d_tx_positions: vec![Point::new(100.0, 0.0)],
            d2d_rx_positions: vec![Point::new(100.0, 0.0)],
        };
        assert!(matches!(
            build_links(&c, &topo),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn all_entries_positive_and_finite() {
        let c = cfg(4, 6);
        let t = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let (_, z) = build_links(&c, &t).unwrap();
        for i in 0..z.size() {
            for j in 0..z.size() {
                assert!(z.get(i, j).is_finite() && z.get(i, j) > 0.0);
            }
        }
    }
}
