//! Ergodic Rayleigh-fading rates inside an interfering group.
//!
//! With Rayleigh fading each received power `rho_k * z_kj` is exponential
//! with mean `m_k = rho_k * zbar_kj`. The rate of link `j`,
//! `E[B log2(1 + X_j / (1 + sum_{k != j} X_k))]`, is split as
//! `E[B log2(1 + S_full)] - E[B log2(1 + S_intf)]`, and each sum of
//! independent exponentials has a hypoexponential density
//! `f(s) = sum_i c_i exp(-lambda_i s)`. Integrating `log(1 + s)` against one
//! exponential term gives `exp(lambda) E1(lambda) / lambda`, so every rate is
//! a short closed-form sum.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::quad;

/// Relative gap below which two decay rates count as equal.
pub const DEGENERACY_TOL: f64 = 1e-6;
/// Multiplicative spacing applied to coincident decay rates.
const PERTURBATION: f64 = 1e-7;
/// Interferers weaker than this fraction of their cap are ignored.
pub const POWER_FLOOR: f64 = 1e-12;
/// `sum |c_i / lambda_i|` beyond which the mixture sum loses too many digits
/// to cancellation; such cases go through [`log1p_moment_quadrature`].
const CANCELLATION_LIMIT: f64 = 1e6;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `exp(x) * E1(x)` for `x > 0`, evaluated without forming either factor
/// separately, so it stays finite for any positive `x`.
pub fn exp_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            term *= -x / kf;
            let add = term / kf;
            sum -= add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() + sum) * x.exp()
    } else {
        // Modified Lentz on the continued fraction of exp(x) E1(x).
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
}

/// One term `coefficient * exp(-rate * s)` of a hypoexponential density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTerm {
    pub coefficient: f64,
    pub rate: f64,
}

fn mixture_from_rates(rates: &[f64]) -> Vec<MixtureTerm> {
    let prod: f64 = rates.iter().product();
    rates
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let denom: f64 = rates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| lj - li)
                .product();
            MixtureTerm {
                coefficient: prod / denom,
                rate: li,
            }
        })
        .collect()
}

fn first_degenerate_pair(rates: &[f64]) -> Option<(usize, usize)> {
    for i in 0..rates.len() {
        for j in i + 1..rates.len() {
            if (rates[i] - rates[j]).abs() < DEGENERACY_TOL * rates[i].max(rates[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Density of a sum of independent exponentials with the given (distinct)
/// means, as a signed mixture of exponentials.
pub fn hypoexp_pdf_mixture(means: &[f64]) -> Result<Vec<MixtureTerm>> {
    if let Some(bad) = means.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::NumericFailure(format!(
            "exponential mean {bad} is not positive"
        )));
    }
    let rates: Vec<f64> = means.iter().map(|m| 1.0 / m).collect();
    if let Some((i, j)) = first_degenerate_pair(&rates) {
        return Err(Error::DegenerateRates(rates[i], rates[j]));
    }
    Ok(mixture_from_rates(&rates))
}

/// Same as [`hypoexp_pdf_mixture`], but spreads every rate that collides
/// with an earlier one by a distinct factor `1 + k * 1e-7`.
pub fn hypoexp_pdf_mixture_perturbed(means: &[f64]) -> Vec<MixtureTerm> {
    let mut rates: Vec<f64> = means.iter().map(|m| 1.0 / m).collect();
    let mut k = 0.0;
    for i in 1..rates.len() {
        let collides =
            (0..i).any(|j| (rates[i] - rates[j]).abs() < DEGENERACY_TOL * rates[i].max(rates[j]));
        if collides {
            k += 1.0;
            rates[i] *= 1.0 + k * PERTURBATION;
        }
    }
    mixture_from_rates(&rates)
}

/// `E[ln(1 + S)]` in nats for `S` with the given mixture density.
fn mixture_log1p_nats(mixture: &[MixtureTerm]) -> f64 {
    mixture
        .iter()
        .map(|t| t.coefficient / t.rate * exp_e1(t.rate))
        .sum()
}

/// `E[B log2(1 + S)]` for `S` with the given mixture density.
pub fn expected_log_rate(mixture: &[MixtureTerm], bandwidth: f64) -> f64 {
    bandwidth / std::f64::consts::LN_2 * mixture_log1p_nats(mixture)
}

/// `E[ln(1 + S)]` via the Laplace-transform identity
/// `E[ln(1 + S)] = int_0^inf exp(-t) (1 - E[exp(-t S)]) / t dt`,
/// integrated on a log scale. Insensitive to coincident means.
pub fn log1p_moment_quadrature(means: &[f64]) -> f64 {
    let total: f64 = means.iter().sum();
    if means.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let integrand = |v: f64| {
        let t = v.exp();
        let log_mgf: f64 = means.iter().map(|m| (m * t).ln_1p()).sum();
        (-t).exp() * -(-log_mgf).exp_m1()
    };
    let lo = (1e-16 * total.recip().min(1.0)).ln();
    let hi = 60f64.ln();
    quad::integrate(integrand, lo, hi, 1e-12, 0.0)
}

/// `E[ln(1 + S)]` in nats where `S` sums independent exponentials with the
/// given means.
pub fn log1p_moment(means: &[f64]) -> Result<f64> {
    match means {
        [] => Ok(0.0),
        [m] => Ok(exp_e1(1.0 / m)),
        _ => {
            let mixture = match hypoexp_pdf_mixture(means) {
                Ok(mix) => mix,
                Err(Error::DegenerateRates(..)) => hypoexp_pdf_mixture_perturbed(means),
                Err(e) => return Err(e),
            };
            let spread: f64 = mixture.iter().map(|t| (t.coefficient / t.rate).abs()).sum();
            if spread > CANCELLATION_LIMIT {
                return Ok(log1p_moment_quadrature(means));
            }
            let v = mixture_log1p_nats(&mixture);
            if !v.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "E[ln(1+S)] = {v} for means {means:?}"
                )));
            }
            Ok(v)
        }
    }
}

/// Transmit levels and mean gains of the links sharing one channel.
///
/// Powers are linear SNRs in `[0, snr_max]`; `gain(k, j)` is the mean fading
/// power from member `k`'s transmitter to member `j`'s receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupChannel {
    pub powers: Vec<f64>,
    pub snr_max: Vec<f64>,
    gains: Vec<f64>,
}

impl GroupChannel {
    pub fn new(powers: Vec<f64>, snr_max: Vec<f64>, gains: Vec<Vec<f64>>) -> Result<Self> {
        let n = powers.len();
        if snr_max.len() != n || gains.len() != n || gains.iter().any(|r| r.len() != n) {
            return Err(Error::Config("group channel dimensions disagree".into()));
        }
        let gains: Vec<f64> = gains.into_iter().flatten().collect();
        if gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Config(
                "group gains must be positive and finite".into(),
            ));
        }
        for (p, cap) in powers.iter().zip(&snr_max) {
            if !(*p >= 0.0 && p <= cap) {
                return Err(Error::Config(format!("power {p} outside [0, {cap}]")));
            }
        }
        Ok(Self {
            powers,
            snr_max,
            gains,
        })
    }

    /// Builds the channel of `members` from a full gain matrix.
    pub fn from_links(
        members: &[usize],
        powers: Vec<f64>,
        links: &crate::topology::LinkTable,
        zbar: &crate::topology::FadingMatrix,
    ) -> Result<Self> {
        let snr_max = members.iter().map(|&l| links.snr_max(l)).collect();
        let gains = members
            .iter()
            .map(|&k| members.iter().map(|&j| zbar.get(k, j)).collect())
            .collect();
        Self::new(powers, snr_max, gains)
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    #[inline]
    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gains[from * self.len() + to]
    }

    pub fn with_powers(&self, powers: &[f64]) -> Self {
        Self {
            powers: powers.to_vec(),
            ..self.clone()
        }
    }

    /// Mean received powers at `target`'s receiver: (own signal, interferers).
    /// Interferers below the power floor are left out.
    fn received_means(&self, target: usize) -> (f64, Vec<f64>) {
        let own = self.powers[target] * self.gain(target, target);
        let intf = (0..self.len())
            .filter(|&k| k != target && self.powers[k] > POWER_FLOOR * self.snr_max[k])
            .map(|k| self.powers[k] * self.gain(k, target))
            .collect();
        (own, intf)
    }
}

/// Ergodic rate (bits/s) of member `target`.
pub fn ergodic_rate(group: &GroupChannel, target: usize, bandwidth: f64) -> Result<f64> {
    let (own, intf) = group.received_means(target);
    if own <= 0.0 {
        return Ok(0.0);
    }
    let without = log1p_moment(&intf)?;
    let mut full = intf;
    full.push(own);
    let with = log1p_moment(&full)?;
    let nats = (with - without).max(0.0);
    Ok(bandwidth / std::f64::consts::LN_2 * nats)
}

/// Ergodic rate of a single link with mean received SNR `mean_snr`.
pub fn single_link_rate(mean_snr: f64, bandwidth: f64) -> f64 {
    if mean_snr <= 0.0 {
        return 0.0;
    }
    bandwidth / std::f64::consts::LN_2 * exp_e1(1.0 / mean_snr)
}

/// Sample-mean estimate of the ergodic rate with its standard error.
pub fn monte_carlo_rate<R: Rng + ?Sized>(
    group: &GroupChannel,
    target: usize,
    bandwidth: f64,
    n_samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let n = n_samples.max(1);
    let means: Vec<f64> = (0..group.len())
        .map(|k| group.powers[k] * group.gain(k, target))
        .collect();
    let scale = bandwidth / std::f64::consts::LN_2;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (k, &m) in means.iter().enumerate() {
            let x: f64 = rng.sample::<f64, _>(Exp1) * m;
            if k == target {
                signal = x;
            } else {
                interference += x;
            }
        }
        let r = scale * (signal / (1.0 + interference)).ln_1p();
        let delta = r - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (r - mean);
    }
    let se = if n > 1 {
        (m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    (mean, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_e1_reference_values() {
        // exp(x) E1(x) at x = 1, 0.1, 10 (Abramowitz & Stegun tables).
        assert!((exp_e1(1.0) - 0.596_347_362_323_194_1).abs() < 1e-14);
        assert!((exp_e1(0.1) - 0.1_f64.exp() * 1.822_923_958_419_390_7).abs() < 1e-13);
        assert!((exp_e1(10.0) - 0.091_563_333_939_788_08).abs() < 1e-14);
        // Asymptotically 1/x; no overflow far beyond exp's range.
        let x = 1e6;
        assert!((exp_e1(x) * x - 1.0).abs() < 2e-6);
        assert!(exp_e1(1e300).is_finite());
        // Continuity across the series / continued fraction switch.
        assert!((exp_e1(1.0 - 1e-12) - exp_e1(1.0 + 1e-12)).abs() < 1e-11);
    }

    #[test]
    fn single_exponential_mixture() {
        let mix = hypoexp_pdf_mixture(&[1.0]).unwrap();
        assert_eq!(
            mix,
            vec![MixtureTerm {
                coefficient: 1.0,
                rate: 1.0
            }]
        );
    }

    #[test]
    fn two_rate_mixture_coefficients() {
        let mix = hypoexp_pdf_mixture(&[1.0, 0.5]).unwrap();
        assert!((mix[0].coefficient - 2.0).abs() < 1e-15);
        assert!((mix[1].coefficient + 2.0).abs() < 1e-15);
        let norm: f64 = mix.iter().map(|t| t.coefficient / t.rate).sum();
        assert!((norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rates_rejected_then_perturbed() {
        assert!(matches!(
            hypoexp_pdf_mixture(&[2.0, 2.0]),
            Err(Error::DegenerateRates(..))
        ));
        let mix = hypoexp_pdf_mixture_perturbed(&[2.0, 2.0]);
        let norm: f64 = mix.iter().map(|t| t.coefficient / t.rate).sum();
        assert!((norm - 1.0).abs() < 1e-6);
        // Erlang(2, mean 2): E[ln(1+S)] by quadrature must agree with the
        // perturbed closed form and the routed value.
        let q = log1p_moment_quadrature(&[2.0, 2.0]);
        assert!((mixture_log1p_nats(&mix) - q).abs() < 1e-6 * q);
        assert!((log1p_moment(&[2.0, 2.0]).unwrap() - q).abs() < 1e-6 * q);
    }

    #[test]
    fn triple_coincidence_routes_to_quadrature() {
        let means = [0.7, 0.7, 0.7];
        let v = log1p_moment(&means).unwrap();
        let direct = log1p_moment_quadrature(&means);
        assert!((v - direct).abs() < 1e-10);
        // Nearby distinct means give nearly the same answer.
        let near = log1p_moment(&[0.7, 0.71, 0.69]).unwrap();
        assert!((near - v).abs() < 1e-2 * v);
    }

    #[test]
    fn unit_mean_rate() {
        let r = expected_log_rate(
            &[MixtureTerm {
                coefficient: 1.0,
                rate: 1.0,
            }],
            1.0,
        );
        assert!((r - 0.596_347_362_323_194_1 / std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn zero_power_limit() {
        let r = expected_log_rate(
            &[MixtureTerm {
                coefficient: 1e12,
                rate: 1e12,
            }],
            1.0,
        );
        assert!(r < 1e-11);
        assert_eq!(single_link_rate(0.0, 1e6), 0.0);
    }

    #[test]
    fn zero_powers_give_zero_rate() {
        let g = GroupChannel::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.1], vec![0.1, 1.0]],
        )
        .unwrap();
        assert_eq!(ergodic_rate(&g, 0, 1e6).unwrap(), 0.0);
        assert_eq!(ergodic_rate(&g, 1, 1e6).unwrap(), 0.0);
    }

    #[test]
    fn weak_interferer_is_dropped() {
        let g = GroupChannel::new(
            vec![100.0, 1e-13],
            vec![100.0, 100.0],
            vec![vec![1.0, 1.0], vec![1e6, 1.0]],
        )
        .unwrap();
        let alone = single_link_rate(100.0, 1.0);
        assert!((ergodic_rate(&g, 0, 1.0).unwrap() - alone).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_box_power() {
        assert!(GroupChannel::new(vec![2.0], vec![1.0], vec![vec![1.0]]).is_err());
        assert!(GroupChannel::new(vec![1.0], vec![1.0], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn monte_carlo_single_draw_is_reproducible() {
        let g = GroupChannel::new(vec![5.0], vec![5.0], vec![vec![0.3]]).unwrap();
        let a = monte_carlo_rate(&g, 0, 1.0, 1, &mut ChaCha8Rng::seed_from_u64(9));
        let b = monte_carlo_rate(&g, 0, 1.0, 1, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.1, 0.0);
    }
}
