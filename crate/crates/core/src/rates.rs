//! Gains to rates, wiretap privacy rates, and privacy-outage margins.
//!
//! Rates are `log2(1 + P·h)` bits per channel use. Under imperfect CSI the
//! true cross gain given its estimate `ĥ` has an exponential prior (mean `μ`)
//! and Gaussian likelihood `N(ĥ; h, σ²)`; completing the square gives a
//! `Normal(ĥ - σ²/μ, σ²)` truncated to `h ≥ 0`. With `m = ĥ - σ²/μ` and
//! `Q(z) = erfc(z/√2)/2`, its survival function is
//!
//! ```text
//! P(h > x | ĥ) = Q((x - m)/σ) / Q(-m/σ),   x ≥ 0
//! ```
//!
//! and the outage probability at margin `ρ` is `1 - Π_i (1 - P(h_i > g(ρ)))`
//! with `g(ρ) = (2^ρ - 1)/P`.

use crate::channel::{eavesdroppers, pair_index, ChannelBlock};
use crate::error::{Error, Result};
use crate::special::{ln_normal_sf, normal_sf};

/// Tolerance of the margin bisection, in bits per channel use.
pub const MARGIN_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn rate(h: f64, power: f64) -> f64 {
    (power * h).ln_1p() / std::f64::consts::LN_2
}

/// `log2(1 + P·h)`.
pub fn rate_of_gain(h: f64, power: f64) -> Result<f64> {
    if h < 0.0 || h.is_nan() {
        return Err(Error::Domain(format!("power gain must be >= 0, got {h}")));
    }
    Ok(rate(h, power))
}

/// Gain threshold whose rate is `rho`: `(2^ρ - 1)/P`.
#[inline]
pub fn gain_threshold(rho: f64, power: f64) -> f64 {
    (rho.exp2() - 1.0) / power
}

/// `[R_j - R_ji]^+`.
#[inline]
pub fn privacy_rate_pair(r_j: f64, r_ji: f64) -> f64 {
    (r_j - r_ji).max(0.0)
}

/// Instantaneous rates of one block, computed from the true gains.
#[derive(Debug, Clone, PartialEq)]
pub struct RateView {
    pub up: Vec<f64>,
    /// `R_ji`, laid out by [`pair_index`].
    pub cross: Vec<f64>,
    /// `R_ji^p = [R_j - R_ji]^+`.
    pub priv_pair: Vec<f64>,
    /// `max_{i≠j} R_ji`; zero when there are no eavesdroppers.
    pub max_cross: Vec<f64>,
    /// `R_j^p = min_{i≠j} R_ji^p`; equals `R_j` for a single node.
    pub priv_worst: Vec<f64>,
}

impl RateView {
    pub fn n(&self) -> usize {
        self.up.len()
    }

    pub fn priv_pair_of(&self, j: usize, i: usize) -> f64 {
        self.priv_pair[pair_index(self.n(), j, i)]
    }
}

pub fn rate_view(block: &ChannelBlock, power: f64) -> RateView {
    let n = block.n();
    let up: Vec<f64> = block.h_up.iter().map(|&h| rate(h, power)).collect();
    let cross: Vec<f64> = block.h_cross.iter().map(|&h| rate(h, power)).collect();
    let mut priv_pair = Vec::with_capacity(cross.len());
    let mut max_cross = vec![0.0; n];
    let mut priv_worst = up.clone();
    for j in 0..n {
        for i in eavesdroppers(n, j) {
            let r_ji = cross[pair_index(n, j, i)];
            let p = privacy_rate_pair(up[j], r_ji);
            priv_pair.push(p);
            max_cross[j] = f64::max(max_cross[j], r_ji);
            priv_worst[j] = priv_worst[j].min(p);
        }
    }
    RateView {
        up,
        cross,
        priv_pair,
        max_cross,
        priv_worst,
    }
}

/// A law for a cross gain that knows its own survival function.
pub trait GainLaw {
    /// `ln P(h > x)`.
    fn ln_sf(&self, x: f64) -> f64;
    /// A gain beyond which little mass remains; seeds the margin bracket.
    fn upper_hint(&self) -> f64;
    /// `ln P(h ≤ x)`.
    fn ln_cdf(&self, x: f64) -> f64 {
        (-self.ln_sf(x).exp()).ln_1p()
    }
}

/// Normal(loc, scale²) truncated to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorParams {
    pub loc: f64,
    pub scale: f64,
}

impl PosteriorParams {
    pub fn cdf(&self, x: f64) -> f64 {
        -self.ln_sf(x).exp_m1()
    }

    pub fn mean(&self) -> f64 {
        let alpha = -self.loc / self.scale;
        let ln_pdf = -0.5 * alpha * alpha - 0.5 * (2.0 * std::f64::consts::PI).ln();
        self.loc + self.scale * (ln_pdf - ln_normal_sf(alpha)).exp()
    }
}

impl GainLaw for PosteriorParams {
    fn ln_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z0 = -self.loc / self.scale;
        let z = (x - self.loc) / self.scale;
        (ln_normal_sf(z) - ln_normal_sf(z0)).min(0.0)
    }

    fn upper_hint(&self) -> f64 {
        self.loc.max(0.0) + 10.0 * self.scale
    }
}

/// [`PosteriorParams`] with the truncation constant `ln Q(-loc/scale)`
/// precomputed, for repeated survival evaluations at one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedPosterior {
    loc: f64,
    scale: f64,
    ln_norm: f64,
    norm: f64,
}

impl From<PosteriorParams> for PreparedPosterior {
    fn from(p: PosteriorParams) -> Self {
        PreparedPosterior {
            loc: p.loc,
            scale: p.scale,
            ln_norm: ln_normal_sf(-p.loc / p.scale),
            norm: normal_sf(-p.loc / p.scale),
        }
    }
}

impl GainLaw for PreparedPosterior {
    fn ln_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (ln_normal_sf((x - self.loc) / self.scale) - self.ln_norm).min(0.0)
    }

    fn ln_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.norm < 1e-280 {
            return (-self.ln_sf(x).exp()).ln_1p();
        }
        (-(normal_sf((x - self.loc) / self.scale) / self.norm).min(1.0)).ln_1p()
    }

    fn upper_hint(&self) -> f64 {
        self.loc.max(0.0) + 10.0 * self.scale
    }
}

/// Exponential prior of a cross gain, used when only mean gains are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialPrior {
    pub mean: f64,
}

impl GainLaw for ExponentialPrior {
    fn ln_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -x / self.mean
        }
    }

    fn upper_hint(&self) -> f64 {
        10.0 * self.mean
    }
}

/// Posterior of a true gain given its estimate, under an exponential prior.
///
/// Returns [`Error::DegeneratePosterior`] for `sigma = 0`; the posterior is
/// then the point mass at `max(ĥ, 0)`.
pub fn posterior_of_gain(h_est: f64, sigma: f64, prior_mean: f64) -> Result<PosteriorParams> {
    if sigma == 0.0 {
        return Err(Error::DegeneratePosterior);
    }
    if !(sigma > 0.0) || !(prior_mean > 0.0) {
        return Err(Error::Domain(format!(
            "posterior needs sigma > 0 and prior mean > 0 (got {sigma}, {prior_mean})"
        )));
    }
    Ok(PosteriorParams {
        loc: h_est - sigma * sigma / prior_mean,
        scale: sigma,
    })
}

/// `P(max_i R_ji > ρ)` for independent cross gains with the given laws.
pub fn outage_probability<L: GainLaw>(rho: f64, laws: &[L], power: f64) -> f64 {
    let g = gain_threshold(rho, power);
    let ln_all_below: f64 = laws.iter().map(|l| l.ln_cdf(g)).sum();
    -ln_all_below.exp_m1()
}

/// Whether `outage_probability(ρ) > γ`, i.e. the margin at level `γ` lies above `ρ`.
pub fn outage_exceeds<L: GainLaw>(rho: f64, laws: &[L], gamma: f64, power: f64) -> bool {
    let g = gain_threshold(rho, power);
    laws.iter().map(|l| l.ln_cdf(g)).sum::<f64>() < (-gamma).ln_1p()
}

/// Smallest `ρ ≥ 0` with `outage_probability(ρ) ≤ γ`, to within [`MARGIN_TOL`].
pub fn outage_margin<L: GainLaw>(laws: &[L], gamma: f64, power: f64) -> Result<f64> {
    if gamma.is_nan() || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(
            "gamma",
            format!("must lie in [0, 1], got {gamma}"),
        ));
    }
    if gamma == 0.0 {
        return Err(Error::NoFiniteMargin);
    }
    if laws.is_empty() || gamma >= 1.0 {
        return Ok(0.0);
    }
    // f(ρ) = ln P(no eavesdropper above ρ) − ln(1 − γ): increasing, root at the margin
    let target = (-gamma).ln_1p();
    let f = |rho: f64| -> f64 {
        let g = gain_threshold(rho, power);
        laws.iter().map(|l| l.ln_cdf(g)).sum::<f64>() - target
    };
    let mut lo = 0.0;
    let mut f_lo = f(lo);
    if f_lo >= 0.0 {
        return Ok(0.0);
    }
    let hint = laws.iter().map(GainLaw::upper_hint).fold(0.0, f64::max);
    let mut hi = rate(hint, power).max(MARGIN_TOL);
    let mut f_hi = f(hi);
    while f_hi < 0.0 {
        (lo, f_lo) = (hi, f_hi);
        hi *= 2.0;
        f_hi = f(hi);
    }
    Ok(bracketed_root(f, (lo, f_lo), (hi, f_hi), MARGIN_TOL))
}

/// Smallest point of `[lo, hi]` (to within `tol`) where the increasing `f`
/// turns non-negative, given `f(lo) < 0 ≤ f(hi)`. Illinois steps, with a
/// bisection whenever the bracket fails to halve.
fn bracketed_root<F: Fn(f64) -> f64>(
    f: F,
    (mut lo, mut f_lo): (f64, f64),
    (mut hi, mut f_hi): (f64, f64),
    tol: f64,
) -> f64 {
    let mut last_side = 0i8;
    let mut width_before = hi - lo;
    let mut steps = 0u32;
    while hi - lo > tol {
        steps += 1;
        let stalled = steps.is_multiple_of(3) && hi - lo > 0.5 * width_before;
        let mut x = if stalled || !f_lo.is_finite() || !f_hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            hi - f_hi * (hi - lo) / (f_hi - f_lo)
        };
        if steps.is_multiple_of(3) {
            width_before = hi - lo;
        }
        // keep the probe at least tol/2 inside so the bracket can collapse
        let pad = 0.5 * tol;
        x = x.clamp(lo + pad, hi - pad);
        if !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx < 0.0 {
            (lo, f_lo) = (x, fx);
            if last_side == -1 {
                f_hi *= 0.5;
            }
            last_side = -1;
        } else {
            (hi, f_hi) = (x, fx);
            if last_side == 1 {
                f_lo *= 0.5;
            }
            last_side = 1;
        }
    }
    hi
}

/// One noisy cross-gain observation together with what is known about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEstimate {
    pub h_est: f64,
    pub sigma: f64,
    pub prior_mean: f64,
}

/// Margin from raw estimates. A zero `sigma` means the estimates are exact,
/// so the margin is the largest estimated cross rate.
pub fn outage_margin_from_estimates(
    estimates: &[CrossEstimate],
    gamma: f64,
    power: f64,
) -> Result<f64> {
    let mut posts = Vec::with_capacity(estimates.len());
    let mut exact = 0.0f64;
    for e in estimates {
        match posterior_of_gain(e.h_est, e.sigma, e.prior_mean) {
            Ok(p) => posts.push(p),
            Err(Error::DegeneratePosterior) => exact = exact.max(rate(e.h_est.max(0.0), power)),
            Err(err) => return Err(err),
        }
    }
    if posts.is_empty() {
        return Ok(exact);
    }
    Ok(outage_margin(&posts, gamma, power)?.max(exact))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert_eq!(rate_of_gain(0.0, 1.0).unwrap(), 0.0);
        assert!((rate_of_gain(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((rate_of_gain(3.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(rate_of_gain(-0.1, 1.0).is_err());
    }

    #[test]
    fn privacy_pair_examples() {
        assert_eq!(privacy_rate_pair(2.0, 0.5), 1.5);
        assert_eq!(privacy_rate_pair(1.0, 2.0), 0.0);
        assert_eq!(privacy_rate_pair(1.3, 1.3), 0.0);
    }

    fn block(h_up: Vec<f64>, h_cross: Vec<f64>) -> ChannelBlock {
        ChannelBlock {
            k: 0,
            h_up,
            h_cross_est: h_cross.clone(),
            h_cross,
        }
    }

    #[test]
    fn rate_view_two_nodes() {
        // h_12 = 0, h_21 = 1
        let v = rate_view(&block(vec![1.0, 3.0], vec![0.0, 1.0]), 1.0);
        assert!((v.priv_worst[0] - 1.0).abs() < 1e-15);
        assert!((v.priv_worst[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rate_view_clamps_and_single_node() {
        let v = rate_view(&block(vec![1.0, 1.0, 1.0], vec![2.0; 6]), 1.0);
        assert!(v.priv_worst.iter().all(|&p| p == 0.0));
        let v1 = rate_view(&block(vec![3.0], vec![]), 1.0);
        assert_eq!(v1.priv_worst, v1.up);
    }

    #[test]
    fn posterior_location() {
        let p = posterior_of_gain(1.0, 0.5, 0.5).unwrap();
        assert!((p.loc - 0.5).abs() < 1e-15);
        assert_eq!(p.scale, 0.5);
        assert_eq!(
            posterior_of_gain(1.0, 0.0, 0.5),
            Err(Error::DegeneratePosterior)
        );
    }

    #[test]
    fn outage_limits() {
        let p = [PosteriorParams {
            loc: 0.5,
            scale: 0.5,
        }];
        assert_eq!(outage_probability(0.0, &p, 1.0), 1.0);
        assert!(outage_probability(30.0, &p, 1.0) < 1e-12);
    }

    #[test]
    fn margin_edge_cases() {
        let p = [PosteriorParams {
            loc: 0.5,
            scale: 0.5,
        }];
        assert_eq!(outage_margin(&p, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(outage_margin(&p, 0.0, 1.0), Err(Error::NoFiniteMargin));
        assert!(outage_margin(&p, 1.5, 1.0).is_err());
    }

    #[test]
    fn margin_point_mass_limit() {
        let est = [CrossEstimate {
            h_est: 1.0,
            sigma: 0.0,
            prior_mean: 1.0,
        }];
        for gamma in [0.01, 0.1, 0.5, 0.9] {
            assert!((outage_margin_from_estimates(&est, gamma, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        // and the σ → 0⁺ limit approaches it
        let tiny = [CrossEstimate {
            h_est: 1.0,
            sigma: 1e-6,
            prior_mean: 1.0,
        }];
        assert!((outage_margin_from_estimates(&tiny, 0.1, 1.0).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exponential_prior_margin_closed_form() {
        // single eavesdropper: e^{-g/μ} = γ  ⇒  g = μ ln(1/γ)
        let law = [ExponentialPrior { mean: 0.8 }];
        let rho = outage_margin(&law, 0.1, 1.0).unwrap();
        let expected = rate(0.8 * 10f64.ln(), 1.0);
        assert!((rho - expected).abs() < 2e-9);
    }

    #[test]
    fn very_negative_estimate_stays_finite() {
        let p = posterior_of_gain(-10.0, 0.5, 0.01).unwrap();
        let rho = outage_margin(&[p], 0.1, 1.0).unwrap();
        assert!(rho.is_finite() && rho >= 0.0);
        let a: f64 = 70.0;
        let asymptotic = 0.5 * (1.0 / a - 2.0 / a.powi(3));
        assert!((p.mean() - asymptotic).abs() < 1e-6, "{}", p.mean());
    }
}
