//! Single-user (private, open) rate regions under separate and joint encoding.
//!
//! Expectations are sample averages over a fixed path of `(R1, R12)` pairs so
//! that separate and joint boundaries computed from the same [`PairSamples`]
//! share their sampling noise.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rates::{privacy_rate_pair, rate};
use crate::rng::{self, Stream};

/// Open rates within this distance of `Ê[R1]` are treated as the boundary point.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    Randomize,
    PreferPrivate,
    PreferOpen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub lambda: f64,
    pub tie_rule: TieRule,
}

impl ThresholdPolicy {
    pub fn new(lambda: f64, tie_rule: TieRule) -> Self {
        ThresholdPolicy { lambda, tie_rule }
    }

    /// Private-block indicator: `[R1 - R12]^+ / R1 > λ`.
    ///
    /// A block with no privacy rate is always open; this also settles `R1 = 0`.
    pub fn decide<R: Rng + ?Sized>(&self, r1: f64, r12: f64, rng: &mut R) -> bool {
        let rp = privacy_rate_pair(r1, r12);
        if rp <= 0.0 {
            return false;
        }
        let bar = self.lambda * r1;
        if rp > bar {
            true
        } else if rp < bar {
            false
        } else {
            match self.tie_rule {
                TieRule::PreferPrivate => true,
                TieRule::PreferOpen => false,
                TieRule::Randomize => rng.random_bool(0.5),
            }
        }
    }
}

pub fn separate_decide<R: Rng + ?Sized>(
    policy: &ThresholdPolicy,
    r1: f64,
    r12: f64,
    rng: &mut R,
) -> bool {
    policy.decide(r1, r12, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    pub open_rate: f64,
    pub priv_rate: f64,
}

/// A weighted path of `(R1, R12)` rate pairs.
#[derive(Debug, Clone)]
pub struct PairSamples {
    r1: Vec<f64>,
    r12: Vec<f64>,
    weights: Vec<f64>,
    tie_seed: u64,
}

impl PairSamples {
    /// `count` iid Rayleigh-fading pairs with the given mean power gains.
    pub fn rayleigh(
        mean_h1: f64,
        mean_h12: f64,
        power: f64,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(mean_h1 > 0.0 && mean_h12 > 0.0) {
            return Err(Error::config("mean gain", "means must be > 0"));
        }
        if count == 0 {
            return Err(Error::config("samples", "need at least one sample"));
        }
        let mut s = rng::stream(seed, rng::SAMPLE_PATH, 0);
        let mut r1 = Vec::with_capacity(count);
        let mut r12 = Vec::with_capacity(count);
        for _ in 0..count {
            r1.push(rate(rng::exponential(&mut s, mean_h1), power));
            r12.push(rate(rng::exponential(&mut s, mean_h12), power));
        }
        Ok(PairSamples {
            r1,
            r12,
            weights: vec![1.0 / count as f64; count],
            tie_seed: seed,
        })
    }

    /// Discrete distribution: rate pairs with probabilities (normalised here).
    pub fn weighted(r1: Vec<f64>, r12: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if r1.len() != r12.len() || r1.len() != weights.len() || r1.is_empty() {
            return Err(Error::config(
                "samples",
                "rate and weight vectors must be equal, non-empty",
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || r1.iter().chain(&r12).any(|&r| !(r >= 0.0)) {
            return Err(Error::config("samples", "rates and weights must be >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::config("samples", "weights sum to zero"));
        }
        Ok(PairSamples {
            r1,
            r12,
            weights: weights.into_iter().map(|w| w / total).collect(),
            tie_seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.r1
            .iter()
            .zip(&self.r12)
            .zip(&self.weights)
            .map(|((&a, &b), &w)| (a, b, w))
    }

    /// `Ê[R1]`.
    pub fn mean_r1(&self) -> f64 {
        self.pairs().map(|(r1, _, w)| w * r1).sum()
    }

    /// `Ê[R12^p]`.
    pub fn mean_priv(&self) -> f64 {
        self.pairs()
            .map(|(r1, r12, w)| w * privacy_rate_pair(r1, r12))
            .sum()
    }

    /// Open and private rates achieved by a separate-encoding threshold policy.
    pub fn evaluate(&self, policy: &ThresholdPolicy) -> RegionPoint {
        let mut ties: Stream = rng::stream(self.tie_seed, rng::TIES, 0);
        let mut open = 0.0;
        let mut private = 0.0;
        for (r1, r12, w) in self.pairs() {
            if policy.decide(r1, r12, &mut ties) {
                private += w * privacy_rate_pair(r1, r12);
            } else {
                open += w * r1;
            }
        }
        RegionPoint {
            open_rate: open,
            priv_rate: private,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparateSolution {
    pub policy: ThresholdPolicy,
    pub achieved: RegionPoint,
}

/// Bisects `λ ∈ [0, 1]` so that the separate-encoding open rate meets `alpha`.
///
/// The open rate is non-decreasing in `λ` on a fixed path. The returned policy
/// sits on the feasible side (open rate `≥ alpha`).
pub fn solve_lambda_star(
    alpha: f64,
    samples: &PairSamples,
    tie_rule: TieRule,
) -> Result<SeparateSolution> {
    if !(alpha >= 0.0) {
        return Err(Error::config("alpha", format!("must be >= 0, got {alpha}")));
    }
    let er1 = samples.mean_r1();
    if alpha > er1 + FEASIBILITY_SLACK {
        return Err(Error::Infeasible { alpha, max: er1 });
    }
    let at = |lambda: f64| {
        let policy = ThresholdPolicy::new(lambda, tie_rule);
        SeparateSolution {
            policy,
            achieved: samples.evaluate(&policy),
        }
    };
    if alpha >= er1 - FEASIBILITY_SLACK {
        let mut s = at(1.0);
        s.achieved.priv_rate = 0.0;
        s.achieved.open_rate = er1;
        return Ok(s);
    }
    let start = at(0.0);
    if start.achieved.open_rate >= alpha {
        return Ok(start);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = at(hi);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let s = at(mid);
        if s.achieved.open_rate >= alpha {
            hi = mid;
            best = s;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPoint {
    pub point: RegionPoint,
    /// Fraction of blocks carrying jointly encoded private and open data.
    pub p_private: f64,
}

/// Boundary point of the joint-encoding region at open rate `alpha`.
pub fn joint_region_point(alpha: f64, mean_r1: f64, mean_priv: f64) -> Result<JointPoint> {
    if !(alpha >= 0.0) {
        return Err(Error::config("alpha", format!("must be >= 0, got {alpha}")));
    }
    if alpha > mean_r1 + FEASIBILITY_SLACK {
        return Err(Error::Infeasible {
            alpha,
            max: mean_r1,
        });
    }
    let alpha = alpha.min(mean_r1);
    if alpha <= mean_r1 - mean_priv {
        return Ok(JointPoint {
            point: RegionPoint {
                open_rate: alpha,
                priv_rate: mean_priv,
            },
            p_private: 1.0,
        });
    }
    let p = if mean_priv > 0.0 {
        (mean_r1 - alpha) / mean_priv
    } else {
        0.0
    };
    Ok(JointPoint {
        point: RegionPoint {
            open_rate: alpha,
            priv_rate: mean_r1 - alpha,
        },
        p_private: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    Separate,
    Joint,
}

impl EncodingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EncodingMode::Separate => "separate",
            EncodingMode::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionRow {
    pub alpha: f64,
    pub point: RegionPoint,
    /// `λ*` for separate encoding, `p^p` for joint encoding.
    pub lambda_or_pp: f64,
    pub mode: EncodingMode,
}

/// `points` equally spaced open rates from 0 to `Ê[R1]`.
pub fn alpha_grid(samples: &PairSamples, points: usize) -> Vec<f64> {
    let er1 = samples.mean_r1();
    let steps = points.max(2) - 1;
    (0..=steps).map(|i| er1 * i as f64 / steps as f64).collect()
}

pub fn sweep_region(
    mode: EncodingMode,
    samples: &PairSamples,
    alphas: &[f64],
) -> Result<Vec<RegionRow>> {
    if alphas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("alpha grid", "must be sorted ascending"));
    }
    let er1 = samples.mean_r1();
    let erp = samples.mean_priv();
    alphas
        .par_iter()
        .map(|&alpha| match mode {
            EncodingMode::Separate => {
                let s = solve_lambda_star(alpha, samples, TieRule::default())?;
                Ok(RegionRow {
                    alpha,
                    point: RegionPoint {
                        open_rate: alpha,
                        priv_rate: s.achieved.priv_rate,
                    },
                    lambda_or_pp: s.policy.lambda,
                    mode,
                })
            }
            EncodingMode::Joint => {
                let j = joint_region_point(alpha, er1, erp)?;
                Ok(RegionRow {
                    alpha,
                    point: j.point,
                    lambda_or_pp: j.p_private,
                    mode,
                })
            }
        })
        .collect()
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn joint_contains_separate_and_boundaries_are_monotone(
            mean_h1 in 0.5..6.0f64, mean_h12 in 0.2..4.0f64, seed in any::<u64>(),
        ) {
            let samples = PairSamples::rayleigh(mean_h1, mean_h12, 1.0, 5_000, seed).unwrap();
            let grid = alpha_grid(&samples, 12);
            let sep = sweep_region(EncodingMode::Separate, &samples, &grid).unwrap();
            let joint = sweep_region(EncodingMode::Joint, &samples, &grid).unwrap();
            for (s, j) in sep.iter().zip(&joint) {
                prop_assert!(j.point.priv_rate >= s.point.priv_rate - 1e-3);
                prop_assert!(s.point.open_rate >= s.alpha - 1e-9);
                prop_assert!((j.point.open_rate - j.alpha).abs() < 1e-12);
            }
            for rows in [&sep, &joint] {
                for w in rows.windows(2) {
                    prop_assert!(w[1].point.priv_rate <= w[0].point.priv_rate + 1e-12);
                }
            }
        }
    }
}
