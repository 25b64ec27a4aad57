//! iid block-fading channel states and their noisy cross-gain estimates.
//!
//! Power gains are exponential (Rayleigh amplitudes), drawn by the inverse
//! CDF `h = -μ·ln(1-u)` with `u` uniform on `[0, 1)`. Cross-gain estimates add
//! `N(0, σ²)` noise to the true gain; uplink gains are known exactly.
//!
//! Per block `k` the uplink gains, cross gains and estimation noise come from
//! three independent sub-streams keyed by `(seed, label, k)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Closed interval `[lo, hi]` of prior means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let iv = Interval { lo, hi };
        iv.validate("interval")?;
        Ok(iv)
    }

    pub(crate) fn validate(&self, key: &'static str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::config(key, "bounds must be finite"));
        }
        if self.lo < 0.0 || self.hi < self.lo {
            return Err(Error::config(
                key,
                format!("need 0 <= lo <= hi, got [{}, {}]", self.lo, self.hi),
            ));
        }
        if self.hi == 0.0 {
            return Err(Error::config(
                key,
                "interval [0, 0] only contains a zero mean",
            ));
        }
        Ok(())
    }

    /// Uniform draw; an exact zero is redrawn.
    fn draw(&self, rng: &mut Stream) -> f64 {
        loop {
            let u: f64 = rng.random();
            let x = self.lo + (self.hi - self.lo) * u;
            if x > 0.0 {
                return x;
            }
        }
    }
}

/// Index of the ordered pair `(j, i)`, `i ≠ j`, in a row-major `n × (n-1)` layout.
#[inline]
pub fn pair_index(n: usize, j: usize, i: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    j * (n - 1) + if i < j { i } else { i - 1 }
}

/// Eavesdropper indices of transmitter `j` in the order used by [`pair_index`].
pub fn eavesdroppers(n: usize, j: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&i| i != j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub n: usize,
    /// Noise-normalised transmit power.
    pub power: f64,
    pub uplink_means: Vec<f64>,
    /// Mean gain of every ordered pair `(j, i)`, laid out by [`pair_index`].
    pub cross_means: Vec<f64>,
    /// Standard deviation of the cross-gain estimation error.
    pub sigma: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(
        n: usize,
        power: f64,
        uplink_means: Vec<f64>,
        cross_means: Vec<f64>,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = ChannelConfig {
            n,
            power,
            uplink_means,
            cross_means,
            sigma,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same mean for every uplink and every cross channel.
    pub fn homogeneous(
        n: usize,
        power: f64,
        uplink_mean: f64,
        cross_mean: f64,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(
            n,
            power,
            vec![uplink_mean; n],
            vec![cross_mean; n * n.saturating_sub(1)],
            sigma,
            seed,
        )
    }

    /// Means drawn uniformly from the given intervals using the `priors` sub-stream of `seed`.
    pub fn with_uniform_priors(
        n: usize,
        power: f64,
        uplink: Interval,
        cross: Interval,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng::stream(seed, rng::PRIORS, n as u64);
        let (up, cr) = sample_priors_uniform(n, uplink, cross, &mut rng)?;
        Self::new(n, power, up, cr, sigma, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "need at least one node"));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::config(
                "P",
                format!("power must be > 0, got {}", self.power),
            ));
        }
        if self.uplink_means.len() != self.n {
            return Err(Error::config(
                "uplink_means",
                format!(
                    "expected {} values, got {}",
                    self.n,
                    self.uplink_means.len()
                ),
            ));
        }
        if self
            .uplink_means
            .iter()
            .any(|&m| !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::config("uplink_means", "all means must be > 0"));
        }
        let pairs = self.n * (self.n - 1);
        if self.cross_means.len() != pairs {
            return Err(Error::config(
                "cross_means",
                format!("expected {pairs} values, got {}", self.cross_means.len()),
            ));
        }
        if self
            .cross_means
            .iter()
            .any(|&m| !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::config("cross_means", "all means must be > 0"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(
                "sigma",
                format!("must be >= 0, got {}", self.sigma),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn cross_mean(&self, j: usize, i: usize) -> f64 {
        self.cross_means[pair_index(self.n, j, i)]
    }
}

/// Draws per-node uplink means and per-pair cross means uniformly from the intervals.
pub fn sample_priors_uniform(
    n: usize,
    uplink: Interval,
    cross: Interval,
    rng: &mut Stream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    uplink.validate("uplink_interval")?;
    cross.validate("cross_interval")?;
    let up = (0..n).map(|_| uplink.draw(rng)).collect();
    let cr = (0..n * n.saturating_sub(1))
        .map(|_| cross.draw(rng))
        .collect();
    Ok((up, cr))
}

/// One block's realised gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    pub k: u64,
    pub h_up: Vec<f64>,
    pub h_cross: Vec<f64>,
    /// `h_cross + e`, `e ~ N(0, σ²)`; may be negative.
    pub h_cross_est: Vec<f64>,
}

impl ChannelBlock {
    pub fn n(&self) -> usize {
        self.h_up.len()
    }

    #[inline]
    pub fn cross(&self, j: usize, i: usize) -> f64 {
        self.h_cross[pair_index(self.n(), j, i)]
    }

    #[inline]
    pub fn cross_est(&self, j: usize, i: usize) -> f64 {
        self.h_cross_est[pair_index(self.n(), j, i)]
    }
}

/// Samples block `k`. Deterministic in `(cfg.seed, k)`.
pub fn sample_block(cfg: &ChannelConfig, k: u64) -> ChannelBlock {
    let mut up_rng = rng::stream(cfg.seed, rng::UPLINK, k);
    let h_up = cfg
        .uplink_means
        .iter()
        .map(|&m| rng::exponential(&mut up_rng, m))
        .collect();

    let mut cross_rng = rng::stream(cfg.seed, rng::CROSS, k);
    let h_cross: Vec<f64> = cfg
        .cross_means
        .iter()
        .map(|&m| rng::exponential(&mut cross_rng, m))
        .collect();

    let h_cross_est = if cfg.sigma > 0.0 {
        let mut noise_rng = rng::stream(cfg.seed, rng::NOISE, k);
        h_cross
            .iter()
            .map(|&h| {
                let e: f64 = noise_rng.sample(StandardNormal);
                h + cfg.sigma * e
            })
            .collect()
    } else {
        h_cross.clone()
    };

    ChannelBlock {
        k,
        h_up,
        h_cross,
        h_cross_est,
    }
}
