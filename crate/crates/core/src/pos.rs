//! Private opportunistic scheduling (POS).
//!
//! Node `j` guards against its best eavesdropper `i*(j)`, the node with the
//! largest mean cross rate `R̄_j^m`. Each block POS schedules
//! `argmax_j [R_j(k) - R̄_j^m]` when that maximum is positive and idles
//! otherwise. Node `j` then secures `p_j^M (R̄_j^M - R̄_j^m)`, where `p_j^M`
//! is its scheduling probability and `R̄_j^M` its mean uplink rate when
//! scheduled. Idle blocks count in the denominator of every average.

use rand::Rng;

use crate::channel::{eavesdroppers, ChannelConfig};
use crate::rates::rate;
use crate::rng::{self, Stream};
use crate::special::mean_log2_rate_exponential;

/// Best eavesdropper of one transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestEavesdropper {
    /// `None` when the node is alone.
    pub index: Option<usize>,
    /// `R̄_j^m`, zero when there is no eavesdropper.
    pub mean_rate: f64,
}

/// `i*(j)` and `R̄_j^m` for exponential gains, from the closed form
/// `E[log2(1 + P·h)] = e^{1/(Pμ)} E1(1/(Pμ)) / ln 2`. Ties go to the lowest index.
pub fn best_eavesdroppers(cfg: &ChannelConfig) -> Vec<BestEavesdropper> {
    best_by(cfg, |j, i| {
        mean_log2_rate_exponential(cfg.cross_mean(j, i), cfg.power)
    })
}

/// Monte Carlo variant over `draws` blocks of the configured channel.
pub fn best_eavesdroppers_mc(cfg: &ChannelConfig, draws: u64) -> Vec<BestEavesdropper> {
    let n = cfg.n;
    let mut sums = vec![0.0; n * n.saturating_sub(1)];
    for k in 0..draws {
        let b = crate::channel::sample_block(cfg, k);
        for (s, &h) in sums.iter_mut().zip(&b.h_cross) {
            *s += rate(h, cfg.power);
        }
    }
    let d = draws.max(1) as f64;
    best_by(cfg, |j, i| sums[crate::channel::pair_index(n, j, i)] / d)
}

fn best_by(cfg: &ChannelConfig, mean_rate: impl Fn(usize, usize) -> f64) -> Vec<BestEavesdropper> {
    (0..cfg.n)
        .map(|j| {
            let mut best = BestEavesdropper {
                index: None,
                mean_rate: 0.0,
            };
            for i in eavesdroppers(cfg.n, j) {
                let m = mean_rate(j, i);
                if best.index.is_none() || m > best.mean_rate {
                    best = BestEavesdropper {
                        index: Some(i),
                        mean_rate: m,
                    };
                }
            }
            best
        })
        .collect()
}

/// One POS decision: the node maximising `R_j - R̄_j^m`, or `None` if no score is positive.
/// Ties are broken uniformly at random.
pub fn pos_schedule<R: Rng + ?Sized>(up: &[f64], rbar_m: &[f64], rng: &mut R) -> Option<usize> {
    debug_assert_eq!(up.len(), rbar_m.len());
    let mut best = f64::NEG_INFINITY;
    let mut chosen = None;
    let mut ties = 0u32;
    for (j, (&r, &m)) in up.iter().zip(rbar_m).enumerate() {
        let score = r - m;
        if score > best {
            best = score;
            chosen = Some(j);
            ties = 1;
        } else if score == best {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                chosen = Some(j);
            }
        }
    }
    if best > 0.0 {
        chosen
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    RoundRobin,
    MaxUplink,
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::RoundRobin => "round_robin",
            Baseline::MaxUplink => "max_uplink",
        }
    }
}

/// Comparison schedulers. Round robin serves node `k mod n` in block `k`;
/// max-uplink serves the best uplink (lowest index on ties).
pub fn baseline_schedule(kind: Baseline, up: &[f64], k: u64) -> Option<usize> {
    if up.is_empty() {
        return None;
    }
    match kind {
        Baseline::RoundRobin => Some((k % up.len() as u64) as usize),
        Baseline::MaxUplink => {
            let mut best = 0;
            for (j, &r) in up.iter().enumerate() {
                if r > up[best] {
                    best = j;
                }
            }
            Some(best)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosProfile {
    pub best_eaves: Vec<Option<usize>>,
    /// `R̄_j^m`.
    pub rbar_m: Vec<f64>,
    /// `p_j^M`.
    pub p_m: Vec<f64>,
    /// `R̄_j^M = E[R_j | j scheduled]`.
    pub rbar_big_m: Vec<f64>,
    /// `p_j^M (R̄_j^M - R̄_j^m)`.
    pub priv_rates: Vec<f64>,
    /// Standard error of `Σ_j priv_rates` (per-block sample).
    pub sum_priv_se: f64,
    pub blocks: u64,
}

impl PosProfile {
    pub fn n(&self) -> usize {
        self.rbar_m.len()
    }

    pub fn sum_priv(&self) -> f64 {
        self.priv_rates.iter().sum()
    }

    pub fn idle_probability(&self) -> f64 {
        1.0 - self.p_m.iter().sum::<f64>()
    }
}

/// Draws only the uplink gains of block `k`; identical to the uplink part of
/// [`crate::channel::sample_block`].
pub(crate) fn uplink_rates(cfg: &ChannelConfig, k: u64, out: &mut Vec<f64>) {
    let mut s = rng::stream(cfg.seed, rng::UPLINK, k);
    out.clear();
    out.extend(
        cfg.uplink_means
            .iter()
            .map(|&m| rate(rng::exponential(&mut s, m), cfg.power)),
    );
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Simulates POS over `n_blocks` blocks and tallies the per-node rates.
pub fn pos_rates(cfg: &ChannelConfig, n_blocks: u64) -> PosProfile {
    let eaves = best_eavesdroppers(cfg);
    let rbar_m: Vec<f64> = eaves.iter().map(|e| e.mean_rate).collect();
    let n = cfg.n;
    let mut ties: Stream = rng::stream(cfg.seed, rng::TIES, 0);
    let mut count = vec![0u64; n];
    let mut rate_sum = vec![0.0; n];
    let mut per_block = Moments::default();
    let mut up = Vec::with_capacity(n);
    for k in 0..n_blocks {
        uplink_rates(cfg, k, &mut up);
        match pos_schedule(&up, &rbar_m, &mut ties) {
            Some(j) => {
                count[j] += 1;
                rate_sum[j] += up[j];
                per_block.push(up[j] - rbar_m[j]);
            }
            None => per_block.push(0.0),
        }
    }
    let total = n_blocks.max(1) as f64;
    let p_m: Vec<f64> = count.iter().map(|&c| c as f64 / total).collect();
    let rbar_big_m: Vec<f64> = count
        .iter()
        .zip(&rate_sum)
        .map(|(&c, &s)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let priv_rates = p_m
        .iter()
        .zip(&rbar_big_m)
        .zip(&rbar_m)
        .map(|((&p, &big), &m)| (p * (big - m)).max(0.0))
        .collect();
    PosProfile {
        best_eaves: eaves.iter().map(|e| e.index).collect(),
        rbar_m,
        p_m,
        rbar_big_m,
        priv_rates,
        sum_priv_se: per_block.std_error(),
        blocks: n_blocks,
    }
}

/// Outer bound of the achievable (sum open, sum private) region:
/// `open + priv ≤ r_opp` and `priv ≤ r_priv_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateBound {
    /// `E[max_j R_j]`: opportunistic scheduling without privacy.
    pub r_opp: f64,
    /// POS sum private rate.
    pub r_priv_max: f64,
    pub n: usize,
}

impl SumRateBound {
    /// Corner of the two constraints: `(r_opp - r_priv_max, r_priv_max)`.
    pub fn corner(&self) -> (f64, f64) {
        (self.r_opp - self.r_priv_max, self.r_priv_max)
    }

    /// Boundary polyline from `(0, r_priv_max)` via the corner to `(r_opp, 0)`.
    pub fn boundary(&self) -> [(f64, f64); 3] {
        let (co, cp) = self.corner();
        [(0.0, self.r_priv_max), (co, cp), (self.r_opp, 0.0)]
    }
}

pub fn sum_rate_outer_bound(cfg: &ChannelConfig, n_blocks: u64) -> (SumRateBound, PosProfile) {
    let profile = pos_rates(cfg, n_blocks);
    let mut up = Vec::with_capacity(cfg.n);
    let mut opp = 0.0;
    for k in 0..n_blocks {
        uplink_rates(cfg, k, &mut up);
        opp += up.iter().copied().fold(0.0, f64::max);
    }
    let bound = SumRateBound {
        r_opp: opp / n_blocks.max(1) as f64,
        r_priv_max: profile.sum_priv(),
        n: cfg.n,
    };
    (bound, profile)
}

/// Sum private rate of a scheduler, scored with the POS functional
/// `Σ_j max(0, p_j (E[R_j | j scheduled] - R̄_j^m))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerScore {
    pub sum_priv: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerComparison {
    pub pos: SchedulerScore,
    pub baselines: Vec<(Baseline, SchedulerScore)>,
}

impl SchedulerComparison {
    /// `(baseline - pos) / sqrt(se_pos² + se_base²)` for each baseline.
    pub fn excess_in_std_errors(&self) -> Vec<(Baseline, f64)> {
        self.baselines
            .iter()
            .map(|(b, s)| {
                let se = (self.pos.std_error.powi(2) + s.std_error.powi(2)).sqrt();
                (
                    *b,
                    (s.sum_priv - self.pos.sum_priv) / se.max(f64::MIN_POSITIVE),
                )
            })
            .collect()
    }
}

/// Scores POS and the baselines on one shared sample path.
pub fn compare_schedulers(
    cfg: &ChannelConfig,
    n_blocks: u64,
    baselines: &[Baseline],
) -> SchedulerComparison {
    let rbar_m: Vec<f64> = best_eavesdroppers(cfg)
        .iter()
        .map(|e| e.mean_rate)
        .collect();
    let n = cfg.n;
    let mut ties: Stream = rng::stream(cfg.seed, rng::TIES, 0);
    let kinds: Vec<Option<Baseline>> = std::iter::once(None)
        .chain(baselines.iter().copied().map(Some))
        .collect();
    let mut sums = vec![vec![0.0; n]; kinds.len()];
    let mut moments = vec![Moments::default(); kinds.len()];
    let mut up = Vec::with_capacity(n);
    for k in 0..n_blocks {
        uplink_rates(cfg, k, &mut up);
        for (s, kind) in kinds.iter().enumerate() {
            let pick = match kind {
                None => pos_schedule(&up, &rbar_m, &mut ties),
                Some(b) => baseline_schedule(*b, &up, k),
            };
            let gain = pick.map_or(0.0, |j| up[j] - rbar_m[j]);
            if let Some(j) = pick {
                sums[s][j] += gain;
            }
            moments[s].push(gain);
        }
    }
    let total = n_blocks.max(1) as f64;
    let mut scores = sums
        .iter()
        .zip(&moments)
        .map(|(per_node, m)| SchedulerScore {
            sum_priv: per_node.iter().map(|&s| (s / total).max(0.0)).sum(),
            std_error: m.std_error(),
        });
    let pos = scores.next().expect("pos score");
    SchedulerComparison {
        pos,
        baselines: baselines.iter().copied().zip(scores).collect(),
    }
}
