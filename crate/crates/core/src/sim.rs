//! Block-by-block Monte Carlo of the dynamic control algorithm, parameter
//! sweeps, and the side-by-side comparison with POS.
//!
//! Each block: sample the channel, run flow control at every node, compute
//! margins for the CSI mode, schedule by max-weight, resolve outage against
//! the true gains, then update queues and tallies. Averages cover the blocks
//! after the warmup; every block (warmup included) feeds the drift audit.

use rayon::prelude::*;

use crate::channel::{
    eavesdroppers, pair_index, sample_block, ChannelBlock, ChannelConfig, Interval,
};
use crate::control::{
    flow_control_outage, flow_control_perfect, resolve_outage, schedule_max_weight,
    schedule_max_weight_lazy, step, Admission, Decision, DriftAudit, DriftReport, MarginSource,
    Mode, NodeQueues, UtilitySpec,
};
use crate::error::{Error, Result};
use crate::pos::pos_rates;
use crate::rates::{
    outage_exceeds, outage_margin, posterior_of_gain, rate_view, ExponentialPrior,
    PreparedPosterior,
};

/// What the transmitters know about their cross channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsiMode {
    /// Exact instantaneous cross gains.
    #[default]
    Perfect,
    /// Noisy estimates with a Bayesian posterior per block.
    Imperfect,
    /// Prior means only; margins are fixed per node.
    MeanOnly,
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Imperfect => "imperfect",
            CsiMode::MeanOnly => "mean_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "perfect" => Some(CsiMode::Perfect),
            "imperfect" => Some(CsiMode::Imperfect),
            "mean_only" | "mean-only" => Some(CsiMode::MeanOnly),
            _ => None,
        }
    }
}

/// Prior intervals the channel means were drawn from; needed to resample
/// channels when sweeping the node count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorIntervals {
    pub uplink: Interval,
    pub cross: Interval,
}

pub const DEFAULT_HORIZON: u64 = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelConfig,
    pub util: UtilitySpec,
    pub v: f64,
    pub gamma: f64,
    pub csi: CsiMode,
    pub horizon: u64,
    pub warmup: u64,
    pub priors: Option<PriorIntervals>,
}

impl RunConfig {
    /// Ten nodes, uplink means in `[2, 8]`, cross means in `[0, 1]`, `P = 1`,
    /// `κ = 5`, `γ = 0.1`, `σ = 0.5`.
    pub fn reference(seed: u64) -> Self {
        let priors = PriorIntervals {
            uplink: Interval { lo: 2.0, hi: 8.0 },
            cross: Interval { lo: 0.0, hi: 1.0 },
        };
        let channel =
            ChannelConfig::with_uniform_priors(10, 1.0, priors.uplink, priors.cross, 0.5, seed)
                .expect("reference priors are valid");
        RunConfig {
            channel,
            util: UtilitySpec::default(),
            v: 50.0,
            gamma: 0.1,
            csi: CsiMode::Perfect,
            horizon: DEFAULT_HORIZON,
            warmup: DEFAULT_HORIZON / 10,
            priors: Some(priors),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::config("V", format!("must be > 0, got {}", self.v)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(
                "gamma",
                format!("must lie in [0, 1), got {}", self.gamma),
            ));
        }
        let needs_margin = match self.csi {
            CsiMode::Perfect => false,
            CsiMode::Imperfect => self.channel.sigma > 0.0,
            CsiMode::MeanOnly => true,
        };
        if needs_margin && self.gamma == 0.0 {
            return Err(Error::config(
                "gamma",
                "must be > 0 when margins are inferred",
            ));
        }
        if self.horizon <= self.warmup {
            return Err(Error::config(
                "horizon",
                format!("must exceed warmup ({} <= {})", self.horizon, self.warmup),
            ));
        }
        Ok(())
    }

    /// Sets the horizon and the default 10% warmup.
    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self.warmup = horizon / 10;
        self
    }
}

/// Long-run rates of one node, bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeMetrics {
    pub lambda_p: f64,
    pub lambda_o: f64,
    pub serv_p: f64,
    pub serv_o: f64,
    pub goodput_p: f64,
    pub goodput_o: f64,
    pub qp_avg: f64,
    pub qo_avg: f64,
}

/// Time averages over the post-warmup blocks. Rates are per node
/// (network total divided by `n`); backlogs are network totals.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub n: usize,
    pub blocks: u64,
    /// Aggregate utility of admissions: `Σ_j κU(A^p) + U(A^o)` under perfect CSI,
    /// its outage-weighted expectation otherwise.
    pub util_avg: f64,
    /// Aggregate utility of deliveries: `κU(private goodput) + U(open goodput)` of the served node.
    pub util_served: f64,
    pub qp_avg: f64,
    pub qo_avg: f64,
    pub lambda_p: f64,
    pub lambda_o: f64,
    pub serv_p: f64,
    pub serv_o: f64,
    pub goodput_p: f64,
    pub goodput_o: f64,
    /// Fraction of private-joint blocks that ended in outage.
    pub outage_freq: f64,
    pub private_blocks: u64,
    /// Largest `serv_p + serv_o - R_scheduled` seen in any block.
    pub max_rate_excess: f64,
    pub drift: DriftReport,
    pub per_node: Vec<NodeMetrics>,
}

/// One block of the optional trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<'a> {
    pub block: u64,
    pub decision: &'a Decision,
    pub queues: &'a NodeQueues,
}

pub fn run(config: &RunConfig) -> Result<RunMetrics> {
    run_traced(config, |_| {})
}

/// Like [`run`], calling `trace` with the decision and the post-update queues of every block.
pub fn run_traced<F: FnMut(&TraceRow)>(config: &RunConfig, mut trace: F) -> Result<RunMetrics> {
    config.validate()?;
    let ch = &config.channel;
    let n = ch.n;
    let util = &config.util;
    let gamma = config.gamma;

    let fixed_margins: Option<Vec<f64>> = match config.csi {
        CsiMode::MeanOnly => Some(
            (0..n)
                .map(|j| {
                    let laws: Vec<ExponentialPrior> = eavesdroppers(n, j)
                        .map(|i| ExponentialPrior {
                            mean: ch.cross_mean(j, i),
                        })
                        .collect();
                    outage_margin(&laws, gamma, ch.power)
                })
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };

    let mut queues = NodeQueues::empty(n);
    let mut audit = DriftAudit::new(n);
    let mut arrivals = vec![Admission::default(); n];
    let mut posts: Vec<PreparedPosterior> = Vec::with_capacity(n);
    let mut nodes = vec![NodeMetrics::default(); n];
    let (mut util_sum, mut served_util_sum) = (0.0, 0.0);
    let (mut private_blocks, mut outages) = (0u64, 0u64);
    let mut max_rate_excess = f64::NEG_INFINITY;

    for k in 0..config.horizon {
        let block = sample_block(ch, k);
        let view = rate_view(&block, ch.power);

        for j in 0..n {
            arrivals[j] = match config.csi {
                CsiMode::Perfect => {
                    flow_control_perfect(queues.qp[j], queues.qo[j], config.v, util)
                }
                _ => flow_control_outage(queues.qp[j], queues.qo[j], config.v, gamma, util),
            };
        }

        let mut decision = match (&fixed_margins, config.csi) {
            (Some(m), _) => schedule_max_weight(&queues, &view.up, m),
            (None, CsiMode::Imperfect) if ch.sigma > 0.0 => {
                let mut source = PosteriorMargins {
                    channel: ch,
                    block: &block,
                    gamma,
                    node: usize::MAX,
                    posts: &mut posts,
                };
                schedule_max_weight_lazy(&queues, &view.up, &mut source)?
            }
            _ => schedule_max_weight(&queues, &view.up, &view.max_cross),
        };
        if let Some(j) = decision.scheduled {
            resolve_outage(&mut decision, view.max_cross[j]);
        }

        let before = queues.clone();
        let rec = step(&mut queues, &decision, &arrivals);
        audit.record(&before, &decision, &arrivals, &queues);
        trace(&TraceRow {
            block: k,
            decision: &decision,
            queues: &queues,
        });

        if k < config.warmup {
            continue;
        }
        for j in 0..n {
            let a = arrivals[j];
            let m = &mut nodes[j];
            m.lambda_p += a.ap;
            m.lambda_o += a.ao;
            m.qp_avg += before.qp[j];
            m.qo_avg += before.qo[j];
            util_sum += match config.csi {
                CsiMode::Perfect => util.private(a.ap) + util.open(a.ao),
                _ => {
                    (1.0 - gamma) * (util.private(a.ap) + util.open(a.ao))
                        + gamma * util.open(a.ap + a.ao)
                }
            };
        }
        if let Some(j) = decision.scheduled {
            let m = &mut nodes[j];
            m.serv_p += rec.served_p;
            m.serv_o += rec.served_o;
            m.goodput_p += rec.goodput_p;
            m.goodput_o += rec.goodput_o;
            served_util_sum += util.private(rec.goodput_p) + util.open(rec.goodput_o);
            max_rate_excess = max_rate_excess.max(rec.served_p + rec.served_o - view.up[j]);
            if decision.mode == Mode::PrivateJoint {
                private_blocks += 1;
                outages += u64::from(decision.outage);
            }
        }
    }

    let blocks = config.horizon - config.warmup;
    let t = blocks as f64;
    for m in &mut nodes {
        for x in [
            &mut m.lambda_p,
            &mut m.lambda_o,
            &mut m.serv_p,
            &mut m.serv_o,
            &mut m.goodput_p,
            &mut m.goodput_o,
            &mut m.qp_avg,
            &mut m.qo_avg,
        ] {
            *x /= t;
        }
    }
    let per_node_mean = |f: fn(&NodeMetrics) -> f64| nodes.iter().map(f).sum::<f64>() / n as f64;
    Ok(RunMetrics {
        n,
        blocks,
        util_avg: util_sum / t,
        util_served: served_util_sum / t,
        qp_avg: nodes.iter().map(|m| m.qp_avg).sum(),
        qo_avg: nodes.iter().map(|m| m.qo_avg).sum(),
        lambda_p: per_node_mean(|m| m.lambda_p),
        lambda_o: per_node_mean(|m| m.lambda_o),
        serv_p: per_node_mean(|m| m.serv_p),
        serv_o: per_node_mean(|m| m.serv_o),
        goodput_p: per_node_mean(|m| m.goodput_p),
        goodput_o: per_node_mean(|m| m.goodput_o),
        outage_freq: if private_blocks > 0 {
            outages as f64 / private_blocks as f64
        } else {
            0.0
        },
        private_blocks,
        max_rate_excess: if max_rate_excess.is_finite() {
            max_rate_excess
        } else {
            0.0
        },
        drift: audit.report(),
        per_node: nodes,
    })
}

/// Posterior margins of one block, built per node on first use.
struct PosteriorMargins<'a> {
    channel: &'a ChannelConfig,
    block: &'a ChannelBlock,
    gamma: f64,
    node: usize,
    posts: &'a mut Vec<PreparedPosterior>,
}

impl PosteriorMargins<'_> {
    fn load(&mut self, j: usize) -> Result<()> {
        if self.node == j {
            return Ok(());
        }
        let ch = self.channel;
        self.posts.clear();
        for i in eavesdroppers(ch.n, j) {
            let p = pair_index(ch.n, j, i);
            self.posts.push(
                posterior_of_gain(self.block.h_cross_est[p], ch.sigma, ch.cross_means[p])?.into(),
            );
        }
        self.node = j;
        Ok(())
    }
}

impl MarginSource for PosteriorMargins<'_> {
    fn margin(&mut self, j: usize) -> Result<f64> {
        self.load(j)?;
        outage_margin(self.posts, self.gamma, self.channel.power)
    }

    fn exceeds(&mut self, j: usize, rho: f64) -> Result<bool> {
        self.load(j)?;
        Ok(outage_exceeds(
            rho,
            self.posts,
            self.gamma,
            self.channel.power,
        ))
    }
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    V,
    Nodes,
    Kappa,
    Gamma,
    Sigma,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::V => "V",
            SweepParam::Nodes => "n",
            SweepParam::Kappa => "kappa",
            SweepParam::Gamma => "gamma",
            SweepParam::Sigma => "sigma",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::V => cfg.v = value,
            SweepParam::Kappa => cfg.util = UtilitySpec::new(value, cfg.util.a_max)?,
            SweepParam::Gamma => cfg.gamma = value,
            SweepParam::Sigma => cfg.channel.sigma = value,
            SweepParam::Nodes => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config(
                        "n",
                        format!("must be a positive integer, got {value}"),
                    ));
                }
                let priors = base
                    .priors
                    .ok_or_else(|| Error::config("n", "sweeping n needs interval priors"))?;
                let c = &base.channel;
                cfg.channel = ChannelConfig::with_uniform_priors(
                    value as usize,
                    c.power,
                    priors.uplink,
                    priors.cross,
                    c.sigma,
                    c.seed,
                )?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: RunMetrics,
}

/// One run per value, in parallel. All runs share the base seed, so their
/// fading paths coincide wherever the node count does.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let configs = values
        .iter()
        .map(|&v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, &value)| {
            Ok(SweepRow {
                value,
                metrics: run(cfg)?,
            })
        })
        .collect()
}

/// Per-node private rates of POS and of the dynamic controller on the same priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosComparison {
    pub pos_priv_rate: f64,
    pub dyn_priv_serv_rate: f64,
    pub dyn_goodput: f64,
}

pub fn compare_pos(config: &RunConfig, n_blocks: u64) -> Result<PosComparison> {
    let cfg = config.clone().with_horizon(n_blocks);
    cfg.validate()?;
    let (pos, metrics) = rayon::join(|| pos_rates(&cfg.channel, n_blocks), || run(&cfg));
    let metrics = metrics?;
    Ok(PosComparison {
        pos_priv_rate: pos.sum_priv() / cfg.channel.n as f64,
        dyn_priv_serv_rate: metrics.serv_p,
        dyn_goodput: metrics.goodput_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(csi: CsiMode, sigma: f64) -> RunConfig {
        let mut c = RunConfig::reference(7).with_horizon(5_000);
        c.channel = ChannelConfig::with_uniform_priors(
            4,
            1.0,
            Interval { lo: 2.0, hi: 8.0 },
            Interval { lo: 0.0, hi: 1.0 },
            sigma,
            7,
        )
        .unwrap();
        c.priors = None;
        c.csi = csi;
        c.v = 10.0;
        c
    }

    #[test]
    fn perfect_csi_never_outages() {
        let m = run(&small(CsiMode::Perfect, 0.5)).unwrap();
        assert_eq!(m.outage_freq, 0.0);
        assert!((m.goodput_p - m.serv_p).abs() < 1e-12);
        let m = run(&small(CsiMode::Imperfect, 0.0)).unwrap();
        assert_eq!(m.outage_freq, 0.0);
    }

    #[test]
    fn invariants_of_a_short_run() {
        for csi in [CsiMode::Perfect, CsiMode::Imperfect, CsiMode::MeanOnly] {
            let m = run(&small(csi, 0.5)).unwrap();
            assert!(m.goodput_p <= m.serv_p + 1e-12);
            assert!((0.0..=1.0).contains(&m.outage_freq));
            assert!(m.max_rate_excess <= 1e-12);
            assert_eq!(m.drift.violations, 0);
            for x in [
                m.lambda_p,
                m.lambda_o,
                m.serv_p,
                m.serv_o,
                m.goodput_p,
                m.qp_avg,
                m.qo_avg,
            ] {
                assert!(x >= 0.0);
            }
        }
    }

    #[test]
    fn all_zero_gains_yield_nothing() {
        // vanishing power makes every rate zero up to rounding
        let mut c = small(CsiMode::Perfect, 0.0);
        c.channel.power = 1e-300;
        c.horizon = c.warmup + 1;
        let m = run(&c).unwrap();
        assert!(m.serv_p < 1e-250 && m.serv_o < 1e-250);
    }

    #[test]
    fn deterministic() {
        let c = small(CsiMode::Imperfect, 0.5);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut c = small(CsiMode::Perfect, 0.5);
        c.horizon = c.warmup;
        assert!(c.validate().is_err());
        let mut c = small(CsiMode::Imperfect, 0.5);
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        let mut c = small(CsiMode::Perfect, 0.5);
        c.v = 0.0;
        assert!(c.validate().is_err());
        assert!(SweepParam::Nodes
            .apply(&small(CsiMode::Perfect, 0.5), 3.0)
            .is_err());
    }

    #[test]
    fn single_node_comparison() {
        let mut c = RunConfig::reference(3).with_horizon(20_000);
        c.channel = ChannelConfig::homogeneous(1, 1.0, 2.0, 1.0, 0.0, 3).unwrap();
        c.priors = None;
        let r = compare_pos(&c, 20_000).unwrap();
        assert!(r.dyn_priv_serv_rate <= r.pos_priv_rate + 1e-9);
        assert!((r.pos_priv_rate - 1.332).abs() < 0.03);
    }
}
