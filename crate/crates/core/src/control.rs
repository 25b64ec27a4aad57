//! Drift-plus-penalty control: flow control, max-weight scheduling, the queue
//! recursion and the Lyapunov drift audit.
//!
//! Queues follow `Q(k+1) = [Q(k) - R(k)]^+ + A(k)` for both the private and
//! the open backlog of every node. Units are bits per channel use; arrivals
//! are fluid (real-valued).

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Default admission cap per block and class.
pub const DEFAULT_A_MAX: f64 = 5.0;

/// Logarithmic utilities `U^p(x) = κ·log2(1+x)` and `U^o(x) = log2(1+x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec {
    pub kappa: f64,
    pub a_max: f64,
}

impl Default for UtilitySpec {
    fn default() -> Self {
        UtilitySpec {
            kappa: 5.0,
            a_max: DEFAULT_A_MAX,
        }
    }
}

impl UtilitySpec {
    pub fn new(kappa: f64, a_max: f64) -> Result<Self> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            // U^p ≥ U^o needs κ ≥ 1
            return Err(Error::config("kappa", format!("must be >= 1, got {kappa}")));
        }
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::config("a_max", format!("must be > 0, got {a_max}")));
        }
        Ok(UtilitySpec { kappa, a_max })
    }

    #[inline]
    pub fn private(&self, x: f64) -> f64 {
        self.kappa * x.log2_1p()
    }

    #[inline]
    pub fn open(&self, x: f64) -> f64 {
        x.log2_1p()
    }
}

trait Log2p1 {
    fn log2_1p(self) -> f64;
}

impl Log2p1 for f64 {
    #[inline]
    fn log2_1p(self) -> f64 {
        self.ln_1p() / LN_2
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeQueues {
    pub qp: Vec<f64>,
    pub qo: Vec<f64>,
}

impl NodeQueues {
    pub fn empty(n: usize) -> Self {
        NodeQueues {
            qp: vec![0.0; n],
            qo: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.qp.len()
    }

    /// `L = ½ Σ_j (Q_j^p)² + (Q_j^o)²`.
    pub fn lyapunov(&self) -> f64 {
        0.5 * self.qp.iter().chain(&self.qo).map(|q| q * q).sum::<f64>()
    }

    pub fn total_private(&self) -> f64 {
        self.qp.iter().sum()
    }

    pub fn total_open(&self) -> f64 {
        self.qo.iter().sum()
    }
}

/// Admissions of one node in one block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Admission {
    pub ap: f64,
    pub ao: f64,
}

/// Maximiser of `V·w·log2(1+A) - Q·A` over `[0, a_max]`.
fn log_admission(q: f64, v: f64, weight: f64, a_max: f64) -> f64 {
    if q <= 0.0 {
        return a_max;
    }
    (v * weight / (q * LN_2) - 1.0).clamp(0.0, a_max)
}

/// Flow control with exact cross-channel knowledge:
/// `argmax V[U^p(A^p) + U^o(A^o)] - Q^p A^p - Q^o A^o`, separable in the two classes.
pub fn flow_control_perfect(qp: f64, qo: f64, v: f64, util: &UtilitySpec) -> Admission {
    Admission {
        ap: log_admission(qp, v, util.kappa, util.a_max),
        ao: log_admission(qo, v, 1.0, util.a_max),
    }
}

/// Objective maximised by [`flow_control_outage`].
pub fn outage_flow_objective(
    adm: Admission,
    qp: f64,
    qo: f64,
    v: f64,
    gamma: f64,
    util: &UtilitySpec,
) -> f64 {
    v * ((1.0 - gamma) * util.private(adm.ap)
        + (1.0 - gamma) * util.open(adm.ao)
        + gamma * util.open(adm.ao + adm.ap))
        - qp * adm.ap
        - qo * adm.ao
}

/// Best `A ∈ [0, a_max]` for one coordinate of the outage objective, the
/// other coordinate `d` fixed. Stationarity in `x = 1 + A`:
/// `a/x + b/(x + d) = c` with `c = Q·ln2/V`, a quadratic with one positive root.
fn coordinate_best(a: f64, b: f64, d: f64, q: f64, v: f64, a_max: f64) -> f64 {
    if q <= 0.0 {
        return a_max;
    }
    let c = q * LN_2 / v;
    let bq = c * d - a - b;
    let disc = bq * bq + 4.0 * c * a * d;
    let x = if bq >= 0.0 {
        let den = bq + disc.sqrt();
        if den > 0.0 {
            2.0 * a * d / den
        } else {
            0.0
        }
    } else {
        (-bq + disc.sqrt()) / (2.0 * c)
    };
    (x - 1.0).clamp(0.0, a_max)
}

/// Outage-aware flow control:
/// `argmax V[(1-γ)U^p(A^p) + (1-γ)U^o(A^o) + γU^o(A^o+A^p)] - Q^p A^p - Q^o A^o`
/// over `[0, a_max]²`, by coordinate ascent with closed-form coordinate steps.
pub fn flow_control_outage(qp: f64, qo: f64, v: f64, gamma: f64, util: &UtilitySpec) -> Admission {
    let mut adm = flow_control_perfect(qp, qo, v, util);
    if gamma <= 0.0 {
        return adm;
    }
    let wp = (1.0 - gamma) * util.kappa;
    let wo = 1.0 - gamma;
    let mut last = outage_flow_objective(adm, qp, qo, v, gamma, util);
    for _ in 0..100_000 {
        let ap = coordinate_best(wp, gamma, adm.ao, qp, v, util.a_max);
        let ao = coordinate_best(wo, gamma, ap, qo, v, util.a_max);
        let moved = (ap - adm.ap).abs().max((ao - adm.ao).abs());
        adm = Admission { ap, ao };
        let obj = outage_flow_objective(adm, qp, qo, v, gamma, util);
        if moved < 1e-12 || (obj - last).abs() < 1e-14 * (1.0 + obj.abs()) {
            break;
        }
        last = obj;
    }
    adm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Jointly encoded private and open data; the open part fills the randomisation message.
    PrivateJoint,
    OpenOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PrivateJoint => "private_joint",
            Mode::OpenOnly => "open_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub scheduled: Option<usize>,
    pub mode: Mode,
    /// Private encoding rate `[R_j - ρ_j]^+` (zero for open-only).
    pub rp: f64,
    /// Open rate `R_j - rp`.
    pub ro: f64,
    /// Margin `ρ_j` of the scheduled node.
    pub rho: f64,
    /// Set by [`resolve_outage`] once the true cross gains are known.
    pub outage: bool,
}

impl Decision {
    pub fn idle() -> Self {
        Decision {
            scheduled: None,
            mode: Mode::OpenOnly,
            rp: 0.0,
            ro: 0.0,
            rho: 0.0,
            outage: false,
        }
    }

    pub fn is_private(&self) -> bool {
        self.scheduled.is_some() && self.mode == Mode::PrivateJoint
    }

    /// Offered (private, open) rates of node `j` this block.
    pub fn offered(&self, j: usize) -> (f64, f64) {
        if self.scheduled == Some(j) {
            (self.rp, self.ro)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Max-weight scheduling over the `2n + 1` candidates (private-joint or
/// open-only for each node, or idle).
///
/// `margins[j]` is `ρ_j`: the true worst cross rate under perfect CSI, or the
/// outage-constrained margin otherwise. A private-joint candidate exists only
/// when `R_j - ρ_j > 0`. Weights: private-joint `Q^p R^p + Q^o (R - R^p)`,
/// open-only `Q^o R`. Ties prefer private, then the lower index; a best weight
/// of zero idles.
pub fn schedule_max_weight(queues: &NodeQueues, up: &[f64], margins: &[f64]) -> Decision {
    let mut best = Best::default();
    for j in 0..queues.n() {
        best.offer_open(queues, up, j, margins[j]);
        best.offer_private(queues, up, j, margins[j]);
    }
    best.decision
}

/// Per-node margins supplied on demand to [`schedule_max_weight_lazy`].
pub trait MarginSource {
    fn margin(&mut self, j: usize) -> Result<f64>;

    /// True only if node `j`'s margin is certainly above `rho`.
    fn exceeds(&mut self, j: usize, rho: f64) -> Result<bool> {
        Ok(self.margin(j)? > rho)
    }
}

impl MarginSource for &[f64] {
    fn margin(&mut self, j: usize) -> Result<f64> {
        Ok(self[j])
    }
}

/// Same decision as [`schedule_max_weight`], but settles most nodes without
/// their exact margin: a node is skipped when `max(Q^p, Q^o)·R_j` cannot beat
/// the best weight so far, or when its margin exceeds the break-even value
/// (plus a small slack). The scheduled node's margin is always computed.
pub fn schedule_max_weight_lazy<M: MarginSource>(
    queues: &NodeQueues,
    up: &[f64],
    source: &mut M,
) -> Result<Decision> {
    const SLACK: f64 = 1e-6;
    let n = queues.n();
    let mut best = Best::default();
    let mut known = vec![f64::NAN; n];
    for j in 0..n {
        best.offer_open(queues, up, j, f64::NAN);
    }
    let bound = |j: usize| queues.qp[j].max(queues.qo[j]) * up[j] * (1.0 + 1e-12);
    let mut order: Vec<usize> = (0..n).filter(|&j| bound(j) > 0.0).collect();
    order.sort_by(|&a, &b| bound(b).total_cmp(&bound(a)).then(a.cmp(&b)));
    for j in order {
        if bound(j) < best.weight {
            break;
        }
        let (qp, qo, r) = (queues.qp[j], queues.qo[j], up[j]);
        // private weight is qo·r + (qp - qo)·rp; it beats best.weight iff rp exceeds this
        if qp > qo && (qp - qo) * SLACK > 1e-9 * best.weight {
            let break_even = r - (best.weight - qo * r) / (qp - qo);
            if break_even + SLACK < r && source.exceeds(j, break_even + SLACK)? {
                continue;
            }
        }
        known[j] = source.margin(j)?;
        best.offer_private(queues, up, j, known[j]);
    }
    if let Some(j) = best.decision.scheduled {
        if known[j].is_nan() {
            known[j] = source.margin(j)?;
        }
        best.decision.rho = known[j];
    }
    Ok(best.decision)
}

/// Running argmax over candidates. Order: larger weight, then private over
/// open, then the lower index.
struct Best {
    weight: f64,
    decision: Decision,
}

impl Default for Best {
    fn default() -> Self {
        Best {
            weight: 0.0,
            decision: Decision::idle(),
        }
    }
}

impl Best {
    fn offer(&mut self, w: f64, candidate: Decision) {
        if !(w > 0.0) {
            return;
        }
        let better = if w != self.weight || self.decision.scheduled.is_none() {
            w > self.weight
        } else {
            let (new_p, old_p) = (candidate.is_private(), self.decision.is_private());
            new_p && !old_p || new_p == old_p && candidate.scheduled < self.decision.scheduled
        };
        if better {
            self.weight = w;
            self.decision = candidate;
        }
    }

    fn offer_open(&mut self, queues: &NodeQueues, up: &[f64], j: usize, rho: f64) {
        let r = up[j];
        let candidate = Decision {
            scheduled: Some(j),
            mode: Mode::OpenOnly,
            rp: 0.0,
            ro: r,
            rho,
            outage: false,
        };
        self.offer(queues.qo[j] * r, candidate);
    }

    fn offer_private(&mut self, queues: &NodeQueues, up: &[f64], j: usize, rho: f64) {
        let r = up[j];
        let rp = (r - rho).max(0.0);
        if rp > 0.0 {
            let candidate = Decision {
                scheduled: Some(j),
                mode: Mode::PrivateJoint,
                rp,
                ro: r - rp,
                rho,
                outage: false,
            };
            self.offer(queues.qp[j] * rp + queues.qo[j] * (r - rp), candidate);
        }
        if self.decision.scheduled == Some(j) {
            self.decision.rho = rho;
        }
    }
}

/// Marks a private transmission whose margin fell short of the realised worst cross rate.
pub fn resolve_outage(decision: &mut Decision, true_max_cross: f64) {
    decision.outage = decision.is_private() && decision.rp > 0.0 && decision.rho < true_max_cross;
}

/// What one block delivered.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    /// Private bits that left the queue, `min(Q^p, R^p)`.
    pub served_p: f64,
    /// Open bits that left the queue, `min(Q^o, R^o)`.
    pub served_o: f64,
    /// Private bits delivered with privacy intact.
    pub goodput_p: f64,
    /// Open bits delivered, including private bits exposed by an outage.
    pub goodput_o: f64,
}

/// Depart-then-arrive update of all queues for one block.
pub fn step(queues: &mut NodeQueues, decision: &Decision, arrivals: &[Admission]) -> StepRecord {
    let mut rec = StepRecord::default();
    if let Some(j) = decision.scheduled {
        rec.served_p = queues.qp[j].min(decision.rp);
        rec.served_o = queues.qo[j].min(decision.ro);
        if decision.outage {
            rec.goodput_o = rec.served_o + rec.served_p;
        } else {
            rec.goodput_p = rec.served_p;
            rec.goodput_o = rec.served_o;
        }
    }
    for (j, a) in arrivals.iter().enumerate() {
        let (rp, ro) = decision.offered(j);
        queues.qp[j] = (queues.qp[j] - rp).max(0.0) + a.ap;
        queues.qo[j] = (queues.qo[j] - ro).max(0.0) + a.ao;
    }
    rec
}

/// Checks the sampled one-step drift against the quadratic bound
/// `L(k+1) - L(k) ≤ B - Σ_j Q_j^p (R_j^p - A_j^p) - Σ_j Q_j^o (R_j^o - A_j^o)`
/// with `B = n(B₁ + B₂)/2`, `B₁ = R^{p,max}² + A^{p,max}²`, `B₂ = R^{o,max}² + A^{o,max}²`.
#[derive(Debug, Clone, Default)]
pub struct DriftAudit {
    n: usize,
    /// Per block: drift plus the queue-weighted service term, and its rounding scale.
    excess: Vec<(f64, f64)>,
    max_rp: f64,
    max_ro: f64,
    max_ap: f64,
    max_ao: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    pub b: f64,
    pub blocks: usize,
    pub violations: usize,
    /// Largest observed `drift + Σ Q(R - A) - B`; never positive on a sound run.
    pub worst_margin: f64,
}

impl DriftAudit {
    pub fn new(n: usize) -> Self {
        DriftAudit {
            n,
            ..Default::default()
        }
    }

    pub fn record(
        &mut self,
        before: &NodeQueues,
        decision: &Decision,
        arrivals: &[Admission],
        after: &NodeQueues,
    ) {
        let mut drift = 0.0;
        let mut service = 0.0;
        let mut scale = 1.0;
        for j in 0..self.n {
            let (rp, ro) = decision.offered(j);
            let a = arrivals[j];
            let (qp, qo, qp1, qo1) = (before.qp[j], before.qo[j], after.qp[j], after.qo[j]);
            drift += 0.5 * ((qp1 - qp) * (qp1 + qp) + (qo1 - qo) * (qo1 + qo));
            service += qp * (rp - a.ap) + qo * (ro - a.ao);
            scale += qp * qp + qo * qo + qp1 * qp1 + qo1 * qo1;
            self.max_rp = self.max_rp.max(rp);
            self.max_ro = self.max_ro.max(ro);
            self.max_ap = self.max_ap.max(a.ap);
            self.max_ao = self.max_ao.max(a.ao);
        }
        self.excess.push((drift + service, scale));
    }

    /// Bound constant from the observed maxima.
    pub fn observed_b(&self) -> f64 {
        let b1 = self.max_rp.powi(2) + self.max_ap.powi(2);
        let b2 = self.max_ro.powi(2) + self.max_ao.powi(2);
        self.n as f64 * (b1 + b2) / 2.0
    }

    pub fn report(&self) -> DriftReport {
        self.report_with(self.observed_b())
    }

    /// Audit against a caller-supplied `B`, e.g. from known rate and admission caps.
    pub fn report_with(&self, b: f64) -> DriftReport {
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for &(x, scale) in &self.excess {
            let margin = x - b;
            worst = worst.max(margin);
            if margin > 1e-12 * scale {
                violations += 1;
            }
        }
        DriftReport {
            b,
            blocks: self.excess.len(),
            violations,
            worst_margin: if self.excess.is_empty() { 0.0 } else { worst },
        }
    }
}

/// `B` for known caps on per-block rates and admissions.
pub fn drift_constant(n: usize, r_max_p: f64, r_max_o: f64, a_max_p: f64, a_max_o: f64) -> f64 {
    n as f64 * (r_max_p * r_max_p + a_max_p * a_max_p + r_max_o * r_max_o + a_max_o * a_max_o) / 2.0
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    /// Best point of a uniform grid on `[0, hi]`.
    fn grid_max(f: impl Fn(f64) -> f64, hi: f64, step: f64) -> (f64, f64) {
        let steps = (hi / step).round() as usize;
        (0..=steps)
            .map(|i| {
                let x = (i as f64 * step).min(hi);
                (x, f(x))
            })
            .fold(
                (0.0, f64::NEG_INFINITY),
                |b, c| if c.1 > b.1 { c } else { b },
            )
    }

    /// Every candidate spelled out, ranked by weight, then private first, then lower index.
    fn exhaustive(queues: &NodeQueues, up: &[f64], margins: &[f64]) -> Decision {
        let mut cands = vec![(0.0, 0u8, 0usize, Decision::idle())];
        for j in 0..queues.n() {
            let r = up[j];
            let rp = (r - margins[j]).max(0.0);
            let base = Decision {
                scheduled: Some(j),
                mode: Mode::OpenOnly,
                rp: 0.0,
                ro: r,
                rho: margins[j],
                outage: false,
            };
            cands.push((queues.qo[j] * r, 1, j, base));
            if rp > 0.0 {
                let d = Decision {
                    mode: Mode::PrivateJoint,
                    rp,
                    ro: r - rp,
                    ..base
                };
                cands.push((queues.qp[j] * rp + queues.qo[j] * (r - rp), 2, j, d));
            }
        }
        let best = cands
            .iter()
            .filter(|c| c.1 == 0 || c.0 > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(b.2.cmp(&a.2)))
            .unwrap();
        best.3
    }

    fn quantised(n: usize) -> impl Strategy<Value = (NodeQueues, Vec<f64>, Vec<f64>)> {
        let q = prop::collection::vec(0u8..6, n);
        let r = prop::collection::vec(0u8..6, n);
        (q.clone(), q, r.clone(), r).prop_map(|(qp, qo, up, m)| {
            let f = |v: Vec<u8>, s: f64| v.into_iter().map(|x| x as f64 * s).collect::<Vec<_>>();
            (
                NodeQueues {
                    qp: f(qp, 1.0),
                    qo: f(qo, 1.0),
                },
                f(up, 0.5),
                f(m, 0.5),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn perfect_flow_control_matches_grid(
            qp in 0.0..200.0f64, qo in 0.0..200.0f64, v in 0.1..100.0f64, kappa in 1.0..10.0f64,
        ) {
            let util = UtilitySpec::new(kappa, 5.0).unwrap();
            let a = flow_control_perfect(qp, qo, v, &util);
            let fp = |x: f64| v * util.private(x) - qp * x;
            let fo = |x: f64| v * util.open(x) - qo * x;
            let (xp, vp) = grid_max(fp, 5.0, 1e-3);
            let (xo, vo) = grid_max(fo, 5.0, 1e-3);
            prop_assert!((a.ap - xp).abs() <= 1e-2 && (a.ao - xo).abs() <= 1e-2);
            prop_assert!(fp(a.ap) >= vp - 1e-6 && fo(a.ao) >= vo - 1e-6);
        }

        #[test]
        fn outage_flow_control_beats_nearby_points(
            qp in 0.0..200.0f64, qo in 0.0..200.0f64, v in 0.1..100.0f64,
            kappa in 1.0..10.0f64, gamma in 0.0..0.99f64,
        ) {
            let util = UtilitySpec::new(kappa, 5.0).unwrap();
            let a = flow_control_outage(qp, qo, v, gamma, &util);
            let obj = |ap: f64, ao: f64| outage_flow_objective(Admission { ap, ao }, qp, qo, v, gamma, &util);
            let here = obj(a.ap, a.ao);
            for (dp, dq) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3), (1e-3, -1e-3), (-1e-3, 1e-3)] {
                let (p, o) = ((a.ap + dp).clamp(0.0, 5.0), (a.ao + dq).clamp(0.0, 5.0));
                prop_assert!(here >= obj(p, o) - 1e-12 * (1.0 + here.abs()));
            }
        }

        #[test]
        fn max_weight_matches_exhaustive((queues, up, margins) in (1usize..6).prop_flat_map(quantised)) {
            let d = schedule_max_weight(&queues, &up, &margins);
            prop_assert_eq!(d, exhaustive(&queues, &up, &margins));
        }

        #[test]
        fn lazy_scheduler_matches_eager((queues, up, margins) in (1usize..6).prop_flat_map(quantised)) {
            let eager = schedule_max_weight(&queues, &up, &margins);
            let mut source: &[f64] = &margins;
            prop_assert_eq!(schedule_max_weight_lazy(&queues, &up, &mut source).unwrap(), eager);
        }

        #[test]
        fn queues_stay_non_negative_and_drift_bound_holds(
            seq in prop::collection::vec((0.0..4.0f64, 0.0..4.0f64, 0.0..5.0f64, 0.0..5.0f64, 0usize..3, any::<bool>()), 1..200),
        ) {
            let n = 3;
            let mut q = NodeQueues::empty(n);
            let mut audit = DriftAudit::new(n);
            for (r, margin, ap, ao, j, outage) in seq {
                let arrivals: Vec<Admission> = (0..n).map(|i| Admission { ap: ap / (i + 1) as f64, ao }).collect();
                let mut up = vec![0.0; n];
                up[j] = r;
                let mut margins = vec![f64::INFINITY; n];
                margins[j] = margin;
                let mut d = schedule_max_weight(&q, &up, &margins);
                d.outage = outage && d.is_private();
                let before = q.clone();
                let rec = step(&mut q, &d, &arrivals);
                audit.record(&before, &d, &arrivals, &q);
                prop_assert!(q.qp.iter().chain(&q.qo).all(|&x| x >= 0.0));
                prop_assert!(rec.goodput_p <= rec.served_p);
                prop_assert!((rec.goodput_p + rec.goodput_o - rec.served_p - rec.served_o).abs() < 1e-12);
            }
            prop_assert_eq!(audit.report().violations, 0);
        }
    }
}
