//! CSV emission. Every file has a header row and numbers are written with
//! nine significant digits (`%.9g`).

use std::fmt::Write as _;

use crate::control::Decision;
use crate::control::NodeQueues;
use crate::pos::{PosProfile, SumRateBound};
use crate::sim::{RunMetrics, SweepRow};
use crate::single_user::RegionRow;

/// `%.9g` formatting.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub const REGION_HEADER: &str = "alpha,open_rate,priv_rate,lambda_or_pp,mode";

pub fn region_csv(rows: &[RegionRow]) -> String {
    let mut s = String::from(REGION_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_num(r.alpha),
            fmt_num(r.point.open_rate),
            fmt_num(r.point.priv_rate),
            fmt_num(r.lambda_or_pp),
            r.mode.as_str()
        );
    }
    s
}

pub const POS_HEADER: &str = "node,p_M,Rbar_M,Rbar_m,priv_rate";

pub fn pos_profile_csv(p: &PosProfile) -> String {
    let mut s = String::from(POS_HEADER);
    s.push('\n');
    for j in 0..p.n() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            j + 1,
            fmt_num(p.p_m[j]),
            fmt_num(p.rbar_big_m[j]),
            fmt_num(p.rbar_m[j]),
            fmt_num(p.priv_rates[j])
        );
    }
    s
}

pub const BOUND_HEADER: &str = "sum_open,sum_priv";

/// Outer-bound polyline, sum rates (not per node).
pub fn bound_csv(b: &SumRateBound) -> String {
    let mut s = String::from(BOUND_HEADER);
    s.push('\n');
    for (o, p) in b.boundary() {
        let _ = writeln!(s, "{},{}", fmt_num(o), fmt_num(p));
    }
    s
}

/// Column order of sweep and run CSVs.
pub const METRICS_COLUMNS: [&str; 15] = [
    "util_avg",
    "util_served",
    "qp_avg",
    "qo_avg",
    "lambda_p",
    "lambda_o",
    "serv_p",
    "serv_o",
    "goodput_p",
    "goodput_o",
    "outage_freq",
    "private_blocks",
    "drift_violations",
    "blocks",
    "n",
];

pub fn metrics_fields(m: &RunMetrics) -> [String; 15] {
    [
        fmt_num(m.util_avg),
        fmt_num(m.util_served),
        fmt_num(m.qp_avg),
        fmt_num(m.qo_avg),
        fmt_num(m.lambda_p),
        fmt_num(m.lambda_o),
        fmt_num(m.serv_p),
        fmt_num(m.serv_o),
        fmt_num(m.goodput_p),
        fmt_num(m.goodput_o),
        fmt_num(m.outage_freq),
        m.private_blocks.to_string(),
        m.drift.violations.to_string(),
        m.blocks.to_string(),
        m.n.to_string(),
    ]
}

/// One row per swept value, the value first.
pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut s = format!("{param},{}\n", METRICS_COLUMNS.join(","));
    for row in rows {
        let _ = writeln!(
            s,
            "{},{}",
            fmt_num(row.value),
            metrics_fields(&row.metrics).join(",")
        );
    }
    s
}

/// One row per labelled run.
pub fn metrics_csv(rows: &[(&str, &RunMetrics)]) -> String {
    let mut s = format!("label,{}\n", METRICS_COLUMNS.join(","));
    for (label, m) in rows {
        let _ = writeln!(s, "{label},{}", metrics_fields(m).join(","));
    }
    s
}

pub const PER_NODE_HEADER: &str =
    "node,lambda_p,lambda_o,serv_p,serv_o,goodput_p,goodput_o,qp_avg,qo_avg";

pub fn per_node_csv(m: &RunMetrics) -> String {
    let mut s = String::from(PER_NODE_HEADER);
    s.push('\n');
    for (j, x) in m.per_node.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            j + 1,
            fmt_num(x.lambda_p),
            fmt_num(x.lambda_o),
            fmt_num(x.serv_p),
            fmt_num(x.serv_o),
            fmt_num(x.goodput_p),
            fmt_num(x.goodput_o),
            fmt_num(x.qp_avg),
            fmt_num(x.qo_avg)
        );
    }
    s
}

pub fn trace_header(n: usize) -> String {
    let mut s = String::from("block,scheduled,mode,Rp,Ro,rho,outage");
    for j in 1..=n {
        let _ = write!(s, ",Qp{j}");
    }
    for j in 1..=n {
        let _ = write!(s, ",Qo{j}");
    }
    s
}

/// Scheduled node is 1-based; 0 marks an idle block.
pub fn trace_line(block: u64, d: &Decision, q: &NodeQueues) -> String {
    let mut s = format!(
        "{block},{},{},{},{},{},{}",
        d.scheduled.map_or(0, |j| j + 1),
        if d.scheduled.is_some() {
            d.mode.as_str()
        } else {
            "idle"
        },
        fmt_num(d.rp),
        fmt_num(d.ro),
        fmt_num(d.rho),
        u8::from(d.outage)
    );
    for x in q.qp.iter().chain(&q.qo) {
        s.push(',');
        s.push_str(&fmt_num(*x));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 1000.0), "666.666667");
        assert_eq!(fmt_num(123456789.4), "123456789");
        assert_eq!(fmt_num(1.5e-7), "1.5e-07");
        assert_eq!(fmt_num(-2.5e12), "-2.5e+12");
        assert_eq!(fmt_num(0.0001234), "0.0001234");
    }
}
