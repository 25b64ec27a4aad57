//! Experiment runners behind the CLI verbs and presets. Each writes its
//! CSVs (and a gnuplot script where a figure applies) into the bundle and
//! returns a short human-readable summary.

use std::fs::File;
use std::io::{BufWriter, Write};

use privsched::channel::ChannelConfig;
use privsched::export::{self, fmt_num};
use privsched::pos::{pos_rates, sum_rate_outer_bound};
use privsched::sim::{self, compare_pos, run, run_traced, CsiMode, SweepParam};
use privsched::single_user::{alpha_grid, sweep_region, EncodingMode, PairSamples};

use crate::bundle::{Bundle, Plot};
use crate::config::{Preset, Resolved};
use crate::CliError;

pub fn run_preset(preset: Preset, res: &Resolved, bundle: &mut Bundle) -> Result<String, CliError> {
    match preset {
        Preset::RegionSingle => region_single(res, bundle),
        Preset::RegionPos => region_pos(res, bundle),
        Preset::Sweep(param) => sweep_preset(param, res, bundle),
    }
}

fn tag(x: f64) -> String {
    fmt_num(x).replace('.', "p")
}

fn region_rows(res: &Resolved, mean_h12: f64) -> Result<String, CliError> {
    let r = &res.region;
    let samples = PairSamples::rayleigh(
        r.mean_h1,
        mean_h12,
        res.run.channel.power,
        r.samples,
        res.run.channel.seed,
    )?;
    let grid = alpha_grid(&samples, r.points);
    let mut rows = sweep_region(EncodingMode::Separate, &samples, &grid)?;
    rows.extend(sweep_region(EncodingMode::Joint, &samples, &grid)?);
    Ok(export::region_csv(&rows))
}

fn region_plot(output: &str, files: &[(String, String)]) -> String {
    let mut series = Vec::new();
    for (file, legend) in files {
        for mode in ["separate", "joint"] {
            series.push((
                file.clone(),
                format!("2:(strcol(5) eq '{mode}' ? $3 : 1/0)"),
                format!("{legend} {mode}"),
            ));
        }
    }
    Plot {
        output,
        title: "single-user rate regions",
        xlabel: "open rate (bits/channel use)",
        ylabel: "private rate (bits/channel use)",
        series,
    }
    .script()
}

pub fn region_verb(res: &Resolved, bundle: &mut Bundle) -> Result<String, CliError> {
    let h12 = res.region.mean_h12[0];
    bundle.write("region.csv", &region_rows(res, h12)?)?;
    Ok(format!(
        "region for E[h1]={}, E[h12]={h12} written",
        res.region.mean_h1
    ))
}

fn region_single(res: &Resolved, bundle: &mut Bundle) -> Result<String, CliError> {
    let mut files = Vec::new();
    for &h12 in &res.region.mean_h12 {
        let name = format!(
            "region_single_h1_{}_h12_{}.csv",
            tag(res.region.mean_h1),
            tag(h12)
        );
        bundle.write(&name, &region_rows(res, h12)?)?;
        files.push((name, format!("E[h12]={}", fmt_num(h12))));
    }
    bundle.write(
        "region_single.gp",
        &region_plot("region_single.png", &files),
    )?;
    Ok(format!("{} single-user regions written", files.len()))
}

fn region_pos(res: &Resolved, bundle: &mut Bundle) -> Result<String, CliError> {
    let base = &res.run.channel;
    let blocks = res.run.horizon;
    let mut summary = String::from(
        "n,mean_h1,mean_h12,priv_per_node,r_opp_per_node,corner_open_per_node,r_opp,r_priv_max\n",
    );
    let mut series = Vec::new();
    for &n in res.values.as_deref().unwrap_or(&[5.0, 10.0]) {
        if !(n >= 1.0 && n.fract() == 0.0) {
            return Err(CliError::config(
                "values",
                format!("node counts must be positive integers, got {n}"),
            ));
        }
        for &h12 in &res.region.mean_h12 {
            let cfg = ChannelConfig::homogeneous(
                n as usize,
                base.power,
                res.region.mean_h1,
                h12,
                base.sigma,
                base.seed,
            )?;
            let (bound, profile) = sum_rate_outer_bound(&cfg, blocks);
            let case = format!("n{}_h12_{}", n, tag(h12));
            bundle.write(
                &format!("pos_profile_{case}.csv"),
                &export::pos_profile_csv(&profile),
            )?;
            let bound_file = format!("bound_{case}.csv");
            bundle.write(&bound_file, &export::bound_csv(&bound))?;
            let nf = n;
            summary.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                n,
                fmt_num(res.region.mean_h1),
                fmt_num(h12),
                fmt_num(bound.r_priv_max / nf),
                fmt_num(bound.r_opp / nf),
                fmt_num(bound.corner().0 / nf),
                fmt_num(bound.r_opp),
                fmt_num(bound.r_priv_max)
            ));
            series.push((
                bound_file,
                "1:2".to_string(),
                format!("n={n}, E[hji]={}", fmt_num(h12)),
            ));
        }
    }
    bundle.write("region_pos_summary.csv", &summary)?;
    let plot = Plot {
        output: "region_pos.png",
        title: "sum-rate outer bounds",
        xlabel: "sum open rate",
        ylabel: "sum private rate",
        series,
    };
    bundle.write("region_pos.gp", &plot.script())?;
    Ok(summary)
}

fn sweep_labels(param: SweepParam, res: &Resolved) -> Vec<CsiMode> {
    if res.csi_explicit {
        return vec![res.run.csi];
    }
    match param {
        SweepParam::Gamma | SweepParam::Sigma => vec![CsiMode::Imperfect],
        _ => vec![CsiMode::Perfect, CsiMode::Imperfect],
    }
}

fn sweep_preset(
    param: SweepParam,
    res: &Resolved,
    bundle: &mut Bundle,
) -> Result<String, CliError> {
    let values = res.values.clone().unwrap_or_default();
    let key = param.as_str();
    let mut files = Vec::new();
    let mut summary = String::new();
    for csi in sweep_labels(param, res) {
        let mut base = res.run.clone();
        base.csi = csi;
        let rows = sim::sweep(&base, param, &values)?;
        let name = format!("sweep_{key}_{}.csv", csi.as_str());
        bundle.write(&name, &export::sweep_csv(key, &rows))?;
        for r in &rows {
            summary.push_str(&format!(
                "{} {key}={} util={} serv_p={} goodput_p={} backlog={}\n",
                csi.as_str(),
                fmt_num(r.value),
                fmt_num(r.metrics.util_avg),
                fmt_num(r.metrics.serv_p),
                fmt_num(r.metrics.goodput_p),
                fmt_num(r.metrics.qp_avg + r.metrics.qo_avg)
            ));
        }
        files.push((name, csi.as_str()));
    }
    if param == SweepParam::Sigma && !res.csi_explicit {
        let mut mean_only = res.run.clone();
        mean_only.csi = CsiMode::MeanOnly;
        let mut perfect = res.run.clone();
        perfect.csi = CsiMode::Perfect;
        let (a, b) = rayon::join(|| run(&mean_only), || run(&perfect));
        let (a, b) = (a?, b?);
        bundle.write(
            "sweep_sigma_reference.csv",
            &export::metrics_csv(&[("mean_only", &a), ("perfect", &b)]),
        )?;
        summary.push_str(&format!(
            "mean_only goodput_p={}\nperfect serv_p={}\n",
            fmt_num(a.goodput_p),
            fmt_num(b.serv_p)
        ));
    }
    let mut pos_series = Vec::new();
    if param == SweepParam::Nodes {
        let mut text = String::from("n,pos_priv_rate\n");
        for &n in &values {
            let cfg = param.apply(&res.run, n)?;
            let p = pos_rates(&cfg.channel, res.run.horizon);
            text.push_str(&format!("{},{}\n", n, fmt_num(p.sum_priv() / n)));
        }
        bundle.write("sweep_n_pos.csv", &text)?;
        pos_series.push((
            "sweep_n_pos.csv".to_string(),
            "1:2".to_string(),
            "POS private".to_string(),
        ));
    }

    // columns: 1 value, 2 util_avg, 4 qp_avg, 5 qo_avg, 6 lambda_p, 7 lambda_o, 8 serv_p, 9 serv_o, 10 goodput_p, 11 goodput_o
    let mut rate_series = pos_series;
    let mut util_series = Vec::new();
    let mut queue_series = Vec::new();
    for (file, label) in &files {
        for (cols, what) in [
            ("1:6", "private arrival"),
            ("1:10", "private goodput"),
            ("1:7", "open arrival"),
            ("1:11", "open goodput"),
        ] {
            rate_series.push((file.clone(), cols.to_string(), format!("{label} {what}")));
        }
        util_series.push((file.clone(), "1:2".to_string(), format!("{label} utility")));
        queue_series.push((
            file.clone(),
            "1:($4+$5)".to_string(),
            format!("{label} backlog"),
        ));
    }
    let out_rates = format!("sweep_{key}_rates.png");
    let out_util = format!("sweep_{key}_utility.png");
    let out_queue = format!("sweep_{key}_backlog.png");
    let mut script = Plot {
        output: &out_rates,
        title: "rates",
        xlabel: key,
        ylabel: "bits/channel use/node",
        series: rate_series,
    }
    .script();
    script.push_str(
        &Plot {
            output: &out_util,
            title: "long-term utility",
            xlabel: key,
            ylabel: "utility",
            series: util_series,
        }
        .script(),
    );
    script.push_str(
        &Plot {
            output: &out_queue,
            title: "average total backlog",
            xlabel: key,
            ylabel: "bits",
            series: queue_series,
        }
        .script(),
    );
    bundle.write(&format!("sweep_{key}.gp"), &script)?;
    Ok(summary)
}

pub fn run_verb(res: &Resolved, bundle: &mut Bundle, trace: bool) -> Result<String, CliError> {
    let metrics = if trace {
        let path = bundle.path("trace.csv");
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let mut failed = writeln!(w, "{}", export::trace_header(res.run.channel.n)).err();
        let m = run_traced(&res.run, |row| {
            if failed.is_none() {
                failed = writeln!(
                    w,
                    "{}",
                    export::trace_line(row.block, row.decision, row.queues)
                )
                .err();
            }
        })?;
        if let Some(e) = failed.or_else(|| w.flush().err()) {
            return Err(CliError::io(&path, e));
        }
        drop(w);
        bundle.record("trace.csv")?;
        m
    } else {
        run(&res.run)?
    };
    bundle.write(
        "run.csv",
        &export::metrics_csv(&[(res.run.csi.as_str(), &metrics)]),
    )?;
    bundle.write("run_nodes.csv", &export::per_node_csv(&metrics))?;
    Ok(format!(
        "util={} serv_p={} goodput_p={} serv_o={} outage={} drift_violations={}",
        fmt_num(metrics.util_avg),
        fmt_num(metrics.serv_p),
        fmt_num(metrics.goodput_p),
        fmt_num(metrics.serv_o),
        fmt_num(metrics.outage_freq),
        metrics.drift.violations
    ))
}

pub fn pos_verb(res: &Resolved, bundle: &mut Bundle) -> Result<String, CliError> {
    let (bound, profile) = sum_rate_outer_bound(&res.run.channel, res.run.horizon);
    bundle.write("pos_profile.csv", &export::pos_profile_csv(&profile))?;
    bundle.write("bound.csv", &export::bound_csv(&bound))?;
    let n = res.run.channel.n as f64;
    Ok(format!(
        "priv_per_node={} r_opp_per_node={}",
        fmt_num(bound.r_priv_max / n),
        fmt_num(bound.r_opp / n)
    ))
}

pub fn compare_verb(res: &Resolved, bundle: &mut Bundle) -> Result<String, CliError> {
    let c = compare_pos(&res.run, res.run.horizon)?;
    let text = format!(
        "pos_priv_rate,dyn_priv_serv_rate,dyn_goodput\n{},{},{}\n",
        fmt_num(c.pos_priv_rate),
        fmt_num(c.dyn_priv_serv_rate),
        fmt_num(c.dyn_goodput)
    );
    bundle.write("compare.csv", &text)?;
    Ok(format!(
        "pos={} dynamic={} ratio={}",
        fmt_num(c.pos_priv_rate),
        fmt_num(c.dyn_priv_serv_rate),
        fmt_num(c.dyn_priv_serv_rate / c.pos_priv_rate)
    ))
}
