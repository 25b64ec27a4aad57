//! Flat `key = value` configuration: parsing, layering and resolution into
//! core types.
//!
//! Layers apply in order (later wins): built-in defaults, preset defaults,
//! the config file, `--set` overrides, then `--seed`.

use std::collections::BTreeMap;
use std::fmt;

use privsched::channel::{sample_priors_uniform, ChannelConfig, Interval};
use privsched::rng;
use privsched::sim::{CsiMode, PriorIntervals, RunConfig, SweepParam};
use privsched::UtilitySpec;

use crate::CliError;

/// Every accepted key, with its meaning.
pub const SCHEMA: &[(&str, &str)] = &[
    ("n", "node count"),
    ("P", "noise-normalised transmit power"),
    (
        "uplink_means",
        "per-node mean uplink gains (one value, or n comma-separated)",
    ),
    (
        "uplink_interval",
        "lo,hi interval the uplink means are drawn from",
    ),
    (
        "cross_means",
        "per-pair mean cross gains (one value, or n(n-1) comma-separated)",
    ),
    (
        "cross_interval",
        "lo,hi interval the cross means are drawn from",
    ),
    ("sigma", "cross-gain estimation error standard deviation"),
    ("V", "drift-plus-penalty weight"),
    ("kappa", "private utility gain"),
    ("a_max", "admission cap per class per block"),
    ("gamma", "tolerable privacy outage probability"),
    ("csi", "perfect | imperfect | mean_only"),
    ("horizon", "blocks per run"),
    (
        "warmup",
        "blocks excluded from averages (default horizon/10)",
    ),
    ("seed", "master RNG seed"),
    ("preset", "experiment preset name"),
    ("values", "comma-separated values of the swept parameter"),
    ("mean_h1", "single-user mean uplink gain"),
    (
        "mean_h12",
        "single-user mean cross gain(s), comma-separated",
    ),
    ("samples", "single-user sample-path length"),
    ("points", "open-rate grid points of a region"),
];

const DEFAULTS: &[(&str, &str)] = &[
    ("n", "10"),
    ("P", "1"),
    ("uplink_interval", "2,8"),
    ("cross_interval", "0,1"),
    ("sigma", "0.5"),
    ("V", "50"),
    ("kappa", "5"),
    ("a_max", "5"),
    ("gamma", "0.1"),
    ("csi", "perfect"),
    ("horizon", "200000"),
    ("seed", "1"),
    ("mean_h1", "2"),
    ("mean_h12", "1,2.5"),
    ("samples", "100000"),
    ("points", "41"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    RegionSingle,
    RegionPos,
    Sweep(SweepParam),
}

impl Preset {
    pub const ALL: [&'static str; 7] = [
        "region-single",
        "region-pos",
        "sweep-V",
        "sweep-n",
        "sweep-kappa",
        "sweep-gamma",
        "sweep-sigma",
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "region-single" => Preset::RegionSingle,
            "region-pos" => Preset::RegionPos,
            "sweep-V" => Preset::Sweep(SweepParam::V),
            "sweep-n" => Preset::Sweep(SweepParam::Nodes),
            "sweep-kappa" => Preset::Sweep(SweepParam::Kappa),
            "sweep-gamma" => Preset::Sweep(SweepParam::Gamma),
            "sweep-sigma" => Preset::Sweep(SweepParam::Sigma),
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::RegionSingle => "region-single",
            Preset::RegionPos => "region-pos",
            Preset::Sweep(SweepParam::V) => "sweep-V",
            Preset::Sweep(SweepParam::Nodes) => "sweep-n",
            Preset::Sweep(SweepParam::Kappa) => "sweep-kappa",
            Preset::Sweep(SweepParam::Gamma) => "sweep-gamma",
            Preset::Sweep(SweepParam::Sigma) => "sweep-sigma",
        }
    }

    /// Default values of the varied parameter.
    fn default_values(self) -> &'static str {
        match self {
            Preset::RegionSingle => "",
            Preset::RegionPos => "5,10",
            Preset::Sweep(SweepParam::V) => "1,2,4,8,16,32,50",
            Preset::Sweep(SweepParam::Nodes) => "2,3,4,5,6,7,8,9,10",
            Preset::Sweep(SweepParam::Kappa) => "1,2,3,5,7,10",
            Preset::Sweep(SweepParam::Gamma) => "0.02,0.05,0.1,0.2,0.4",
            Preset::Sweep(SweepParam::Sigma) => "0,0.25,0.5,0.7",
        }
    }

    /// Config key a comma list may be given under instead of `values`.
    fn swept_key(self) -> Option<&'static str> {
        match self {
            Preset::Sweep(SweepParam::V) => Some("V"),
            Preset::Sweep(SweepParam::Nodes) => Some("n"),
            Preset::Sweep(SweepParam::Kappa) => Some("kappa"),
            Preset::Sweep(SweepParam::Gamma) => Some("gamma"),
            Preset::Sweep(SweepParam::Sigma) => Some("sigma"),
            _ => None,
        }
    }
}

/// Raw layered settings, keyed and ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
    explicit: BTreeMap<&'static str, String>,
}

fn known_key(key: &str) -> Result<&'static str, CliError> {
    SCHEMA
        .iter()
        .map(|(k, _)| *k)
        .find(|k| *k == key)
        .ok_or_else(|| CliError::config(key, "unknown key"))
}

impl Settings {
    pub fn defaults() -> Self {
        let mut s = Settings::default();
        for (k, v) in DEFAULTS {
            s.values.insert(k, v.to_string());
        }
        s
    }

    /// Sets a user-supplied value; these outrank preset defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = known_key(key.trim())?;
        let value = value.trim().to_string();
        self.values.insert(key, value.clone());
        self.explicit.insert(key, value);
        Ok(())
    }

    /// Applies `key=value` pairs, one per line; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::config("config", format!("line {}: expected key=value", lineno + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn merge_assignment(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::config("set", format!("expected key=value, got `{kv}`")))?;
        self.set(k, v)
    }

    fn get(&self, key: &'static str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn is_explicit(&self, key: &'static str) -> bool {
        self.explicit.contains_key(key)
    }

    pub fn preset(&self) -> Result<Option<Preset>, CliError> {
        match self.get("preset") {
            None | Some("") => Ok(None),
            Some(name) => Preset::parse(name).map(Some).ok_or_else(|| {
                CliError::config(
                    "preset",
                    format!(
                        "unknown preset `{name}` (known: {})",
                        Preset::ALL.join(", ")
                    ),
                )
            }),
        }
    }

    /// Resolves into core types; values are validated here and again by the core.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let preset = self.preset()?;
        let mut swept_list = None;
        let scalar = |key: &'static str| -> Result<f64, CliError> {
            let raw = self
                .get(key)
                .ok_or_else(|| CliError::config(key, "missing value"))?;
            match preset.and_then(Preset::swept_key) {
                Some(k) if k == key && raw.contains(',') => parse_list(key, raw)?
                    .first()
                    .copied()
                    .ok_or_else(|| CliError::config(key, "empty list")),
                _ => parse_f64(key, raw),
            }
        };
        if let Some(k) = preset.and_then(Preset::swept_key) {
            if self.get(k).is_some_and(|v| v.contains(',')) {
                swept_list = Some(parse_list(k, self.get(k).unwrap())?);
            }
        }

        let n_f = scalar("n")?;
        if !(n_f >= 1.0 && n_f.fract() == 0.0 && n_f <= 10_000.0) {
            return Err(CliError::config(
                "n",
                format!("must be a positive integer, got {n_f}"),
            ));
        }
        let n = n_f as usize;
        let power = scalar("P")?;
        let sigma = scalar("sigma")?;
        let seed = parse_u64("seed", self.get("seed").unwrap_or("1"))?;
        let uplink_iv = parse_interval(
            "uplink_interval",
            self.get("uplink_interval").unwrap_or("2,8"),
        )?;
        let cross_iv = parse_interval(
            "cross_interval",
            self.get("cross_interval").unwrap_or("0,1"),
        )?;
        let mut prior_rng = rng::stream(seed, rng::PRIORS, n as u64);
        let (mut up, mut cross) = sample_priors_uniform(n, uplink_iv, cross_iv, &mut prior_rng)
            .map_err(CliError::from)?;
        let mut explicit_means = false;
        if let Some(raw) = self.get("uplink_means") {
            up = expand("uplink_means", raw, n)?;
            explicit_means = true;
        }
        if let Some(raw) = self.get("cross_means") {
            cross = expand("cross_means", raw, n * (n - 1))?;
            explicit_means = true;
        }
        let channel =
            ChannelConfig::new(n, power, up, cross, sigma, seed).map_err(CliError::from)?;

        let util = UtilitySpec::new(scalar("kappa")?, scalar("a_max")?).map_err(CliError::from)?;
        let csi_raw = self.get("csi").unwrap_or("perfect");
        let csi = CsiMode::parse(csi_raw).ok_or_else(|| {
            CliError::config(
                "csi",
                format!("expected perfect, imperfect or mean_only, got `{csi_raw}`"),
            )
        })?;
        let horizon = parse_u64("horizon", self.get("horizon").unwrap_or("200000"))?;
        let warmup = match self.get("warmup") {
            Some(w) => parse_u64("warmup", w)?,
            None => horizon / 10,
        };
        let run = RunConfig {
            channel,
            util,
            v: scalar("V")?,
            gamma: scalar("gamma")?,
            csi,
            horizon,
            warmup,
            priors: (!explicit_means).then_some(PriorIntervals {
                uplink: uplink_iv,
                cross: cross_iv,
            }),
        };
        run.validate().map_err(CliError::from)?;

        let values = match (swept_list, self.get("values"), preset) {
            (Some(list), _, _) => Some(list),
            (None, Some(v), _) if !v.is_empty() => Some(parse_list("values", v)?),
            (None, _, Some(p)) if !p.default_values().is_empty() => {
                Some(parse_list("values", p.default_values())?)
            }
            _ => None,
        };
        if values.as_ref().is_some_and(Vec::is_empty) {
            return Err(CliError::config("values", "need at least one value"));
        }
        let mean_h1 = scalar("mean_h1")?;
        let mean_h12 = parse_list("mean_h12", self.get("mean_h12").unwrap_or("1"))?;
        let samples = parse_u64("samples", self.get("samples").unwrap_or("100000"))?;
        let points = parse_u64("points", self.get("points").unwrap_or("41"))?;
        if samples == 0 {
            return Err(CliError::config("samples", "must be >= 1"));
        }
        if points < 2 {
            return Err(CliError::config("points", "must be >= 2"));
        }
        Ok(Resolved {
            run,
            preset,
            values,
            csi_explicit: self.is_explicit("csi"),
            region: RegionSettings {
                mean_h1,
                mean_h12,
                samples: samples as usize,
                points: points as usize,
            },
            entries: self
                .values
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSettings {
    pub mean_h1: f64,
    pub mean_h12: Vec<f64>,
    pub samples: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub run: RunConfig,
    pub preset: Option<Preset>,
    pub values: Option<Vec<f64>>,
    pub csi_explicit: bool,
    pub region: RegionSettings,
    /// Final `key=value` pairs, for the manifest.
    pub entries: Vec<(String, String)>,
}

impl fmt::Display for Resolved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

fn parse_f64(key: &'static str, raw: &str) -> Result<f64, CliError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::config(key, format!("expected a number, got `{raw}`")))
}

fn parse_u64(key: &'static str, raw: &str) -> Result<u64, CliError> {
    let raw = raw.trim();
    if let Ok(x) = raw.parse::<u64>() {
        return Ok(x);
    }
    // accept integral floats such as 2e5
    match raw.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) => Ok(x as u64),
        _ => Err(CliError::config(
            key,
            format!("expected a non-negative integer, got `{raw}`"),
        )),
    }
}

fn parse_list(key: &'static str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_interval(key: &'static str, raw: &str) -> Result<Interval, CliError> {
    match parse_list(key, raw)?.as_slice() {
        &[lo, hi] => {
            if !(0.0 <= lo && lo <= hi && hi > 0.0) {
                return Err(CliError::config(
                    key,
                    format!("need 0 <= lo <= hi and hi > 0, got [{lo}, {hi}]"),
                ));
            }
            Ok(Interval { lo, hi })
        }
        _ => Err(CliError::config(
            key,
            format!("expected lo,hi, got `{raw}`"),
        )),
    }
}

/// One value repeated, or exactly `len` values.
fn expand(key: &'static str, raw: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let list = parse_list(key, raw)?;
    match list.len() {
        1 => Ok(vec![list[0]; len]),
        m if m == len => Ok(list),
        m => Err(CliError::config(
            key,
            format!("expected 1 or {len} values, got {m}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = Settings::defaults().resolve().unwrap();
        assert_eq!(r.run.channel.n, 10);
        assert_eq!(r.run.channel.power, 1.0);
        assert_eq!(r.run.util.kappa, 5.0);
        assert_eq!(r.run.gamma, 0.1);
        assert_eq!(r.run.channel.sigma, 0.5);
        assert!(r
            .run
            .channel
            .uplink_means
            .iter()
            .all(|m| (2.0..=8.0).contains(m)));
        assert!(r
            .run
            .channel
            .cross_means
            .iter()
            .all(|m| *m > 0.0 && *m <= 1.0));
        assert_eq!(r.run.warmup, r.run.horizon / 10);
    }

    #[test]
    fn errors_name_the_key() {
        for (k, v) in [
            ("gamma", "1.5"),
            ("n", "0"),
            ("csi", "psychic"),
            ("sigma", "abc"),
            ("uplink_interval", "3"),
        ] {
            let mut s = Settings::defaults();
            s.set(k, v).unwrap();
            match s.resolve() {
                Err(CliError::Config { key, .. }) => assert_eq!(key, k, "{k}={v}"),
                other => panic!("{k}={v}: {other:?}"),
            }
        }
        assert!(
            matches!(Settings::defaults().set("bogus", "1"), Err(CliError::Config { key, .. }) if key == "bogus")
        );
    }

    #[test]
    fn swept_key_list_beats_values_and_preset_defaults() {
        let mut s = Settings::defaults();
        s.merge_text("preset = sweep-V\nvalues = 3,6 # comment\n")
            .unwrap();
        assert_eq!(s.resolve().unwrap().values, Some(vec![3.0, 6.0]));
        s.merge_assignment("V=2,4").unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.values, Some(vec![2.0, 4.0]));
        assert_eq!(r.run.v, 2.0);
        let mut s = Settings::defaults();
        s.set("preset", "sweep-gamma").unwrap();
        assert_eq!(s.resolve().unwrap().values.unwrap().len(), 5);
    }

    #[test]
    fn explicit_means() {
        let mut s = Settings::defaults();
        s.merge_text("n=3\nuplink_means=2\ncross_means=1,1,1,1,1,0.5")
            .unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.run.channel.uplink_means, vec![2.0; 3]);
        assert_eq!(r.run.channel.cross_means[5], 0.5);
        assert!(r.run.priors.is_none());
        s.set("cross_means", "1,2").unwrap();
        assert!(matches!(s.resolve(), Err(CliError::Config { key, .. }) if key == "cross_means"));
    }
}
