//! Flat `key = value` view of [`ScenarioConfig`] with dotted keys.
//!
//! Selector keys (`*.kind`) switch a component to that variant with default
//! parameters; parameter keys then refine the current variant and are rejected
//! when they do not belong to it. [`apply_overrides`] applies selectors first, so
//! the order of entries in a file does not matter.

use std::path::Path;

use super::config::{CostSpec, PenaltySpec, ScenarioConfig, TopologySpec};
use crate::dynamics::{DelayMode, InitMode};
use crate::graph::WeightedGraph;
use crate::mappings::MapKind;
use crate::numeric::format_float;
use crate::objective::parse_cost_csv;
use crate::{Error, Result};

/// Every accepted key, in serialization order.
pub const KNOWN_KEYS: &[&str] = &[
    "n",
    "b",
    "eta",
    "horizon",
    "seed",
    "stride",
    "window",
    "early_stop",
    "topology.kind",
    "topology.p",
    "topology.ps",
    "topology.period",
    "topology.file",
    "topology.weight_min",
    "topology.weight_max",
    "topology.require_connected",
    "costs.kind",
    "costs.omega_max",
    "costs.alpha_max",
    "costs.a_min",
    "costs.a_max",
    "costs.b_min",
    "costs.b_max",
    "costs.c",
    "costs.file",
    "penalty.kind",
    "penalty.sigma",
    "penalty.exponent",
    "penalty.mu",
    "penalty.lo",
    "penalty.hi",
    "maps.node.kind",
    "maps.node.rho",
    "maps.node.level",
    "maps.node.exponent",
    "maps.node.domain_min",
    "maps.node.domain_max",
    "maps.link.kind",
    "maps.link.rho",
    "maps.link.level",
    "maps.link.exponent",
    "maps.link.domain_min",
    "maps.link.domain_max",
    "adversity.p_fail",
    "adversity.tau_bar",
    "adversity.delay_mode",
    "adversity.asymmetric",
    "init.kind",
    "init.values",
];

const FILE_KINDS: [(&str, &str, &str); 2] =
    [("topology.kind", "edgelist", "topology.file"), ("costs.kind", "table", "costs.file")];

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn float(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| bad(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(bad(key, format!("must be finite, got {v}")));
    }
    Ok(x)
}

fn float_where(key: &str, v: &str, ok: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
    let x = float(key, v)?;
    if ok(x) {
        Ok(x)
    } else {
        Err(bad(key, format!("{x} out of range, expected {range}")))
    }
}

fn positive(key: &str, v: &str) -> Result<f64> {
    float_where(key, v, |x| x > 0.0, "> 0")
}

fn integer<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, format!("expected a nonnegative integer, got `{v}`")))
}

fn integer_at_least<T: std::str::FromStr + PartialOrd + std::fmt::Display>(key: &str, v: &str, min: T) -> Result<T> {
    let x: T = integer(key, v)?;
    if x < min {
        return Err(bad(key, format!("{x} out of range, expected >= {min}")));
    }
    Ok(x)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{v}`"))),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| float(key, s.trim())).collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(",")
}

fn wrong_kind(key: &str, selector: &str) -> Error {
    bad(key, format!("not a parameter of the current `{selector}`"))
}

fn default_map(kind: &str, key: &str) -> Result<MapKind> {
    Ok(match kind {
        "identity" => MapKind::Identity,
        "logq" => MapKind::LogQuantizer { rho: 0.125 },
        "saturation" => MapKind::Saturation { level: 1.0, domain_max: 10.0 },
        "sign_power" => MapKind::SignPower { exponent: 0.5, domain_min: 1e-2, domain_max: 1e3 },
        other => {
            return Err(bad(key, format!("unknown map `{other}`; expected identity, logq, saturation or sign_power")))
        }
    })
}

fn map_kind_name(m: &MapKind) -> &'static str {
    match m {
        MapKind::Identity => "identity",
        MapKind::LogQuantizer { .. } => "logq",
        MapKind::Saturation { .. } => "saturation",
        MapKind::SignPower { .. } => "sign_power",
    }
}

fn set_map(map: &mut MapKind, key: &str, param: &str, v: &str) -> Result<()> {
    let selector = &key[..key.len() - param.len()];
    let selector = format!("{selector}kind");
    if param == "kind" {
        if map_kind_name(map) != v {
            *map = default_map(v, key)?;
        }
        return Ok(());
    }
    match (map, param) {
        (MapKind::LogQuantizer { rho }, "rho") => *rho = positive(key, v)?,
        (MapKind::Saturation { level, .. }, "level") => *level = positive(key, v)?,
        (MapKind::Saturation { domain_max, .. }, "domain_max") => *domain_max = positive(key, v)?,
        (MapKind::SignPower { exponent, .. }, "exponent") => {
            *exponent = float_where(key, v, |x| x > 0.0 && x <= 1.0, "(0, 1]")?
        }
        (MapKind::SignPower { domain_min, .. }, "domain_min") => *domain_min = positive(key, v)?,
        (MapKind::SignPower { domain_max, .. }, "domain_max") => *domain_max = positive(key, v)?,
        _ => return Err(wrong_kind(key, &selector)),
    }
    Ok(())
}

fn map_entries(prefix: &str, m: &MapKind, out: &mut Vec<(String, String)>) {
    let mut push = |k: &str, v: String| out.push((format!("{prefix}.{k}"), v));
    push("kind", map_kind_name(m).into());
    match *m {
        MapKind::Identity => {}
        MapKind::LogQuantizer { rho } => push("rho", format_float(rho)),
        MapKind::Saturation { level, domain_max } => {
            push("level", format_float(level));
            push("domain_max", format_float(domain_max));
        }
        MapKind::SignPower { exponent, domain_min, domain_max } => {
            push("exponent", format_float(exponent));
            push("domain_min", format_float(domain_min));
            push("domain_max", format_float(domain_max));
        }
    }
}

fn read(key: &str, path: &str) -> Result<String> {
    std::fs::read_to_string(Path::new(path)).map_err(|e| bad(key, format!("cannot read `{path}`: {e}")))
}

/// Sets one key. File-valued keys (`topology.file`, `costs.file`) read the
/// named file relative to the working directory.
pub fn set_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<()> {
    if !KNOWN_KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown key `{key}`")));
    }
    let v = value.trim();
    match key {
        "n" => cfg.n = integer_at_least(key, v, 2usize)?,
        "b" => cfg.b = float(key, v)?,
        "eta" => cfg.eta = positive(key, v)?,
        "horizon" => cfg.horizon = integer_at_least(key, v, 1u64)?,
        "seed" => cfg.seed = integer(key, v)?,
        "stride" => cfg.stride = integer_at_least(key, v, 1u64)?,
        "window" => cfg.window = integer(key, v)?,
        "early_stop" => cfg.early_stop = if v == "none" { None } else { Some(positive(key, v)?) },
        "topology.kind" => match (v, &cfg.topology) {
            ("er", TopologySpec::Er { .. }) | ("cycle", TopologySpec::Cycle { .. }) => {}
            ("edgelist", TopologySpec::EdgeList { .. }) => {}
            ("er", _) => cfg.topology = TopologySpec::Er { p: 0.2 },
            ("cycle", _) => cfg.topology = TopologySpec::Cycle { ps: vec![0.2, 0.1, 0.05, 0.01], period: 25 },
            ("edgelist", _) => {
                cfg.topology = TopologySpec::EdgeList { source: String::new(), graph: WeightedGraph::empty(cfg.n) }
            }
            (other, _) => return Err(bad(key, format!("unknown topology `{other}`; expected er, cycle or edgelist"))),
        },
        "topology.p" => match &mut cfg.topology {
            TopologySpec::Er { p } => *p = float_where(key, v, |x| x > 0.0 && x <= 1.0, "(0, 1]")?,
            _ => return Err(wrong_kind(key, "topology.kind")),
        },
        "topology.ps" => match &mut cfg.topology {
            TopologySpec::Cycle { ps, .. } => {
                let xs = list(key, v)?;
                if let Some(p) = xs.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
                    return Err(bad(key, format!("{p} out of range, expected (0, 1]")));
                }
                *ps = xs;
            }
            _ => return Err(wrong_kind(key, "topology.kind")),
        },
        "topology.period" => match &mut cfg.topology {
            TopologySpec::Cycle { period, .. } => *period = integer_at_least(key, v, 1u64)?,
            _ => return Err(wrong_kind(key, "topology.kind")),
        },
        "topology.file" => match &mut cfg.topology {
            TopologySpec::EdgeList { source, graph } => {
                *graph = WeightedGraph::parse_edge_list(&read(key, v)?).map_err(|e| bad(key, e))?;
                *source = v.to_string();
            }
            _ => return Err(wrong_kind(key, "topology.kind")),
        },
        "topology.weight_min" => cfg.weight_range.0 = positive(key, v)?,
        "topology.weight_max" => cfg.weight_range.1 = positive(key, v)?,
        "topology.require_connected" => cfg.require_connected = boolean(key, v)?,
        "costs.kind" => match (v, &cfg.costs) {
            ("quartic", CostSpec::Quartic { .. })
            | ("quadratic", CostSpec::Quadratic { .. })
            | ("table", CostSpec::Table { .. }) => {}
            ("quartic", _) => cfg.costs = CostSpec::Quartic { omega_max: 0.02, alpha_max: 2.0 },
            ("quadratic", _) => cfg.costs = CostSpec::Quadratic { a: (0.02, 0.08), b: (2.0, 6.0), c: 0.0 },
            ("table", _) => cfg.costs = CostSpec::Table { source: String::new(), rows: Vec::new() },
            (other, _) => {
                return Err(bad(key, format!("unknown cost family `{other}`; expected quartic, quadratic or table")))
            }
        },
        "costs.omega_max" | "costs.alpha_max" => match &mut cfg.costs {
            CostSpec::Quartic { omega_max, alpha_max } => {
                let slot = if key == "costs.omega_max" { omega_max } else { alpha_max };
                *slot = positive(key, v)?;
            }
            _ => return Err(wrong_kind(key, "costs.kind")),
        },
        "costs.a_min" | "costs.a_max" | "costs.b_min" | "costs.b_max" | "costs.c" => match &mut cfg.costs {
            CostSpec::Quadratic { a, b, c } => match key {
                "costs.a_min" => a.0 = positive(key, v)?,
                "costs.a_max" => a.1 = positive(key, v)?,
                "costs.b_min" => b.0 = float(key, v)?,
                "costs.b_max" => b.1 = float(key, v)?,
                _ => *c = float(key, v)?,
            },
            _ => return Err(wrong_kind(key, "costs.kind")),
        },
        "costs.file" => match &mut cfg.costs {
            CostSpec::Table { source, rows } => {
                *rows = parse_cost_csv(&read(key, v)?).map_err(|e| bad(key, e))?;
                *source = v.to_string();
            }
            _ => return Err(wrong_kind(key, "costs.kind")),
        },
        "penalty.kind" => match (v, cfg.penalty) {
            ("none", _) => cfg.penalty = PenaltySpec::None,
            ("box", PenaltySpec::Box { .. }) | ("smooth_log", PenaltySpec::SmoothLog { .. }) => {}
            ("box", _) => cfg.penalty = PenaltySpec::Box { sigma: 20.0, exponent: 2, lo: 1.0, hi: 10.0 },
            ("smooth_log", _) => cfg.penalty = PenaltySpec::SmoothLog { mu: 5.0, lo: 1.0, hi: 10.0 },
            (other, _) => return Err(bad(key, format!("unknown penalty `{other}`; expected none, box or smooth_log"))),
        },
        "penalty.sigma" | "penalty.exponent" | "penalty.mu" | "penalty.lo" | "penalty.hi" => {
            match (&mut cfg.penalty, key) {
                (PenaltySpec::Box { sigma, .. }, "penalty.sigma") => *sigma = positive(key, v)?,
                (PenaltySpec::Box { exponent, .. }, "penalty.exponent") => *exponent = integer_at_least(key, v, 2u32)?,
                (PenaltySpec::SmoothLog { mu, .. }, "penalty.mu") => *mu = positive(key, v)?,
                (PenaltySpec::Box { lo, .. } | PenaltySpec::SmoothLog { lo, .. }, "penalty.lo") => *lo = float(key, v)?,
                (PenaltySpec::Box { hi, .. } | PenaltySpec::SmoothLog { hi, .. }, "penalty.hi") => *hi = float(key, v)?,
                _ => return Err(wrong_kind(key, "penalty.kind")),
            }
        }
        _ if key.starts_with("maps.node.") => set_map(&mut cfg.node_map, key, &key["maps.node.".len()..], v)?,
        _ if key.starts_with("maps.link.") => set_map(&mut cfg.link_map, key, &key["maps.link.".len()..], v)?,
        "adversity.p_fail" => cfg.p_fail = float_where(key, v, |x| (0.0..=1.0).contains(&x), "[0, 1]")?,
        "adversity.tau_bar" => cfg.tau_bar = integer(key, v)?,
        "adversity.delay_mode" => {
            cfg.delay_mode = match v {
                "uniform" => DelayMode::Uniform,
                "fixed" => DelayMode::Fixed,
                "per_link" => DelayMode::PerLinkConstant,
                other => {
                    return Err(bad(key, format!("unknown delay mode `{other}`; expected uniform, fixed or per_link")))
                }
            }
        }
        "adversity.asymmetric" => cfg.asymmetric_delays = boolean(key, v)?,
        "init.kind" => match (v, &cfg.init) {
            ("equal", _) => cfg.init = InitMode::Equal,
            ("random_simplex", _) => cfg.init = InitMode::RandomSimplex,
            ("explicit", InitMode::Explicit(_)) => {}
            ("explicit", _) => cfg.init = InitMode::Explicit(Vec::new()),
            (other, _) => {
                return Err(bad(key, format!("unknown init `{other}`; expected equal, random_simplex or explicit")))
            }
        },
        "init.values" => match &mut cfg.init {
            InitMode::Explicit(xs) => *xs = list(key, v)?,
            _ => return Err(wrong_kind(key, "init.kind")),
        },
        other => return Err(Error::Config(format!("unknown key `{other}`"))),
    }
    Ok(())
}

fn is_selector(key: &str) -> bool {
    key.ends_with(".kind")
}

/// Applies `entries` with selectors first, then the rest in the given order.
/// On failure returns the index of the offending entry with its error.
pub fn apply_overrides<K: AsRef<str>, V: AsRef<str>>(
    cfg: &mut ScenarioConfig,
    entries: &[(K, V)],
) -> std::result::Result<(), (usize, Error)> {
    let order = entries
        .iter()
        .enumerate()
        .filter(|(_, (k, _))| is_selector(k.as_ref()))
        .chain(entries.iter().enumerate().filter(|(_, (k, _))| !is_selector(k.as_ref())));
    for (idx, (k, v)) in order {
        set_key(cfg, k.as_ref(), v.as_ref()).map_err(|e| (idx, e))?;
    }
    for (selector, kind, file_key) in FILE_KINDS {
        let pos = entries.iter().position(|(k, v)| k.as_ref() == selector && v.as_ref().trim() == kind);
        if let Some(idx) = pos {
            if !entries.iter().any(|(k, _)| k.as_ref() == file_key) {
                return Err((idx, bad(selector, format!("`{kind}` requires `{file_key}`"))));
            }
        }
    }
    Ok(())
}

/// Entries that reproduce `cfg` when applied to the default configuration.
pub fn config_entries(cfg: &ScenarioConfig) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    push("n", cfg.n.to_string());
    push("b", format_float(cfg.b));
    push("eta", format_float(cfg.eta));
    push("horizon", cfg.horizon.to_string());
    push("seed", cfg.seed.to_string());
    push("stride", cfg.stride.to_string());
    push("window", cfg.window.to_string());
    push("early_stop", cfg.early_stop.map_or_else(|| "none".to_string(), format_float));
    match &cfg.topology {
        TopologySpec::Er { p } => {
            push("topology.kind", "er".into());
            push("topology.p", format_float(*p));
        }
        TopologySpec::Cycle { ps, period } => {
            push("topology.kind", "cycle".into());
            push("topology.ps", join(ps));
            push("topology.period", period.to_string());
        }
        TopologySpec::EdgeList { source, .. } => {
            push("topology.kind", "edgelist".into());
            push("topology.file", source.clone());
        }
    }
    push("topology.weight_min", format_float(cfg.weight_range.0));
    push("topology.weight_max", format_float(cfg.weight_range.1));
    push("topology.require_connected", cfg.require_connected.to_string());
    match &cfg.costs {
        CostSpec::Quartic { omega_max, alpha_max } => {
            push("costs.kind", "quartic".into());
            push("costs.omega_max", format_float(*omega_max));
            push("costs.alpha_max", format_float(*alpha_max));
        }
        CostSpec::Quadratic { a, b, c } => {
            push("costs.kind", "quadratic".into());
            push("costs.a_min", format_float(a.0));
            push("costs.a_max", format_float(a.1));
            push("costs.b_min", format_float(b.0));
            push("costs.b_max", format_float(b.1));
            push("costs.c", format_float(*c));
        }
        CostSpec::Table { source, .. } => {
            push("costs.kind", "table".into());
            push("costs.file", source.clone());
        }
    }
    match cfg.penalty {
        PenaltySpec::None => push("penalty.kind", "none".into()),
        PenaltySpec::Box { sigma, exponent, lo, hi } => {
            push("penalty.kind", "box".into());
            push("penalty.sigma", format_float(sigma));
            push("penalty.exponent", exponent.to_string());
            push("penalty.lo", format_float(lo));
            push("penalty.hi", format_float(hi));
        }
        PenaltySpec::SmoothLog { mu, lo, hi } => {
            push("penalty.kind", "smooth_log".into());
            push("penalty.mu", format_float(mu));
            push("penalty.lo", format_float(lo));
            push("penalty.hi", format_float(hi));
        }
    }
    map_entries("maps.node", &cfg.node_map, &mut out);
    map_entries("maps.link", &cfg.link_map, &mut out);
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    push("adversity.p_fail", format_float(cfg.p_fail));
    push("adversity.tau_bar", cfg.tau_bar.to_string());
    let mode = match cfg.delay_mode {
        DelayMode::Uniform => "uniform",
        DelayMode::Fixed => "fixed",
        DelayMode::PerLinkConstant => "per_link",
    };
    push("adversity.delay_mode", mode.into());
    push("adversity.asymmetric", cfg.asymmetric_delays.to_string());
    match &cfg.init {
        InitMode::Equal => push("init.kind", "equal".into()),
        InitMode::RandomSimplex => push("init.kind", "random_simplex".into()),
        InitMode::Explicit(xs) => {
            push("init.kind", "explicit".into());
            push("init.values", join(xs));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, PRESET_NAMES};

    #[test]
    fn every_serialized_key_is_known() {
        for name in PRESET_NAMES {
            for (k, _) in config_entries(&preset(name).unwrap().config) {
                assert!(KNOWN_KEYS.contains(&k.as_str()), "{k}");
            }
        }
    }

    #[test]
    fn presets_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap().config;
            let mut back = ScenarioConfig::default();
            apply_overrides(&mut back, &config_entries(&cfg)).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn order_of_selectors_does_not_matter() {
        let mut a = ScenarioConfig::default();
        apply_overrides(&mut a, &[("maps.node.rho", "0.0009765625"), ("maps.node.kind", "logq")]).unwrap();
        assert_eq!(a.node_map, MapKind::LogQuantizer { rho: 1.0 / 1024.0 });
    }

    #[test]
    fn errors_name_key_and_entry() {
        let mut cfg = ScenarioConfig::default();
        let (idx, err) = apply_overrides(&mut cfg, &[("n", "10"), ("adversity.p_fail", "1.5")]).unwrap_err();
        assert_eq!(idx, 1);
        assert!(err.to_string().contains("adversity.p_fail"), "{err}");
        let (idx, err) = apply_overrides(&mut cfg, &[("topology.pp", "0.2")]).unwrap_err();
        assert_eq!(idx, 0);
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(set_key(&mut cfg, "maps.link.rho", "0.1").is_err());
        assert!(apply_overrides(&mut cfg, &[("costs.kind", "table")]).is_err());
    }
}
