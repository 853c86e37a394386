use super::config::{CostSpec, PenaltySpec, ScenarioConfig, TopologySpec, DEFAULT_EARLY_STOP};
use super::keys::apply_overrides;
use crate::dynamics::{DelayMode, InitMode};
use crate::mappings::MapKind;
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 7] =
    ["fig_dyn", "fig_dyn_logpenalty", "fig_fail", "fig_delay", "dispatch", "dispatch_uniform", "dispatch_adversity"];

/// Link weights of the ER presets.
pub const PRESET_WEIGHT_RANGE: (f64, f64) = (0.025, 0.05);
pub const DISPATCH_WEIGHT_RANGE: (f64, f64) = (0.5, 1.0);

/// A named configuration plus its reference parameter variants, each a list of
/// `key = value` overrides in configuration-file syntax.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub config: ScenarioConfig,
    pub variants: Vec<Vec<(&'static str, String)>>,
}

const QUARTIC: CostSpec = CostSpec::Quartic { omega_max: 0.02, alpha_max: 2.0 };
const QUARTIC_BOX: PenaltySpec = PenaltySpec::Box { sigma: 20.0, exponent: 2, lo: 1.0, hi: 10.0 };
pub const FIG_FAIL_OPTIONS: [f64; 4] = [0.5, 0.7, 0.85, 0.92];
/// Windows used with each entry of [`FIG_FAIL_OPTIONS`]: minimal windows where
/// no reference window is given, the reference `T = 2` and `T = 4` otherwise.
pub const FIG_FAIL_WINDOWS: [u32; 4] = [0, 0, 2, 4];
pub const FIG_DELAY_TAUS: [u32; 3] = [2, 4, 6];
pub const FIG_DELAY_ETAS: [f64; 2] = [2.0, 0.5];

fn log_q(rho: f64) -> MapKind {
    MapKind::LogQuantizer { rho }
}

fn quartic_base() -> ScenarioConfig {
    ScenarioConfig {
        n: 50,
        b: 200.0,
        topology: TopologySpec::Er { p: 0.2 },
        weight_range: PRESET_WEIGHT_RANGE,
        require_connected: false,
        costs: QUARTIC,
        penalty: QUARTIC_BOX,
        node_map: MapKind::Identity,
        link_map: MapKind::Identity,
        eta: 0.1,
        horizon: 3000,
        p_fail: 0.0,
        tau_bar: 0,
        delay_mode: DelayMode::Uniform,
        asymmetric_delays: false,
        init: InitMode::Equal,
        seed: 0,
        stride: 1,
        early_stop: Some(DEFAULT_EARLY_STOP),
        window: 0,
    }
}

fn dispatch_base() -> ScenarioConfig {
    ScenarioConfig {
        n: 10,
        b: 600.0,
        topology: TopologySpec::Er { p: 0.2 },
        weight_range: DISPATCH_WEIGHT_RANGE,
        require_connected: true,
        costs: CostSpec::Quadratic { a: (0.02, 0.08), b: (2.0, 6.0), c: 0.0 },
        penalty: PenaltySpec::Box { sigma: 40.0, exponent: 2, lo: 20.0, hi: 110.0 },
        node_map: MapKind::SignPower { exponent: 0.5, domain_min: 1e-2, domain_max: 1e3 },
        link_map: MapKind::Identity,
        eta: 0.1,
        horizon: 3000,
        p_fail: 0.0,
        tau_bar: 0,
        delay_mode: DelayMode::Uniform,
        asymmetric_delays: false,
        init: InitMode::RandomSimplex,
        seed: 0,
        stride: 1,
        early_stop: Some(DEFAULT_EARLY_STOP),
        window: 0,
    }
}

impl Preset {
    /// The base configuration with each variant's overrides applied.
    pub fn variant_configs(&self) -> Result<Vec<ScenarioConfig>> {
        self.variants
            .iter()
            .map(|overrides| {
                let mut cfg = self.config.clone();
                apply_overrides(&mut cfg, overrides).map_err(|(_, e)| e)?;
                Ok(cfg)
            })
            .collect()
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let (name, config, variants): (&'static str, ScenarioConfig, Vec<Vec<(&'static str, String)>>) = match name {
        "fig_dyn" | "fig_dyn_logpenalty" => {
            let penalty =
                if name == "fig_dyn" { QUARTIC_BOX } else { PenaltySpec::SmoothLog { mu: 5.0, lo: 1.0, hi: 10.0 } };
            let cfg = ScenarioConfig {
                topology: TopologySpec::Cycle { ps: vec![0.2, 0.1, 0.05, 0.01], period: 25 },
                penalty,
                node_map: log_q(1.0 / 1024.0),
                link_map: log_q(1.0 / 8.0),
                window: 4 * 25 - 1,
                ..quartic_base()
            };
            let linear = vec![("maps.node.kind", "identity".to_string()), ("maps.link.kind", "identity".to_string())];
            let fixed = if name == "fig_dyn" { "fig_dyn" } else { "fig_dyn_logpenalty" };
            (fixed, cfg, vec![Vec::new(), linear])
        }
        "fig_fail" => {
            let cfg = ScenarioConfig {
                eta: 0.2,
                horizon: 5000,
                p_fail: FIG_FAIL_OPTIONS[0],
                window: FIG_FAIL_WINDOWS[0],
                ..quartic_base()
            };
            let variants = FIG_FAIL_OPTIONS
                .iter()
                .zip(FIG_FAIL_WINDOWS)
                .map(|(p, w)| vec![("adversity.p_fail", p.to_string()), ("window", w.to_string())])
                .collect();
            ("fig_fail", cfg, variants)
        }
        "fig_delay" => {
            let cfg = ScenarioConfig {
                eta: FIG_DELAY_ETAS[1],
                horizon: 5000,
                link_map: log_q(1.0 / 8.0),
                tau_bar: FIG_DELAY_TAUS[0],
                ..quartic_base()
            };
            let variants = FIG_DELAY_ETAS
                .iter()
                .flat_map(|eta| {
                    FIG_DELAY_TAUS
                        .iter()
                        .map(move |t| vec![("eta", eta.to_string()), ("adversity.tau_bar", t.to_string())])
                })
                .collect();
            ("fig_delay", cfg, variants)
        }
        "dispatch" => ("dispatch", dispatch_base(), vec![Vec::new()]),
        "dispatch_uniform" => {
            let cfg = ScenarioConfig {
                costs: CostSpec::Quadratic { a: (0.05, 0.05), b: (4.0, 4.0), c: 0.0 },
                ..dispatch_base()
            };
            ("dispatch_uniform", cfg, vec![Vec::new()])
        }
        "dispatch_adversity" => {
            let cfg =
                ScenarioConfig { link_map: log_q(1.0 / 8.0), p_fail: 0.5, tau_bar: 2, window: 4, ..dispatch_base() };
            ("dispatch_adversity", cfg, vec![Vec::new()])
        }
        other => {
            return Err(Error::Config(format!("unknown preset `{other}`; known presets: {}", PRESET_NAMES.join(", "))))
        }
    };
    Ok(Preset { name, config, variants })
}
