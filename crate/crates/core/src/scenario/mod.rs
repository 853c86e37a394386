//! Scenario assembly: topology processes, failures, delays, metric traces,
//! and the named experiment presets.
//!
//! A run draws every random quantity from its own named stream (`costs`,
//! `topology/<slot>`, `failures`, `delays`, `init`), so identical configs give
//! bitwise-identical traces and toggling one adversity leaves the others' draws unchanged.

mod bench;
mod config;
mod keys;
mod presets;
mod run;

pub use bench::{scaling_benchmark, BenchRow, BenchTable};
pub use config::{CostSpec, PenaltySpec, ScenarioConfig, TopologySpec, DEFAULT_EARLY_STOP};
pub use keys::{apply_overrides, config_entries, set_key, KNOWN_KEYS};
pub use presets::{
    preset, Preset, DISPATCH_WEIGHT_RANGE, FIG_DELAY_ETAS, FIG_DELAY_TAUS, FIG_FAIL_OPTIONS, FIG_FAIL_WINDOWS,
    PRESET_NAMES, PRESET_WEIGHT_RANGE,
};
pub use run::{
    failure_mask, run, DivergenceReport, RunOutput, RunSummary, Trace, TraceRecord, DIVERGENCE_SCALE, TRACE_HEADER,
};
