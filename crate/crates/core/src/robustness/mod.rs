//! Stability of the scaling fit under edge thinning and null-model rewiring.

mod backbone;
mod reshuffle;

pub use backbone::{
    backbone, backbone_sweep, backbone_sweep_with, backbone_with, sweep_csv, write_sweep_csv,
    BackbonePoint, BackboneRule, FlagCombine, RemovalCount,
};
pub use reshuffle::{
    reshuffle, reshuffle_battery, reshuffle_battery_with, reshuffle_with_stats, run_seed, LinkMode,
    ModeSummary, Moments, ReshuffleMode, ReshuffleReport, ReshuffleStats, WeightMode,
};
