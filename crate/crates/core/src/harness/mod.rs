//! Configuration, presets and parameter sweeps behind the command-line tool.

pub mod config;
pub mod preset;
pub mod sweep;

pub use config::{set_parameter, Axis, AxisScale, Quantity, SweepConfig, PARAMETER_KEYS};
pub use preset::{preset, validate_hierarchy, FeasibilityPreset, DEFAULT_HIERARCHY_FACTOR};
pub use sweep::{mode_diff, run_sweep, Cell, ModeDiff, SweepRow, SweepTable};
