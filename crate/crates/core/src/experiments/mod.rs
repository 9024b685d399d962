//! Parameter sweeps over the spectral range, step size tuning and method
//! comparisons, with CSV tables and SVG charts.

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::{AlphaSearch, AlphaSpec, ClassKind, ExperimentConfig, InitKind};
pub use sweep::{compare_methods, optimize_alpha, run_sweep, solve_point, AlphaOptimum, Comparison, SweepTable};
