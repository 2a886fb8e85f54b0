//! Experiment harness behind the command-line tool: three-way comparisons,
//! figure sweeps, the verification grid and their output formats.

mod compare;
pub mod config;
pub mod format;
mod sweep;
mod verify;

pub use compare::{compare_point, CompareOptions, ComparisonRow, Engines, Status};
pub use sweep::{fig3_csv, fig4_csv, sweep_fig3, sweep_fig4, Fig3Spec, Fig4Row, Fig4Spec};
pub use verify::{run_verify, ternary_simplex, VerifyGrid, VerifyReport, VerifySummary};
