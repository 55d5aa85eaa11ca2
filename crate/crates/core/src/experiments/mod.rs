//! Monte Carlo harnesses: recovery phase-diagram sweeps and empirical
//! checks of the concentration and tail bounds used in the recovery proofs.

pub mod sweep;
pub mod theory;
pub mod verify;

pub use sweep::{run_phase_sweep, CellResult, Parametrization, SweepConfig, SweepResult};
pub use theory::{theory_classify, Classification, ConjectureLabel, Region};
pub use verify::Report;
