//! Stochastic-trajectory simulator for quantum barrier scattering in one
//! dimension, with absorptive (complex) barriers and two-channel coupling.
//!
//! The crate builds wave functions as superpositions of stationary
//! scattering states, derives forward and backward drift fields from them,
//! and propagates walker ensembles whose statistics reproduce |psi|^2.
//! Walker paths carry a channel label that jumps with rates set by the
//! imaginary or off-diagonal part of the potential, which is what makes
//! traversal-time measurements on absorptive and coupled barriers possible.

pub mod analysis;
pub mod barrier;
pub mod channel;
pub mod driver;
pub mod dynamics;
pub mod error;
pub mod fp;
pub mod quadrature;
pub mod rng;
pub mod scattering;
pub mod wavefield;

pub use analysis::{
    fd_histogram, grid_from_moments, l1_shape_distance, GridDensity, GridSpec, TimeHistogram,
    TimeStatistics,
};
pub use barrier::{BarrierSpec, PacketSpec};
pub use channel::{ChannelField, ChannelSpec};
pub use driver::{
    face_exit_time, find_plateau, run_channel_traversal, run_traversal, sweep_absorption, Plateau,
    PlateauSpec, SweepPoint, TraversalOutcome, TraversalSpec,
};
pub use dynamics::{
    run_ensemble, run_passage, Direction, EnsembleRun, InitialLaw, Label, PassageRun, PassageSpec,
    PathTimes, RunSpec, StepConfig, StepPolicy, System, TimeGrid,
};
pub use error::{NelsonError, Result};
pub use fp::{absorption_sink, evolve_density, fp_step, tabulate_velocity, wkb_closed_form};
pub use quadrature::{QuadRule, QuadratureSpec};
pub use scattering::{stationary_coefficients, ScatteringState};
pub use wavefield::{drift_pair, free_packet, FieldSlice, PsiEval, WaveField};
