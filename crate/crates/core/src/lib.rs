//! Hamiltonian learning for periodically driven qubit systems from sampled
//! Floquet-mode trajectories.

pub mod drive_model;
pub mod error;
pub mod floquet_engine;
pub mod learner;
pub mod pauli_algebra;
pub mod stats;
pub mod theory_lab;

pub use drive_model::{
    frobenius_error, generate_instance, tail_truncation_error, Decay, DriveSpec, GenerationParams, InstanceRecord,
    TailOrder, TailParams, TailSpec, ERROR_GRID,
};
pub use error::{Error, Result};
pub use floquet_engine::{
    band_residual, band_vectors, floquet_eigen, floquet_mode_trajectory, fold_quasienergy, monodromy, propagate,
    simulate, BandVectors, FloquetSolution, Simulation, TimeGrid, Trajectory,
};
pub use learner::{
    adaptive_truncation, assemble_system, beta_entry, bound_error, bound_required_s, correlator, fit_trajectory,
    reconstruct, resource_estimate, solve, stacking_range, AdaptiveOutcome, BoundConstants, DesignSystem, Fit,
    FitOptions, NoiseModel, NoiseTarget, ObservableSet, ReconstructionResult, ResourceEstimate,
};
pub use pauli_algebra::{
    build_basis, Geometry, LatticeSpec, Model, OperatorBasis, Pauli, PauliString, PauliSum, MAX_QUBITS,
};
pub use stats::{linear_fit, spearman, LinearFit};
pub use theory_lab::{
    bernstein_base, bernstein_rows, calibrate_bernstein, run_trial, run_trials, scaling_fit, verify_bounds,
    write_trials_csv, BoundsSummary, Calibration, MismatchKind, RowFamily, ScalingAxis, ScalingFit, SpectralEvent,
    SyntheticDesignSpec, TrialRecord,
};
