//! Deep-equilibrium style fixed-point inference over contractive
//! weight-tied cells, with warm-started streaming solves that carry each
//! frame's representation into the next.
//!
//! * [`linalg`]: dense vectors/matrices, norms, spectral norm estimates
//! * [`cell`]: contractive cells `f(z; x) = φ(A·z + U·x + b)`
//! * [`solver`]: Picard and limited-memory Broyden solvers
//! * [`stream`]: per-frame budgeted solves under a warm-start policy
//! * [`sequence`]: smooth synthetic input streams with shot changes
//! * [`bench`]: experiment presets, metrics, CSV and SVG output

pub mod bench;
pub mod cell;
pub mod error;
pub mod linalg;
pub mod sequence;
pub mod solver;
pub mod stream;

pub use cell::{
    analytic_fixed_point, cell_apply, make_multiscale_cell, make_random_cell, residual,
    ActivationKind, EquilibriumCell, MultiscaleLayout, Scale,
};
pub use error::{Error, Result};
pub use linalg::{l2_norm, matvec, sq_distance, spectral_norm_estimate, Matrix, Vector};
pub use sequence::{generate_sequence, SequenceMode, SequenceSpec};
pub use solver::{
    broyden_solve, picard_solve, reference_fixed_point, solve, FixedPointSolver, SolveResult,
    SolverConfig, SolverMethod, SolverRegistry,
};
pub use stream::{
    replay_reference_chain, stream_infer, BudgetSchedule, FrameRecord, PolicyRegistry,
    StartPoint, StreamOptions, WarmStart, WarmStartPolicy,
};
