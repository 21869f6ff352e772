//! Contraction-based nonlinear MPC without stability-related terminal
//! constraints.
//!
//! The controller solves, at every step, a finite-horizon problem whose cost
//! couples the stage cost with the minimum of a contraction map `W` along
//! the predicted trajectory, weighted against an internal budget `z` that
//! shrinks whenever `W` has reached it:
//!
//! ```text
//! minimize   z * Phi(x, u, q) + alpha * min_{l<=q} W(x_l)
//! over       u in U^q,  q in {1..N},  states in G
//! ```
//!
//! No terminal set or terminal penalty is involved; the closed loop is
//! driven to the origin by the budget dynamics alone, and every inequality
//! the convergence argument uses is replayed at runtime by a report-only
//! checker.
//!
//! ## Where to start
//!
//! The `examples/` directory is the primary tour, one runnable program per
//! capability:
//!
//! ```text
//! examples/
//! ├── closed_loop.rs               # stabilize the nonholonomic system, N = 3
//! ├── certify_contraction.rs       # randomized certification of the W-contraction
//! ├── analytic_sequence.rs         # the three-step analytic contraction seed
//! ├── stage_cost_shaping.rs        # L1 vs L2: shaping the closed-loop path
//! ├── two_stage_vs_free_horizon.rs # both solve pipelines on the same run
//! ├── inequality_diagnostics.rs    # the inequality checker, plus a negative control
//! └── constraint_tightening.rs     # one-step invariance audit of the tightened set
//! ```
//!
//! Run one with `cargo run --release --example closed_loop`.
//!
//! ## Batch runs
//!
//! The `cnmpc` binary drives the same machinery from JSON configs: see
//! [`cli`] and the shipped files under `profiles/`.

pub mod cli;
pub mod contraction;
pub mod controller;
pub mod error;
pub mod model;
pub mod objective;
pub mod solver;

pub use contraction::{
    analytic_contraction_sequence, verify_contraction, ContractionReport, ContractionSpec,
};
pub use controller::{
    mpc_step, run_diagnostics, simulate, z_update, ControllerState, DiagnosticReport, Mode, SimLog,
    StepRecord, Termination,
};
pub use error::{Error, Result};
pub use model::{
    ControlSequence, ControlVec, DoubleIntegratorParams, Model, NonholonomicParams, StateVec,
};
pub use objective::{
    alpha_min, j_cost, l_bar_nonholonomic, phi, PenaltyConfig, StageCost, StageCostKind,
};
pub use solver::{
    shifted_candidate, solve_fixed_horizon, solve_full, two_stage_solve, SolveResult, SolverConfig,
};
