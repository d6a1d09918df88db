//! Three-species invasive food-chain model with prey refuge, overcrowding
//! and role-reversal controls, together with its spectral and ADI solvers,
//! linear stability tools and blow-up experiments.

pub mod cheb;
pub mod controller;
pub mod error;
pub mod experiments;
pub mod gmres;
pub mod kinetics;
pub mod solver1d;
pub mod solver2d;
pub mod stability;
pub mod tridiag;

pub use cheb::ChebGrid;
pub use controller::{BlowupReport, ControllerState, StepControllerCfg, Verdict};
pub use error::{Error, Result};
pub use kinetics::{
    reaction, Kinetics, ModelVariant, ParameterSet, Rates, RefugeProfile, RefugeShape, VariantKind,
};
pub use solver1d::{
    apply_rhs_1d, integrate_1d, step_am2, SolverConfig1D, StateField1D, Trajectory1D,
};
pub use solver2d::{
    integrate_2d, step_peaceman_rachford, FDGrid2D, ReactionLag, StateField2D, Trajectory2D,
};
pub use stability::{Equilibrium, JacobianMatrix, Pattern, PatternCase};
pub use tridiag::{thomas_solve, TridiagonalOperator};
