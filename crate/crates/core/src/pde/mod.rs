//! Finite-difference discretization of `D^α u + ℒu = f` on a rectangle,
//! with L1 or Alikhanov stepping in time.

mod grid;
mod linear;
mod operator;
mod solver;

pub use grid::SpatialGrid2D;
pub use linear::{bicgstab, conjugate_gradient, FastPoissonSolver, SolveStats};
pub use operator::{assemble_spatial_operator, Field, SpatialOperator, SpatialOperatorSpec};
pub use solver::{
    exact_error, manufactured_power_exact, solve_parabolic, two_mesh_error, LevelStats,
    LinearSolverKind, ParabolicProblem, PdeSolution, SolverOptions,
};
