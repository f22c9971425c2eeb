//! Finite-difference solver for `∂_t V + ½∂²_xx V − V^q = 0` on
//! `(0, L) × (0, T)` with the boundary data of both regimes.
//!
//! Time stepping runs backward from the terminal row. The first step out of
//! the terminal data is fully implicit; later steps use Crank–Nicolson for the
//! diffusion. The reaction is implicit and solved per step by damped Newton.
//! The scheme is monotone when `dt ≤ 2 dx²`.

mod field;
mod solver;
mod tridiag;

pub use field::{BoundaryTag, Field, Grid};
pub use solver::{
    pde_residual, solve_linear_v0, solve_u, solve_ubar_n, solve_umn, solve_un, solve_vbar, solve_vbar_n,
    ReactionScheme, Schedule, SolveReport, SolverSettings, SweepConfig,
};
pub use tridiag::solve_tridiagonal;
