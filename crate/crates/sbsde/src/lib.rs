//! Backward SDEs with singular terminal data on the interval (0, L).
//!
//! The crate covers the two terminal conditions `ξ = ∞·1{W_T ∉ (0,L)}` and
//! `ξ = ∞·1{W_T ∈ (0,L)}` (with absorption at the first exit) for the driver
//! `f(y) = -y|y|^{q-1}`. It provides:
//!
//! * [`model`]: parameters, the blow-up curve `y_t`, the mollifier and the
//!   boundary family `ψ_{m,n}`;
//! * [`densities`]: exit-time law and killed transition density of Brownian
//!   motion on the interval, and the linear baseline `v₀`;
//! * [`pde`]: a finite-difference solver for `∂_t V + ½V_xx − V^q = 0`;
//! * [`feynman_kac`]: Monte Carlo path functionals used as oracles;
//! * [`bsde`]: sample paths of `(Y, Z)` and backward residuals;
//! * [`control`]: the associated liquidation-type control problem;
//! * [`verify`]: the acceptance checks shared by the test target and the CLI.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases at the crate
//! root fix the scalar to `f64`.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsde;
pub mod control;
pub mod densities;
pub mod error;
pub mod feynman_kac;
pub mod model;
pub mod pde;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod verify;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating point type the library computes in.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + FromStr + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts to `f64`.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Converts a count.
    #[inline]
    fn usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + FromStr
        + Default
        + Sum
        + Send
        + Sync
        + 'static
{
}

pub type ProblemParams = model::ProblemParams<f64>;
pub type BoundaryIndices = model::BoundaryIndices;
pub type Regime = model::Regime;
pub type SeriesValue = densities::SeriesValue<f64>;
pub type Grid = pde::Grid<f64>;
pub type Field = pde::Field<f64>;
pub type SolveReport = pde::SolveReport<f64>;
pub type McConfig = feynman_kac::McConfig<f64>;
pub type McEstimate = stats::McEstimate<f64>;
pub type SamplePath = bsde::SamplePath<f64>;
pub type ControlState = control::ControlState<f64>;
