//! Coupled zombie-outbreak epidemic, first-order GDP losses, and
//! price-mediated contagion among margin-constrained banks.
//!
//! The numerical kernels and the compartmental model are generic over the
//! scalar type ([`Real`]: `f32` or `f64`); the financial layers work in
//! `f64` dollars. Concrete aliases for the common `f64` case live at the
//! crate root.

pub mod contagion;
pub mod economy;
pub mod epidemic;
pub mod error;
pub mod numerics;
pub mod policy;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Compartment sizes in `f64`.
pub type Population = epidemic::PopulationState<f64>;
/// Outbreak rate constants in `f64`.
pub type Params = epidemic::EpidemicParams<f64>;
/// Outbreak run definition in `f64`.
pub type OutbreakScenario = epidemic::Scenario<f64>;
/// Simulated outbreak in `f64`.
pub type Outbreak = epidemic::Outbreak<f64>;
/// Stored ODE solution in `f64`.
pub type Path = numerics::Trajectory<f64>;
/// Integrator settings in `f64`.
pub type OdeOptions = numerics::OdeOptions<f64>;
