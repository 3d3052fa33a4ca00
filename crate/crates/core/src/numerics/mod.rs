//! Deterministic numerical kernels: adaptive ODE integration, damped
//! fixed-point iteration and bisection.

mod fixed_point;
mod ode;
mod root;
mod trajectory;

pub use fixed_point::{fixed_point, FixedPoint, FixedPointOptions};
pub use ode::{integrate, integrate_ode, OdeOptions, OdeSystem};
pub use root::bisect;
pub use trajectory::Trajectory;
