//! Simulation and analysis of the superradiant read-out of a DLCZ cold-atom memory.
//!
//! A stored collective excitation is driven by a resonant read beam (Rabi frequency
//! `Ω₀`) and decays collectively at `χΓ`. The crate provides
//!
//! * [`model`]: closed-form amplitudes and photon-detection densities for one and two
//!   stored excitations,
//! * [`dynamics`]: adaptive Runge–Kutta integration of the same amplitude equations,
//! * [`trajectories`]: quantum-trajectory sampling of detection times,
//! * [`superradiance`]: the enhancement `χ` from mode geometry, by three routes,
//! * [`fitting`]: weighted least-squares recovery of `(χ, Ω₀)` from binned data.
//!
//! The model and integrator are generic over the scalar type; the aliases below fix
//! it to `f64`.

pub mod dynamics;
pub mod fitting;
mod linalg;
pub mod model;
pub mod quadrature;
mod scalar;
pub mod superradiance;
pub mod trajectories;

pub use scalar::Real;

pub use model::{
    amplitude_double, amplitude_single, default_horizon, derive_params, marginal_single_time, rho1, rho1_closed,
    rho2_conditional, rho2_first, rho2_first_closed, rho2_joint, rho2_second_marginal, rho2_second_marginal_closed,
    survival_norm, JointForm, ModelError, Regime,
};

pub type Params = model::PhysicalParams<f64>;
pub type Derived = model::DerivedParams<f64>;
pub type State1 = model::AmplitudeState1<f64>;
pub type State2 = model::AmplitudeState2<f64>;
pub type Density = model::Density<f64>;

pub type Params32 = model::PhysicalParams<f32>;
pub type State1F32 = model::AmplitudeState1<f32>;
pub type State2F32 = model::AmplitudeState2<f32>;

/// Decay rate of the rubidium D2 line, `2π·6.07 MHz` in rad/s. An external atomic
/// constant used as a default, not a fitted value.
pub const RB87_D2_GAMMA: f64 = 2.0 * std::f64::consts::PI * 6.07e6;
