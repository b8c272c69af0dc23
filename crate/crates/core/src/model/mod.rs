//! Closed-form read-out model: parameters, collective amplitudes and photon densities.

mod amplitude;
mod density;
mod params;

pub use amplitude::{amplitude_double, amplitude_single, propagate, AmplitudeState1, AmplitudeState2};
pub use density::{
    default_horizon, marginal_single_time, rho1, rho1_closed, rho2_conditional, rho2_first, rho2_first_closed,
    rho2_joint, rho2_second_marginal, rho2_second_marginal_closed, survival_norm, tail_horizon, Density, JointForm,
    SecondPhotonDelay,
};
pub use params::{derive_params, ClosedFormCoefficients, DerivedParams, PhysicalParams, Regime};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("chi must be at least 1, got {0}")]
    ChiBelowOne(f64),
    #[error("omega0 must be nonnegative, got {0}")]
    NegativeOmega0(f64),
    #[error("{name} must be finite")]
    NonFinite { name: &'static str },
    #[error("time must be finite and nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("closed form is only defined in the underdamped regime, parameters are {0:?}")]
    NotUnderdamped(Regime),
}

pub(crate) fn check_time<T: Real>(t: T) -> Result<(), ModelError> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NegativeTime(t.as_f64()))
    }
}
