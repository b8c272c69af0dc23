use num_complex::Complex;

use crate::model::{check_time, ModelError, PhysicalParams};
use crate::scalar::Real;

/// Collective amplitudes `(α, β)` of `|s_χ⟩` and `|e_χ⟩` with one stored excitation.
///
/// With real initial conditions the no-emission evolution keeps both amplitudes
/// real, so they are stored as reals; [`AmplitudeState1::to_complex`] lifts them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AmplitudeState1<T> {
    pub alpha: T,
    pub beta: T,
}

/// Amplitudes `(λ, μ, ν)` of `|s_χ s_χ⟩`, `|s_χ e_χ⟩`, `|e_χ e_χ⟩` before any emission.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AmplitudeState2<T> {
    pub lambda: T,
    pub mu: T,
    pub nu: T,
}

impl<T: Real> AmplitudeState1<T> {
    /// The stored excitation `|s_χ⟩`.
    pub fn stored() -> Self {
        Self {
            alpha: T::one(),
            beta: T::zero(),
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.alpha * self.alpha + self.beta * self.beta
    }

    /// Rescaled to unit norm; `None` for the zero state.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sqr().sqrt();
        (n > T::zero() && n.is_finite()).then(|| Self {
            alpha: self.alpha / n,
            beta: self.beta / n,
        })
    }

    pub fn to_complex(&self) -> [Complex<T>; 2] {
        [Complex::new(self.alpha, T::zero()), Complex::new(self.beta, T::zero())]
    }
}

impl<T: Real> AmplitudeState2<T> {
    /// `λ = α², μ = √2·αβ, ν = β²`: the two excitations evolve independently.
    pub fn from_single(s: AmplitudeState1<T>) -> Self {
        Self {
            lambda: s.alpha * s.alpha,
            mu: T::SQRT_2() * s.alpha * s.beta,
            nu: s.beta * s.beta,
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.lambda * self.lambda + self.mu * self.mu + self.nu * self.nu
    }

    /// State left after the first emission, `∝ (μ, √2·ν)`, unnormalized.
    pub fn after_emission(&self) -> AmplitudeState1<T> {
        AmplitudeState1 {
            alpha: self.mu,
            beta: T::SQRT_2() * self.nu,
        }
    }

    pub fn to_complex(&self) -> [Complex<T>; 3] {
        [
            Complex::new(self.lambda, T::zero()),
            Complex::new(self.mu, T::zero()),
            Complex::new(self.nu, T::zero()),
        ]
    }
}

/// `(e^{-s}·cos(Ωt/2), e^{-s}·sin(Ωt/2)/Ω)` continued analytically in `Ω²`:
/// cosh/sinh for `Ω² < 0`, a Taylor series near `Ω = 0`. `log_scale` is the
/// exponent `s` folded in before any hyperbolic growth can overflow.
pub(crate) fn oscillation_factors<T: Real>(omega_sq: T, t: T, log_scale: T) -> (T, T) {
    let two = T::lit(2.0);
    let z = omega_sq * t * t / T::lit(4.0);
    if z.abs() < T::lit(1e-3) {
        let env = (-log_scale).exp();
        let c = T::one() - z / two + z * z / T::lit(24.0) - z * z * z / T::lit(720.0);
        let s = T::one() - z / T::lit(6.0) + z * z / T::lit(120.0) - z * z * z / T::lit(5040.0);
        (env * c, env * s * t / two)
    } else if z > T::zero() {
        let env = (-log_scale).exp();
        let x = z.sqrt();
        (env * x.cos(), env * x.sin() / omega_sq.sqrt())
    } else {
        let x = (-z).sqrt();
        let w = (-omega_sq).sqrt();
        let grow = (x - log_scale).exp();
        let shrink = (-x - log_scale).exp();
        ((grow + shrink) / two, (grow - shrink) / (two * w))
    }
}

/// Propagates `(α, β)` for a time `t` under the emission-free dynamics
/// `α̇ = (Ω₀/2)β`, `β̇ = −(Ω₀/2)α − (χΓ/2)β`.
///
/// Exact for every regime; `t` is not checked.
pub fn propagate<T: Real>(p: &PhysicalParams<T>, t: T, from: AmplitudeState1<T>) -> AmplitudeState1<T> {
    let two = T::lit(2.0);
    let kappa = p.decay_rate();
    let omega_sq = p.derive().omega_sq;
    let (ec, es) = oscillation_factors(omega_sq, t, kappa * t / T::lit(4.0));
    let w0 = p.omega0();
    AmplitudeState1 {
        alpha: ec * from.alpha + es * (kappa / two * from.alpha + w0 * from.beta),
        beta: ec * from.beta - es * (w0 * from.alpha + kappa / two * from.beta),
    }
}

/// Direction of the emission-free state at `t`, normalized. Survives times at
/// which the amplitudes themselves underflow.
pub(crate) fn unit_state_at<T: Real>(p: &PhysicalParams<T>, t: T) -> AmplitudeState1<T> {
    let two = T::lit(2.0);
    let kappa = p.decay_rate();
    let omega_sq = p.derive().omega_sq;
    let log_scale = if omega_sq < T::zero() {
        (-omega_sq).sqrt() * t / two
    } else {
        T::zero()
    };
    let (c, s) = oscillation_factors(omega_sq, t, log_scale);
    let raw = AmplitudeState1 {
        alpha: c + kappa / two * s,
        beta: -p.omega0() * s,
    };
    raw.normalized().unwrap_or_else(AmplitudeState1::stored)
}

/// `(α(t), β(t))` from `α(0) = 1, β(0) = 0`.
///
/// Underdamped: `α = secφ·e^{−χΓt/4}·cos(Ωt/2 − φ)`, `β = −secφ·e^{−χΓt/4}·sin(Ωt/2)`.
pub fn amplitude_single<T: Real>(p: &PhysicalParams<T>, t: T) -> Result<AmplitudeState1<T>, ModelError> {
    check_time(t)?;
    Ok(propagate(p, t, AmplitudeState1::stored()))
}

/// `(λ, μ, ν)(t)` from `|s_χ s_χ⟩`, valid up to the first emission.
pub fn amplitude_double<T: Real>(p: &PhysicalParams<T>, t: T) -> Result<AmplitudeState2<T>, ModelError> {
    amplitude_single(p, t).map(AmplitudeState2::from_single)
}
