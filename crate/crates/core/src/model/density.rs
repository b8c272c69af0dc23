use crate::linalg;
use crate::model::amplitude::{oscillation_factors, propagate, unit_state_at};
use crate::model::{amplitude_double, amplitude_single, check_time, ModelError, PhysicalParams, Regime};
use crate::scalar::Real;

/// A nonnegative probability density (1/time, or 1/time² for joint densities).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Density<T>(T);

impl<T: Real> Density<T> {
    fn new(v: T) -> Self {
        Density(v.max(T::zero()))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Which joint two-photon density [`rho2_joint`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointForm {
    /// `ρ₁(t_a)·ρ₁(t_b)`: the photons are indistinguishable, labels symmetric.
    Unordered,
    /// `2ρ₁(t₁)ρ₁(t₂)` on `t₂ ≥ t₁`, zero otherwise.
    Ordered,
}

/// Single-photon wavepacket `ρ₁(t) = χΓ·|β(t)|²`, valid in every regime.
pub fn rho1<T: Real>(p: &PhysicalParams<T>, t: T) -> Result<Density<T>, ModelError> {
    let s = amplitude_single(p, t)?;
    Ok(Density::new(p.decay_rate() * s.beta * s.beta))
}

/// `a·e^{−χΓt/2}·sin²(Ωt/2)`; underdamped regime only.
pub fn rho1_closed<T: Real>(p: &PhysicalParams<T>, t: T) -> Result<Density<T>, ModelError> {
    check_time(t)?;
    let d = p.derive();
    let c = d.closed_form.ok_or(ModelError::NotUnderdamped(d.regime))?;
    let two = T::lit(2.0);
    let s = (d.omega * t / two).sin();
    Ok(Density::new(c.a * (-p.decay_rate() * t / two).exp() * s * s))
}

/// Density of the first of two emitted photons, `χΓ|μ|² + 2χΓ|ν|²`.
pub fn rho2_first<T: Real>(p: &PhysicalParams<T>, t1: T) -> Result<Density<T>, ModelError> {
    let s = amplitude_double(p, t1)?;
    let k = p.decay_rate();
    Ok(Density::new(k * s.mu * s.mu + T::lit(2.0) * k * s.nu * s.nu))
}

/// `a₁·e^{−χΓt₁}·sin²(Ωt₁/2)·[1 + b₁sin(Ωt₁) + c₁cos(Ωt₁)]`; underdamped only.
pub fn rho2_first_closed<T: Real>(p: &PhysicalParams<T>, t1: T) -> Result<Density<T>, ModelError> {
    check_time(t1)?;
    let d = p.derive();
    let c = d.closed_form.ok_or(ModelError::NotUnderdamped(d.regime))?;
    let s = (d.omega * t1 / T::lit(2.0)).sin();
    let bracket = T::one() + c.b1 * (d.omega * t1).sin() + c.c1 * (d.omega * t1).cos();
    Ok(Density::new(c.a1 * (-p.decay_rate() * t1).exp() * s * s * bracket))
}

/// Probability that a single stored excitation has not yet been emitted by `t1`,
/// `|α(t1)|² + |β(t1)|²`.
pub fn survival_norm<T: Real>(p: &PhysicalParams<T>, t1: T) -> Result<T, ModelError> {
    amplitude_single(p, t1).map(|s| s.norm_sqr())
}

/// Density of the second photon at `t1 + tau` given the first was detected at `t1`,
/// `ρ₁(t1 + τ)/N(t1)`.
///
/// Evaluated by restarting the single-excitation dynamics from the normalized
/// post-detection state, which stays well conditioned when `N(t1)` underflows.
pub fn rho2_conditional<T: Real>(p: &PhysicalParams<T>, t1: T, tau: T) -> Result<Density<T>, ModelError> {
    check_time(t1)?;
    check_time(tau)?;
    let start = unit_state_at(p, t1);
    let s = propagate(p, tau, start);
    Ok(Density::new(p.decay_rate() * s.beta * s.beta))
}

/// Joint two-photon density. The emissions factorize: `ρ₁(t_a)·ρ₁(t_b)`.
pub fn rho2_joint<T: Real>(p: &PhysicalParams<T>, ta: T, tb: T, form: JointForm) -> Result<Density<T>, ModelError> {
    let product = rho1(p, ta)?.value() * rho1(p, tb)?.value();
    Ok(Density::new(match form {
        JointForm::Unordered => product,
        JointForm::Ordered if tb >= ta => T::lit(2.0) * product,
        JointForm::Ordered => T::zero(),
    }))
}

/// Density of the delay `τ = t₂ − t₁` between the two photons, marginalized over `t₁`:
/// `2∫₀^∞ ρ₁(t)ρ₁(t+τ) dt`.
///
/// Writing `β(t+τ) = p(τ)α(t) + q(τ)β(t)` reduces the integral to the quartic
/// moments `∫α^{4−j}β^j dt`, which obey a closed linear system. The result holds
/// in every damping regime. Construct once per parameter set and reuse.
#[derive(Debug, Clone, Copy)]
pub struct SecondPhotonDelay<T> {
    params: PhysicalParams<T>,
    omega_sq: T,
    // ∫α²β², ∫αβ³, ∫β⁴ over [0, ∞)
    m22: T,
    m13: T,
    m04: T,
}

impl<T: Real> SecondPhotonDelay<T> {
    pub fn new(p: &PhysicalParams<T>) -> Self {
        let h = p.omega0() / T::lit(2.0);
        let g = p.decay_rate() / T::lit(2.0);
        let zero = T::zero();
        let mut moments = [zero; 5];
        if h > zero && g > zero {
            let mut a = [[zero; 5]; 5];
            for (j, row) in a.iter_mut().enumerate() {
                let jf = T::lit(j as f64);
                row[j] = -jf * g;
                if j + 1 < 5 {
                    row[j + 1] = T::lit((4 - j) as f64) * h;
                }
                if j >= 1 {
                    row[j - 1] = -jf * h;
                }
            }
            let rhs = [-T::one(), zero, zero, zero, zero];
            moments = linalg::solve(a, rhs).unwrap_or([zero; 5]);
        }
        Self {
            params: *p,
            omega_sq: p.derive().omega_sq,
            m22: moments[2],
            m13: moments[3],
            m04: moments[4],
        }
    }

    pub fn density(&self, tau: T) -> Result<Density<T>, ModelError> {
        check_time(tau)?;
        let two = T::lit(2.0);
        let k = self.params.decay_rate();
        let (ec, es) = oscillation_factors(self.omega_sq, tau, k * tau / T::lit(4.0));
        let pa = -self.params.omega0() * es;
        let qb = ec - k / two * es;
        let v = two * k * k * (pa * pa * self.m22 + two * pa * qb * self.m13 + qb * qb * self.m04);
        Ok(Density::new(v))
    }
}

/// See [`SecondPhotonDelay`].
pub fn rho2_second_marginal<T: Real>(p: &PhysicalParams<T>, tau: T) -> Result<Density<T>, ModelError> {
    SecondPhotonDelay::new(p).density(tau)
}

/// `a₂·e^{−χΓτ/2}·[1 + b₂sin(Ωτ) + c₂cos(Ωτ)]`; underdamped only.
pub fn rho2_second_marginal_closed<T: Real>(p: &PhysicalParams<T>, tau: T) -> Result<Density<T>, ModelError> {
    check_time(tau)?;
    let d = p.derive();
    let c = d.closed_form.ok_or(ModelError::NotUnderdamped(d.regime))?;
    let x = d.omega * tau;
    let v = c.a2 * (-p.decay_rate() * tau / T::lit(2.0)).exp() * (T::one() + c.b2 * x.sin() + c.c2 * x.cos());
    Ok(Density::new(v))
}

/// Detection-time density with the two photon labels pooled: half the first-photon
/// density plus half the density of a second photon arriving at `t` after a first
/// at any earlier time. Equal to `ρ₁(t)` because the emissions are independent.
pub fn marginal_single_time<T: Real>(p: &PhysicalParams<T>, t: T) -> Result<Density<T>, ModelError> {
    let first = rho2_first(p, t)?.value();
    // ∫₀ᵗ 2ρ₁(t₁)ρ₁(t) dt₁ = 2ρ₁(t)(1 − N(t))
    let second = T::lit(2.0) * rho1(p, t)?.value() * (T::one() - survival_norm(p, t)?);
    Ok(Density::new((first + second) / T::lit(2.0)))
}

/// Truncation point for improper time integrals: `F/(χΓ)` for `F = horizon_factor`,
/// stretched to the slowest decay when overdamped and to at least twenty Rabi
/// periods when underdamped. Close to critical damping the tail decays like
/// `t²e^{−χΓt/2}`, so both stretches are taken to at least, and the period
/// stretch at most, `3F/(χΓ)`. Infinite for a lossless system.
pub fn tail_horizon<T: Real>(p: &PhysicalParams<T>, horizon_factor: T) -> T {
    let k = p.decay_rate();
    if k <= T::zero() {
        return T::infinity();
    }
    let d = p.derive();
    let two = T::lit(2.0);
    let base = horizon_factor / k;
    let wide = T::lit(3.0) * base;
    match d.regime {
        Regime::Underdamped => {
            let periods = T::lit(20.0) * two * T::PI() / d.omega;
            base.max(periods.min(wide))
        }
        Regime::Critical => wide,
        // slowest amplitude rate is κ/4 − |Ω|/2
        Regime::Overdamped => (horizon_factor / (k - two * d.omega)).max(wide),
    }
}

/// [`tail_horizon`] with the default factor of 40.
pub fn default_horizon<T: Real>(p: &PhysicalParams<T>) -> T {
    tail_horizon(p, T::lit(40.0))
}
