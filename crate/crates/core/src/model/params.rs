use crate::model::ModelError;
use crate::scalar::Real;

/// The three rates that fix every wavepacket: read-beam Rabi frequency `omega0`,
/// single-atom decay rate `gamma` and superradiance enhancement `chi`.
///
/// Units are whatever the caller uses consistently (rad/s with times in s, or
/// multiples of `gamma` with times in `1/gamma`); every closed form is homogeneous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    omega0: T,
    gamma: T,
    chi: T,
}

/// Damping regime of the driven, decaying two-level collective mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `Ω² > 0`: Rabi oscillations under an exponential envelope.
    Underdamped,
    /// `|Ω| < 1e-6·χΓ`: evaluated through the `Ω → 0` limit.
    Critical,
    /// `Ω² < 0`: no oscillation, biexponential decay.
    Overdamped,
}

/// Coefficients of the closed-form wavepackets, defined for the underdamped regime only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCoefficients<T> {
    /// Normalization of the single-photon wavepacket, `χΓΩ₀²/Ω²`.
    pub a: T,
    /// Prefactor of the first-photon density, `2a·Ω₀²/Ω²`.
    pub a1: T,
    pub b1: T,
    pub c1: T,
    /// Prefactor of the second-photon delay density, `aΩ₀²/(2(Ω² + χ²Γ²))`.
    pub a2: T,
    pub b2: T,
    pub c2: T,
}

/// Quantities derived from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T> {
    /// `Ω² = Ω₀² − (χΓ/2)²`, negative when overdamped.
    pub omega_sq: T,
    /// `sqrt(|Ω²|)`. The effective Rabi frequency when underdamped, the
    /// magnitude of the imaginary frequency when overdamped.
    pub omega: T,
    /// `χΓ/(2Ω₀)`; `None` when `Ω₀ = 0`. Exceeds 1 in the overdamped regime.
    pub sin_phi: Option<T>,
    /// The phase constant, when `sin_phi` is a valid sine.
    pub phi: Option<T>,
    pub regime: Regime,
    pub closed_form: Option<ClosedFormCoefficients<T>>,
}

impl<T: Real> PhysicalParams<T> {
    pub fn new(omega0: T, gamma: T, chi: T) -> Result<Self, ModelError> {
        if !omega0.is_finite() {
            return Err(ModelError::NonFinite { name: "omega0" });
        }
        if !gamma.is_finite() {
            return Err(ModelError::NonFinite { name: "gamma" });
        }
        if !chi.is_finite() {
            return Err(ModelError::NonFinite { name: "chi" });
        }
        if omega0 < T::zero() {
            return Err(ModelError::NegativeOmega0(omega0.as_f64()));
        }
        if gamma <= T::zero() {
            return Err(ModelError::NonPositiveGamma(gamma.as_f64()));
        }
        if chi < T::one() {
            return Err(ModelError::ChiBelowOne(chi.as_f64()));
        }
        Ok(Self { omega0, gamma, chi })
    }

    /// Closed-system limit `Γ = 0` (so `χΓ = 0`): pure Rabi oscillation, nothing is emitted.
    ///
    /// Densities vanish identically and do not normalize; only the amplitudes are meaningful.
    pub fn lossless(omega0: T) -> Self {
        Self {
            omega0: omega0.abs(),
            gamma: T::zero(),
            chi: T::one(),
        }
    }

    pub fn omega0(&self) -> T {
        self.omega0
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn chi(&self) -> T {
        self.chi
    }

    /// Collective decay rate `χΓ`.
    pub fn decay_rate(&self) -> T {
        self.chi * self.gamma
    }

    pub fn is_lossless(&self) -> bool {
        self.gamma == T::zero()
    }

    /// Same physics with rates in multiples of `Γ` (times then in units of `1/Γ`).
    pub fn in_gamma_units(&self) -> Result<Self, ModelError> {
        if self.is_lossless() {
            return Err(ModelError::NonPositiveGamma(0.0));
        }
        Ok(Self {
            omega0: self.omega0 / self.gamma,
            gamma: T::one(),
            chi: self.chi,
        })
    }

    pub fn cast<U: Real>(&self) -> PhysicalParams<U> {
        PhysicalParams {
            omega0: U::lit(self.omega0.as_f64()),
            gamma: U::lit(self.gamma.as_f64()),
            chi: U::lit(self.chi.as_f64()),
        }
    }

    /// Effective Rabi frequency, phase constant, regime and closed-form coefficients.
    pub fn derive(&self) -> DerivedParams<T> {
        let two = T::lit(2.0);
        let kappa = self.decay_rate();
        let half_k = kappa / two;
        // (Ω₀ − κ/2)(Ω₀ + κ/2) avoids cancellation close to critical damping
        let omega_sq = (self.omega0 - half_k) * (self.omega0 + half_k);
        let omega = omega_sq.abs().sqrt();
        let regime = if omega <= T::lit(1e-6) * kappa {
            Regime::Critical
        } else if omega_sq > T::zero() {
            Regime::Underdamped
        } else {
            Regime::Overdamped
        };
        let sin_phi = (self.omega0 > T::zero()).then(|| {
            let s = half_k / self.omega0;
            if regime == Regime::Critical {
                s.min(T::one())
            } else {
                s
            }
        });
        let phi = sin_phi.filter(|s| *s <= T::one()).map(|s| s.asin());
        let closed_form = (regime == Regime::Underdamped).then(|| {
            let w0sq = self.omega0 * self.omega0;
            let sec_sq = w0sq / omega_sq;
            let a = kappa * sec_sq;
            let three = T::lit(3.0);
            let four = T::lit(4.0);
            ClosedFormCoefficients {
                a,
                a1: two * a * sec_sq,
                b1: kappa * omega / (two * w0sq),
                c1: -(kappa * kappa) / (four * w0sq),
                a2: a * w0sq / (two * (omega_sq + kappa * kappa)),
                b2: three * kappa * omega / (four * w0sq),
                c2: three * omega_sq / (two * w0sq) - T::one(),
            }
        });
        DerivedParams {
            omega_sq,
            omega,
            sin_phi,
            phi,
            regime,
            closed_form,
        }
    }
}

/// Free-function form of [`PhysicalParams::derive`].
pub fn derive_params<T: Real>(p: &PhysicalParams<T>) -> DerivedParams<T> {
    p.derive()
}
