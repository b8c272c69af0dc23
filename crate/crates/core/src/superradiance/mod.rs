//! The superradiance enhancement `χ` from the geometry of the emission mode.
//!
//! Three routes are provided and cross-check each other in the paraxial regime:
//! the closed form `1 + N/(2w₀²k²)`, a quadrature of the Gaussian mode
//! `|Φ|² = N·e^{−k⊥²w₀²/2}` over a cap of the emission sphere, and the direct
//! double sum over sampled atoms in [`chi_discrete`].

mod cloud;
mod discrete;

pub use cloud::{effective_atom_number, AtomCloud, GaussianCloud};
pub use discrete::{chi_discrete, phi_map, DiscreteChi, DiscreteOptions, PhiSample};

use std::f64::consts::PI;

use crate::quadrature::Quadrature;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SuperradianceError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid atom cloud: {0}")]
    InvalidCloud(String),
    #[error("cap half-angle must lie in (0, π/2), got {0}")]
    InvalidCap(f64),
    #[error("invalid optical-depth scaling: {0}")]
    InvalidOd(String),
}

/// Gaussian emission mode and the number of atoms it addresses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGeometry {
    w0: f64,
    k_ge: f64,
    n_eff: f64,
}

impl ModeGeometry {
    /// `w0` in m, `k_ge` in 1/m; `n_eff` may be zero (no collective term).
    pub fn new(w0: f64, k_ge: f64, n_eff: f64) -> Result<Self, SuperradianceError> {
        let bad = |m: String| Err(SuperradianceError::InvalidGeometry(m));
        if !(w0 > 0.0 && w0.is_finite()) {
            return bad(format!("w0 must be positive and finite, got {w0}"));
        }
        if !(k_ge > 0.0 && k_ge.is_finite()) {
            return bad(format!("k_ge must be positive and finite, got {k_ge}"));
        }
        if !(n_eff >= 0.0 && n_eff.is_finite()) {
            return bad(format!("n_eff must be nonnegative and finite, got {n_eff}"));
        }
        Ok(Self { w0, k_ge, n_eff })
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn k_ge(&self) -> f64 {
        self.k_ge
    }

    pub fn n_eff(&self) -> f64 {
        self.n_eff
    }

    /// Divergence of the mode in radians, `1/(w0·k_ge)`.
    pub fn divergence(&self) -> f64 {
        1.0 / (self.w0 * self.k_ge)
    }

    /// `1/(w0·k_ge) < 0.1`.
    pub fn is_paraxial(&self) -> bool {
        self.divergence() < 0.1
    }

    /// Smallest cap half-angle considered to hold the whole mode.
    pub fn min_cap_half_angle(&self) -> f64 {
        5.0 * self.divergence()
    }

    /// Mode intensity `|Φ|²` in an emission direction at polar angle `theta` from the mode axis.
    pub fn intensity(&self, theta: f64, phi: f64) -> f64 {
        let k_perp = self.k_ge * theta.sin();
        let (kx, ky) = (k_perp * phi.cos(), k_perp * phi.sin());
        self.n_eff * (-(kx * kx + ky * ky) * self.w0 * self.w0 / 2.0).exp()
    }
}

/// `1 + N/(2w0²k_ge²)`.
pub fn chi_closed_form(g: &ModeGeometry) -> f64 {
    1.0 + g.n_eff / (2.0 * g.w0 * g.w0 * g.k_ge * g.k_ge)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapChi {
    pub chi: f64,
    /// Estimated absolute quadrature error in `chi`.
    pub error_estimate: f64,
    /// The cap is narrower than [`ModeGeometry::min_cap_half_angle`] and cuts the mode.
    pub truncated: bool,
}

/// `χ` from the mode intensity integrated over a cap around the emission axis.
///
/// Adaptive Gauss–Kronrod in the polar angle, trapezoid in azimuth (spectrally
/// accurate for the periodic integrand).
pub fn chi_cap_quadrature(g: &ModeGeometry, cap_half_angle: f64) -> Result<CapChi, SuperradianceError> {
    if !(cap_half_angle > 0.0 && cap_half_angle < PI / 2.0) {
        return Err(SuperradianceError::InvalidCap(cap_half_angle));
    }
    let truncated = cap_half_angle < g.min_cap_half_angle();
    if g.n_eff == 0.0 {
        return Ok(CapChi {
            chi: 1.0,
            error_estimate: 0.0,
            truncated,
        });
    }
    const N_PHI: usize = 16;
    let ring = |theta: f64| {
        let s: f64 = (0..N_PHI)
            .map(|j| g.intensity(theta, 2.0 * PI * j as f64 / N_PHI as f64))
            .sum();
        s * (2.0 * PI / N_PHI as f64) * theta.sin()
    };
    // the mode has width ~1/(w0·k) in θ; split there so the adaptive rule sees it
    let width = g.divergence().min(cap_half_angle);
    let intervals = ((cap_half_angle / width).ceil() as usize).clamp(4, 4000);
    let res = Quadrature::with_tolerances(0.0, 1e-12)
        .initial_intervals(intervals)
        .integrate(ring, 0.0, cap_half_angle);
    Ok(CapChi {
        chi: 1.0 + res.value / (4.0 * PI),
        error_estimate: res.error_estimate / (4.0 * PI),
        truncated,
    })
}

/// Rescales a reference `χ` to a new optical depth using `χ − 1 ∝ OD`.
pub fn chi_from_od(chi_ref: f64, od_ref: f64, od_new: f64) -> Result<f64, SuperradianceError> {
    if !(od_ref > 0.0 && od_ref.is_finite()) {
        return Err(SuperradianceError::InvalidOd(format!("od_ref must be positive, got {od_ref}")));
    }
    if !(chi_ref >= 1.0 && chi_ref.is_finite()) {
        return Err(SuperradianceError::InvalidOd(format!("chi_ref must be at least 1, got {chi_ref}")));
    }
    if !(od_new >= 0.0 && od_new.is_finite()) {
        return Err(SuperradianceError::InvalidOd(format!("od_new must be nonnegative, got {od_new}")));
    }
    Ok(1.0 + (chi_ref - 1.0) * (od_new / od_ref))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(chi_closed_form(&ModeGeometry::new(1.0, 10.0, 0.0).unwrap()), 1.0);
        assert!((chi_closed_form(&ModeGeometry::new(1.0, 10.0, 1000.0).unwrap()) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_validation() {
        assert!(ModeGeometry::new(0.0, 1.0, 1.0).is_err());
        assert!(ModeGeometry::new(1.0, -1.0, 1.0).is_err());
        assert!(ModeGeometry::new(1.0, 1.0, -1.0).is_err());
        assert!(ModeGeometry::new(1.0, 1.0, f64::NAN).is_err());
        assert!(ModeGeometry::new(1.0, 30.0, 5.0).unwrap().is_paraxial());
        assert!(!ModeGeometry::new(1.0, 5.0, 5.0).unwrap().is_paraxial());
    }

    #[test]
    fn cap_matches_closed_form_to_paraxial_order() {
        for wk in [10.0, 30.0, 100.0] {
            let g = ModeGeometry::new(wk, 1.0, 1000.0).unwrap();
            let cap = chi_cap_quadrature(&g, 1.2).unwrap();
            let closed = chi_closed_form(&g);
            let rel = ((cap.chi - 1.0) - (closed - 1.0)) / (closed - 1.0);
            // the sphere adds a relative correction of 1/(w0k)²
            assert!((rel - 1.0 / (wk * wk)).abs() < 5.0 / wk.powi(4), "wk={wk} rel={rel}");
            assert!(!cap.truncated);
        }
    }

    #[test]
    fn cap_within_one_percent_when_paraxial() {
        let g = ModeGeometry::new(30.0, 1.0, 1e4).unwrap();
        let cap = chi_cap_quadrature(&g, 0.5).unwrap().chi;
        assert!((cap / chi_closed_form(&g) - 1.0).abs() < 0.01);
    }

    #[test]
    fn cap_converged_against_doubling() {
        let g = ModeGeometry::new(2e-4, 8.05e6, 1e5).unwrap();
        let a = chi_cap_quadrature(&g, 10.0 * g.divergence()).unwrap().chi;
        let b = chi_cap_quadrature(&g, 20.0 * g.divergence()).unwrap().chi;
        assert!(((a - b) / a).abs() < 1e-6);
    }

    #[test]
    fn cap_flags_truncation_and_bad_angles() {
        let g = ModeGeometry::new(30.0, 1.0, 100.0).unwrap();
        assert!(chi_cap_quadrature(&g, 0.05).unwrap().truncated);
        assert!(chi_cap_quadrature(&g, PI / 2.0).is_err());
        assert!(chi_cap_quadrature(&g, 0.0).is_err());
        let empty = ModeGeometry::new(30.0, 1.0, 0.0).unwrap();
        assert_eq!(chi_cap_quadrature(&empty, 0.5).unwrap().chi, 1.0);
    }

    #[test]
    fn od_scaling() {
        let chi = chi_from_od(4.0, 31.4, 15.9).unwrap();
        assert_eq!(format!("{chi:.2}"), "2.52");
        assert_eq!(chi_from_od(4.0, 31.4, 31.4).unwrap(), 4.0);
        assert_eq!(chi_from_od(4.0, 31.4, 0.0).unwrap(), 1.0);
        assert!(chi_from_od(4.0, 0.0, 1.0).is_err());
        assert!(chi_from_od(0.5, 1.0, 1.0).is_err());
    }
}
