use crate::model::{default_horizon, AmplitudeState1, PhysicalParams};
use crate::trajectories::{AnalyticEvolution, EmissionRecord, Mode, NoJumpEvolution, TrajectoryError, TrajectoryRng};

/// Relative resolution of the jump-time bisection.
pub const BISECTION_RESOLUTION: f64 = 1e-12;

/// Waiting-time sampler for photon emissions.
///
/// A jump happens when the squared norm of the emission-free state first drops
/// below a uniform draw `u`. The norm is monotone, so the crossing is found by
/// bisection to `1e-12·t_max`. Trajectories that still have norm above `u` at
/// `t_max` are censored.
#[derive(Debug, Clone)]
pub struct TrajectorySampler<E> {
    evolution: E,
    t_max: f64,
    resolution: f64,
}

impl TrajectorySampler<AnalyticEvolution> {
    /// Exact propagator and the default horizon (`40/(χΓ)` when underdamped).
    pub fn analytic(params: PhysicalParams<f64>) -> Result<Self, TrajectoryError> {
        Self::new(AnalyticEvolution::new(params), default_horizon(&params))
    }
}

impl<E: NoJumpEvolution> TrajectorySampler<E> {
    pub fn new(evolution: E, t_max: f64) -> Result<Self, TrajectoryError> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(TrajectoryError::InvalidHorizon(t_max));
        }
        Ok(Self {
            evolution,
            t_max,
            resolution: BISECTION_RESOLUTION * t_max,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn evolution(&self) -> &E {
        &self.evolution
    }

    /// First `t` in `(0, t_max]` with `norm_sqr(t) ≤ u`.
    fn crossing(&self, u: f64, norm_sqr: impl Fn(f64) -> f64) -> Option<f64> {
        if norm_sqr(self.t_max) > u {
            return None;
        }
        let (mut lo, mut hi) = (0.0, self.t_max);
        while hi - lo > self.resolution {
            let mid = 0.5 * (lo + hi);
            if norm_sqr(mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    pub fn sample(&self, mode: Mode, rng: &mut TrajectoryRng) -> EmissionRecord {
        match mode {
            Mode::Single => self.sample_single(rng),
            Mode::Double => self.sample_double(rng),
        }
    }

    /// One stored excitation: a single detection time distributed as `ρ₁`.
    pub fn sample_single(&self, rng: &mut TrajectoryRng) -> EmissionRecord {
        let u = rng.uniform();
        let stored = AmplitudeState1::stored();
        let t1 = self.crossing(u, |t| self.evolution.single(t, stored).norm_sqr());
        EmissionRecord {
            id: rng.id(),
            mode: Mode::Single,
            t1,
            t2: None,
            censored: t1.is_none(),
        }
    }

    /// Two stored excitations: the first jump from the three-amplitude system,
    /// collapse onto `∝ (μ, √2·ν)`, then a single-excitation jump from there.
    pub fn sample_double(&self, rng: &mut TrajectoryRng) -> EmissionRecord {
        let u1 = rng.uniform();
        let Some(t1) = self.crossing(u1, |t| self.evolution.double(t).norm_sqr()) else {
            return EmissionRecord {
                id: rng.id(),
                mode: Mode::Double,
                t1: None,
                t2: None,
                censored: true,
            };
        };
        let after = self.evolution.double(t1).after_emission();
        // a fully vanished state can only come from underflow far past the horizon
        let start = after.normalized().unwrap_or(AmplitudeState1 { alpha: 0.0, beta: 1.0 });
        let u2 = rng.uniform();
        let tau = self
            .crossing(u2, |tau| self.evolution.single(tau, start).norm_sqr())
            // simultaneous emissions are measure-zero; keep the order strict
            .map(|tau| tau.max(self.resolution));
        EmissionRecord {
            id: rng.id(),
            mode: Mode::Double,
            t1: Some(t1),
            t2: tau.map(|tau| t1 + tau),
            censored: tau.is_none(),
        }
    }
}

/// One single-excitation trajectory with the analytic propagator and default horizon.
pub fn sample_single(p: &PhysicalParams<f64>, rng: &mut TrajectoryRng) -> Result<EmissionRecord, TrajectoryError> {
    Ok(TrajectorySampler::analytic(*p)?.sample_single(rng))
}

/// One two-excitation trajectory with the analytic propagator and default horizon.
pub fn sample_double(p: &PhysicalParams<f64>, rng: &mut TrajectoryRng) -> Result<EmissionRecord, TrajectoryError> {
    Ok(TrajectorySampler::analytic(*p)?.sample_double(rng))
}
