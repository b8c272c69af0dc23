//! Numerical integration of the collective-amplitude equations.
//!
//! The state vector carries the amplitudes plus the cumulative emission
//! probability, so norm bookkeeping can be checked along the solution.

mod dopri;

pub use dopri::{integrate, DenseOutput, StepControl};

use crate::model::{AmplitudeState1, AmplitudeState2, PhysicalParams};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t:e} (h = {h:e}); stiffness ratio of the system is {stiffness_ratio:.3e}")]
    StepUnderflow { t: f64, h: f64, stiffness_ratio: f64 },
    #[error("exceeded {max_steps} steps at t = {t:e}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("integration end time must be positive and finite, got {0}")]
    InvalidEndTime(f64),
    #[error("tolerance must lie in [1e-14, 1e-3], got {0}")]
    InvalidTolerance(f64),
    #[error("output grid needs at least two points, got {0}")]
    InvalidGrid(usize),
}

/// A collective state the integrator can carry: a fixed number of real amplitudes.
pub trait CollectiveState<T: Real>: Copy {
    const DIM: usize;
    fn component(&self, i: usize) -> T;
    fn from_fn(f: impl FnMut(usize) -> T) -> Self;
    fn norm_sqr(&self) -> T;
    /// Instantaneous photon emission density of this state.
    fn emission_density(&self, p: &PhysicalParams<T>) -> T;
}

impl<T: Real> CollectiveState<T> for AmplitudeState1<T> {
    const DIM: usize = 2;

    fn component(&self, i: usize) -> T {
        [self.alpha, self.beta][i]
    }

    fn from_fn(mut f: impl FnMut(usize) -> T) -> Self {
        AmplitudeState1 { alpha: f(0), beta: f(1) }
    }

    fn norm_sqr(&self) -> T {
        AmplitudeState1::norm_sqr(self)
    }

    fn emission_density(&self, p: &PhysicalParams<T>) -> T {
        p.decay_rate() * self.beta * self.beta
    }
}

impl<T: Real> CollectiveState<T> for AmplitudeState2<T> {
    const DIM: usize = 3;

    fn component(&self, i: usize) -> T {
        [self.lambda, self.mu, self.nu][i]
    }

    fn from_fn(mut f: impl FnMut(usize) -> T) -> Self {
        AmplitudeState2 {
            lambda: f(0),
            mu: f(1),
            nu: f(2),
        }
    }

    fn norm_sqr(&self) -> T {
        AmplitudeState2::norm_sqr(self)
    }

    fn emission_density(&self, p: &PhysicalParams<T>) -> T {
        let k = p.decay_rate();
        k * self.mu * self.mu + T::lit(2.0) * k * self.nu * self.nu
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    /// Relative (and absolute) tolerance; amplitudes are O(1).
    pub tol: T,
    /// Number of points in the uniform output grid, endpoints included.
    pub n_output: usize,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            n_output: 2000,
            max_steps: 1_000_000,
        }
    }
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Integrated amplitudes on a uniform grid, plus the dense interpolant.
#[derive(Debug, Clone)]
pub struct OdeSolution<T, S> {
    pub params: PhysicalParams<T>,
    pub times: Vec<T>,
    pub states: Vec<S>,
    /// Cumulative emission probability `∫₀ᵗ ρ`, integrated alongside the amplitudes.
    pub emitted_prob: Vec<T>,
    dense: DenseOutput<T>,
}

impl<T: Real, S: CollectiveState<T>> OdeSolution<T, S> {
    /// State anywhere in `[0, t_end]` from the continuous extension.
    pub fn state_at(&self, t: T) -> S {
        let mut buf = [T::zero(); 4];
        self.dense.eval_into(t, &mut buf[..S::DIM + 1]);
        S::from_fn(|i| buf[i])
    }

    pub fn emitted_at(&self, t: T) -> T {
        let mut buf = [T::zero(); 4];
        self.dense.eval_into(t, &mut buf[..S::DIM + 1]);
        buf[S::DIM]
    }

    pub fn t_end(&self) -> T {
        self.dense.t_end()
    }

    pub fn n_steps(&self) -> usize {
        self.dense.n_steps()
    }
}

/// Emission density at every grid point of `sol`.
pub fn emission_density<T: Real, S: CollectiveState<T>>(sol: &OdeSolution<T, S>) -> Vec<T> {
    sol.states.iter().map(|s| s.emission_density(&sol.params)).collect()
}

fn check_inputs<T: Real>(t_end: T, opts: &OdeOptions<T>) -> Result<(), DynamicsError> {
    if !(t_end > T::zero() && t_end.is_finite()) {
        return Err(DynamicsError::InvalidEndTime(t_end.as_f64()));
    }
    if !(opts.tol >= T::lit(1e-14) && opts.tol <= T::lit(1e-3)) {
        return Err(DynamicsError::InvalidTolerance(opts.tol.as_f64()));
    }
    if opts.n_output < 2 {
        return Err(DynamicsError::InvalidGrid(opts.n_output));
    }
    Ok(())
}

// Ratio of the fastest to the slowest decay rate of the linear system.
fn stiffness_ratio<T: Real>(p: &PhysicalParams<T>, double: bool) -> f64 {
    let k = p.decay_rate().as_f64();
    let d = p.derive();
    let w = d.omega.as_f64();
    let (fast, slow) = if d.omega_sq > T::zero() {
        (k / 4.0, k / 4.0)
    } else {
        (k / 4.0 + w / 2.0, k / 4.0 - w / 2.0)
    };
    let fast = if double { 2.0 * fast } else { fast };
    if slow > 0.0 {
        fast / slow
    } else {
        f64::INFINITY
    }
}

fn run<T: Real, S: CollectiveState<T>, F>(
    p: &PhysicalParams<T>,
    y0: S,
    t_end: T,
    opts: &OdeOptions<T>,
    double: bool,
    rhs: F,
) -> Result<OdeSolution<T, S>, DynamicsError>
where
    F: FnMut(T, &[T], &mut [T]),
{
    check_inputs(t_end, opts)?;
    let mut init = [T::zero(); 4];
    for (i, v) in init.iter_mut().enumerate().take(S::DIM) {
        *v = y0.component(i);
    }
    let ctl = StepControl {
        rtol: opts.tol,
        atol: opts.tol,
        max_steps: opts.max_steps,
        h_max: None,
    };
    let dense = integrate(rhs, T::zero(), &init[..S::DIM + 1], t_end, &ctl).map_err(|e| match e {
        DynamicsError::StepUnderflow { t, h, .. } => DynamicsError::StepUnderflow {
            t,
            h,
            stiffness_ratio: stiffness_ratio(p, double),
        },
        other => other,
    })?;
    let n = opts.n_output;
    let mut times = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut emitted_prob = Vec::with_capacity(n);
    let mut buf = [T::zero(); 4];
    for i in 0..n {
        let t = if i + 1 == n {
            t_end
        } else {
            t_end * T::lit(i as f64) / T::lit((n - 1) as f64)
        };
        dense.eval_into(t, &mut buf[..S::DIM + 1]);
        times.push(t);
        states.push(S::from_fn(|j| buf[j]));
        emitted_prob.push(buf[S::DIM]);
    }
    Ok(OdeSolution {
        params: *p,
        times,
        states,
        emitted_prob,
        dense,
    })
}

/// Solves `α̇ = (Ω₀/2)β`, `β̇ = −(Ω₀/2)α − (χΓ/2)β` from `(1, 0)` up to `t_end`.
pub fn integrate_single<T: Real>(
    p: &PhysicalParams<T>,
    t_end: T,
    tol: T,
) -> Result<OdeSolution<T, AmplitudeState1<T>>, DynamicsError> {
    integrate_single_from(p, AmplitudeState1::stored(), t_end, &OdeOptions::with_tol(tol))
}

/// Single-excitation dynamics from an arbitrary initial state, e.g. the state
/// left behind by a first photon detection.
pub fn integrate_single_from<T: Real>(
    p: &PhysicalParams<T>,
    from: AmplitudeState1<T>,
    t_end: T,
    opts: &OdeOptions<T>,
) -> Result<OdeSolution<T, AmplitudeState1<T>>, DynamicsError> {
    let half_w = p.omega0() / T::lit(2.0);
    let k = p.decay_rate();
    let half_k = k / T::lit(2.0);
    run(p, from, t_end, opts, false, move |_, y, dy| {
        dy[0] = half_w * y[1];
        dy[1] = -half_w * y[0] - half_k * y[1];
        dy[2] = k * y[1] * y[1];
    })
}

/// Solves the two-excitation system
/// `λ̇ = (Ω₀/√2)μ`, `μ̇ = (Ω₀/√2)(ν − λ) − (χΓ/2)μ`, `ν̇ = −(Ω₀/√2)μ − χΓν`
/// from `(1, 0, 0)` up to `t_end`, i.e. until the first emission.
pub fn integrate_double<T: Real>(
    p: &PhysicalParams<T>,
    t_end: T,
    tol: T,
) -> Result<OdeSolution<T, AmplitudeState2<T>>, DynamicsError> {
    integrate_double_with(p, t_end, &OdeOptions::with_tol(tol))
}

pub fn integrate_double_with<T: Real>(
    p: &PhysicalParams<T>,
    t_end: T,
    opts: &OdeOptions<T>,
) -> Result<OdeSolution<T, AmplitudeState2<T>>, DynamicsError> {
    let g = p.omega0() / T::SQRT_2();
    let k = p.decay_rate();
    let half_k = k / T::lit(2.0);
    let two = T::lit(2.0);
    let start = AmplitudeState2 {
        lambda: T::one(),
        mu: T::zero(),
        nu: T::zero(),
    };
    run(p, start, t_end, opts, true, move |_, y, dy| {
        dy[0] = g * y[1];
        dy[1] = g * (y[2] - y[0]) - half_k * y[1];
        dy[2] = -g * y[1] - k * y[2];
        dy[3] = k * y[1] * y[1] + two * k * y[2] * y[2];
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{amplitude_single, rho1, rho2_first};

    fn params(omega0: f64, gamma: f64, chi: f64) -> PhysicalParams<f64> {
        PhysicalParams::new(omega0, gamma, chi).unwrap()
    }

    #[test]
    fn no_drive_stays_in_stored_state() {
        let p = params(0.0, 1.0, 2.0);
        let sol = integrate_single(&p, 10.0, 1e-10).unwrap();
        for s in &sol.states {
            assert_eq!((s.alpha, s.beta), (1.0, 0.0));
        }
        assert!(sol.emitted_prob.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn lossless_limit_is_pure_rabi() {
        let p = PhysicalParams::lossless(1.3f64);
        let sol = integrate_single(&p, 30.0, 1e-10).unwrap();
        for (t, s) in sol.times.iter().zip(&sol.states) {
            assert!((s.beta * s.beta - (1.3 * t / 2.0).sin().powi(2)).abs() < 1e-8);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        }
        let d = integrate_double(&p, 30.0, 1e-10).unwrap();
        for s in &d.states {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_closed_form_single() {
        let p = params(3.0, 1.0, 2.0);
        let t_end = 10.0 / p.decay_rate();
        let sol = integrate_single(&p, t_end, 1e-10).unwrap();
        let worst = sol
            .times
            .iter()
            .zip(&sol.states)
            .map(|(&t, s)| (s.beta - amplitude_single(&p, t).unwrap().beta).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn initial_state_of_double() {
        let p = params(3.0, 1.0, 2.0);
        let d = integrate_double(&p, 1.0, 1e-10).unwrap();
        let s = d.states[0];
        assert_eq!((s.lambda, s.mu, s.nu), (1.0, 0.0, 0.0));
    }

    #[test]
    fn norm_bookkeeping() {
        let p = params(2.0, 1.0, 3.0);
        let tol = 1e-10;
        let s = integrate_single(&p, 15.0, tol).unwrap();
        for (st, e) in s.states.iter().zip(&s.emitted_prob) {
            assert!((st.norm_sqr() + e - 1.0).abs() < 10.0 * tol);
            assert!((0.0..=1.0 + tol).contains(e));
        }
        assert!(s.emitted_prob.windows(2).all(|w| w[1] >= w[0] - tol));
        let d = integrate_double(&p, 15.0, tol).unwrap();
        for (st, e) in d.states.iter().zip(&d.emitted_prob) {
            assert!((st.norm_sqr() + e - 1.0).abs() < 10.0 * tol);
        }
    }

    #[test]
    fn emission_density_matches_model() {
        let p = params(2.0, 1.0, 3.0);
        let s = integrate_single(&p, 12.0, 1e-10).unwrap();
        let rho = emission_density(&s);
        assert_eq!(rho[0], 0.0);
        for (t, r) in s.times.iter().zip(&rho) {
            assert!((r - rho1(&p, *t).unwrap().value()).abs() < 1e-7);
        }
        let d = integrate_double(&p, 12.0, 1e-10).unwrap();
        for (t, r) in d.times.iter().zip(emission_density(&d)) {
            assert!((r - rho2_first(&p, *t).unwrap().value()).abs() < 1e-7);
        }
    }

    #[test]
    fn trapezoid_of_density_matches_emitted_probability() {
        let p = params(2.0, 1.0, 3.0);
        let s = integrate_single(&p, 12.0, 1e-10).unwrap();
        let rho = emission_density(&s);
        let trap: f64 = s
            .times
            .windows(2)
            .zip(rho.windows(2))
            .map(|(t, r)| 0.5 * (t[1] - t[0]) * (r[0] + r[1]))
            .sum();
        assert!((trap - s.emitted_prob.last().unwrap()).abs() < 1e-5);
    }

    #[test]
    fn general_initial_state() {
        let p = params(2.5, 1.0, 1.2);
        let x0 = AmplitudeState1 { alpha: 0.6, beta: -0.8 };
        let sol = integrate_single_from(&p, x0, 5.0, &OdeOptions::with_tol(1e-11)).unwrap();
        for (t, s) in sol.times.iter().zip(&sol.states) {
            let exact = crate::model::propagate(&p, *t, x0);
            assert!((s.alpha - exact.alpha).abs() < 1e-9 && (s.beta - exact.beta).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params(2.0, 1.0, 1.0);
        assert!(matches!(integrate_single(&p, 0.0, 1e-10), Err(DynamicsError::InvalidEndTime(_))));
        assert!(matches!(integrate_single(&p, 1.0, 1e-2), Err(DynamicsError::InvalidTolerance(_))));
        assert!(matches!(integrate_single(&p, 1.0, 1e-15), Err(DynamicsError::InvalidTolerance(_))));
    }

    #[test]
    fn underflow_error_names_stiffness_ratio() {
        let p = params(1e-3, 1.0, 1.0);
        let opts = OdeOptions {
            max_steps: 1_000_000,
            ..OdeOptions::with_tol(1e-14)
        };
        // long horizon at the tightest tolerance: must either finish or fail with a diagnosis
        match integrate_single_from(&p, AmplitudeState1::stored(), 1e6, &opts) {
            Ok(_) => {}
            Err(DynamicsError::StepUnderflow { stiffness_ratio, .. }) => assert!(stiffness_ratio > 1.0),
            Err(DynamicsError::TooManySteps { .. }) => {}
            Err(e) => panic!("unexpected {e}"),
        }
        let msg = DynamicsError::StepUnderflow { t: 1.0, h: 1e-20, stiffness_ratio: 4e6 }.to_string();
        assert!(msg.contains("stiffness ratio"));
    }
}
