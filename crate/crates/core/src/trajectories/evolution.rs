use crate::dynamics::{integrate_double_with, integrate_single_from, DynamicsError, OdeOptions, OdeSolution};
use crate::model::{amplitude_double, propagate, AmplitudeState1, AmplitudeState2, PhysicalParams};

/// Emission-free evolution between jumps.
pub trait NoJumpEvolution: Send + Sync {
    fn params(&self) -> &PhysicalParams<f64>;

    /// Single-excitation amplitudes after `t` without emission, from `from`.
    fn single(&self, t: f64, from: AmplitudeState1<f64>) -> AmplitudeState1<f64>;

    /// Two-excitation amplitudes at `t` from `|s_χ s_χ⟩`, before any emission.
    fn double(&self, t: f64) -> AmplitudeState2<f64>;
}

/// Exact 2×2 propagator.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticEvolution {
    params: PhysicalParams<f64>,
}

impl AnalyticEvolution {
    pub fn new(params: PhysicalParams<f64>) -> Self {
        Self { params }
    }
}

impl NoJumpEvolution for AnalyticEvolution {
    fn params(&self) -> &PhysicalParams<f64> {
        &self.params
    }

    fn single(&self, t: f64, from: AmplitudeState1<f64>) -> AmplitudeState1<f64> {
        propagate(&self.params, t, from)
    }

    fn double(&self, t: f64) -> AmplitudeState2<f64> {
        amplitude_double(&self.params, t.max(0.0)).unwrap_or_default()
    }
}

/// Dense ODE output. The single-excitation system is linear and autonomous, so
/// the two basis solutions from `(1, 0)` and `(0, 1)` propagate any initial state.
#[derive(Debug, Clone)]
pub struct OdeEvolution {
    params: PhysicalParams<f64>,
    from_stored: OdeSolution<f64, AmplitudeState1<f64>>,
    from_excited: OdeSolution<f64, AmplitudeState1<f64>>,
    double: OdeSolution<f64, AmplitudeState2<f64>>,
}

impl OdeEvolution {
    /// Integrates all three systems over `[0, t_max]` at relative tolerance `tol`.
    pub fn new(params: PhysicalParams<f64>, t_max: f64, tol: f64) -> Result<Self, DynamicsError> {
        let opts = OdeOptions {
            tol,
            n_output: 2,
            ..OdeOptions::default()
        };
        let from_stored = integrate_single_from(&params, AmplitudeState1::stored(), t_max, &opts)?;
        let excited = AmplitudeState1 { alpha: 0.0, beta: 1.0 };
        let from_excited = integrate_single_from(&params, excited, t_max, &opts)?;
        let double = integrate_double_with(&params, t_max, &opts)?;
        Ok(Self {
            params,
            from_stored,
            from_excited,
            double,
        })
    }
}

impl NoJumpEvolution for OdeEvolution {
    fn params(&self) -> &PhysicalParams<f64> {
        &self.params
    }

    // Times beyond the integrated horizon are clamped to it.
    fn single(&self, t: f64, from: AmplitudeState1<f64>) -> AmplitudeState1<f64> {
        let a = self.from_stored.state_at(t);
        let b = self.from_excited.state_at(t);
        AmplitudeState1 {
            alpha: from.alpha * a.alpha + from.beta * b.alpha,
            beta: from.alpha * a.beta + from.beta * b.beta,
        }
    }

    fn double(&self, t: f64) -> AmplitudeState2<f64> {
        self.double.state_at(t)
    }
}
