//! Dormand–Prince 5(4) with Hairer's 4th-order continuous extension.

use crate::dynamics::DynamicsError;
use crate::scalar::Real;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th minus embedded 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Step-size controller settings.
#[derive(Debug, Clone, Copy)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    /// Upper bound on a single step; `None` for the full interval.
    pub h_max: Option<T>,
}

/// Piecewise quartic interpolant over all accepted steps.
#[derive(Debug, Clone)]
pub struct DenseOutput<T> {
    dim: usize,
    starts: Vec<T>,
    steps: Vec<T>,
    // 5·dim coefficients per step
    coeffs: Vec<T>,
    t_end: T,
}

impl<T: Real> DenseOutput<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> T {
        self.starts[0]
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Interpolated state at `t`, clamped to the integrated interval.
    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let t = t.max(self.starts[0]).min(self.t_end);
        let idx = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        let theta = (t - self.starts[idx]) / self.steps[idx];
        let theta1 = T::one() - theta;
        let base = idx * 5 * self.dim;
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let r = |k: usize| self.coeffs[base + k * self.dim + i];
            *o = r(0) + theta * (r(1) + theta1 * (r(2) + theta * (r(3) + theta1 * r(4))));
        }
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, &mut out);
        out
    }
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t_end`, keeping the dense output.
pub fn integrate<T, F>(mut f: F, t0: T, y0: &[T], t_end: T, ctl: &StepControl<T>) -> Result<DenseOutput<T>, DynamicsError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let n = y0.len();
    let lit = T::lit;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut y = y0.to_vec();
    let mut y_new = vec![T::zero(); n];
    let mut stage = vec![T::zero(); n];
    let mut dense = DenseOutput {
        dim: n,
        starts: Vec::new(),
        steps: Vec::new(),
        coeffs: Vec::new(),
        t_end,
    };
    let span = t_end - t0;
    let h_max = ctl.h_max.unwrap_or(span).min(span);
    let scale = |a: T, b: T| ctl.atol + ctl.rtol * a.abs().max(b.abs());

    f(t0, &y, &mut k[0]);
    // Hairer's starting step guess
    let d0 = (y.iter().map(|&v| (v / scale(v, v)).powi(2)).fold(T::zero(), |a, b| a + b) / lit(n as f64)).sqrt();
    let d1 = (y.iter().zip(&k[0]).map(|(&v, &dv)| (dv / scale(v, v)).powi(2)).fold(T::zero(), |a, b| a + b)
        / lit(n as f64))
    .sqrt();
    let mut h = if d0 < lit(1e-5) || d1 < lit(1e-5) {
        lit(1e-6) * span
    } else {
        lit(0.01) * d0 / d1
    };
    h = h.min(h_max);

    let mut t = t0;
    let mut err_old = lit(1e-4);
    let mut rejected_last = false;
    let mut steps = 0usize;
    while t < t_end {
        if steps >= ctl.max_steps {
            return Err(DynamicsError::TooManySteps { t: t.as_f64(), max_steps: ctl.max_steps });
        }
        if h < lit(16.0) * T::epsilon() * t.abs().max(span) {
            return Err(DynamicsError::StepUnderflow { t: t.as_f64(), h: h.as_f64(), stiffness_ratio: f64::NAN });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc = acc + lit(A[s][j]) * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let ts = t + lit(C[s]) * h;
            let (_, tail) = k.split_at_mut(s);
            f(ts, &stage, &mut tail[0]);
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        let mut err = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for (j, kj) in k.iter().enumerate() {
                e = e + lit(E[j]) * kj[i];
            }
            let sc = scale(y[i], y_new[i]);
            err = err + (h * e / sc).powi(2);
        }
        let err = (err / lit(n as f64)).sqrt();
        steps += 1;
        if err <= T::one() {
            let base = dense.coeffs.len();
            dense.coeffs.resize(base + 5 * n, T::zero());
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = h * k[0][i] - dy;
                let mut d = T::zero();
                for (j, kj) in k.iter().enumerate() {
                    d = d + lit(D[j]) * kj[i];
                }
                dense.coeffs[base + i] = y[i];
                dense.coeffs[base + n + i] = dy;
                dense.coeffs[base + 2 * n + i] = bspl;
                dense.coeffs[base + 3 * n + i] = dy - h * k[6][i] - bspl;
                dense.coeffs[base + 4 * n + i] = h * d;
            }
            dense.starts.push(t);
            dense.steps.push(h);
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            // FSAL
            k.swap(0, 6);
            // PI controller
            let fac = lit(0.9) * err.max(lit(1e-10)).powf(lit(-0.7 / 5.0)) * err_old.powf(lit(0.4 / 5.0));
            let mut fac = fac.max(lit(0.2)).min(lit(10.0));
            if rejected_last {
                fac = fac.min(T::one());
            }
            err_old = err.max(lit(1e-4));
            h = (h * fac).min(h_max);
            rejected_last = false;
        } else {
            let fac = (lit(0.9) * err.powf(lit(-0.2))).max(lit(0.2));
            h = h * fac;
            rejected_last = true;
        }
    }
    Ok(dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl(tol: f64) -> StepControl<f64> {
        StepControl {
            rtol: tol,
            atol: tol,
            max_steps: 100_000,
            h_max: None,
        }
    }

    #[test]
    fn exponential_decay() {
        let d = integrate(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], 5.0, &ctl(1e-10)).unwrap();
        for i in 0..=50 {
            let t = i as f64 * 0.1;
            assert!((d.eval(t)[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let d = integrate(rhs, 0.0, &[0.0, 1.0], 20.0, &ctl(1e-11)).unwrap();
        for i in 0..=997 {
            let t = i as f64 * 0.02;
            let y = d.eval(t);
            assert!((y[0] - t.sin()).abs() < 1e-8 && (y[1] - t.cos()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn step_budget_is_enforced() {
        let mut c = ctl(1e-12);
        c.max_steps = 5;
        let r = integrate(|_, y, dy| dy[0] = -100.0 * y[0], 0.0, &[1.0], 10.0, &c);
        assert!(matches!(r, Err(DynamicsError::TooManySteps { .. })));
    }

    #[test]
    fn f32_solution() {
        let c = StepControl {
            rtol: 1e-5f32,
            atol: 1e-5,
            max_steps: 10_000,
            h_max: None,
        };
        let d = integrate(|_, y, dy| dy[0] = -y[0], 0.0f32, &[1.0f32], 3.0, &c).unwrap();
        assert!((d.eval(3.0)[0] - (-3.0f32).exp()).abs() < 1e-4);
    }
}
