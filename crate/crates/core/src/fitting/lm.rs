//! Levenberg–Marquardt for weighted least squares with lower bounds.

use nalgebra::{DMatrix, DVector};

use crate::model::ModelError;

pub(super) struct Problem<'a> {
    pub f: &'a dyn Fn(&[f64], &mut [f64]) -> Result<(), ModelError>,
    pub y: &'a [f64],
    pub w: &'a [f64],
    pub lower: &'a [f64],
    /// Magnitude below which a parameter's step scale stops shrinking.
    pub typical: &'a [f64],
}

pub(super) struct Outcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub gradient_measure: f64,
    /// `JᵀWJ` at `x`.
    pub normal_matrix: DMatrix<f64>,
}

#[derive(Debug, PartialEq)]
pub(super) enum Singular {
    /// Columns `i` and `j` are (nearly) collinear.
    Pair(usize, usize),
    /// Column `i` is zero.
    Column(usize),
}

const REL_STEP: f64 = 1e-6;
/// Largest Gauss–Newton predicted cost decrease, relative to `cost + 1`, at which a
/// stalled search still counts as converged.
const STALL_DECREASE: f64 = 1e-10;

impl Problem<'_> {
    fn scale(&self, x: &[f64], i: usize) -> f64 {
        x[i].abs().max(self.typical[i])
    }

    fn cost(&self, model: &[f64]) -> f64 {
        model.iter().zip(self.y).zip(self.w).map(|((m, y), w)| w * (y - m).powi(2)).sum()
    }

    /// Central-difference Jacobian of the model; one-sided next to a bound.
    fn jacobian(&self, x: &[f64], model: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let m = self.y.len();
        let mut jac = DMatrix::zeros(m, x.len());
        let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = REL_STEP * self.scale(x, i);
            xp[i] = x[i] + h;
            (self.f)(&xp, &mut plus)?;
            if x[i] - h >= self.lower[i] {
                xp[i] = x[i] - h;
                (self.f)(&xp, &mut minus)?;
                for b in 0..m {
                    jac[(b, i)] = (plus[b] - minus[b]) / (2.0 * h);
                }
            } else {
                for b in 0..m {
                    jac[(b, i)] = (plus[b] - model[b]) / h;
                }
            }
            xp[i] = x[i];
        }
        Ok(jac)
    }

    /// `JᵀW J` and `JᵀW(y − model)` (half the descent direction of the cost).
    fn normal_equations(&self, jac: &DMatrix<f64>, model: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let n = jac.ncols();
        let mut a = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for b in 0..self.y.len() {
            let r = self.y[b] - model[b];
            for i in 0..n {
                let wi = self.w[b] * jac[(b, i)];
                g[i] += wi * r;
                for j in 0..=i {
                    a[(i, j)] += wi * jac[(b, j)];
                }
            }
        }
        a.fill_upper_triangle_with_lower_triangle();
        (a, g)
    }

    /// Largest scaled projected gradient component relative to `cost + 1`.
    fn gradient_measure(&self, x: &[f64], g: &DVector<f64>, cost: f64) -> f64 {
        (0..x.len())
            .filter(|&i| !(x[i] <= self.lower[i] && g[i] < 0.0))
            .map(|i| 2.0 * g[i].abs() * self.scale(x, i))
            .fold(0.0, f64::max)
            / (cost + 1.0)
    }
}

pub(super) fn minimize(p: &Problem<'_>, x0: Vec<f64>, max_iter: usize, gtol: f64) -> Result<Outcome, ModelError> {
    let m = p.y.len();
    let mut x = x0;
    let mut model = vec![0.0; m];
    (p.f)(&x, &mut model)?;
    let mut cost = p.cost(&model);
    let mut trial = vec![0.0; m];
    let mut lambda = 1e-3;
    let mut n_iter = 0;
    let mut converged = false;
    let mut measure;

    loop {
        let jac = p.jacobian(&x, &model)?;
        let (a, g) = p.normal_equations(&jac, &model);
        measure = p.gradient_measure(&x, &g, cost);
        if measure <= gtol {
            converged = true;
        }
        if converged || n_iter >= max_iter {
            return Ok(Outcome {
                x,
                cost,
                n_iter,
                converged,
                gradient_measure: measure,
                normal_matrix: a,
            });
        }
        n_iter += 1;
        let diag_floor = 1e-15 * a.diagonal().max();
        let mut improved = false;
        while lambda < 1e20 {
            let mut damped = a.clone();
            for i in 0..x.len() {
                damped[(i, i)] += lambda * a[(i, i)].max(diag_floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&g);
            let xt: Vec<f64> = (0..x.len()).map(|i| (x[i] + step[i]).max(p.lower[i])).collect();
            if xt == x {
                break;
            }
            (p.f)(&xt, &mut trial)?;
            let ct = p.cost(&trial);
            if ct < cost {
                x = xt;
                std::mem::swap(&mut model, &mut trial);
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no downhill step is representable any more; accept if the Gauss–Newton
            // model agrees that nothing is left to gain
            let jac = p.jacobian(&x, &model)?;
            let (a, g) = p.normal_equations(&jac, &model);
            measure = p.gradient_measure(&x, &g, cost);
            let predicted = a.clone().cholesky().map(|c| g.dot(&c.solve(&g)));
            let stationary = predicted.is_some_and(|d| d <= STALL_DECREASE * (cost + 1.0));
            return Ok(Outcome {
                x,
                cost,
                n_iter,
                converged: measure <= gtol || stationary,
                gradient_measure: measure,
                normal_matrix: a,
            });
        }
    }
}

/// Inverse of the normal matrix, or the offending parameters when it is singular.
pub(super) fn covariance(a: &DMatrix<f64>) -> Result<Vec<Vec<f64>>, Singular> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let max_d = d.iter().cloned().fold(0.0, f64::max);
    if let Some(i) = d.iter().position(|&v| !(v > 0.0 && v > 1e-28 * max_d)) {
        return Err(Singular::Column(i));
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let corr = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let most_correlated = || {
        let mut best = (0, 1.min(n - 1), -1.0);
        for i in 0..n {
            for j in i + 1..n {
                if corr[(i, j)].abs() > best.2 {
                    best = (i, j, corr[(i, j)].abs());
                }
            }
        }
        Singular::Pair(best.0, best.1)
    };
    let eig = corr.clone().symmetric_eigenvalues();
    if eig.min() < 1e-12 * eig.max().max(1.0) {
        return Err(most_correlated());
    }
    let inv = corr.clone().try_inverse().ok_or_else(most_correlated)?;
    Ok((0..n).map(|i| (0..n).map(|j| inv[(i, j)] * s[i] * s[j]).collect()).collect())
}
