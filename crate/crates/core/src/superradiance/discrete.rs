use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cloud::{add, dot, norm, scale, sub};
use super::{AtomCloud, SuperradianceError};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteOptions {
    /// Monte Carlo directions for the region outside the cap.
    pub n_directions: usize,
    /// Cap half-angle around `−k_1`; `None` sizes it from the cloud's transverse spread.
    pub cap_half_angle: Option<f64>,
    pub n_theta: usize,
    pub n_phi: usize,
    pub seed: u64,
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        Self {
            n_directions: MIN_DIRECTIONS,
            cap_half_angle: None,
            n_theta: 64,
            n_phi: 64,
            seed: 0,
        }
    }
}

pub const MIN_DIRECTIONS: usize = 10_000;
const N_STRATA: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteChi {
    pub chi: f64,
    /// Monte Carlo standard error of `chi` (from the off-cap remainder only).
    pub stderr: f64,
    /// Off-diagonal contribution from the cap, by deterministic quadrature.
    pub cap_term: f64,
    /// Off-diagonal contribution from the rest of the sphere, by stratified Monte Carlo.
    pub remainder: f64,
    pub cap_half_angle: f64,
}

/// `|F(k)|²` in one emission direction, with `F(k) = Σ α_i e^{i(k_r−k)·r_i}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSample {
    /// Polar angle from `−k_1`.
    pub theta: f64,
    pub phi: f64,
    pub intensity: f64,
}

/// Flat copy of the cloud for the inner loop.
struct Emitter {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    k_r: [f64; 3],
    k: f64,
    diag: f64,
    axis: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
}

impl Emitter {
    fn new(cloud: &AtomCloud, k_ge: f64) -> Self {
        let p = cloud.positions();
        let w = cloud.weights();
        let axis = scale(cloud.k_1(), -1.0 / norm(cloud.k_1()));
        let (e1, e2) = perpendicular_basis(axis);
        Self {
            x: p.iter().map(|r| r[0]).collect(),
            y: p.iter().map(|r| r[1]).collect(),
            z: p.iter().map(|r| r[2]).collect(),
            re: w.iter().map(|a| a.re).collect(),
            im: w.iter().map(|a| a.im).collect(),
            k_r: cloud.k_r(),
            k: k_ge,
            diag: w.iter().map(|a| a.norm_sqr()).sum(),
            axis,
            e1,
            e2,
        }
    }

    fn direction(&self, theta: f64, phi: f64) -> [f64; 3] {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        add(scale(self.axis, ct), add(scale(self.e1, st * cp), scale(self.e2, st * sp)))
    }

    fn intensity(&self, dir: [f64; 3]) -> f64 {
        let q = sub(self.k_r, scale(dir, self.k));
        let (mut fr, mut fi) = (0.0, 0.0);
        for i in 0..self.x.len() {
            let (s, c) = (q[0] * self.x[i] + q[1] * self.y[i] + q[2] * self.z[i]).sin_cos();
            fr += self.re[i] * c - self.im[i] * s;
            fi += self.re[i] * s + self.im[i] * c;
        }
        fr * fr + fi * fi
    }

    /// `|F|² − Σ|α|²`: the i≠j part of the double sum.
    fn off_diagonal(&self, dir: [f64; 3]) -> f64 {
        self.intensity(dir) - self.diag
    }
}

fn perpendicular_basis(a: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = sub(helper, scale(a, dot(helper, a)));
    let e1 = scale(e1, 1.0 / norm(e1));
    let e2 = [
        a[1] * e1[2] - a[2] * e1[1],
        a[2] * e1[0] - a[0] * e1[2],
        a[0] * e1[1] - a[1] * e1[0],
    ];
    (e1, e2)
}

fn resolve_cap(cloud: &AtomCloud, k_ge: f64, requested: Option<f64>) -> Result<f64, SuperradianceError> {
    match requested {
        Some(c) if c > 0.0 && c <= PI => Ok(c),
        Some(c) => Err(SuperradianceError::InvalidCap(c)),
        None => {
            // |F|² falls off like e^{−(kθσ)²}; six widths leave < e^{−36} outside
            let spread = cloud.transverse_spread();
            Ok(if spread > 0.0 { (6.0 / (k_ge * spread)).min(PI) } else { PI })
        }
    }
}

/// `χ = 1 + (1/4πk²)∮ Σ_{ij} α_i α_j* e^{i(k_r−k)·(r_i−r_j)}` over the sphere `|k| = k_ge`.
///
/// The diagonal contributes exactly 1. The off-diagonal part is integrated by
/// Gauss–Legendre × trapezoid quadrature over the cap around `−k_1` and by
/// stratified Monte Carlo over the remainder of the sphere; `stderr` is the
/// standard error of the latter.
pub fn chi_discrete(cloud: &AtomCloud, k_ge: f64, opts: &DiscreteOptions) -> Result<DiscreteChi, SuperradianceError> {
    if !(k_ge > 0.0 && k_ge.is_finite()) {
        return Err(SuperradianceError::InvalidGeometry(format!("k_ge must be positive, got {k_ge}")));
    }
    if opts.n_theta < 2 || opts.n_phi < 3 {
        return Err(SuperradianceError::InvalidGeometry("cap grid needs n_theta ≥ 2 and n_phi ≥ 3".into()));
    }
    let cap = resolve_cap(cloud, k_ge, opts.cap_half_angle)?;
    if cap < PI && opts.n_directions < MIN_DIRECTIONS {
        return Err(SuperradianceError::InvalidGeometry(format!(
            "n_directions must be at least {MIN_DIRECTIONS}, got {}",
            opts.n_directions
        )));
    }
    if cloud.len() == 1 {
        // no off-diagonal terms
        return Ok(DiscreteChi {
            chi: 1.0,
            stderr: 0.0,
            cap_term: 0.0,
            remainder: 0.0,
            cap_half_angle: cap,
        });
    }
    let em = Emitter::new(cloud, k_ge);

    let (nodes, weights) = gauss_legendre(opts.n_theta);
    let n_phi = opts.n_phi;
    let rings: Vec<f64> = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&x, &w)| {
            let theta = 0.5 * cap * (x + 1.0);
            let s: f64 = (0..n_phi)
                .map(|j| em.off_diagonal(em.direction(theta, 2.0 * PI * (j as f64 + 0.5) / n_phi as f64)))
                .sum();
            0.5 * cap * w * theta.sin() * s * 2.0 * PI / n_phi as f64
        })
        .collect();
    let cap_term = rings.iter().sum::<f64>() / (4.0 * PI);

    let (remainder, rem_se) = if cap < PI {
        let u_top = cap.cos();
        let per = opts.n_directions.div_ceil(N_STRATA).max(2);
        let du = (u_top + 1.0) / N_STRATA as f64;
        let strata: Vec<(f64, f64)> = (0..N_STRATA)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(s as u64);
                let vals: Vec<f64> = (0..per)
                    .map(|_| {
                        let u = -1.0 + du * (s as f64 + rng.random::<f64>());
                        let phi = 2.0 * PI * rng.random::<f64>();
                        em.off_diagonal(em.direction(u.clamp(-1.0, 1.0).acos(), phi))
                    })
                    .collect();
                let mean = vals.iter().sum::<f64>() / per as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (per - 1) as f64;
                (mean, var / per as f64)
            })
            .collect();
        // each stratum has area 2π·du; the remainder is (1/4π)·Σ area·mean
        let f = 2.0 * PI * du / (4.0 * PI);
        let value = f * strata.iter().map(|s| s.0).sum::<f64>();
        let se = f * strata.iter().map(|s| s.1).sum::<f64>().sqrt();
        (value, se)
    } else {
        (0.0, 0.0)
    };

    Ok(DiscreteChi {
        chi: 1.0 + cap_term + remainder,
        stderr: rem_se,
        cap_term,
        remainder,
        cap_half_angle: cap,
    })
}

/// `|F(k)|²` on an `n_theta × n_phi` grid over the cap around `−k_1`, for inspection.
pub fn phi_map(
    cloud: &AtomCloud,
    k_ge: f64,
    cap_half_angle: f64,
    n_theta: usize,
    n_phi: usize,
) -> Result<Vec<PhiSample>, SuperradianceError> {
    if !(cap_half_angle > 0.0 && cap_half_angle <= PI) {
        return Err(SuperradianceError::InvalidCap(cap_half_angle));
    }
    if !(k_ge > 0.0 && k_ge.is_finite()) || n_theta == 0 || n_phi == 0 {
        return Err(SuperradianceError::InvalidGeometry("phi map needs k_ge > 0 and a nonempty grid".into()));
    }
    let em = Emitter::new(cloud, k_ge);
    Ok((0..n_theta * n_phi)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n_phi, idx % n_phi);
            let theta = cap_half_angle * (i as f64 + 0.5) / n_theta as f64;
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            PhiSample {
                theta,
                phi,
                intensity: em.intensity(em.direction(theta, phi)),
            }
        })
        .collect())
}
