use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SuperradianceError;

/// Sampled atoms with their collective-state weights.
///
/// The stored excitation has amplitude `weights[i]` on atom `i`; the read beam
/// imprints `e^{i k_r·r_i}` and field 2 is phase matched around `−k_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    positions: Vec<[f64; 3]>,
    weights: Vec<Complex64>,
    k_r: [f64; 3],
    k_1: [f64; 3],
}

const NORM_TOL: f64 = 1e-12;

impl AtomCloud {
    /// Positions in m, wavevectors in 1/m. The weights must satisfy `Σ|α_i|² = 1`.
    pub fn new(
        positions: Vec<[f64; 3]>,
        weights: Vec<Complex64>,
        k_r: [f64; 3],
        k_1: [f64; 3],
    ) -> Result<Self, SuperradianceError> {
        let bad = |m: String| Err(SuperradianceError::InvalidCloud(m));
        if positions.is_empty() {
            return bad("no atoms".into());
        }
        if positions.len() != weights.len() {
            return bad(format!("{} positions but {} weights", positions.len(), weights.len()));
        }
        if let Some(i) = positions.iter().position(|r| r.iter().any(|x| !x.is_finite())) {
            return bad(format!("position of atom {i} is not finite"));
        }
        if k_r.iter().chain(&k_1).any(|x| !x.is_finite()) {
            return bad("wavevectors must be finite".into());
        }
        if norm(k_1) == 0.0 {
            return bad("k_1 must be nonzero".into());
        }
        let n: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
        if !((n - 1.0).abs() <= NORM_TOL) {
            return bad(format!("weights must satisfy Σ|α|² = 1, got {n}"));
        }
        Ok(Self {
            positions,
            weights,
            k_r,
            k_1,
        })
    }

    /// Normalizes `weights` before building the cloud.
    pub fn normalized(
        positions: Vec<[f64; 3]>,
        mut weights: Vec<Complex64>,
        k_r: [f64; 3],
        k_1: [f64; 3],
    ) -> Result<Self, SuperradianceError> {
        let n = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(SuperradianceError::InvalidCloud("weights are all zero or not finite".into()));
        }
        weights.iter_mut().for_each(|w| *w /= n);
        Self::new(positions, weights, k_r, k_1)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn k_r(&self) -> [f64; 3] {
        self.k_r
    }

    pub fn k_1(&self) -> [f64; 3] {
        self.k_1
    }

    /// Applies a rotation matrix to positions and both wavevectors.
    pub fn rotated(&self, m: &[[f64; 3]; 3]) -> Self {
        Self {
            positions: self.positions.iter().map(|&r| apply(m, r)).collect(),
            weights: self.weights.clone(),
            k_r: apply(m, self.k_r),
            k_1: apply(m, self.k_1),
        }
    }

    /// Per-axis standard deviation of the `|α|²`-weighted positions transverse to `k_1`.
    pub(crate) fn transverse_spread(&self) -> f64 {
        let axis = scale(self.k_1, 1.0 / norm(self.k_1));
        let w: Vec<f64> = self.weights.iter().map(|a| a.norm_sqr()).collect();
        let perp: Vec<[f64; 3]> = self
            .positions
            .iter()
            .map(|&r| sub(r, scale(axis, dot(r, axis))))
            .collect();
        let mut mean = [0.0; 3];
        for (p, &wi) in perp.iter().zip(&w) {
            mean = add(mean, scale(*p, wi));
        }
        let var: f64 = perp.iter().zip(&w).map(|(&p, &wi)| wi * dot(sub(p, mean), sub(p, mean))).sum();
        (var / 2.0).sqrt()
    }
}

/// `(Σ|α_i|)²`, the atom number of the equivalent uniform (top-hat) cloud.
pub fn effective_atom_number(cloud: &AtomCloud) -> f64 {
    let s: f64 = cloud.weights.iter().map(|w| w.norm()).sum();
    s * s
}

/// Gaussian cloud of atoms centred on a Gaussian mode along `+z`.
///
/// Write beam and field 1 both travel along `+z` and the read beam along `−z`,
/// so field 2 is phase matched along `−z`. Atom `i` gets weight
/// `∝ e^{−(x²+y²)/w0²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCloud {
    pub n_atoms: usize,
    pub sigma_transverse: f64,
    pub sigma_axial: f64,
    pub w0: f64,
    pub k_ge: f64,
    pub seed: u64,
}

impl GaussianCloud {
    pub fn sample(&self) -> Result<AtomCloud, SuperradianceError> {
        let bad = |m: String| Err(SuperradianceError::InvalidCloud(m));
        if self.n_atoms == 0 {
            return bad("n_atoms must be at least 1".into());
        }
        for (name, v) in [
            ("sigma_transverse", self.sigma_transverse),
            ("sigma_axial", self.sigma_axial),
            ("w0", self.w0),
            ("k_ge", self.k_ge),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let tr = Normal::new(0.0, self.sigma_transverse).expect("validated");
        let ax = Normal::new(0.0, self.sigma_axial).expect("validated");
        let positions: Vec<[f64; 3]> = (0..self.n_atoms)
            .map(|_| [tr.sample(&mut rng), tr.sample(&mut rng), ax.sample(&mut rng)])
            .collect();
        let weights = positions
            .iter()
            .map(|r| Complex64::new((-(r[0] * r[0] + r[1] * r[1]) / (self.w0 * self.w0)).exp(), 0.0))
            .collect();
        let k = self.k_ge;
        AtomCloud::normalized(positions, weights, [0.0, 0.0, -k], [0.0, 0.0, k])
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}
