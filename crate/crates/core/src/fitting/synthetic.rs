//! Synthetic data for testing fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{FitError, FitModel, ModelKind, ParamValues};
use crate::model::{rho1, rho2_first, PhysicalParams, SecondPhotonDelay};
use crate::trajectories::expected_bin_probabilities;

/// Expected counts per bin at `truth`, with the density integrated over each bin
/// by adaptive quadrature (independent of the fit's three-point rule).
pub fn expected_counts(model: &FitModel, truth: &ParamValues, bin_edges: &[f64]) -> Result<Vec<f64>, FitError> {
    let p = PhysicalParams::new(truth.omega0, model.gamma(), truth.chi)?;
    let delay = SecondPhotonDelay::new(&p);
    let t_off = truth.t_offset;
    let kind = model.kind();
    let density = |t: f64| {
        let s = t - t_off;
        if s < 0.0 {
            return 0.0;
        }
        match kind {
            ModelKind::Single => rho1(&p, s),
            ModelKind::First => rho2_first(&p, s),
            ModelKind::SecondMarginal => delay.density(s),
        }
        .map(|d| d.value())
        .unwrap_or(0.0)
    };
    // split bins at the onset so the kink sits on an edge
    let probs: Vec<f64> = bin_edges
        .windows(2)
        .map(|w| {
            if w[0] < t_off && t_off < w[1] {
                expected_bin_probabilities(&[t_off, w[1]], density)[0]
            } else {
                expected_bin_probabilities(w, density)[0]
            }
        })
        .collect();
    Ok(probs
        .into_iter()
        .map(|q| truth.amplitude_scale * q + truth.background)
        .collect())
}

/// One Poisson draw per bin around `expected`, reproducible from `seed`.
pub fn poisson_counts(expected: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expected
        .iter()
        .map(|&m| if m > 0.0 { Poisson::new(m).expect("positive mean").sample(&mut rng) } else { 0.0 })
        .collect()
}
