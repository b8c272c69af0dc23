//! Quantum-trajectory sampling of photon detection times.

mod evolution;
mod histogram;
mod rng;
mod sampler;

pub use evolution::{AnalyticEvolution, NoJumpEvolution, OdeEvolution};
pub use histogram::{bin_records, expected_bin_probabilities, Histogram, Statistic};
pub use rng::{SubstreamId, TrajectoryRng};
pub use sampler::{sample_double, sample_single, TrajectorySampler, BISECTION_RESOLUTION};

use rayon::prelude::*;

use crate::model::PhysicalParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("ensemble size must be at least 1")]
    EmptyEnsemble,
    #[error("simulation horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("invalid bin edges: {0}")]
    InvalidEdges(String),
}

/// Number of stored excitations at the start of the read-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Single,
    Double,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Self::Single),
            "double" => Ok(Self::Double),
            other => Err(format!("unknown mode '{other}' (expected single or double)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Double => "double",
        })
    }
}

/// Detection times of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionRecord {
    pub id: SubstreamId,
    pub mode: Mode,
    /// First detection; `None` when censored before it.
    pub t1: Option<f64>,
    /// Second detection (two-excitation runs only); strictly after `t1`.
    pub t2: Option<f64>,
    /// The horizon was reached with an emission still pending.
    pub censored: bool,
}

impl EmissionRecord {
    pub fn tau(&self) -> Option<f64> {
        Some(self.t2? - self.t1?)
    }
}

/// Runs `n` trajectories with the analytic propagator and default horizon.
///
/// Trajectory `i` draws from substream `(seed, i)`, so the result does not depend
/// on the number of worker threads.
pub fn run_ensemble(
    p: &PhysicalParams<f64>,
    n: usize,
    mode: Mode,
    seed: u64,
) -> Result<Vec<EmissionRecord>, TrajectoryError> {
    run_ensemble_with(&TrajectorySampler::analytic(*p)?, n, mode, seed)
}

pub fn run_ensemble_with<E: NoJumpEvolution>(
    sampler: &TrajectorySampler<E>,
    n: usize,
    mode: Mode,
    seed: u64,
) -> Result<Vec<EmissionRecord>, TrajectoryError> {
    if n == 0 {
        return Err(TrajectoryError::EmptyEnsemble);
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| sampler.sample(mode, &mut TrajectoryRng::new(seed, i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::survival_norm;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::new(3.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn lossless_never_emits() {
        let s = TrajectorySampler::new(AnalyticEvolution::new(PhysicalParams::lossless(2.0)), 100.0).unwrap();
        for i in 0..100 {
            let r = s.sample_single(&mut TrajectoryRng::new(1, i));
            assert!(r.censored && r.t1.is_none());
            let r = s.sample_double(&mut TrajectoryRng::new(1, i));
            assert!(r.censored && r.t1.is_none());
        }
    }

    #[test]
    fn lossless_has_no_default_horizon() {
        assert!(matches!(
            TrajectorySampler::analytic(PhysicalParams::lossless(2.0)),
            Err(TrajectoryError::InvalidHorizon(_))
        ));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let p = params();
        let a = run_ensemble(&p, 500, Mode::Double, 42).unwrap();
        let b = run_ensemble(&p, 500, Mode::Double, 42).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_ensemble(&p, 500, Mode::Double, 42).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert_eq!(run_ensemble(&params(), 0, Mode::Single, 1), Err(TrajectoryError::EmptyEnsemble));
    }

    #[test]
    fn substream_ids_are_unique_across_seeds() {
        let p = params();
        let mut ids: Vec<_> = run_ensemble(&p, 200, Mode::Single, 1)
            .unwrap()
            .into_iter()
            .chain(run_ensemble(&p, 200, Mode::Single, 2).unwrap())
            .map(|r| r.id)
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 400);
        let a = run_ensemble(&p, 200, Mode::Single, 1).unwrap();
        let b = run_ensemble(&p, 200, Mode::Single, 2).unwrap();
        let shared = a.iter().zip(&b).filter(|(x, y)| x.t1 == y.t1).count();
        assert_eq!(shared, 0);
    }

    #[test]
    fn double_records_are_ordered() {
        let recs = run_ensemble(&params(), 2000, Mode::Double, 9).unwrap();
        for r in recs.iter().filter(|r| !r.censored) {
            assert!(r.t2.unwrap() > r.t1.unwrap());
            assert!(r.t1.unwrap() >= 0.0);
        }
    }

    #[test]
    fn jump_time_hits_the_threshold() {
        let p = params();
        let s = TrajectorySampler::analytic(p).unwrap();
        let mut rng = TrajectoryRng::new(5, 0);
        let r = s.sample_single(&mut rng.clone());
        let u = rng.uniform();
        let t = r.t1.unwrap();
        assert!(survival_norm(&p, t).unwrap() <= u);
        assert!(survival_norm(&p, t - 2.0 * s.resolution()).unwrap() > u);
    }

    #[test]
    fn ode_and_analytic_propagators_agree() {
        let p = params();
        let analytic = TrajectorySampler::analytic(p).unwrap();
        let ode = TrajectorySampler::new(OdeEvolution::new(p, analytic.t_max(), 1e-12).unwrap(), analytic.t_max()).unwrap();
        for i in 0..200 {
            let a = analytic.sample_double(&mut TrajectoryRng::new(3, i));
            let b = ode.sample_double(&mut TrajectoryRng::new(3, i));
            assert!((a.t1.unwrap() - b.t1.unwrap()).abs() < 1e-8);
            assert!((a.t2.unwrap() - b.t2.unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn censoring_at_short_horizon() {
        let p = params();
        let t_max = 1.0;
        let s = TrajectorySampler::new(AnalyticEvolution::new(p), t_max).unwrap();
        let n = 20_000;
        let censored = run_ensemble_with(&s, n, Mode::Single, 11)
            .unwrap()
            .iter()
            .filter(|r| r.censored)
            .count() as f64;
        let expected = survival_norm(&p, t_max).unwrap();
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((censored / n as f64 - expected).abs() < 3.0 * se, "{censored} vs {expected}");
    }
}
