use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identity of one trajectory's random stream: the ensemble seed and the
/// trajectory index. Distinct ids give non-overlapping ChaCha streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubstreamId {
    pub seed: u64,
    pub index: u64,
}

/// Counter-based generator keyed by `(seed, index)`.
///
/// The key comes from `seed`, the ChaCha stream number is `index`, so any
/// trajectory's draws can be reproduced without generating the others.
#[derive(Debug, Clone)]
pub struct TrajectoryRng {
    id: SubstreamId,
    inner: ChaCha8Rng,
}

impl TrajectoryRng {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        Self {
            id: SubstreamId { seed, index },
            inner,
        }
    }

    pub fn id(&self) -> SubstreamId {
        self.id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.sample(Open01)
    }
}
