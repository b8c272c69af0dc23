use crate::quadrature::Quadrature;
use crate::trajectories::{EmissionRecord, TrajectoryError};

/// Which detection-time statistic [`bin_records`] histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    T1,
    T2,
    /// `t2 − t1`.
    Tau,
    /// Both `t1` and `t2` of every record; the total counts two per record.
    Pooled,
}

impl std::str::FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "t1" => Ok(Self::T1),
            "t2" => Ok(Self::T2),
            "tau" => Ok(Self::Tau),
            "pooled" => Ok(Self::Pooled),
            other => Err(format!("unknown statistic '{other}' (expected t1, t2, tau or pooled)")),
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::T1 => "t1",
            Self::T2 => "t2",
            Self::Tau => "tau",
            Self::Pooled => "pooled",
        })
    }
}

/// Binned detection times. Values outside the edges (and absent values of
/// censored records) count towards `total` only.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

fn check_edges(edges: &[f64]) -> Result<(), TrajectoryError> {
    if edges.len() < 2 {
        return Err(TrajectoryError::InvalidEdges("need at least two edges".into()));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(TrajectoryError::InvalidEdges("edges must be finite".into()));
    }
    if let Some(i) = edges.windows(2).position(|w| w[1] <= w[0]) {
        return Err(TrajectoryError::InvalidEdges(format!(
            "edges must increase strictly, edge {} ({}) is not above edge {} ({})",
            i + 1,
            edges[i + 1],
            i,
            edges[i]
        )));
    }
    Ok(())
}

impl Histogram {
    pub fn new(bin_edges: Vec<f64>) -> Result<Self, TrajectoryError> {
        check_edges(&bin_edges)?;
        let n = bin_edges.len() - 1;
        Ok(Self {
            bin_edges,
            counts: vec![0; n],
            total: 0,
        })
    }

    /// `n_bins` equal bins over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n_bins: usize) -> Result<Self, TrajectoryError> {
        if n_bins == 0 {
            return Err(TrajectoryError::InvalidEdges("need at least one bin".into()));
        }
        let w = (hi - lo) / n_bins as f64;
        let edges = (0..=n_bins)
            .map(|i| if i == n_bins { hi } else { lo + w * i as f64 })
            .collect();
        Self::new(edges)
    }

    /// Rebuilds a histogram from stored parts, checking the invariants.
    pub fn from_parts(bin_edges: Vec<f64>, counts: Vec<u64>, total: u64) -> Result<Self, TrajectoryError> {
        check_edges(&bin_edges)?;
        if counts.len() + 1 != bin_edges.len() {
            return Err(TrajectoryError::InvalidEdges(format!(
                "{} counts do not fit {} edges",
                counts.len(),
                bin_edges.len()
            )));
        }
        if counts.iter().sum::<u64>() > total {
            return Err(TrajectoryError::InvalidEdges("counts exceed total".into()));
        }
        Ok(Self {
            bin_edges,
            counts,
            total,
        })
    }

    /// Adds one observation; `None` only increments the total.
    pub fn add(&mut self, value: Option<f64>) {
        self.total += 1;
        let Some(v) = value else { return };
        let (lo, hi) = (self.bin_edges[0], *self.bin_edges.last().unwrap());
        if !(v >= lo && v <= hi) {
            return;
        }
        let idx = self.bin_edges.partition_point(|&e| e <= v).saturating_sub(1).min(self.counts.len() - 1);
        self.counts[idx] += 1;
    }

    /// Adds another histogram with identical edges.
    pub fn merge(&mut self, other: &Histogram) -> Result<(), TrajectoryError> {
        if other.bin_edges != self.bin_edges {
            return Err(TrajectoryError::InvalidEdges("cannot merge histograms with different edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Fraction of the total that landed in each bin.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Empirical density per bin, `counts/(total·width)`.
    pub fn densities(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }

    /// `Σ_b |p̂_b − p_b|` against expected bin probabilities.
    pub fn l1_distance(&self, expected: &[f64]) -> f64 {
        assert_eq!(expected.len(), self.counts.len(), "one expected probability per bin");
        self.probabilities().iter().zip(expected).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Histograms one statistic of `records` over `bin_edges`.
pub fn bin_records(records: &[EmissionRecord], bin_edges: &[f64], which: Statistic) -> Result<Histogram, TrajectoryError> {
    let mut h = Histogram::new(bin_edges.to_vec())?;
    for r in records {
        match which {
            Statistic::T1 => h.add(r.t1),
            Statistic::T2 => h.add(r.t2),
            Statistic::Tau => h.add(r.tau()),
            Statistic::Pooled => {
                h.add(r.t1);
                h.add(r.t2);
            }
        }
    }
    Ok(h)
}

/// Probability mass of `density` in every bin, by adaptive quadrature.
pub fn expected_bin_probabilities(bin_edges: &[f64], density: impl Fn(f64) -> f64) -> Vec<f64> {
    let q = Quadrature::with_tolerances(1e-14, 1e-10).initial_intervals(2);
    bin_edges
        .windows(2)
        .map(|w| q.integrate(&density, w[0], w[1]).value)
        .collect()
}
