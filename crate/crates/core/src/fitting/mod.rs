//! Weighted least-squares recovery of `(χ, Ω₀)` and nuisance parameters from
//! binned detection-time data.
//!
//! Data and results are in SI units (seconds, rad/s). Internally the optimizer
//! works in units of the atomic decay rate `Γ`, which keeps all parameters of
//! order one.

mod envelope;
mod lm;
mod synthetic;

pub use envelope::{envelope_check, EnvelopeReport};
pub use synthetic::{expected_counts, poisson_counts};

use std::fmt;

use crate::model::{rho1, rho2_first, ModelError, PhysicalParams, SecondPhotonDelay};
use crate::trajectories::Histogram;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{bins} usable bins is fewer than twice the {free} free parameters")]
    TooFewBins { bins: usize, free: usize },
    #[error("initial {param} = {value} is outside its bounds")]
    InitOutOfBounds { param: Param, value: f64 },
    #[error("mask index {index} is out of range for {n_bins} bins")]
    MaskOutOfRange { index: usize, n_bins: usize },
    #[error("normal equations are singular: {a} and {b} are degenerate")]
    Degenerate { a: Param, b: Param },
    #[error("normal equations are singular: the data do not constrain {0}")]
    Unconstrained(Param),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which density the histogram is compared to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// One stored excitation, `ρ₁(t)`.
    Single,
    /// First photon of two, `ρ₁⁽²⁾(t)`.
    First,
    /// Delay of the second photon after the first, `ρ₂⁽²⁾(τ)`.
    SecondMarginal,
}

impl ModelKind {
    /// Decay rate of the peak envelope, in units of `χΓ`.
    pub fn envelope_rate_factor(self) -> f64 {
        match self {
            ModelKind::Single | ModelKind::SecondMarginal => 0.5,
            ModelKind::First => 1.0,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Self::Single),
            "first" => Ok(Self::First),
            "second_marginal" => Ok(Self::SecondMarginal),
            other => Err(format!("unknown model '{other}' (expected single, first or second_marginal)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Single => "single",
            ModelKind::First => "first",
            ModelKind::SecondMarginal => "second_marginal",
        })
    }
}

/// Fit parameters. `Γ` is never fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Chi,
    Omega0,
    /// Total counts the density is scaled by.
    AmplitudeScale,
    /// Constant counts per bin.
    Background,
    /// Delay of the read-out start, s.
    TOffset,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::Chi, Param::Omega0, Param::AmplitudeScale, Param::Background, Param::TOffset];

    pub fn name(self) -> &'static str {
        match self {
            Param::Chi => "chi",
            Param::Omega0 => "omega0",
            Param::AmplitudeScale => "amplitude_scale",
            Param::Background => "background",
            Param::TOffset => "t_offset",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn lower_bound(self) -> f64 {
        match self {
            Param::Chi => 1.0,
            Param::Omega0 | Param::AmplitudeScale | Param::Background => 0.0,
            Param::TOffset => f64::NEG_INFINITY,
        }
    }

    /// Multiplier from SI to Γ-units.
    fn to_internal(self, gamma: f64) -> f64 {
        match self {
            Param::Omega0 => 1.0 / gamma,
            Param::TOffset => gamma,
            _ => 1.0,
        }
    }

    /// Typical magnitude in Γ-units, the floor of the finite-difference step scale.
    fn typical(self) -> f64 {
        1.0
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown parameter '{s}' (expected one of chi, omega0, amplitude_scale, background, t_offset)"))
    }
}

/// Values of all five parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamValues {
    pub chi: f64,
    pub omega0: f64,
    pub amplitude_scale: f64,
    pub background: f64,
    pub t_offset: f64,
}

impl ParamValues {
    pub fn get(&self, p: Param) -> f64 {
        self.as_array()[p.index()]
    }

    pub fn set(&mut self, p: Param, v: f64) {
        let mut a = self.as_array();
        a[p.index()] = v;
        *self = Self::from_array(a);
    }

    fn as_array(&self) -> [f64; 5] {
        [self.chi, self.omega0, self.amplitude_scale, self.background, self.t_offset]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            chi: a[0],
            omega0: a[1],
            amplitude_scale: a[2],
            background: a[3],
            t_offset: a[4],
        }
    }
}

/// Model kind, the free parameters, and the fixed atomic decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    kind: ModelKind,
    free: Vec<Param>,
    gamma: f64,
}

impl FitModel {
    pub fn new(kind: ModelKind, free: &[Param], gamma: f64) -> Result<Self, FitError> {
        if free.is_empty() {
            return Err(FitError::InvalidModel("no free parameters".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FitError::InvalidModel(format!("gamma must be positive, got {gamma}")));
        }
        let mut free = free.to_vec();
        free.sort();
        free.dedup();
        Ok(Self { kind, free, gamma })
    }

    /// `(χ, Ω₀)` free with scale fixed, as for normalized synthetic data.
    pub fn shape_only(kind: ModelKind, gamma: f64) -> Self {
        Self::new(kind, &[Param::Chi, Param::Omega0], gamma).expect("valid")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn free(&self) -> &[Param] {
        &self.free
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Expected counts per bin at `v`.
    pub fn predict(&self, v: &ParamValues, bin_edges: &[f64]) -> Result<Vec<f64>, FitError> {
        let mut out = vec![0.0; bin_edges.len().saturating_sub(1)];
        Evaluator::new(self.kind, self.gamma, bin_edges).eval(&internal(v, self.gamma), &mut out)?;
        Ok(out)
    }
}

fn internal(v: &ParamValues, gamma: f64) -> [f64; 5] {
    let mut a = v.as_array();
    for p in Param::ALL {
        a[p.index()] *= p.to_internal(gamma);
    }
    a
}

fn external(a: [f64; 5], gamma: f64) -> ParamValues {
    let mut a = a;
    for p in Param::ALL {
        a[p.index()] /= p.to_internal(gamma);
    }
    ParamValues::from_array(a)
}

/// Bin-integrated model in Γ-units: `scale·∫_bin ρ(t − t_off) dt + background`,
/// three-point Gauss–Legendre per bin, `ρ = 0` before the read-out starts.
struct Evaluator {
    kind: ModelKind,
    edges: Vec<f64>,
}

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

impl Evaluator {
    fn new(kind: ModelKind, gamma: f64, bin_edges: &[f64]) -> Self {
        Self {
            kind,
            edges: bin_edges.iter().map(|e| e * gamma).collect(),
        }
    }

    fn eval(&self, x: &[f64; 5], out: &mut [f64]) -> Result<(), ModelError> {
        let [chi, omega0, scale, background, t_off] = *x;
        let p = PhysicalParams::new(omega0, 1.0, chi)?;
        let delay = matches!(self.kind, ModelKind::SecondMarginal).then(|| SecondPhotonDelay::new(&p));
        let density = |t: f64| -> Result<f64, ModelError> {
            Ok(match self.kind {
                ModelKind::Single => rho1(&p, t)?.value(),
                ModelKind::First => rho2_first(&p, t)?.value(),
                ModelKind::SecondMarginal => delay.as_ref().expect("built above").density(t)?.value(),
            })
        };
        for (o, w) in out.iter_mut().zip(self.edges.windows(2)) {
            let a = (w[0] - t_off).max(0.0);
            let b = w[1] - t_off;
            let mut integral = 0.0;
            if b > a {
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for (xi, wi) in GL3_X.iter().zip(GL3_W) {
                    integral += wi * density(mid + half * xi)?;
                }
                integral *= half;
            }
            *o = scale * integral + background;
        }
        Ok(())
    }
}

/// Binned counts. Counts are real so that expected (noiseless) data can be fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    bin_edges: Vec<f64>,
    counts: Vec<f64>,
}

impl FitData {
    /// Edges in seconds, one count per bin.
    pub fn new(bin_edges: Vec<f64>, counts: Vec<f64>) -> Result<Self, FitError> {
        if bin_edges.len() < 2 || counts.len() + 1 != bin_edges.len() {
            return Err(FitError::InvalidData(format!(
                "{} edges do not bound {} bins",
                bin_edges.len(),
                counts.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FitError::InvalidData("bin edges must be finite and strictly increasing".into()));
        }
        if let Some(i) = counts.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(FitError::InvalidData(format!("count in bin {i} is negative or not finite")));
        }
        Ok(Self { bin_edges, counts })
    }

    /// Bins around the given centres; edges are midpoints, the outer edges mirror
    /// the neighbouring half-widths.
    pub fn from_centers(centers: &[f64], counts: Vec<f64>) -> Result<Self, FitError> {
        if centers.len() < 2 {
            return Err(FitError::InvalidData("need at least two bin centres".into()));
        }
        if centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FitError::InvalidData("bin centres must be strictly increasing".into()));
        }
        let n = centers.len();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(centers[0] - 0.5 * (centers[1] - centers[0]));
        edges.extend(centers.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(centers[n - 1] + 0.5 * (centers[n - 1] - centers[n - 2]));
        Self::new(edges, counts)
    }

    pub fn from_histogram(h: &Histogram) -> Self {
        Self {
            bin_edges: h.bin_edges().to_vec(),
            counts: h.counts().iter().map(|&c| c as f64).collect(),
        }
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// How the per-bin weights of the least-squares objective are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Weighting {
    /// `1/max(counts, 1)` from the data.
    #[default]
    Observed,
    /// `1/max(model, 1)`, iteratively reweighted. At the fixed point this is the
    /// Poisson maximum-likelihood estimate, without the low-count bias of
    /// observed weights.
    Model,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "observed" => Ok(Self::Observed),
            "model" => Ok(Self::Model),
            other => Err(format!("unknown weighting '{other}' (expected observed or model)")),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Observed => "observed",
            Weighting::Model => "model",
        })
    }
}

const REWEIGHT_TOL: f64 = 1e-9;
const MAX_REWEIGHTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence when every `|∂cost/∂x_i|·|x_i| ≤ gtol·(cost + 1)`, or when no
    /// downhill step is representable and the predicted decrease is negligible.
    pub gtol: f64,
    pub weighting: Weighting,
    /// Run the optimizer on SI-valued parameters instead of Γ-units.
    pub work_in_si: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gtol: 1e-6,
            weighting: Weighting::Observed,
            work_in_si: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    pub gamma: f64,
    /// All parameters, SI units; fixed ones echo the initial values.
    pub estimates: ParamValues,
    pub free: Vec<Param>,
    /// Covariance of the free parameters in the order of `free`, SI units.
    pub covariance: Vec<Vec<f64>>,
    /// `Σ w_b (counts_b − model_b)²` at the estimate, with the final weights.
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Largest scaled gradient component relative to `cost + 1`.
    pub gradient_measure: f64,
    pub n_bins_used: usize,
    /// Fitted model per bin (all bins, masked ones included).
    pub model: Vec<f64>,
}

impl FitResult {
    /// Standard error of a free parameter.
    pub fn std_error(&self, p: Param) -> Option<f64> {
        let i = self.free.iter().position(|&q| q == p)?;
        Some(self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn correlation(&self, a: Param, b: Param) -> Option<f64> {
        let i = self.free.iter().position(|&q| q == a)?;
        let j = self.free.iter().position(|&q| q == b)?;
        Some(self.covariance[i][j] / (self.covariance[i][i] * self.covariance[j][j]).sqrt())
    }

    pub fn params(&self) -> Result<PhysicalParams<f64>, ModelError> {
        PhysicalParams::new(self.estimates.omega0, self.gamma, self.estimates.chi)
    }
}

/// Poisson-weighted least-squares fit of `model` to every bin of `data`.
pub fn fit(data: &FitData, model: &FitModel, init: &ParamValues, opts: &FitOptions) -> Result<FitResult, FitError> {
    masked_fit(data, model, init, &[], opts)
}

/// As [`fit`], with the bins listed in `mask` left out of the objective.
pub fn masked_fit(
    data: &FitData,
    model: &FitModel,
    init: &ParamValues,
    mask: &[usize],
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    let n_bins = data.n_bins();
    let mut used = vec![true; n_bins];
    for &i in mask {
        if i >= n_bins {
            return Err(FitError::MaskOutOfRange { index: i, n_bins });
        }
        used[i] = false;
    }
    let keep: Vec<usize> = (0..n_bins).filter(|&i| used[i]).collect();
    let n_free = model.free.len();
    if keep.len() < 2 * n_free {
        return Err(FitError::TooFewBins { bins: keep.len(), free: n_free });
    }
    for p in Param::ALL {
        let v = init.get(p);
        if !v.is_finite() || v < p.lower_bound() || (p == Param::AmplitudeScale && v <= 0.0) {
            return Err(FitError::InitOutOfBounds { param: p, value: v });
        }
    }
    if opts.max_iter == 0 || !(opts.gtol > 0.0) {
        return Err(FitError::InvalidModel("max_iter and gtol must be positive".into()));
    }

    let gamma = model.gamma;
    let eval = Evaluator::new(model.kind, gamma, &data.bin_edges);
    let base = internal(init, gamma);
    // optimizer coordinates: Γ-units, or SI when asked (a diagonal rescaling)
    let unit: Vec<f64> = model
        .free
        .iter()
        .map(|p| if opts.work_in_si { p.to_internal(gamma) } else { 1.0 })
        .collect();
    let to_full = |x: &[f64]| {
        let mut a = base;
        for ((p, xi), u) in model.free.iter().zip(x).zip(&unit) {
            a[p.index()] = xi * u;
        }
        a
    };
    let y: Vec<f64> = keep.iter().map(|&i| data.counts[i]).collect();
    let w: Vec<f64> = y.iter().map(|&c| 1.0 / c.max(1.0)).collect();
    let mut full = vec![0.0; n_bins];
    let f = |x: &[f64], out: &mut [f64]| -> Result<(), ModelError> {
        let mut buf = vec![0.0; n_bins];
        eval.eval(&to_full(x), &mut buf)?;
        for (o, &i) in out.iter_mut().zip(&keep) {
            *o = buf[i];
        }
        Ok(())
    };
    let x0: Vec<f64> = model.free.iter().zip(&unit).map(|(p, u)| base[p.index()] / u).collect();
    let lower: Vec<f64> = model.free.iter().zip(&unit).map(|(p, u)| p.lower_bound() / u).collect();
    let typical: Vec<f64> = model.free.iter().zip(&unit).map(|(p, u)| p.typical() / u).collect();

    let mut w = w;
    let mut x = x0;
    let mut n_iter = 0;
    let mut reweights = 0;
    let mut predicted = vec![0.0; y.len()];
    let out = loop {
        let out = lm::minimize(
            &lm::Problem {
                f: &f,
                y: &y,
                w: &w,
                lower: &lower,
                typical: &typical,
            },
            x,
            opts.max_iter,
            opts.gtol,
        )?;
        n_iter += out.n_iter;
        if opts.weighting == Weighting::Observed || !out.converged {
            break out;
        }
        f(&out.x, &mut predicted)?;
        let mut settled = true;
        for (wi, m) in w.iter_mut().zip(&predicted) {
            let new = 1.0 / m.max(1.0);
            settled &= (new - *wi).abs() <= REWEIGHT_TOL * *wi;
            *wi = new;
        }
        reweights += 1;
        if settled {
            break out;
        }
        if reweights == MAX_REWEIGHTS {
            break lm::Outcome { converged: false, ..out };
        }
        x = out.x;
    };
    let cov_opt = lm::covariance(&out.normal_matrix).map_err(|e| match e {
        lm::Singular::Pair(a, b) => FitError::Degenerate {
            a: model.free[a],
            b: model.free[b],
        },
        lm::Singular::Column(a) => FitError::Unconstrained(model.free[a]),
    })?;
    let final_full = to_full(&out.x);
    let estimates = external(final_full, gamma);
    // d(SI)/d(optimizer coordinate)
    let jac: Vec<f64> = model.free.iter().zip(&unit).map(|(p, u)| u / p.to_internal(gamma)).collect();
    let covariance = (0..n_free)
        .map(|i| (0..n_free).map(|j| cov_opt[i][j] * jac[i] * jac[j]).collect())
        .collect();
    eval.eval(&final_full, &mut full)?;
    let dof = (keep.len() - n_free).max(1) as f64;
    Ok(FitResult {
        kind: model.kind,
        gamma,
        estimates,
        free: model.free.clone(),
        covariance,
        chi2: out.cost,
        chi2_reduced: out.cost / dof,
        n_iter,
        converged: out.converged,
        gradient_measure: out.gradient_measure,
        n_bins_used: keep.len(),
        model: full,
    })
}
