//! Flat `key=value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! `--set key=value` overrides are applied after the file and win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use dlcz_core::fitting::{ModelKind, Param, Weighting};
use dlcz_core::trajectories::{Mode, Statistic};
use dlcz_core::RB87_D2_GAMMA;

use crate::error::CliError;

const KEYS: &[&str] = &[
    "omega0_rad_s",
    "gamma_rad_s",
    "chi",
    "w0_m",
    "k_ge_per_m",
    "n_eff",
    "cap_half_angle_rad",
    "cloud_atoms",
    "cloud_sigma_transverse_m",
    "cloud_sigma_axial_m",
    "cloud_seed",
    "n_directions",
    "chi_ref",
    "od_ref",
    "od_new",
    "n_traj",
    "seed",
    "t_max_factor",
    "mode",
    "statistic",
    "n_bins",
    "n_points",
    "t_lo",
    "t_hi",
    "model",
    "free",
    "weighting",
    "max_iter",
    "gtol",
    "init_chi",
    "init_omega0_rad_s",
    "init_amplitude_scale",
    "init_background",
    "init_t_offset_s",
    "mask",
];

/// Raw key/value pairs, validated against the known keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected key=value, got '{line}'"),
                });
            };
            cfg.insert(k.trim(), v.trim()).map_err(|msg| CliError::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text, path)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{assignment}'")))?;
        self.insert(k.trim(), v.trim()).map_err(CliError::Config)
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key '{key}'"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("{key}: cannot parse '{v}': {e}"))))
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| CliError::Config(format!("{key}: {e}"))))
                    .collect()
            })
            .transpose()
    }
}

/// Typed configuration. Every field is checked at parse time with a message
/// naming the key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega0_rad_s: Option<f64>,
    /// Defaults to the rubidium D2 line width (an external constant).
    pub gamma_rad_s: f64,
    pub chi: Option<f64>,

    pub w0_m: Option<f64>,
    pub k_ge_per_m: Option<f64>,
    pub n_eff: Option<f64>,
    pub cap_half_angle_rad: Option<f64>,
    pub cloud: Option<CloudSpec>,
    pub n_directions: usize,
    pub chi_ref: Option<f64>,
    pub od_ref: Option<f64>,
    pub od_new: Option<f64>,

    pub n_traj: usize,
    pub seed: u64,
    pub t_max_factor: f64,
    pub mode: Mode,
    pub statistics: Vec<Statistic>,

    pub n_bins: usize,
    /// Grid points of the wavepacket table.
    pub n_points: usize,
    pub t_lo: f64,
    pub t_hi: Option<f64>,

    pub model: ModelKind,
    pub free: Vec<Param>,
    pub weighting: Weighting,
    pub max_iter: usize,
    pub gtol: f64,
    pub init_chi: Option<f64>,
    pub init_omega0_rad_s: Option<f64>,
    pub init_amplitude_scale: Option<f64>,
    pub init_background: f64,
    pub init_t_offset_s: f64,
    /// Time ranges `[a, b]` in seconds; bins whose centre falls inside are masked.
    pub mask: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudSpec {
    pub n_atoms: usize,
    pub sigma_transverse_m: f64,
    pub sigma_axial_m: f64,
    pub seed: u64,
}

fn check(key: &str, v: Option<f64>, ok: impl Fn(f64) -> bool, what: &str) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !x.is_finite() || !ok(x) => Err(CliError::Config(format!("{key}: must be {what}, got {x}"))),
        other => Ok(other),
    }
}

fn positive(key: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    check(key, v, |x| x > 0.0, "positive")
}

fn nonnegative(key: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    check(key, v, |x| x >= 0.0, "nonnegative")
}

fn parse_mask(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|r| {
            let bad = || CliError::Config(format!("mask: expected ranges like 6.5e-9:7.5e-9, got '{r}'"));
            let (a, b) = r.split_once(':').ok_or_else(bad)?;
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(CliError::Config(format!("mask: range '{r}' must have finite start ≤ end")));
            }
            Ok((a, b))
        })
        .collect()
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let gamma_rad_s = positive("gamma_rad_s", raw.get("gamma_rad_s")?)?.unwrap_or(RB87_D2_GAMMA);
        let chi = check("chi", raw.get("chi")?, |x| x >= 1.0, "at least 1")?;
        let mode = raw.get::<Mode>("mode")?.unwrap_or(Mode::Double);
        let statistics = match raw.list::<Statistic>("statistic")? {
            Some(v) if v.is_empty() => return Err(CliError::Config("statistic: empty list".into())),
            Some(v) => v,
            None => match mode {
                Mode::Single => vec![Statistic::T1],
                Mode::Double => vec![Statistic::T1, Statistic::T2, Statistic::Tau, Statistic::Pooled],
            },
        };
        if mode == Mode::Single && statistics.iter().any(|s| *s != Statistic::T1) {
            return Err(CliError::Config("statistic: single mode only has t1".into()));
        }
        let free = raw.list::<Param>("free")?.unwrap_or_else(|| Param::ALL.to_vec());
        if free.is_empty() {
            return Err(CliError::Config("free: at least one parameter must be free".into()));
        }
        let cloud = match raw.get::<usize>("cloud_atoms")? {
            None => None,
            Some(0) => return Err(CliError::Config("cloud_atoms: must be at least 1".into())),
            Some(n_atoms) => Some(CloudSpec {
                n_atoms,
                sigma_transverse_m: positive("cloud_sigma_transverse_m", raw.get("cloud_sigma_transverse_m")?)?
                    .ok_or_else(|| CliError::Config("cloud_sigma_transverse_m: required with cloud_atoms".into()))?,
                sigma_axial_m: positive("cloud_sigma_axial_m", raw.get("cloud_sigma_axial_m")?)?
                    .ok_or_else(|| CliError::Config("cloud_sigma_axial_m: required with cloud_atoms".into()))?,
                seed: raw.get("cloud_seed")?.unwrap_or(0),
            }),
        };
        let n_bins = raw.get::<usize>("n_bins")?.unwrap_or(200);
        if n_bins == 0 {
            return Err(CliError::Config("n_bins: must be at least 1".into()));
        }
        let n_points = raw.get::<usize>("n_points")?.unwrap_or(1001);
        if n_points < 2 {
            return Err(CliError::Config("n_points: must be at least 2".into()));
        }
        let n_traj = raw.get::<usize>("n_traj")?.unwrap_or(10_000);
        if n_traj == 0 {
            return Err(CliError::Config("n_traj: must be at least 1".into()));
        }
        let n_directions = raw.get::<usize>("n_directions")?.unwrap_or(10_000);
        if n_directions < 10_000 {
            return Err(CliError::Config(format!("n_directions: must be at least 10000, got {n_directions}")));
        }
        let t_lo = check("t_lo", raw.get("t_lo")?, |_| true, "finite")?.unwrap_or(0.0);
        let t_hi = check("t_hi", raw.get("t_hi")?, |x| x > t_lo, "greater than t_lo")?;
        let max_iter = raw.get::<usize>("max_iter")?.unwrap_or(200);
        if max_iter == 0 {
            return Err(CliError::Config("max_iter: must be at least 1".into()));
        }
        Ok(Self {
            omega0_rad_s: nonnegative("omega0_rad_s", raw.get("omega0_rad_s")?)?,
            gamma_rad_s,
            chi,
            w0_m: positive("w0_m", raw.get("w0_m")?)?,
            k_ge_per_m: positive("k_ge_per_m", raw.get("k_ge_per_m")?)?,
            n_eff: nonnegative("n_eff", raw.get("n_eff")?)?,
            cap_half_angle_rad: check(
                "cap_half_angle_rad",
                raw.get("cap_half_angle_rad")?,
                |x| x > 0.0 && x < std::f64::consts::FRAC_PI_2,
                "in (0, π/2)",
            )?,
            cloud,
            n_directions,
            chi_ref: check("chi_ref", raw.get("chi_ref")?, |x| x >= 1.0, "at least 1")?,
            od_ref: positive("od_ref", raw.get("od_ref")?)?,
            od_new: nonnegative("od_new", raw.get("od_new")?)?,
            n_traj,
            seed: raw.get("seed")?.unwrap_or(0),
            t_max_factor: positive("t_max_factor", raw.get("t_max_factor")?)?.unwrap_or(40.0),
            mode,
            statistics,
            n_bins,
            n_points,
            t_lo,
            t_hi,
            model: raw.get("model")?.unwrap_or(ModelKind::Single),
            free,
            weighting: raw.get("weighting")?.unwrap_or_default(),
            max_iter,
            gtol: positive("gtol", raw.get("gtol")?)?.unwrap_or(1e-6),
            init_chi: check("init_chi", raw.get("init_chi")?, |x| x >= 1.0, "at least 1")?,
            init_omega0_rad_s: positive("init_omega0_rad_s", raw.get("init_omega0_rad_s")?)?,
            init_amplitude_scale: positive("init_amplitude_scale", raw.get("init_amplitude_scale")?)?,
            init_background: nonnegative("init_background", raw.get("init_background")?)?.unwrap_or(0.0),
            init_t_offset_s: check("init_t_offset_s", raw.get("init_t_offset_s")?, |_| true, "finite")?.unwrap_or(0.0),
            mask: raw.values.get("mask").map(|m| parse_mask(m)).transpose()?.unwrap_or_default(),
        })
    }

    pub fn require(&self, key: &str, v: Option<f64>) -> Result<f64, CliError> {
        v.ok_or_else(|| CliError::Config(format!("{key}: required for this command")))
    }
}
