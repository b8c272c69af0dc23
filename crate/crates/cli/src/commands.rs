use std::path::Path;

use dlcz_core::fitting::{envelope_check, masked_fit, FitData, FitModel, FitOptions, Param, ParamValues};
use dlcz_core::model::{tail_horizon, SecondPhotonDelay};
use dlcz_core::superradiance::{
    chi_cap_quadrature, chi_closed_form, chi_discrete, chi_from_od, effective_atom_number, phi_map, DiscreteOptions,
    GaussianCloud, ModeGeometry,
};
use dlcz_core::trajectories::{
    bin_records, run_ensemble_with, AnalyticEvolution, EmissionRecord, Mode, TrajectorySampler,
};
use dlcz_core::{rho1, rho2_first, Params};

use crate::config::{RawConfig, RunConfig};
use crate::csv::{emit, num, read_counts, Report, Table};
use crate::error::CliError;

fn physical(cfg: &RunConfig) -> Result<Params, CliError> {
    let omega0 = cfg.require("omega0_rad_s", cfg.omega0_rad_s)?;
    let chi = cfg.require("chi", cfg.chi)?;
    Ok(Params::new(omega0, cfg.gamma_rad_s, chi)?)
}

fn gamma_echo(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![("gamma_rad_s", num(cfg.gamma_rad_s))]
}

/// `ρ₁`, first-photon and second-photon-delay densities on a uniform grid.
pub fn wavepacket(raw: &RawConfig, cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let p = physical(cfg)?;
    let t_hi = cfg.t_hi.unwrap_or_else(|| tail_horizon(&p, cfg.t_max_factor));
    if t_hi <= cfg.t_lo {
        return Err(CliError::Config(format!("t_hi: must exceed t_lo, got {t_hi}")));
    }
    let second = SecondPhotonDelay::new(&p);
    let mut table = Table::new(
        "wavepacket",
        raw,
        &gamma_echo(cfg),
        &["t_s", "rho1", "rho2_first", "rho2_second_marginal"],
    );
    let n = cfg.n_points;
    for i in 0..n {
        let t = cfg.t_lo + (t_hi - cfg.t_lo) * i as f64 / (n - 1) as f64;
        table.row(&[
            num(t),
            num(rho1(&p, t)?.value()),
            num(rho2_first(&p, t)?.value()),
            num(second.density(t)?.value()),
        ]);
    }
    emit(out, &table.into_string())
}

fn time_field(t: Option<f64>) -> String {
    t.map(num).unwrap_or_default()
}

/// Trajectory ensemble: one record file plus one histogram per statistic.
pub fn simulate(raw: &RawConfig, cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let p = physical(cfg)?;
    let t_max = tail_horizon(&p, cfg.t_max_factor);
    let sampler = TrajectorySampler::new(AnalyticEvolution::new(p), t_max)?;
    let records: Vec<EmissionRecord> = run_ensemble_with(&sampler, cfg.n_traj, cfg.mode, cfg.seed)?;

    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let mut extra = gamma_echo(cfg);
    extra.push(("t_max_s", num(t_max)));
    let mut table = Table::new("simulate", raw, &extra, &["mode", "seed_id", "t1_s", "t2_s", "censored"]);
    for r in &records {
        table.row(&[
            r.mode.to_string(),
            format!("{}:{}", r.id.seed, r.id.index),
            time_field(r.t1),
            time_field(if r.mode == Mode::Double { r.t2 } else { None }),
            u8::from(r.censored).to_string(),
        ]);
    }
    let path = out_dir.join("records.csv");
    emit(Some(&path), &table.into_string())?;

    let t_hi = cfg.t_hi.unwrap_or(t_max);
    let edges: Vec<f64> = (0..=cfg.n_bins)
        .map(|i| cfg.t_lo + (t_hi - cfg.t_lo) * i as f64 / cfg.n_bins as f64)
        .collect();
    for &stat in &cfg.statistics {
        let h = bin_records(&records, &edges, stat)?;
        let mut extra = extra.clone();
        extra.push(("statistic", stat.to_string()));
        extra.push(("total", h.total().to_string()));
        extra.push(("in_range", h.in_range().to_string()));
        let mut table = Table::new(
            "simulate",
            raw,
            &extra,
            &["bin_lo_s", "bin_hi_s", "t_s", "counts", "probability", "density"],
        );
        let (prob, dens, centers) = (h.probabilities(), h.densities(), h.centers());
        for i in 0..h.n_bins() {
            table.row(&[
                num(edges[i]),
                num(edges[i + 1]),
                num(centers[i]),
                h.counts()[i].to_string(),
                num(prob[i]),
                num(dens[i]),
            ]);
        }
        let path = out_dir.join(format!("histogram_{stat}.csv"));
        emit(Some(&path), &table.into_string())?;
    }
    Ok(())
}

/// Cap half-angle used when none is configured: ten times the smallest cap that
/// holds the mode, kept below π/2.
fn default_cap(g: &ModeGeometry) -> f64 {
    (10.0 * g.min_cap_half_angle()).min(1.5)
}

const PHI_GRID: usize = 64;

/// Superradiant enhancement by every route the configuration allows.
pub fn chi(raw: &RawConfig, cfg: &RunConfig, out: Option<&Path>, phi_out: Option<&Path>) -> Result<(), CliError> {
    let w0 = cfg.require("w0_m", cfg.w0_m)?;
    let k = cfg.require("k_ge_per_m", cfg.k_ge_per_m)?;
    let n_eff = cfg.require("n_eff", cfg.n_eff)?;
    let g = ModeGeometry::new(w0, k, n_eff)?;
    let cap = cfg.cap_half_angle_rad.unwrap_or_else(|| default_cap(&g));

    let mut r = Report::default();
    r.num("w0_m", w0);
    r.num("k_ge_per_m", k);
    r.num("n_eff", n_eff);
    r.num("divergence_rad", g.divergence());
    r.put("paraxial", g.is_paraxial());
    r.num("chi_closed_form", chi_closed_form(&g));
    let capped = chi_cap_quadrature(&g, cap)?;
    r.num("cap_half_angle_rad", cap);
    r.num("chi_cap", capped.chi);
    r.num("chi_cap_error", capped.error_estimate);
    r.put("chi_cap_truncated", capped.truncated);

    let mut phi_rows = Vec::new();
    if let Some(spec) = cfg.cloud {
        let cloud = GaussianCloud {
            n_atoms: spec.n_atoms,
            sigma_transverse: spec.sigma_transverse_m,
            sigma_axial: spec.sigma_axial_m,
            w0,
            k_ge: k,
            seed: spec.seed,
        }
        .sample()?;
        let opts = DiscreteOptions {
            n_directions: cfg.n_directions,
            cap_half_angle: cfg.cap_half_angle_rad,
            seed: cfg.seed,
            ..DiscreteOptions::default()
        };
        let d = chi_discrete(&cloud, k, &opts)?;
        r.put("cloud_atoms", spec.n_atoms);
        let cloud_n_eff = effective_atom_number(&cloud);
        r.num("cloud_n_eff", cloud_n_eff);
        r.num("chi_closed_form_cloud", chi_closed_form(&ModeGeometry::new(w0, k, cloud_n_eff)?));
        r.num("chi_discrete", d.chi);
        r.num("chi_discrete_stderr", d.stderr);
        r.num("chi_discrete_cap_half_angle_rad", d.cap_half_angle);
        if phi_out.is_some() {
            phi_rows = phi_map(&cloud, k, d.cap_half_angle, PHI_GRID, PHI_GRID)?
                .into_iter()
                .map(|s| (s.theta, s.phi, s.intensity))
                .collect();
        }
    } else if phi_out.is_some() {
        for i in 0..PHI_GRID {
            let theta = cap * (i as f64 + 0.5) / PHI_GRID as f64;
            for j in 0..PHI_GRID {
                let phi = std::f64::consts::TAU * j as f64 / PHI_GRID as f64;
                phi_rows.push((theta, phi, g.intensity(theta, phi)));
            }
        }
    }

    match (cfg.chi_ref, cfg.od_ref, cfg.od_new) {
        (Some(c), Some(a), Some(b)) => r.num("chi_from_od", chi_from_od(c, a, b)?),
        (None, None, None) => {}
        _ => return Err(CliError::Config("chi_ref, od_ref, od_new: give all three or none".into())),
    }

    if let Some(path) = phi_out {
        let mut t = Table::new("chi phi map", raw, &[], &["theta_rad", "phi_rad", "intensity"]);
        for (a, b, c) in phi_rows {
            t.row(&[num(a), num(b), num(c)]);
        }
        emit(Some(path), &t.into_string())?;
    }
    emit(out, &r.into_string())
}

fn report_name(p: Param) -> &'static str {
    match p {
        Param::Chi => "chi",
        Param::Omega0 => "omega0_rad_s",
        Param::AmplitudeScale => "amplitude_scale",
        Param::Background => "background",
        Param::TOffset => "t_offset_s",
    }
}

/// Least-squares fit of binned counts. Outputs are written even when the fit
/// does not converge; that case is reported through the exit code.
pub fn fit(
    raw: &RawConfig,
    cfg: &RunConfig,
    data_path: &Path,
    out: Option<&Path>,
    residuals: Option<&Path>,
) -> Result<(), CliError> {
    let table = read_counts(data_path)?;
    let data = match table.edges {
        Some(edges) => FitData::new(edges, table.counts)?,
        None => FitData::from_centers(&table.centers, table.counts)?,
    };
    let centers = data.centers();
    let mask: Vec<usize> = (0..data.n_bins())
        .filter(|&i| cfg.mask.iter().any(|&(a, b)| (a..=b).contains(&centers[i])))
        .collect();

    let omega0 = cfg
        .init_omega0_rad_s
        .or(cfg.omega0_rad_s)
        .ok_or_else(|| CliError::Config("init_omega0_rad_s: required for fit (or set omega0_rad_s)".into()))?;
    let init = ParamValues {
        chi: cfg.init_chi.or(cfg.chi).unwrap_or(2.0),
        omega0,
        amplitude_scale: cfg
            .init_amplitude_scale
            .unwrap_or_else(|| data.counts().iter().sum::<f64>().max(1.0)),
        background: cfg.init_background,
        t_offset: cfg.init_t_offset_s,
    };
    let model = FitModel::new(cfg.model, &cfg.free, cfg.gamma_rad_s)?;
    let opts = FitOptions {
        max_iter: cfg.max_iter,
        gtol: cfg.gtol,
        weighting: cfg.weighting,
        ..FitOptions::default()
    };
    let res = masked_fit(&data, &model, &init, &mask, &opts)?;

    let mut r = Report::default();
    r.put("model", cfg.model);
    r.put("weighting", cfg.weighting);
    r.num("gamma_rad_s", res.gamma);
    r.put("converged", res.converged);
    r.put("n_iter", res.n_iter);
    r.put("n_bins_used", res.n_bins_used);
    r.put("n_bins_masked", mask.len());
    r.num("chi2", res.chi2);
    r.num("chi2_reduced", res.chi2_reduced);
    r.num("gradient_measure", res.gradient_measure);
    for p in Param::ALL {
        let name = report_name(p);
        r.num(name, res.estimates.get(p));
        match res.std_error(p) {
            Some(se) => r.num(&format!("{name}_stderr"), se),
            None => r.put(&format!("{name}_fixed"), true),
        }
    }
    if let Some(c) = res.correlation(Param::Chi, Param::Omega0) {
        r.num("corr_chi_omega0", c);
    }
    let env = envelope_check(&res, &data);
    r.put("envelope_maxima", env.maxima.len());
    r.num("envelope_predicted_rate_per_s", env.predicted_rate);
    if let (Some(rate), Some(ratio)) = (env.measured_rate, env.ratio) {
        r.num("envelope_measured_rate_per_s", rate);
        r.num("envelope_ratio", ratio);
    }
    r.put("envelope_insufficient", env.insufficient);

    if let Some(path) = residuals {
        let mut t = Table::new(
            "fit residuals",
            raw,
            &[("data", data_path.display().to_string())],
            &["t_s", "counts", "model", "pearson_residual", "masked"],
        );
        for i in 0..data.n_bins() {
            let (y, m) = (data.counts()[i], res.model[i]);
            t.row(&[
                num(centers[i]),
                num(y),
                num(m),
                num((y - m) / m.max(1.0).sqrt()),
                u8::from(mask.contains(&i)).to_string(),
            ]);
        }
        emit(Some(path), &t.into_string())?;
    }
    emit(out, &r.into_string())?;
    if !res.converged {
        return Err(CliError::NotConverged { n_iter: res.n_iter });
    }
    Ok(())
}
