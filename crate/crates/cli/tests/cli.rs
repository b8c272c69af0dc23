use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dlcz_core::fitting::{expected_counts, poisson_counts, FitModel, ModelKind, Param, ParamValues};
use dlcz_core::model::tail_horizon;
use dlcz_core::trajectories::expected_bin_probabilities;
use dlcz_core::{rho1, Params, RB87_D2_GAMMA};

const OMEGA0: f64 = 0.4e9;
const CHI: f64 = 4.0;

fn dlcz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlcz")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn report(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn value(r: &BTreeMap<String, String>, key: &str) -> f64 {
    r.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

/// Data rows of a CSV as (header, rows).
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (h, rows) = table(text);
    let j = h.iter().position(|c| c == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn physics() -> Vec<String> {
    vec![
        "--set".into(),
        format!("omega0_rad_s={OMEGA0}"),
        "--set".into(),
        format!("chi={CHI}"),
    ]
}

fn with(base: &[String], extra: &[&str]) -> Vec<String> {
    let mut v = base.to_vec();
    for e in extra {
        v.push("--set".into());
        v.push(e.to_string());
    }
    v
}

fn run(cmd: &str, args: &[String], tail: &[&str]) -> Output {
    let mut all: Vec<&str> = vec![cmd];
    all.extend(args.iter().map(String::as_str));
    all.extend(tail);
    dlcz(&all)
}

#[test]
fn wavepacket_is_byte_stable_and_matches_core() {
    let args = with(&physics(), &["n_points=401"]);
    let a = ok(&run("wavepacket", &args, &[]));
    let b = ok(&run("wavepacket", &args, &[]));
    assert_eq!(a, b);
    assert!(a.starts_with("# dlcz wavepacket\n"));
    let (header, rows) = table(&a);
    assert_eq!(header, ["t_s", "rho1", "rho2_first", "rho2_second_marginal"]);
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[0][0], "0.00000000000000e0");
    // any row reproduces the library value to the printed precision
    let p = Params::new(OMEGA0, RB87_D2_GAMMA, CHI).unwrap();
    let t_hi = tail_horizon(&p, 40.0);
    let t = t_hi * 37.0 / 400.0;
    assert_eq!(rows[37][0], format!("{t:.14e}"));
    assert_eq!(rows[37][1], format!("{:.14e}", rho1(&p, t).unwrap().value()));
}

#[test]
fn wavepacket_columns_integrate_to_one() {
    let t_hi = 40.0 / (CHI * RB87_D2_GAMMA);
    let args = with(&physics(), &["n_points=8001", &format!("t_hi={t_hi}")]);
    let text = ok(&run("wavepacket", &args, &[]));
    let t = column(&text, "t_s");
    for name in ["rho1", "rho2_first", "rho2_second_marginal"] {
        let y = column(&text, name);
        let sum: f64 = t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum();
        assert!((sum - 1.0).abs() < 1e-3, "{name}: {sum}");
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("# test\nomega0_rad_s = {OMEGA0}\nchi = 9\nn_points = 3\n")).unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = ok(&dlcz(&["wavepacket", "--config", cfg, "--set", "chi=4"]));
    let b = ok(&run("wavepacket", &with(&physics(), &["n_points=3"]), &[]));
    assert_eq!(table(&a), table(&b));

    let bad = dlcz(&["wavepacket", "--config", cfg, "--set", "chi=0.5"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("chi: must be at least 1"));
    let missing = dlcz(&["wavepacket", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(dlcz(&["wavepacket", "--bogus"]).status.code(), Some(1));
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let args = with(&physics(), extra);
    ok(&run("simulate", &args, &["--out-dir", dir.to_str().unwrap()]));
    dir.to_path_buf()
}

#[test]
fn single_trajectory_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        simulate(d.path(), &["n_traj=1", "seed=17", "mode=single"]);
    }
    let ra = std::fs::read_to_string(a.path().join("records.csv")).unwrap();
    let rb = std::fs::read_to_string(b.path().join("records.csv")).unwrap();
    assert_eq!(ra, rb);
    let (header, rows) = table(&ra);
    assert_eq!(header, ["mode", "seed_id", "t1_s", "t2_s", "censored"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "single");
    assert_eq!(rows[0][1], "17:0");
    assert!(rows[0][2].parse::<f64>().unwrap() > 0.0);
    assert_eq!(rows[0][3], "");
    assert_eq!(rows[0][4], "0");
    assert!(a.path().join("histogram_t1.csv").exists());
}

#[test]
fn censored_rows_have_empty_times() {
    let d = tempfile::tempdir().unwrap();
    // a horizon far shorter than the decay censors most trajectories
    simulate(d.path(), &["n_traj=200", "t_max_factor=0.05", "statistic=t1"]);
    let (_, rows) = table(&std::fs::read_to_string(d.path().join("records.csv")).unwrap());
    let censored: Vec<_> = rows.iter().filter(|r| r[4] == "1").collect();
    assert!(!censored.is_empty());
    for r in censored {
        assert_eq!(r[3], "", "{r:?}");
    }
    assert!(rows.iter().filter(|r| r[4] == "0").all(|r| !r[2].is_empty() && !r[3].is_empty()));
}

#[test]
fn pooled_histogram_matches_rho1() {
    let d = tempfile::tempdir().unwrap();
    let t_hi = 16.0 / (CHI * RB87_D2_GAMMA);
    simulate(d.path(), &["n_traj=100000", "n_bins=50", &format!("t_hi={t_hi}"), "statistic=pooled"]);
    let text = std::fs::read_to_string(d.path().join("histogram_pooled.csv")).unwrap();
    let (header, rows) = table(&text);
    let lo = header.iter().position(|c| c == "bin_lo_s").unwrap();
    let mut edges: Vec<f64> = rows.iter().map(|r| r[lo].parse().unwrap()).collect();
    edges.push(t_hi);
    let p = Params::new(OMEGA0, RB87_D2_GAMMA, CHI).unwrap();
    let expected = expected_bin_probabilities(&edges, |t| rho1(&p, t).unwrap().value());
    let observed = column(&text, "probability");
    let l1: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).abs()).sum();
    assert!(l1 < 0.02, "L1 {l1}");
}

const GEOMETRY: [&str; 3] = ["w0_m=3.7253e-6", "k_ge_per_m=8.0529e6", "n_eff=0"];

#[test]
fn chi_od_scaling_and_empty_mode() {
    let args = with(&[], &GEOMETRY);
    let args = with(&args, &["chi_ref=4.0", "od_ref=31.4", "od_new=15.9"]);
    let r = report(&ok(&run("chi", &args, &[])));
    assert_eq!(format!("{:.2}", value(&r, "chi_from_od")), "2.52");
    assert_eq!(value(&r, "chi_closed_form"), 1.0);
    assert_eq!(value(&r, "chi_cap"), 1.0);

    let args = with(&with(&[], &GEOMETRY), &["chi_ref=4.0", "od_ref=31.4", "od_new=0"]);
    let r = report(&ok(&run("chi", &args, &[])));
    assert_eq!(value(&r, "chi_from_od"), 1.0);

    let out = dlcz(&["chi", "--set", "w0_m=1e-5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_ge_per_m"));
    let out = run("chi", &with(&with(&[], &GEOMETRY), &["chi_ref=4"]), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn chi_routes_agree_for_a_paraxial_cloud() {
    let k = 2.0 * std::f64::consts::PI / 780.24e-9;
    let w0 = 30.0 / k;
    let args = with(
        &[],
        &[
            &format!("w0_m={w0}"),
            &format!("k_ge_per_m={k}"),
            "n_eff=500",
            "cloud_atoms=2000",
            &format!("cloud_sigma_transverse_m={}", 4.0 * w0),
            &format!("cloud_sigma_axial_m={}", 4.0 * w0),
            "cloud_seed=3",
        ],
    );
    let d = tempfile::tempdir().unwrap();
    let map = d.path().join("phi.csv");
    let text = ok(&run("chi", &args, &["--phi-map", map.to_str().unwrap()]));
    assert_eq!(text, ok(&run("chi", &args, &[])));
    let r = report(&text);
    assert_eq!(r["paraxial"], "true");
    assert!((value(&r, "chi_cap") / value(&r, "chi_closed_form") - 1.0).abs() < 0.01);
    let closed = value(&r, "chi_closed_form_cloud");
    let disc = value(&r, "chi_discrete");
    let se = value(&r, "chi_discrete_stderr");
    assert!((disc - closed).abs() < 0.05 * closed + 3.0 * se, "{disc} ± {se} vs {closed}");
    let (header, rows) = table(&std::fs::read_to_string(map).unwrap());
    assert_eq!(header, ["theta_rad", "phi_rad", "intensity"]);
    assert_eq!(rows.len(), 64 * 64);
}

/// Binned synthetic counts at `CHI`, `OMEGA0` with Poisson noise.
fn synthetic(n_bins: usize, total: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let t_hi = 16.0 / (CHI * RB87_D2_GAMMA);
    let edges: Vec<f64> = (0..=n_bins).map(|i| t_hi * i as f64 / n_bins as f64).collect();
    let model = FitModel::new(ModelKind::Single, &[Param::Chi, Param::Omega0, Param::AmplitudeScale], RB87_D2_GAMMA)
        .unwrap();
    let truth = ParamValues {
        chi: CHI,
        omega0: OMEGA0,
        amplitude_scale: total,
        background: 0.0,
        t_offset: 0.0,
    };
    let mean = expected_counts(&model, &truth, &edges).unwrap();
    let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    (centers, poisson_counts(&mean, seed))
}

fn write_counts(path: &Path, centers: &[f64], counts: &[f64]) {
    let mut s = String::from("# synthetic\nt_s,counts\n");
    for (t, c) in centers.iter().zip(counts) {
        s.push_str(&format!("{t:.14e},{c}\n"));
    }
    std::fs::write(path, s).unwrap();
}

const FIT_INIT: [&str; 4] = ["init_chi=3", "init_omega0_rad_s=3.5e8", "free=chi,omega0,amplitude_scale", "model=single"];

#[test]
fn fit_recovers_synthetic_parameters() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data.csv");
    let (t, c) = synthetic(80, 1e5, 11);
    write_counts(&data, &t, &c);
    let res = d.path().join("res.csv");
    let args = with(&[], &FIT_INIT);
    let text = ok(&run("fit", &args, &[data.to_str().unwrap(), "--residuals", res.to_str().unwrap()]));
    let r = report(&text);
    assert_eq!(r["converged"], "true");
    for (key, truth) in [("chi", CHI), ("omega0_rad_s", OMEGA0)] {
        let (v, se) = (value(&r, key), value(&r, &format!("{key}_stderr")));
        assert!((v - truth).abs() < 4.0 * se, "{key}: {v} ± {se}");
        assert!((v / truth - 1.0).abs() < 0.02, "{key}: {v}");
    }
    assert_eq!(r["background_fixed"], "true");
    let (header, rows) = table(&std::fs::read_to_string(res).unwrap());
    assert_eq!(header, ["t_s", "counts", "model", "pearson_residual", "masked"]);
    assert_eq!(rows.len(), 80);
}

#[test]
fn fit_reports_best_point_when_not_converged() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data.csv");
    let (t, c) = synthetic(80, 1e5, 12);
    write_counts(&data, &t, &c);
    let args = with(&with(&[], &FIT_INIT), &["max_iter=1"]);
    let out = run("fit", &args, &[data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r["converged"], "false");
    assert!(r.contains_key("chi"));
}

#[test]
fn fit_input_errors() {
    let d = tempfile::tempdir().unwrap();
    let empty = d.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let args = with(&[], &FIT_INIT);
    let out = run("fit", &args, &[empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty.csv:1:"));

    let bad = d.path().join("bad.csv");
    std::fs::write(&bad, "t_s,counts\n1e-9,4\n2e-9,four\n").unwrap();
    let out = run("fit", &args, &[bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3: column 'counts'"));

    let out = run("fit", &args, &[d.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

/// Excess counts late in the tail look like a slower decay: unmasked, the fit
/// pulls `χ` below the truth; masking the window restores it.
#[test]
fn masking_an_artifact_window() {
    let d = tempfile::tempdir().unwrap();
    let (t, mut c) = synthetic(80, 1e5, 13);
    let (lo, hi) = (t[40], t[47]);
    for (ti, ci) in t.iter().zip(c.iter_mut()) {
        if (lo..=hi).contains(ti) {
            *ci += 300.0;
        }
    }
    let data = d.path().join("artifact.csv");
    write_counts(&data, &t, &c);
    let path = data.to_str().unwrap();
    let plain = report(&ok(&run("fit", &with(&[], &FIT_INIT), &[path])));
    let mask = format!("mask={}:{}", lo * 0.999, hi * 1.001);
    let masked = report(&ok(&run("fit", &with(&with(&[], &FIT_INIT), &[&mask]), &[path])));
    assert_eq!(value(&masked, "n_bins_masked"), 8.0);
    let (chi_plain, chi_masked) = (value(&plain, "chi"), value(&masked, "chi"));
    assert!(chi_plain < CHI - 3.0 * value(&plain, "chi_stderr"), "unmasked {chi_plain}");
    assert!((chi_masked - CHI).abs() < 4.0 * value(&masked, "chi_stderr"), "masked {chi_masked}");
}
