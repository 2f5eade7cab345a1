use std::fs;
use std::path::Path;
use std::process::Command;

use oncodelay::{config::RunConfig, open, run_analyze, run_simulate, run_sweep, AnalysisSummary, Overrides};

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn overrides(out: &Path) -> Overrides {
    Overrides {
        out: Some(out.to_path_buf()),
        ..Default::default()
    }
}

const OSC: &str = "model.preset = \"oscillatory\"\ngrid.n = 49\nanalysis.dose = 0.4\nsimulation.tau = 1.75\nsimulation.horizon = 60.0\nsimulation.stride = 200\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oncodelay"))
}

#[test]
fn analyze_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OSC);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_analyze(&open(&cfg, &overrides(&a)).unwrap()).unwrap();
    run_analyze(&open(&cfg, &overrides(&b)).unwrap()).unwrap();
    for f in ["summary.json", "analysis.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("analysis.csv")).unwrap();
    assert!(!csv.contains('\r'));
    assert!(csv.starts_with("module,quantity,grid_n,value\n"));
}

#[test]
fn summary_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OSC);
    let s = run_analyze(&open(&cfg, &overrides(dir.path())).unwrap()).unwrap();
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let back: AnalysisSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    assert_eq!(s.region.value, "II");
    assert!(!s.tau_k.value.is_empty());
    assert_eq!(s.kappa_beta.module, "bifurcation");
    assert_eq!(s.newton_peak.grid_n, 49);
}

#[test]
fn stable_set_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.preset = \"stable\"\ngrid.n = 99\nanalysis.dose = 0.5\nsimulation.tau = 0.1\n",
    );
    let s = run_analyze(&open(&cfg, &overrides(dir.path())).unwrap()).unwrap();
    assert_eq!(s.region.value, "I");
    assert_eq!(s.stability_verdict.value, "stable all tau");
    assert!((s.kappa_beta.value + 0.46).abs() < 2e-3);
    assert!(s.spectrum_abscissa.value.unwrap() < 0.0);
    assert!(s.tau_k.value.is_empty());
}

#[test]
fn stride_zero_omits_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let text = OSC.replace("simulation.stride = 200", "simulation.stride = 0");
    let cfg = write_config(dir.path(), &text);
    fs::write(dir.path().join("snapshots.csv"), "stale").unwrap();
    run_simulate(&open(&cfg, &overrides(dir.path())).unwrap()).unwrap();
    assert!(!dir.path().join("snapshots.csv").exists());
    let probe = fs::read_to_string(dir.path().join("trace_probe.csv")).unwrap();
    assert!(probe.starts_with("t,u_probe\n"));
    assert_eq!(probe.lines().count(), 1 + 6000 + 1);
}

#[test]
fn snapshots_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OSC);
    let r = run_simulate(&open(&cfg, &overrides(dir.path())).unwrap()).unwrap();
    let snaps = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    // 6000 steps, every 200th plus the initial state, 49 nodes each
    assert_eq!(snaps.lines().count(), 1 + 31 * 49);
    assert!(snaps.starts_with("t,x,u\n"));
    let json = fs::read_to_string(dir.path().join("behavior.json")).unwrap();
    assert!(json.contains(&format!("\"verdict\": \"{}\"", r.verdict)));
}

#[test]
fn single_step_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.preset = \"stable\"\ngrid.n = 49\nanalysis.dose = 0.5\nsweep.parameter = \"dose\"\nsweep.lo = 0.5\nsweep.hi = 1.0\nsweep.steps = 1\n",
    );
    let rows = run_sweep(&open(&cfg, &overrides(dir.path())).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn dose_sweep_kappa_is_affine_and_negative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.preset = \"stable\"\ngrid.n = 49\nanalysis.dose = 0.5\nsweep.parameter = \"dose\"\nsweep.lo = 0.0\nsweep.hi = 1.013\nsweep.steps = 11\n",
    );
    let rows = run_sweep(&open(&cfg, &overrides(dir.path())).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.kappa < 0.0));
    let slope = (rows[10].kappa - rows[0].kappa) / (rows[10].beta - rows[0].beta);
    for r in &rows {
        let affine = rows[0].kappa + slope * (r.beta - rows[0].beta);
        assert!((r.kappa - affine).abs() < 1e-12);
    }
    assert!(rows.windows(2).all(|w| w[1].dose > w[0].dose));
}

#[test]
fn beta_sweep_first_order_peak_changes_sign_at_beta_star() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.preset = \"stable\"\ngrid.n = 49\nanalysis.beta = 0.2\nsweep.parameter = \"beta\"\nsweep.lo = 0.3\nsweep.hi = 0.5\nsweep.steps = 21\n",
    );
    let sess = open(&cfg, &Overrides { jobs: Some(3), ..overrides(dir.path()) }).unwrap();
    let rows = run_sweep(&sess).unwrap();
    let step = 0.01;
    let flip = rows
        .windows(2)
        .position(|w| w[0].approx_peak > 0.0 && w[1].approx_peak < 0.0)
        .expect("sign change");
    let at = 0.5 * (rows[flip].beta + rows[flip + 1].beta);
    assert!((at - 0.4).abs() <= step, "{at}");
    assert!(rows[..=flip].iter().all(|r| r.peak > 0.0));
}

#[test]
fn parallel_sweep_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.preset = \"stable\"\ngrid.n = 49\nanalysis.dose = 0.5\nsweep.parameter = \"tau\"\nsweep.lo = 0.0\nsweep.hi = 10.0\nsweep.steps = 5\nsweep.spectrum = true\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_sweep(&open(&cfg, &overrides(&a)).unwrap()).unwrap();
    run_sweep(&open(&cfg, &Overrides { jobs: Some(4), ..overrides(&b) }).unwrap()).unwrap();
    let sa = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(sa, fs::read_to_string(b.join("sweep.csv")).unwrap());
    assert!(sa.lines().next().unwrap().ends_with(",max_re_lambda"));
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.preset = \"stable\"\nanalysis.beta = 1.2\nanalysis.dose = 0.5\n");
    assert!(RunConfig::parse(&fs::read_to_string(&cfg).unwrap()).is_err());
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn blowup_exits_with_4_and_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.preset = \"oscillatory\"\ngrid.n = 20\nanalysis.beta = 0.0\nsimulation.tau = 0.0\nsimulation.dt = 5.0\nsimulation.horizon = 1000.0\n",
    );
    let out = bin()
        .args(["simulate", "--seed-history", "3.0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read_to_string(dir.path().join("behavior.json")).unwrap();
    assert!(json.contains("\"verdict\": \"Blowup\""));
}

#[test]
fn binary_runs_analyze_with_grid_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OSC);
    let out = bin()
        .args(["analyze", "--grid-n", "39", "--svg", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s: AnalysisSummary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.grid_n, 39);
    assert!(dir.path().join("profile.svg").exists());
}
