//! Command-line pipeline over `oncodelay-core`: config loading, the
//! analyze / steady / simulate / hopf / sweep runs, and their artifacts.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use oncodelay_core::bifurcation::Bifurcation;
use oncodelay_core::char_spectrum::{hopf_crossing, linearize, rightmost_eigenvalues, SpectrumOptions};
use oncodelay_core::dde_sim::{detect_behavior, simulate, History, SimConfig, Verdict};
use oncodelay_core::steady_state::{self, SteadyStateResult};
use oncodelay_core::{Error, KernelSpec, Problem, Region};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use config::{HistorySpec, RunConfig, SweepParameter, Treatment};
use report::{line_chart, num, opt_num, write_file, write_json, Csv, Series};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(Error),
    #[error("{module}: {source}")]
    Module { module: &'static str, source: Error },
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    fn at(module: &'static str) -> impl FnOnce(Error) -> CliError {
        move |source| CliError::Module { module, source }
    }

    fn core_error(&self) -> Option<&Error> {
        match self {
            CliError::Core(e) | CliError::Module { source: e, .. } => Some(e),
            _ => None,
        }
    }

    /// 2 for bad input, 3 for numerical failure, 4 for blowup.
    pub fn exit_code(&self) -> i32 {
        match self.core_error() {
            None => 2,
            Some(Error::Blowup { .. }) => 4,
            Some(e) if e.is_input_error() || matches!(e, Error::InsufficientData { .. }) => 2,
            Some(_) => 3,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid_n: Option<usize>,
    pub seed_history: Option<f64>,
    pub svg: bool,
    pub jobs: Option<usize>,
    pub max_re: bool,
}

/// A validated config with its discretized problem.
pub struct Session {
    pub cfg: RunConfig,
    pub problem: Problem,
    pub bif: Bifurcation,
    pub treatment: Treatment,
    pub tau: f64,
    pub out: PathBuf,
    pub svg: bool,
    pub jobs: usize,
}

impl Session {
    pub fn new(mut cfg: RunConfig, ov: &Overrides) -> Result<Self, CliError> {
        if let Some(n) = ov.grid_n {
            cfg.grid.n = n;
        }
        if let Some(h) = ov.seed_history {
            cfg.simulation.history = HistorySpec::Constant(h);
        }
        if ov.max_re {
            if let Some(s) = cfg.sweep.as_mut() {
                s.spectrum = true;
            }
        }
        cfg.validate()?;
        let params = cfg.params()?;
        let problem = Problem::new(params, KernelSpec::SeparableSinSin, cfg.grid.n).map_err(CliError::at("discretization"))?;
        let bif = Bifurcation::new(&problem).map_err(CliError::at("spectral"))?;
        let out = ov
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        Ok(Self {
            treatment: cfg.treatment()?,
            tau: cfg.tau()?,
            svg: ov.svg || cfg.output.svg,
            jobs: ov.jobs.unwrap_or(1).max(1),
            cfg,
            problem,
            bif,
            out,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.cfg.grid.n
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            collocation_order: self.cfg.analysis.collocation_m,
            ..Default::default()
        }
    }

    fn steady(&self, beta: f64) -> Result<SteadyStateResult, CliError> {
        steady_state::solve_from_first_order(&self.problem, &self.bif, beta).map_err(CliError::at("steady_state"))
    }

    fn tag<T>(&self, module: &str, value: T) -> Tagged<T> {
        Tagged {
            value,
            module: module.to_string(),
            grid_n: self.grid_n(),
        }
    }
}

/// A value with the module and grid resolution that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub value: T,
    pub module: String,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub grid_n: usize,
    pub beta: Tagged<f64>,
    pub dose: Tagged<Option<f64>>,
    pub tau: Tagged<f64>,
    pub beta_star: Tagged<f64>,
    pub beta_second: Tagged<f64>,
    pub phi_star_sup: Tagged<f64>,
    pub phi_star_l2: Tagged<f64>,
    pub principal_residual: Tagged<f64>,
    pub theta1: Tagged<f64>,
    pub theta2: Tagged<f64>,
    pub theta3: Tagged<f64>,
    pub theta4: Tagged<f64>,
    pub kappa_beta: Tagged<f64>,
    pub kappa_star: Tagged<f64>,
    pub kappa_tilde_star: Tagged<f64>,
    pub region: Tagged<String>,
    pub stability_verdict: Tagged<String>,
    pub approx_peak: Tagged<Option<f64>>,
    pub newton_peak: Tagged<Option<f64>>,
    pub newton_residual: Tagged<Option<f64>>,
    pub newton_positive: Tagged<Option<bool>>,
    pub hopf_theta_angle: Tagged<Option<f64>>,
    pub hopf_l_star: Tagged<Option<f64>>,
    pub hopf_omega: Tagged<Option<f64>>,
    pub tau_k: Tagged<Vec<f64>>,
    pub tau_c: Tagged<Option<f64>>,
    pub omega_c: Tagged<Option<f64>>,
    pub crossing_slope_sign: Tagged<Option<i8>>,
    pub spectrum_abscissa: Tagged<Option<f64>>,
    pub spectrum_rightmost_im: Tagged<Option<f64>>,
    pub simulation_verdict: Tagged<Option<String>>,
    /// Steps that were skipped or failed without aborting the run.
    pub notes: Vec<String>,
}

fn verdict_for(region: Region) -> &'static str {
    match region {
        Region::StableAllDelays => "stable all tau",
        Region::UnstableAllDelays => "unstable all tau",
        Region::HopfBelowBetaStar | Region::HopfAboveBetaStar => "stable for tau < tau_0, Hopf at tau_k",
    }
}

/// Rows of `analysis.csv`: module, quantity, grid_n, value.
pub fn analysis_table(s: &AnalysisSummary) -> Csv {
    let mut csv = Csv::new(&["module", "quantity", "grid_n", "value"]);
    let mut row = |name: &str, module: &str, n: usize, v: String| {
        csv.row(&[module.to_string(), name.to_string(), n.to_string(), v]);
    };
    macro_rules! f {
        ($($field:ident),*) => {$( row(stringify!($field), &s.$field.module, s.$field.grid_n, num(s.$field.value)); )*};
    }
    macro_rules! o {
        ($($field:ident),*) => {$( row(stringify!($field), &s.$field.module, s.$field.grid_n, opt_num(s.$field.value)); )*};
    }
    f!(beta);
    o!(dose);
    f!(tau, beta_star, beta_second, phi_star_sup, phi_star_l2, principal_residual);
    f!(theta1, theta2, theta3, theta4, kappa_beta, kappa_star, kappa_tilde_star);
    row("region", &s.region.module, s.region.grid_n, s.region.value.clone());
    row("stability_verdict", &s.stability_verdict.module, s.grid_n, s.stability_verdict.value.clone());
    o!(approx_peak, newton_peak, newton_residual);
    row(
        "newton_positive",
        &s.newton_positive.module,
        s.grid_n,
        s.newton_positive.value.map_or("NaN".into(), |b| b.to_string()),
    );
    o!(hopf_theta_angle, hopf_l_star, hopf_omega);
    for (k, t) in s.tau_k.value.iter().enumerate() {
        row(&format!("tau_{k}"), &s.tau_k.module, s.tau_k.grid_n, num(*t));
    }
    o!(tau_c, omega_c);
    row(
        "crossing_slope_sign",
        &s.crossing_slope_sign.module,
        s.grid_n,
        s.crossing_slope_sign.value.map_or("NaN".into(), |v| v.to_string()),
    );
    o!(spectrum_abscissa, spectrum_rightmost_im);
    row(
        "simulation_verdict",
        &s.simulation_verdict.module,
        s.grid_n,
        s.simulation_verdict.value.clone().unwrap_or_else(|| "NaN".into()),
    );
    csv
}

/// spectral -> bifurcation -> steady_state -> char_spectrum.
pub fn analyze(sess: &Session) -> Result<AnalysisSummary, CliError> {
    let Treatment { beta, dose } = sess.treatment;
    let b = &sess.bif;
    let pair = &b.pair;
    let th = &b.thetas;
    let mut notes = Vec::new();
    let report = b.classify().map_err(CliError::at("bifurcation"))?;

    let quad = sess.problem.quadrature();
    let l2 = quad.integrate(&pair.phi_star.iter().map(|p| p * p).collect::<Vec<_>>()).sqrt();
    let sup = pair.phi_star.iter().fold(0.0, |m: f64, v| m.max(v.abs()));

    let approx = b.approx_steady_state(beta).map_err(CliError::at("bifurcation"))?;
    let steady = match sess.steady(beta) {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };

    let (mut angle, mut l_star, mut omega, mut tau_k) = (None, None, None, Vec::new());
    if report.region.is_hopf() {
        let hc = b.hopf_constants().map_err(CliError::at("bifurcation"))?;
        angle = Some(hc.theta_angle);
        l_star = Some(hc.l_star);
        omega = Some(oncodelay_core::bifurcation::hopf_frequency(beta, &hc, b.kappa_star(), b.beta_star()));
        match b.critical_delays(beta, sess.cfg.analysis.k_max) {
            Ok(t) => tau_k = t,
            Err(e) => notes.push(format!("bifurcation: {e}")),
        }
    }

    let opts = sess.spectrum_options();
    let (mut abscissa, mut rightmost_im) = (None, None);
    let (mut tau_c, mut omega_c, mut slope) = (None, None, None);
    if let Some(s) = &steady {
        let lp = linearize(&sess.problem, beta, &s.u);
        let spec = rightmost_eigenvalues(&lp, sess.tau, &opts).map_err(CliError::at("char_spectrum"))?;
        abscissa = Some(spec.max_real());
        rightmost_im = spec.rightmost().map(|z| z.im.abs());
        if report.region.is_hopf() {
            let lo = sess.cfg.analysis.tau_lo.unwrap_or(0.0);
            let hi = sess.cfg.analysis.tau_hi.unwrap_or(sess.tau);
            if hi > lo {
                let crossing_opts = SpectrumOptions { count: 4, ..opts };
                match hopf_crossing(&lp, lo, hi, 1e-7, &crossing_opts) {
                    Ok(h) => {
                        tau_c = Some(h.tau_c);
                        omega_c = Some(h.omega_c);
                        slope = Some(h.slope_sign);
                    }
                    Err(e) => notes.push(format!("char_spectrum: {e}")),
                }
            }
        }
    } else {
        notes.push("char_spectrum: skipped, no steady state".into());
    }

    Ok(AnalysisSummary {
        grid_n: sess.grid_n(),
        beta: sess.tag("model", beta),
        dose: sess.tag("model", Some(dose).filter(|d| d.is_finite())),
        tau: sess.tag("model", sess.tau),
        beta_star: sess.tag("spectral", pair.beta_star),
        beta_second: sess.tag("spectral", pair.beta_second),
        phi_star_sup: sess.tag("spectral", sup),
        phi_star_l2: sess.tag("spectral", l2),
        principal_residual: sess.tag("spectral", pair.residual),
        theta1: sess.tag("bifurcation", th.theta1),
        theta2: sess.tag("bifurcation", th.theta2),
        theta3: sess.tag("bifurcation", th.theta3),
        theta4: sess.tag("bifurcation", th.theta4),
        kappa_beta: sess.tag("bifurcation", b.kappa(beta)),
        kappa_star: sess.tag("bifurcation", report.kappa_star),
        kappa_tilde_star: sess.tag("bifurcation", report.kappa_tilde_star),
        region: sess.tag("bifurcation", report.region.numeral().to_string()),
        stability_verdict: sess.tag("bifurcation", verdict_for(report.region).to_string()),
        approx_peak: sess.tag("bifurcation", Some(approx.peak())),
        newton_peak: sess.tag("steady_state", steady.as_ref().map(signed_peak)),
        newton_residual: sess.tag("steady_state", steady.as_ref().map(|s| s.residual_norm)),
        newton_positive: sess.tag("steady_state", steady.as_ref().map(|s| s.positive)),
        hopf_theta_angle: sess.tag("bifurcation", angle),
        hopf_l_star: sess.tag("bifurcation", l_star),
        hopf_omega: sess.tag("bifurcation", omega),
        tau_k: sess.tag("bifurcation", tau_k),
        tau_c: sess.tag("char_spectrum", tau_c),
        omega_c: sess.tag("char_spectrum", omega_c),
        crossing_slope_sign: sess.tag("char_spectrum", slope),
        spectrum_abscissa: sess.tag("char_spectrum", abscissa),
        spectrum_rightmost_im: sess.tag("char_spectrum", rightmost_im),
        simulation_verdict: sess.tag("dde_sim", None),
        notes,
    })
}

/// Entry with the largest magnitude, sign kept.
fn signed_peak(s: &SteadyStateResult) -> f64 {
    s.u.iter().fold(0.0, |m: f64, v| if v.abs() > m.abs() { *v } else { m })
}

pub fn run_analyze(sess: &Session) -> Result<AnalysisSummary, CliError> {
    let s = analyze(sess)?;
    write_json(&sess.path("summary.json"), &s)?;
    analysis_table(&s).write(&sess.path("analysis.csv"))?;
    if sess.svg {
        if let Ok(st) = sess.steady(sess.treatment.beta) {
            write_profile_svg(sess, &st, "profile.svg")?;
        }
    }
    Ok(s)
}

fn write_profile_svg(sess: &Session, st: &SteadyStateResult, name: &str) -> Result<(), CliError> {
    let x = sess.problem.grid().nodes();
    let approx = sess
        .bif
        .approx_steady_state(sess.treatment.beta)
        .map_err(CliError::at("bifurcation"))?;
    let svg = line_chart(
        &format!("steady state, beta = {:.4}", sess.treatment.beta),
        "x",
        "u",
        &[
            Series { label: "Newton", x, y: &st.u },
            Series { label: "first order", x, y: &approx.field },
        ],
    );
    write_file(&sess.path(name), &svg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub grid_n: usize,
    pub beta: f64,
    pub dose: Option<f64>,
    pub peak: f64,
    pub approx_peak: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub positive: bool,
}

/// Newton steady state: steady.csv (x, u, u_first_order, phi_star) and steady.json.
pub fn run_steady(sess: &Session) -> Result<SteadyReport, CliError> {
    let beta = sess.treatment.beta;
    let st = sess.steady(beta)?;
    let approx = sess.bif.approx_steady_state(beta).map_err(CliError::at("bifurcation"))?;
    let mut csv = Csv::new(&["x", "u", "u_first_order", "phi_star"]);
    for (i, x) in sess.problem.grid().nodes().iter().enumerate() {
        csv.row(&[num(*x), num(st.u[i]), num(approx.field[i]), num(sess.bif.pair.phi_star[i])]);
    }
    csv.write(&sess.path("steady.csv"))?;
    let rep = SteadyReport {
        grid_n: sess.grid_n(),
        beta,
        dose: Some(sess.treatment.dose).filter(|d| d.is_finite()),
        peak: signed_peak(&st),
        approx_peak: approx.peak(),
        residual_norm: st.residual_norm,
        iterations: st.iterations,
        positive: st.positive,
    };
    write_json(&sess.path("steady.json"), &rep)?;
    if sess.svg {
        write_profile_svg(sess, &st, "profile.svg")?;
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub grid_n: usize,
    pub beta: f64,
    pub dose: Option<f64>,
    pub tau: f64,
    pub dt: Option<f64>,
    pub horizon: f64,
    /// `Converged`, `Periodic`, `Undetermined`, `Blowup` or `InsufficientData`.
    pub verdict: String,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub peaks: Option<usize>,
    pub tail_range: Option<f64>,
    pub tail_mean: Option<f64>,
    pub probe_x: Option<f64>,
    pub min_value: Option<f64>,
    pub blowup_time: Option<f64>,
    pub warnings: Vec<String>,
}

/// Simulation: trace_probe.csv, snapshots.csv (unless stride is 0) and behavior.json.
pub fn run_simulate(sess: &Session) -> Result<BehaviorReport, CliError> {
    let beta = sess.treatment.beta;
    let sim = &sess.cfg.simulation;
    let history = match &sim.history {
        HistorySpec::Constant(c) => History::Constant(*c),
        HistorySpec::Named(_) => History::Profile(sess.steady(beta)?.u),
    };
    let cfg = SimConfig {
        beta,
        tau: sess.tau,
        horizon: sim.horizon,
        dt: sim.dt,
        stride: sim.stride,
    };
    let mut rep = BehaviorReport {
        grid_n: sess.grid_n(),
        beta,
        dose: Some(sess.treatment.dose).filter(|d| d.is_finite()),
        tau: sess.tau,
        dt: None,
        horizon: sim.horizon,
        verdict: String::new(),
        amplitude: None,
        period: None,
        peaks: None,
        tail_range: None,
        tail_mean: None,
        probe_x: None,
        min_value: None,
        blowup_time: None,
        warnings: Vec::new(),
    };
    let trace = match simulate(&sess.problem, &cfg, &history) {
        Ok(t) => t,
        Err(Error::Blowup { time }) => {
            rep.verdict = "Blowup".into();
            rep.blowup_time = Some(time);
            write_json(&sess.path("behavior.json"), &rep)?;
            return Err(CliError::Module {
                module: "dde_sim",
                source: Error::Blowup { time },
            });
        }
        Err(e) => return Err(CliError::Module { module: "dde_sim", source: e }),
    };
    rep.dt = Some(trace.dt);
    rep.probe_x = Some(trace.probe_x);
    rep.min_value = Some(trace.min_value);
    rep.warnings = trace.warnings.clone();

    let mut probe = Csv::new(&["t", "u_probe"]);
    for (t, u) in trace.times.iter().zip(&trace.probe) {
        probe.row(&[num(*t), num(*u)]);
    }
    probe.write(&sess.path("trace_probe.csv"))?;
    if sim.stride > 0 {
        let mut snaps = Csv::new(&["t", "x", "u"]);
        for (t, field) in trace.snapshot_times.iter().zip(&trace.snapshots) {
            for (x, u) in trace.nodes.iter().zip(field) {
                snaps.row(&[num(*t), num(*x), num(*u)]);
            }
        }
        snaps.write(&sess.path("snapshots.csv"))?;
    } else {
        // a stale file from an earlier run would contradict this one
        let _ = std::fs::remove_file(sess.path("snapshots.csv"));
    }

    let outcome = detect_behavior(&trace, sim.tail_fraction);
    match &outcome {
        Ok(b) => {
            rep.verdict = b.verdict.name().into();
            rep.peaks = Some(b.peaks);
            rep.tail_range = Some(b.tail_range);
            rep.tail_mean = Some(b.tail_mean);
            if let Verdict::Periodic { amplitude, period } = b.verdict {
                rep.amplitude = Some(amplitude);
                rep.period = Some(period);
            }
        }
        Err(_) => rep.verdict = "InsufficientData".into(),
    }
    write_json(&sess.path("behavior.json"), &rep)?;

    if sess.svg {
        let svg = line_chart(
            &format!("u(pi/2, t), tau = {}", sess.tau),
            "t",
            "u",
            &[Series { label: "probe", x: &trace.times, y: &trace.probe }],
        );
        write_file(&sess.path("probe.svg"), &svg)?;
        let mut series = vec![Series { label: "final", x: &trace.nodes, y: &trace.final_field }];
        let steady = sess.steady(beta).ok();
        if let Some(s) = &steady {
            series.push(Series { label: "steady", x: &trace.nodes, y: &s.u });
        }
        write_file(&sess.path("final_profile.svg"), &line_chart("final profile", "x", "u", &series))?;
    }
    outcome.map_err(CliError::at("dde_sim"))?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub grid_n: usize,
    pub beta: f64,
    pub region: String,
    pub kappa_star: f64,
    pub kappa_tilde_star: f64,
    pub applicable: bool,
    pub theta_angle: Option<f64>,
    pub l_star: Option<f64>,
    pub omega: Option<f64>,
    pub tau_k: Vec<f64>,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub tau_c: Option<f64>,
    pub omega_c: Option<f64>,
    pub slope_sign: Option<i8>,
    pub max_real_at_crossing: Option<f64>,
    pub notes: Vec<String>,
}

/// Leading-order critical delays and the numerical crossing: hopf.json, tau_k.csv.
pub fn run_hopf(sess: &Session) -> Result<HopfReport, CliError> {
    let s = analyze(sess)?;
    let lo = sess.cfg.analysis.tau_lo.unwrap_or(0.0);
    let hi = sess.cfg.analysis.tau_hi.unwrap_or(sess.tau);
    let mut max_real = None;
    if let Some(tc) = s.tau_c.value {
        let st = sess.steady(sess.treatment.beta)?;
        let lp = linearize(&sess.problem, sess.treatment.beta, &st.u);
        let opts = SpectrumOptions { count: 4, ..sess.spectrum_options() };
        max_real = Some(
            rightmost_eigenvalues(&lp, tc, &opts)
                .map_err(CliError::at("char_spectrum"))?
                .max_real(),
        );
    }
    let rep = HopfReport {
        grid_n: sess.grid_n(),
        beta: sess.treatment.beta,
        region: s.region.value.clone(),
        kappa_star: s.kappa_star.value,
        kappa_tilde_star: s.kappa_tilde_star.value,
        applicable: s.hopf_theta_angle.value.is_some(),
        theta_angle: s.hopf_theta_angle.value,
        l_star: s.hopf_l_star.value,
        omega: s.hopf_omega.value,
        tau_k: s.tau_k.value.clone(),
        tau_lo: lo,
        tau_hi: hi,
        tau_c: s.tau_c.value,
        omega_c: s.omega_c.value,
        slope_sign: s.crossing_slope_sign.value,
        max_real_at_crossing: max_real,
        notes: s.notes.clone(),
    };
    write_json(&sess.path("hopf.json"), &rep)?;
    let mut csv = Csv::new(&["k", "tau_k"]);
    for (k, t) in rep.tau_k.iter().enumerate() {
        csv.row(&[k.to_string(), num(*t)]);
    }
    csv.write(&sess.path("tau_k.csv"))?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub dose: f64,
    pub tau: f64,
    pub kappa: f64,
    pub region: &'static str,
    /// Signed extremum of the first-order state.
    pub approx_peak: f64,
    /// Signed extremum of the Newton state, NaN if Newton failed.
    pub peak: f64,
    pub max_re_lambda: Option<f64>,
}

fn sweep_point(sess: &Session, param: SweepParameter, value: f64, spectrum: bool) -> Result<SweepRow, CliError> {
    let p = sess.problem.params();
    let (beta, dose, tau) = match param {
        SweepParameter::Dose => (p.dose_to_beta(value).map_err(CliError::at("model"))?, value, sess.tau),
        SweepParameter::Beta => (value, p.beta_to_dose(value).unwrap_or(f64::NAN), sess.tau),
        SweepParameter::Tau => (sess.treatment.beta, sess.treatment.dose, value),
    };
    let region = sess.bif.classify().map_err(CliError::at("bifurcation"))?.region;
    let steady = sess.steady(beta).ok();
    let max_re_lambda = match (&steady, spectrum) {
        (Some(s), true) => {
            let lp = linearize(&sess.problem, beta, &s.u);
            Some(
                rightmost_eigenvalues(&lp, tau, &sess.spectrum_options())
                    .map_err(CliError::at("char_spectrum"))?
                    .max_real(),
            )
        }
        (None, true) => Some(f64::NAN),
        _ => None,
    };
    Ok(SweepRow {
        beta,
        dose,
        tau,
        kappa: sess.bif.kappa(beta),
        region: region.numeral(),
        approx_peak: sess.bif.approx_steady_state(beta).map_err(CliError::at("bifurcation"))?.peak(),
        peak: steady.as_ref().map_or(f64::NAN, signed_peak),
        max_re_lambda,
    })
}

pub fn sweep_table(rows: &[SweepRow], spectrum: bool) -> Csv {
    let mut header = vec!["beta", "dose", "tau", "kappa", "region", "approx_peak", "peak"];
    if spectrum {
        header.push("max_re_lambda");
    }
    let mut csv = Csv::new(&header);
    for r in rows {
        let mut cells = vec![num(r.beta), num(r.dose), num(r.tau), num(r.kappa), r.region.to_string(), num(r.approx_peak), num(r.peak)];
        if spectrum {
            cells.push(opt_num(r.max_re_lambda));
        }
        csv.row(&cells);
    }
    csv
}

/// One row per sweep point in parameter order; points run on `--jobs` threads.
pub fn run_sweep(sess: &Session) -> Result<Vec<SweepRow>, CliError> {
    let sw = sess.cfg.validate_sweep()?.clone();
    let points = sw.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sess.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|v| sweep_point(sess, sw.parameter, *v, sw.spectrum))
            .collect::<Result<_, _>>()
    })?;
    sweep_table(&rows, sw.spectrum).write(&sess.path("sweep.csv"))?;
    if sess.svg {
        let xs: Vec<f64> = points.clone();
        let peaks: Vec<f64> = rows.iter().map(|r| r.peak).collect();
        let kappas: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
        let name = sw.parameter.name();
        write_file(
            &sess.path("sweep_peak.svg"),
            &line_chart("steady-state peak", name, "peak", &[Series { label: "peak", x: &xs, y: &peaks }]),
        )?;
        write_file(
            &sess.path("sweep_kappa.svg"),
            &line_chart("kappa(beta)", name, "kappa", &[Series { label: "kappa", x: &xs, y: &kappas }]),
        )?;
    }
    Ok(rows)
}

/// Loads the config, applies overrides and builds the session.
pub fn open(config: &Path, ov: &Overrides) -> Result<Session, CliError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    Session::new(cfg, ov)
}

