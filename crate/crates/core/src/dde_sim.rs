//! Method-of-lines integration of the nonlocal delay equation
//! `u_t = d Lap u + F(u, K u(t - tau)) u - (beta q(u) + r) u`
//! and classification of the long-time behavior.
//!
//! Diffusion is Crank-Nicolson, the reaction and delayed nonlocal terms are
//! second-order Adams-Bashforth (explicit Euler on the first step).

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::problem::Problem;

pub const DEFAULT_HISTORY: f64 = 0.1;
pub const DEFAULT_HORIZON: f64 = 300.0;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
const MAX_STEPS: usize = 100_000_000;

/// Initial data on `[-tau, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(f64),
    /// One value per grid node, constant in time.
    Profile(Vec<f64>),
    /// `(x, theta) -> u`, sampled at the step times `theta = -k dt`.
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            History::Profile(p) => f.debug_tuple("Profile").field(p).finish(),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Default for History {
    fn default() -> Self {
        History::Constant(DEFAULT_HISTORY)
    }
}

impl History {
    fn sample(&self, nodes: &[f64], theta: f64) -> Vec<f64> {
        match self {
            History::Constant(c) => vec![*c; nodes.len()],
            History::Profile(p) => p.clone(),
            History::Function(f) => nodes.iter().map(|x| f(*x, theta)).collect(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            History::Constant(c) if !c.is_finite() => Err(Error::config("history value must be finite")),
            History::Profile(p) if p.len() != n => Err(Error::config(format!(
                "history profile has {} values, grid has {n}",
                p.len()
            ))),
            History::Profile(p) if p.iter().any(|v| !v.is_finite()) => {
                Err(Error::config("history profile must be finite"))
            }
            _ => Ok(()),
        }
    }

    fn sup(&self, nodes: &[f64]) -> f64 {
        self.sample(nodes, 0.0).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub beta: f64,
    pub tau: f64,
    pub horizon: f64,
    /// Requested step; `None` means `min(tau / 64, 0.01)`. Snapped so that
    /// `tau` is a whole number of steps.
    pub dt: Option<f64>,
    /// Snapshot every `stride` steps; 0 disables snapshots.
    pub stride: usize,
}

impl SimConfig {
    pub fn new(beta: f64, tau: f64, horizon: f64) -> Self {
        Self {
            beta,
            tau,
            horizon,
            dt: None,
            stride: 100,
        }
    }

    /// Step actually used and the delay in steps.
    pub fn resolved_step(&self) -> Result<(f64, usize)> {
        let dt = self.dt.unwrap_or_else(|| {
            if self.tau > 0.0 {
                (self.tau / 64.0).min(0.01)
            } else {
                0.01
            }
        });
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("dt must be positive and finite, got {dt}")));
        }
        if self.tau == 0.0 {
            return Ok((dt, 0));
        }
        let lag = ((self.tau / dt).round() as usize).max(1);
        Ok((self.tau / lag as f64, lag))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    /// `u` at the node nearest `pi / 2`, one value per step.
    pub probe: Vec<f64>,
    pub probe_x: f64,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub final_field: Vec<f64>,
    pub nodes: Vec<f64>,
    pub dt: f64,
    pub tau: f64,
    pub beta: f64,
    pub stride: usize,
    /// Smallest value seen anywhere in the run.
    pub min_value: f64,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Rough bound on the reaction Jacobian for the explicit-step warning.
fn reaction_rate_bound(problem: &Problem, beta: f64, scale: f64) -> f64 {
    let p = problem.params();
    let r = problem.efficacy().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let u = scale.max(1.0);
    1.0 + beta + r
        + (p.a1.abs() + 2.0 * p.a2.abs() * u + p.britton_constant().abs() * FRAC_PI_2) * u
        + beta * u / p.u_max
}

pub fn simulate(problem: &Problem, cfg: &SimConfig, history: &History) -> Result<Trace> {
    let n = problem.len();
    if !(cfg.tau >= 0.0) || !cfg.tau.is_finite() {
        return Err(Error::config("tau must be finite and >= 0"));
    }
    if !(cfg.beta >= 0.0) || !cfg.beta.is_finite() {
        return Err(Error::config("beta must be finite and >= 0"));
    }
    let min_horizon = 10.0 * cfg.tau.max(1.0);
    if !(cfg.horizon >= min_horizon) || !cfg.horizon.is_finite() {
        return Err(Error::config(format!(
            "horizon must be >= 10 max(tau, 1) = {min_horizon}, got {}",
            cfg.horizon
        )));
    }
    history.validate(n)?;
    let (dt, lag) = cfg.resolved_step()?;
    let steps = (cfg.horizon / dt).round() as usize;
    if steps == 0 || steps > MAX_STEPS {
        return Err(Error::config(format!("{steps} time steps is outside [1, {MAX_STEPS}]")));
    }

    let params = *problem.params();
    let nodes = problem.grid().nodes().to_vec();
    let kernel = problem.kernel();
    let r = problem.efficacy();
    let beta = cfg.beta;
    let probe_idx = problem.grid().nearest(FRAC_PI_2);

    let mut warnings = Vec::new();
    let rate = reaction_rate_bound(problem, beta, history.sup(&nodes));
    if dt * rate > 1.0 {
        warnings.push(format!(
            "dt = {dt} exceeds the explicit reaction stability estimate {:.3e}",
            1.0 / rate
        ));
    }

    let lap = problem.laplacian();
    let implicit = lap.factor_combination(1.0, -0.5 * dt, &vec![0.0; n])?;

    // K u at past steps; front is the oldest, only what the lag needs is kept
    let mut delayed: VecDeque<Vec<f64>> = VecDeque::with_capacity(lag + 1);
    let history_ku = |k: usize| kernel.apply(&history.sample(&nodes, -(k as f64) * dt));

    let mut u = history.sample(&nodes, 0.0);
    let reaction = |u: &[f64], v: &[f64], out: &mut [f64]| {
        for i in 0..u.len() {
            out[i] = params.proliferation(u[i], v[i]) * u[i]
                - (beta * params.therapy_response(u[i]) + r[i]) * u[i];
        }
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut probe = Vec::with_capacity(steps + 1);
    let mut snapshot_times = Vec::new();
    let mut snapshots = Vec::new();
    let mut min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
    times.push(0.0);
    probe.push(u[probe_idx]);
    if cfg.stride > 0 {
        snapshot_times.push(0.0);
        snapshots.push(u.clone());
    }

    let mut n_prev: Option<Vec<f64>> = None;
    let mut n_cur = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut lu_buf = vec![0.0; n];

    for step in 0..steps {
        let ku = kernel.apply(&u);
        delayed.push_back(ku);
        // v = K u(t_step - tau)
        let v = if step >= lag {
            delayed.pop_front().unwrap_or_default()
        } else {
            history_ku(lag - step)
        };

        reaction(&u, &v, &mut n_cur);
        lap.apply_into(&u, &mut lu_buf);
        for i in 0..n {
            let explicit = match &n_prev {
                Some(prev) => 1.5 * n_cur[i] - 0.5 * prev[i],
                None => n_cur[i],
            };
            rhs[i] = u[i] + 0.5 * dt * lu_buf[i] + dt * explicit;
        }
        implicit.solve_in_place(&mut rhs);
        core::mem::swap(&mut u, &mut rhs);
        match &mut n_prev {
            Some(prev) => prev.copy_from_slice(&n_cur),
            None => n_prev = Some(n_cur.clone()),
        }

        let t = (step + 1) as f64 * dt;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { time: t });
        }
        min_value = u.iter().copied().fold(min_value, f64::min);
        times.push(t);
        probe.push(u[probe_idx]);
        if cfg.stride > 0 && (step + 1) % cfg.stride == 0 {
            snapshot_times.push(t);
            snapshots.push(u.clone());
        }
    }

    Ok(Trace {
        times,
        probe,
        probe_x: nodes[probe_idx],
        snapshot_times,
        snapshots,
        final_field: u,
        nodes,
        dt,
        tau: cfg.tau,
        beta,
        stride: cfg.stride,
        min_value,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Converged { final_field: Vec<f64> },
    /// Mean peak height and mean peak spacing of the probe series.
    Periodic { amplitude: f64, period: f64 },
    Undetermined,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Converged { .. } => "Converged",
            Verdict::Periodic { .. } => "Periodic",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorSummary {
    pub verdict: Verdict,
    pub tail_start: f64,
    pub tail_end: f64,
    pub peaks: usize,
    /// `max - min` of the probe over the tail.
    pub tail_range: f64,
    pub tail_mean: f64,
}

const CONVERGED_TOL: f64 = 1e-5;
const DISPERSION_TOL: f64 = 0.05;
const MIN_PEAKS: usize = 4;

fn dispersion(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().fold(0.0, |m: f64, v| m.max((v - mean).abs())) / mean.abs()
}

/// Classifies the last `tail_fraction` of the probe series.
pub fn detect_behavior(trace: &Trace, tail_fraction: f64) -> Result<BehaviorSummary> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::config("tail fraction must lie in (0, 1]"));
    }
    let len = trace.probe.len();
    let start = ((1.0 - tail_fraction) * (len - 1) as f64).floor() as usize;
    let tail = &trace.probe[start..];
    let tail_start = trace.times[start];
    let tail_end = trace.times[len - 1];
    let needed = 8.0 * trace.tau;
    if tail_end - tail_start < needed || tail.len() < 3 {
        return Err(Error::InsufficientData {
            needed,
            available: tail_end - tail_start,
        });
    }

    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let range = hi - lo;

    let peak_idx: Vec<usize> = (1..tail.len() - 1)
        .filter(|&i| tail[i] > tail[i - 1] && tail[i] >= tail[i + 1] && tail[i] > mean)
        .collect();

    let verdict = if range < CONVERGED_TOL * (1.0 + mean.abs()) {
        Verdict::Converged {
            final_field: trace.final_field.clone(),
        }
    } else if peak_idx.len() >= MIN_PEAKS {
        let heights: Vec<f64> = peak_idx.iter().map(|&i| tail[i]).collect();
        let spacings: Vec<f64> = peak_idx
            .windows(2)
            .map(|w| trace.times[start + w[1]] - trace.times[start + w[0]])
            .collect();
        if dispersion(&heights) <= DISPERSION_TOL && dispersion(&spacings) <= DISPERSION_TOL {
            Verdict::Periodic {
                amplitude: heights.iter().sum::<f64>() / heights.len() as f64,
                period: spacings.iter().sum::<f64>() / spacings.len() as f64,
            }
        } else {
            Verdict::Undetermined
        }
    } else {
        Verdict::Undetermined
    };

    Ok(BehaviorSummary {
        verdict,
        tail_start,
        tail_end,
        peaks: peak_idx.len(),
        tail_range: range,
        tail_mean: mean,
    })
}
