//! Discrete steady states `G(u) = Lu + F(u, Ku) u - (beta q(u) + r) u = 0`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::bifurcation::Bifurcation;
use crate::error::{Error, Result};
use crate::linalg::sup_norm;
use crate::problem::Problem;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub positive: bool,
}

impl SteadyStateResult {
    pub fn peak(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `G(u)`.
pub fn residual(problem: &Problem, beta: f64, u: &[f64]) -> Vec<f64> {
    let p = problem.params();
    let lu = problem.laplacian().apply(u);
    let ku = problem.kernel().apply(u);
    lu.iter()
        .zip(u)
        .zip(&ku)
        .zip(problem.efficacy())
        .map(|(((l, ui), v), r)| {
            l + p.proliferation(*ui, *v) * ui - (beta * p.therapy_response(*ui) + r) * ui
        })
        .collect()
}

/// Diagonal of the local (undelayed) part of the linearization at `u`:
/// `F(u, Ku) + u A - beta q(u) - beta q'(u) u - r`.
pub fn reaction_diagonal(problem: &Problem, beta: f64, u: &[f64], ku: &[f64]) -> Vec<f64> {
    let p = problem.params();
    let qp = p.therapy_slope();
    u.iter()
        .zip(ku)
        .zip(problem.efficacy())
        .map(|((ui, v), r)| {
            let (a, _) = p.proliferation_partials(*ui);
            p.proliferation(*ui, *v) + ui * a - beta * p.therapy_response(*ui) - beta * qp * ui - r
        })
        .collect()
}

/// Row weights `u B` of the nonlocal part `diag(u B) K`.
pub fn nonlocal_weights(problem: &Problem, u: &[f64]) -> Vec<f64> {
    let p = problem.params();
    u.iter().map(|ui| ui * p.proliferation_partials(*ui).1).collect()
}

/// Dense local part `L + diag(reaction_diagonal)`.
pub fn local_jacobian(problem: &Problem, beta: f64, u: &[f64]) -> DMatrix<f64> {
    let ku = problem.kernel().apply(u);
    let mut j = problem.laplacian().to_dense();
    for (i, c) in reaction_diagonal(problem, beta, u, &ku).into_iter().enumerate() {
        j[(i, i)] += c;
    }
    j
}

/// Dense nonlocal part `diag(u B) K`.
pub fn nonlocal_jacobian(problem: &Problem, u: &[f64]) -> DMatrix<f64> {
    let w = nonlocal_weights(problem, u);
    let mut m = problem.kernel().matrix().clone();
    for (i, wi) in w.iter().enumerate() {
        m.row_mut(i).scale_mut(*wi);
    }
    m
}

/// `dG/du` at `u`.
pub fn jacobian(problem: &Problem, beta: f64, u: &[f64]) -> DMatrix<f64> {
    local_jacobian(problem, beta, u) + nonlocal_jacobian(problem, u)
}

/// Damped Newton from `u0`: full steps are halved until the residual drops.
pub fn newton_solve(
    problem: &Problem,
    beta: f64,
    u0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SteadyStateResult> {
    if u0.len() != problem.len() {
        return Err(Error::config("seed length does not match the grid"));
    }
    let mut u = u0.to_vec();
    let mut g = residual(problem, beta, &u);
    let mut norm = sup_norm(&g);
    let mut iterations = 0;

    while !(norm <= tol) {
        if iterations >= max_iter || !norm.is_finite() {
            return Err(Error::NonConvergence {
                what: "steady-state Newton",
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let lu = jacobian(problem, beta, &u).lu();
        let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
        let step = lu
            .solve(&rhs)
            .ok_or(Error::SingularMatrix("steady-state Jacobian"))?;

        let mut lambda = 1.0;
        let mut trial: Vec<f64>;
        let mut trial_g: Vec<f64>;
        let mut trial_norm: f64;
        let mut halvings = 0;
        loop {
            trial = u.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            trial_g = residual(problem, beta, &trial);
            trial_norm = sup_norm(&trial_g);
            if trial_norm < norm || halvings >= MAX_HALVINGS {
                break;
            }
            lambda *= 0.5;
            halvings += 1;
        }
        if !(trial_norm < norm) && !(trial_norm <= tol) {
            return Err(Error::NonConvergence {
                what: "steady-state Newton line search",
                iterations,
                residual: norm,
            });
        }
        u = trial;
        g = trial_g;
        norm = trial_norm;
    }

    let positive = u.iter().all(|v| *v > -1e-12);
    Ok(SteadyStateResult {
        u,
        residual_norm: norm,
        iterations,
        positive,
    })
}

/// Newton seeded with the first-order approximation at `beta`.
pub fn solve_from_first_order(
    problem: &Problem,
    bif: &Bifurcation,
    beta: f64,
) -> Result<SteadyStateResult> {
    let seed = bif.approx_steady_state(beta)?;
    newton_solve(problem, beta, &seed.field, DEFAULT_TOL, DEFAULT_MAX_ITER)
}
