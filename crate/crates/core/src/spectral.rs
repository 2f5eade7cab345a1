//! Principal eigenpair of the linearization at the trivial state,
//! `d Lap phi + (F(0,0) - r) phi = beta phi` with the mesh boundary condition.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::discretization::LaplacianOp;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sup_norm, TridiagonalLu};
use crate::problem::Problem;

const INVERSE_ITER_MAX: usize = 2000;
const RAYLEIGH_ITER_MAX: usize = 20;
// Refinement aims below RESIDUAL_TARGET; on fine meshes roundoff in the
// stencil (|L| ~ d / h^2) puts a floor above it, so only RESIDUAL_TOL fails.
const RESIDUAL_TARGET: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

/// Principal eigenvalue `beta*` with its positive, sup-normalized eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPair {
    pub beta_star: f64,
    pub phi_star: Vec<f64>,
    /// Second eigenvalue, reported for the spectral gap only.
    pub beta_second: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl PrincipalPair {
    pub fn spectral_gap(&self) -> f64 {
        self.beta_star - self.beta_second
    }

    /// Same pair with `phi*` multiplied by `c`; used to check that derived
    /// quantities do not depend on the eigenvector normalization.
    pub fn rescaled(&self, c: f64) -> Self {
        Self {
            phi_star: self.phi_star.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }
}

/// Symmetric tridiagonal form `diag(s) T diag(s)^-1` of the operator.
struct SymTri {
    diag: Vec<f64>,
    off: Vec<f64>,
    scale: Vec<f64>,
}

impl SymTri {
    fn new(lap: &LaplacianOp, f00: f64, r: &[f64]) -> Self {
        let diag = lap.diag().iter().zip(r).map(|(l, ri)| l + f00 - ri).collect();
        let off = lap
            .lower()
            .iter()
            .zip(lap.upper())
            .map(|(a, b)| (a * b).sqrt())
            .collect();
        Self {
            diag,
            off,
            scale: lap.symmetrizer(),
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    fn factor_shifted(&self, sigma: f64) -> Result<TridiagonalLu> {
        let d: Vec<f64> = self.diag.iter().map(|x| x - sigma).collect();
        TridiagonalLu::factor(&self.off, &d, &self.off)
    }

    /// Upper Gershgorin bound on the spectrum.
    fn upper_bound(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut r = self.diag[i];
                if i > 0 {
                    r += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    r += self.off[i].abs();
                }
                r
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn rayleigh(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply(v)) / dot(v, v)
    }

    fn residual(&self, v: &[f64], mu: f64) -> f64 {
        let tv = self.apply(v);
        sup_norm(&tv.iter().zip(v).map(|(a, b)| a - mu * b).collect::<Vec<_>>()) / sup_norm(v)
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    v.iter_mut().for_each(|x| *x /= n);
}

fn deflate(v: &mut [f64], against: &[f64]) {
    let c = dot(v, against);
    v.iter_mut().zip(against).for_each(|(x, a)| *x -= c * a);
}

/// Shifted inverse iteration from above the spectrum, optionally deflating a
/// known unit eigenvector, then Rayleigh-quotient refinement.
fn top_eigenpair(op: &SymTri, deflated: Option<&[f64]>) -> Result<(f64, Vec<f64>, usize)> {
    let n = op.diag.len();
    let bound = op.upper_bound();
    let sigma = bound + 1e-2 * (1.0 + bound.abs());
    let lu = op.factor_shifted(sigma)?;

    // smooth positive start with a small asymmetric component so deflated
    // runs are not orthogonal to the wanted mode
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) / (n as f64 + 1.0);
            t * (1.0 - t) + 0.1 * t
        })
        .collect();
    if let Some(p) = deflated {
        deflate(&mut v, p);
    }
    normalize(&mut v);

    let mut mu = op.rayleigh(&v);
    let mut iterations = 0;
    loop {
        iterations += 1;
        lu.solve_in_place(&mut v);
        if let Some(p) = deflated {
            deflate(&mut v, p);
        }
        normalize(&mut v);
        let next = op.rayleigh(&v);
        let done = (next - mu).abs() <= 1e-12 * (1.0 + next.abs());
        mu = next;
        if done {
            break;
        }
        if iterations >= INVERSE_ITER_MAX {
            return Err(Error::NonConvergence {
                what: "principal eigenpair inverse iteration",
                iterations,
                residual: op.residual(&v, mu),
            });
        }
    }

    for _ in 0..RAYLEIGH_ITER_MAX {
        let res = op.residual(&v, mu);
        if res <= 0.01 * RESIDUAL_TARGET {
            break;
        }
        iterations += 1;
        let Ok(lu) = op.factor_shifted(mu) else {
            // shift hit the eigenvalue exactly
            break;
        };
        lu.solve_in_place(&mut v);
        if let Some(p) = deflated {
            deflate(&mut v, p);
        }
        normalize(&mut v);
        let next = op.rayleigh(&v);
        if (next - mu).abs() <= f64::EPSILON * (1.0 + next.abs()) {
            mu = next;
            break;
        }
        mu = next;
    }
    Ok((mu, v, iterations))
}

/// Principal eigenpair of `L + diag(F(0,0) - r)` where `L` already carries the
/// diffusion rate and boundary condition.
pub fn principal_eigenpair(lap: &LaplacianOp, f00: f64, r: &[f64]) -> Result<PrincipalPair> {
    let op = SymTri::new(lap, f00, r);
    let (mu, v, iterations) = top_eigenpair(&op, None)?;

    // back to the original (possibly non-symmetric) basis
    let mut phi: Vec<f64> = v.iter().zip(&op.scale).map(|(x, s)| x / s).collect();
    let peak = phi.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
    phi.iter_mut().for_each(|x| *x /= peak);

    if phi.iter().any(|x| *x <= 0.0) {
        return Err(Error::EigenSolver(alloc::string::String::from(
            "principal eigenvector is not of one sign",
        )));
    }

    let lphi = lap.apply(&phi);
    let residual = sup_norm(
        &lphi
            .iter()
            .zip(&phi)
            .zip(r)
            .map(|((l, p), ri)| l + (f00 - ri) * p - mu * p)
            .collect::<Vec<_>>(),
    );
    if residual > RESIDUAL_TOL {
        return Err(Error::NonConvergence {
            what: "principal eigenpair",
            iterations,
            residual,
        });
    }

    let (beta_second, _, _) = top_eigenpair(&op, Some(&v))?;

    Ok(PrincipalPair {
        beta_star: mu,
        phi_star: phi,
        beta_second,
        iterations,
        residual,
    })
}

impl Problem {
    /// Principal eigenpair for this problem (`F(0,0) = 1`).
    pub fn principal_eigenpair(&self) -> Result<PrincipalPair> {
        principal_eigenpair(self.laplacian(), self.params().proliferation(0.0, 0.0), self.efficacy())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use crate::model::BoundaryCondition;
    use alloc::vec;

    fn pair(n: usize, d: f64, f00: f64, r: f64) -> (Grid, PrincipalPair) {
        let g = Grid::new(n, BoundaryCondition::Dirichlet).unwrap();
        let lap = LaplacianOp::new(&g, d);
        let p = principal_eigenpair(&lap, f00, &vec![r; n]).unwrap();
        (g, p)
    }

    #[test]
    fn stable_regime_eigenpair() {
        let (g, p) = pair(399, 0.1, 1.0, 0.5);
        assert!((p.beta_star - 0.4).abs() < 2e-5, "{}", p.beta_star);
        let err = g
            .nodes()
            .iter()
            .zip(&p.phi_star)
            .fold(0.0f64, |m, (x, v)| m.max((x.sin() - v).abs()));
        assert!(err < 1e-4, "{err}");
        assert!(p.residual <= 1e-8);
        assert!((sup_norm(&p.phi_star) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_regime_eigenvalue() {
        let (_, p) = pair(399, 0.1, 1.0, 0.1);
        assert!((p.beta_star - 0.8).abs() < 2e-5);
    }

    #[test]
    fn pure_diffusion_eigenvalue() {
        let (g, p) = pair(100, 1.0, 0.0, 0.0);
        let h = g.spacing();
        assert!((p.beta_star + 1.0).abs() <= h * h / 10.0);
        // second Dirichlet mode of -Lap is 4 up to O(h^2)
        assert!((p.beta_second + 4.0).abs() < 1e-2, "{}", p.beta_second);
    }

    #[test]
    fn shift_and_efficacy_invariance() {
        let (_, base) = pair(150, 0.1, 1.0, 0.5);
        let (_, shifted) = pair(150, 0.1, 1.7, 0.5);
        assert!((shifted.beta_star - base.beta_star - 0.7).abs() < 1e-12);
        for (a, b) in shifted.phi_star.iter().zip(&base.phi_star) {
            assert!((a - b).abs() < 1e-9);
        }
        let (_, more_r) = pair(150, 0.1, 1.0, 0.8);
        assert!((base.beta_star - more_r.beta_star - 0.3).abs() < 1e-12);
    }

    #[test]
    fn positivity_across_grids() {
        for n in [50, 100, 200, 400] {
            let (_, p) = pair(n, 0.1, 1.0, 0.5);
            assert!(p.phi_star.iter().all(|v| *v > 0.0));
            let peak = p.phi_star.iter().copied().fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn heterogeneous_efficacy_residual() {
        let g = Grid::new(120, BoundaryCondition::Dirichlet).unwrap();
        let lap = LaplacianOp::new(&g, 0.2);
        let r = g.sample(|x| 0.3 + 0.2 * (2.0 * x).cos());
        let p = principal_eigenpair(&lap, 1.0, &r).unwrap();
        assert!(p.residual < 1e-10);
        assert!(p.beta_star > p.beta_second);
        // agrees with a dense symmetric eigensolve
        let mut m = lap.to_dense();
        for i in 0..120 {
            m[(i, i)] += 1.0 - r[i];
        }
        let top = m
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((top - p.beta_star).abs() < 1e-10);
    }

    #[test]
    fn neumann_constant_mode() {
        // with r constant the Neumann principal mode is flat, beta* = F00 - r
        let g = Grid::new(64, BoundaryCondition::Neumann).unwrap();
        let lap = LaplacianOp::new(&g, 0.1);
        let p = principal_eigenpair(&lap, 1.0, &vec![0.25; 64]).unwrap();
        assert!((p.beta_star - 0.75).abs() < 1e-12);
        assert!(p.phi_star.iter().all(|v| (v - 1.0).abs() < 1e-9));
        // next Neumann mode cos x: -d (2/h^2)(1 - cos h)
        let h = g.spacing();
        let expect = 0.75 - 0.1 * 2.0 / (h * h) * (1.0 - h.cos());
        assert!((p.beta_second - expect).abs() < 1e-9, "{} vs {expect}", p.beta_second);
    }
}
