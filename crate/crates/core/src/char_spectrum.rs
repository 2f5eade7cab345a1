//! Rightmost characteristic roots of the linearized delay equation
//! `v' = A0 v + A1 v(t - tau)`, i.e. zeros of
//! `T(lambda) = A0 + exp(-tau lambda) A1 - lambda I`.
//!
//! Candidates come from Chebyshev collocation of the solution-operator
//! generator on `[-tau, 0]`, found by shift-invert Arnoldi, and each one is
//! then polished by Newton's method on `T` itself.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, TridiagonalLu};
use crate::problem::Problem;
use crate::steady_state::{nonlocal_weights, reaction_diagonal};

pub const DEFAULT_COLLOCATION_ORDER: usize = 16;
pub const DEFAULT_EIGENVALUE_COUNT: usize = 10;
pub const DEFAULT_KRYLOV_DIM: usize = 100;
pub const MIN_COLLOCATION_ORDER: usize = 8;
/// Relative residual `|T(lambda) v| / |v|` accepted as refined.
pub const REFINED_RESIDUAL: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 30;

#[derive(Debug, Clone, PartialEq)]
enum Delayed {
    Zero,
    /// `A1 = left right^T`
    RankOne { left: Vec<f64>, right: Vec<f64> },
    Dense(DMatrix<f64>),
}

/// `A0` (tridiagonal: diffusion plus local reaction) and `A1` (the delayed
/// nonlocal coupling) of the linearization about a steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedPair {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    delayed: Delayed,
    beta: f64,
}

/// Linearization about `u` at treatment rate `beta`.
pub fn linearize(problem: &Problem, beta: f64, u: &[f64]) -> LinearizedPair {
    let lap = problem.laplacian();
    let ku = problem.kernel().apply(u);
    let diag = lap
        .diag()
        .iter()
        .zip(reaction_diagonal(problem, beta, u, &ku))
        .map(|(l, c)| l + c)
        .collect();
    let weights = nonlocal_weights(problem, u);
    let delayed = if weights.iter().all(|w| *w == 0.0) {
        Delayed::Zero
    } else if let Some((left, right)) = problem.kernel().rank_one_factors() {
        Delayed::RankOne {
            left: left.iter().zip(&weights).map(|(l, w)| l * w).collect(),
            right: right.to_vec(),
        }
    } else {
        let mut m = problem.kernel().matrix().clone();
        for (i, w) in weights.iter().enumerate() {
            m.row_mut(i).scale_mut(*w);
        }
        Delayed::Dense(m)
    };
    LinearizedPair {
        lower: lap.lower().to_vec(),
        diag,
        upper: lap.upper().to_vec(),
        delayed,
        beta,
    }
}

impl LinearizedPair {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when `A1 = 0` and the spectrum cannot depend on the delay.
    pub fn is_delay_free(&self) -> bool {
        self.delayed == Delayed::Zero
    }

    pub fn a0(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.upper[i];
                m[(i + 1, i)] = self.lower[i];
            }
        }
        m
    }

    pub fn a1(&self) -> DMatrix<f64> {
        let n = self.len();
        match &self.delayed {
            Delayed::Zero => DMatrix::zeros(n, n),
            Delayed::RankOne { left, right } => {
                DVector::from_column_slice(left) * DVector::from_column_slice(right).transpose()
            }
            Delayed::Dense(m) => m.clone(),
        }
    }

    /// Upper bound on `Re lambda` for any root with `Re lambda >= 0`
    /// (there `|exp(-tau lambda)| <= 1`).
    pub fn abscissa_bound(&self) -> f64 {
        let n = self.len();
        let sym = |i: usize| 0.5 * (self.lower[i] + self.upper[i]);
        let gersh = (0..n)
            .map(|i| {
                let mut r = self.diag[i];
                if i > 0 {
                    r += sym(i - 1).abs();
                }
                if i + 1 < n {
                    r += sym(i).abs();
                }
                r
            })
            .fold(f64::NEG_INFINITY, f64::max);
        gersh + self.a1_frobenius()
    }

    fn a1_frobenius(&self) -> f64 {
        match &self.delayed {
            Delayed::Zero => 0.0,
            Delayed::RankOne { left, right } => norm2(left) * norm2(right),
            Delayed::Dense(m) => m.norm(),
        }
    }

    fn apply_a1<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        match &self.delayed {
            Delayed::Zero => vec![T::zero(); x.len()],
            Delayed::RankOne { left, right } => {
                let s = right.iter().zip(x).fold(T::zero(), |acc, (r, xi)| acc + xi.scale(*r));
                left.iter().map(|l| s.scale(*l)).collect()
            }
            Delayed::Dense(m) => (0..x.len())
                .map(|i| {
                    x.iter()
                        .enumerate()
                        .fold(T::zero(), |acc, (j, xj)| acc + xj.scale(m[(i, j)]))
                })
                .collect(),
        }
    }

    fn apply_a0<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = x[i].scale(self.diag[i]);
                if i > 0 {
                    s += x[i - 1].scale(self.lower[i - 1]);
                }
                if i + 1 < n {
                    s += x[i + 1].scale(self.upper[i]);
                }
                s
            })
            .collect()
    }

    /// Factor `A0 - shift I + coef A1`.
    fn factor<T: ComplexField<RealField = f64> + Copy>(&self, shift: T, coef: T) -> Result<Factored<T>> {
        let lower: Vec<T> = self.lower.iter().map(|v| T::from_real(*v)).collect();
        let upper: Vec<T> = self.upper.iter().map(|v| T::from_real(*v)).collect();
        let diag: Vec<T> = self.diag.iter().map(|v| T::from_real(*v) - shift).collect();
        match &self.delayed {
            Delayed::Zero => Ok(Factored::Banded(TridiagonalLu::factor(&lower, &diag, &upper)?)),
            Delayed::RankOne { left, right } => {
                let tri = TridiagonalLu::factor(&lower, &diag, &upper)?;
                let mut z: Vec<T> = left.iter().map(|l| coef.scale(*l)).collect();
                tri.solve_in_place(&mut z);
                let denom = T::one() + right.iter().zip(&z).fold(T::zero(), |a, (r, zi)| a + zi.scale(*r));
                if denom.modulus() <= 1e-14 {
                    return Err(Error::SingularMatrix("rank-one update"));
                }
                Ok(Factored::RankOne {
                    tri,
                    right: right.clone(),
                    z,
                    denom,
                })
            }
            Delayed::Dense(a1) => {
                let n = self.len();
                let mut m = DMatrix::<T>::from_fn(n, n, |i, j| T::from_real(a1[(i, j)]) * coef);
                for i in 0..n {
                    m[(i, i)] += diag[i];
                    if i + 1 < n {
                        m[(i, i + 1)] += upper[i];
                        m[(i + 1, i)] += lower[i];
                    }
                }
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(Error::SingularMatrix("dense characteristic matrix"));
                }
                Ok(Factored::Dense(lu))
            }
        }
    }

    /// `T(lambda) v`.
    fn characteristic_apply(&self, tau: f64, lambda: Complex64, v: &[Complex64]) -> Vec<Complex64> {
        let e = (-lambda * tau).exp();
        let a0v = self.apply_a0(v);
        let a1v = self.apply_a1(v);
        a0v.iter()
            .zip(&a1v)
            .zip(v)
            .map(|((a, b), x)| a + e * b - lambda * x)
            .collect()
    }
}

enum Factored<T: ComplexField<RealField = f64> + Copy> {
    Banded(TridiagonalLu<T>),
    RankOne {
        tri: TridiagonalLu<T>,
        right: Vec<f64>,
        z: Vec<T>,
        denom: T,
    },
    Dense(nalgebra::linalg::LU<T, nalgebra::Dyn, nalgebra::Dyn>),
}

impl<T: ComplexField<RealField = f64> + Copy> Factored<T> {
    fn solve(&self, rhs: &[T]) -> Vec<T> {
        match self {
            Factored::Banded(tri) => tri.solve(rhs),
            Factored::RankOne { tri, right, z, denom } => {
                let mut y = tri.solve(rhs);
                let s = right.iter().zip(&y).fold(T::zero(), |a, (r, yi)| a + yi.scale(*r)) / *denom;
                for (yi, zi) in y.iter_mut().zip(z) {
                    *yi -= *zi * s;
                }
                y
            }
            Factored::Dense(lu) => {
                let b = DVector::from_column_slice(rhs);
                // invertibility was checked when factoring
                lu.solve(&b).map(|x| x.as_slice().to_vec()).unwrap_or_default()
            }
        }
    }
}

/// Chebyshev points `cos(j pi / m)` and the differentiation matrix on them.
pub fn chebyshev(m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=m).map(|j| (PI * j as f64 / m as f64).cos()).collect();
    let c = |j: usize| {
        let s = if j == 0 || j == m { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) { s } else { -s }
    };
    let mut d = DMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        let mut row = 0.0;
        for j in 0..=m {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
                row += d[(i, j)];
            }
        }
        d[(i, i)] = -row;
    }
    (x, d)
}

/// Collocation of the generator of the delay semigroup on the `m + 1`
/// Chebyshev nodes `theta_j = tau (t_j - 1) / 2`, from `theta_0 = 0` down to
/// `theta_m = -tau`. State blocks are ordered by node.
pub struct CollocationGenerator<'a> {
    lp: &'a LinearizedPair,
    tau: f64,
    m: usize,
    dtheta: DMatrix<f64>,
}

impl<'a> CollocationGenerator<'a> {
    pub fn new(lp: &'a LinearizedPair, tau: f64, m: usize) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::domain("collocation needs a positive finite delay"));
        }
        if m < MIN_COLLOCATION_ORDER {
            return Err(Error::config(alloc::format!(
                "collocation order must be >= {MIN_COLLOCATION_ORDER}, got {m}"
            )));
        }
        let (_, d) = chebyshev(m);
        Ok(Self {
            lp,
            tau,
            m,
            dtheta: d * (2.0 / tau),
        })
    }

    pub fn dim(&self) -> usize {
        self.lp.len() * (self.m + 1)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The full `n(m+1)` square matrix; intended for small checks.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.lp.len();
        let m = self.m;
        let mut g = DMatrix::zeros(n * (m + 1), n * (m + 1));
        g.view_mut((0, 0), (n, n)).copy_from(&self.lp.a0());
        let a1 = self.lp.a1();
        let mut last = g.view_mut((0, m * n), (n, n));
        last += &a1;
        for j in 1..=m {
            for k in 0..=m {
                let c = self.dtheta[(j, k)];
                for i in 0..n {
                    g[(j * n + i, k * n + i)] = c;
                }
            }
        }
        g
    }

    /// `(G - sigma I)^{-1}` exploiting the block structure: the derivative
    /// rows are eliminated through an `m x m` solve, leaving one
    /// `n x n` system `(A0 - sigma I - gamma A1) v0 = x0 - A1 g`.
    pub fn shift_invert(&self, sigma: f64) -> Result<ShiftInvert<'a>> {
        let m = self.m;
        let mut e = self.dtheta.view((1, 1), (m, m)).into_owned();
        for i in 0..m {
            e[(i, i)] -= sigma;
        }
        let p = e
            .try_inverse()
            .ok_or(Error::SingularMatrix("collocation derivative block"))?;
        let d0 = self.dtheta.view((1, 0), (m, 1)).into_owned();
        let evec: Vec<f64> = (&p * d0).iter().copied().collect();
        let gamma = evec[m - 1];
        let factored = self.lp.factor(sigma, -gamma)?;
        Ok(ShiftInvert {
            lp: self.lp,
            m,
            p,
            e: evec,
            factored,
        })
    }
}

pub struct ShiftInvert<'a> {
    lp: &'a LinearizedPair,
    m: usize,
    p: DMatrix<f64>,
    e: Vec<f64>,
    factored: Factored<f64>,
}

impl ShiftInvert<'_> {
    pub fn dim(&self) -> usize {
        self.lp.len() * (self.m + 1)
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.lp.len();
        let m = self.m;
        let block = |k: usize| &x[k * n..(k + 1) * n];

        let mut g = vec![0.0; n];
        for k in 0..m {
            let c = self.p[(m - 1, k)];
            for (gi, xi) in g.iter_mut().zip(block(k + 1)) {
                *gi += c * xi;
            }
        }
        let a1g = self.lp.apply_a1(&g);
        let rhs: Vec<f64> = block(0).iter().zip(&a1g).map(|(a, b)| a - b).collect();
        let v0 = self.factored.solve(&rhs);

        out[..n].copy_from_slice(&v0);
        for j in 1..=m {
            let o = &mut out[j * n..(j + 1) * n];
            for (oi, v) in o.iter_mut().zip(&v0) {
                *oi = -self.e[j - 1] * v;
            }
            for k in 0..m {
                let c = self.p[(j - 1, k)];
                for (oi, xi) in o.iter_mut().zip(block(k + 1)) {
                    *oi += c * xi;
                }
            }
        }
    }
}

/// Upper Hessenberg matrix of `k` steps of Arnoldi with full
/// reorthogonalization (fewer if the Krylov space is exhausted).
fn arnoldi(op: &ShiftInvert<'_>, k: usize) -> DMatrix<f64> {
    let dim = op.dim();
    let k = k.min(dim);
    let mut start: Vec<f64> = (0..dim)
        .map(|i| (1.3 * i as f64 + 0.7).sin() + 0.5 * (0.37 * i as f64).cos())
        .collect();
    let s = norm2(&start);
    start.iter_mut().for_each(|v| *v /= s);

    let mut basis = vec![start];
    let mut h = DMatrix::zeros(k + 1, k);
    let mut w = vec![0.0; dim];
    let mut steps = k;
    for j in 0..k {
        op.apply(&basis[j], &mut w);
        // classical Gram-Schmidt, twice
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                h[(i, j)] += c;
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let hn = norm2(&w);
        h[(j + 1, j)] = hn;
        let scale = h.column(j).norm();
        if hn <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            steps = j + 1;
            break;
        }
        basis.push(w.iter().map(|v| v / hn).collect());
    }
    h.view((0, 0), (steps, steps)).into_owned()
}

fn eigenvalues_of(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let dim = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 1000 * dim.max(1))
        .ok_or_else(|| Error::EigenSolver(String::from("Schur iteration did not converge")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub collocation_order: usize,
    /// Number of rightmost roots to report.
    pub count: usize,
    pub krylov_dim: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            collocation_order: DEFAULT_COLLOCATION_ORDER,
            count: DEFAULT_EIGENVALUE_COUNT,
            krylov_dim: DEFAULT_KRYLOV_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvalue {
    pub lambda: Complex64,
    /// `|T(lambda) v| / |v|` for the refined eigenvector.
    pub residual: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Sorted by descending real part, conjugate pairs adjacent.
    pub eigenvalues: Vec<Eigenvalue>,
    pub tau: f64,
    pub beta: f64,
    pub collocation_order: usize,
}

impl SpectrumResult {
    pub fn max_real(&self) -> f64 {
        self.eigenvalues.first().map_or(f64::NEG_INFINITY, |e| e.lambda.re)
    }

    pub fn rightmost(&self) -> Option<Complex64> {
        self.eigenvalues.first().map(|e| e.lambda)
    }

    pub fn all_refined(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.refined)
    }
}

/// Newton's method on `T(lambda) v = 0` with the normalization `c^H v = 1`,
/// eigenvector seeded by one inverse-iteration step.
fn refine(lp: &LinearizedPair, tau: f64, guess: Complex64) -> Eigenvalue {
    let n = lp.len();
    let mut lambda = guess;
    let factor_at = |l: Complex64| lp.factor(l, (-l * tau).exp());

    let start = factor_at(lambda).or_else(|_| {
        lambda += 1e-10 * (1.0 + lambda.norm());
        factor_at(lambda)
    });
    let Ok(f) = start else {
        return Eigenvalue {
            lambda: guess,
            residual: f64::INFINITY,
            refined: false,
        };
    };
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..3 {
        v = f.solve(&v);
        let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
    }
    let c = v.clone();
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    };

    for _ in 0..NEWTON_MAX_ITER {
        let e = (-lambda * tau).exp();
        let a1v = lp.apply_a1(&v);
        let tpv: Vec<Complex64> = a1v.iter().zip(&v).map(|(a, x)| -tau * e * a - x).collect();
        let Ok(f) = lp.factor(lambda, e) else {
            // lambda is an eigenvalue to working precision
            break;
        };
        let u = f.solve(&tpv);
        let denom = inner(&c, &u);
        if denom.norm() == 0.0 || !denom.is_finite() {
            break;
        }
        let delta = -inner(&c, &v) / denom;
        lambda += delta;
        v = u.iter().map(|x| x / denom).collect();
        if !lambda.is_finite() || delta.norm() <= 1e-14 * (1.0 + lambda.norm()) {
            break;
        }
    }

    if !lambda.is_finite() {
        return Eigenvalue {
            lambda: guess,
            residual: f64::INFINITY,
            refined: false,
        };
    }
    let r = lp.characteristic_apply(tau, lambda, &v);
    let rn = r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let vn = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let residual = rn / vn;
    Eigenvalue {
        lambda,
        residual,
        refined: residual <= REFINED_RESIDUAL,
    }
}

fn same(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-8 * (1.0 + a.norm())
}

/// Rightmost roots of the characteristic equation at delay `tau`.
pub fn rightmost_eigenvalues(
    lp: &LinearizedPair,
    tau: f64,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain("delay must be finite and >= 0"));
    }
    if opts.count == 0 {
        return Err(Error::config("eigenvalue count must be positive"));
    }
    let candidates = if tau == 0.0 || lp.is_delay_free() {
        eigenvalues_of(lp.a0() + lp.a1())?
    } else {
        let generator = CollocationGenerator::new(lp, tau, opts.collocation_order)?;
        // every root with Re >= 0 lies left of sigma
        let sigma = lp.abscissa_bound().max(0.0) + 0.5;
        let si = generator.shift_invert(sigma)?;
        let h = arnoldi(&si, opts.krylov_dim.max(2 * opts.count + 10));
        eigenvalues_of(h)?
            .into_iter()
            .filter(|mu| mu.norm() > 1e-300)
            .map(|mu| sigma + 1.0 / mu)
            .collect()
    };

    // upper half plane only; conjugates are restored after refinement
    let mut upper: Vec<Complex64> = candidates
        .into_iter()
        .filter(|l| l.is_finite() && l.im >= 0.0)
        .map(|l| {
            if l.im <= 1e-10 * (1.0 + l.norm()) {
                Complex64::new(l.re, 0.0)
            } else {
                l
            }
        })
        .collect();
    upper.sort_by(|a, b| b.re.total_cmp(&a.re));
    upper.truncate(opts.count + 2);

    let mut found: Vec<Eigenvalue> = Vec::new();
    for guess in upper {
        let mut e = refine(lp, tau, guess);
        if e.lambda.im < 0.0 {
            e.lambda = e.lambda.conj();
        }
        if e.lambda.im.abs() <= 1e-10 * (1.0 + e.lambda.norm()) {
            e.lambda.im = 0.0;
        }
        if !found.iter().any(|f| same(f.lambda, e.lambda)) {
            found.push(e);
        }
    }
    let mut all: Vec<Eigenvalue> = Vec::with_capacity(2 * found.len());
    for e in found {
        if e.lambda.im > 0.0 {
            let mut c = e.clone();
            c.lambda = c.lambda.conj();
            all.push(e);
            all.push(c);
        } else {
            all.push(e);
        }
    }
    all.sort_by(|a, b| {
        b.lambda
            .re
            .total_cmp(&a.lambda.re)
            .then(b.lambda.im.total_cmp(&a.lambda.im))
    });
    // keep conjugate partners together when truncating
    let mut keep = opts.count.min(all.len());
    if keep > 0 && keep < all.len() && all[keep - 1].lambda.im > 0.0 {
        keep += 1;
    }
    all.truncate(keep);

    Ok(SpectrumResult {
        eigenvalues: all,
        tau,
        beta: lp.beta(),
        collocation_order: opts.collocation_order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfCrossing {
    pub tau_c: f64,
    /// `|Im lambda|` of the rightmost root at `tau_c`.
    pub omega_c: f64,
    /// Sign of `d max Re lambda / d tau` at `tau_c` (0 if flat).
    pub slope_sign: i8,
    pub max_real_at_crossing: f64,
    pub evaluations: usize,
}

/// Locates a zero of `tau -> max Re lambda(tau)` inside `[tau_lo, tau_hi]`
/// with the Illinois variant of regula falsi.
pub fn hopf_crossing(
    lp: &LinearizedPair,
    tau_lo: f64,
    tau_hi: f64,
    tol: f64,
    opts: &SpectrumOptions,
) -> Result<HopfCrossing> {
    if !(0.0 <= tau_lo && tau_lo < tau_hi) || !tau_hi.is_finite() {
        return Err(Error::domain("need 0 <= tau_lo < tau_hi"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let mut evaluations = 0;
    let mut f = |tau: f64| -> Result<SpectrumResult> {
        evaluations += 1;
        rightmost_eigenvalues(lp, tau, opts)
    };

    let (mut a, mut b) = (tau_lo, tau_hi);
    let mut fa = f(a)?.max_real();
    let mut fb = f(b)?.max_real();
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::NoCrossing {
            tau_lo,
            tau_hi,
            lo_value: fa,
            hi_value: fb,
        });
    }

    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() { (a, f(a)?) } else { (b, f(b)?) };
    for _ in 0..200 {
        if best.1.max_real().abs() <= tol {
            break;
        }
        let mut t = (a * fb - b * fa) / (fb - fa);
        if !(t > a.min(b) && t < a.max(b)) {
            t = 0.5 * (a + b);
        }
        let spec = f(t)?;
        let ft = spec.max_real();
        if ft.abs() < best.1.max_real().abs() {
            best = (t, spec);
        }
        if ft == 0.0 {
            break;
        }
        if ft.signum() == fb.signum() {
            b = t;
            fb = ft;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = t;
            fa = ft;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 1e-14 * (1.0 + t.abs()) {
            break;
        }
    }

    let (tau_c, spec) = best;
    let residual = spec.max_real();
    if !(residual.abs() <= tol) {
        return Err(Error::NonConvergence {
            what: "Hopf crossing search",
            iterations: evaluations,
            residual,
        });
    }
    let step = (1e-3 * tau_c.max(1.0)).max(tol);
    let lo = (tau_c - step).max(0.0);
    let hi = tau_c + step;
    let slope = (f(hi)?.max_real() - f(lo)?.max_real()) / (hi - lo);
    let slope_sign = if slope > 0.0 {
        1
    } else if slope < 0.0 {
        -1
    } else {
        0
    };
    Ok(HopfCrossing {
        tau_c,
        omega_c: spec.rightmost().map_or(0.0, |l| l.im.abs()),
        slope_sign,
        max_real_at_crossing: residual,
        evaluations,
    })
}
