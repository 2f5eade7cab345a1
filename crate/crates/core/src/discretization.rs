//! Uniform mesh on `[0, pi]`, the second-order Laplacian, composite
//! quadrature and the dense nonlocal kernel operator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::TridiagonalLu;
use crate::model::{BoundaryCondition, KernelSpec};

/// Smallest accepted node count.
pub const MIN_NODES: usize = 8;

/// Uniform 1-D mesh.
///
/// Dirichlet grids store the `n` interior nodes only (boundary values are
/// implicit zeros); Neumann grids store all `n` nodes including both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    nodes: Vec<f64>,
    bc: BoundaryCondition,
}

impl Grid {
    pub fn new(n: usize, bc: BoundaryCondition) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::config(format!("grid needs at least {MIN_NODES} nodes, got {n}")));
        }
        let (h, first) = match bc {
            BoundaryCondition::Dirichlet => (PI / (n + 1) as f64, 1),
            BoundaryCondition::Neumann => (PI / (n - 1) as f64, 0),
        };
        let nodes = (0..n).map(|i| (i + first) as f64 * h).collect();
        Ok(Self { n, h, nodes, bc })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Number of mesh intervals covering `[0, pi]`.
    pub fn intervals(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => self.n + 1,
            BoundaryCondition::Neumann => self.n - 1,
        }
    }

    /// Index of the node nearest `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if (node - x).abs() < (self.nodes[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Scaled second-difference operator `d * Laplacian` in tridiagonal form.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianOp {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl LaplacianOp {
    /// Dirichlet rows drop the boundary neighbours; Neumann rows use a
    /// mirrored ghost node, which doubles the inward coefficient at both ends.
    pub fn new(grid: &Grid, d: f64) -> Self {
        let n = grid.len();
        let c = d / (grid.spacing() * grid.spacing());
        let mut lower = vec![c; n - 1];
        let diag = vec![-2.0 * c; n];
        let mut upper = vec![c; n - 1];
        if grid.bc() == BoundaryCondition::Neumann {
            upper[0] = 2.0 * c;
            lower[n - 2] = 2.0 * c;
        }
        Self { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.lower[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i > 0 {
                m[(i, i - 1)] = self.lower[i - 1];
            }
            if i + 1 < n {
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }

    /// Factor `a I + b L + diag(shift)` (used by the implicit time step and
    /// the eigen solvers).
    pub fn factor_combination(&self, a: f64, b: f64, shift: &[f64]) -> Result<TridiagonalLu> {
        let lower: Vec<f64> = self.lower.iter().map(|x| b * x).collect();
        let upper: Vec<f64> = self.upper.iter().map(|x| b * x).collect();
        let diag: Vec<f64> = self
            .diag
            .iter()
            .zip(shift)
            .map(|(x, s)| a + b * x + s)
            .collect();
        TridiagonalLu::factor(&lower, &diag, &upper)
    }

    /// Diagonal scaling `s` with `diag(s) L diag(s)^-1` symmetric.
    pub fn symmetrizer(&self) -> Vec<f64> {
        let n = self.diag.len();
        let mut s = vec![1.0; n];
        for i in 0..n.saturating_sub(1) {
            // symmetric iff upper_i s_i / s_{i+1} = lower_i s_{i+1} / s_i
            s[i + 1] = s[i] * (self.upper[i] / self.lower[i]).sqrt();
        }
        s
    }
}

/// Composite quadrature weights on the closed mesh over `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    weights: Vec<f64>,
    offset: usize,
    field_len: usize,
}

impl Quadrature {
    /// Composite Simpson; an odd interval count closes with Simpson's 3/8
    /// rule on the last three intervals so the rule stays exact for cubics.
    pub fn new(grid: &Grid) -> Self {
        let m = grid.intervals();
        let h = grid.spacing();
        let mut w = vec![0.0; m + 1];
        let simpson_end = if m.is_multiple_of(2) { m } else { m - 3 };
        let mut i = 0;
        while i < simpson_end {
            w[i] += h / 3.0;
            w[i + 1] += 4.0 * h / 3.0;
            w[i + 2] += h / 3.0;
            i += 2;
        }
        if simpson_end < m {
            let c = 3.0 * h / 8.0;
            w[m - 3] += c;
            w[m - 2] += 3.0 * c;
            w[m - 1] += 3.0 * c;
            w[m] += c;
        }
        let offset = match grid.bc() {
            BoundaryCondition::Dirichlet => 1,
            BoundaryCondition::Neumann => 0,
        };
        Self {
            weights: w,
            offset,
            field_len: grid.len(),
        }
    }

    /// Weights on every mesh point including the boundary.
    pub fn closed_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights aligned with field samples.
    pub fn field_weights(&self) -> &[f64] {
        &self.weights[self.offset..self.offset + self.field_len]
    }

    /// Integral over `[0, pi]` of a field (Dirichlet boundary values are zero).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.field_weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Discretized `psi -> int S(., y) psi(y) dy`, `K[i][j] = w_j S(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOp {
    matrix: DMatrix<f64>,
    factors: Option<(Vec<f64>, Vec<f64>)>,
}

impl KernelOp {
    pub fn new(spec: &KernelSpec, grid: &Grid, quad: &Quadrature) -> Result<Self> {
        spec.validate()?;
        let x = grid.nodes();
        let w = quad.field_weights();
        let n = grid.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                matrix[(i, j)] = w[j] * spec.eval(x[i], x[j])?;
            }
        }
        let factors = spec.is_separable().then(|| {
            let left: Vec<f64> = x.iter().map(|v| v.sin()).collect();
            let right = x.iter().zip(w).map(|(v, wj)| wj * v.sin()).collect();
            (left, right)
        });
        Ok(Self { matrix, factors })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `(left, right)` with `K = left right^T` when the kernel is separable.
    pub fn rank_one_factors(&self) -> Option<(&[f64], &[f64])> {
        self.factors.as_ref().map(|(l, r)| (l.as_slice(), r.as_slice()))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        if let Some((left, right)) = &self.factors {
            let s: f64 = right.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, l) in out.iter_mut().zip(left) {
                *o = l * s;
            }
            return;
        }
        let n = self.matrix.nrows();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut s = 0.0;
            for (j, vj) in v.iter().enumerate() {
                s += self.matrix[(i, j)] * vj;
            }
            *o = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;
    use proptest::prelude::*;

    fn dirichlet(n: usize) -> Grid {
        Grid::new(n, BoundaryCondition::Dirichlet).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = dirichlet(199);
        assert!((g.spacing() - PI / 200.0).abs() < 1e-16);
        let g = dirichlet(8);
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((x - (i + 1) as f64 * PI / 9.0).abs() < 1e-14);
        }
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.nodes()[0] > 0.0 && *g.nodes().last().unwrap() < PI);
        let g = Grid::new(9, BoundaryCondition::Neumann).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert!((g.nodes()[8] - PI).abs() < 1e-14);
        assert!(Grid::new(7, BoundaryCondition::Dirichlet).is_err());
        assert!(Grid::new(7, BoundaryCondition::Neumann).is_err());
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = dirichlet(50);
        let l = LaplacianOp::new(&g, 0.3);
        assert!(l.apply(&vec![0.0; 50]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_of_sine() {
        let d = 0.1;
        let g = dirichlet(199);
        let l = LaplacianOp::new(&g, d);
        let s = g.sample(f64::sin);
        let h = g.spacing();
        let err = l
            .apply(&s)
            .iter()
            .zip(&s)
            .fold(0.0f64, |m, (a, b)| m.max((a + d * b).abs()));
        assert!(err <= d * h * h / 10.0, "err {err}");
    }

    /// Top eigenvalue of -(1/d) L against the closed form (2/h^2)(1 - cos h),
    /// using the exact discrete eigenvector sin(x_i) as Rayleigh quotient oracle.
    #[test]
    fn laplacian_top_mode_closed_form() {
        let g = dirichlet(99);
        let l = LaplacianOp::new(&g, 1.0);
        let s = g.sample(f64::sin);
        let ls = l.apply(&s);
        let h = g.spacing();
        let closed = 2.0 / (h * h) * (1.0 - h.cos());
        for (a, b) in ls.iter().zip(&s) {
            assert!((-a - closed * b).abs() < 1e-9);
        }
        assert!((closed - 1.0).abs() < h * h / 10.0);
    }

    #[test]
    fn laplacian_second_order_refinement() {
        let err = |n: usize| {
            let h = PI / (n + 1) as f64;
            (2.0 / (h * h) * (1.0 - h.cos()) - 1.0).abs()
        };
        // doubling the interval count
        let ratio = err(99) / err(199);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn neumann_rows_sum_to_zero() {
        let g = Grid::new(20, BoundaryCondition::Neumann).unwrap();
        let l = LaplacianOp::new(&g, 0.7);
        let ones = vec![1.0; 20];
        assert!(l.apply(&ones).iter().all(|v| v.abs() < 1e-12));
        let s = l.symmetrizer();
        let m = l.to_dense();
        for i in 0..19 {
            let a = m[(i, i + 1)] * s[i] / s[i + 1];
            let b = m[(i + 1, i)] * s[i + 1] / s[i];
            assert!((a - b).abs() < 1e-9 * a.abs());
        }
    }

    #[test]
    fn dirichlet_laplacian_symmetric() {
        let l = LaplacianOp::new(&dirichlet(12), 0.5).to_dense();
        assert_eq!(l, l.transpose());
    }

    #[test]
    fn quadrature_reference_integrals() {
        let g = dirichlet(199);
        let q = Quadrature::new(&g);
        assert!((q.integrate(&g.sample(f64::sin)) - 2.0).abs() < 1e-8);
        assert!((q.integrate(&g.sample(|x| x.sin().powi(2))) - FRAC_PI_2).abs() < 1e-12);
        assert!((q.integrate(&g.sample(|x| x.sin().powi(3))) - 4.0 / 3.0).abs() < 1e-8);
        // odd interval count takes the 3/8 closing panel
        let g = dirichlet(200);
        let q = Quadrature::new(&g);
        assert!((q.integrate(&g.sample(|x| x.sin().powi(3))) - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_exact_for_cubics() {
        for n in [8, 9, 30, 31] {
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
                let g = Grid::new(n, bc).unwrap();
                let q = Quadrature::new(&g);
                let h = g.spacing();
                let m = g.intervals();
                let x: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
                let integral: f64 = x
                    .iter()
                    .zip(q.closed_weights())
                    .map(|(x, w)| w * (x * x * x - 2.0 * x + 1.0))
                    .sum();
                let exact = PI.powi(4) / 4.0 - PI * PI + PI;
                assert!((integral - exact).abs() < 1e-11, "n={n} {bc:?}");
            }
        }
    }

    #[test]
    fn kernel_applied_to_sine() {
        let g = dirichlet(199);
        let q = Quadrature::new(&g);
        let k = KernelOp::new(&KernelSpec::SeparableSinSin, &g, &q).unwrap();
        let s = g.sample(f64::sin);
        let ks = k.apply(&s);
        for (a, b) in ks.iter().zip(&s) {
            assert!((a - FRAC_PI_2 * b).abs() < 1e-6);
        }
        assert!(k.apply(&vec![0.0; 199]).iter().all(|v| *v == 0.0));
        let (left, right) = k.rank_one_factors().unwrap();
        for i in 0..199 {
            for j in 0..199 {
                assert!((k.matrix()[(i, j)] - left[i] * right[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn separable_kernel_is_numerically_rank_one() {
        let g = dirichlet(60);
        let q = Quadrature::new(&g);
        let k = KernelOp::new(&KernelSpec::SeparableSinSin, &g, &q).unwrap();
        let sv = k.matrix().clone().singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn tabulated_kernel_matches_separable_on_mesh() {
        let g = dirichlet(63);
        let q = Quadrature::new(&g);
        // sampled on the closed mesh of the same spacing, so interpolation is exact
        let size = 65;
        let step = PI / 64.0;
        let values = (0..size * size)
            .map(|i| ((i / size) as f64 * step).sin() * ((i % size) as f64 * step).sin())
            .collect();
        let tab = KernelOp::new(&KernelSpec::Tabulated { size, values }, &g, &q).unwrap();
        let sep = KernelOp::new(&KernelSpec::SeparableSinSin, &g, &q).unwrap();
        assert!(tab.rank_one_factors().is_none());
        let v = g.sample(|x| x * (PI - x));
        for (a, b) in tab.apply(&v).iter().zip(sep.apply(&v)) {
            assert!((a - b).abs() < 1e-12);
        }
        let bad = KernelSpec::Tabulated {
            size: 4,
            values: vec![1.0; 15],
        };
        assert!(matches!(KernelOp::new(&bad, &g, &q), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn weights_nonnegative_and_sum_to_pi(n in 8usize..400, neumann in any::<bool>()) {
            let bc = if neumann { BoundaryCondition::Neumann } else { BoundaryCondition::Dirichlet };
            let q = Quadrature::new(&Grid::new(n, bc).unwrap());
            prop_assert!(q.closed_weights().iter().all(|w| *w >= 0.0));
            let total: f64 = q.closed_weights().iter().sum();
            prop_assert!((total - PI).abs() < 1e-12);
        }

        #[test]
        fn dirichlet_laplacian_negative_definite(v in proptest::collection::vec(-1.0f64..1.0, 40)) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
            let l = LaplacianOp::new(&dirichlet(40), 0.1);
            let lv = l.apply(&v);
            let q: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
            prop_assert!(q < 0.0);
        }

        #[test]
        fn kernel_preserves_nonnegativity(v in proptest::collection::vec(0.0f64..1.0, 40)) {
            prop_assume!(v.iter().any(|x| *x > 1e-3));
            let g = dirichlet(40);
            let q = Quadrature::new(&g);
            let k = KernelOp::new(&KernelSpec::SeparableSinSin, &g, &q).unwrap();
            let out = k.apply(&v);
            prop_assert!(out.iter().all(|x| *x > 0.0));
            let dense: Vec<f64> = (0..40).map(|i| (0..40).map(|j| k.matrix()[(i, j)] * v[j]).sum()).collect();
            for (a, b) in out.iter().zip(&dense) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
