use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::{Grid, KernelOp, LaplacianOp, Quadrature};
use crate::error::{Error, Result};
use crate::model::{KernelSpec, ModelParams};

/// A model bound to a mesh: parameters plus every assembled spatial operator.
///
/// Operators are immutable once built and may be shared across threads.
#[derive(Debug, Clone)]
pub struct Problem {
    params: ModelParams,
    kernel_spec: KernelSpec,
    grid: Grid,
    laplacian: LaplacianOp,
    quadrature: Quadrature,
    kernel: KernelOp,
    efficacy: Vec<f64>,
}

impl Problem {
    pub fn new(params: ModelParams, kernel_spec: KernelSpec, n: usize) -> Result<Self> {
        params.validate()?;
        let grid = Grid::new(n, params.bc)?;
        let laplacian = LaplacianOp::new(&grid, params.d);
        let quadrature = Quadrature::new(&grid);
        let kernel = KernelOp::new(&kernel_spec, &grid, &quadrature)?;
        let efficacy = vec![params.r0; n];
        Ok(Self {
            params,
            kernel_spec,
            grid,
            laplacian,
            quadrature,
            kernel,
            efficacy,
        })
    }

    /// Replace the constant efficacy `r0` by a profile sampled at the nodes.
    pub fn with_efficacy_profile(mut self, r: Vec<f64>) -> Result<Self> {
        if r.len() != self.grid.len() {
            return Err(Error::config(format!(
                "efficacy profile has {} samples, grid has {}",
                r.len(),
                self.grid.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("efficacy profile must be finite"));
        }
        self.efficacy = r;
        Ok(self)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kernel_spec(&self) -> &KernelSpec {
        &self.kernel_spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn laplacian(&self) -> &LaplacianOp {
        &self.laplacian
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    pub fn kernel(&self) -> &KernelOp {
        &self.kernel
    }

    /// `r(x)` at the nodes.
    pub fn efficacy(&self) -> &[f64] {
        &self.efficacy
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}
