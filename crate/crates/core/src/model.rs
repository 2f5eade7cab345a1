//! Model functions: Britton-type proliferation, density-dependent therapy,
//! the interaction kernel and the dose/treatment-rate map.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Boundary condition on the spatial interval `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Hostile boundary, `u = 0` at both ends.
    Dirichlet,
    /// Isolated habitat, zero flux at both ends.
    Neumann,
}

/// Scalar model constants.
///
/// The proliferation term is `F(u, v) = 1 + a1 u - a2 u^2 - (1 + a1 - a2) v`
/// where `v` is the kernel-weighted (delayed) density. Therapy removes cells
/// at rate `beta q(u) + r0` with `q(u) = 1 - u / u_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub d: f64,
    pub a1: f64,
    pub a2: f64,
    pub u_max: f64,
    pub r0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
    pub bc: BoundaryCondition,
}

impl ModelParams {
    /// Low-proliferation parameters where the bifurcating steady state is
    /// stable for every delay.
    pub fn stable_regime() -> Self {
        Self {
            d: 0.1,
            a1: -0.49,
            a2: 0.5,
            u_max: 1.0,
            r0: 0.5,
            alpha1: 0.2,
            alpha2: 0.3,
            tau: 0.1,
            bc: BoundaryCondition::Dirichlet,
        }
    }

    /// Strong-proliferation parameters where delay-induced Hopf bifurcations
    /// occur below the critical treatment rate.
    pub fn oscillatory_regime() -> Self {
        Self {
            d: 0.1,
            a1: 2.0,
            a2: 0.9,
            u_max: 1.0,
            r0: 0.1,
            alpha1: 0.2,
            alpha2: 0.3,
            tau: 1.75,
            bc: BoundaryCondition::Dirichlet,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d", self.d),
            ("a1", self.a1),
            ("a2", self.a2),
            ("u_max", self.u_max),
            ("r0", self.r0),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("tau", self.tau),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.d <= 0.0 {
            return Err(Error::config(format!("d must be > 0, got {}", self.d)));
        }
        if self.u_max <= 0.0 {
            return Err(Error::config(format!("u_max must be > 0, got {}", self.u_max)));
        }
        if self.tau < 0.0 {
            return Err(Error::config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return Err(Error::config("radiosensitivities alpha1, alpha2 must be >= 0"));
        }
        Ok(())
    }

    /// `1 + a1 - a2`, the weight of the nonlocal term. Either sign is allowed.
    pub fn britton_constant(&self) -> f64 {
        1.0 + self.a1 - self.a2
    }

    /// `F(u, v)`.
    pub fn proliferation(&self, u: f64, v: f64) -> f64 {
        1.0 + self.a1 * u - self.a2 * u * u - self.britton_constant() * v
    }

    /// `(dF/du, dF/dv)` at `(u, v)`; the second partial does not depend on the state.
    pub fn proliferation_partials(&self, u: f64) -> (f64, f64) {
        (self.a1 - 2.0 * self.a2 * u, -self.britton_constant())
    }

    pub fn proliferation_partials_at_zero(&self) -> (f64, f64) {
        self.proliferation_partials(0.0)
    }

    /// `q(u) = 1 - u / u_max`.
    pub fn therapy_response(&self, u: f64) -> f64 {
        1.0 - u / self.u_max
    }

    /// `q'(0) = -1 / u_max`; `q` is affine so this is also `q'(u)`.
    pub fn therapy_slope(&self) -> f64 {
        -1.0 / self.u_max
    }

    /// Therapy-induced death rate `beta q(u) + r0`.
    pub fn therapy(&self, u: f64, beta: f64) -> f64 {
        beta * self.therapy_response(u) + self.r0
    }

    /// Treatment rate from the linear-quadratic surviving fraction,
    /// `beta = 1 - exp(-alpha1 D - alpha2 D^2)`.
    pub fn dose_to_beta(&self, dose: f64) -> Result<f64> {
        if !(dose >= 0.0) || !dose.is_finite() {
            return Err(Error::domain(format!("dose must be finite and >= 0, got {dose}")));
        }
        Ok(-(-(self.alpha1 * dose + self.alpha2 * dose * dose)).exp_m1())
    }

    /// Inverse of [`dose_to_beta`](Self::dose_to_beta): the nonnegative root of
    /// `alpha2 D^2 + alpha1 D + ln(1 - beta) = 0`.
    pub fn beta_to_dose(&self, beta: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must lie in [0, 1), got {beta}")));
        }
        let (a, b) = (self.alpha2, self.alpha1);
        if a + b <= 0.0 {
            return Err(Error::domain("alpha1 + alpha2 must be > 0 to invert the dose map"));
        }
        // c = -ln(1 - beta) >= 0
        let c = -(-beta).ln_1p();
        if c == 0.0 {
            return Ok(0.0);
        }
        if a == 0.0 {
            return Ok(c / b);
        }
        // rationalized positive root, stable when b^2 >> a c
        Ok(2.0 * c / (b + (b * b + 4.0 * a * c).sqrt()))
    }
}

/// Interaction kernel `S(x, y)` on `[0, pi]^2`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `S(x, y) = sin x sin y`.
    SeparableSinSin,
    /// Samples on a uniform closed `size x size` mesh over `[0, pi]^2`
    /// (row-major, row index = x), bilinearly interpolated.
    Tabulated { size: usize, values: Vec<f64> },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::SeparableSinSin => Ok(()),
            KernelSpec::Tabulated { size, values } => {
                if *size < 2 || values.len() != size * size {
                    return Err(Error::config(format!(
                        "tabulated kernel needs size >= 2 and size^2 values, got size {size} with {} values",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::config("tabulated kernel values must be finite and nonnegative"));
                }
                Ok(())
            }
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, KernelSpec::SeparableSinSin)
    }

    /// `S(x, y)` for `x, y` in `[0, pi]`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        // allow rounding slop from mesh construction
        let slop = 1e-12;
        if !(x >= -slop && x <= PI + slop && y >= -slop && y <= PI + slop) {
            return Err(Error::domain(format!("kernel evaluated outside [0, pi]^2 at ({x}, {y})")));
        }
        Ok(match self {
            KernelSpec::SeparableSinSin => x.sin() * y.sin(),
            KernelSpec::Tabulated { size, values } => {
                let step = PI / (*size - 1) as f64;
                let locate = |p: f64| {
                    let s = (p.clamp(0.0, PI) / step).min((*size - 1) as f64);
                    let i = (s.floor() as usize).min(*size - 2);
                    (i, s - i as f64)
                };
                let (i, fx) = locate(x);
                let (j, fy) = locate(y);
                let at = |r: usize, c: usize| values[r * size + c];
                (1.0 - fx) * ((1.0 - fy) * at(i, j) + fy * at(i, j + 1))
                    + fx * ((1.0 - fy) * at(i + 1, j) + fy * at(i + 1, j + 1))
            }
        })
    }
}
