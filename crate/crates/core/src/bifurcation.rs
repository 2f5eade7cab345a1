//! Closed-form bifurcation quantities near `beta*`: the theta coefficients,
//! `kappa`, `kappa~`, the four-region classification, the first-order
//! steady state and the leading-order Hopf delays.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::discretization::{KernelOp, Quadrature};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::spectral::PrincipalPair;

/// Below this magnitude the sign of `kappa` or `kappa~` is not trusted.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// `|beta - beta*| / beta*` above which the first-order steady state is
/// flagged as an extrapolation.
pub const FAR_FROM_CRITICAL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaCoefficients {
    /// `F_u(0,0) * int phi^3`
    pub theta1: f64,
    /// `F_v(0,0) * int int S(x,y) phi(x)^2 phi(y)`
    pub theta2: f64,
    /// `int phi^3`
    pub theta3: f64,
    /// `int phi^2`
    pub theta4: f64,
}

/// Theta coefficients of `phi` for the partials `(F_u(0,0), F_v(0,0))`.
pub fn compute_thetas(
    phi: &[f64],
    kernel: &KernelOp,
    quad: &Quadrature,
    partials: (f64, f64),
) -> ThetaCoefficients {
    let kphi = kernel.apply(phi);
    let cube: Vec<f64> = phi.iter().map(|p| p * p * p).collect();
    let sq: Vec<f64> = phi.iter().map(|p| p * p).collect();
    let nonlocal: Vec<f64> = sq.iter().zip(&kphi).map(|(s, k)| s * k).collect();
    let theta3 = quad.integrate(&cube);
    ThetaCoefficients {
        theta1: partials.0 * theta3,
        theta2: partials.1 * quad.integrate(&nonlocal),
        theta3,
        theta4: quad.integrate(&sq),
    }
}

/// `kappa(beta) = theta1 + theta2 - beta q'(0) theta3`.
pub fn kappa(beta: f64, th: &ThetaCoefficients, qprime0: f64) -> f64 {
    th.theta1 + th.theta2 - beta * qprime0 * th.theta3
}

/// `kappa~(beta*) = theta1 - theta2 - beta* q'(0) theta3`.
pub fn kappa_tilde(beta_star: f64, th: &ThetaCoefficients, qprime0: f64) -> f64 {
    th.theta1 - th.theta2 - beta_star * qprime0 * th.theta3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `kappa* < 0, kappa~* < 0`: stable for every delay.
    StableAllDelays,
    /// `kappa* < 0, kappa~* > 0`: Hopf bifurcations in the delay.
    HopfBelowBetaStar,
    /// `kappa* > 0, kappa~* > 0`: unstable for every delay.
    UnstableAllDelays,
    /// `kappa* > 0, kappa~* < 0`: Hopf bifurcations in the delay.
    HopfAboveBetaStar,
}

impl Region {
    pub fn numeral(self) -> &'static str {
        match self {
            Region::StableAllDelays => "I",
            Region::HopfBelowBetaStar => "II",
            Region::UnstableAllDelays => "III",
            Region::HopfAboveBetaStar => "IV",
        }
    }

    pub fn is_hopf(self) -> bool {
        matches!(self, Region::HopfBelowBetaStar | Region::HopfAboveBetaStar)
    }

    pub fn beta_side(self) -> BetaSide {
        match self {
            Region::StableAllDelays | Region::HopfBelowBetaStar => BetaSide::Below,
            Region::UnstableAllDelays | Region::HopfAboveBetaStar => BetaSide::Above,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::StableAllDelays => "stable for all delays",
            Region::HopfBelowBetaStar => "Hopf, beta < beta*",
            Region::UnstableAllDelays => "unstable for all delays",
            Region::HopfAboveBetaStar => "Hopf, beta > beta*",
        };
        write!(f, "{} ({name})", self.numeral())
    }
}

/// Side of `beta*` on which the positive branch exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaSide {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub kappa_star: f64,
    pub kappa_tilde_star: f64,
    pub region: Region,
    pub beta_side: BetaSide,
}

pub fn classify(kappa_star: f64, kappa_tilde_star: f64) -> Result<StabilityReport> {
    classify_with_threshold(kappa_star, kappa_tilde_star, DEGENERACY_THRESHOLD)
}

pub fn classify_with_threshold(
    kappa_star: f64,
    kappa_tilde_star: f64,
    threshold: f64,
) -> Result<StabilityReport> {
    if !(kappa_star.abs() > threshold && kappa_tilde_star.abs() > threshold) {
        return Err(Error::Degenerate {
            kappa_star,
            kappa_tilde_star,
        });
    }
    let region = match (kappa_star < 0.0, kappa_tilde_star < 0.0) {
        (true, true) => Region::StableAllDelays,
        (true, false) => Region::HopfBelowBetaStar,
        (false, false) => Region::UnstableAllDelays,
        (false, true) => Region::HopfAboveBetaStar,
    };
    Ok(StabilityReport {
        kappa_star,
        kappa_tilde_star,
        region,
        beta_side: region.beta_side(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSteadyState {
    pub field: Vec<f64>,
    /// The first-order branch is positive on this side of `beta*`.
    pub positive: bool,
    /// `|beta - beta*| / beta*` exceeds [`FAR_FROM_CRITICAL`].
    pub far_from_critical: bool,
}

impl ApproxSteadyState {
    pub fn peak(&self) -> f64 {
        self.field.iter().fold(0.0, |m: f64, v| if v.abs() > m.abs() { *v } else { m })
    }
}

/// First-order steady state `theta4 phi* (beta - beta*) / kappa(beta*)`.
pub fn approx_steady_state(
    beta: f64,
    pair: &PrincipalPair,
    kappa_star: f64,
    th: &ThetaCoefficients,
) -> Result<ApproxSteadyState> {
    if kappa_star == 0.0 {
        return Err(Error::Degenerate {
            kappa_star,
            kappa_tilde_star: f64::NAN,
        });
    }
    let beta_star = pair.beta_star;
    let scale = th.theta4 * (beta - beta_star) / kappa_star;
    let field = pair.phi_star.iter().map(|p| scale * p).collect();
    let positive = (kappa_star < 0.0 && beta < beta_star) || (kappa_star > 0.0 && beta > beta_star);
    let far_from_critical = (beta - beta_star).abs() > FAR_FROM_CRITICAL * beta_star.abs();
    Ok(ApproxSteadyState {
        field,
        positive,
        far_from_critical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfConstants {
    /// `theta_{beta*}` in `(0, pi)`.
    pub theta_angle: f64,
    /// `l_{beta*} = sqrt(-kappa* kappa~*)`.
    pub l_star: f64,
}

pub fn hopf_constants(th: &ThetaCoefficients, beta_star: f64, qprime0: f64) -> Result<HopfConstants> {
    let ks = kappa(beta_star, th, qprime0);
    let kt = kappa_tilde(beta_star, th, qprime0);
    let report = classify(ks, kt)?;
    if !report.region.is_hopf() {
        return Err(Error::HopfNotApplicable(report.region.numeral()));
    }
    let arg = (beta_star * qprime0 * th.theta3 - th.theta1) / th.theta2;
    // -kappa* kappa~* > 0 is equivalent to |arg| < 1
    if !(arg.abs() <= 1.0) {
        return Err(Error::domain("arccos argument outside [-1, 1] despite mixed signs"));
    }
    Ok(HopfConstants {
        theta_angle: arg.acos(),
        l_star: (-ks * kt).sqrt(),
    })
}

/// `omega_beta = l* (beta - beta*) / kappa*`.
pub fn hopf_frequency(beta: f64, hc: &HopfConstants, kappa_star: f64, beta_star: f64) -> f64 {
    hc.l_star * (beta - beta_star) / kappa_star
}

/// Leading-order critical delays `tau_k = (theta + 2 k pi) / omega` for `k = 0..=k_max`.
pub fn critical_delays(
    beta: f64,
    hc: &HopfConstants,
    kappa_star: f64,
    beta_star: f64,
    k_max: usize,
) -> Result<Vec<f64>> {
    let omega = hopf_frequency(beta, hc, kappa_star, beta_star);
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::WrongSideOfBetaStar { omega });
    }
    Ok((0..=k_max)
        .map(|k| (hc.theta_angle + 2.0 * PI * k as f64) / omega)
        .collect())
}

/// Everything derived from the principal pair of one problem.
#[derive(Debug, Clone)]
pub struct Bifurcation {
    pub pair: PrincipalPair,
    pub thetas: ThetaCoefficients,
    pub qprime0: f64,
}

impl Bifurcation {
    pub fn new(problem: &Problem) -> Result<Self> {
        let pair = problem.principal_eigenpair()?;
        Ok(Self::from_pair(problem, pair))
    }

    pub fn from_pair(problem: &Problem, pair: PrincipalPair) -> Self {
        let thetas = compute_thetas(
            &pair.phi_star,
            problem.kernel(),
            problem.quadrature(),
            problem.params().proliferation_partials_at_zero(),
        );
        Self {
            pair,
            thetas,
            qprime0: problem.params().therapy_slope(),
        }
    }

    pub fn beta_star(&self) -> f64 {
        self.pair.beta_star
    }

    pub fn kappa(&self, beta: f64) -> f64 {
        kappa(beta, &self.thetas, self.qprime0)
    }

    pub fn kappa_star(&self) -> f64 {
        self.kappa(self.beta_star())
    }

    pub fn kappa_tilde_star(&self) -> f64 {
        kappa_tilde(self.beta_star(), &self.thetas, self.qprime0)
    }

    pub fn classify(&self) -> Result<StabilityReport> {
        classify(self.kappa_star(), self.kappa_tilde_star())
    }

    pub fn approx_steady_state(&self, beta: f64) -> Result<ApproxSteadyState> {
        approx_steady_state(beta, &self.pair, self.kappa_star(), &self.thetas)
    }

    pub fn hopf_constants(&self) -> Result<HopfConstants> {
        hopf_constants(&self.thetas, self.beta_star(), self.qprime0)
    }

    pub fn critical_delays(&self, beta: f64, k_max: usize) -> Result<Vec<f64>> {
        let hc = self.hopf_constants()?;
        critical_delays(beta, &hc, self.kappa_star(), self.beta_star(), k_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelSpec, ModelParams};
    use proptest::prelude::*;

    fn bif(params: ModelParams, n: usize) -> (Problem, Bifurcation) {
        let p = Problem::new(params, KernelSpec::SeparableSinSin, n).unwrap();
        let b = Bifurcation::new(&p).unwrap();
        (p, b)
    }

    // With phi* = sin x: int sin^3 = 4/3, int sin^2 = pi/2 and the separable
    // kernel gives int int sin^3 x sin^2 y = (4/3)(pi/2).
    fn analytic(params: &ModelParams) -> ThetaCoefficients {
        let (f1, f2) = params.proliferation_partials_at_zero();
        ThetaCoefficients {
            theta1: f1 * 4.0 / 3.0,
            theta2: f2 * 2.0 * PI / 3.0,
            theta3: 4.0 / 3.0,
            theta4: PI / 2.0,
        }
    }

    #[test]
    fn thetas_match_closed_forms() {
        for params in [ModelParams::stable_regime(), ModelParams::oscillatory_regime()] {
            // odd n puts a node at pi/2, so the sup-normalized phi* is sin x
            let (_, b) = bif(params, 199);
            let a = analytic(&params);
            assert!((b.thetas.theta1 - a.theta1).abs() < 1e-4);
            assert!((b.thetas.theta2 - a.theta2).abs() < 1e-4);
            assert!((b.thetas.theta3 - 4.0 / 3.0).abs() < 1e-6);
            assert!((b.thetas.theta4 - PI / 2.0).abs() < 1e-6);
        }
        let (_, b) = bif(ModelParams::stable_regime(), 199);
        assert!((b.thetas.theta1 - (-0.6533)).abs() < 1e-4);
        let (_, b) = bif(ModelParams::oscillatory_regime(), 199);
        assert!((b.thetas.theta2 - (-4.3982)).abs() < 1e-4);
    }

    #[test]
    fn kappa_values_stable_regime() {
        let (_, b) = bif(ModelParams::stable_regime(), 399);
        assert!((b.kappa(0.161) - (-0.46)).abs() < 0.002);
        assert!((b.kappa_star() - (-0.141)).abs() < 0.001);
        assert!((b.kappa_tilde_star() - (-0.099)).abs() < 0.001);
        let rep = b.classify().unwrap();
        assert_eq!(rep.region, Region::StableAllDelays);
        assert_eq!(rep.beta_side, BetaSide::Below);
        assert!(matches!(b.hopf_constants(), Err(Error::HopfNotApplicable("I"))));
    }

    #[test]
    fn kappa_values_oscillatory_regime() {
        let (_, b) = bif(ModelParams::oscillatory_regime(), 399);
        assert!((b.kappa(0.489) - (-1.079)).abs() < 0.002);
        assert!((b.kappa_star() - (-0.665)).abs() < 0.001);
        assert!((b.kappa_tilde_star() - 8.132).abs() < 0.002);
        assert_eq!(b.classify().unwrap().region, Region::HopfBelowBetaStar);

        let hc = b.hopf_constants().unwrap();
        // oracle: direct evaluation with the rounded published constants
        let angle = (-3.7333f64 / -4.3982).acos();
        assert!((hc.theta_angle - angle).abs() < 1e-3);
        assert!((hc.l_star - (0.665f64 * 8.132).sqrt()).abs() < 2e-3);

        let taus = b.critical_delays(0.489, 3).unwrap();
        let omega = 2.3254 * (0.489 - 0.8) / -0.665;
        assert!((omega - 1.0875).abs() < 1e-3);
        assert!((taus[0] - 0.5585 / omega).abs() < 0.01);
        assert!((taus[0] - 0.5136).abs() < 0.01);
        let w = hopf_frequency(0.489, &hc, b.kappa_star(), b.beta_star());
        for k in 1..taus.len() {
            assert!((taus[k] - taus[k - 1] - 2.0 * PI / w).abs() < 1e-12);
        }
        assert!(matches!(
            b.critical_delays(0.9, 0),
            Err(Error::WrongSideOfBetaStar { .. })
        ));
    }

    #[test]
    fn delays_diverge_near_beta_star() {
        let (_, b) = bif(ModelParams::oscillatory_regime(), 100);
        let near = b.critical_delays(b.beta_star() - 1e-6, 0).unwrap()[0];
        let far = b.critical_delays(b.beta_star() - 1e-2, 0).unwrap()[0];
        assert!(near > 1e3 * far);
        assert!(b.critical_delays(b.beta_star(), 0).is_err());
    }

    #[test]
    fn classify_regions_and_degeneracy() {
        assert_eq!(classify(-0.141, -0.099).unwrap().region, Region::StableAllDelays);
        assert_eq!(classify(-0.665, 8.132).unwrap().region, Region::HopfBelowBetaStar);
        let r = classify(1.0, 1.0).unwrap();
        assert_eq!(r.region, Region::UnstableAllDelays);
        assert_eq!(r.beta_side, BetaSide::Above);
        assert_eq!(classify(1.0, -1.0).unwrap().region, Region::HopfAboveBetaStar);
        assert!(matches!(classify(1e-12, 1.0), Err(Error::Degenerate { .. })));
        assert!(matches!(classify(-1.0, 0.0), Err(Error::Degenerate { .. })));
        assert!(classify(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn approx_steady_state_examples() {
        let (_, b) = bif(ModelParams::stable_regime(), 399);
        let at_star = b.approx_steady_state(b.beta_star()).unwrap();
        assert!(at_star.field.iter().all(|v| *v == 0.0));

        let s = b.approx_steady_state(0.39).unwrap();
        // oracle: the published constants plugged into the formula
        let expect = (PI / 2.0) * (0.39 - 0.4) / -0.141;
        assert!((s.peak() - expect).abs() < 0.002);
        assert!((s.peak() - 0.1114).abs() < 0.002);
        assert!(s.positive && !s.far_from_critical);

        let s = b.approx_steady_state(0.161).unwrap();
        assert!(s.positive && s.far_from_critical);
        assert!(s.field.iter().all(|v| *v > 0.0));
        assert!(!b.approx_steady_state(0.45).unwrap().positive);
    }

    #[test]
    fn right_angle_when_theta1_balances() {
        let th = ThetaCoefficients {
            theta1: -0.5,
            theta2: 2.0,
            theta3: 1.0,
            theta4: 1.0,
        };
        // beta* q'(0) theta3 = -0.5 = theta1
        let hc = hopf_constants(&th, 0.5, -1.0).unwrap();
        assert!((hc.theta_angle - PI / 2.0).abs() < 1e-15);
        assert!((hc.theta_angle.sin() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_tilde_equals_kappa_without_nonlocal_term() {
        let th = ThetaCoefficients {
            theta1: 0.3,
            theta2: 0.0,
            theta3: 1.3,
            theta4: 1.5,
        };
        assert_eq!(kappa(0.7, &th, -1.0), kappa_tilde(0.7, &th, -1.0));
    }

    #[test]
    fn theta2_grid_convergence() {
        let params = ModelParams::oscillatory_regime();
        // meshes with 200, 400 and 800 intervals
        let t: Vec<f64> = [199, 399, 799]
            .iter()
            .map(|&n| bif(params, n).1.thetas.theta2)
            .collect();
        let ratio = (t[0] - t[1]) / (t[1] - t[2]);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn normalization_invariance() {
        for params in [ModelParams::stable_regime(), ModelParams::oscillatory_regime()] {
            let (p, b) = bif(params, 150);
            for c in [0.5, 2.0] {
                let s = Bifurcation::from_pair(&p, b.pair.rescaled(c));
                let (t0, t1) = (b.thetas, s.thetas);
                let c3 = c * c * c;
                assert!((t1.theta1 - c3 * t0.theta1).abs() < 1e-10);
                assert!((t1.theta2 - c3 * t0.theta2).abs() < 1e-10);
                assert!((t1.theta3 - c3 * t0.theta3).abs() < 1e-10);
                assert!((t1.theta4 - c * c * t0.theta4).abs() < 1e-10);
                assert_eq!(s.classify().unwrap().region, b.classify().unwrap().region);
                let beta = 0.5 * b.beta_star();
                let (f0, f1) = (
                    b.approx_steady_state(beta).unwrap(),
                    s.approx_steady_state(beta).unwrap(),
                );
                for (x, y) in f0.field.iter().zip(&f1.field) {
                    assert!((x - y).abs() < 1e-10);
                }
                if let Ok(h0) = b.hopf_constants() {
                    let h1 = s.hopf_constants().unwrap();
                    assert!((h0.theta_angle - h1.theta_angle).abs() < 1e-10);
                    let (d0, d1) = (
                        b.critical_delays(beta, 4).unwrap(),
                        s.critical_delays(beta, 4).unwrap(),
                    );
                    for (x, y) in d0.iter().zip(&d1) {
                        assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
                    }
                }
            }
        }
    }

    fn thetas() -> impl Strategy<Value = ThetaCoefficients> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.1..3.0f64, 0.1..3.0f64).prop_map(|(a, b, c, d)| {
            ThetaCoefficients {
                theta1: a,
                theta2: b,
                theta3: c,
                theta4: d,
            }
        })
    }

    proptest! {
        #[test]
        fn kappa_is_affine(th in thetas(), b0 in 0.0..2.0f64, b1 in 0.0..2.0f64, q in -3.0..-0.1f64) {
            let lhs = kappa(b0, &th, q) - kappa(b1, &th, q);
            prop_assert!((lhs + (b0 - b1) * q * th.theta3).abs() < 1e-12);
        }

        #[test]
        fn kappa_identities(th in thetas(), bs in 0.0..2.0f64, q in -3.0..-0.1f64) {
            let k = kappa(bs, &th, q);
            let kt = kappa_tilde(bs, &th, q);
            prop_assert!((k - kt - 2.0 * th.theta2).abs() < 1e-12);
            prop_assert!((k + kt - 2.0 * (th.theta1 - bs * q * th.theta3)).abs() < 1e-12);
        }

        #[test]
        fn hopf_constants_where_defined(th in thetas(), bs in 0.0..2.0f64, q in -3.0..-0.1f64) {
            let k = kappa(bs, &th, q);
            let kt = kappa_tilde(bs, &th, q);
            match hopf_constants(&th, bs, q) {
                Ok(hc) => {
                    prop_assert!(k * kt < 0.0);
                    prop_assert!(hc.theta_angle > 0.0 && hc.theta_angle < PI);
                    prop_assert!(hc.l_star > 0.0);
                    let rel = (hc.l_star * hc.l_star + k * kt).abs() / (k * kt).abs();
                    prop_assert!(rel < 1e-12);
                }
                Err(_) => prop_assert!(k * kt >= 0.0 || k.abs() <= DEGENERACY_THRESHOLD || kt.abs() <= DEGENERACY_THRESHOLD),
            }
        }

        #[test]
        fn region_depends_only_on_signs(k in -10.0..10.0f64, kt in -10.0..10.0f64, s in 0.01..100.0f64) {
            prop_assume!(k.abs() > 1e-6 && kt.abs() > 1e-6);
            prop_assert_eq!(classify(k, kt).unwrap().region, classify(s * k, s * kt).unwrap().region);
        }

        #[test]
        fn delays_are_evenly_spaced(th in thetas(), q in -3.0..-0.1f64, frac in 0.05..0.95f64) {
            let bs = 0.8;
            if let Ok(hc) = hopf_constants(&th, bs, q) {
                let ks = kappa(bs, &th, q);
                let beta = if ks < 0.0 { bs * frac } else { bs * (1.0 + frac) };
                let taus = critical_delays(beta, &hc, ks, bs, 5).unwrap();
                let w = hopf_frequency(beta, &hc, ks, bs);
                for pair in taus.windows(2) {
                    prop_assert!(pair[1] > pair[0]);
                    prop_assert!((pair[1] - pair[0] - 2.0 * PI / w).abs() < 1e-9 * pair[1]);
                }
            }
        }
    }
}
