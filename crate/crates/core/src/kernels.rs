//! Scalar nonlinearities of the diagonalized twist-wave system.
//!
//! The wave speed as a function of slope is `Q(u) = sqrt(1 + u^2)`. Its
//! primitive `L` maps slopes to half the Riemann-invariant difference, and the
//! remaining kernels (`u1`, `k`, `f`, `H`) are functions of that difference
//! `eta = r - l = -2 L(w_x)`.

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::integrate_adaptive;

/// Dimensionless damping coefficient.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Damping {
    lambda: f64,
}

impl Damping {
    pub fn new(lambda: f64) -> Result<Self> {
        ensure_finite("lambda", lambda)?;
        if lambda < 0.0 {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: lambda,
                expected: ">= 0",
            });
        }
        Ok(Self { lambda })
    }

    pub fn inviscid() -> Self {
        Self { lambda: 0.0 }
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `A(t) = exp(lambda t / 2)`.
    pub fn amplification(&self, t: f64) -> Result<f64> {
        ensure_finite("t", t)?;
        if t < 0.0 {
            return Err(Error::OutOfRange {
                name: "t",
                value: t,
                expected: ">= 0",
            });
        }
        Ok(self.amp(t))
    }

    // Unchecked variant for hot loops where t is known to be valid.
    #[inline]
    pub(crate) fn amp(&self, t: f64) -> f64 {
        (0.5 * self.lambda * t).exp()
    }
}

/// Dimensional material parameters of the twist-wave problem.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalParams {
    /// Length scale.
    pub a: f64,
    /// Rotational viscosity.
    pub gamma1: f64,
    /// Moment-of-inertia density.
    pub sigma: f64,
    /// Twist elastic modulus.
    pub k22: f64,
}

/// Converts physical parameters to `(damping, characteristic time)`.
pub fn nondimensionalize(p: &PhysicalParams) -> Result<(Damping, f64)> {
    for (name, v) in [
        ("a", p.a),
        ("gamma1", p.gamma1),
        ("sigma", p.sigma),
        ("k22", p.k22),
    ] {
        ensure_finite(name, v)?;
        if v <= 0.0 {
            return Err(Error::OutOfRange {
                name,
                value: v,
                expected: "> 0",
            });
        }
    }
    let tau = 3f64.sqrt() * p.a * (p.sigma / p.k22).sqrt();
    let lambda = p.a * p.gamma1 * (3.0 / (p.sigma * p.k22)).sqrt();
    Ok((Damping::new(lambda)?, tau))
}

/// `Q(xi) = sqrt(1 + xi^2)`.
pub fn wave_speed(xi: f64) -> Result<f64> {
    ensure_finite("xi", xi)?;
    Ok(q(xi))
}

#[inline]
pub(crate) fn q(xi: f64) -> f64 {
    xi.hypot(1.0)
}

/// `L(u) = (u sqrt(1 + u^2) + asinh u) / 2`, the primitive of `Q` vanishing at 0.
pub fn primitive_l(u: f64) -> Result<f64> {
    ensure_finite("u", u)?;
    Ok(l(u))
}

#[inline]
pub(crate) fn l(u: f64) -> f64 {
    0.5 * (u * q(u) + u.asinh())
}

/// Inverse of `L` to relative tolerance 1e-12.
pub fn inverse_l(y: f64) -> Result<f64> {
    ensure_finite("y", y)?;
    let u = l_inv(y);
    if u.is_finite() {
        Ok(u)
    } else {
        Err(Error::Numerical(format!("inverse of L did not converge at {y}")))
    }
}

pub(crate) fn l_inv(y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let a = y.abs();
    // Both guesses sit above the root and L is convex on u >= 0, so the Newton
    // iterates decrease monotonically toward it.
    let mut u = if a <= 1.0 { a.sinh() } else { (2.0 * a).sqrt() };
    for _ in 0..100 {
        let step = (l(u) - a) / q(u);
        let next = u - step;
        if step.abs() <= 1e-15 * u.max(1e-300) || next >= u {
            u = next.min(u);
            break;
        }
        u = next;
    }
    y.signum() * u
}

/// `u1(eta) = L^{-1}(-eta / 2)`: the slope that produces the difference `eta`.
pub fn u1_of_eta(eta: f64) -> Result<f64> {
    ensure_finite("eta", eta)?;
    Ok(u1(eta))
}

#[inline]
pub(crate) fn u1(eta: f64) -> f64 {
    l_inv(-0.5 * eta)
}

/// Characteristic speed `k(eta) = Q(u1(eta))`.
pub fn k_of_eta(eta: f64) -> Result<f64> {
    ensure_finite("eta", eta)?;
    Ok(k(eta))
}

#[inline]
pub(crate) fn k(eta: f64) -> f64 {
    q(u1(eta))
}

/// `f(eta) = k'(eta) / sqrt(k(eta))`, evaluated as `-(u/2) / (1+u^2)^(5/4)`
/// with `u = u1(eta)`.
pub fn f_of_eta(eta: f64) -> Result<f64> {
    ensure_finite("eta", eta)?;
    Ok(f(eta))
}

#[inline]
pub(crate) fn f(eta: f64) -> f64 {
    let u = u1(eta);
    -0.5 * u / (1.0 + u * u).powf(1.25)
}

/// Magnitude of the extremum of `f`, attained at `u^2 = 2/3`.
pub fn f_extremum() -> (f64, f64) {
    let u = (2.0f64 / 3.0).sqrt();
    let eta = 2.0 * l(u);
    (eta, 0.5 * u / (1.0 + u * u).powf(1.25))
}

/// `H(eta) = int_0^eta k^{-1/2}`, the weight used by the selection rule.
pub fn selection_weight_h(eta: f64) -> Result<f64> {
    ensure_finite("eta", eta)?;
    integrate_adaptive(|s| 1.0 / k(s).sqrt(), 0.0, eta, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const L1: f64 = 1.147_793_574_696_319;

    #[test]
    fn wave_speed_examples() {
        assert_eq!(wave_speed(0.0).unwrap(), 1.0);
        assert!((wave_speed(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(wave_speed(-1.0).unwrap(), wave_speed(1.0).unwrap());
        assert!(wave_speed(f64::NAN).is_err());
    }

    #[test]
    fn primitive_matches_closed_form() {
        let expect = 0.5 * (2f64.sqrt() + (1.0 + 2f64.sqrt()).ln());
        assert!((primitive_l(1.0).unwrap() - expect).abs() < 1e-15);
        assert!((expect - L1).abs() < 1e-14);
        assert_eq!(primitive_l(-1.0).unwrap(), -primitive_l(1.0).unwrap());
    }

    #[test]
    fn inverse_roundtrip_at_unit_slope() {
        assert_eq!(inverse_l(0.0).unwrap(), 0.0);
        assert!((inverse_l(L1).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn u1_and_k_examples() {
        assert!((u1_of_eta(-2.0 * L1).unwrap() - 1.0).abs() < 1e-13);
        assert!((u1_of_eta(2.0 * L1).unwrap() + 1.0).abs() < 1e-13);
        assert_eq!(k_of_eta(0.0).unwrap(), 1.0);
        assert!((k_of_eta(2.0 * L1).unwrap() - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn f_at_unit_slope() {
        let expect = -0.5 / 2f64.powf(1.25);
        assert!((f_of_eta(-2.0 * L1).unwrap() - expect).abs() < 1e-14);
        assert!((expect + 0.210_224).abs() < 1e-6);
    }

    #[test]
    fn f_extremum_by_search() {
        let (eta, val) =
            crate::numerics::golden_max(|e| f(e).abs(), 0.0, 10.0, 1e-10);
        let (eta0, f0) = f_extremum();
        assert!((eta - eta0).abs() < 1e-6);
        assert!((val - f0).abs() < 1e-12);
        assert!((eta - 1.80).abs() < 0.01, "eta0 = {eta}");
        assert!((val - 0.22).abs() < 0.005, "f0 = {val}");
    }

    #[test]
    fn h_small_argument_and_derivative() {
        let h = selection_weight_h(0.01).unwrap();
        assert!((h - 0.01).abs() < 1e-6);
        assert_eq!(selection_weight_h(0.0).unwrap(), 0.0);
        let eta = 1.3;
        let mut errs = vec![];
        for step in [0.1, 0.05, 0.025] {
            let d = (selection_weight_h(eta + step).unwrap()
                - selection_weight_h(eta - step).unwrap())
                / (2.0 * step);
            errs.push((d - 1.0 / k(eta).sqrt()).abs());
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn h_against_slope_substitution() {
        // Substituting u = u1(s) gives ds = -2 Q(u) du, hence
        // H(eta) = -2 int_0^{u1(eta)} sqrt(Q(u)) du.
        for eta in [0.3, 1.0, 2.5, 7.0, -1.5] {
            let u_end = u1(eta);
            let oracle = -2.0 * integrate_adaptive(|u| q(u).sqrt(), 0.0, u_end, 1e-12).unwrap();
            assert!((selection_weight_h(eta).unwrap() - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn h_is_concave_for_positive_argument() {
        let hs: Vec<f64> = (0..40)
            .map(|i| selection_weight_h(0.25 * i as f64).unwrap())
            .collect();
        for w in hs.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
            assert!(w[2] > w[1]);
        }
    }

    #[test]
    fn amplification_examples() {
        let d = Damping::new(0.18).unwrap();
        assert_eq!(d.amplification(0.0).unwrap(), 1.0);
        // exp(0.459) = 1.5824907...
        assert!((d.amplification(5.1).unwrap() - 1.582_490_7).abs() < 1e-7);
        assert_eq!(Damping::inviscid().amplification(37.0).unwrap(), 1.0);
        assert!(d.amplification(-1.0).is_err());
        assert!(Damping::new(-0.1).is_err());
    }

    #[test]
    fn nondimensionalize_examples() {
        let unit = PhysicalParams {
            a: 1.0,
            gamma1: 1.0,
            sigma: 1.0,
            k22: 1.0,
        };
        let (d, tau) = nondimensionalize(&unit).unwrap();
        assert!((d.lambda() - 3f64.sqrt()).abs() < 1e-15);
        assert!((tau - 3f64.sqrt()).abs() < 1e-15);
        let (d2, tau2) = nondimensionalize(&PhysicalParams { sigma: 2.0, ..unit }).unwrap();
        assert!((d2.lambda() - d.lambda() / 2f64.sqrt()).abs() < 1e-14);
        assert!((tau2 - tau * 2f64.sqrt()).abs() < 1e-14);
        let (d3, _) = nondimensionalize(&PhysicalParams { gamma1: 1e-300, ..unit }).unwrap();
        assert!(d3.lambda() < 1e-299);
        assert!(nondimensionalize(&PhysicalParams { a: 0.0, ..unit }).is_err());
    }

    #[test]
    fn parity_on_symmetric_grid() {
        for i in 0..=400 {
            let x = -20.0 + 0.1 * i as f64;
            assert!((l(x) + l(-x)).abs() <= 1e-12 * l(x).abs().max(1.0));
            assert!((u1(x) + u1(-x)).abs() <= 1e-12 * u1(x).abs().max(1.0));
            assert!((k(x) - k(-x)).abs() <= 1e-12 * k(x));
            assert!((f(x) + f(-x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn u1_derivative_identity_converges_second_order() {
        for eta in [-3.0, -0.7, 0.4, 2.0, 6.0] {
            let exact = -0.5 / k(eta);
            let err = |h: f64| ((u1(eta + h) - u1(eta - h)) / (2.0 * h) - exact).abs();
            let (e1, e2) = (err(1e-2), err(5e-3));
            assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "eta {eta}: {e1} {e2}");
        }
    }

    #[test]
    fn roundtrip_on_ten_thousand_points() {
        use proptest::strategy::ValueTree;
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        for _ in 0..10_000 {
            let y = (-50.0..50.0f64).new_tree(&mut runner).unwrap().current();
            assert!((l(l_inv(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn roundtrip_within_tolerance(y in -1e6..1e6f64) {
            prop_assert!((l(l_inv(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }

        #[test]
        fn inverse_is_monotone(a in -100.0..100.0f64, b in -100.0..100.0f64) {
            if a < b {
                prop_assert!(l_inv(a) < l_inv(b));
            }
        }

        #[test]
        fn k_bound_chain(m in 0.0..20.0f64, s in -1.0..1.0f64) {
            let eta = 2.0 * m * s;
            let kk = k(eta);
            prop_assert!(kk >= 1.0);
            prop_assert!(kk <= k(2.0 * m) * (1.0 + 1e-15));
        }

        #[test]
        fn f_has_sign_of_eta(eta in -50.0..50.0f64) {
            if eta != 0.0 {
                prop_assert!(f(eta) * eta > 0.0);
            }
            let (_, f0) = f_extremum();
            prop_assert!(f(eta).abs() <= f0 + 1e-15);
        }
    }
}
