//! Small numerical building blocks shared by the modules: bracketing root
//! search, golden-section search, adaptive Gauss-Kronrod quadrature and
//! sampled-data quadrature rules.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` for a sign change of `g`. Stops when the bracket is
/// narrower than `tol` and returns the midpoint.
pub fn bisect<F: FnMut(f64) -> f64>(mut g: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() || !g_lo.is_finite() || !g_hi.is_finite() {
        return Err(Error::Numerical(format!(
            "no sign change on [{lo}, {hi}] ({g_lo}, {g_hi})"
        )));
    }
    // 200 halvings exhaust any f64 bracket.
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `g` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut g: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut gc = g(c);
    let mut gd = g(d);
    while (hi - lo).abs() > tol {
        if gc < gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - INV_PHI * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + INV_PHI * (hi - lo);
            gd = g(d);
        }
    }
    if gc < gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Golden-section search for a maximum.
pub fn golden_max<F: FnMut(f64) -> f64>(mut g: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|x| -g(x), lo, hi, tol);
    (x, -v)
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(g: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = g(center - dx) + g(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature to absolute tolerance `tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut g: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, eps, depth)) = stack.pop() {
        let (value, err) = gk15(&mut g, lo, hi);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
        if err <= eps || depth >= 48 {
            if err > eps {
                return Err(Error::Numerical(format!(
                    "quadrature did not reach tolerance {tol} on [{a}, {b}]"
                )));
            }
            total += value;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * eps, depth + 1));
            stack.push((mid, hi, 0.5 * eps, depth + 1));
        }
    }
    Ok(total)
}

/// Composite Simpson rule on uniformly spaced samples. An even sample count
/// closes the last interval with the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let m = if n % 2 == 1 { n } else { n - 1 };
            let mut odd = 0.0;
            let mut even = 0.0;
            for i in 1..m - 1 {
                if i % 2 == 1 {
                    odd += values[i];
                } else {
                    even += values[i];
                }
            }
            let mut s = h / 3.0 * (values[0] + values[m - 1] + 4.0 * odd + 2.0 * even);
            if m < n {
                s += 0.5 * h * (values[n - 2] + values[n - 1]);
            }
            s
        }
    }
}

/// Running trapezoid integral of samples `(t_i, y_i)`; output has the same
/// length as the input and starts at zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// `n` points from `lo` to `hi` inclusive, uniformly spaced.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive (`lo > 0`).
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Outcome of a three-level Richardson extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Richardson {
    pub value: f64,
    /// Observed order; `None` when the increments do not shrink monotonically
    /// and the finest value is returned unchanged.
    pub order: Option<f64>,
}

/// Richardson extrapolation from values on grids refined by `ratio`, ordered
/// coarse to fine.
pub fn richardson(coarse: f64, medium: f64, fine: f64, ratio: f64) -> Richardson {
    let d1 = medium - coarse;
    let d2 = fine - medium;
    if d2 == 0.0 {
        return Richardson {
            value: fine,
            order: None,
        };
    }
    let q = d1 / d2;
    if q > 1.0 {
        let order = q.ln() / ratio.ln();
        let value = fine + d2 / (ratio.powf(order) - 1.0);
        Richardson {
            value,
            order: Some(order),
        }
    } else {
        Richardson {
            value: fine,
            order: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_missing_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn golden_locates_parabola_vertex() {
        let (x, v) = golden_min(|x| (x - 0.3).powi(2) + 1.0, -2.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_kronrod_integrates_smooth_and_peaked() {
        let v = integrate_adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate_adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-9).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() < 1e-8);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.1;
        let ys: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&ys, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn richardson_recovers_first_order_limit() {
        // t(h) = 2 - 0.5 h
        let r = richardson(2.0 - 0.5 * 0.4, 2.0 - 0.5 * 0.2, 2.0 - 0.5 * 0.1, 2.0);
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.order.unwrap() - 1.0).abs() < 1e-12);
    }
}
