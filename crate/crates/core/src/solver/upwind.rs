//! First-order upwind integration of the diagonal system
//! `r_t + k r_x = -lambda (r + l) / 2`, `l_t - k l_x = -lambda (r + l) / 2`.
//! Kept as an independent check on the breakdown time of the main scheme.

use rayon::prelude::*;

use super::shock::gradient_metric;
use super::{causal_reach, GridShock, Grid1D};
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{k, Damping};
use crate::profiles::{delta_bound, Profile};

/// Per-step `(t, dx * max(|r_x|, |l_x|))` of the upwind run, starting at
/// `t = 0`; stops early on non-finite fields.
pub fn upwind_metric_series(
    pr: &dyn Profile,
    d: Damping,
    g: Grid1D,
    cfl: f64,
    t_end: f64,
) -> Result<Vec<(f64, f64)>> {
    ensure_finite("t_end", t_end)?;
    let required = causal_reach(pr, t_end);
    let half = g.x_max.abs().min(g.x_min.abs());
    if half < required {
        return Err(Error::DomainTooSmall {
            half_width: half,
            required,
            t_end,
        });
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::OutOfRange {
            name: "cfl",
            value: cfl,
            expected: "in (0, 1]",
        });
    }
    let n = g.n;
    let mut r: Vec<f64> = (0..n).map(|i| pr.r0(g.x(i))).collect();
    let mut l: Vec<f64> = r.iter().map(|x| -x).collect();
    let mut r_new = r.clone();
    let mut l_new = l.clone();
    let dt = cfl * g.dx / delta_bound(pr);
    let c = dt / g.dx;
    let lam = d.lambda();
    let mut t = 0.0;
    let metric = |r: &[f64], l: &[f64]| {
        let m = gradient_metric(r, l);
        m.0.max(m.1)
    };
    let mut series = vec![(0.0, metric(&r, &l))];
    while t < t_end {
        for i in 1..n - 1 {
            let speed = k(r[i] - l[i]);
            let damp = 0.5 * lam * (r[i] + l[i]);
            r_new[i] = r[i] - c * speed * (r[i] - r[i - 1]) - dt * damp;
            l_new[i] = l[i] + c * speed * (l[i + 1] - l[i]) - dt * damp;
        }
        std::mem::swap(&mut r, &mut r_new);
        std::mem::swap(&mut l, &mut l_new);
        t += dt;
        if r.iter().chain(&l).any(|x| !x.is_finite()) {
            series.push((t, f64::INFINITY));
            break;
        }
        series.push((t, metric(&r, &l)));
    }
    Ok(series)
}

/// First time a sampled series reaches `level`, linearly interpolated within
/// the step. `Some(t0)` when the first sample already does.
pub fn first_crossing(series: &[(f64, f64)], level: f64) -> Option<f64> {
    let (&(t0, m0), rest) = series.split_first()?;
    if m0 >= level {
        return Some(t0);
    }
    let mut prev = (t0, m0);
    for &(t, m) in rest {
        if m >= level {
            if !m.is_finite() {
                return Some(t);
            }
            return Some(prev.0 + (level - prev.1) / (m - prev.1) * (t - prev.0));
        }
        prev = (t, m);
    }
    None
}

/// Time at which `dx * max(|r_x|, |l_x|)` first exceeds `blow_k`, or `None`
/// by `t_end`.
pub fn upwind_shock_time(
    pr: &dyn Profile,
    d: Damping,
    g: Grid1D,
    cfl: f64,
    t_end: f64,
    blow_k: f64,
) -> Result<Option<f64>> {
    Ok(first_crossing(&upwind_metric_series(pr, d, g, cfl, t_end)?, blow_k))
}

/// Time at which the largest Riemann gradient first reaches `growth` times
/// its initial value. Unlike the `dx`-scaled threshold this level has a
/// grid-independent limit, so diffusive and centered schemes can be compared.
pub fn upwind_growth_time(
    pr: &dyn Profile,
    d: Damping,
    g: Grid1D,
    cfl: f64,
    t_end: f64,
    growth: f64,
) -> Result<Option<f64>> {
    let series = upwind_metric_series(pr, d, g, cfl, t_end)?;
    let level = growth * series[0].1;
    Ok(first_crossing(&series, level))
}

/// Upwind breakdown times on a sequence of symmetric grids.
pub fn upwind_refined(
    pr: &dyn Profile,
    d: Damping,
    half_width: f64,
    dxs: &[f64],
    cfl: f64,
    t_end: f64,
    blow_k: f64,
) -> Result<Vec<GridShock>> {
    dxs.par_iter()
        .map(|&dx| {
            let g = Grid1D::symmetric(half_width, dx)?;
            Ok(GridShock {
                n: g.n,
                dx: g.dx,
                t_star: upwind_shock_time(pr, d, g, cfl, t_end, blow_k)?,
            })
        })
        .collect()
}

/// Growth times on a sequence of grids (ratio 2, coarse to fine) and their
/// first-order extrapolation `2 t_fine - t_medium`, the scheme's known order.
pub fn upwind_growth_refined(
    pr: &dyn Profile,
    d: Damping,
    half_width: f64,
    dxs: &[f64],
    cfl: f64,
    t_end: f64,
    growth: f64,
) -> Result<(Vec<GridShock>, Option<f64>)> {
    let grids: Vec<GridShock> = dxs
        .par_iter()
        .map(|&dx| {
            let g = Grid1D::symmetric(half_width, dx)?;
            Ok(GridShock {
                n: g.n,
                dx: g.dx,
                t_star: upwind_growth_time(pr, d, g, cfl, t_end, growth)?,
            })
        })
        .collect::<Result<_>>()?;
    let extrapolated = match grids.as_slice() {
        [.., a, b] => match (a.t_star, b.t_star) {
            (Some(m), Some(f)) => Some(2.0 * f - m),
            _ => None,
        },
        _ => None,
    };
    Ok((grids, extrapolated))
}
