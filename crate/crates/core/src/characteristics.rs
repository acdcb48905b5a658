//! Characteristic curves traced through a recorded solution: positions, the
//! weighted Riemann derivatives carried along them, compression ratios, the
//! Riccati lower bound and checks of the pre-breakdown bounds.
//!
//! Curves are advanced with RK4 on the solver's own time levels; the middle
//! stage uses the average of the two neighbouring frames, and fields are
//! linearly interpolated in space.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::kernels::{f, k, Damping};
use crate::profiles::{delta_bound, Family, Profile};
use crate::solver::history::{Field, History};

/// One point on a traced curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharSample {
    pub t: f64,
    pub x: f64,
    pub eta: f64,
    /// Weighted derivative of the carried field (`p` on forward curves, `q`
    /// on backward ones) evaluated from the recorded field.
    pub pq: f64,
    /// The same quantity integrated along the curve from its exact initial
    /// value.
    pub pq_ode: f64,
    /// Weighted derivative of the other field at the same point.
    pub other: f64,
    /// Compression ratio.
    pub c: f64,
    /// Riccati bound; forward curves only, `None` once it has blown up.
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharTrace {
    pub family: Family,
    pub origin: f64,
    /// Exact weighted derivative at `t = 0`.
    pub pq0: f64,
    pub samples: Vec<CharSample>,
    /// Time at which the Riccati bound diverges, when it does so along the
    /// traced part of the curve.
    pub phi_blowup: Option<f64>,
}

fn own_field(family: Family) -> (Field, Field) {
    match family {
        Family::Forward => (Field::R, Field::L),
        Family::Backward => (Field::L, Field::R),
    }
}

/// Exact weighted derivative at `t = 0`: `sqrt(k(2 r0)) r0'` on forward
/// curves and `-sqrt(k(2 r0)) r0'` on backward ones (since `l0 = -r0`).
pub fn initial_pq(pr: &dyn Profile, family: Family, origin: f64) -> f64 {
    family.sign() * k(2.0 * pr.r0(origin)).sqrt() * pr.r0_prime(origin)
}

// Recorded fields at (frame blend, x): weight `w` on frame `n + 1`.
struct Probe<'a> {
    h: &'a History,
    own: Field,
    other: Field,
}

struct Local {
    eta: f64,
    d_own: f64,
    d_other: f64,
}

impl Probe<'_> {
    fn at(&self, n: usize, m: usize, w: f64, x: f64) -> Option<Local> {
        let one = |frame: usize| -> Option<Local> {
            Some(Local {
                eta: self.h.eta(frame, x)?,
                d_own: self.h.derivative(self.own, frame, x)?,
                d_other: self.h.derivative(self.other, frame, x)?,
            })
        };
        let a = one(n)?;
        if w == 0.0 || n == m {
            return Some(a);
        }
        let b = one(m)?;
        if w == 1.0 {
            return Some(b);
        }
        Some(Local {
            eta: (1.0 - w) * a.eta + w * b.eta,
            d_own: (1.0 - w) * a.d_own + w * b.d_own,
            d_other: (1.0 - w) * a.d_other + w * b.d_other,
        })
    }
}

fn frames_until(h: &History, t_end: f64) -> Result<usize> {
    let times = h.times();
    let last = *times.last().ok_or_else(|| Error::Invalid("empty history".into()))?;
    if t_end > last * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::Invalid(format!(
            "history ends at t = {last}, before the requested t_end = {t_end}"
        )));
    }
    Ok(times.iter().take_while(|&&t| t <= t_end * (1.0 + 1e-12) + 1e-12).count())
}

/// Traces the curve of `family` from `origin` up to the last recorded time
/// not beyond `t_end`.
pub fn trace(h: &History, pr: &dyn Profile, family: Family, origin: f64, t_end: f64) -> Result<CharTrace> {
    let d = h.damping();
    let lam = d.lambda();
    let sgn = family.sign();
    let (own, other) = own_field(family);
    let probe = Probe { h, own, other };
    let frames = frames_until(h, t_end)?;
    let times = h.times();
    let left = |t: f64| Error::LeftWindow { origin, t_exit: t };

    let pq0 = initial_pq(pr, family, origin);
    let mut x = origin;
    let mut y = pq0;
    let mut raw = Vec::with_capacity(frames);
    let record = |n: usize, x: f64, y: f64| -> Option<CharSample> {
        let t = times[n];
        let loc = probe.at(n, n, 0.0, x)?;
        let weight = d.amp(t) * k(loc.eta).sqrt();
        Some(CharSample {
            t,
            x,
            eta: loc.eta,
            pq: weight * loc.d_own,
            pq_ode: y,
            other: weight * loc.d_other,
            c: f64::NAN,
            phi: None,
        })
    };
    raw.push(record(0, x, y).ok_or_else(|| left(0.0))?);

    // Right-hand side of the (position, weighted derivative) system.
    let rhs = |n: usize, w: f64, t: f64, x: f64, y: f64| -> Option<(f64, f64)> {
        let loc = probe.at(n, n + 1, w, x)?;
        let a = d.amp(t);
        let other_pq = a * k(loc.eta).sqrt() * loc.d_other;
        Some((sgn * k(loc.eta), -0.5 * lam * other_pq - f(loc.eta) * y * y / a))
    };
    for n in 0..frames.saturating_sub(1) {
        let (t0, t1) = (times[n], times[n + 1]);
        let dt = t1 - t0;
        let tm = t0 + 0.5 * dt;
        let step = || -> Option<(f64, f64)> {
            let k1 = rhs(n, 0.0, t0, x, y)?;
            let k2 = rhs(n, 0.5, tm, x + 0.5 * dt * k1.0, y + 0.5 * dt * k1.1)?;
            let k3 = rhs(n, 0.5, tm, x + 0.5 * dt * k2.0, y + 0.5 * dt * k2.1)?;
            let k4 = rhs(n, 1.0, t1, x + dt * k3.0, y + dt * k3.1)?;
            Some((
                x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            ))
        };
        (x, y) = step().ok_or_else(|| left(t0))?;
        raw.push(record(n + 1, x, y).ok_or_else(|| left(t1))?);
    }

    let mut tr = CharTrace {
        family,
        origin,
        pq0,
        samples: raw,
        phi_blowup: None,
    };
    let cs = compression_ratio(&tr, pr, d);
    for (s, (_, c)) in tr.samples.iter_mut().zip(cs) {
        s.c = c;
    }
    if family == Family::Forward {
        let (phis, blow) = phi_series(&tr, d);
        for (s, p) in tr.samples.iter_mut().zip(phis) {
            s.phi = p;
        }
        tr.phi_blowup = blow;
    }
    Ok(tr)
}


/// Compression ratio along a trace,
/// `sqrt(k(eta) / k(2 r0)) exp(int A^-1 f(eta) pq dt)`, with the integral
/// accumulated by the trapezoid rule on the samples.
pub fn compression_ratio(tr: &CharTrace, pr: &dyn Profile, d: Damping) -> Vec<(f64, f64)> {
    let k0 = k(2.0 * pr.r0(tr.origin));
    let g = |s: &CharSample| f(s.eta) * s.pq / d.amp(s.t);
    let mut out = Vec::with_capacity(tr.samples.len());
    let mut acc = 0.0;
    for (i, s) in tr.samples.iter().enumerate() {
        if i > 0 {
            let p = &tr.samples[i - 1];
            acc += 0.5 * (s.t - p.t) * (g(p) + g(s));
        }
        out.push((s.t, (k(s.eta) / k0).sqrt() * acc.exp()));
    }
    out
}

// Riccati bound per sample and the interpolated blow-up time.
fn phi_series(tr: &CharTrace, d: Damping) -> (Vec<Option<f64>>, Option<f64>) {
    let p0 = tr.pq0.abs();
    let g = |s: &CharSample| f(s.eta) / d.amp(s.t);
    let mut out = Vec::with_capacity(tr.samples.len());
    let mut acc = 0.0;
    let mut den_prev = 1.0;
    let mut blow = None;
    for (i, s) in tr.samples.iter().enumerate() {
        if i > 0 {
            let p = &tr.samples[i - 1];
            acc += 0.5 * (s.t - p.t) * (g(p) + g(s));
        }
        let den = 1.0 - p0 * acc;
        if blow.is_none() && den <= 0.0 {
            let p = &tr.samples[i - 1];
            blow = Some(p.t + den_prev / (den_prev - den) * (s.t - p.t));
        }
        out.push(if blow.is_none() && tr.pq0 < 0.0 { Some(-p0 / den) } else { None });
        den_prev = den;
    }
    if tr.pq0 >= 0.0 {
        blow = None;
    }
    (out, blow)
}

/// Riccati lower bound `-|p0| / (1 - |p0| int A^-1 f(eta) dt)` along a
/// forward trace, ending where the denominator reaches zero.
pub fn phi_lower_bound(tr: &CharTrace, d: Damping) -> Vec<(f64, f64)> {
    if tr.family != Family::Forward {
        return vec![];
    }
    let (phis, _) = phi_series(tr, d);
    tr.samples
        .iter()
        .zip(phis)
        .map_while(|(s, p)| p.map(|p| (s.t, p)))
        .collect()
}

// One RK4 step of dx/dt = sign k(eta) between frames `n` and `m = n +- 1`.
fn step_position(h: &History, n: usize, m: usize, x: f64, sign: f64) -> Option<f64> {
    let times = h.times();
    let dt = times[m] - times[n];
    let speed = |w: f64, x: f64| -> Option<f64> {
        let a = h.eta(n, x)?;
        let e = if w == 0.0 { a } else { (1.0 - w) * a + w * h.eta(m, x)? };
        Some(sign * k(e))
    };
    let k1 = speed(0.0, x)?;
    let k2 = speed(0.5, x + 0.5 * dt * k1)?;
    let k3 = speed(0.5, x + 0.5 * dt * k2)?;
    let k4 = speed(1.0, x + dt * k3)?;
    Some(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

// Positions of the forward curve from `alpha` at every frame up to `frames`.
fn forward_positions(h: &History, alpha: f64, frames: usize) -> Result<Vec<f64>> {
    let mut xs = Vec::with_capacity(frames);
    let mut x = alpha;
    if !h.contains(x) {
        return Err(Error::LeftWindow { origin: alpha, t_exit: 0.0 });
    }
    xs.push(x);
    for n in 0..frames.saturating_sub(1) {
        x = step_position(h, n, n + 1, x, 1.0).ok_or(Error::LeftWindow {
            origin: alpha,
            t_exit: h.times()[n],
        })?;
        xs.push(x);
    }
    Ok(xs)
}

// Foot at t = 0 of the backward curve through (frame n, x).
fn backward_foot(h: &History, n: usize, x: f64, alpha: f64) -> Result<f64> {
    let mut x = x;
    for j in (1..=n).rev() {
        x = step_position(h, j, j - 1, x, -1.0).ok_or(Error::LeftWindow {
            origin: alpha,
            t_exit: h.times()[j],
        })?;
    }
    Ok(x)
}

/// Foot `beta(t, alpha)` of the backward curve through the point reached at
/// time `t` by the forward curve from `alpha`. `t` is rounded down to the
/// last recorded time.
pub fn beta_of_alpha(h: &History, t: f64, alpha: f64) -> Result<f64> {
    let frames = frames_until(h, t)?;
    let xs = forward_positions(h, alpha, frames)?;
    backward_foot(h, frames - 1, xs[frames - 1], alpha)
}

/// `(t, beta(t, alpha))` at every `stride`-th recorded time up to `t_end`
/// (the last one included).
pub fn beta_series(h: &History, alpha: f64, t_end: f64, stride: usize) -> Result<Vec<(f64, f64)>> {
    let frames = frames_until(h, t_end)?;
    let xs = forward_positions(h, alpha, frames)?;
    let mut idx: Vec<usize> = (0..frames).step_by(stride.max(1)).collect();
    if idx.last() != Some(&(frames - 1)) {
        idx.push(frames - 1);
    }
    idx.par_iter()
        .map(|&n| Ok((h.times()[n], backward_foot(h, n, xs[n], alpha)?)))
        .collect()
}

/// Relative gap between recorded and carried weighted derivatives below which
/// the recorded field still resolves the curve.
pub const RESOLVED_REL: f64 = 0.02;

#[derive(Debug, Clone, Copy)]
pub struct EnvelopeOptions {
    /// Check every `stride`-th sample of the trace.
    pub stride: usize,
    /// Allowed violation of the inequalities, for interpolation error.
    /// `None` uses `10 dx^2` of the recorded grid.
    pub tol: Option<f64>,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { stride: 10, tol: None }
    }
}

/// Outcome of the pre-breakdown checks along one forward curve. Margins are
/// the smallest slack of each inequality over the checked samples; a
/// negative margin is a violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub origin: f64,
    pub t_checked: f64,
    pub samples_checked: usize,
    pub tol: f64,
    /// `eta` stays between the lower and upper envelopes built from the
    /// traced backward foot.
    pub bounds_pass: bool,
    pub bounds_worst_margin: f64,
    /// `eta` keeps the sign of `2 r0(alpha)`.
    pub sign_pass: bool,
    pub sign_worst_margin: f64,
    /// `r0'(alpha) int q dt < 0` wherever the selection inequality holds.
    pub integral_q_pass: bool,
    pub integral_q_worst_margin: f64,
    pub integral_q_times: usize,
    /// `alpha <= beta <= alpha + 2 delta t`.
    pub beta_confined_pass: bool,
    pub beta_worst_margin: f64,
    /// `beta` strictly increasing in `t`.
    pub beta_increasing: bool,
    /// Compression ratio positive at every sample.
    pub compression_positive: bool,
    pub compression_min: f64,
    /// `p <= phi` wherever the selection inequality holds and `phi` is
    /// finite, for the carried `p`, and for the recorded `p` while it still
    /// matches the carried one within 2% (the resolved part of the curve).
    /// Margins are relative to `1 + |phi|`.
    pub comparison_pass: bool,
    pub comparison_worst_margin: f64,
    pub comparison_direct_worst_margin: f64,
    pub resolved_until: f64,
    pub phi_blowup: Option<f64>,
    pub all_pass: bool,
}

/// Lower and upper envelopes of `eta` along the forward curve from `alpha`,
/// given the backward foot `beta`.
pub fn eta_envelopes(pr: &dyn Profile, d: Damping, t: f64, alpha: f64, beta: f64) -> (f64, f64) {
    let ai = 1.0 / d.amp(t);
    let (ra, rb) = (pr.r0(alpha), pr.r0(beta));
    let common = ai * (rb + ra);
    (common + 2.0 * rb * (1.0 - ai), common + 2.0 * ra * (1.0 - ai))
}

/// Checks the envelope, sign, integral, foot-confinement, positivity and
/// comparison properties along a forward trace.
pub fn check_envelopes(
    h: &History,
    tr: &CharTrace,
    pr: &dyn Profile,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeReport> {
    if tr.family != Family::Forward {
        return Err(Error::Invalid("envelope checks apply to forward curves".into()));
    }
    let d = h.damping();
    let alpha = tr.origin;
    let tol = opts.tol.unwrap_or(10.0 * h.dx() * h.dx());
    let t_end = tr.samples.last().map(|s| s.t).unwrap_or(0.0);
    let stride = opts.stride.max(1);
    let betas = beta_series(h, alpha, t_end, stride)?;
    let delta = delta_bound(pr);
    let est = Estimator::new(pr, d);
    let r0a = pr.r0(alpha);
    let side = r0a.signum();
    let slope_sign = pr.r0_prime(alpha).signum();

    let mut bounds = f64::INFINITY;
    let mut sign = f64::INFINITY;
    let mut beta_margin = f64::INFINITY;
    let mut increasing = true;
    let mut prev_beta = f64::NEG_INFINITY;
    for (j, &(t, beta)) in betas.iter().enumerate() {
        let s = &tr.samples[(j * stride).min(tr.samples.len() - 1)];
        debug_assert!((s.t - t).abs() < 1e-12);
        let (lo, hi) = eta_envelopes(pr, d, t, alpha, beta);
        // For r0(alpha) < 0 the two envelopes swap roles.
        let m = if side >= 0.0 { (s.eta - lo).min(hi - s.eta) } else { (lo - s.eta).min(s.eta - hi) };
        bounds = bounds.min(m);
        sign = sign.min(side * s.eta);
        beta_margin = beta_margin.min((beta - alpha).min(alpha + 2.0 * delta * t - beta));
        if j > 0 && beta <= prev_beta {
            increasing = false;
        }
        prev_beta = beta;
    }

    let mut integral = f64::INFINITY;
    let mut integral_times = 0;
    let mut comparison = f64::INFINITY;
    let mut comparison_direct = f64::INFINITY;
    let mut resolved = true;
    let mut resolved_until = 0.0;
    let mut acc = 0.0;
    let mut c_min = f64::INFINITY;
    for (i, s) in tr.samples.iter().enumerate() {
        c_min = c_min.min(s.c);
        resolved = resolved && (s.pq - s.pq_ode).abs() <= RESOLVED_REL * s.pq_ode.abs();
        if resolved {
            resolved_until = s.t;
        }
        if i > 0 {
            let p = &tr.samples[i - 1];
            acc += 0.5 * (s.t - p.t) * (p.other + s.other);
        }
        let selection_holds = est.selection_residual(s.t, alpha, Family::Forward)? >= 0.0;
        if !selection_holds {
            continue;
        }
        if i > 0 {
            integral = integral.min(-slope_sign * acc);
            integral_times += 1;
        }
        if let Some(phi) = s.phi {
            // Derivative errors scale with the derivative itself.
            let scale = 1.0 + phi.abs();
            comparison = comparison.min((phi - s.pq_ode) / scale);
            if resolved {
                comparison_direct = comparison_direct.min((phi - s.pq) / scale);
            }
        }
    }
    let bounds_pass = bounds >= -tol;
    let sign_pass = sign > 0.0;
    let integral_q_pass = integral > 0.0;
    let beta_confined_pass = beta_margin >= -tol;
    let compression_positive = c_min > 0.0;
    let comparison_pass = comparison >= -tol && comparison_direct >= -tol;
    Ok(EnvelopeReport {
        origin: alpha,
        t_checked: t_end,
        samples_checked: betas.len(),
        tol,
        bounds_pass,
        bounds_worst_margin: bounds,
        sign_pass,
        sign_worst_margin: sign,
        integral_q_pass,
        integral_q_worst_margin: integral,
        integral_q_times: integral_times,
        beta_confined_pass,
        beta_worst_margin: beta_margin,
        beta_increasing: increasing,
        compression_positive,
        compression_min: c_min,
        comparison_pass,
        comparison_worst_margin: comparison,
        comparison_direct_worst_margin: comparison_direct,
        resolved_until,
        phi_blowup: tr.phi_blowup,
        all_pass: bounds_pass
            && sign_pass
            && integral_q_pass
            && beta_confined_pass
            && increasing
            && compression_positive
            && comparison_pass,
    })
}
