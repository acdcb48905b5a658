//! Method-of-lines integration of the damped quasilinear wave equation
//! `w_tt = (1 + w_x^2) w_xx - lambda w_t` on a truncated interval.
//!
//! Space: fourth-order centered differences, second-order next to the ends.
//! Time: classical RK4 on `(w, v = w_t)` with a fixed step set by the global
//! speed bound. The ends hold `w` at its initial value and `v = 0`.

pub mod history;
pub mod shock;
pub mod upwind;

use std::sync::Arc;

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{l, Damping};
use crate::numerics::simpson;
use crate::profiles::{delta_bound, Profile};

pub use history::History;
pub use shock::{refine_shock, detect_shock, GridShock, ShockEvent, ShockReport};

/// Uniform grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        ensure_finite("x_min", x_min)?;
        ensure_finite("x_max", x_max)?;
        if x_max <= x_min {
            return Err(Error::Invalid(format!(
                "grid needs x_max > x_min (got [{x_min}, {x_max}])"
            )));
        }
        if n < 16 {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                expected: ">= 16",
            });
        }
        Ok(Self {
            x_min,
            x_max,
            n,
            dx: (x_max - x_min) / (n - 1) as f64,
        })
    }

    /// Grid on `[-half_width, half_width]` with spacing as close to `dx` as an
    /// odd point count allows, so that `x = 0` is a node.
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::OutOfRange {
                name: "dx",
                value: dx,
                expected: "finite and > 0",
            });
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::OutOfRange {
                name: "x_max",
                value: half_width,
                expected: "finite and > 0",
            });
        }
        let cells = (half_width / dx).round().max(8.0) as usize;
        Self::new(-half_width, half_width, 2 * cells + 1)
    }

    /// Node position; measured from the midpoint so that symmetric grids
    /// are exactly antisymmetric in floating point.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let mid = 0.5 * (self.x_min + self.x_max);
        mid + (i as f64 - 0.5 * (self.n - 1) as f64) * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// Fields at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub grid: Grid1D,
}

impl SolverState {
    pub fn is_regular(&self) -> bool {
        self.w.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn slope(&self) -> Vec<f64> {
        let mut wx = vec![0.0; self.grid.n];
        let mut wxx = vec![0.0; self.grid.n];
        derivatives(&self.w, self.grid.dx, &mut wx, &mut wxx);
        wx
    }

    pub fn slope_and_curvature(&self) -> (Vec<f64>, Vec<f64>) {
        let mut wx = vec![0.0; self.grid.n];
        let mut wxx = vec![0.0; self.grid.n];
        derivatives(&self.w, self.grid.dx, &mut wx, &mut wxx);
        (wx, wxx)
    }
}

/// Half-width needed so that nothing reaches the ends before `t_end`:
/// the point where `|w0'|` falls below `1e-3` of its peak, plus `delta t_end`.
pub fn causal_reach(pr: &dyn Profile, t_end: f64) -> f64 {
    let tail = pr.tail_reach(1.0, 1e-3).abs().max(pr.tail_reach(-1.0, 1e-3).abs());
    tail + delta_bound(pr) * t_end
}

/// Samples the initial data: `w = w0`, `v = 0`, after checking that the grid
/// covers the causal reach for `t_end`.
pub fn initialize(pr: &dyn Profile, g: Grid1D, t_end: f64) -> Result<SolverState> {
    let required = causal_reach(pr, t_end);
    let half = (0.5 * (g.x_max - g.x_min)).min(g.x_max.abs()).min(g.x_min.abs());
    if half < required {
        return Err(Error::DomainTooSmall {
            half_width: half,
            required,
            t_end,
        });
    }
    Ok(initialize_unchecked(pr, g))
}

/// Samples the initial data without the domain-size check.
pub fn initialize_unchecked(pr: &dyn Profile, g: Grid1D) -> SolverState {
    SolverState {
        t: 0.0,
        w: (0..g.n).map(|i| pr.w0(g.x(i))).collect(),
        v: vec![0.0; g.n],
        grid: g,
    }
}

/// `cfl dx / delta` with the global speed bound of the profile.
pub fn stable_dt(s: &SolverState, pr: &dyn Profile, cfl: f64) -> Result<f64> {
    ensure_finite("cfl", cfl)?;
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::OutOfRange {
            name: "cfl",
            value: cfl,
            expected: "in (0, 1]",
        });
    }
    Ok(cfl * s.grid.dx / delta_bound(pr))
}

// Differences are written on symmetric pairs so that odd data stay exactly
// odd (and slopes exactly even) in floating point.
pub(crate) fn derivatives(w: &[f64], dx: f64, wx: &mut [f64], wxx: &mut [f64]) {
    let n = w.len();
    let h1 = 1.0 / (12.0 * dx);
    let h2 = 1.0 / (12.0 * dx * dx);
    for i in 2..n - 2 {
        let d1 = w[i + 1] - w[i - 1];
        let d2 = w[i + 2] - w[i - 2];
        wx[i] = (8.0 * d1 - d2) * h1;
        let s1 = w[i + 1] + w[i - 1];
        let s2 = w[i + 2] + w[i - 2];
        wxx[i] = (16.0 * s1 - s2 - 30.0 * w[i]) * h2;
    }
    for i in [1, n - 2] {
        wx[i] = (w[i + 1] - w[i - 1]) / (2.0 * dx);
        wxx[i] = (w[i + 1] + w[i - 1] - 2.0 * w[i]) / (dx * dx);
    }
    wx[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dx);
    wx[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * dx);
    wxx[0] = (2.0 * w[0] - 5.0 * w[1] + 4.0 * w[2] - w[3]) / (dx * dx);
    wxx[n - 1] = (2.0 * w[n - 1] - 5.0 * w[n - 2] + 4.0 * w[n - 3] - w[n - 4]) / (dx * dx);
}

/// Riemann fields on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannFields {
    pub r: Vec<f64>,
    pub l: Vec<f64>,
    pub eta: Vec<f64>,
}

/// `r = v - L(w_x)`, `l = v + L(w_x)`, `eta = r - l`.
pub fn riemann_fields(s: &SolverState) -> RiemannFields {
    let wx = s.slope();
    riemann_from(&s.v, &wx)
}

fn riemann_from(v: &[f64], wx: &[f64]) -> RiemannFields {
    let n = v.len();
    let mut r = Vec::with_capacity(n);
    let mut lf = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for i in 0..n {
        let big_l = l(wx[i]);
        r.push(v[i] - big_l);
        lf.push(v[i] + big_l);
        eta.push(-2.0 * big_l);
    }
    RiemannFields { r, l: lf, eta }
}

/// Energy, mass and field extrema at one instant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub max_abs_wx: f64,
    pub max_abs_wxx: f64,
    pub boundary_slope_error: f64,
}

pub fn diagnostics(s: &SolverState, pr: &dyn Profile) -> Diagnostics {
    let (wx, wxx) = s.slope_and_curvature();
    diagnostics_from(s, pr, &wx, &wxx)
}

fn energy_density(v: f64, wx: f64) -> f64 {
    0.5 * (v * v + wx * wx * (1.0 + wx * wx / 6.0))
}

fn diagnostics_from(s: &SolverState, pr: &dyn Profile, wx: &[f64], wxx: &[f64]) -> Diagnostics {
    let g = s.grid;
    let e: Vec<f64> = s.v.iter().zip(wx).map(|(&v, &sx)| energy_density(v, sx)).collect();
    let n = g.n;
    Diagnostics {
        t: s.t,
        energy: simpson(&e, g.dx),
        mass: simpson(&s.w, g.dx),
        max_abs_wx: wx.iter().fold(0.0, |m, x| m.max(x.abs())),
        max_abs_wxx: wxx[1..n - 1].iter().fold(0.0, |m, x| m.max(x.abs())),
        boundary_slope_error: (wx[0] - pr.w0_prime(g.x(0)))
            .abs()
            .max((wx[n - 1] - pr.w0_prime(g.x(n - 1))).abs()),
    }
}

/// Source term added to `v_t`; used for manufactured-solution checks.
pub type Forcing = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

struct Scratch {
    wx: Vec<f64>,
    wxx: Vec<f64>,
    kw: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    w_tmp: Vec<f64>,
    v_tmp: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            wx: z(),
            wxx: z(),
            kw: [z(), z(), z(), z()],
            kv: [z(), z(), z(), z()],
            w_tmp: z(),
            v_tmp: z(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn rhs(
    g: &Grid1D,
    lambda: f64,
    forcing: Option<&Forcing>,
    t: f64,
    w: &[f64],
    v: &[f64],
    wx: &mut [f64],
    wxx: &mut [f64],
    dw: &mut [f64],
    dv: &mut [f64],
) {
    let n = g.n;
    derivatives(w, g.dx, wx, wxx);
    for i in 1..n - 1 {
        dw[i] = v[i];
        dv[i] = (1.0 + wx[i] * wx[i]) * wxx[i] - lambda * v[i];
    }
    if let Some(src) = forcing {
        for (i, d) in dv.iter_mut().enumerate().take(n - 1).skip(1) {
            *d += src(t, g.x(i));
        }
    }
    dw[0] = 0.0;
    dw[n - 1] = 0.0;
    dv[0] = 0.0;
    dv[n - 1] = 0.0;
}

fn rk4_step(s: &mut SolverState, lambda: f64, dt: f64, forcing: Option<&Forcing>, sc: &mut Scratch) {
    let g = s.grid;
    let n = g.n;
    let t = s.t;
    let Scratch {
        wx,
        wxx,
        kw,
        kv,
        w_tmp,
        v_tmp,
    } = sc;
    let [kw1, kw2, kw3, kw4] = kw;
    let [kv1, kv2, kv3, kv4] = kv;
    rhs(&g, lambda, forcing, t, &s.w, &s.v, wx, wxx, kw1, kv1);
    for i in 0..n {
        w_tmp[i] = s.w[i] + 0.5 * dt * kw1[i];
        v_tmp[i] = s.v[i] + 0.5 * dt * kv1[i];
    }
    rhs(&g, lambda, forcing, t + 0.5 * dt, w_tmp, v_tmp, wx, wxx, kw2, kv2);
    for i in 0..n {
        w_tmp[i] = s.w[i] + 0.5 * dt * kw2[i];
        v_tmp[i] = s.v[i] + 0.5 * dt * kv2[i];
    }
    rhs(&g, lambda, forcing, t + 0.5 * dt, w_tmp, v_tmp, wx, wxx, kw3, kv3);
    for i in 0..n {
        w_tmp[i] = s.w[i] + dt * kw3[i];
        v_tmp[i] = s.v[i] + dt * kv3[i];
    }
    rhs(&g, lambda, forcing, t + dt, w_tmp, v_tmp, wx, wxx, kw4, kv4);
    let c = dt / 6.0;
    for i in 0..n {
        s.w[i] += c * (kw1[i] + 2.0 * kw2[i] + 2.0 * kw3[i] + kw4[i]);
        s.v[i] += c * (kv1[i] + 2.0 * kv2[i] + 2.0 * kv3[i] + kv4[i]);
    }
    s.t = t + dt;
}

/// One RK4 step as a pure function. A non-finite result is reported as an
/// error so callers can treat it as breakdown.
pub fn step(s: &SolverState, d: Damping, dt: f64) -> Result<SolverState> {
    let mut next = s.clone();
    let mut sc = Scratch::new(s.grid.n);
    rk4_step(&mut next, d.lambda(), dt, None, &mut sc);
    if next.is_regular() {
        Ok(next)
    } else {
        Err(Error::Numerical(format!(
            "non-finite field after step to t = {}",
            next.t
        )))
    }
}

/// Settings for [`Simulation::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Spacing of stored snapshots and diagnostics; `None` stores only the
    /// first and last states.
    pub snap_every: Option<f64>,
    /// Shock threshold on `dx * max |d_x r|`.
    pub blow_k: f64,
    pub stop_at_shock: bool,
    /// Record Riemann fields on this window every step.
    pub history_window: Option<(f64, f64)>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t_end: 6.0,
            snap_every: Some(0.5),
            blow_k: shock::DEFAULT_BLOW_K,
            stop_at_shock: true,
            history_window: None,
        }
    }
}

/// Everything produced by a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<SolverState>,
    pub diagnostics: Vec<Diagnostics>,
    /// Per step: `(t_mid, dE/dt + lambda * int v^2)`.
    pub energy_residual: Vec<(f64, f64)>,
    /// Per step: `(t, dx * max |d_x r|, |d_x l|)`.
    pub metric: Vec<(f64, f64, f64)>,
    pub shock: Option<ShockEvent>,
    pub final_state: SolverState,
    pub history: Option<History>,
    /// Largest `|r|`, `|l|` seen before the shock.
    pub max_riemann_pre_shock: f64,
}

/// A solver instance bound to a profile and a damping value.
impl RunOutput {
    /// Time at which the largest Riemann gradient first reaches `growth`
    /// times its initial value.
    pub fn growth_time(&self, growth: f64) -> Option<f64> {
        let series: Vec<(f64, f64)> = self.metric.iter().map(|&(t, a, b)| (t, a.max(b))).collect();
        let level = growth * series.first()?.1;
        upwind::first_crossing(&series, level)
    }
}

pub struct Simulation<'a> {
    profile: &'a dyn Profile,
    damping: Damping,
    state: SolverState,
    dt: f64,
    forcing: Option<Forcing>,
    scratch: Scratch,
}

impl<'a> Simulation<'a> {
    /// Checks the domain against the causal reach for `t_end`.
    pub fn new(pr: &'a dyn Profile, d: Damping, g: Grid1D, cfl: f64, t_end: f64) -> Result<Self> {
        let state = initialize(pr, g, t_end)?;
        let dt = stable_dt(&state, pr, cfl)?;
        Ok(Self {
            profile: pr,
            damping: d,
            state,
            dt,
            forcing: None,
            scratch: Scratch::new(g.n),
        })
    }

    /// Skips the domain check; meant for tests on small closed problems.
    pub fn new_unchecked(pr: &'a dyn Profile, d: Damping, g: Grid1D, cfl: f64) -> Result<Self> {
        let state = initialize_unchecked(pr, g);
        let dt = stable_dt(&state, pr, cfl)?;
        Ok(Self {
            profile: pr,
            damping: d,
            state,
            dt,
            forcing: None,
            scratch: Scratch::new(g.n),
        })
    }

    pub fn with_forcing(mut self, f: Forcing) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Advances by `dt` (or less to land on `t_stop`); false once a field is
    /// non-finite.
    pub fn advance(&mut self, dt: f64) -> bool {
        rk4_step(&mut self.state, self.damping.lambda(), dt, self.forcing.as_ref(), &mut self.scratch);
        self.state.is_regular()
    }

    pub fn run(mut self, opts: &RunOptions) -> Result<RunOutput> {
        ensure_finite("t_end", opts.t_end)?;
        if opts.t_end <= 0.0 {
            return Err(Error::OutOfRange {
                name: "t_end",
                value: opts.t_end,
                expected: "> 0",
            });
        }
        if !(opts.blow_k > 0.0 && opts.blow_k.is_finite()) {
            return Err(Error::OutOfRange {
                name: "blow_k",
                value: opts.blow_k,
                expected: "finite and > 0",
            });
        }
        if let Some(every) = opts.snap_every {
            if !(every > 0.0 && every.is_finite()) {
                return Err(Error::OutOfRange {
                    name: "snap_every",
                    value: every,
                    expected: "finite and > 0",
                });
            }
        }
        let g = self.state.grid;
        let n = g.n;
        let lambda = self.damping.lambda();
        let mut wx = vec![0.0; n];
        let mut wxx = vec![0.0; n];

        let mut history = match opts.history_window {
            Some((lo, hi)) => Some(History::new(&g, lo, hi, self.damping)?),
            None => None,
        };

        // Per-step observations of the current state.
        let observe = |s: &SolverState, wx: &mut [f64], wxx: &mut [f64]| {
            derivatives(&s.w, g.dx, wx, wxx);
            let rf = riemann_from(&s.v, wx);
            let m = shock::gradient_metric(&rf.r, &rf.l);
            let e: Vec<f64> = s.v.iter().zip(wx.iter()).map(|(&v, &sx)| energy_density(v, sx)).collect();
            let v2: Vec<f64> = s.v.iter().map(|v| v * v).collect();
            (rf, m, simpson(&e, g.dx), simpson(&v2, g.dx))
        };

        let mut snapshots = vec![self.state.clone()];
        let mut diags = vec![diagnostics(&self.state, self.profile)];
        let mut energy_residual = Vec::new();
        let mut metric = Vec::new();
        let (rf0, m0, mut e_prev, mut v2_prev) = observe(&self.state, &mut wx, &mut wxx);
        let mut max_riemann = sup_abs(&rf0.r).max(sup_abs(&rf0.l));
        metric.push((0.0, m0.0, m0.1));
        if let Some(h) = history.as_mut() {
            h.push(0.0, &rf0.r, &rf0.l);
        }
        let mut m_prev = m0.0.max(m0.1);
        let mut next_snap = opts.snap_every.unwrap_or(f64::INFINITY);
        let mut shock = None;
        let mut steps = 0usize;
        let dt_nominal = self.dt;

        while self.state.t < opts.t_end - 1e-12 * opts.t_end {
            let t0 = self.state.t;
            let dt = dt_nominal.min(opts.t_end - t0);
            let finite = self.advance(dt);
            steps += 1;
            let t1 = self.state.t;
            if !finite {
                shock = Some(ShockEvent {
                    t_star: t1,
                    x_star: vec![],
                    metric: f64::INFINITY,
                    nonfinite: true,
                    state: self.state.clone(),
                });
                break;
            }
            let (rf, m, e, v2) = observe(&self.state, &mut wx, &mut wxx);
            energy_residual.push((0.5 * (t0 + t1), (e - e_prev) / dt + lambda * 0.5 * (v2 + v2_prev)));
            e_prev = e;
            v2_prev = v2;
            metric.push((t1, m.0, m.1));
            if let Some(h) = history.as_mut() {
                h.push(t1, &rf.r, &rf.l);
            }
            let m_now = m.0.max(m.1);
            let crossed = shock.is_none() && m_now > opts.blow_k;
            if shock.is_none() && !crossed {
                max_riemann = max_riemann.max(sup_abs(&rf.r)).max(sup_abs(&rf.l));
            }
            if t1 >= next_snap - 1e-9 * dt {
                snapshots.push(self.state.clone());
                diags.push(diagnostics_from(&self.state, self.profile, &wx, &wxx));
                next_snap += opts.snap_every.unwrap_or(f64::INFINITY);
            }
            if crossed {
                let frac = (opts.blow_k - m_prev) / (m_now - m_prev);
                shock = Some(ShockEvent {
                    t_star: t0 + frac.clamp(0.0, 1.0) * dt,
                    x_star: shock::spike_positions(&g, &wxx),
                    metric: m_now,
                    nonfinite: false,
                    state: self.state.clone(),
                });
                if opts.stop_at_shock {
                    break;
                }
            }
            m_prev = m_now;
        }
        if snapshots.last().map(|s| s.t) != Some(self.state.t) {
            snapshots.push(self.state.clone());
            diags.push(diagnostics(&self.state, self.profile));
        }
        Ok(RunOutput {
            dt: dt_nominal,
            steps,
            snapshots,
            diagnostics: diags,
            energy_residual,
            metric,
            shock,
            final_state: self.state,
            history,
            max_riemann_pre_shock: max_riemann,
        })
    }
}

fn sup_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{FnProfile, KinkProfile, SupSearch};
    use std::f64::consts::PI;

    fn showcase() -> KinkProfile {
        KinkProfile::new(PI / 4.0, 0.5).unwrap()
    }

    fn linear(c: f64) -> FnProfile {
        FnProfile::new(move |x| c * x, move |_| c, (-l(c), -l(c)), SupSearch::default()).unwrap()
    }

    #[test]
    fn grid_validation_and_symmetry() {
        assert!(Grid1D::new(0.0, 1.0, 15).is_err());
        assert!(Grid1D::new(1.0, 0.0, 32).is_err());
        let g = Grid1D::symmetric(40.0, 0.01).unwrap();
        assert_eq!(g.n % 2, 1);
        for i in 0..g.n {
            assert_eq!(g.x(i), -g.x(g.n - 1 - i));
        }
        assert_eq!(g.x((g.n - 1) / 2), 0.0);
    }

    #[test]
    fn initial_state_examples() {
        let p = showcase();
        let g = Grid1D::symmetric(40.0, 0.01).unwrap();
        let s = initialize(&p, g, 6.0).unwrap();
        assert_eq!(s.w[(g.n - 1) / 2], 0.0);
        assert!(s.v.iter().all(|&v| v == 0.0));
        let d = diagnostics(&s, &p);
        assert!(d.mass.abs() < 1e-12);
        assert!(d.energy > 0.0 && d.energy.is_finite());
    }

    #[test]
    fn initial_energy_matches_quadrature_of_closed_form() {
        let p = showcase();
        let g = Grid1D::symmetric(40.0, 0.005).unwrap();
        let s = initialize(&p, g, 1.0).unwrap();
        let oracle = crate::numerics::integrate_adaptive(
            |x| {
                let s = p.w0_prime(x);
                0.5 * s * s * (1.0 + s * s / 6.0)
            },
            -40.0,
            40.0,
            1e-12,
        )
        .unwrap();
        let e = diagnostics(&s, &p).energy;
        assert!((e - oracle).abs() < 1e-7, "{e} vs {oracle}");
    }

    #[test]
    fn small_domain_rejected() {
        let p = showcase();
        let g = Grid1D::symmetric(10.0, 0.05).unwrap();
        match initialize(&p, g, 6.0) {
            Err(Error::DomainTooSmall { required, .. }) => assert!(required > 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stable_dt_examples() {
        let p = showcase();
        let g = Grid1D::new(-40.0, 40.0, 8001).unwrap();
        let s = initialize(&p, g, 1.0).unwrap();
        let dt = stable_dt(&s, &p, 0.5).unwrap();
        assert!((dt - 0.005 / 2f64.sqrt()).abs() < 1e-15);
        assert!(stable_dt(&s, &p, 0.0).is_err());
        assert!(stable_dt(&s, &p, 1.5).is_err());
        let flat = FnProfile::new(|_| 0.0, |_| 0.0, (0.0, 0.0), SupSearch::default()).unwrap();
        let s0 = initialize_unchecked(&flat, g);
        assert_eq!(stable_dt(&s0, &flat, 1.0).unwrap(), g.dx);
        let g2 = Grid1D::new(-40.0, 40.0, 4001).unwrap();
        let s2 = initialize_unchecked(&p, g2);
        assert!((stable_dt(&s2, &p, 0.5).unwrap() / dt - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_twist_is_stationary() {
        let p = linear(0.7);
        let g = Grid1D::new(-1.0, 1.0, 41).unwrap();
        let mut s = initialize_unchecked(&p, g);
        let w0 = s.w.clone();
        for _ in 0..200 {
            s = step(&s, Damping::new(0.3).unwrap(), 0.01).unwrap();
        }
        for (a, b) in s.w.iter().zip(&w0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.v.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn one_step_keeps_odd_symmetry() {
        let p = showcase();
        let g = Grid1D::symmetric(30.0, 0.02).unwrap();
        let mut s = initialize_unchecked(&p, g);
        for _ in 0..50 {
            s = step(&s, Damping::new(0.18).unwrap(), 0.007).unwrap();
        }
        for i in 0..g.n {
            assert_eq!(s.w[i], -s.w[g.n - 1 - i]);
            assert_eq!(s.v[i], -s.v[g.n - 1 - i]);
        }
    }

    #[test]
    fn riemann_fields_at_start() {
        let p = showcase();
        let g = Grid1D::symmetric(40.0, 0.005).unwrap();
        let s = initialize_unchecked(&p, g);
        let rf = riemann_fields(&s);
        for i in (0..g.n).step_by(97) {
            let x = g.x(i);
            assert!((rf.r[i] - p.r0(x)).abs() < 1e-6, "x {x}");
            assert_eq!(rf.l[i], -rf.r[i]);
            assert_eq!(rf.eta[i], 2.0 * rf.r[i]);
        }
    }

    #[test]
    fn overdamped_mode_matches_linear_theory() {
        // Small-amplitude sin mode on [-1, 1]; lambda well above the critical
        // value 2 pi, so the linear solution is a sum of two decaying exponentials.
        let amp = 1e-4;
        let lambda = 10.0;
        let kk = PI;
        let p = FnProfile::new(
            move |x| amp * (kk * x).sin(),
            move |x| amp * kk * (kk * x).cos(),
            (0.0, 0.0),
            SupSearch { lo: -1.0, hi: 1.0, points: 1000 },
        )
        .unwrap();
        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        let mut sim = Simulation::new_unchecked(&p, Damping::new(lambda).unwrap(), g, 0.5).unwrap();
        let mu = (lambda * lambda / 4.0 - kk * kk).sqrt();
        let (s1, s2) = (-lambda / 2.0 + mu, -lambda / 2.0 - mu);
        let exact = |t: f64| amp * (s2 * (s1 * t).exp() - s1 * (s2 * t).exp()) / (s2 - s1);
        let i = 150; // x = 0.5, peak of the mode
        let dt = sim.dt();
        let mut peak_v = Vec::new();
        for _ in 0..((2.0 / dt) as usize) {
            sim.advance(dt);
            peak_v.push(sim.state().v.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let t = sim.state().t;
        let got = sim.state().w[i];
        assert!((got - exact(t)).abs() < 1e-3 * exact(t).abs(), "{got} vs {}", exact(t));
        // After the initial kick the rate decays monotonically.
        let start = peak_v.len() / 4;
        for w in peak_v[start..].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    fn manufactured(lambda: f64) -> (impl Fn(f64, f64) -> f64, Forcing) {
        let a = 0.3;
        let w = move |t: f64, x: f64| a * t.cos() * (PI * x).sin();
        let src = move |t: f64, x: f64| {
            let wt = -a * t.sin() * (PI * x).sin();
            let wtt = -a * t.cos() * (PI * x).sin();
            let wx = a * PI * t.cos() * (PI * x).cos();
            let wxx = -a * PI * PI * t.cos() * (PI * x).sin();
            wtt - (1.0 + wx * wx) * wxx + lambda * wt
        };
        (w, Arc::new(src))
    }

    fn manufactured_error(n: usize, dt: Option<f64>, t_end: f64) -> f64 {
        let lambda = 0.4;
        let (exact, src) = manufactured(lambda);
        let p = FnProfile::new(
            move |x| 0.3 * (PI * x).sin(),
            move |x| 0.3 * PI * (PI * x).cos(),
            (0.0, 0.0),
            SupSearch { lo: -1.0, hi: 1.0, points: 1000 },
        )
        .unwrap();
        let g = Grid1D::new(-1.0, 1.0, n).unwrap();
        let mut sim = Simulation::new_unchecked(&p, Damping::new(lambda).unwrap(), g, 0.25)
            .unwrap()
            .with_forcing(src);
        if let Some(dt) = dt {
            sim = sim.with_dt(dt);
        }
        let steps = (t_end / sim.dt()).round() as usize;
        let dt = t_end / steps as f64;
        for _ in 0..steps {
            sim.advance(dt);
        }
        let s = sim.state();
        (0..n).map(|i| (s.w[i] - exact(t_end, g.x(i))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_solution_space_order() {
        let e1 = manufactured_error(41, Some(1e-3), 1.0);
        let e2 = manufactured_error(81, Some(1e-3), 1.0);
        let order = (e1 / e2).log2();
        assert!(order >= 2.0, "order {order} ({e1}, {e2})");
    }

    #[test]
    fn manufactured_solution_time_order() {
        // Fixed grid, reference run with a much smaller step isolates the
        // temporal error.
        let reference = {
            let lambda = 0.4;
            let (_, src) = manufactured(lambda);
            let p = FnProfile::new(
                |x| 0.3 * (PI * x).sin(),
                |x| 0.3 * PI * (PI * x).cos(),
                (0.0, 0.0),
                SupSearch { lo: -1.0, hi: 1.0, points: 1000 },
            )
            .unwrap();
            let g = Grid1D::new(-1.0, 1.0, 41).unwrap();
            let run = |dt: f64| {
                let mut sim = Simulation::new_unchecked(&p, Damping::new(lambda).unwrap(), g, 0.25)
                    .unwrap()
                    .with_forcing(src.clone());
                let steps = (1.0 / dt).round() as usize;
                for _ in 0..steps {
                    sim.advance(1.0 / steps as f64);
                }
                sim.state().w.clone()
            };
            let fine = run(1e-4);
            let err = |dt: f64| {
                run(dt)
                    .iter()
                    .zip(&fine)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            };
            (err(0.02), err(0.01))
        };
        let order = (reference.0 / reference.1).log2();
        assert!(order > 3.7 && order < 4.3, "order {order}");
    }

    #[test]
    fn flat_profile_never_shocks() {
        let flat = FnProfile::new(|_| 0.0, |_| 0.0, (0.0, 0.0), SupSearch::default()).unwrap();
        let g = Grid1D::symmetric(20.0, 0.05).unwrap();
        let out = Simulation::new(&flat, Damping::new(0.18).unwrap(), g, 0.5, 10.0)
            .unwrap()
            .run(&RunOptions {
                t_end: 10.0,
                ..RunOptions::default()
            })
            .unwrap();
        assert!(out.shock.is_none());
        assert!(out.final_state.w.iter().all(|&w| w == 0.0));
    }
}
