//! Parameter sets and bodies of the subcommands.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::format::{write_json, Cell, Csv};
use super::{resolved_config, CliError, Resolved};
use crate::characteristics::{check_envelopes, trace, CharTrace, EnvelopeOptions, EnvelopeReport};
use crate::error::Error;
use crate::estimator::{
    critical_time_estimate, default_alpha_grid, inviscid_tc, solve_tc_for_alpha, sweep as sweep_lambdas, Estimator,
    LambdaEstimate, ScanOptions,
};
use crate::kernels::{
    f_extremum, f_of_eta, inverse_l, k_of_eta, primitive_l, selection_weight_h, u1_of_eta, Damping,
};
use crate::numerics::{linspace, logspace};
use crate::profiles::{delta_bound, Family, KinkProfile, Profile};
use crate::solver::shock::combine;
use crate::solver::{refine_shock, riemann_fields, Grid1D, GridShock, RunOptions, ShockReport, Simulation};

type CliResult = Result<(), CliError>;

fn require(ok: bool, key: &str, value: impl std::fmt::Display, expected: &str) -> CliResult {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(format!("`{key}` = {value} is invalid: expected {expected}")))
    }
}

fn finite(key: &str, v: f64) -> CliResult {
    require(v.is_finite(), key, v, "a finite number")
}

fn positive(key: &str, v: f64) -> CliResult {
    require(v.is_finite() && v > 0.0, key, v, "a finite number > 0")
}

fn kink(kappa: f64, zeta: f64) -> Result<KinkProfile, CliError> {
    finite("kappa", kappa)?;
    require(kappa != 0.0, "kappa", kappa, "a nonzero amplitude")?;
    positive("zeta", zeta)?;
    Ok(KinkProfile::new(kappa, zeta)?)
}

fn prepare<P: Serialize>(command: &str, r: &Resolved<P>) -> CliResult {
    std::fs::create_dir_all(&r.output_dir).map_err(|e| {
        CliError::config(format!("`output_dir` {} cannot be created: {e}", r.output_dir.display()))
    })?;
    save_json(&r.output_dir.join("resolved_config.json"), &resolved_config(command, r))
}

fn save_csv(path: &Path, csv: &Csv) -> CliResult {
    csv.write(path)
        .map_err(|e| CliError::config(format!("`output_dir`: cannot write {}: {e}", path.display())))
}

fn save_json<T: Serialize>(path: &Path, v: &T) -> CliResult {
    write_json(path, v).map_err(|e| CliError::config(format!("`output_dir`: cannot write {}: {e}", path.display())))
}

fn print_summary(v: &Value) {
    println!("{}", serde_json::to_string(v).unwrap_or_default());
}

// ---------------------------------------------------------------- kernels

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelsParams {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_steps: usize,
}

impl Default for KernelsParams {
    fn default() -> Self {
        Self {
            eta_min: -10.0,
            eta_max: 10.0,
            eta_steps: 2001,
        }
    }
}

pub(super) fn kernels(r: Resolved<KernelsParams>) -> CliResult {
    let p = &r.params;
    finite("eta_min", p.eta_min)?;
    finite("eta_max", p.eta_max)?;
    require(p.eta_max > p.eta_min, "eta_max", p.eta_max, "a value above eta_min")?;
    require(p.eta_steps >= 2, "eta_steps", p.eta_steps, "at least 2")?;
    prepare("kernels", &r)?;
    let etas = linspace(p.eta_min, p.eta_max, p.eta_steps);
    let rows: Vec<[f64; 5]> = etas
        .par_iter()
        .map(|&e| -> Result<[f64; 5], Error> {
            Ok([e, u1_of_eta(e)?, k_of_eta(e)?, f_of_eta(e)?, selection_weight_h(e)?])
        })
        .collect::<Result<_, _>>()?;
    let mut csv = Csv::new(&["eta", "u1", "k", "f", "H"]);
    for row in &rows {
        csv.row(&row.map(Cell::Num));
    }
    save_csv(&r.output_dir.join("kernels.csv"), &csv)?;
    let (eta0, f0) = f_extremum();
    print_summary(&json!({"rows": rows.len(), "f_extremum_eta": eta0, "f_extremum_value": f0}));
    Ok(())
}

// ---------------------------------------------------------------- profile

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileParams {
    pub kappa: f64,
    pub zeta: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            kappa: PI / 4.0,
            zeta: 0.5,
            x_min: -10.0,
            x_max: 10.0,
            nx: 2001,
        }
    }
}

pub(super) fn profile(r: Resolved<ProfileParams>) -> CliResult {
    let p = &r.params;
    let pr = kink(p.kappa, p.zeta)?;
    finite("x_min", p.x_min)?;
    finite("x_max", p.x_max)?;
    require(p.x_max > p.x_min, "x_max", p.x_max, "a value above x_min")?;
    require(p.nx >= 2, "nx", p.nx, "at least 2")?;
    prepare("profile", &r)?;
    let mut csv = Csv::new(&["x", "w0", "w0p", "r0", "r0p"]);
    for x in linspace(p.x_min, p.x_max, p.nx) {
        csv.row(&[
            Cell::Num(x),
            Cell::Num(pr.w0(x)),
            Cell::Num(pr.w0_prime(x)),
            Cell::Num(pr.r0(x)),
            Cell::Num(pr.r0_prime(x)),
        ]);
    }
    save_csv(&r.output_dir.join("profile.csv"), &csv)?;
    print_summary(&json!({"rows": p.nx, "sup_norm_r0": pr.sup_norm_r0(), "delta": delta_bound(&pr)}));
    Ok(())
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateParams {
    pub kappa: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub alpha_min: f64,
    /// `None` picks the point where the Riemann datum has decayed.
    pub alpha_max: Option<f64>,
    pub alpha_steps: usize,
    pub t_scan_max: f64,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self {
            kappa: PI / 4.0,
            zeta: 0.5,
            lambda: 0.18,
            alpha_min: 1e-3,
            alpha_max: None,
            alpha_steps: 400,
            t_scan_max: 200.0,
        }
    }
}

fn alpha_grid(pr: &dyn Profile, min: f64, max: Option<f64>, steps: usize) -> Result<Vec<f64>, CliError> {
    positive("alpha_min", min)?;
    require(steps >= 2, "alpha_steps", steps, "at least 2")?;
    let max = match max {
        Some(m) => m,
        None => *default_alpha_grid(pr, 2).last().expect("two points"),
    };
    require(max.is_finite() && max > min, "alpha_max", max, "a finite value above alpha_min")?;
    Ok(logspace(min, max, steps))
}

fn scan_options(t_scan_max: f64) -> Result<ScanOptions, CliError> {
    positive("t_scan_max", t_scan_max)?;
    Ok(ScanOptions {
        t_scan_max,
        ..ScanOptions::default()
    })
}

fn estimate_json(e: &LambdaEstimate) -> Value {
    json!({
        "lambda": e.lambda,
        "t_hat_c": e.t_hat_c,
        "alpha_star": e.alpha_star,
        "family_star": e.family_star,
        "selection_residual": e.selection_residual,
        "accepted": e.accepted,
        "t_c_final": e.t_c_final,
        "note": e.note,
    })
}

pub(super) fn estimate(r: Resolved<EstimateParams>) -> CliResult {
    let p = &r.params;
    let pr = kink(p.kappa, p.zeta)?;
    finite("lambda", p.lambda)?;
    if p.lambda == 0.0 {
        return Err(CliError::config(
            "`lambda` = 0: the finite-damping estimate needs lambda > 0; the undamped closed form \
             is used by `sweep` (e.g. --lambda-min 0)",
        ));
    }
    require(p.lambda > 0.0, "lambda", p.lambda, "a value > 0")?;
    let grid = alpha_grid(&pr, p.alpha_min, p.alpha_max, p.alpha_steps)?;
    let opts = scan_options(p.t_scan_max)?;
    prepare("estimate", &r)?;
    let d = Damping::new(p.lambda)?;
    let est = Estimator::new(&pr, d);
    let rows = grid
        .par_iter()
        .map(|&a| match est.solve_tc(a, Family::Forward, &opts) {
            Ok(res) => Ok((a, res.t_c, res.selection_residual_at_tc, res.status.as_str())),
            Err(Error::Inadmissible { .. }) => Ok((a, None, None, "inadmissible")),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut csv = Csv::new(&["alpha", "t_c", "selection_residual", "status"]);
    for (a, t, s, status) in &rows {
        csv.row(&[Cell::Num(*a), Cell::Opt(*t), Cell::Opt(*s), Cell::Text(status)]);
    }
    save_csv(&r.output_dir.join("estimate.csv"), &csv)?;
    let summary = estimate_json(&critical_time_estimate(&pr, d, &grid, &opts)?);
    save_json(&r.output_dir.join("estimate.json"), &summary)?;
    print_summary(&summary);
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    pub kappa: f64,
    pub zeta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_steps: usize,
    pub alpha_min: f64,
    pub alpha_max: Option<f64>,
    pub alpha_steps: usize,
    pub t_scan_max: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            kappa: PI / 4.0,
            zeta: 0.5,
            lambda_min: 0.0,
            lambda_max: 0.25,
            lambda_steps: 26,
            alpha_min: 1e-3,
            alpha_max: None,
            alpha_steps: 400,
            t_scan_max: 200.0,
        }
    }
}

pub(super) fn sweep(r: Resolved<SweepParams>) -> CliResult {
    let p = &r.params;
    let pr = kink(p.kappa, p.zeta)?;
    require(p.lambda_min.is_finite() && p.lambda_min >= 0.0, "lambda_min", p.lambda_min, "a finite value >= 0")?;
    require(
        p.lambda_max.is_finite() && p.lambda_max >= p.lambda_min,
        "lambda_max",
        p.lambda_max,
        "a finite value >= lambda_min",
    )?;
    require(p.lambda_steps >= 1, "lambda_steps", p.lambda_steps, "at least 1")?;
    let grid = alpha_grid(&pr, p.alpha_min, p.alpha_max, p.alpha_steps)?;
    let opts = scan_options(p.t_scan_max)?;
    prepare("sweep", &r)?;
    let lambdas = if p.lambda_steps == 1 {
        vec![p.lambda_min]
    } else {
        linspace(p.lambda_min, p.lambda_max, p.lambda_steps)
    };
    let results = sweep_lambdas(&pr, &lambdas, &grid, &opts)?;
    let mut csv = Csv::new(&["lambda", "t_hat_c", "alpha_star", "selection_residual", "accepted"]);
    for e in &results {
        csv.row(&[
            Cell::Num(e.lambda),
            Cell::Num(e.t_hat_c),
            Cell::Opt(e.alpha_star),
            Cell::Opt(e.selection_residual),
            Cell::Bool(e.accepted),
        ]);
    }
    save_csv(&r.output_dir.join("sweep.csv"), &csv)?;
    // First damping value at which acceptance is lost.
    let flip = results
        .windows(2)
        .find(|w| w[0].accepted && !w[1].accepted)
        .map(|w| (w[0].lambda, w[1].lambda));
    let summary = json!({
        "lambdas": results.len(),
        "accepted_count": results.iter().filter(|e| e.accepted).count(),
        "last_accepted_lambda": flip.map(|f| f.0),
        "first_rejected_lambda": flip.map(|f| f.1),
    });
    save_json(&r.output_dir.join("sweep.json"), &summary)?;
    print_summary(&summary);
    Ok(())
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateParams {
    pub kappa: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub xmax: f64,
    pub nx: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub snap_every: f64,
    pub blow_k: f64,
    pub refine: usize,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            kappa: PI / 4.0,
            zeta: 0.5,
            lambda: 0.18,
            xmax: 40.0,
            nx: 4001,
            cfl: 0.5,
            t_end: 6.0,
            snap_every: 0.5,
            blow_k: crate::solver::shock::DEFAULT_BLOW_K,
            refine: 1,
        }
    }
}

struct SimSetup {
    pr: KinkProfile,
    d: Damping,
    grid: Grid1D,
    opts: RunOptions,
}

#[allow(clippy::too_many_arguments)]
fn sim_setup(
    kappa: f64,
    zeta: f64,
    lambda: f64,
    xmax: f64,
    nx: usize,
    cfl: f64,
    t_end: f64,
    snap_every: f64,
    blow_k: f64,
) -> Result<SimSetup, CliError> {
    let pr = kink(kappa, zeta)?;
    require(lambda.is_finite() && lambda >= 0.0, "lambda", lambda, "a finite value >= 0")?;
    positive("xmax", xmax)?;
    require(nx >= 17 && nx % 2 == 1, "nx", nx, "an odd count >= 17")?;
    require(cfl > 0.0 && cfl <= 1.0, "cfl", cfl, "a value in (0, 1]")?;
    positive("t_end", t_end)?;
    require(snap_every.is_finite() && snap_every >= 0.0, "snap_every", snap_every, "a finite value >= 0")?;
    positive("blow_k", blow_k)?;
    let grid = Grid1D::symmetric(xmax, 2.0 * xmax / (nx - 1) as f64)?;
    let reach = crate::solver::causal_reach(&pr, t_end);
    require(
        xmax >= reach,
        "xmax",
        xmax,
        &format!("at least the causal reach {reach:.6} for t_end = {t_end}"),
    )?;
    Ok(SimSetup {
        pr,
        d: Damping::new(lambda)?,
        grid,
        opts: RunOptions {
            t_end,
            snap_every: (snap_every > 0.0).then_some(snap_every),
            blow_k,
            stop_at_shock: true,
            history_window: None,
        },
    })
}

fn shock_json(rep: &ShockReport, nonfinite: bool) -> Value {
    json!({
        "detected": rep.detected,
        "t_star": rep.t_star,
        "x_star_positions": rep.x_star_positions,
        "criterion": rep.criterion,
        "grid_n": rep.grids_used.iter().map(|g| g.n).collect::<Vec<_>>(),
        "grid_dx": rep.grids_used.iter().map(|g| g.dx).collect::<Vec<_>>(),
        "grid_t_star": rep.grids_used.iter().map(|g| g.t_star).collect::<Vec<_>>(),
        "extrapolated": rep.extrapolated,
        "observed_order": rep.observed_order,
        "confirmed": rep.confirmed,
        "horizon": rep.horizon,
        "nonfinite": nonfinite,
    })
}

pub(super) fn simulate(r: Resolved<SimulateParams>) -> CliResult {
    let p = &r.params;
    let s = sim_setup(p.kappa, p.zeta, p.lambda, p.xmax, p.nx, p.cfl, p.t_end, p.snap_every, p.blow_k)?;
    require((1..=4).contains(&p.refine), "refine", p.refine, "between 1 and 4")?;
    prepare("simulate", &r)?;
    let out = Simulation::new(&s.pr, s.d, s.grid, p.cfl, p.t_end)?.run(&s.opts)?;

    let mut snaps = Csv::new(&["t", "x", "w", "wx", "wxx", "r", "l"]);
    for st in &out.snapshots {
        let (wx, wxx) = st.slope_and_curvature();
        let rf = riemann_fields(st);
        for i in 0..st.grid.n {
            snaps.row(&[
                Cell::Num(st.t),
                Cell::Num(st.grid.x(i)),
                Cell::Num(st.w[i]),
                Cell::Num(wx[i]),
                Cell::Num(wxx[i]),
                Cell::Num(rf.r[i]),
                Cell::Num(rf.l[i]),
            ]);
        }
    }
    save_csv(&r.output_dir.join("snapshots.csv"), &snaps)?;
    let mut diags = Csv::new(&["t", "E", "M", "max_wx", "max_wxx", "boundary_err"]);
    for d in &out.diagnostics {
        diags.row(&[
            Cell::Num(d.t),
            Cell::Num(d.energy),
            Cell::Num(d.mass),
            Cell::Num(d.max_abs_wx),
            Cell::Num(d.max_abs_wxx),
            Cell::Num(d.boundary_slope_error),
        ]);
    }
    save_csv(&r.output_dir.join("diagnostics.csv"), &diags)?;

    let mut grids = vec![GridShock {
        n: s.grid.n,
        dx: s.grid.dx,
        t_star: out.shock.as_ref().map(|e| e.t_star),
    }];
    let mut positions = out.shock.as_ref().map(|e| e.x_star.clone()).unwrap_or_default();
    if p.refine > 1 {
        let finer: Vec<f64> = (1..p.refine).map(|i| s.grid.dx / f64::powi(2.0, i as i32)).collect();
        let rep = refine_shock(&s.pr, s.d, p.xmax, &finer, p.cfl, &s.opts)?;
        grids.extend(rep.grids_used);
        positions = rep.x_star_positions;
    }
    let rep = combine(grids, positions, &s.opts);
    let nonfinite = out.shock.as_ref().is_some_and(|e| e.nonfinite);
    let summary = shock_json(&rep, nonfinite);
    save_json(&r.output_dir.join("shock.json"), &summary)?;
    print_summary(&summary);
    if nonfinite {
        return Err(CliError::numerical(format!(
            "fields became non-finite at t = {} before the gradient threshold was reached",
            out.shock.as_ref().map(|e| e.t_star).unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- characteristics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CharacteristicsParams {
    pub kappa: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub xmax: f64,
    pub nx: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub snap_every: f64,
    pub blow_k: f64,
    pub family: Family,
    pub origins: Vec<f64>,
}

impl Default for CharacteristicsParams {
    fn default() -> Self {
        let s = SimulateParams::default();
        Self {
            kappa: s.kappa,
            zeta: s.zeta,
            lambda: s.lambda,
            xmax: s.xmax,
            nx: s.nx,
            cfl: s.cfl,
            t_end: s.t_end,
            snap_every: 0.0,
            blow_k: s.blow_k,
            family: Family::Forward,
            origins: vec![0.21],
        }
    }
}

/// Fraction of the detected breakdown time up to which curves are traced.
pub const TRACE_FRACTION: f64 = 0.95;

pub(super) fn characteristics(r: Resolved<CharacteristicsParams>) -> CliResult {
    let p = &r.params;
    let mut s = sim_setup(p.kappa, p.zeta, p.lambda, p.xmax, p.nx, p.cfl, p.t_end, p.snap_every, p.blow_k)?;
    require(!p.origins.is_empty(), "origins", "[]", "at least one origin")?;
    for &o in &p.origins {
        require(o.is_finite() && o.abs() < p.xmax, "origins", o, "finite values inside (-xmax, xmax)")?;
    }
    prepare("characteristics", &r)?;
    let reach = delta_bound(&s.pr) * p.t_end + 1.0;
    let lo = p.origins.iter().copied().fold(f64::INFINITY, f64::min) - reach;
    let hi = p.origins.iter().copied().fold(f64::NEG_INFINITY, f64::max) + reach;
    s.opts.history_window = Some((lo.max(-p.xmax), hi.min(p.xmax)));
    s.opts.snap_every = None;
    let out = Simulation::new(&s.pr, s.d, s.grid, p.cfl, p.t_end)?.run(&s.opts)?;
    let h = out.history.as_ref().expect("history requested");
    let last = *h.times().last().expect("at least the initial frame");
    let t_trace = out
        .shock
        .as_ref()
        .map_or(p.t_end, |e| TRACE_FRACTION * e.t_star)
        .min(last);

    let traced: Vec<(CharTrace, Option<EnvelopeReport>)> = p
        .origins
        .par_iter()
        .map(|&o| {
            let tr = trace(h, &s.pr, p.family, o, t_trace)?;
            let rep = if p.family == Family::Forward {
                Some(check_envelopes(h, &tr, &s.pr, &EnvelopeOptions::default())?)
            } else {
                None
            };
            Ok((tr, rep))
        })
        .collect::<Result<_, Error>>()?;

    let mut csv = Csv::new(&["family", "origin", "t", "x", "eta", "pq", "c", "phi"]);
    for (tr, _) in &traced {
        for smp in &tr.samples {
            csv.row(&[
                Cell::Text(tr.family.as_str()),
                Cell::Num(tr.origin),
                Cell::Num(smp.t),
                Cell::Num(smp.x),
                Cell::Num(smp.eta),
                Cell::Num(smp.pq),
                Cell::Num(smp.c),
                Cell::Opt(smp.phi),
            ]);
        }
    }
    save_csv(&r.output_dir.join("characteristics.csv"), &csv)?;
    let reports: Vec<&EnvelopeReport> = traced.iter().filter_map(|(_, r)| r.as_ref()).collect();
    save_json(&r.output_dir.join("lemmas.json"), &reports)?;
    print_summary(&json!({
        "curves": traced.len(),
        "t_traced": t_trace,
        "t_star": out.shock.as_ref().map(|e| e.t_star),
        "all_pass": reports.iter().all(|r| r.all_pass),
    }));
    Ok(())
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {}

fn check(m: &mut Map<String, Value>, key: &str, pass: bool, value: f64) {
    m.insert(format!("{key}_pass"), Value::from(pass));
    m.insert(format!("{key}_value"), json!(value));
}

pub(super) fn verify(r: Resolved<VerifyParams>) -> CliResult {
    prepare("verify", &r)?;
    let mut m = Map::new();

    let (eta0, f0) = f_extremum();
    check(&mut m, "f_extremum_location", (eta0 - 1.80).abs() <= 0.01, eta0);
    check(&mut m, "f_extremum_value", (f0 - 0.22).abs() <= 0.005, f0);
    let k0 = k_of_eta(0.0)?;
    check(&mut m, "speed_at_rest", k0 == 1.0, k0);
    let roundtrip = linspace(-50.0, 50.0, 10_001)
        .iter()
        .map(|&u| Ok((inverse_l(primitive_l(u)?)? - u).abs()))
        .collect::<Result<Vec<f64>, Error>>()?
        .into_iter()
        .fold(0.0, f64::max);
    check(&mut m, "inverse_roundtrip", roundtrip <= 1e-12, roundtrip);

    let pr = KinkProfile::new(PI / 4.0, 0.5)?;
    let grid = default_alpha_grid(&pr, 400);
    let est = critical_time_estimate(&pr, Damping::new(0.18)?, &grid, &ScanOptions::default())?;
    check(&mut m, "headline_time", (est.t_hat_c - 5.1).abs() <= 0.15 && est.accepted, est.t_hat_c);
    let a_star = est.alpha_star.unwrap_or(f64::NAN);
    check(&mut m, "headline_origin", (a_star - 0.21).abs() <= 0.02, a_star);

    let mut worst: f64 = 0.0;
    for &a in &[0.1, 0.21, 0.5, 1.0] {
        let tc = solve_tc_for_alpha(&pr, Damping::new(1e-6)?, a, 200.0)?.t_c;
        let ti = inviscid_tc(&pr, a)?;
        worst = worst.max(tc.map_or(f64::INFINITY, |t| ((t - ti) / ti).abs()));
    }
    check(&mut m, "small_damping_limit", worst <= 1e-2, worst);

    let g = Grid1D::symmetric(30.0, 0.04)?;
    let out = Simulation::new(&pr, Damping::new(0.18)?, g, 0.5, 3.0)?.run(&RunOptions {
        t_end: 3.0,
        snap_every: Some(0.25),
        stop_at_shock: true,
        ..RunOptions::default()
    })?;
    let mass = out.diagnostics.iter().map(|d| d.mass.abs()).fold(0.0, f64::max);
    check(&mut m, "mass_conservation", mass < 1e-8, mass);
    let rise = out
        .diagnostics
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    check(&mut m, "energy_decay", rise <= 0.0, rise);

    let all = m.iter().filter(|(k, _)| k.ends_with("_pass")).all(|(_, v)| v == &Value::Bool(true));
    m.insert("all_pass".into(), Value::from(all));
    let summary = Value::Object(m);
    save_json(&r.output_dir.join("verify.json"), &summary)?;
    print_summary(&summary);
    if all {
        Ok(())
    } else {
        Err(CliError::numerical("verification failed; see verify.json"))
    }
}
