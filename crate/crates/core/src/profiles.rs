//! Initial twist profiles and the Riemann datum `r0 = -L(w0')` derived from
//! them, together with the speed bound and the origin admissibility tests
//! used by the estimator.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{k, l, q};
use crate::numerics::{golden_max, linspace};

/// Characteristic family: forward curves travel with speed `+k`, backward
/// curves with `-k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Forward,
    Backward,
}

impl Family {
    pub fn sign(self) -> f64 {
        match self {
            Family::Forward => 1.0,
            Family::Backward => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Forward => "forward",
            Family::Backward => "backward",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" | "+" => Ok(Family::Forward),
            "backward" | "-" => Ok(Family::Backward),
            other => Err(Error::Invalid(format!(
                "family must be `forward` or `backward`, got `{other}`"
            ))),
        }
    }
}

/// An initial twist profile `w0` and its Riemann datum.
pub trait Profile: Send + Sync {
    fn w0(&self, x: f64) -> f64;
    fn w0_prime(&self, x: f64) -> f64;

    fn r0(&self, x: f64) -> f64 {
        -l(self.w0_prime(x))
    }

    fn r0_prime(&self, x: f64) -> f64;

    /// `r0(+inf)` when `sign > 0`, `r0(-inf)` otherwise.
    fn r0_limit(&self, sign: f64) -> f64;

    /// `sup |r0|` over the real line.
    fn sup_norm_r0(&self) -> f64;

    /// True when `r0'` has a closed-form sign structure, so admissibility is
    /// decided exactly rather than by sampling.
    fn analytic_tail(&self) -> bool {
        false
    }

    /// True when `r0` is known to be even, so backward results mirror
    /// forward ones.
    fn is_even_r0(&self) -> bool {
        false
    }

    /// Closed-form admissibility when available. `None` falls back to
    /// sampling.
    fn admissible_exact(&self, _origin: f64, _family: Family) -> Option<bool> {
        None
    }

    /// Point beyond which `|w0'|` is below `rel` times its maximum, looking
    /// in direction `sign`. Used to size simulation domains.
    fn tail_reach(&self, sign: f64, rel: f64) -> f64 {
        let peak = (0..=2000)
            .map(|i| self.w0_prime(-1e3 + i as f64).abs())
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut x: f64 = 0.0;
        let mut step = 1e-2;
        while x.abs() < 1e7 {
            if self.w0_prime(sign * x).abs() < rel * peak
                && self.w0_prime(sign * (x + step)).abs() < rel * peak
            {
                return sign * x;
            }
            x += step;
            step *= 1.05;
        }
        sign * x
    }
}

/// The arctan kink `w0(x) = -(2 kappa / pi) atan(x / zeta)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KinkProfile {
    kappa: f64,
    zeta: f64,
}

impl KinkProfile {
    pub fn new(kappa: f64, zeta: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("zeta", zeta)] {
            ensure_finite(name, v)?;
            if v <= 0.0 {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: "> 0",
                });
            }
        }
        Ok(Self { kappa, zeta })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    // xi = -w0' = 2 kappa zeta / (pi (x^2 + zeta^2))
    fn xi(&self, x: f64) -> f64 {
        2.0 * self.kappa * self.zeta / (PI * (x * x + self.zeta * self.zeta))
    }

    fn xi_prime(&self, x: f64) -> f64 {
        let s = x * x + self.zeta * self.zeta;
        -(2.0 * self.kappa * self.zeta / PI) * 2.0 * x / (s * s)
    }
}

impl Profile for KinkProfile {
    fn w0(&self, x: f64) -> f64 {
        -(2.0 * self.kappa / PI) * (x / self.zeta).atan()
    }

    fn w0_prime(&self, x: f64) -> f64 {
        -self.xi(x)
    }

    fn r0(&self, x: f64) -> f64 {
        l(self.xi(x))
    }

    fn r0_prime(&self, x: f64) -> f64 {
        q(self.xi(x)) * self.xi_prime(x)
    }

    fn r0_limit(&self, _sign: f64) -> f64 {
        0.0
    }

    fn sup_norm_r0(&self) -> f64 {
        l(self.xi(0.0))
    }

    fn analytic_tail(&self) -> bool {
        true
    }

    fn is_even_r0(&self) -> bool {
        true
    }

    fn admissible_exact(&self, origin: f64, family: Family) -> Option<bool> {
        // r0 is positive, even, and strictly monotone on each half line with
        // vanishing limits, so every condition reduces to the sign of origin.
        Some(match family {
            Family::Forward => origin > 0.0,
            Family::Backward => origin < 0.0,
        })
    }

    fn tail_reach(&self, sign: f64, rel: f64) -> f64 {
        // |w0'| / max = zeta^2 / (x^2 + zeta^2)
        sign * self.zeta * (1.0 / rel - 1.0).max(0.0).sqrt()
    }
}

/// Kink Riemann datum `r0(x)` in closed form.
pub fn kink_r0(p: &KinkProfile, x: f64) -> f64 {
    p.r0(x)
}

/// Derivative of the kink Riemann datum.
pub fn kink_r0_prime(p: &KinkProfile, x: f64) -> f64 {
    p.r0_prime(x)
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Profile defined by user closures for `w0` and `w0'`. Asymptotic limits of
/// `r0` must be supplied; the sup-norm is found numerically.
#[derive(Clone)]
pub struct FnProfile {
    w0: Scalar,
    w0_prime: Scalar,
    limits: (f64, f64),
    sup_norm: f64,
}

/// Search bracket and sample count for sup-norms of generic profiles.
#[derive(Debug, Clone, Copy)]
pub struct SupSearch {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for SupSearch {
    fn default() -> Self {
        Self {
            lo: -1e3,
            hi: 1e3,
            points: 100_000,
        }
    }
}

impl FnProfile {
    /// `limits` is `(r0(-inf), r0(+inf))`.
    pub fn new<W, D>(w0: W, w0_prime: D, limits: (f64, f64), search: SupSearch) -> Result<Self>
    where
        W: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ensure_finite("r0(-inf)", limits.0)?;
        ensure_finite("r0(+inf)", limits.1)?;
        let w0_prime: Scalar = Arc::new(w0_prime);
        let r0 = |x: f64| l(-w0_prime(x)).abs();
        let sup_norm = sup_norm_search(r0, search).max(limits.0.abs()).max(limits.1.abs());
        ensure_finite("sup |r0|", sup_norm)?;
        Ok(Self {
            w0: Arc::new(w0),
            w0_prime,
            limits,
            sup_norm,
        })
    }
}

fn sup_norm_search<F: Fn(f64) -> f64>(g: F, s: SupSearch) -> f64 {
    let xs = linspace(s.lo, s.hi, s.points.max(3));
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        let v = g(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = xs[best_i.saturating_sub(1)];
    let hi = xs[(best_i + 1).min(xs.len() - 1)];
    let (_, refined) = golden_max(&g, lo, hi, 1e-12 * (1.0 + lo.abs().max(hi.abs())));
    best.max(refined)
}

impl Profile for FnProfile {
    fn w0(&self, x: f64) -> f64 {
        (self.w0)(x)
    }

    fn w0_prime(&self, x: f64) -> f64 {
        (self.w0_prime)(x)
    }

    fn r0_prime(&self, x: f64) -> f64 {
        // r0' = -Q(w0') w0'' with w0'' by a centered difference.
        let h = 1e-5 * (1.0 + x.abs());
        let d2 = ((self.w0_prime)(x + h) - (self.w0_prime)(x - h)) / (2.0 * h);
        -q((self.w0_prime)(x)) * d2
    }

    fn r0_limit(&self, sign: f64) -> f64 {
        if sign > 0.0 {
            self.limits.1
        } else {
            self.limits.0
        }
    }

    fn sup_norm_r0(&self) -> f64 {
        self.sup_norm
    }
}

/// Profile tabulated on a uniform grid and linearly interpolated; outside the
/// table `w0'` takes the boundary values.
#[derive(Debug, Clone)]
pub struct SampledProfile {
    x0: f64,
    dx: f64,
    w0: Vec<f64>,
    w0_prime: Vec<f64>,
    limits: (f64, f64),
    sup_norm: f64,
}

impl SampledProfile {
    /// Samples of `w0` and `w0'` on the uniform grid starting at `x0` with
    /// spacing `dx`. `limits` is `(r0(-inf), r0(+inf))`.
    pub fn new(x0: f64, dx: f64, w0: Vec<f64>, w0_prime: Vec<f64>, limits: (f64, f64)) -> Result<Self> {
        if w0.len() != w0_prime.len() || w0.len() < 2 {
            return Err(Error::Invalid(
                "sampled profile needs two equal-length tables of at least 2 points".into(),
            ));
        }
        ensure_finite("x0", x0)?;
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::OutOfRange {
                name: "dx",
                value: dx,
                expected: "> 0",
            });
        }
        if let Some(bad) = w0.iter().chain(&w0_prime).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                name: "profile sample",
                value: *bad,
            });
        }
        let sup_norm = w0_prime
            .iter()
            .map(|&s| l(-s).abs())
            .fold(limits.0.abs().max(limits.1.abs()), f64::max);
        Ok(Self {
            x0,
            dx,
            w0,
            w0_prime,
            limits,
            sup_norm,
        })
    }

    fn interp(&self, table: &[f64], x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        if s <= 0.0 {
            return table[0];
        }
        let last = table.len() - 1;
        if s >= last as f64 {
            return table[last];
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        table[i] * (1.0 - frac) + table[i + 1] * frac
    }
}

impl Profile for SampledProfile {
    fn w0(&self, x: f64) -> f64 {
        self.interp(&self.w0, x)
    }

    fn w0_prime(&self, x: f64) -> f64 {
        self.interp(&self.w0_prime, x)
    }

    fn r0_prime(&self, x: f64) -> f64 {
        let s = ((x - self.x0) / self.dx).floor();
        let last = (self.w0_prime.len() - 2) as f64;
        if s < 0.0 || s > last {
            return 0.0;
        }
        let i = s as usize;
        (l(-self.w0_prime[i + 1]) - l(-self.w0_prime[i])) / self.dx
    }

    fn r0_limit(&self, sign: f64) -> f64 {
        if sign > 0.0 {
            self.limits.1
        } else {
            self.limits.0
        }
    }

    fn sup_norm_r0(&self) -> f64 {
        self.sup_norm
    }
}

/// Global characteristic-speed bound `k(2 sup |r0|)`.
pub fn delta_bound(pr: &dyn Profile) -> f64 {
    k(2.0 * pr.sup_norm_r0())
}

/// How an admissibility verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckPath {
    Analytic,
    Sampled,
}

impl CheckPath {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckPath::Analytic => "analytic",
            CheckPath::Sampled => "sampled",
        }
    }
}

/// Sampling density for the tail condition on generic profiles.
#[derive(Debug, Clone, Copy)]
pub struct TailSampling {
    pub points: usize,
    pub reach: f64,
}

impl Default for TailSampling {
    fn default() -> Self {
        Self {
            points: 10_000,
            reach: 1e3,
        }
    }
}

/// Admissibility of `origin` for `family`, with the path used to decide it.
pub fn admissible_with(
    pr: &dyn Profile,
    origin: f64,
    family: Family,
    sampling: TailSampling,
) -> (bool, CheckPath) {
    if !origin.is_finite() {
        return (false, CheckPath::Analytic);
    }
    if let Some(v) = pr.admissible_exact(origin, family) {
        return (v, CheckPath::Analytic);
    }
    // Forward: sgn(r0'(a)(r0(a) + r0(+inf))) = -1, sgn(r0'(x) r0(a)) = -1 on
    // x >= a, and r0(a) r0(+inf) > 0 or r0(+inf) = 0. Backward mirrors with
    // +1 signs on x <= a.
    let s = family.sign();
    let ra = pr.r0(origin);
    let lim = pr.r0_limit(s);
    let rpa = pr.r0_prime(origin);
    let first = (rpa * (ra + lim)).signum() == -s && rpa != 0.0 && ra + lim != 0.0;
    let third = lim == 0.0 || ra * lim > 0.0;
    if !(first && third) || ra == 0.0 {
        return (false, CheckPath::Sampled);
    }
    let n = sampling.points.max(2);
    let tail_ok = (0..n).all(|i| {
        let x = origin + s * sampling.reach * i as f64 / (n - 1) as f64;
        (pr.r0_prime(x) * ra).signum() == -s
    });
    // Beyond the sampled window r0 must still be heading toward its limit.
    let far = pr.r0(origin + s * sampling.reach);
    let heading = (lim - far) * ra <= 0.0 || (far - lim).abs() <= 1e-12 * ra.abs();
    (tail_ok && heading, CheckPath::Sampled)
}

/// Forward admissibility of `alpha`.
pub fn admissible_forward(pr: &dyn Profile, alpha: f64) -> bool {
    admissible_with(pr, alpha, Family::Forward, TailSampling::default()).0
}

/// Backward admissibility of `beta`.
pub fn admissible_backward(pr: &dyn Profile, beta: f64) -> bool {
    admissible_with(pr, beta, Family::Backward, TailSampling::default()).0
}
