//! Scalar nonlinearities f, g, their primitives F, G and every f/g-derived
//! constant used by the linking estimates.
//!
//! Built-in families: pure powers, the log/arctan-switched f, and the
//! exponentially or arctan-damped g. Non-power primitives are integrated by
//! adaptive Simpson quadrature and cached on a log-log monotone-cubic table.
//! All constants are certified on a declared sampling range, recorded in
//! reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{adaptive_simpson, golden_min, logspace, pow_abs};

/// Certification range: constants and axiom checks sample |u| in
/// `[CERT_LO, CERT_HI]`, log-spaced, per sign.
pub const CERT_LO: f64 = 1e-8;
pub const CERT_HI: f64 = 1e4;
/// Log-spaced samples per sign used by constant certification.
pub const CERT_SAMPLES: usize = 4096;

const TABLE_NODES: usize = 2048;
const TABLE_HI: f64 = 2e4;
const QUAD_TOL: f64 = 1e-12;

/// Families for the leading nonlinearity f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FFamily {
    /// f(u) = |u|^{p-2} u
    Power,
    /// |u|^{q-2} u log(1+|u|^{p-q}) below the switch radius, C(1+arctan|u|)|u|^{p-2}u above
    LogArctan,
}

/// Families for the competing nonlinearity g.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GFamily {
    /// g(u) = |u|^{q-2} u
    Power,
    /// g(u) = |u|^{q-2} u / (1 + e^{|u|})
    ExpDamped,
    /// g(u) = |u|^{q-2} u / (1 + arctan|u|)
    ArctanDamped,
    /// g = 0
    Zero,
}

/// A pair (f, g) with exponents, switch radius and cached primitives.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    pub family_f: FFamily,
    pub family_g: GFamily,
    /// Superquadratic exponent of f, 2 < q < p.
    pub p: f64,
    /// Subcritical exponent of g.
    pub q: f64,
    /// Switch radius of the two-branch f (and the |u| >= rho estimates).
    pub rho: f64,
    /// Continuity constant of the two-branch f; derived, not user-set.
    matching_constant_c: f64,
    f_table: Option<LogLogTable>,
    g_table: Option<LogLogTable>,
}

impl NonlinearitySpec {
    /// Builds a spec and validates `2 < q < p` and `rho > 0`.
    pub fn new(family_f: FFamily, p: f64, family_g: GFamily, q: f64, rho: f64) -> Result<Self> {
        let spec = Self::new_unchecked(family_f, p, family_g, q, rho)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec without the exponent-ordering check, so that
    /// deliberately broken inputs can still be fed to [`verify_axioms`].
    pub fn new_unchecked(
        family_f: FFamily,
        p: f64,
        family_g: GFamily,
        q: f64,
        rho: f64,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidSpec(format!("rho must be positive, got {rho}")));
        }
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidSpec("exponents must be finite".into()));
        }
        let matching_constant_c = match family_f {
            FFamily::Power => 0.0,
            // continuity of the two branches at |u| = rho
            FFamily::LogArctan => {
                pow_abs(rho, q - p) * (1.0 + pow_abs(rho, p - q)).ln() / (1.0 + rho.atan())
            }
        };
        let mut spec = Self {
            family_f,
            family_g,
            p,
            q,
            rho,
            matching_constant_c,
            f_table: None,
            g_table: None,
        };
        if matches!(family_f, FFamily::LogArctan) {
            let s = spec.clone();
            // rho is a curvature breakpoint of the two-branch f; pin a node there
            spec.f_table = Some(LogLogTable::build(|u| s.f_raw(u), Some(rho)));
        }
        if matches!(spec.family_g, GFamily::ExpDamped | GFamily::ArctanDamped) {
            let s = spec.clone();
            spec.g_table = Some(LogLogTable::build(|u| s.g_raw(u), None));
        }
        Ok(spec)
    }

    /// Exponent ordering and positivity constraints.
    pub fn validate(&self) -> Result<()> {
        if !(2.0 < self.q && self.q < self.p) {
            return Err(Error::InvalidSpec(format!(
                "exponents must satisfy 2 < q < p, got q = {}, p = {}",
                self.q, self.p
            )));
        }
        Ok(())
    }

    /// The derived Example-(ii) continuity constant (0 for the power family).
    pub fn matching_constant(&self) -> f64 {
        self.matching_constant_c
    }

    fn f_raw(&self, u: f64) -> f64 {
        let a = u.abs();
        if a == 0.0 {
            return 0.0;
        }
        match self.family_f {
            FFamily::Power => pow_abs(u, self.p - 2.0) * u,
            FFamily::LogArctan => {
                if a < self.rho {
                    pow_abs(u, self.q - 2.0) * u * (1.0 + pow_abs(u, self.p - self.q)).ln_1p_safe()
                } else {
                    self.matching_constant_c * (1.0 + a.atan()) * pow_abs(u, self.p - 2.0) * u
                }
            }
        }
    }

    fn g_raw(&self, u: f64) -> f64 {
        let a = u.abs();
        if a == 0.0 {
            return 0.0;
        }
        match self.family_g {
            GFamily::Power => pow_abs(u, self.q - 2.0) * u,
            GFamily::ExpDamped => {
                let denom = 1.0 + a.exp();
                if denom.is_infinite() {
                    0.0
                } else {
                    pow_abs(u, self.q - 2.0) * u / denom
                }
            }
            GFamily::ArctanDamped => pow_abs(u, self.q - 2.0) * u / (1.0 + a.atan()),
            GFamily::Zero => 0.0,
        }
    }
}

// `ln(1 + (x - 1))` guard: the two-branch f computes ln(1 + |u|^{p-q}) where the
// inner power may overflow for extreme inputs; fall back gracefully.
trait Ln1pSafe {
    fn ln_1p_safe(self) -> f64;
}
impl Ln1pSafe for f64 {
    fn ln_1p_safe(self) -> f64 {
        if self.is_infinite() {
            f64::MAX.ln()
        } else {
            self.ln()
        }
    }
}

/// f(u) for the configured family. Total and odd.
pub fn eval_f(spec: &NonlinearitySpec, u: f64) -> f64 {
    spec.f_raw(u)
}

/// g(u) for the configured family. Total and odd.
pub fn eval_g(spec: &NonlinearitySpec, u: f64) -> f64 {
    spec.g_raw(u)
}

/// Primitive F(u) = int_0^u f, F(0) = 0, even.
pub fn eval_F(spec: &NonlinearitySpec, u: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return 0.0;
    }
    match spec.family_f {
        FFamily::Power => pow_abs(u, spec.p) / spec.p,
        FFamily::LogArctan => spec.f_table.as_ref().expect("f table").eval(a),
    }
}

/// Primitive G(u) = int_0^u g, G(0) = 0, even.
pub fn eval_G(spec: &NonlinearitySpec, u: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return 0.0;
    }
    match spec.family_g {
        GFamily::Power => pow_abs(u, spec.q) / spec.q,
        GFamily::Zero => 0.0,
        GFamily::ExpDamped | GFamily::ArctanDamped => {
            spec.g_table.as_ref().expect("g table").eval(a)
        }
    }
}

/// df/du, used by the Gauss-Newton polish.
pub fn eval_f_prime(spec: &NonlinearitySpec, u: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return 0.0;
    }
    match spec.family_f {
        FFamily::Power => (spec.p - 1.0) * pow_abs(u, spec.p - 2.0),
        FFamily::LogArctan => {
            let (p, q) = (spec.p, spec.q);
            if a < spec.rho {
                let w = pow_abs(u, p - q);
                (q - 1.0) * pow_abs(u, q - 2.0) * (1.0 + w).ln_1p_safe()
                    + (p - q) * pow_abs(u, p - 2.0) / (1.0 + w)
            } else {
                let c = spec.matching_constant_c;
                c * (p - 1.0) * (1.0 + a.atan()) * pow_abs(u, p - 2.0)
                    + c * pow_abs(u, p - 1.0) / (1.0 + a * a)
            }
        }
    }
}

/// dg/du, used by the Gauss-Newton polish.
pub fn eval_g_prime(spec: &NonlinearitySpec, u: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return 0.0;
    }
    let q = spec.q;
    match spec.family_g {
        GFamily::Power => (q - 1.0) * pow_abs(u, q - 2.0),
        GFamily::Zero => 0.0,
        GFamily::ExpDamped => {
            let e = a.exp();
            if e.is_infinite() {
                return 0.0;
            }
            let denom = 1.0 + e;
            (q - 1.0) * pow_abs(u, q - 2.0) / denom
                - pow_abs(u, q - 1.0) * e / (denom * denom)
        }
        GFamily::ArctanDamped => {
            let denom = 1.0 + a.atan();
            (q - 1.0) * pow_abs(u, q - 2.0) / denom
                - pow_abs(u, q - 1.0) / ((1.0 + a * a) * denom * denom)
        }
    }
}

/// Phi(u) = f(u)u/2 - F(u) + lambda G(u) - lambda g(u)u/2, the quantity
/// controlled by the Cerami-boundedness argument.
pub fn eval_phi(spec: &NonlinearitySpec, lambda: f64, u: f64) -> f64 {
    0.5 * eval_f(spec, u) * u - eval_F(spec, u) + lambda * eval_G(spec, u)
        - 0.5 * lambda * eval_g(spec, u) * u
}

/// sup over |t| <= rho of |Phi(t)|/t^2, by a log-spaced 1D scan.
/// Phi is even, so the positive side suffices.
pub fn phi_sup_ratio(spec: &NonlinearitySpec, lambda: f64, rho: f64) -> f64 {
    assert!(rho > 0.0);
    let mut sup: f64 = 0.0;
    for t in logspace(rho * 1e-9, rho, 2048) {
        sup = sup.max(eval_phi(spec, lambda, t).abs() / (t * t));
    }
    sup
}

/// The ratio g(rho)/f(rho), dominating |g/f| beyond rho.
pub fn g_over_f_at_rho(spec: &NonlinearitySpec) -> f64 {
    let f = eval_f(spec, spec.rho);
    if f == 0.0 {
        return 0.0;
    }
    eval_g(spec, spec.rho) / f
}

fn cert_grid() -> Vec<f64> {
    logspace(CERT_LO, CERT_HI, CERT_SAMPLES)
}

/// Smallest C on the certification range with |f(u)| <= eps|u| + C|u|^{p-1}.
pub fn growth_constant_f(spec: &NonlinearitySpec, eps: f64) -> Result<f64> {
    assert!(eps > 0.0);
    growth_constant(|u| eval_f(spec, u), spec.p, eps, true)
}

/// Smallest C on the certification range with |g(u)| <= eps|u| + C|u|^{q-1}.
/// The zero family yields 0.
pub fn growth_constant_g(spec: &NonlinearitySpec, eps: f64) -> Result<f64> {
    assert!(eps > 0.0);
    if matches!(spec.family_g, GFamily::Zero) {
        return Ok(0.0);
    }
    growth_constant(|u| eval_g(spec, u), spec.q, eps, false)
}

fn growth_constant(
    f: impl Fn(f64) -> f64,
    exponent: f64,
    eps: f64,
    error_if_zero: bool,
) -> Result<f64> {
    let grid = cert_grid();
    let ratio = |u: f64| ((f(u).abs() - eps * u).max(0.0)) / pow_abs(u, exponent - 1.0);
    let mut best = 0.0_f64;
    let mut best_k = 0usize;
    let mut max_abs_f = 0.0_f64;
    for (k, &u) in grid.iter().enumerate() {
        max_abs_f = max_abs_f.max(f(u).abs());
        let c = ratio(u);
        if c > best {
            best = c;
            best_k = k;
        }
    }
    if max_abs_f == 0.0 {
        return if error_if_zero {
            Err(Error::DegenerateNonlinearity)
        } else {
            Ok(0.0)
        };
    }
    // local refinement around the grid argmax
    let lo = grid[best_k.saturating_sub(1)];
    let hi = grid[(best_k + 1).min(grid.len() - 1)];
    if hi > lo {
        let (_, neg_max) = golden_min(|u| -ratio(u), lo, hi, (hi - lo) * 1e-10);
        best = best.max(-neg_max);
    }
    Ok(best)
}

/// C_{F,eps} = min over the certification range of A(u) = (F(u) + eps u^2)/|u|^q,
/// refined by golden-section search around the grid argmin. Strictly positive
/// for any f with (F3).
pub fn lower_constant_f(spec: &NonlinearitySpec, eps: f64) -> Result<f64> {
    assert!(eps > 0.0);
    let a_of = |u: f64| (eval_F(spec, u) + eps * u * u) / pow_abs(u, spec.q);
    let grid = cert_grid();
    let mut best = f64::INFINITY;
    let mut best_k = 0usize;
    for (k, &u) in grid.iter().enumerate() {
        let a = a_of(u);
        if a < best {
            best = a;
            best_k = k;
        }
    }
    let lo = grid[best_k.saturating_sub(1)];
    let hi = grid[(best_k + 1).min(grid.len() - 1)];
    if hi > lo {
        let (_, refined) = golden_min(a_of, lo, hi, (hi - lo) * 1e-12);
        best = best.min(refined);
    }
    if !(best > 0.0) {
        return Err(Error::NonCoerciveF { min: best });
    }
    Ok(best)
}

/// The bundle of certified constants at a fixed eps.
#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityConstants {
    pub eps: f64,
    /// C_eps of the f growth bound.
    pub c_f_growth: f64,
    /// C_{G,eps} of the g growth bound, raised to at least C_{F,eps}.
    pub c_g_growth: f64,
    /// C_{F,eps} of the lower bound F >= C|u|^q - eps u^2.
    pub c_f_lower: f64,
    /// g(rho)/f(rho).
    pub g_over_f_at_rho: f64,
    /// Range on which the constants were certified.
    pub certification_range: (f64, f64),
}

impl NonlinearityConstants {
    pub fn compute(spec: &NonlinearitySpec, eps: f64) -> Result<Self> {
        let c_f_growth = growth_constant_f(spec, eps)?;
        let c_f_lower = lower_constant_f(spec, eps)?;
        // we may assume C_{G,eps} >= C_{F,eps}
        let c_g_growth = growth_constant_g(spec, eps)?.max(c_f_lower);
        Ok(Self {
            eps,
            c_f_growth,
            c_g_growth,
            c_f_lower,
            g_over_f_at_rho: g_over_f_at_rho(spec),
            certification_range: (CERT_LO, CERT_HI),
        })
    }
}

/// Per-axiom verification flags, produced by dense sampling on the
/// certification range. Failures are reported, never thrown.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    /// 2 < q < p.
    pub exponent_ordering: bool,
    pub f_odd: bool,
    pub g_odd: bool,
    /// (F1): |f(u)| <= C (1 + |u|^{p-1}) with the reported constant.
    pub f_growth: bool,
    pub f_growth_constant: f64,
    /// (G1): |g(u)| <= C (1 + |u|^{q-1}).
    pub g_growth: bool,
    pub g_growth_constant: f64,
    /// (F2): f(u) = o(u) near 0.
    pub f_small_u: bool,
    /// (G2): g(u) = o(u) near 0.
    pub g_small_u: bool,
    /// (F3): F >= 0 and F(u)/|u|^q increasing beyond the range midpoint.
    pub f_superlinear: bool,
    /// (F4): f(u)/|u|^{q-1} nondecreasing on each sign.
    pub f_monotone_ratio: bool,
    /// (G3) part 1: g(u)/|u|^{q-1} nonincreasing on each sign.
    pub g_monotone_ratio: bool,
    /// (G3) part 2: g(u)u >= 0.
    pub g_sign: bool,
    /// (F5): c_lo |u|^{p-1} <= |f(u)| <= c_hi |u|^{p-1} for |u| >= rho.
    pub f_two_sided_power: bool,
    pub f5_lower_constant: f64,
    pub f5_upper_constant: f64,
    /// 0 <= qF(u) <= f(u)u.
    pub ar_f: bool,
    /// 0 <= g(u)u <= qG(u).
    pub ar_g: bool,
    pub certification_range: (f64, f64),
    pub samples_per_sign: usize,
    pub all_pass: bool,
}

/// Dense-sampling verification of (F1)-(F5), (G1)-(G3) and the AR-type
/// inequalities for the given spec.
pub fn verify_axioms(spec: &NonlinearitySpec, _lambda: f64) -> AxiomReport {
    let grid = cert_grid();
    let exponent_ordering = 2.0 < spec.q && spec.q < spec.p;

    let mut f_odd = true;
    let mut g_odd = true;
    for &u in grid.iter().step_by(7) {
        if eval_f(spec, -u) + eval_f(spec, u) != 0.0 {
            f_odd = false;
        }
        if eval_g(spec, -u) + eval_g(spec, u) != 0.0 {
            g_odd = false;
        }
    }

    // (F1)/(G1): report the smallest sampled constant; finite means pass.
    let mut f_growth_constant = 0.0_f64;
    let mut g_growth_constant = 0.0_f64;
    for &u in &grid {
        f_growth_constant =
            f_growth_constant.max(eval_f(spec, u).abs() / (1.0 + pow_abs(u, spec.p - 1.0)));
        g_growth_constant =
            g_growth_constant.max(eval_g(spec, u).abs() / (1.0 + pow_abs(u, spec.q - 1.0)));
    }
    let f_growth = f_growth_constant.is_finite();
    let g_growth = g_growth_constant.is_finite();

    // (F2)/(G2): f(u)/u below tolerance on the smallest decades.
    let small_tol = 1e-3;
    let small: Vec<f64> = logspace(CERT_LO, 1e-4, 512);
    let f_small_u = small.iter().all(|&u| (eval_f(spec, u) / u).abs() < small_tol);
    let g_small_u = small.iter().all(|&u| (eval_g(spec, u) / u).abs() < small_tol);

    // (F3): F >= 0 everywhere sampled; F/|u|^q nondecreasing beyond the
    // geometric midpoint of the range and growing by a factor >= 10.
    let mid = (CERT_LO * CERT_HI).sqrt();
    let mut f_nonneg = true;
    let mut tail: Vec<f64> = Vec::new();
    for &u in &grid {
        let fv = eval_F(spec, u);
        if fv < -1e-300 || eval_F(spec, -u) < -1e-300 {
            f_nonneg = false;
        }
        if u >= mid {
            tail.push(fv / pow_abs(u, spec.q));
        }
    }
    let f_superlinear = f_nonneg
        && nondecreasing(&tail)
        && tail.last().copied().unwrap_or(0.0) > 10.0 * tail.first().copied().unwrap_or(f64::MAX);

    // (F4)/(G3): monotonicity of the sign-side ratios via sorted differences.
    let f_ratio: Vec<f64> = grid.iter().map(|&u| eval_f(spec, u) / pow_abs(u, spec.q - 1.0)).collect();
    let g_ratio: Vec<f64> = grid.iter().map(|&u| eval_g(spec, u) / pow_abs(u, spec.q - 1.0)).collect();
    let f_ratio_neg: Vec<f64> = grid
        .iter()
        .rev()
        .map(|&u| eval_f(spec, -u) / pow_abs(u, spec.q - 1.0))
        .collect();
    let g_ratio_neg: Vec<f64> = grid
        .iter()
        .rev()
        .map(|&u| eval_g(spec, -u) / pow_abs(u, spec.q - 1.0))
        .collect();
    let f_monotone_ratio = nondecreasing(&f_ratio) && nondecreasing(&f_ratio_neg);
    let g_monotone_ratio = nonincreasing(&g_ratio) && nonincreasing(&g_ratio_neg);
    let g_sign = grid
        .iter()
        .all(|&u| eval_g(spec, u) * u >= 0.0 && eval_g(spec, -u) * -u >= 0.0);

    // (F5): two-sided power bound beyond rho with reported implicit constants.
    let mut f5_lower_constant = f64::INFINITY;
    let mut f5_upper_constant = 0.0_f64;
    for &u in grid.iter().filter(|&&u| u >= spec.rho) {
        let ratio = eval_f(spec, u).abs() / pow_abs(u, spec.p - 1.0);
        f5_lower_constant = f5_lower_constant.min(ratio);
        f5_upper_constant = f5_upper_constant.max(ratio);
    }
    let f_two_sided_power =
        f5_lower_constant.is_finite() && f5_lower_constant > 0.0 && f5_upper_constant.is_finite();

    // AR-type inequalities, with relative slack for table-backed primitives.
    let rel = 1e-6;
    let mut ar_f = true;
    let mut ar_g = true;
    for &u in &grid {
        let (fu, cap_f) = (spec.q * eval_F(spec, u), eval_f(spec, u) * u);
        if fu < -1e-300 || fu > cap_f * (1.0 + rel) + 1e-300 {
            ar_f = false;
        }
        let (gu, cap_g) = (eval_g(spec, u) * u, spec.q * eval_G(spec, u));
        if gu < -1e-300 || gu > cap_g * (1.0 + rel) + 1e-300 {
            ar_g = false;
        }
    }

    let all_pass = exponent_ordering
        && f_odd
        && g_odd
        && f_growth
        && g_growth
        && f_small_u
        && g_small_u
        && f_superlinear
        && f_monotone_ratio
        && g_monotone_ratio
        && g_sign
        && f_two_sided_power
        && ar_f
        && ar_g;

    AxiomReport {
        exponent_ordering,
        f_odd,
        g_odd,
        f_growth,
        f_growth_constant,
        g_growth,
        g_growth_constant,
        f_small_u,
        g_small_u,
        f_superlinear,
        f_monotone_ratio,
        g_monotone_ratio,
        g_sign,
        f_two_sided_power,
        f5_lower_constant,
        f5_upper_constant,
        ar_f,
        ar_g,
        certification_range: (CERT_LO, CERT_HI),
        samples_per_sign: CERT_SAMPLES,
        all_pass,
    }
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| {
        let slack = 1e-10 * w[0].abs().max(w[1].abs()).max(1e-300);
        w[1] >= w[0] - slack
    })
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| {
        let slack = 1e-10 * w[0].abs().max(w[1].abs()).max(1e-300);
        w[1] <= w[0] + slack
    })
}

/// Primitive cache: monotone cubic interpolation of ln F against ln u on
/// log-spaced nodes, with exponential extrapolation past either end.
#[derive(Debug, Clone)]
struct LogLogTable {
    ln_x: Vec<f64>,
    ln_y: Vec<f64>,
    slope: Vec<f64>,
}

impl LogLogTable {
    fn build(integrand: impl Fn(f64) -> f64, breakpoint: Option<f64>) -> Self {
        let mut nodes = logspace(CERT_LO, TABLE_HI, TABLE_NODES);
        if let Some(b) = breakpoint {
            if b > CERT_LO && b < TABLE_HI {
                nodes.push(b);
                nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
                nodes.dedup();
            }
        }
        let mut values = Vec::with_capacity(nodes.len());
        let mut acc = adaptive_simpson(&integrand, 0.0, nodes[0], QUAD_TOL);
        values.push(acc);
        for k in 1..nodes.len() {
            let coarse = 0.5
                * (integrand(nodes[k - 1]).abs() + integrand(nodes[k]).abs())
                * (nodes[k] - nodes[k - 1]);
            let tol = QUAD_TOL.max(1e-14 * (acc.abs() + coarse));
            acc += adaptive_simpson(&integrand, nodes[k - 1], nodes[k], tol);
            values.push(acc);
        }
        let ln_x: Vec<f64> = nodes.iter().map(|x| x.ln()).collect();
        let ln_y: Vec<f64> = values.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect();
        // exact nodal slopes d(ln F)/d(ln u) = u f(u)/F(u), clamped into the
        // Fritsch-Carlson region so the interpolant stays monotone
        let exact: Vec<f64> = nodes
            .iter()
            .zip(&values)
            .map(|(&u, &v)| u * integrand(u) / v.max(f64::MIN_POSITIVE))
            .collect();
        let slope = monotone_clamp(&ln_x, &ln_y, &exact);
        Self { ln_x, ln_y, slope }
    }

    fn eval(&self, x: f64) -> f64 {
        debug_assert!(x > 0.0);
        let lx = x.ln();
        let n = self.ln_x.len();
        if lx <= self.ln_x[0] {
            return (self.ln_y[0] + self.slope[0] * (lx - self.ln_x[0])).exp();
        }
        if lx >= self.ln_x[n - 1] {
            return (self.ln_y[n - 1] + self.slope[n - 1] * (lx - self.ln_x[n - 1])).exp();
        }
        let i = match self.ln_x.binary_search_by(|v| v.partial_cmp(&lx).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.ln_x[i + 1] - self.ln_x[i];
        let t = (lx - self.ln_x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let y = (2.0 * t3 - 3.0 * t2 + 1.0) * self.ln_y[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope[i]
            + (-2.0 * t3 + 3.0 * t2) * self.ln_y[i + 1]
            + (t3 - t2) * h * self.slope[i + 1];
        y.exp()
    }
}

/// Clamps exact nodal slopes into the Fritsch-Carlson monotone region
/// `0 <= d_i <= 3 min(delta_{i-1}, delta_i)` for nondecreasing data.
fn monotone_clamp(x: &[f64], y: &[f64], exact: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 3);
    let delta: Vec<f64> = y
        .windows(2)
        .zip(x.windows(2))
        .map(|(wy, wx)| (wy[1] - wy[0]) / (wx[1] - wx[0]))
        .collect();
    let mut d = exact.to_vec();
    for i in 0..n {
        let left = if i > 0 { delta[i - 1] } else { delta[0] };
        let right = if i < n - 1 { delta[i] } else { delta[n - 2] };
        let cap = 3.0 * left.min(right).max(0.0);
        d[i] = d[i].clamp(0.0, cap.max(0.0));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn power_pair() -> NonlinearitySpec {
        NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::Power, 3.0, 1.0).unwrap()
    }

    #[test]
    fn power_f_closed_forms() {
        let spec = power_pair();
        assert_eq!(eval_f(&spec, 2.0), 8.0);
        assert_eq!(eval_F(&spec, 2.0), 4.0);
        assert_eq!(eval_f(&spec, 0.0), 0.0);
    }

    #[test]
    fn exp_damped_value() {
        let spec =
            NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::ExpDamped, 3.0, 1.0).unwrap();
        let expected = 1.0 / (1.0 + std::f64::consts::E);
        assert!((eval_g(&spec, 1.0) - expected).abs() < 1e-15);
        assert!((expected - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn oddness_all_families() {
        let specs = [
            power_pair(),
            NonlinearitySpec::new(FFamily::LogArctan, 4.0, GFamily::ExpDamped, 3.0, 0.7).unwrap(),
            NonlinearitySpec::new(FFamily::LogArctan, 3.5, GFamily::ArctanDamped, 2.5, 1.3)
                .unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for spec in &specs {
            for _ in 0..10_000 {
                let u: f64 = rng.random_range(-50.0..50.0);
                assert_eq!(eval_f(spec, -u) + eval_f(spec, u), 0.0);
                assert_eq!(eval_g(spec, -u) + eval_g(spec, u), 0.0);
            }
        }
    }

    #[test]
    fn log_arctan_continuous_at_switch() {
        for &(p, q, rho) in &[(4.0, 3.0, 0.7), (3.2, 2.4, 2.0), (5.0, 2.2, 0.05)] {
            let spec =
                NonlinearitySpec::new(FFamily::LogArctan, p, GFamily::Zero, q, rho).unwrap();
            let below = pow_abs(rho, q - 2.0) * rho * (1.0 + pow_abs(rho, p - q)).ln();
            let above =
                spec.matching_constant() * (1.0 + rho.atan()) * pow_abs(rho, p - 2.0) * rho;
            assert!(
                ((below - above) / below).abs() < 1e-12,
                "branch mismatch at rho: {below} vs {above}"
            );
        }
    }

    #[test]
    fn primitive_consistency_finite_difference() {
        // central difference of F matches f to relative 1e-6 away from 0
        let specs = [
            power_pair(),
            NonlinearitySpec::new(FFamily::LogArctan, 4.0, GFamily::ExpDamped, 3.0, 0.7).unwrap(),
            NonlinearitySpec::new(FFamily::LogArctan, 3.4, GFamily::ArctanDamped, 2.6, 1.1)
                .unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for spec in &specs {
            for _ in 0..1000 {
                let exp10: f64 = rng.random_range(-3.0..3.0);
                let u = 10f64.powf(exp10) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let h = 1e-6 * u.abs().max(1e-4);
                let fd = (eval_F(spec, u + h) - eval_F(spec, u - h)) / (2.0 * h);
                let f = eval_f(spec, u);
                let denom = f.abs().max(1e-300);
                assert!(
                    (fd - f).abs() / denom < 1e-6,
                    "F' mismatch at u={u}: fd={fd}, f={f}"
                );
                // skip the saturated tail of the exp-damped g, where the
                // derivative is exponentially below the table resolution
                let saturated =
                    matches!(spec.family_g, GFamily::ExpDamped) && u.abs() > 6.0;
                let gd = (eval_G(spec, u + h) - eval_G(spec, u - h)) / (2.0 * h);
                let g = eval_g(spec, u);
                if g.abs() > 1e-290 && !saturated {
                    assert!(
                        (gd - g).abs() / g.abs() < 1e-6,
                        "G' mismatch at u={u}: gd={gd}, g={g}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_closed_forms() {
        let spec = power_pair();
        // lambda = 0: Phi(u) = u^4/4
        assert!((eval_phi(&spec, 0.0, 2.0) - 4.0).abs() < 1e-14);
        assert_eq!(eval_phi(&spec, 0.3, 0.0), 0.0);
        // p=4, q=3, lambda=0.1 at u=1: 1/4 + 0.1/3 - 0.05
        let expected = 0.25 + 0.1 / 3.0 - 0.05;
        assert!((eval_phi(&spec, 0.1, 1.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn growth_constants_power_families() {
        let spec = power_pair();
        for &eps in &[0.1, 0.5, 2.0] {
            let c = growth_constant_f(&spec, eps).unwrap();
            assert!((c - 1.0).abs() < 1e-6, "C_f = {c} at eps = {eps}");
        }
        // sup attained in the limit |u| -> infinity; the certified range value
        // approaches 1 from below as 1 - eps/u_max
        let c = growth_constant_g(&spec, 0.5).unwrap();
        assert!((c - 1.0).abs() < 1e-4, "C_g = {c}");
        let zero =
            NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::Zero, 3.0, 1.0).unwrap();
        assert_eq!(growth_constant_g(&zero, 0.5).unwrap(), 0.0);
    }

    /// Independent oracle: golden-section on the closed-form A(u) = u/4 + eps/u.
    fn oracle_c_f_lower_power(eps: f64) -> f64 {
        let (_, v) = golden_min(|u: f64| u / 4.0 + eps / u, 1e-6, 1e3, 1e-12);
        v
    }

    #[test]
    fn lower_constant_matches_golden_oracle() {
        let spec = power_pair();
        for &eps in &[0.1, 0.25] {
            let oracle = oracle_c_f_lower_power(eps);
            let got = lower_constant_f(&spec, eps).unwrap();
            assert!((got - oracle).abs() < 1e-6, "eps={eps}: {got} vs {oracle}");
        }
        assert!((lower_constant_f(&spec, 0.1).unwrap() - 0.1f64.sqrt()).abs() < 1e-4);
        assert!((lower_constant_f(&spec, 0.25).unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn lower_constant_blows_up_at_grid_ends() {
        // A(u) -> +infinity toward both ends of the certification range
        let spec = power_pair();
        let eps = 0.1;
        let a = |u: f64| (eval_F(&spec, u) + eps * u * u) / pow_abs(u, spec.q);
        let c = lower_constant_f(&spec, eps).unwrap();
        assert!(a(CERT_LO) > 100.0 * c);
        assert!(a(CERT_HI) > 100.0 * c);
    }

    #[test]
    fn f_below_certified_on_range() {
        for spec in [
            power_pair(),
            NonlinearitySpec::new(FFamily::LogArctan, 4.0, GFamily::Power, 3.0, 0.7).unwrap(),
        ] {
            let eps = 0.05;
            let c = lower_constant_f(&spec, eps).unwrap();
            for &u in &cert_grid() {
                let lhs = eval_F(&spec, u);
                let rhs = c * pow_abs(u, spec.q) - eps * u * u;
                assert!(
                    lhs >= rhs - 1e-12 * lhs.abs().max(1.0),
                    "F_below violated at u={u}"
                );
            }
        }
    }

    #[test]
    fn axioms_pass_for_power_pair() {
        let spec = power_pair();
        let report = verify_axioms(&spec, 0.0);
        assert!(report.all_pass, "{report:?}");
        // (AR_g) with equality for the pure power g
        for &u in &[0.3, 1.7, 42.0] {
            let gu = eval_g(&spec, u) * u;
            let qg = spec.q * eval_G(&spec, u);
            assert!((gu - qg).abs() <= 1e-12 * qg.abs());
        }
    }

    #[test]
    fn axioms_pass_for_paper_examples() {
        let spec =
            NonlinearitySpec::new(FFamily::LogArctan, 4.0, GFamily::ExpDamped, 3.0, 0.7).unwrap();
        let report = verify_axioms(&spec, 0.0);
        assert!(report.all_pass, "{report:?}");
        let spec =
            NonlinearitySpec::new(FFamily::LogArctan, 3.6, GFamily::ArctanDamped, 2.8, 1.5)
                .unwrap();
        let report = verify_axioms(&spec, 0.0);
        assert!(report.all_pass, "{report:?}");
    }

    #[test]
    fn log_arctan_f4_ratio_is_nondecreasing() {
        // the displayed (F4) ratio: u log(1+|u|^{p-q}) below rho,
        // C(1+arctan|u|)|u|^{p-q}u above
        let spec =
            NonlinearitySpec::new(FFamily::LogArctan, 4.0, GFamily::Zero, 3.0, 0.7).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for u in logspace(1e-6, 100.0, 4000) {
            let ratio = eval_f(&spec, u) / pow_abs(u, spec.q - 1.0);
            assert!(ratio >= prev - 1e-12 * ratio.abs().max(1.0));
            prev = ratio;
        }
    }

    #[test]
    fn broken_exponents_flagged() {
        let spec =
            NonlinearitySpec::new_unchecked(FFamily::Power, 3.0, GFamily::Power, 4.0, 1.0)
                .unwrap();
        assert!(spec.validate().is_err());
        let report = verify_axioms(&spec, 0.0);
        assert!(!report.exponent_ordering);
        assert!(!report.all_pass);
    }

    #[test]
    fn g_over_f_ratio_dominated_at_rho() {
        // |g(u)/f(u)| nonincreasing in |u| beyond rho and bounded by g(rho)/f(rho)
        for spec in [
            power_pair(),
            NonlinearitySpec::new(FFamily::LogArctan, 4.0, GFamily::ExpDamped, 3.0, 0.7).unwrap(),
        ] {
            let cap = g_over_f_at_rho(&spec);
            let mut prev = f64::INFINITY;
            for u in logspace(spec.rho, 1e4, 2000) {
                let r = (eval_g(&spec, u) / eval_f(&spec, u)).abs();
                assert!(r <= cap * (1.0 + 1e-9) + 1e-300);
                assert!(r <= prev * (1.0 + 1e-9) + 1e-300);
                prev = r;
            }
        }
    }

    #[test]
    fn phi_ratio_vanishes_with_rho() {
        let spec = power_pair();
        let lambda = 0.1;
        let mut prev = f64::INFINITY;
        let mut rho = 1.0;
        for _ in 0..8 {
            let sup = phi_sup_ratio(&spec, lambda, rho);
            assert!(sup <= prev + 1e-15, "sup ratio not decreasing at rho={rho}");
            prev = sup;
            rho *= 0.5;
        }
        assert!(prev < phi_sup_ratio(&spec, lambda, 1.0) * 0.1);
    }
}
