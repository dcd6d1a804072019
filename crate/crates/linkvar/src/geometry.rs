//! Numerical verification of the linking geometry for the discretized
//! functional: the sphere radius r with inf_{S_r^+} J >= r^2/4, the
//! half-ball radius R(u) with sup_{boundary M(u)} J <= 0, the tau-ball
//! radius delta, the lambda threshold, and the Cerami-boundedness
//! constant K.
//!
//! All extremal values are estimated by multistart projected
//! gradient searches plus fresh-sample validation; sphere infima are upper
//! bounds on the true inf and boundary suprema are lower bounds on the
//! true sup, so the composite check is heuristic at finite sampling. The
//! reports record the sample counts.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::FunctionalContext;
use crate::nonlinearity::{
    self, growth_constant_f, growth_constant_g, lower_constant_f, verify_axioms,
};
use crate::spectral::kappa_estimate;

/// Tunable sample counts for the extremal searches.
#[derive(Debug, Clone)]
pub struct GeometryOptions {
    pub multistarts: usize,
    pub descent_iters: usize,
    pub validation_samples: usize,
    pub tau_ball_samples: usize,
    pub bisection_steps: usize,
    pub kappa_samples: usize,
    pub grad_tol: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            multistarts: 32,
            descent_iters: 120,
            validation_samples: 1000,
            tau_ball_samples: 10_000,
            bisection_steps: 18,
            kappa_samples: 2000,
            grad_tol: 1e-9,
        }
    }
}

/// Certified constants and search results for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryConstants {
    pub kappa: f64,
    pub mu0: f64,
    /// eps = mu0/8 used for the threshold constants.
    pub eps: f64,
    pub c_f_lower: f64,
    pub c_f_growth: f64,
    pub c_g_growth: f64,
    pub lambda_max: f64,
    pub r_link: f64,
    /// Estimated inf_{S_r^+} J at r_link (an upper bound of the true inf).
    pub inf_sphere: f64,
    pub r_upper: f64,
    pub delta_link: f64,
    /// Best Cerami-boundedness constant found by the K-search.
    pub k_bound: f64,
    pub k_pass: bool,
    pub k_search: KSearchReport,
}

/// Outcome of the (A3) composite verification.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub constants: GeometryConstants,
    pub sup_boundary: f64,
    pub sup_tau_ball: f64,
    pub a3_margin: f64,
    pub a3_pass: bool,
    pub sphere_validation_samples: usize,
    pub sphere_validation_min: f64,
    pub multistarts: usize,
    pub descent_iters: usize,
    pub tau_ball_samples: usize,
    /// Extremal estimates are one-sided: sphere infima are upper bounds of
    /// the true inf, boundary suprema are lower bounds of the true sup.
    pub one_sided_note: &'static str,
    pub axioms_pass: bool,
}

/// Projected-gradient search on a constrained set; maximizes when
/// `maximize`, with backtracking line search.
/// Returns (value, point, final projected-gradient norm).
pub(crate) fn projected_search(
    x0: Vec<f64>,
    eval: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    project_point: &dyn Fn(&mut Vec<f64>),
    tangent: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    maximize: bool,
    iters: usize,
    grad_tol: f64,
) -> (f64, Vec<f64>, f64) {
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut x = x0;
    project_point(&mut x);
    let (mut value, mut grad) = eval(&x);
    let mut step = 1.0;
    let mut gnorm = 0.0;
    for _ in 0..iters {
        let tan = tangent(&x, &grad);
        gnorm = tan.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < grad_tol {
            break;
        }
        let mut accepted = false;
        let mut alpha = step;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x
                .iter()
                .zip(&tan)
                .map(|(xi, ti)| xi + sign * alpha * ti)
                .collect();
            project_point(&mut trial);
            let (tv, tg) = eval(&trial);
            if sign * (tv - value) >= 1e-4 * alpha * gnorm * gnorm {
                x = trial;
                value = tv;
                grad = tg;
                step = (alpha * 2.0).min(1e6);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (value, x, gnorm)
}

/// State assembly helpers shared by the extremal searches. Coordinates are
/// X-normalized: d_i = sqrt(|lambda_i|) c_i, so norms are Euclidean.
pub(crate) struct Normalized<'a> {
    pub ctx: &'a FunctionalContext<'a>,
    pub inv_sqrt: Vec<f64>,
}

impl<'a> Normalized<'a> {
    pub fn new(ctx: &'a FunctionalContext<'a>) -> Self {
        let inv_sqrt = ctx
            .split
            .eigvals()
            .iter()
            .map(|l| 1.0 / l.abs().sqrt())
            .collect();
        Self { ctx, inv_sqrt }
    }

    pub fn n_minus(&self) -> usize {
        self.ctx.split.n_minus()
    }

    pub fn n_plus(&self) -> usize {
        self.ctx.split.resolved() - self.ctx.split.n_minus()
    }

    /// Full coefficient vector from X-normalized plus-part coordinates.
    pub fn coeffs_from_plus(&self, d_plus: &[f64]) -> Vec<f64> {
        let nm = self.n_minus();
        let mut c = vec![0.0; self.ctx.split.resolved()];
        for (k, d) in d_plus.iter().enumerate() {
            c[nm + k] = d * self.inv_sqrt[nm + k];
        }
        c
    }

    /// Full coefficient vector from X-normalized minus-part coordinates.
    pub fn coeffs_from_minus(&self, d_minus: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.ctx.split.resolved()];
        for (k, d) in d_minus.iter().enumerate() {
            c[k] = d * self.inv_sqrt[k];
        }
        c
    }

    /// J and its Euclidean gradient in the given normalized coordinates;
    /// `indices` maps reduced coordinates to mode indices.
    pub fn j_and_grad(&self, c_full: &[f64], indices: &[usize]) -> (f64, Vec<f64>) {
        let values = self.ctx.split.from_coeffs(c_full);
        let j = self.ctx.j_coeffs_values(c_full, &values);
        let nt = self.ctx.nonlin_term(&values);
        let n_coeffs = self.ctx.split.to_coeffs(&nt);
        let eig = self.ctx.split.eigvals();
        let grad = indices
            .iter()
            .map(|&i| (eig[i] * c_full[i] - n_coeffs[i]) * self.inv_sqrt[i])
            .collect();
        (j, grad)
    }
}

fn sphere_project(r: f64) -> impl Fn(&mut Vec<f64>) {
    move |x: &mut Vec<f64>| {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            for v in x.iter_mut() {
                *v *= r / n;
            }
        } else {
            x[0] = r;
        }
    }
}

fn sphere_tangent(x: &[f64], g: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return g.to_vec();
    }
    let ip: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    x.iter()
        .zip(g)
        .map(|(xi, gi)| gi - ip / r2 * xi)
        .collect()
}

/// Estimates inf over the X+ sphere of radius r by multistart Riemannian
/// descent; returns (estimate, best unit direction in normalized coords).
pub fn sphere_infimum(
    ctx: &FunctionalContext<'_>,
    r: f64,
    opts: &GeometryOptions,
    rng: &mut impl Rng,
    warm: Option<&[Vec<f64>]>,
) -> (f64, Vec<f64>) {
    let nb = Normalized::new(ctx);
    let np = nb.n_plus();
    let nm = nb.n_minus();
    let indices: Vec<usize> = (nm..nm + np).collect();
    let eval = |d: &[f64]| {
        let c = nb.coeffs_from_plus(d);
        nb.j_and_grad(&c, &indices)
    };
    let mut best_val = f64::INFINITY;
    let mut best_dir = vec![0.0; np];
    for s in 0..opts.multistarts {
        let x0: Vec<f64> = match warm.and_then(|w| w.get(s)) {
            Some(dir) => dir.iter().map(|v| v * r).collect(),
            None => (0..np)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect(),
        };
        let (val, x, _) = projected_search(
            x0,
            &eval,
            &sphere_project(r),
            &sphere_tangent,
            false,
            opts.descent_iters,
            opts.grad_tol,
        );
        if val < best_val {
            best_val = val;
            best_dir = x;
        }
    }
    let n = best_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in best_dir.iter_mut() {
        *v /= n.max(1e-300);
    }
    (best_val, best_dir)
}

/// Finds the largest r in the bisection search set with estimated
/// inf_{S_r^+} J >= r^2/4, and that infimum estimate.
pub fn find_link_radius(
    ctx: &FunctionalContext<'_>,
    opts: &GeometryOptions,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let passes = |r: f64, rng: &mut _| -> (bool, f64) {
        let (inf, _) = sphere_infimum(ctx, r, opts, rng, None);
        (inf >= r * r / 4.0, inf)
    };
    // largest admissible radius first
    let (ok, inf) = passes(1.0, rng);
    if ok {
        return Ok((1.0, inf));
    }
    let mut lo = 1e-3;
    let mut hi = 1.0;
    let (ok, mut best_inf) = passes(lo, rng);
    if !ok {
        return Err(Error::GeometryFailure(format!(
            "no radius in the search set satisfies inf J >= r^2/4 (inf at r=1e-3 was {best_inf:.3e}); check lambda and the potential"
        )));
    }
    let mut best_r = lo;
    for _ in 0..opts.bisection_steps {
        let mid = (lo * hi).sqrt();
        let (ok, inf) = passes(mid, rng);
        if ok {
            lo = mid;
            best_r = mid;
            best_inf = inf;
        } else {
            hi = mid;
        }
    }
    Ok((best_r, best_inf))
}

/// Fresh-sample validation: J on n random points of S_r^+ must stay above
/// r^2/4. Returns the sampled minimum.
pub fn validate_sphere(
    ctx: &FunctionalContext<'_>,
    r: f64,
    n: usize,
    rng: &mut impl Rng,
) -> f64 {
    let nb = Normalized::new(ctx);
    let np = nb.n_plus();
    let mut min_j = f64::INFINITY;
    for _ in 0..n {
        let mut d: Vec<f64> = (0..np)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        sphere_project(r)(&mut d);
        let c = nb.coeffs_from_plus(&d);
        let values = ctx.split.from_coeffs(&c);
        min_j = min_j.min(ctx.j_coeffs_values(&c, &values));
    }
    min_j
}

/// Estimated sup of J over the boundary of M(u):
/// the X- ball piece and the lateral sphere piece {t u + v: ||.|| = R, t > 0}.
pub fn boundary_sup(
    ctx: &FunctionalContext<'_>,
    u_plus_dir: &[f64],
    r_ball: f64,
    opts: &GeometryOptions,
    rng: &mut impl Rng,
) -> f64 {
    let nb = Normalized::new(ctx);
    let nm = nb.n_minus();
    // piece 1: X- ball, ||v|| <= R. J(0) = 0 sits inside, so the sup is >= 0.
    let indices_minus: Vec<usize> = (0..nm).collect();
    let eval_minus = |d: &[f64]| {
        let c = nb.coeffs_from_minus(d);
        nb.j_and_grad(&c, &indices_minus)
    };
    let ball_project = |x: &mut Vec<f64>| {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > r_ball {
            for v in x.iter_mut() {
                *v *= r_ball / n;
            }
        }
    };
    let free_tangent = |_x: &[f64], g: &[f64]| g.to_vec();
    let mut sup = 0.0_f64; // v = 0 belongs to the piece
    for _ in 0..opts.multistarts {
        let x0: Vec<f64> = (0..nm)
            .map(|_| {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                g * r_ball / (nm as f64).sqrt()
            })
            .collect();
        let (val, _, _) = projected_search(
            x0,
            &eval_minus,
            &ball_project,
            &free_tangent,
            true,
            opts.descent_iters,
            opts.grad_tol,
        );
        sup = sup.max(val);
    }
    // piece 2: lateral sphere t^2 + ||v||^2 = R^2, t > 0; coordinates (t, d-)
    let indices_all: Vec<usize> = (0..nm).collect();
    let eval_lateral = |x: &[f64]| {
        let t = x[0].max(0.0);
        let mut c = nb.coeffs_from_minus(&x[1..]);
        let nm_off = nm;
        for (k, &du) in u_plus_dir.iter().enumerate() {
            c[nm_off + k] = t * du * nb.inv_sqrt[nm_off + k];
        }
        let values = ctx.split.from_coeffs(&c);
        let j = ctx.j_coeffs_values(&c, &values);
        let nt = ctx.nonlin_term(&values);
        let ncf = ctx.split.to_coeffs(&nt);
        let eig = ctx.split.eigvals();
        let mut grad = vec![0.0; 1 + nm];
        // dJ/dt along the unit X+ direction
        let mut gt = 0.0;
        for (k, &du) in u_plus_dir.iter().enumerate() {
            let i = nm_off + k;
            gt += (eig[i] * c[i] - ncf[i]) * du * nb.inv_sqrt[i];
        }
        grad[0] = gt;
        for (k, &i) in indices_all.iter().enumerate() {
            grad[1 + k] = (eig[i] * c[i] - ncf[i]) * nb.inv_sqrt[i];
        }
        (j, grad)
    };
    let lateral_project = move |x: &mut Vec<f64>| {
        x[0] = x[0].max(0.0);
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            for v in x.iter_mut() {
                *v *= r_ball / n;
            }
        } else {
            x[0] = r_ball;
        }
    };
    for _ in 0..opts.multistarts {
        let mut x0 = vec![0.0; 1 + nm];
        x0[0] = rng.random_range(0.05..1.0) * r_ball;
        for v in x0.iter_mut().skip(1) {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            *v = g * r_ball / (1.0 + nm as f64).sqrt();
        }
        let (val, _, _) = projected_search(
            x0,
            &eval_lateral,
            &lateral_project,
            &sphere_tangent,
            true,
            opts.descent_iters,
            opts.grad_tol,
        );
        sup = sup.max(val);
    }
    sup
}

/// Doubling search for R(u): the first radius (from 4 r_link, up to
/// 2^16 r_link) whose boundary sup estimate is nonpositive.
pub fn find_link_upper_radius(
    ctx: &FunctionalContext<'_>,
    u_plus_dir: &[f64],
    r_link: f64,
    opts: &GeometryOptions,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let mut r_ball = 4.0 * r_link;
    let cap = 65536.0 * r_link;
    while r_ball <= cap {
        let sup = boundary_sup(ctx, u_plus_dir, r_ball, opts, rng);
        if sup <= 1e-10 {
            return Ok((r_ball, sup));
        }
        r_ball *= 2.0;
    }
    Err(Error::NoAnticoercivity { r_max: cap })
}

/// delta = min(sqrt(b/3), r_link/2), validated by sampling the tau-ball:
/// the sampled sup of J over {|||u||| <= delta} must stay below b.
pub fn find_delta(
    ctx: &FunctionalContext<'_>,
    r_link: f64,
    inf_estimate: f64,
    opts: &GeometryOptions,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if inf_estimate <= 0.0 {
        return Err(Error::GeometryFailure(
            "find_delta requires a positive sphere infimum estimate".into(),
        ));
    }
    let delta = (inf_estimate / 3.0).sqrt().min(r_link / 2.0);
    let sup = tau_ball_sup(ctx, delta, opts.tau_ball_samples, rng);
    if sup >= inf_estimate {
        return Err(Error::GeometryFailure(format!(
            "sampled sup over the tau-ball ({sup:.3e}) reached the sphere infimum ({inf_estimate:.3e})"
        )));
    }
    Ok((delta, sup))
}

/// Sampled sup of J over the tau-ball {|||u||| <= delta}. The X- part is
/// drawn through the damped coefficients, so arbitrarily large ||u-||
/// regions of the ball are visited.
pub fn tau_ball_sup(
    ctx: &FunctionalContext<'_>,
    delta: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let nb = Normalized::new(ctx);
    let nm = nb.n_minus();
    let np = nb.n_plus();
    let eks = ctx.split.ek_indices();
    let mut sup = f64::NEG_INFINITY;
    for _ in 0..samples {
        // plus part: ||u+|| = xi * delta
        let xi: f64 = rng.random_range(0.0..1.0);
        let mut d_plus: Vec<f64> = (0..np)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        sphere_project(xi * delta)(&mut d_plus);
        let mut c = nb.coeffs_from_plus(&d_plus);
        // minus part: damped-coefficient budget zeta * delta on the simplex
        let zeta: f64 = rng.random_range(0.0..1.0);
        let mut weights: Vec<f64> = (0..nm).map(|_| -rng.random::<f64>().ln()).collect();
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
        let mut damp = 0.25;
        for (k, &idx) in eks.iter().enumerate() {
            // |<u-, e_k>| = weights[k] * zeta * delta / 2^{-(k+1)}
            let mag = weights[k] * zeta * delta / damp;
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c[idx] = sign * mag * nb.inv_sqrt[idx];
            damp *= 0.5;
        }
        let values = ctx.split.from_coeffs(&c);
        sup = sup.max(ctx.j_coeffs_values(&c, &values));
    }
    sup
}

/// The lambda threshold of the linking estimates:
/// lambda_max = C_{F,eps} / (kappa 2^q C_{G,eps}) at eps = mu0/8.
pub fn lambda_threshold(kappa: f64, q: f64, c_f_lower: f64, c_g_growth: f64) -> f64 {
    let lm = c_f_lower / (kappa * 2f64.powf(q) * c_g_growth);
    if c_f_lower <= c_g_growth {
        debug_assert!(lm <= 1.0, "threshold must imply lambda <= 1");
    }
    lm
}

/// Everything the K formula reports.
#[derive(Debug, Clone, Serialize)]
pub struct KBoundReport {
    pub eps: f64,
    pub rho: f64,
    pub lambda: f64,
    pub k: f64,
    pub pass: bool,
    pub g_over_f_at_rho: f64,
    pub phi_sup_ratio: f64,
    /// The smallness side condition 0 <= (1+lambda g/f)/(1-lambda g/f) <= 2.
    pub ratio_condition: f64,
    pub ratio_condition_pass: bool,
}

/// Assembles the Cerami-boundedness constant K from its displayed terms and
/// compares against mu0.
pub fn boundedness_k(
    ctx: &FunctionalContext<'_>,
    mu0: f64,
    kappa: f64,
    eps: f64,
    rho: f64,
    lambda: f64,
) -> Result<KBoundReport> {
    assert!(eps > 0.0 && rho > 0.0 && lambda >= 0.0);
    let nl = &ctx.spec.nonlinearity;
    let (p, q) = (nl.p, nl.q);
    let gf = nonlinearity::g_over_f_at_rho(nl);
    let denom = 1.0 - lambda * gf;
    if denom <= 0.0 {
        return Err(Error::RhoTooLarge { value: denom });
    }
    let c_f_eps = growth_constant_f(nl, eps)?;
    let c_g_eps = growth_constant_g(nl, eps)?;
    let c_low = lower_f5_constant(nl, rho);
    let c_up = upper_f5_constant(nl, rho);
    let sup_phi = nonlinearity::phi_sup_ratio(nl, lambda, rho);
    let ratio_condition = (1.0 + lambda * gf) / denom;
    // C1 = 1/((1/2 - 1/q) c_low) from the L^p estimate under (F5)
    let c1 = 1.0 / ((0.5 - 1.0 / q) * c_low);
    let rho_p = crate::util::pow_abs(rho, p - 2.0);
    let rho_q = crate::util::pow_abs(rho, q - 2.0);
    let k = eps * (1.0 + lambda)
        + c_f_eps * rho_p
        + lambda * c_g_eps * rho_q
        + 2.0 * kappa * c_up * rho_p * (1.0 + lambda * gf)
        + 2.0 * kappa * c_up * c1 * ratio_condition * sup_phi;
    Ok(KBoundReport {
        eps,
        rho,
        lambda,
        k,
        pass: k < mu0,
        g_over_f_at_rho: gf,
        phi_sup_ratio: sup_phi,
        ratio_condition,
        ratio_condition_pass: (0.0..=2.0).contains(&ratio_condition),
    })
}

/// min over the certified range beyond rho of |f(u)|/|u|^{p-1}.
fn lower_f5_constant(nl: &crate::nonlinearity::NonlinearitySpec, rho: f64) -> f64 {
    let hi = nonlinearity::CERT_HI.max(rho * 10.0);
    crate::util::logspace(rho, hi, 2048)
        .iter()
        .map(|&u| nonlinearity::eval_f(nl, u).abs() / crate::util::pow_abs(u, nl.p - 1.0))
        .fold(f64::INFINITY, f64::min)
}

fn upper_f5_constant(nl: &crate::nonlinearity::NonlinearitySpec, rho: f64) -> f64 {
    let hi = nonlinearity::CERT_HI.max(rho * 10.0);
    crate::util::logspace(rho, hi, 2048)
        .iter()
        .map(|&u| nonlinearity::eval_f(nl, u).abs() / crate::util::pow_abs(u, nl.p - 1.0))
        .fold(0.0, f64::max)
}

/// Result of the (eps, rho, lambda) grid search for K < mu0.
#[derive(Debug, Clone, Serialize)]
pub struct KSearchReport {
    pub found: Option<KBoundReport>,
    pub trials: usize,
}

/// Grid search over eps in {mu0/12 2^-j}, rho in {2^-j}, lambda in
/// {lambda_max 2^-j}; returns the first passing triple (largest parameters
/// first).
pub fn k_search(
    ctx: &FunctionalContext<'_>,
    mu0: f64,
    kappa: f64,
    lambda_max: f64,
    levels: usize,
) -> KSearchReport {
    let mut trials = 0;
    for je in 0..levels {
        let eps = mu0 / 12.0 * 0.5f64.powi(je as i32);
        for jr in 0..levels {
            let rho = 0.5f64.powi(jr as i32);
            for jl in 0..levels {
                let lambda = lambda_max * 0.5f64.powi(jl as i32);
                trials += 1;
                if let Ok(report) = boundedness_k(ctx, mu0, kappa, eps, rho, lambda) {
                    if report.pass && report.ratio_condition_pass {
                        return KSearchReport {
                            found: Some(report),
                            trials,
                        };
                    }
                }
            }
        }
    }
    KSearchReport {
        found: None,
        trials,
    }
}

/// Full geometry pipeline: kappa, the threshold constants, lambda_max, the
/// linking radii, the K-search, and the (A3) composite margin.
pub fn verify_geometry(
    ctx: &FunctionalContext<'_>,
    opts: &GeometryOptions,
    rng: &mut impl Rng,
) -> Result<GeometryReport> {
    let nl = &ctx.spec.nonlinearity;
    let axioms = verify_axioms(nl, ctx.spec.lambda);
    let mu0 = ctx.split.mu0();
    let eps = mu0 / 8.0;
    let c_f_lower = lower_constant_f(nl, eps)?;
    let c_f_growth = growth_constant_f(nl, eps)?;
    let c_g_growth = growth_constant_g(nl, eps)?.max(c_f_lower);
    let kappa = kappa_estimate(ctx.split, ctx.grid, nl.q, opts.kappa_samples, rng);
    let lambda_max = lambda_threshold(kappa, nl.q, c_f_lower, c_g_growth);

    let (r_link, inf_sphere) = find_link_radius(ctx, opts, rng)?;
    let sphere_validation_min = validate_sphere(ctx, r_link, opts.validation_samples, rng);
    // the solver's initial direction: lowest positive mode
    let nb = Normalized::new(ctx);
    let mut dir = vec![0.0; nb.n_plus()];
    dir[0] = 1.0;
    let (r_upper, sup_boundary) = find_link_upper_radius(ctx, &dir, r_link, opts, rng)?;
    let (delta_link, sup_tau_ball) = find_delta(ctx, r_link, inf_sphere, opts, rng)?;
    let k_report = k_search(ctx, mu0, kappa, lambda_max, 7);
    let (k_bound, k_pass) = match &k_report.found {
        Some(r) => (r.k, r.pass),
        None => (f64::INFINITY, false),
    };

    let a3_margin = inf_sphere - sup_boundary.max(sup_tau_ball);
    let constants = GeometryConstants {
        kappa,
        mu0,
        eps,
        c_f_lower,
        c_f_growth,
        c_g_growth,
        lambda_max,
        r_link,
        inf_sphere,
        r_upper,
        delta_link,
        k_bound,
        k_pass,
        k_search: k_report,
    };
    Ok(GeometryReport {
        constants,
        sup_boundary,
        sup_tau_ball,
        a3_margin,
        a3_pass: a3_margin >= 1e-6 && sphere_validation_min >= r_link * r_link / 4.0,
        sphere_validation_samples: opts.validation_samples,
        sphere_validation_min,
        multistarts: opts.multistarts,
        descent_iters: opts.descent_iters,
        tau_ball_samples: opts.tau_ball_samples,
        one_sided_note:
            "sphere infima are upper bounds on the true inf; boundary suprema are lower bounds on the true sup; (A3) verification is heuristic at finite sampling",
        axioms_pass: axioms.all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_operator, build_grid, Potential, ProblemSpec, StateVector};
    use crate::nonlinearity::{FFamily, GFamily, NonlinearitySpec};
    use crate::spectral::eigendecompose;
    use rand::SeedableRng;

    struct Fx {
        spec: ProblemSpec,
        grid: crate::grid::Grid,
        op: crate::grid::SymmetricOperator,
        split: crate::spectral::SpectralSplit,
    }

    fn fixture(nr: usize, nz: usize, lambda: f64) -> Fx {
        let spec = ProblemSpec {
            n_dim: 3,
            k_dim: 2,
            a: 1.0,
            potential: Potential::Constant(-9.0),
            lambda,
            nonlinearity: NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::Power, 3.0, 1.0)
                .unwrap(),
        };
        let grid = build_grid(&spec, nr, nz, 6.0, 4.0).unwrap();
        let op = assemble_operator(&spec, &grid);
        let split = eigendecompose(&op, &grid).unwrap();
        Fx { spec, grid, op, split }
    }

    fn small_opts() -> GeometryOptions {
        GeometryOptions {
            multistarts: 8,
            descent_iters: 60,
            validation_samples: 200,
            tau_ball_samples: 1000,
            bisection_steps: 10,
            kappa_samples: 100,
            grad_tol: 1e-9,
        }
    }

    #[test]
    fn tiny_radius_always_passes() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let (inf, _) = sphere_infimum(&ctx, 1e-4, &small_opts(), &mut rng, None);
        assert!(inf >= 0.25e-8 * 0.999, "quadratic term must dominate, inf = {inf:.3e}");
    }

    #[test]
    fn link_radius_found_and_validated() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let opts = small_opts();
        let (r, inf) = find_link_radius(&ctx, &opts, &mut rng).unwrap();
        assert!(r > 0.0 && inf >= r * r / 4.0);
        let fresh = validate_sphere(&ctx, r, 1000, &mut rng);
        assert!(
            fresh >= r * r / 4.0,
            "fresh sphere samples dipped below the bound: {fresh} < {}",
            r * r / 4.0
        );
    }

    #[test]
    fn boundary_sup_nonpositive_for_admissible_lambda() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let opts = small_opts();
        let (r, _) = find_link_radius(&ctx, &opts, &mut rng).unwrap();
        let nb = Normalized::new(&ctx);
        let mut dir = vec![0.0; nb.n_plus()];
        dir[0] = 1.0;
        let (r_upper, sup) = find_link_upper_radius(&ctx, &dir, r, &opts, &mut rng).unwrap();
        assert!(r_upper > r);
        assert!(sup <= 1e-10, "boundary sup = {sup}");
    }

    #[test]
    fn j_decays_along_rays() {
        // J(t u + v) -> -infinity along rays in R+ u (+) X- for lambda = 0,
        // with u the solver's initial direction
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let nb = Normalized::new(&ctx);
        let nm = nb.n_minus();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        for _ in 0..8 {
            // random (t, d-) ray with a definite plus component
            let t0: f64 = rng.random_range(0.2..1.0);
            let mut dir = vec![0.0; ctx.split.resolved()];
            dir[nm] = t0;
            for k in 0..nm {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                dir[k] = 0.3 * g;
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in dir.iter_mut() {
                *v /= norm;
            }
            let j_at = |s: f64| {
                let c: Vec<f64> = dir
                    .iter()
                    .zip(nb.inv_sqrt.iter())
                    .map(|(d, inv)| s * d * inv)
                    .collect();
                let values = ctx.split.from_coeffs(&c);
                ctx.j_coeffs_values(&c, &values)
            };
            assert!(j_at(64.0) < j_at(8.0), "J must decay along scaled rays");
            assert!(j_at(64.0) < -1.0);
        }
    }

    #[test]
    fn delta_bound_and_tau_ball() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let opts = small_opts();
        let (r, inf) = find_link_radius(&ctx, &opts, &mut rng).unwrap();
        let (delta, sup) = find_delta(&ctx, r, inf, &opts, &mut rng).unwrap();
        assert!(delta <= r / 2.0 + 1e-15);
        assert!(delta <= (inf / 3.0).sqrt() + 1e-15);
        assert!(sup < inf);
    }

    #[test]
    fn lambda_threshold_formula() {
        // kappa = 1.1, q = 3, C_F = C_G: 1/(1.1 * 8)
        let lm = lambda_threshold(1.1, 3.0, 0.4, 0.4);
        assert!((lm - 1.0 / 8.8).abs() < 1e-15);
        assert!((lm - 0.1136).abs() < 1e-4);
        // monotonicity in kappa and q
        assert!(lambda_threshold(2.0, 3.0, 0.4, 0.4) < lm);
        assert!(lambda_threshold(1.1, 3.5, 0.4, 0.4) < lm);
    }

    #[test]
    fn k_limit_structure_at_lambda_zero() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mu0 = fx.split.mu0();
        let eps = mu0 / 24.0;
        let mut prev_k = f64::INFINITY;
        for j in 0..8 {
            let rho = 0.5f64.powi(j + 2);
            let rep = boundedness_k(&ctx, mu0, 1.5, eps, rho, 0.0).unwrap();
            assert!(rep.k < prev_k + 1e-12, "K must shrink with rho");
            prev_k = rep.k;
        }
        // in the rho -> 0 limit only the eps term survives
        assert!(
            (prev_k - eps) / eps < 0.05,
            "K did not approach eps: {prev_k} vs {eps}"
        );
        assert!(prev_k < mu0);
    }

    #[test]
    fn phi_ratio_monotone_under_rho_halving() {
        let fx = fixture(16, 16, 0.0);
        let nl = &fx.spec.nonlinearity;
        let mut prev = f64::INFINITY;
        let mut rho = 1.0;
        for _ in 0..8 {
            let sup = nonlinearity::phi_sup_ratio(nl, 0.1, rho);
            assert!(sup <= prev + 1e-15);
            prev = sup;
            rho /= 2.0;
        }
    }

    #[test]
    fn rho_too_large_detected() {
        // lambda g(rho)/f(rho) >= 1 must error; power pair has g/f = 1/rho
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let err = boundedness_k(&ctx, 0.3, 1.5, 0.01, 0.25, 8.0);
        assert!(matches!(err, Err(Error::RhoTooLarge { .. })));
    }

    #[test]
    fn k_search_finds_passing_triple() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mu0 = fx.split.mu0();
        let report = k_search(&ctx, mu0, 1.5, 0.01, 7);
        let found = report.found.expect("K-search must find a passing triple");
        assert!(found.pass && found.k < mu0);
        assert!(found.ratio_condition_pass);
    }

    #[test]
    fn composite_geometry_report() {
        let fx = fixture(16, 16, 0.0);
        let ctx = FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        let report = verify_geometry(&ctx, &small_opts(), &mut rng).unwrap();
        assert!(report.a3_pass, "{report:?}");
        assert!(report.a3_margin >= 1e-6);
        assert!(report.constants.r_link < report.constants.r_upper);
        assert!(report.constants.lambda_max > 0.0);
        assert!(report.axioms_pass);
        // ensure the state norms behave: a random X- ray at the found delta
        let zero = StateVector::zeros(fx.grid.len());
        assert_eq!(ctx.j_value(&zero).unwrap(), 0.0);
    }
}
