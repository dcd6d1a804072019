//! Linking minimax search for nontrivial critical points: inner
//! maximization over half-ball slices M(u), outer minimization of the
//! envelope value over the X+ unit sphere, and a damped Gauss-Newton
//! polish of the strong residual in the eigenbasis.
//!
//! All searches run in X-normalized coordinates d_i = sqrt(|lambda_i|) c_i,
//! where the energy norm is Euclidean and the quadratic part of J has unit
//! curvature.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::FunctionalContext;
use crate::geometry::{projected_search, Normalized};
use crate::grid::StateVector;

/// Solver tolerances and iteration limits; all config-overridable.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Cerami-residual target of the polish, X-dual norm.
    pub tol_solve: f64,
    /// Envelope-gradient tolerance of the outer phase.
    pub envelope_tol: f64,
    pub max_outer: usize,
    pub max_refine: usize,
    pub inner_multistarts: usize,
    pub inner_iters: usize,
    pub inner_grad_tol: f64,
    pub minres_tol: f64,
    pub minres_max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_solve: 1e-8,
            envelope_tol: 1e-4,
            max_outer: 2000,
            max_refine: 200,
            inner_multistarts: 4,
            inner_iters: 600,
            inner_grad_tol: 1e-9,
            minres_tol: 1e-4,
            minres_max_iters: 400,
        }
    }
}

/// Linking data the solver needs from the geometry stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinkingData {
    pub r_link: f64,
    pub inf_sphere: f64,
    pub r_upper: f64,
    pub delta: f64,
}

/// Result of one inner maximization over M(u).
#[derive(Debug, Clone)]
pub struct InnerMax {
    /// Ray coordinate along the unit X+ direction.
    pub t: f64,
    /// X-normalized X- coordinates.
    pub d_minus: Vec<f64>,
    pub value: f64,
    pub proj_grad_norm: f64,
    /// The maximizer sits on the ball boundary with outward gradient.
    pub boundary_active: bool,
    pub iterations: usize,
}

/// Iteration counters of the full pipeline.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationCounts {
    pub outer: usize,
    pub inner_solves: usize,
    pub refine: usize,
    pub minres_total: usize,
    pub ball_doublings: usize,
}

/// Stationarity identities evaluated at the accepted solution.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityChecks {
    /// Relative gap of <A u, u> = ||u+||^2 - ||u-||^2.
    pub quadratic_form_gap: f64,
    /// J'(u)(u), the first Nehari-Pankov condition.
    pub dj_u_u: f64,
    /// max_k |J'(u)(e_k)| over the X- basis.
    pub max_dj_ek: f64,
}

/// Solver outcome: the critical point, residuals and identity checks.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u_star: StateVector,
    pub j_value: f64,
    /// ||grad_X J(u*)||_X.
    pub residual_x: f64,
    /// (1 + ||u*||) ||grad_X J(u*)||_X.
    pub cerami_residual: f64,
    pub tau_norm_value: f64,
    pub pde_residual: f64,
    pub pde_residual_relative: f64,
    pub u_norm: f64,
    pub iterations: IterationCounts,
    pub identity_checks: IdentityChecks,
    /// delta/2 nontriviality threshold the tau-norm is checked against.
    pub delta_half: f64,
    /// Upper bound for the minimax level from the identity homotopy at the
    /// final direction.
    pub c_upper: f64,
    pub inf_sphere: f64,
    pub envelope_converged: bool,
    pub envelope_grad_norm: f64,
    /// |u|^2-mass fraction in the outer 10% of the truncated domain.
    pub boundary_mass_fraction: f64,
}

/// Maximizes J over M(u) = {t u + v^-: t >= 0, ||t u + v^-|| <= R} by
/// projected ascent in (t, d^-); `u_plus_dir` is a unit direction in
/// X-normalized plus coordinates.
pub fn inner_maximize(
    ctx: &FunctionalContext<'_>,
    u_plus_dir: &[f64],
    r_ball: f64,
    value_cap: f64,
    opts: &SolverOptions,
    warm: Option<(f64, &[f64])>,
    rng: &mut impl Rng,
) -> Result<InnerMax> {
    let nb = Normalized::new(ctx);
    let nm = nb.n_minus();
    let eval = |x: &[f64]| eval_slice(ctx, &nb, u_plus_dir, x);
    let project = |x: &mut Vec<f64>| {
        x[0] = x[0].max(0.0);
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > r_ball {
            for v in x.iter_mut() {
                *v *= r_ball / n;
            }
        }
    };
    // tangent of the active set: drop outward radial component on the ball
    // boundary, clamp t at zero
    let tangent = move |x: &[f64], g: &[f64]| {
        let mut t = g.to_vec();
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2 >= r_ball * r_ball * (1.0 - 1e-12) {
            let ip: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
            if ip > 0.0 {
                for (ti, xi) in t.iter_mut().zip(x) {
                    *ti -= ip / n2 * xi;
                }
            }
        }
        if x[0] <= 0.0 && t[0] < 0.0 {
            t[0] = 0.0;
        }
        t
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((t0, d0)) = warm {
        let mut x = vec![0.0; 1 + nm];
        x[0] = t0;
        x[1..].copy_from_slice(d0);
        starts.push(x);
    } else {
        for s in 0..opts.inner_multistarts {
            let mut x = vec![0.0; 1 + nm];
            x[0] = r_ball * (0.1 + 0.2 * s as f64 / opts.inner_multistarts.max(1) as f64);
            for v in x.iter_mut().skip(1) {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                *v = 0.1 * r_ball * g / (nm as f64).sqrt().max(1.0);
            }
            starts.push(x);
        }
    }

    let mut best: Option<InnerMax> = None;
    for x0 in starts {
        let (value, x, gnorm) = projected_search(
            x0,
            &eval,
            &project,
            &tangent,
            true,
            opts.inner_iters,
            opts.inner_grad_tol,
        );
        if value > value_cap {
            return Err(Error::InnerDivergence { value, cap: value_cap });
        }
        let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (_, g_free) = eval(&x);
        let outward: f64 = x.iter().zip(&g_free).map(|(a, b)| a * b).sum();
        let boundary_active = n >= r_ball * (1.0 - 1e-9) && outward > 1e-10;
        let candidate = InnerMax {
            t: x[0],
            d_minus: x[1..].to_vec(),
            value,
            proj_grad_norm: gnorm,
            boundary_active,
            iterations: opts.inner_iters,
        };
        if best.as_ref().map_or(true, |b| candidate.value > b.value) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one start"))
}

/// J and its gradient in (t, d^-) slice coordinates.
fn eval_slice(
    ctx: &FunctionalContext<'_>,
    nb: &Normalized<'_>,
    u_plus_dir: &[f64],
    x: &[f64],
) -> (f64, Vec<f64>) {
    let nm = nb.n_minus();
    let t = x[0].max(0.0);
    let mut c = nb.coeffs_from_minus(&x[1..]);
    for (k, &du) in u_plus_dir.iter().enumerate() {
        let i = nm + k;
        c[i] = t * du * nb.inv_sqrt[i];
    }
    let values = ctx.split.from_coeffs(&c);
    let j = ctx.j_coeffs_values(&c, &values);
    let nt = ctx.nonlin_term(&values);
    let ncf = ctx.split.to_coeffs(&nt);
    let eig = ctx.split.eigvals();
    let mut grad = vec![0.0; x.len()];
    let mut gt = 0.0;
    for (k, &du) in u_plus_dir.iter().enumerate() {
        let i = nm + k;
        gt += (eig[i] * c[i] - ncf[i]) * du * nb.inv_sqrt[i];
    }
    grad[0] = gt;
    for k in 0..nm {
        grad[1 + k] = (eig[k] * c[k] - ncf[k]) * nb.inv_sqrt[k];
    }
    (j, grad)
}

/// Envelope gradient of phi(u) = max_{M(u)} J at the inner maximizer,
/// projected to the tangent space of the X+ unit sphere at `u_plus_dir`.
fn envelope_gradient(
    ctx: &FunctionalContext<'_>,
    nb: &Normalized<'_>,
    u_plus_dir: &[f64],
    inner: &InnerMax,
) -> Vec<f64> {
    let nm = nb.n_minus();
    let mut c = nb.coeffs_from_minus(&inner.d_minus);
    for (k, &du) in u_plus_dir.iter().enumerate() {
        let i = nm + k;
        c[i] = inner.t * du * nb.inv_sqrt[i];
    }
    let values = ctx.split.from_coeffs(&c);
    let nt = ctx.nonlin_term(&values);
    let ncf = ctx.split.to_coeffs(&nt);
    let eig = ctx.split.eigvals();
    // d/du of J(t* u + v*) in plus coordinates, scaled by t* (envelope)
    let mut g: Vec<f64> = (0..u_plus_dir.len())
        .map(|k| {
            let i = nm + k;
            inner.t * (eig[i] * c[i] - ncf[i]) * nb.inv_sqrt[i]
        })
        .collect();
    // tangent projection on the unit sphere
    let ip: f64 = g.iter().zip(u_plus_dir).map(|(a, b)| a * b).sum();
    for (gi, di) in g.iter_mut().zip(u_plus_dir) {
        *gi -= ip * di;
    }
    g
}

/// One Armijo-controlled Riemannian descent step of the envelope value over
/// the X+ unit sphere. Returns the new direction and its inner solve.
pub fn outer_step(
    ctx: &FunctionalContext<'_>,
    u_plus_dir: &[f64],
    inner: &InnerMax,
    r_ball: f64,
    value_cap: f64,
    opts: &SolverOptions,
    counts: &mut IterationCounts,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, InnerMax)> {
    let nb = Normalized::new(ctx);
    let g = envelope_gradient(ctx, &nb, u_plus_dir, inner);
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gnorm < opts.envelope_tol {
        return Ok((u_plus_dir.to_vec(), inner.clone()));
    }
    let mut alpha = 1.0 / (1.0 + gnorm);
    for _ in 0..25 {
        let mut trial: Vec<f64> = u_plus_dir
            .iter()
            .zip(&g)
            .map(|(d, gi)| d - alpha * gi)
            .collect();
        let n = trial.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in trial.iter_mut() {
            *v /= n;
        }
        counts.inner_solves += 1;
        let trial_inner = inner_maximize(
            ctx,
            &trial,
            r_ball,
            value_cap,
            opts,
            Some((inner.t, &inner.d_minus)),
            rng,
        )?;
        if trial_inner.value <= inner.value - 1e-4 * alpha * gnorm * gnorm {
            return Ok((trial, trial_inner));
        }
        alpha *= 0.5;
    }
    Err(Error::LineSearchStall)
}

/// Damped Gauss-Newton polish of the strong residual A u - f(u) + lambda
/// g(u) in the eigenbasis; stops at cerami_residual < tol_solve.
pub fn refine(
    ctx: &FunctionalContext<'_>,
    u0_coeffs: &[f64],
    linking: &LinkingData,
    opts: &SolverOptions,
    counts: &mut IterationCounts,
) -> Result<SolveReport> {
    let split = ctx.split;
    let m = split.resolved();
    let eig = split.eigvals();
    let inv_sqrt: Vec<f64> = eig.iter().map(|l| 1.0 / l.abs().sqrt()).collect();
    let sqrt_abs: Vec<f64> = eig.iter().map(|l| l.abs().sqrt()).collect();
    let sign: Vec<f64> = eig.iter().map(|l| l.signum()).collect();

    // X-normalized coordinates: residual rho(d) = sign d - |L|^{-1/2} n(c)
    // coincides with the X-gradient of J, so ||rho|| is the X-dual residual.
    let residual = |d: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let c: Vec<f64> = d.iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect();
        let values = split.from_coeffs(&c);
        let nt = ctx.nonlin_term(&values);
        let ncf = split.to_coeffs(&nt);
        let rho: Vec<f64> = (0..m)
            .map(|i| sign[i] * d[i] - ncf[i] * inv_sqrt[i])
            .collect();
        (rho, values, c)
    };

    let mut d: Vec<f64> = u0_coeffs.iter().zip(&sqrt_abs).map(|(c, s)| c * s).collect();
    let (mut rho, mut values, mut coeffs) = residual(&d);
    let mut rho_norm = norm(&rho);
    let mut iterations = 0usize;

    for _ in 0..opts.max_refine {
        let u_norm = norm(&d);
        if (1.0 + u_norm) * rho_norm < opts.tol_solve {
            break;
        }
        iterations += 1;
        // symmetric Jacobian in normalized coordinates:
        // B dd = sign dd - |L|^{-1/2} to_coeffs(nprime .* from_coeffs(|L|^{-1/2} dd))
        let nprime = ctx.nonlin_term_prime(&values);
        let apply_b = |x: &[f64], out: &mut [f64]| {
            let cx: Vec<f64> = x.iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect();
            let vx = split.from_coeffs(&cx);
            let scaled: Vec<f64> = vx.iter().zip(&nprime).map(|(v, p)| v * p).collect();
            let ncf = split.to_coeffs(&scaled);
            for i in 0..m {
                out[i] = sign[i] * x[i] - ncf[i] * inv_sqrt[i];
            }
        };
        let neg_rho: Vec<f64> = rho.iter().map(|r| -r).collect();
        let (step, mr_iters) = minres(&apply_b, &neg_rho, opts.minres_tol, opts.minres_max_iters);
        counts.minres_total += mr_iters;
        // damped update on ||rho|| decrease
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = d.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            let (trho, tvalues, tcoeffs) = residual(&trial);
            let tnorm = norm(&trho);
            if tnorm < rho_norm * (1.0 - 1e-4 * alpha) {
                d = trial;
                rho = trho;
                values = tvalues;
                coeffs = tcoeffs;
                rho_norm = tnorm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    counts.refine = iterations;

    let u_norm = norm(&d);
    let cerami = (1.0 + u_norm) * rho_norm;
    if cerami >= opts.tol_solve && iterations >= opts.max_refine {
        return Err(Error::MaxIterExceeded("refine".into()));
    }

    let tau = split.tau_norm_of_coeffs(&coeffs);
    if tau < linking.delta / 2.0 {
        return Err(Error::CollapseToZero {
            tau,
            threshold: linking.delta / 2.0,
        });
    }

    let mut u_star = StateVector::new(values.clone());
    u_star.set_cached_coeffs(coeffs.clone());
    let j_value = ctx.j_coeffs_values(&coeffs, &values);

    // identity checks at the solution
    let au = ctx.op.apply_state(&u_star);
    let quad_inner = ctx.grid.inner_l2w(&au, &u_star)?;
    let (nrm, plus, minus) = split.energy_norms_of_coeffs(&coeffs);
    let quad_spectral = plus * plus - minus * minus;
    let quadratic_form_gap =
        (quad_inner - quad_spectral).abs() / quad_inner.abs().max(nrm * nrm).max(1e-300);
    let dj_u_u = ctx.dj_with(&coeffs, &values, &coeffs, &values);
    let mut max_dj_ek = 0.0_f64;
    for &idx in split.ek_indices() {
        let ek_field = split.basis_field(idx);
        let mut ek_coeffs = vec![0.0; m];
        ek_coeffs[idx] = inv_sqrt[idx];
        let scaled: Vec<f64> = ek_field.iter().map(|v| v * inv_sqrt[idx]).collect();
        max_dj_ek = max_dj_ek.max(ctx.dj_with(&coeffs, &values, &ek_coeffs, &scaled).abs());
    }

    Ok(SolveReport {
        j_value,
        residual_x: rho_norm,
        cerami_residual: cerami,
        tau_norm_value: tau,
        pde_residual: ctx.pde_residual(&u_star),
        pde_residual_relative: ctx.pde_residual_relative(&u_star),
        u_norm: nrm,
        iterations: counts.clone(),
        identity_checks: IdentityChecks {
            quadratic_form_gap,
            dj_u_u,
            max_dj_ek,
        },
        delta_half: linking.delta / 2.0,
        c_upper: f64::NAN, // filled by solve()
        inf_sphere: linking.inf_sphere,
        envelope_converged: false, // filled by solve()
        envelope_grad_norm: f64::NAN,
        boundary_mass_fraction: ctx.grid.boundary_mass_fraction(&values),
        u_star,
    })
}

/// Full pipeline: lowest positive eigvec direction, inner/outer minimax
/// until the envelope gradient is small, then the Gauss-Newton polish.
pub fn solve(
    ctx: &FunctionalContext<'_>,
    linking: &LinkingData,
    opts: &SolverOptions,
    rng: &mut impl Rng,
) -> Result<SolveReport> {
    let nb = Normalized::new(ctx);
    let np = nb.n_plus();
    let nm = nb.n_minus();
    let mut dir = vec![0.0; np];
    dir[0] = 1.0; // lowest positive eigenvalue; ties broken by index

    let mut r_ball = linking.r_upper;
    let value_cap = 20.0 * linking.inf_sphere.max(1.0) * (1.0 + r_ball);
    let mut counts = IterationCounts::default();

    counts.inner_solves += 1;
    let mut inner = inner_maximize(ctx, &dir, r_ball, value_cap, opts, None, rng)?;
    // re-enlarge the ball while the maximizer pushes against the boundary
    while inner.boundary_active && counts.ball_doublings < 16 {
        r_ball *= 2.0;
        counts.ball_doublings += 1;
        counts.inner_solves += 1;
        inner = inner_maximize(
            ctx,
            &dir,
            r_ball,
            value_cap * (1.0 + r_ball),
            opts,
            Some((inner.t, &inner.d_minus)),
            rng,
        )?;
    }

    let mut envelope_norm = f64::INFINITY;
    let mut envelope_converged = false;
    for _ in 0..opts.max_outer {
        counts.outer += 1;
        let g = envelope_gradient(ctx, &nb, &dir, &inner);
        envelope_norm = norm(&g);
        if envelope_norm < opts.envelope_tol {
            envelope_converged = true;
            break;
        }
        match outer_step(ctx, &dir, &inner, r_ball, value_cap, opts, &mut counts, rng) {
            Ok((new_dir, new_inner)) => {
                dir = new_dir;
                inner = new_inner;
            }
            Err(Error::LineSearchStall) => break,
            Err(e) => return Err(e),
        }
        if inner.boundary_active && counts.ball_doublings < 16 {
            r_ball *= 2.0;
            counts.ball_doublings += 1;
        }
    }
    let c_upper = inner.value;

    // assemble the inner maximizer's full coefficients and polish
    let mut c = nb.coeffs_from_minus(&inner.d_minus);
    for (k, &du) in dir.iter().enumerate() {
        let i = nm + k;
        c[i] = inner.t * du * nb.inv_sqrt[i];
    }
    let mut report = refine(ctx, &c, linking, opts, &mut counts)?;
    report.c_upper = c_upper;
    report.envelope_converged = envelope_converged;
    report.envelope_grad_norm = envelope_norm;
    report.iterations = counts;
    Ok(report)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// MINRES for symmetric (possibly indefinite) systems, matrix-free.
/// Returns the solution estimate and the iteration count.
pub fn minres(
    apply: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> (Vec<f64>, usize) {
    let n = b.len();
    let beta1 = norm(b);
    let mut x = vec![0.0; n];
    if beta1 == 0.0 {
        return (x, 0);
    }
    let mut v: Vec<f64> = b.iter().map(|bi| bi / beta1).collect();
    let mut v_prev = vec![0.0; n];
    let mut beta = 0.0_f64;
    let (mut c_old, mut s_old) = (1.0_f64, 0.0_f64);
    let (mut c_cur, mut s_cur) = (1.0_f64, 0.0_f64);
    let mut w = vec![0.0; n];
    let mut w_old = vec![0.0; n];
    let mut phi_bar = beta1;
    let mut av = vec![0.0; n];
    let mut iters = 0;
    for _ in 0..max_iters {
        iters += 1;
        apply(&v, &mut av);
        let alpha: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let mut w_vec: Vec<f64> = av
            .iter()
            .zip(&v)
            .zip(&v_prev)
            .map(|((a, vi), vp)| a - alpha * vi - beta * vp)
            .collect();
        let beta_new = norm(&w_vec);
        // progressive QR of the tridiagonal
        let eps = s_old * beta;
        let delta_mid = c_old * beta;
        let delta = c_cur * delta_mid + s_cur * alpha;
        let gamma_bar = -s_cur * delta_mid + c_cur * alpha;
        let gamma = (gamma_bar * gamma_bar + beta_new * beta_new).sqrt();
        if gamma == 0.0 {
            break;
        }
        let c_new = gamma_bar / gamma;
        let s_new = beta_new / gamma;
        // solution direction
        let w_new: Vec<f64> = (0..n)
            .map(|i| (v[i] - delta * w[i] - eps * w_old[i]) / gamma)
            .collect();
        let phi = c_new * phi_bar;
        phi_bar *= -s_new;
        for i in 0..n {
            x[i] += phi * w_new[i];
        }
        if phi_bar.abs() < rel_tol * beta1 || beta_new < 1e-300 {
            break;
        }
        for wi in w_vec.iter_mut() {
            *wi /= beta_new;
        }
        v_prev = std::mem::replace(&mut v, w_vec);
        beta = beta_new;
        w_old = std::mem::replace(&mut w, w_new);
        c_old = c_cur;
        s_old = s_cur;
        c_cur = c_new;
        s_cur = s_new;
    }
    (x, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_operator, build_grid, Potential, ProblemSpec};
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

    #[test]
    fn minres_solves_indefinite_systems() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for n in [5usize, 20, 60] {
            // random symmetric indefinite matrix, well-conditioned
            let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.sample(rand_distr::StandardNormal);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
                a[(i, i)] += if i % 2 == 0 { 4.0 } else { -4.0 };
            }
            let b: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let apply = |x: &[f64], out: &mut [f64]| {
                let xv = nalgebra::DVector::from_column_slice(x);
                let y = &a * xv;
                out.copy_from_slice(y.as_slice());
            };
            let (x, _) = minres(&apply, &b, 1e-12, 10 * n);
            let xv = nalgebra::DVector::from_column_slice(&x);
            let r = &a * xv - nalgebra::DVector::from_column_slice(&b);
            assert!(
                r.norm() < 1e-8 * nalgebra::DVector::from_column_slice(&b).norm(),
                "MINRES residual too large: {}",
                r.norm()
            );
        }
    }

    #[test]
    fn inner_quadratic_hook_pushes_to_t_boundary() {
        let fx = fixture(16, 16, 0.0);
        let mut ctx =
            crate::functional::FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        ctx.quadratic_only = true;
        let nb = Normalized::new(&ctx);
        let mut dir = vec![0.0; nb.n_plus()];
        dir[0] = 1.0;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let r = 2.0;
        let inner = inner_maximize(
            &ctx,
            &dir,
            r,
            1e12,
            &SolverOptions::default(),
            None,
            &mut rng,
        )
        .unwrap();
        // max of t^2/2 - |d|^2/2 over the half-ball: t = R, v = 0
        assert!((inner.t - r).abs() < 1e-6, "t* = {}", inner.t);
        assert!(norm(&inner.d_minus) < 1e-6);
        assert!((inner.value - 0.5 * r * r).abs() < 1e-8);
        assert!(inner.boundary_active);
    }

    #[test]
    fn inner_value_function_matches_1d_oracle() {
        // along t at v = 0: J(t u+) = t^2/2 - t^4 * (sum w F(u+)) for p = 4
        let fx = fixture(16, 16, 0.0);
        let ctx = crate::functional::FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let nb = Normalized::new(&ctx);
        let nm = nb.n_minus();
        let mut dir = vec![0.0; nb.n_plus()];
        dir[0] = 1.0;
        // the scaling constant from the unit-X+ field
        let mut c1 = vec![0.0; fx.split.resolved()];
        c1[nm] = nb.inv_sqrt[nm];
        let u1 = fx.split.from_coeffs(&c1);
        let s: f64 = fx.grid.integrate_map(&u1, |v| v * v * v * v / 4.0);
        let oracle_max = 1.0 / (16.0 * s);
        let oracle_t = (1.0 / (4.0 * s)).sqrt();
        // direct scan of the implemented value function
        let mut best = f64::NEG_INFINITY;
        let mut best_t = 0.0;
        for k in 0..4000 {
            let t = oracle_t * 2.0 * (k as f64 + 0.5) / 4000.0;
            let j = {
                let c: Vec<f64> = c1.iter().map(|v| v * t).collect();
                let vals = fx.split.from_coeffs(&c);
                ctx.j_coeffs_values(&c, &vals)
            };
            if j > best {
                best = j;
                best_t = t;
            }
        }
        assert!((best - oracle_max).abs() / oracle_max < 1e-5, "{best} vs {oracle_max}");
        assert!((best_t - oracle_t).abs() / oracle_t < 1e-2);
        // the inner maximizer over the full slice dominates the ray max
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        let inner = inner_maximize(
            &ctx,
            &dir,
            8.0 * oracle_t,
            1e12,
            &SolverOptions::default(),
            None,
            &mut rng,
        )
        .unwrap();
        assert!(inner.value >= oracle_max * (1.0 - 1e-9));
        assert!(
            inner.proj_grad_norm < 1e-8,
            "stationarity failed: {}",
            inner.proj_grad_norm
        );
    }

    #[test]
    fn refine_from_zero_collapses() {
        let fx = fixture(16, 16, 0.0);
        let ctx = crate::functional::FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let linking = LinkingData {
            r_link: 0.5,
            inf_sphere: 0.1,
            r_upper: 4.0,
            delta: 0.15,
        };
        let zero = vec![0.0; fx.split.resolved()];
        let mut counts = IterationCounts::default();
        let err = refine(&ctx, &zero, &linking, &SolverOptions::default(), &mut counts);
        assert!(matches!(err, Err(Error::CollapseToZero { .. })));
    }

    fn solve_small(lambda: f64) -> (Fx, SolveReport) {
        let fx = fixture(24, 24, lambda);
        let ctx = crate::functional::FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let gopts = crate::geometry::GeometryOptions {
            multistarts: 8,
            descent_iters: 60,
            validation_samples: 100,
            tau_ball_samples: 500,
            bisection_steps: 8,
            kappa_samples: 50,
            grad_tol: 1e-9,
        };
        let (r_link, inf_sphere) =
            crate::geometry::find_link_radius(&ctx, &gopts, &mut rng).unwrap();
        let nb = Normalized::new(&ctx);
        let mut dir = vec![0.0; nb.n_plus()];
        dir[0] = 1.0;
        let (r_upper, _) =
            crate::geometry::find_link_upper_radius(&ctx, &dir, r_link, &gopts, &mut rng).unwrap();
        let (delta, _) =
            crate::geometry::find_delta(&ctx, r_link, inf_sphere, &gopts, &mut rng).unwrap();
        let linking = LinkingData {
            r_link,
            inf_sphere,
            r_upper,
            delta,
        };
        let report = solve(&ctx, &linking, &SolverOptions::default(), &mut rng).unwrap();
        (fx, report)
    }

    #[test]
    fn solve_finds_nontrivial_critical_point() {
        let (fx, report) = solve_small(0.0);
        assert!(report.cerami_residual < 1e-8, "{}", report.cerami_residual);
        assert!(report.tau_norm_value >= report.delta_half);
        assert!(report.j_value > 0.0);
        assert!(
            report.j_value >= report.inf_sphere - 1e-6,
            "J = {} below inf {}",
            report.j_value,
            report.inf_sphere
        );
        assert!(
            report.j_value <= report.c_upper + 1e-6,
            "J = {} above c_upper = {}",
            report.j_value,
            report.c_upper
        );
        assert!(report.pde_residual_relative < 1e-6);
        assert!(report.identity_checks.dj_u_u.abs() < 1e-7);
        assert!(report.identity_checks.max_dj_ek < 1e-7);
        assert!(report.identity_checks.quadratic_form_gap < 1e-10);
        // sign symmetry: -u* is critical too
        let ctx = crate::functional::FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let neg = StateVector::new(report.u_star.values().iter().map(|v| -v).collect());
        assert!(ctx.pde_residual(&neg) < 10.0 * report.pde_residual + 1e-12);
    }

    #[test]
    fn solve_with_small_positive_lambda() {
        let (_, report) = solve_small(0.005);
        assert!(report.cerami_residual < 1e-8);
        assert!(report.tau_norm_value >= report.delta_half);
        assert!(report.j_value > 0.0);
    }

    #[test]
    fn refine_restart_from_solution_is_immediate() {
        let (fx, report) = solve_small(0.0);
        let ctx = crate::functional::FunctionalContext::new(&fx.grid, &fx.split, &fx.op, &fx.spec);
        let linking = LinkingData {
            r_link: 1.0,
            inf_sphere: report.inf_sphere,
            r_upper: 8.0,
            delta: 2.0 * report.delta_half,
        };
        let coeffs = report.u_star.cached_coeffs().unwrap().to_vec();
        let mut counts = IterationCounts::default();
        let again = refine(&ctx, &coeffs, &linking, &SolverOptions::default(), &mut counts)
            .unwrap();
        assert_eq!(counts.refine, 0, "restart from a solution must accept immediately");
        assert!(again.cerami_residual < 1e-8);
    }
}
