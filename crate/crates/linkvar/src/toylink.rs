//! Finite-dimensional model functionals where the abstract linking
//! quantities are brute-forceable: the half-ball sup c_upper from the
//! identity deformation, the Nehari-Pankov infimum, and the ordering chain
//! inf_{S_r^+} J <= c_upper <= inf_N J that sandwiches the minimax level.
//!
//! The brute force replaces the admissible deformation class: only the
//! identity deformation upper bound is computable, so reports label
//! c_upper as an upper bound for c, never as c itself.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::pow_abs;

/// Euclidean model problem: quadratic signature diag(+1..+1, -1..-1) with
/// the power-pair nonlinearity applied to every coordinate,
/// J(x) = |x+|^2/2 - |x-|^2/2 - (1/p) sum |x_i|^p + (lambda/q) sum |x_i|^q.
#[derive(Debug, Clone, Copy)]
pub struct ToyProblem {
    pub n_plus: usize,
    pub n_minus: usize,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
}

impl ToyProblem {
    pub fn new(n_plus: usize, n_minus: usize, p: f64, q: f64, lambda: f64) -> Result<Self> {
        if n_plus == 0 || n_plus > 3 || n_minus > 3 {
            return Err(Error::InvalidSpec(
                "toy dimensions must satisfy 1 <= n_plus <= 3, n_minus <= 3".into(),
            ));
        }
        if !(2.0 < q && q < p) || lambda < 0.0 {
            return Err(Error::InvalidSpec("toy requires 2 < q < p and lambda >= 0".into()));
        }
        Ok(Self {
            n_plus,
            n_minus,
            p,
            q,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_plus + self.n_minus
    }

    fn sign(&self, i: usize) -> f64 {
        if i < self.n_plus {
            1.0
        } else {
            -1.0
        }
    }

    pub fn j(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut nl = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            quad += 0.5 * self.sign(i) * xi * xi;
            nl += -pow_abs(xi, self.p) / self.p + self.lambda * pow_abs(xi, self.q) / self.q;
        }
        quad + nl
    }

    pub fn dj(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (&xi, &yi))| {
                (self.sign(i) * xi - pow_abs(xi, self.p - 2.0) * xi
                    + self.lambda * pow_abs(xi, self.q - 2.0) * xi)
                    * yi
            })
            .sum()
    }

    /// Diagonal of the Hessian: d^2 J[a][b] = sum h_i a_i b_i.
    fn hess_diag(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                self.sign(i) - (self.p - 1.0) * pow_abs(xi, self.p - 2.0)
                    + self.lambda * (self.q - 1.0) * pow_abs(xi, self.q - 2.0)
            })
            .collect()
    }

    /// Assembles t u+ + v into a full-dimension point.
    fn assemble(&self, u_plus: &[f64], t: f64, v_minus: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for (i, &u) in u_plus.iter().enumerate() {
            w[i] = t * u;
        }
        for (k, &v) in v_minus.iter().enumerate() {
            w[self.n_plus + k] = v;
        }
        w
    }
}

/// Argmax-carrying result of the half-ball grid sup.
#[derive(Debug, Clone)]
pub struct ToySup {
    pub value: f64,
    pub t: f64,
    pub v_minus: Vec<f64>,
}

/// Dense-grid sup of J over M(u+) = {t u+ + v: t >= 0, |t u+ + v| <= R},
/// an upper bound for the minimax level via the identity deformation.
/// The grid is zoomed around the argmax so smooth maxima are resolved to
/// ~1e-10; the value is monotone in `density` (a sup over more points).
pub fn toy_c_upper(tp: &ToyProblem, u_plus: &[f64], r_ball: f64, density: usize) -> ToySup {
    assert!(density >= 2 && u_plus.len() == tp.n_plus);
    let norm_u: f64 = u_plus.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = u_plus.iter().map(|v| v / norm_u).collect();
    let nm = tp.n_minus;
    let mut center = vec![0.0; 1 + nm];
    center[0] = 0.5 * r_ball;
    let mut half = vec![0.0; 1 + nm];
    half[0] = 0.5 * r_ball;
    for h in half.iter_mut().skip(1) {
        *h = r_ball;
    }
    let mut best = ToySup {
        value: f64::NEG_INFINITY,
        t: 0.0,
        v_minus: vec![0.0; nm],
    };
    for _round in 0..6 {
        let mut idx = vec![0usize; 1 + nm];
        let steps = density + 1;
        let mut best_here: Option<Vec<f64>> = None;
        loop {
            // grid point
            let mut z = vec![0.0; 1 + nm];
            let mut ok = true;
            for d in 0..=nm {
                let frac = idx[d] as f64 / density as f64;
                z[d] = center[d] - half[d] + 2.0 * half[d] * frac;
            }
            if z[0] < 0.0 {
                ok = false;
            }
            let norm2: f64 = z.iter().map(|v| v * v).sum();
            if norm2 > r_ball * r_ball * (1.0 + 1e-12) {
                ok = false;
            }
            if ok {
                let w = tp.assemble(&unit, z[0], &z[1..]);
                let val = tp.j(&w);
                if val > best.value {
                    best = ToySup {
                        value: val,
                        t: z[0],
                        v_minus: z[1..].to_vec(),
                    };
                    best_here = Some(z.clone());
                }
            }
            // advance the multi-index
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d > nm {
                    break;
                }
            }
            if d > nm {
                break;
            }
        }
        // zoom toward the argmax
        if let Some(z) = best_here {
            center = z;
        } else {
            center[0] = best.t;
            center[1..].copy_from_slice(&best.v_minus);
        }
        for h in half.iter_mut() {
            *h = (*h * 2.0 / density as f64).max(1e-12);
        }
    }
    best
}

/// Sampled inf of J over the sphere |x+| = r in X+; the coordinate axes are
/// always included, which is where the infimum sits for the power toy.
pub fn toy_sphere_infimum(tp: &ToyProblem, r: f64, samples: usize, rng: &mut impl Rng) -> f64 {
    let np = tp.n_plus;
    let mut inf = f64::INFINITY;
    let mut eval_dir = |dir: &[f64]| {
        let w = tp.assemble(dir, r, &vec![0.0; tp.n_minus]);
        let v = tp.j(&w);
        if v < inf {
            inf = v;
        }
    };
    for i in 0..np {
        let mut e = vec![0.0; np];
        e[i] = 1.0;
        eval_dir(&e);
    }
    for _ in 0..samples {
        let mut d: Vec<f64> = (0..np)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in d.iter_mut() {
            *v /= n;
        }
        eval_dir(&d);
    }
    inf
}

/// Largest r in a halving sweep of (0, 1] with inf_{S_r^+} J >= r^2/4.
pub fn toy_link_radius(tp: &ToyProblem, samples: usize, rng: &mut impl Rng) -> Result<(f64, f64)> {
    let mut r = 1.0;
    for _ in 0..24 {
        let inf = toy_sphere_infimum(tp, r, samples, rng);
        if inf >= r * r / 4.0 {
            return Ok((r, inf));
        }
        r *= 0.5;
    }
    Err(Error::GeometryFailure(
        "toy linking radius not found down to 2^-24".into(),
    ))
}

/// Nehari-Pankov search outcome.
#[derive(Debug, Clone)]
pub struct NehariOutcome {
    pub infimum: f64,
    pub points: Vec<Vec<f64>>,
    pub failures: usize,
}

/// For random u+ directions, solves the stationarity system
/// dJ(w)(w) = 0, dJ(w)(e_k^-) = 0 with w = t u+ + v by damped Newton from
/// the half-ball maximizer; returns the minimum of J over found points.
/// Requires lambda = 0 (where (A4) holds).
pub fn toy_nehari_infimum(
    tp: &ToyProblem,
    n_directions: usize,
    density: usize,
    rng: &mut impl Rng,
) -> Result<NehariOutcome> {
    if tp.lambda != 0.0 {
        return Err(Error::LambdaNotZero { lambda: tp.lambda });
    }
    let nm = tp.n_minus;
    let mut points = Vec::new();
    let mut failures = 0usize;
    let mut infimum = f64::INFINITY;
    for d in 0..n_directions {
        let mut dir: Vec<f64> = (0..tp.n_plus)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        if d < tp.n_plus {
            // always include the coordinate axes
            dir = vec![0.0; tp.n_plus];
            dir[d] = 1.0;
        }
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in dir.iter_mut() {
            *v /= n;
        }
        let start = toy_c_upper(tp, &dir, 4.0, density);
        match newton_nehari(tp, &dir, start.t.max(0.1), &start.v_minus) {
            Some((t, v)) => {
                let w = tp.assemble(&dir, t, &v);
                let val = tp.j(&w);
                // stationarity guard
                let mut resid: f64 = tp.dj(&w, &w).abs();
                for k in 0..nm {
                    let mut e = vec![0.0; tp.dim()];
                    e[tp.n_plus + k] = 1.0;
                    resid = resid.max(tp.dj(&w, &e).abs());
                }
                if resid < 1e-10 && t > 1e-8 {
                    if val < infimum {
                        infimum = val;
                    }
                    points.push(w);
                } else {
                    failures += 1;
                }
            }
            None => failures += 1,
        }
    }
    if points.is_empty() {
        return Err(Error::GeometryFailure(
            "no Nehari-Pankov point found in any sampled direction".into(),
        ));
    }
    Ok(NehariOutcome {
        infimum,
        points,
        failures,
    })
}

/// Damped Newton on the (1 + n_minus)-dimensional stationarity system.
fn newton_nehari(tp: &ToyProblem, dir: &[f64], t0: f64, v0: &[f64]) -> Option<(f64, Vec<f64>)> {
    let nm = tp.n_minus;
    let dim = 1 + nm;
    let residual = |t: f64, v: &[f64]| -> Vec<f64> {
        let w = tp.assemble(dir, t, v);
        let mut e = vec![0.0; dim];
        e[0] = tp.dj(&w, &w);
        for k in 0..nm {
            let mut ek = vec![0.0; tp.dim()];
            ek[tp.n_plus + k] = 1.0;
            e[1 + k] = tp.dj(&w, &ek);
        }
        e
    };
    let mut t = t0;
    let mut v = v0.to_vec();
    let mut e = residual(t, &v);
    let mut enorm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..80 {
        if enorm < 1e-13 {
            return Some((t, v));
        }
        let w = tp.assemble(dir, t, &v);
        let h = tp.hess_diag(&w);
        let mut jac = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        // dE0/dt = d2J[u][w] + dJ(u), dE0/dv_l = d2J[e_l][w] + dJ(e_l)
        let u_pad = tp.assemble(dir, 1.0, &vec![0.0; nm]);
        let mut d2_uw = 0.0;
        for i in 0..tp.dim() {
            d2_uw += h[i] * u_pad[i] * w[i];
        }
        jac[(0, 0)] = d2_uw + tp.dj(&w, &u_pad);
        for l in 0..nm {
            let i = tp.n_plus + l;
            let mut el = vec![0.0; tp.dim()];
            el[i] = 1.0;
            jac[(0, 1 + l)] = h[i] * w[i] + tp.dj(&w, &el);
            // dE_k/dt = d2J[u][e_k] = 0 by the block structure; filled exactly
            jac[(1 + l, 0)] = h[i] * u_pad[i];
            jac[(1 + l, 1 + l)] = h[i];
        }
        let rhs = nalgebra::DVector::from_iterator(dim, e.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let tt = t + alpha * step[0];
            let tv: Vec<f64> = v
                .iter()
                .enumerate()
                .map(|(k, &vk)| vk + alpha * step[1 + k])
                .collect();
            let te = residual(tt.max(0.0), &tv);
            let tn: f64 = te.iter().map(|x| x * x).sum::<f64>().sqrt();
            if tn < enorm * (1.0 - 1e-4 * alpha) || tn < 1e-14 {
                t = tt.max(0.0);
                v = tv;
                e = te;
                enorm = tn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if enorm < 1e-10 {
        Some((t, v))
    } else {
        None
    }
}

/// (A4) sampling report at found Nehari-Pankov points.
#[derive(Debug, Clone, Serialize)]
pub struct A4Report {
    pub samples: usize,
    pub violations: usize,
    /// max |dJ(u)((t^2-1)/2 u + t v)| over samples; 0 at lambda = 0.
    pub max_identity_residual: f64,
}

/// Checks J(u) >= J(tu+v) - 1e-10 for random (t, v) at each point, and the
/// lambda = 0 annihilation identity. For lambda > 0 violations are counted
/// without assertion.
pub fn toy_check_a4(
    tp: &ToyProblem,
    points: &[Vec<f64>],
    samples: usize,
    rng: &mut impl Rng,
) -> A4Report {
    let mut violations = 0usize;
    let mut max_identity = 0.0_f64;
    let mut total = 0usize;
    for u in points {
        for _ in 0..samples {
            total += 1;
            let t: f64 = rng.random_range(0.0..3.0);
            let v: Vec<f64> = (0..tp.n_minus)
                .map(|_| {
                    let g: f64 = rng.sample(rand_distr::StandardNormal);
                    1.5 * g
                })
                .collect();
            let mut shifted = vec![0.0; tp.dim()];
            for i in 0..tp.dim() {
                shifted[i] = t * u[i];
            }
            for (k, &vk) in v.iter().enumerate() {
                shifted[tp.n_plus + k] += vk;
            }
            if tp.j(u) < tp.j(&shifted) - 1e-10 {
                violations += 1;
            }
            let mut probe = vec![0.0; tp.dim()];
            let s = (t * t - 1.0) / 2.0;
            for i in 0..tp.dim() {
                probe[i] = s * u[i];
            }
            for (k, &vk) in v.iter().enumerate() {
                probe[tp.n_plus + k] += t * vk;
            }
            max_identity = max_identity.max(tp.dj(u, &probe).abs());
        }
    }
    A4Report {
        samples: total,
        violations,
        max_identity_residual: max_identity,
    }
}

/// The full ordering-chain report for one toy.
#[derive(Debug, Clone, Serialize)]
pub struct ToyChainReport {
    pub n_plus: usize,
    pub n_minus: usize,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub r_link: f64,
    pub inf_sphere: f64,
    /// min over sampled directions of the identity-deformation upper bound;
    /// an upper bound for the minimax level c, not c itself.
    pub c_upper: f64,
    pub nehari_infimum: f64,
    pub nehari_failures: usize,
    pub chain_ok: bool,
    pub a4: A4Report,
    pub key_inequality_violations: usize,
    pub key_inequality_samples: usize,
}

/// Brute-forces the chain inf_{S_r^+} J <= c_upper <= inf_N J (tol 1e-6)
/// and samples the key inequality. Requires lambda = 0.
pub fn toy_chain(
    tp: &ToyProblem,
    n_directions: usize,
    density: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<ToyChainReport> {
    let (r_link, inf_sphere) = toy_link_radius(tp, 2000, rng)?;
    let nehari = toy_nehari_infimum(tp, n_directions, density, rng)?;
    // c_upper at each direction that produced a Nehari point, with a ball
    // large enough to contain it
    let mut c_upper = f64::INFINITY;
    for w in &nehari.points {
        let norm_w: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = w[..tp.n_plus].to_vec();
        if dir.iter().all(|&d| d == 0.0) {
            continue;
        }
        let sup = toy_c_upper(tp, &dir, (2.0 * norm_w).max(4.0 * r_link), density);
        c_upper = c_upper.min(sup.value);
    }
    let a4 = toy_check_a4(tp, &nehari.points, samples / nehari.points.len().max(1), rng);
    // key inequality on random full-space samples
    let mut violations = 0usize;
    for _ in 0..samples {
        let x: Vec<f64> = (0..tp.dim())
            .map(|_| {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                1.2 * g
            })
            .collect();
        let t: f64 = rng.random_range(0.0..2.5);
        let v: Vec<f64> = (0..tp.n_minus)
            .map(|_| {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                g
            })
            .collect();
        let mut shifted: Vec<f64> = x.iter().map(|&xi| t * xi).collect();
        let mut probe: Vec<f64> = x.iter().map(|&xi| (t * t - 1.0) / 2.0 * xi).collect();
        for (k, &vk) in v.iter().enumerate() {
            shifted[tp.n_plus + k] += vk;
            probe[tp.n_plus + k] += t * vk;
        }
        let gap = tp.j(&x) - tp.j(&shifted) + tp.dj(&x, &probe);
        if gap < -1e-10 {
            violations += 1;
        }
    }
    let tol = 1e-6;
    let chain_ok = inf_sphere <= c_upper + tol && c_upper <= nehari.infimum + tol;
    Ok(ToyChainReport {
        n_plus: tp.n_plus,
        n_minus: tp.n_minus,
        p: tp.p,
        q: tp.q,
        lambda: tp.lambda,
        r_link,
        inf_sphere,
        c_upper,
        nehari_infimum: nehari.infimum,
        nehari_failures: nehari.failures,
        chain_ok,
        a4,
        key_inequality_violations: violations,
        key_inequality_samples: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn c_upper_reproduces_1d_closed_form() {
        // n_plus = n_minus = 1, p = 4, lambda = 0: max of t^2/2 - t^4/4 is 1/4 at t = 1
        let tp = ToyProblem::new(1, 1, 4.0, 3.0, 0.0).unwrap();
        let sup = toy_c_upper(&tp, &[1.0], 4.0, 64);
        assert!((sup.value - 0.25).abs() < 1e-8, "sup = {}", sup.value);
        assert!((sup.t - 1.0).abs() < 1e-4);
        assert!(sup.v_minus[0].abs() < 1e-4);
    }

    #[test]
    fn c_upper_monotone_in_density() {
        let tp = ToyProblem::new(2, 2, 4.0, 3.0, 0.0).unwrap();
        let dir = [0.8, 0.6];
        let coarse = toy_c_upper(&tp, &dir, 4.0, 16).value;
        let fine = toy_c_upper(&tp, &dir, 4.0, 32).value;
        assert!(fine >= coarse - 1e-12);
    }

    #[test]
    fn sphere_infimum_closed_form_lambda_zero() {
        // inf over S_r of J = r^2/2 - r^p/p (attained on coordinate axes)
        let tp = ToyProblem::new(3, 2, 4.0, 3.0, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for &r in &[0.3, 0.7, 1.0] {
            let inf = toy_sphere_infimum(&tp, r, 3000, &mut rng);
            let exact = r * r / 2.0 - r.powi(4) / 4.0;
            assert!((inf - exact).abs() < 1e-12, "inf = {inf}, exact = {exact}");
        }
    }

    #[test]
    fn nehari_classical_value() {
        // n_plus = 1, n_minus = 0: the classical Nehari infimum 1/4
        let tp = ToyProblem::new(1, 0, 4.0, 3.0, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let out = toy_nehari_infimum(&tp, 4, 48, &mut rng).unwrap();
        assert!((out.infimum - 0.25).abs() < 1e-8, "{}", out.infimum);
        assert_eq!(out.failures, 0);
        // found points satisfy stationarity
        for w in &out.points {
            assert!(tp.dj(w, w).abs() < 1e-10);
        }
    }

    #[test]
    fn nehari_requires_lambda_zero() {
        let tp = ToyProblem::new(1, 1, 4.0, 3.0, 0.1).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        assert!(matches!(
            toy_nehari_infimum(&tp, 2, 16, &mut rng),
            Err(Error::LambdaNotZero { .. })
        ));
    }

    #[test]
    fn a4_identity_and_no_violations() {
        let tp = ToyProblem::new(1, 1, 4.0, 3.0, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let out = toy_nehari_infimum(&tp, 4, 48, &mut rng).unwrap();
        let report = toy_check_a4(&tp, &out.points, 2500, &mut rng);
        assert_eq!(report.violations, 0);
        assert!(report.max_identity_residual < 1e-9);
    }

    #[test]
    fn ordering_chain_1_plus_1() {
        let tp = ToyProblem::new(1, 1, 4.0, 3.0, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let chain = toy_chain(&tp, 8, 48, 2000, &mut rng).unwrap();
        assert!(chain.chain_ok, "{chain:?}");
        assert_eq!(chain.key_inequality_violations, 0);
        assert!((chain.nehari_infimum - 0.25).abs() < 1e-8);
    }

    #[test]
    fn ordering_chain_2_plus_2() {
        let tp = ToyProblem::new(2, 2, 4.0, 3.0, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let chain = toy_chain(&tp, 8, 32, 2000, &mut rng).unwrap();
        assert!(chain.chain_ok, "{chain:?}");
        assert_eq!(chain.key_inequality_violations, 0);
        assert_eq!(chain.a4.violations, 0);
    }

    #[test]
    fn lambda_positive_a4_only_counted() {
        // for lambda > 0 the check runs without asserting; violations may occur
        let tp = ToyProblem::new(1, 1, 4.0, 3.0, 0.5).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(10);
        let point = vec![1.0, 0.3];
        let report = toy_check_a4(&tp, &[point], 500, &mut rng);
        assert_eq!(report.samples, 500);
    }
}
