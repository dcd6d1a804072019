//! The energy functional J, its first variation, Riesz gradients in the
//! X-inner product, and the strong-form PDE residual.

use crate::error::{Error, Result};
use crate::grid::{Grid, ProblemSpec, StateVector, SymmetricOperator};
use crate::nonlinearity::{self, NonlinearitySpec};
use crate::spectral::SpectralSplit;

/// Everything needed to evaluate J and its derivatives: the grid, the
/// spectral splitting (whose |lambda_i| diagonal is the X-metric), and the
/// problem data including lambda and the nonlinearity.
pub struct FunctionalContext<'a> {
    pub grid: &'a Grid,
    pub split: &'a SpectralSplit,
    pub op: &'a SymmetricOperator,
    pub spec: &'a ProblemSpec,
    /// Test hook: treat f = g = 0, leaving the pure quadratic part.
    pub quadratic_only: bool,
}

impl<'a> FunctionalContext<'a> {
    pub fn new(
        grid: &'a Grid,
        split: &'a SpectralSplit,
        op: &'a SymmetricOperator,
        spec: &'a ProblemSpec,
    ) -> Self {
        Self {
            grid,
            split,
            op,
            spec,
            quadratic_only: false,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    fn nl(&self) -> &NonlinearitySpec {
        &self.spec.nonlinearity
    }

    /// The nonlinear energy int F(u) - lambda int G(u).
    pub fn nonlinear_energy(&self, values: &[f64]) -> f64 {
        if self.quadratic_only {
            return 0.0;
        }
        let nl = self.nl();
        let lambda = self.lambda();
        self.grid.integrate_map(values, |u| {
            nonlinearity::eval_F(nl, u) - lambda * nonlinearity::eval_G(nl, u)
        })
    }

    /// Pointwise f(u) - lambda g(u).
    pub fn nonlin_term(&self, values: &[f64]) -> Vec<f64> {
        if self.quadratic_only {
            return vec![0.0; values.len()];
        }
        let nl = self.nl();
        let lambda = self.lambda();
        values
            .iter()
            .map(|&u| nonlinearity::eval_f(nl, u) - lambda * nonlinearity::eval_g(nl, u))
            .collect()
    }

    /// Pointwise f'(u) - lambda g'(u), the Jacobian diagonal of the
    /// nonlinear term.
    pub fn nonlin_term_prime(&self, values: &[f64]) -> Vec<f64> {
        if self.quadratic_only {
            return vec![0.0; values.len()];
        }
        let nl = self.nl();
        let lambda = self.lambda();
        values
            .iter()
            .map(|&u| {
                nonlinearity::eval_f_prime(nl, u) - lambda * nonlinearity::eval_g_prime(nl, u)
            })
            .collect()
    }

    /// J(u) from known coefficients and grid values of the same state.
    pub fn j_coeffs_values(&self, coeffs: &[f64], values: &[f64]) -> f64 {
        let (_, plus, minus) = self.split.energy_norms_of_coeffs(coeffs);
        0.5 * plus * plus - 0.5 * minus * minus - self.nonlinear_energy(values)
    }

    /// J(u) = ||u+||^2/2 - ||u-||^2/2 - int F(u) + lambda int G(u).
    pub fn j_value(&self, u: &StateVector) -> Result<f64> {
        self.grid.check_shape(u)?;
        let mass = self.split.unresolved_mass(u.values(), self.grid);
        if mass > 1e-8 {
            return Err(Error::UnresolvedComponent { mass });
        }
        let coeffs = match u.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.split.to_coeffs(u.values()),
        };
        Ok(self.j_coeffs_values(&coeffs, u.values()))
    }

    /// First variation J'(u)(v).
    pub fn dj(&self, u: &StateVector, v: &StateVector) -> f64 {
        let cu = match u.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.split.to_coeffs(u.values()),
        };
        let cv = match v.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.split.to_coeffs(v.values()),
        };
        self.dj_with(&cu, u.values(), &cv, v.values())
    }

    /// J'(u)(v) with both states pre-decomposed.
    pub fn dj_with(&self, cu: &[f64], u_values: &[f64], cv: &[f64], v_values: &[f64]) -> f64 {
        let mut quad = 0.0;
        for ((a, b), &l) in cu.iter().zip(cv).zip(self.split.eigvals()) {
            quad += l * a * b;
        }
        let nonlin = if self.quadratic_only {
            0.0
        } else {
            let nl = self.nl();
            let lambda = self.lambda();
            self.grid
                .weights
                .iter()
                .zip(u_values.iter().zip(v_values))
                .map(|(w, (&uu, &vv))| {
                    w * (nonlinearity::eval_f(nl, uu) - lambda * nonlinearity::eval_g(nl, uu)) * vv
                })
                .sum()
        };
        quad - nonlin
    }

    /// Coefficients of the X-gradient: <grad, v>_X = J'(u)(v) for every v in
    /// the resolved span; computed by dividing the weighted-L2 gradient
    /// coefficients by |lambda_i|.
    pub fn grad_x_coeffs(&self, coeffs: &[f64], values: &[f64]) -> Vec<f64> {
        let nt = self.nonlin_term(values);
        let n_coeffs = self.split.to_coeffs(&nt);
        coeffs
            .iter()
            .zip(&n_coeffs)
            .zip(self.split.eigvals())
            .map(|((c, n), &l)| (l * c - n) / l.abs())
            .collect()
    }

    /// The Riesz representative of J'(u) in the X-inner product.
    pub fn grad_x(&self, u: &StateVector) -> StateVector {
        let coeffs = match u.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.split.to_coeffs(u.values()),
        };
        let g = self.grad_x_coeffs(&coeffs, u.values());
        let mut out = StateVector::new(self.split.from_coeffs(&g));
        out.set_cached_coeffs(g);
        out
    }

    /// ||grad_X J(u)||_X, the residual norm used in all reports.
    pub fn grad_x_norm(&self, coeffs: &[f64], values: &[f64]) -> f64 {
        let g = self.grad_x_coeffs(coeffs, values);
        let (n, _, _) = self.split.energy_norms_of_coeffs(&g);
        n
    }

    /// Strong-form residual |A u - f(u) + lambda g(u)|_{L2w}.
    pub fn pde_residual(&self, u: &StateVector) -> f64 {
        let mut au = vec![0.0; u.values().len()];
        self.op.apply(u.values(), &mut au);
        let nt = self.nonlin_term(u.values());
        let mut r2 = 0.0;
        for ((a, n), w) in au.iter().zip(&nt).zip(&self.grid.weights) {
            let r = a - n;
            r2 += w * r * r;
        }
        r2.sqrt()
    }

    /// pde_residual normalized by |A u|_{L2w} + |f(u) - lambda g(u)|_{L2w}.
    pub fn pde_residual_relative(&self, u: &StateVector) -> f64 {
        let mut au = vec![0.0; u.values().len()];
        self.op.apply(u.values(), &mut au);
        let nt = self.nonlin_term(u.values());
        let mut r2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for ((a, n), w) in au.iter().zip(&nt).zip(&self.grid.weights) {
            let r = a - n;
            r2 += w * r * r;
            a2 += w * a * a;
            n2 += w * n * n;
        }
        let scale = a2.sqrt() + n2.sqrt();
        if scale == 0.0 {
            0.0
        } else {
            r2.sqrt() / scale
        }
    }

    /// Gap of the key inequality
    /// J(u) >= J(tu+v) - J'(u)((t^2-1)/2 u + tv), valid for lambda = 0;
    /// returns J(u) - J(tu+v) + J'(u)((t^2-1)/2 u + tv).
    pub fn key_inequality_gap(&self, u: &StateVector, t: f64, v_minus: &StateVector) -> Result<f64> {
        if self.lambda() != 0.0 {
            return Err(Error::LambdaNotZero { lambda: self.lambda() });
        }
        assert!(t >= 0.0);
        let n = u.values().len();
        let mut shifted = vec![0.0; n];
        for i in 0..n {
            shifted[i] = t * u.values()[i] + v_minus.values()[i];
        }
        let shifted = StateVector::new(shifted);
        let mut probe = vec![0.0; n];
        let s = (t * t - 1.0) / 2.0;
        for i in 0..n {
            probe[i] = s * u.values()[i] + t * v_minus.values()[i];
        }
        let probe = StateVector::new(probe);
        let ju = self.j_value(u)?;
        let js = self.j_value(&shifted)?;
        Ok(ju - js + self.dj(u, &probe))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_operator, build_grid, Potential};
    use crate::nonlinearity::{FFamily, GFamily, NonlinearitySpec};
    use crate::spectral::eigendecompose;
    use rand::{Rng, SeedableRng};

    struct Fixture {
        spec: ProblemSpec,
        grid: Grid,
        op: SymmetricOperator,
        split: SpectralSplit,
    }

    fn fixture(nr: usize, nz: usize, lambda: f64) -> Fixture {
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
        Fixture { spec, grid, op, split }
    }

    impl Fixture {
        fn ctx(&self) -> FunctionalContext<'_> {
            FunctionalContext::new(&self.grid, &self.split, &self.op, &self.spec)
        }

        fn random_state(&self, rng: &mut impl Rng, scale: f64) -> StateVector {
            let m = self.split.resolved();
            let c: Vec<f64> = (0..m)
                .map(|_| {
                    let g: f64 = rng.sample(rand_distr::StandardNormal);
                    scale * g / (1.0 + self.split.eigvals()[..].len() as f64).sqrt()
                })
                .collect();
            // damp high modes so states look like smooth fields
            let c: Vec<f64> = c
                .iter()
                .zip(self.split.eigvals())
                .map(|(ci, &l)| ci / (1.0 + l.abs()))
                .collect();
            let mut s = StateVector::new(self.split.from_coeffs(&c));
            s.set_cached_coeffs(c);
            s
        }
    }

    #[test]
    fn j_vanishes_at_zero() {
        let fx = fixture(16, 16, 0.1);
        let ctx = fx.ctx();
        let zero = StateVector::zeros(fx.grid.len());
        assert_eq!(ctx.j_value(&zero).unwrap(), 0.0);
    }

    #[test]
    fn j_is_quadratic_at_small_amplitude() {
        let fx = fixture(16, 16, 0.0);
        let ctx = fx.ctx();
        let idx = fx.split.lowest_positive();
        let l = fx.split.eigvals()[idx];
        let mut errs = Vec::new();
        for &t in &[1e-2, 1e-3] {
            let mut c = vec![0.0; fx.split.resolved()];
            c[idx] = t;
            let mut u = StateVector::new(fx.split.from_coeffs(&c));
            u.set_cached_coeffs(c);
            let j = ctx.j_value(&u).unwrap();
            // ||u||^2 = |l| t^2, so J ~ t^2 l/2 - O(t^4)
            errs.push((j / (t * t) - 0.5 * l).abs());
        }
        assert!(errs[1] < errs[0] * 0.1, "quadratic dominance failed: {errs:?}");
    }

    #[test]
    fn dj_vanishes_at_zero() {
        let fx = fixture(16, 16, 0.2);
        let ctx = fx.ctx();
        let zero = StateVector::zeros(fx.grid.len());
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10 {
            let v = fx.random_state(&mut rng, 1.0);
            assert!(ctx.dj(&zero, &v).abs() < 1e-14);
        }
    }

    #[test]
    fn dj_matches_central_differences() {
        let fx = fixture(16, 16, 0.05);
        let ctx = fx.ctx();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u = fx.random_state(&mut rng, 1.0);
            let v = fx.random_state(&mut rng, 1.0);
            let (nu, _, _) = fx.split.energy_norms(&u, &fx.grid).unwrap();
            let (nv, _, _) = fx.split.energy_norms(&v, &fx.grid).unwrap();
            let h = 1e-5 * nu.max(1e-6) / nv.max(1e-12);
            let mut plus = vec![0.0; fx.grid.len()];
            let mut minus = vec![0.0; fx.grid.len()];
            for i in 0..fx.grid.len() {
                plus[i] = u.values()[i] + h * v.values()[i];
                minus[i] = u.values()[i] - h * v.values()[i];
            }
            let jp = ctx.j_value(&StateVector::new(plus)).unwrap();
            let jm = ctx.j_value(&StateVector::new(minus)).unwrap();
            let fd = (jp - jm) / (2.0 * h);
            let exact = ctx.dj(&u, &v);
            let scale = exact.abs().max(1e-10);
            assert!(
                (fd - exact).abs() / scale < 1e-6,
                "dJ mismatch: fd={fd}, exact={exact}"
            );
        }
    }

    #[test]
    fn grad_x_represents_dj() {
        let fx = fixture(16, 16, 0.1);
        let ctx = fx.ctx();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        for _ in 0..50 {
            let u = fx.random_state(&mut rng, 0.8);
            let v = fx.random_state(&mut rng, 1.0);
            let g = ctx.grad_x(&u);
            // <g, v>_X = sum |l| c(g) c(v)
            let cg = g.cached_coeffs().unwrap();
            let cv = v.cached_coeffs().unwrap();
            let mut ip = 0.0;
            for ((a, b), &l) in cg.iter().zip(cv).zip(fx.split.eigvals()) {
                ip += l.abs() * a * b;
            }
            let dj = ctx.dj(&u, &v);
            assert!(
                (ip - dj).abs() < 1e-10 * dj.abs().max(1.0),
                "defining property broke: {ip} vs {dj}"
            );
        }
    }

    #[test]
    fn grad_x_quadratic_hook_is_reflection() {
        let fx = fixture(16, 16, 0.0);
        let mut ctx = fx.ctx();
        ctx.quadratic_only = true;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let u = fx.random_state(&mut rng, 1.0);
        let g = ctx.grad_x(&u);
        let up = fx.split.project(&u, true);
        let um = fx.split.project(&u, false);
        for i in 0..fx.grid.len() {
            let expected = up.values()[i] - um.values()[i];
            assert!((g.values()[i] - expected).abs() < 1e-10 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn pde_residual_cases() {
        let fx = fixture(16, 16, 0.0);
        let mut ctx = fx.ctx();
        let zero = StateVector::zeros(fx.grid.len());
        assert_eq!(ctx.pde_residual(&zero), 0.0);
        // eigvec with the quadratic hook: residual = |lambda_i| |v|_2
        ctx.quadratic_only = true;
        let s = fx.split.lowest_positive();
        let v = StateVector::new(fx.split.basis_field(s));
        let r = ctx.pde_residual(&v);
        let expected = fx.split.eigvals()[s].abs();
        assert!((r - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn j_is_even() {
        let fx = fixture(16, 16, 0.15);
        let ctx = fx.ctx();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(10);
        for _ in 0..20 {
            let u = fx.random_state(&mut rng, 1.3);
            let neg = StateVector::new(u.values().iter().map(|x| -x).collect());
            let ju = ctx.j_value(&u).unwrap();
            let jn = ctx.j_value(&neg).unwrap();
            assert!((ju - jn).abs() <= 1e-12 * ju.abs().max(1.0));
        }
    }

    #[test]
    fn key_inequality_identity_and_sampling() {
        let fx = fixture(16, 16, 0.0);
        let ctx = fx.ctx();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(12);
        let u = fx.random_state(&mut rng, 1.0);
        // t = 1, v = 0: exact identity case
        let zero = StateVector::zeros(fx.grid.len());
        let gap = ctx.key_inequality_gap(&u, 1.0, &zero).unwrap();
        assert!(gap.abs() < 1e-10);
        // random samples: gap nonnegative for the power f at lambda = 0
        for _ in 0..200 {
            let u = fx.random_state(&mut rng, 1.5);
            let v = fx.split.project(&fx.random_state(&mut rng, 1.5), false);
            let t: f64 = rng.random_range(0.0..3.0);
            let gap = ctx.key_inequality_gap(&u, t, &v).unwrap();
            assert!(gap >= -1e-10, "key inequality violated: gap = {gap}");
        }
    }

    #[test]
    fn key_inequality_requires_lambda_zero() {
        let fx = fixture(16, 16, 0.3);
        let ctx = fx.ctx();
        let zero = StateVector::zeros(fx.grid.len());
        assert!(matches!(
            ctx.key_inequality_gap(&zero, 1.0, &zero),
            Err(Error::LambdaNotZero { .. })
        ));
    }

    #[test]
    fn x_minus_rays_nonpositive_for_small_lambda() {
        // J(u-) <= 0 for lambda below the threshold, sampled across magnitudes
        let fx = fixture(16, 16, 0.005);
        let ctx = fx.ctx();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let raw = fx.random_state(&mut rng, 1.0);
            let um = fx.split.project(&raw, false);
            let (n, _, _) = fx.split.energy_norms(&um, &fx.grid).unwrap();
            if n == 0.0 {
                continue;
            }
            let exp10: f64 = rng.random_range(-2.0..2.0);
            let scale = 10f64.powf(exp10) / n;
            let v = StateVector::new(um.values().iter().map(|x| x * scale).collect());
            let j = ctx.j_value(&v).unwrap();
            assert!(j <= 1e-9, "J on X- ray positive: {j}");
        }
    }
}
