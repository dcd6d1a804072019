//! Eigendecomposition of the discretized operator and the spectral
//! splitting X = X+ (+) X-: projections, energy norms, the constants mu0
//! and kappa, and the tau-norm.
//!
//! Three backends sit behind one coefficient interface:
//! - tensor-product (full decomposition for separable potentials at any
//!   size, from the two 1D eigenproblems),
//! - dense (full, for small problems or cross-validation),
//! - Lanczos with full reorthogonalization (partial: all negative
//!   eigenpairs plus the smallest positive ones, for large non-separable
//!   problems).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, StateVector, SymmetricOperator, Tridiag1D};

/// Relative factor defining the operational spectral gap:
/// no resolved eigenvalue may lie within `GAP_TOL_FACTOR * max|lambda|` of 0.
pub const GAP_TOL_FACTOR: f64 = 1e-6;
/// Problems up to this size use the dense eigensolver when the tensor
/// route is unavailable.
pub const DENSE_LIMIT: usize = 4096;
/// Positive eigenpairs kept by the partial decomposition.
pub const PARTIAL_POSITIVE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Tensor,
    Dense,
    Lanczos,
}

/// Options for [`eigendecompose_with`].
#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Force a specific backend (used by cross-validation tests).
    pub force: Option<BackendKind>,
    /// Positive eigenpairs kept by the partial (Lanczos) route.
    pub n_positive: usize,
    pub dense_limit: usize,
    /// Ritz residual tolerance, relative to the spectral radius estimate.
    pub lanczos_tol: f64,
    pub lanczos_max_subspace: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            force: None,
            n_positive: PARTIAL_POSITIVE,
            dense_limit: DENSE_LIMIT,
            lanczos_tol: 1e-9,
            lanczos_max_subspace: 2048,
        }
    }
}

enum Backend {
    /// Explicit W^{1/2}-orthonormal eigenvectors (columns of `q`, sorted
    /// ascending by eigenvalue). A-eigenvectors are W^{-1/2} q.
    Explicit {
        q: DMatrix<f64>,
        w_sqrt: Vec<f64>,
    },
    /// Kronecker eigenbasis phi_k (x) psi_l from the two 1D problems.
    Tensor {
        /// nr x nr, columns m_r-orthonormal.
        phi: DMatrix<f64>,
        /// nz x nz, columns dz-orthonormal.
        psi: DMatrix<f64>,
        m_r: Vec<f64>,
        dz: f64,
        /// sorted mode index -> (radial mode, axial mode)
        order: Vec<(usize, usize)>,
    },
}

/// The spectral splitting: resolved eigenpairs, projections and norms.
pub struct SpectralSplit {
    backend: Backend,
    /// Ascending resolved eigenvalues.
    eigvals: Vec<f64>,
    n_minus: usize,
    mu0: f64,
    gap_tol: f64,
    /// Indices (into `eigvals`) of the X- basis (e_k), descending |lambda|.
    eks: Vec<usize>,
    total_dim: usize,
    partial: bool,
    kind: BackendKind,
    nr: usize,
    nz: usize,
}

/// Split metadata for reports.
#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub backend: BackendKind,
    pub total_dim: usize,
    pub resolved: usize,
    pub n_minus: usize,
    pub mu0: f64,
    pub gap_tol: f64,
    pub min_abs_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
    pub partial: bool,
}

impl SpectralSplit {
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn resolved(&self) -> usize {
        self.eigvals.len()
    }

    pub fn is_partial(&self) -> bool {
        self.partial
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Index (into the resolved set) of the smallest positive eigenvalue.
    pub fn lowest_positive(&self) -> usize {
        self.n_minus
    }

    /// X- basis indices ordered by descending |lambda| (the (e_k) order).
    pub fn ek_indices(&self) -> &[usize] {
        &self.eks
    }

    pub fn summary(&self) -> SplitSummary {
        let min_abs = self.eigvals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let max_abs = self.eigvals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        SplitSummary {
            backend: self.kind,
            total_dim: self.total_dim,
            resolved: self.resolved(),
            n_minus: self.n_minus,
            mu0: self.mu0,
            gap_tol: self.gap_tol,
            min_abs_eigenvalue: min_abs,
            max_abs_eigenvalue: max_abs,
            partial: self.partial,
        }
    }

    /// Coefficients of u in the resolved eigenbasis (ascending eigenvalue
    /// order), via the weighted inner product.
    pub fn to_coeffs(&self, u: &[f64]) -> Vec<f64> {
        match &self.backend {
            Backend::Explicit { q, w_sqrt } => {
                let scaled = DVector::from_iterator(
                    u.len(),
                    u.iter().zip(w_sqrt).map(|(a, w)| a * w),
                );
                let c = q.transpose() * scaled;
                c.iter().copied().collect()
            }
            Backend::Tensor {
                phi,
                psi,
                m_r,
                dz,
                order,
            } => {
                let (nr, nz) = (self.nr, self.nz);
                let mut scaled = DMatrix::from_row_slice(nr, nz, u);
                for i in 0..nr {
                    for j in 0..nz {
                        scaled[(i, j)] *= m_r[i];
                    }
                }
                let c = (phi.transpose() * scaled * psi) * *dz;
                order.iter().map(|&(k, l)| c[(k, l)]).collect()
            }
        }
    }

    /// Grid values of the state with the given resolved coefficients.
    pub fn from_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.resolved());
        match &self.backend {
            Backend::Explicit { q, w_sqrt } => {
                let c = DVector::from_column_slice(coeffs);
                let y = q * c;
                y.iter().zip(w_sqrt).map(|(v, w)| v / w).collect()
            }
            Backend::Tensor { phi, psi, order, .. } => {
                let mut c = DMatrix::zeros(self.nr, self.nz);
                for (s, &(k, l)) in order.iter().enumerate() {
                    c[(k, l)] = coeffs[s];
                }
                let u = phi * c * psi.transpose();
                let mut out = vec![0.0; self.nr * self.nz];
                for i in 0..self.nr {
                    for j in 0..self.nz {
                        out[i * self.nz + j] = u[(i, j)];
                    }
                }
                out
            }
        }
    }

    /// Relative L2w mass of u outside the resolved span (0 for full
    /// decompositions by completeness).
    pub fn unresolved_mass(&self, u: &[f64], grid: &Grid) -> f64 {
        if !self.partial {
            return 0.0;
        }
        let c = self.to_coeffs(u);
        let proj = self.from_coeffs(&c);
        let mut res2 = 0.0;
        let mut tot2 = 0.0;
        for ((uv, pv), w) in u.iter().zip(&proj).zip(&grid.weights) {
            res2 += w * (uv - pv) * (uv - pv);
            tot2 += w * uv * uv;
        }
        if tot2 == 0.0 {
            0.0
        } else {
            (res2 / tot2).sqrt()
        }
    }

    fn check_resolved(&self, u: &[f64], grid: &Grid) -> Result<()> {
        let mass = self.unresolved_mass(u, grid);
        if mass > 1e-8 {
            return Err(Error::UnresolvedComponent { mass });
        }
        Ok(())
    }

    /// Projection u^+ or u^-.
    pub fn project(&self, u: &StateVector, positive: bool) -> StateVector {
        let mut c = match u.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.to_coeffs(u.values()),
        };
        for (ci, &l) in c.iter_mut().zip(&self.eigvals) {
            if (l > 0.0) != positive {
                *ci = 0.0;
            }
        }
        let vals = self.from_coeffs(&c);
        let mut out = StateVector::new(vals);
        out.set_cached_coeffs(c);
        out
    }

    /// Energy norms (||u||, ||u+||, ||u-||) from resolved coefficients;
    /// errors if a partial decomposition misses mass of u.
    pub fn energy_norms(&self, u: &StateVector, grid: &Grid) -> Result<(f64, f64, f64)> {
        self.check_resolved(u.values(), grid)?;
        let c = match u.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.to_coeffs(u.values()),
        };
        Ok(self.energy_norms_of_coeffs(&c))
    }

    /// Energy norms straight from a coefficient vector.
    pub fn energy_norms_of_coeffs(&self, c: &[f64]) -> (f64, f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (ci, &l) in c.iter().zip(&self.eigvals) {
            let e = l.abs() * ci * ci;
            if l > 0.0 {
                plus += e;
            } else {
                minus += e;
            }
        }
        ((plus + minus).sqrt(), plus.sqrt(), minus.sqrt())
    }

    /// The tau-norm max{ ||u+||, sum_k 2^{-(k+1)} |<u-, e_k>| } with the
    /// X- basis (e_k) X-normalized and ordered by descending |lambda|.
    pub fn tau_norm(&self, u: &StateVector) -> f64 {
        let c = match u.cached_coeffs() {
            Some(c) => c.to_vec(),
            None => self.to_coeffs(u.values()),
        };
        self.tau_norm_of_coeffs(&c)
    }

    pub fn tau_norm_of_coeffs(&self, c: &[f64]) -> f64 {
        let (_, plus, _) = self.energy_norms_of_coeffs(c);
        let mut damped = 0.0;
        let mut weight = 0.25; // k = 1 term
        for &idx in &self.eks {
            damped += weight * (self.eigvals[idx].abs().sqrt() * c[idx]).abs();
            weight *= 0.5;
        }
        plus.max(damped)
    }

    /// Grid field of the s-th resolved eigenvector (unit L2w norm).
    pub fn basis_field(&self, s: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.resolved()];
        c[s] = 1.0;
        self.from_coeffs(&c)
    }
}

/// Decomposes the operator with default options.
pub fn eigendecompose(op: &SymmetricOperator, grid: &Grid) -> Result<SpectralSplit> {
    eigendecompose_with(op, grid, &EigOptions::default())
}

/// Decomposes with explicit backend/tolerance control.
pub fn eigendecompose_with(
    op: &SymmetricOperator,
    grid: &Grid,
    opts: &EigOptions,
) -> Result<SpectralSplit> {
    let kind = match opts.force {
        Some(k) => k,
        None => {
            if op.is_separable() {
                BackendKind::Tensor
            } else if op.len() <= opts.dense_limit {
                BackendKind::Dense
            } else {
                BackendKind::Lanczos
            }
        }
    };
    match kind {
        BackendKind::Tensor => tensor_split(op, grid),
        BackendKind::Dense => dense_split(op, grid),
        BackendKind::Lanczos => lanczos_split(op, grid, opts),
    }
}

fn finalize(
    backend: Backend,
    mut eigvals: Vec<f64>,
    total_dim: usize,
    partial: bool,
    kind: BackendKind,
    nr: usize,
    nz: usize,
    spectral_radius: f64,
) -> Result<SpectralSplit> {
    debug_assert!(eigvals.windows(2).all(|w| w[0] <= w[1]));
    let gap_tol = GAP_TOL_FACTOR * spectral_radius;
    for &l in &eigvals {
        if l.abs() < gap_tol {
            return Err(Error::SpectralGapViolation { value: l, tol: gap_tol });
        }
    }
    let n_minus = eigvals.iter().filter(|&&l| l < 0.0).count();
    if n_minus == 0 {
        return Err(Error::NoNegativeSpectrum);
    }
    let mu0 = eigvals
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
        .sqrt();
    let mut eks: Vec<usize> = (0..n_minus).collect();
    eks.sort_by(|&a, &b| eigvals[b].abs().partial_cmp(&eigvals[a].abs()).unwrap());
    // eigvals is already ascending; keep ownership
    eigvals.shrink_to_fit();
    Ok(SpectralSplit {
        backend,
        eigvals,
        n_minus,
        mu0,
        gap_tol,
        eks,
        total_dim,
        partial,
        kind,
        nr,
        nz,
    })
}

fn sorted_1d_eigs(t: &Tridiag1D) -> (Vec<f64>, DMatrix<f64>) {
    let b = t.dense_symmetric();
    let n = t.n();
    let se = nalgebra::SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| se.eigenvalues[a].partial_cmp(&se.eigenvalues[c]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    // m-orthonormal vectors phi = M^{-1/2} q
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, col)] = se.eigenvectors[(i, src)] / t.measure[i].sqrt();
        }
    }
    (vals, vecs)
}

fn tensor_split(op: &SymmetricOperator, grid: &Grid) -> Result<SpectralSplit> {
    assert!(op.is_separable());
    let (nr, nz) = op.shape();
    let (mu, phi) = sorted_1d_eigs(&op.radial);
    let (nu, psi) = sorted_1d_eigs(&op.axial);
    let mut modes: Vec<(f64, (usize, usize))> = Vec::with_capacity(nr * nz);
    for k in 0..nr {
        for l in 0..nz {
            modes.push((mu[k] + nu[l], (k, l)));
        }
    }
    modes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let eigvals: Vec<f64> = modes.iter().map(|m| m.0).collect();
    let order: Vec<(usize, usize)> = modes.iter().map(|m| m.1).collect();
    let radius = eigvals[0].abs().max(eigvals[eigvals.len() - 1].abs());
    finalize(
        Backend::Tensor {
            phi,
            psi,
            m_r: grid.radial_measure.clone(),
            dz: grid.dz,
            order,
        },
        eigvals,
        nr * nz,
        false,
        BackendKind::Tensor,
        nr,
        nz,
        radius,
    )
}

fn dense_split(op: &SymmetricOperator, grid: &Grid) -> Result<SpectralSplit> {
    let n = op.len();
    let (nr, nz) = op.shape();
    let w_sqrt: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    // B = W^{1/2} A W^{-1/2}, assembled column by column
    let mut b = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0 / w_sqrt[j];
        op.apply(&e, &mut col);
        for i in 0..n {
            b[(i, j)] = col[i] * w_sqrt[i];
        }
        e[j] = 0.0;
    }
    // exact symmetrization kills assembly rounding asymmetry
    let bt = b.transpose();
    b = (b + bt) * 0.5;
    let se = nalgebra::SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| se.eigenvalues[a].partial_cmp(&se.eigenvalues[c]).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut q = DMatrix::zeros(n, n);
    for (col_idx, &src) in order.iter().enumerate() {
        for i in 0..n {
            q[(i, col_idx)] = se.eigenvectors[(i, src)];
        }
    }
    let radius = eigvals[0].abs().max(eigvals[n - 1].abs());
    finalize(
        Backend::Explicit { q, w_sqrt },
        eigvals,
        n,
        false,
        BackendKind::Dense,
        nr,
        nz,
        radius,
    )
}

fn lanczos_split(op: &SymmetricOperator, grid: &Grid, opts: &EigOptions) -> Result<SpectralSplit> {
    let n = op.len();
    let (nr, nz) = op.shape();
    let w_sqrt: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let apply_b = |x: &[f64], out: &mut [f64], tmp: &mut [f64]| {
        for i in 0..n {
            tmp[i] = x[i] / w_sqrt[i];
        }
        op.apply(tmp, out);
        for i in 0..n {
            out[i] *= w_sqrt[i];
        }
    };

    let mut m = 256.min(n);
    loop {
        // Lanczos with full reorthogonalization
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        // deterministic start vector
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.37 * ((i * 2654435761 % 1000) as f64 / 1000.0))
            .collect();
        normalize(&mut v);
        let mut tmp = vec![0.0; n];
        let mut w = vec![0.0; n];
        for j in 0..m {
            basis.push(v.clone());
            apply_b(&v, &mut w, &mut tmp);
            let a = dot(&w, &v);
            alpha.push(a);
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi -= a * vi;
            }
            if j > 0 {
                let b_prev = beta[j - 1];
                for (wi, pi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= b_prev * pi;
                }
            }
            // two passes of reorthogonalization
            for _ in 0..2 {
                for prev in &basis {
                    let c = dot(&w, prev);
                    for (wi, pi) in w.iter_mut().zip(prev) {
                        *wi -= c * pi;
                    }
                }
            }
            let b_next = dot(&w, &w).sqrt();
            if j + 1 == m || b_next < 1e-14 {
                if b_next < 1e-14 {
                    m = j + 1;
                }
                break;
            }
            beta.push(b_next);
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / b_next;
            }
        }
        let m_eff = alpha.len();
        let mut t = DMatrix::zeros(m_eff, m_eff);
        for i in 0..m_eff {
            t[(i, i)] = alpha[i];
            if i + 1 < m_eff {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let se = nalgebra::SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m_eff).collect();
        order.sort_by(|&a, &c| se.eigenvalues[a].partial_cmp(&se.eigenvalues[c]).unwrap());
        let radius = se.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let tol = opts.lanczos_tol * radius;
        let beta_last = if m_eff < 2 { 0.0 } else { beta[m_eff - 2] };

        // collect converged Ritz pairs from the bottom
        let mut vals = Vec::new();
        let mut cols = Vec::new();
        let mut n_pos = 0usize;
        let mut hit_unconverged = false;
        for &idx in &order {
            let resid = (beta_last * se.eigenvectors[(m_eff - 1, idx)]).abs();
            if resid > tol {
                hit_unconverged = true;
                break;
            }
            let l = se.eigenvalues[idx];
            vals.push(l);
            cols.push(idx);
            if l > 0.0 {
                n_pos += 1;
                if n_pos >= opts.n_positive {
                    break;
                }
            }
        }
        let enough = n_pos >= opts.n_positive.min(n.saturating_sub(1)) && !vals.is_empty();
        if enough || m >= opts.lanczos_max_subspace.min(n) {
            if !enough && hit_unconverged {
                return Err(Error::MaxIterExceeded(
                    "Lanczos: requested eigenpairs did not converge".into(),
                ));
            }
            // assemble Ritz vectors q = basis * s
            let mut q = DMatrix::zeros(n, vals.len());
            for (out_col, &src) in cols.iter().enumerate() {
                for (j, bj) in basis.iter().enumerate() {
                    let s = se.eigenvectors[(j, src)];
                    if s == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        q[(i, out_col)] += s * bj[i];
                    }
                }
            }
            return finalize(
                Backend::Explicit { q, w_sqrt },
                vals,
                n,
                true,
                BackendKind::Lanczos,
                nr,
                nz,
                radius,
            );
        }
        m = (2 * m).min(opts.lanczos_max_subspace.min(n));
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

/// Lower estimate of the smallest kappa with |u^{+-}|_q <= kappa |u|_q:
/// maximum sampled ratio over random resolved states, refined by
/// normalized coordinate ascent, times the declared 1.1 safety factor.
pub fn kappa_estimate(
    split: &SpectralSplit,
    grid: &Grid,
    q: f64,
    n_samples: usize,
    rng: &mut impl rand::Rng,
) -> f64 {
    let m = split.resolved();
    let ratio_of = |c: &[f64]| -> f64 {
        let u = split.from_coeffs(c);
        let den = grid.norm_lk_slice(&u, q);
        if den == 0.0 {
            return 0.0;
        }
        let mut best = 0.0_f64;
        for positive in [true, false] {
            let mut cp = c.to_vec();
            for (ci, &l) in cp.iter_mut().zip(split.eigvals()) {
                if (l > 0.0) != positive {
                    *ci = 0.0;
                }
            }
            let up = split.from_coeffs(&cp);
            best = best.max(grid.norm_lk_slice(&up, q) / den);
        }
        best
    };
    let mut best_ratio = 0.0_f64;
    let mut best_c = vec![0.0; m];
    for _ in 0..n_samples {
        let c: Vec<f64> = (0..m)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let r = ratio_of(&c);
        if r > best_ratio {
            best_ratio = r;
            best_c = c;
        }
    }
    // normalized coordinate ascent from the best sample
    let scale = best_c.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let mut current = best_c;
    for step in 0..50 {
        let k = rng.random_range(0..m);
        let delta = scale * if step % 2 == 0 { 0.25 } else { 0.05 };
        let mut improved = false;
        for sgn in [1.0, -1.0] {
            let mut trial = current.clone();
            trial[k] += sgn * delta;
            let r = ratio_of(&trial);
            if r > best_ratio {
                best_ratio = r;
                current = trial;
                improved = true;
                break;
            }
        }
        if !improved {
            // keep current; ascent is best-effort
        }
    }
    best_ratio.max(1.0) * 1.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_operator, build_grid, Potential, ProblemSpec};
    use crate::nonlinearity::{FFamily, GFamily, NonlinearitySpec};
    use rand::SeedableRng;

    fn reference_like(nr: usize, nz: usize, v0: f64) -> (ProblemSpec, Grid, SymmetricOperator) {
        let spec = ProblemSpec {
            n_dim: 3,
            k_dim: 2,
            a: 1.0,
            potential: Potential::Constant(v0),
            lambda: 0.0,
            nonlinearity: NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::Power, 3.0, 1.0)
                .unwrap(),
        };
        let g = build_grid(&spec, nr, nz, 6.0, 4.0).unwrap();
        let op = assemble_operator(&spec, &g);
        (spec, g, op)
    }

    #[test]
    fn positive_operator_has_no_negative_spectrum() {
        let (_, g, op) = reference_like(12, 12, 1.0);
        match eigendecompose(&op, &g) {
            Err(Error::NoNegativeSpectrum) => {}
            other => panic!("expected NoNegativeSpectrum, got {other:?}", other = other.map(|_| ())),
        }
    }

    #[test]
    fn mu0_on_known_spectrum() {
        // diagonal toy operator with eigenvalues {-2, -0.5, 1, 3}
        let vals: [f64; 4] = [-2.0, -0.5, 1.0, 3.0];
        let mut sorted = vals.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mu0 = sorted
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
            .sqrt();
        assert!((mu0 - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((mu0 - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn tensor_matches_dense_route() {
        let (_, g, op) = reference_like(12, 10, -9.0);
        let tensor = eigendecompose_with(&op, &g, &EigOptions {
            force: Some(BackendKind::Tensor),
            ..EigOptions::default()
        })
        .unwrap();
        let dense = eigendecompose_with(&op, &g, &EigOptions {
            force: Some(BackendKind::Dense),
            ..EigOptions::default()
        })
        .unwrap();
        assert_eq!(tensor.n_minus(), dense.n_minus());
        assert_eq!(tensor.resolved(), dense.resolved());
        for (a, b) in tensor.eigvals().iter().zip(dense.eigvals()) {
            assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert!((tensor.mu0() - dense.mu0()).abs() < 1e-9);
    }

    #[test]
    fn lanczos_matches_dense_on_periodic_potential() {
        let spec = ProblemSpec {
            n_dim: 3,
            k_dim: 2,
            a: 1.0,
            potential: Potential::Table(crate::grid::PotentialTable {
                r_nodes: vec![0.0, 3.0, 6.0],
                z_nodes: vec![0.0, 0.25, 0.5, 0.75, 1.0],
                values: vec![
                    -9.0, -8.0, -9.5, -8.5, -9.0, //
                    -8.8, -9.2, -8.6, -9.1, -8.8, //
                    -9.3, -8.4, -9.0, -8.9, -9.3,
                ],
            }),
            lambda: 0.0,
            nonlinearity: NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::Power, 3.0, 1.0)
                .unwrap(),
        };
        let g = build_grid(&spec, 16, 16, 6.0, 4.0).unwrap();
        let op = assemble_operator(&spec, &g);
        assert!(!op.is_separable());
        let dense = eigendecompose_with(&op, &g, &EigOptions {
            force: Some(BackendKind::Dense),
            ..EigOptions::default()
        })
        .unwrap();
        let lanczos = eigendecompose_with(&op, &g, &EigOptions {
            force: Some(BackendKind::Lanczos),
            n_positive: 24,
            ..EigOptions::default()
        })
        .unwrap();
        assert!(lanczos.is_partial());
        assert_eq!(lanczos.n_minus(), dense.n_minus());
        for (a, b) in lanczos.eigvals().iter().zip(dense.eigvals()) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn projections_and_norms() {
        let (_, g, op) = reference_like(16, 16, -9.0);
        let split = eigendecompose(&op, &g).unwrap();
        assert!(split.n_minus() >= 1);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        for _ in 0..100 {
            let u = StateVector::new(crate::grid::random_smooth_field(&g, &mut rng));
            let up = split.project(&u, true);
            let um = split.project(&u, false);
            // completeness
            for ((a, b), c) in up.values().iter().zip(um.values()).zip(u.values()) {
                assert!((a + b - c).abs() < 1e-10 * c.abs().max(1.0));
            }
            // idempotence and orthogonality
            let upp = split.project(&up, true);
            for (a, b) in upp.values().iter().zip(up.values()) {
                assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
            }
            let ip = g.inner_l2w(&up, &um).unwrap();
            let scale = g.norm_lk(&u, 2.0).unwrap().powi(2);
            assert!(ip.abs() < 1e-12 * scale.max(1e-30));
            // norm additivity and the quadratic-form identity
            let (n, np, nm) = split.energy_norms(&u, &g).unwrap();
            assert!((n * n - (np * np + nm * nm)).abs() < 1e-10 * n * n);
            let au = op.apply_state(&u);
            let quad = g.inner_l2w(&au, &u).unwrap();
            assert!(
                (quad - (np * np - nm * nm)).abs() < 1e-10 * quad.abs().max(n * n),
                "spectral identity broke"
            );
            // mu0 lower bound
            let l2 = g.norm_lk(&u, 2.0).unwrap();
            assert!(split.mu0() * l2 <= n * (1.0 + 1e-10));
        }
    }

    #[test]
    fn eigvec_norm_is_sqrt_eigenvalue() {
        let (_, g, op) = reference_like(12, 12, -9.0);
        let split = eigendecompose(&op, &g).unwrap();
        for s in [0, split.n_minus() - 1, split.n_minus(), split.resolved() - 1] {
            let v = StateVector::new(split.basis_field(s));
            let (n, _, _) = split.energy_norms(&v, &g).unwrap();
            let expected = split.eigvals()[s].abs().sqrt();
            assert!((n - expected).abs() < 1e-9 * expected.max(1.0));
            // mu0 maximality: the min-|lambda| eigenvector achieves it
        }
        let min_idx = (0..split.resolved())
            .min_by(|&a, &b| {
                split.eigvals()[a]
                    .abs()
                    .partial_cmp(&split.eigvals()[b].abs())
                    .unwrap()
            })
            .unwrap();
        let v = StateVector::new(split.basis_field(min_idx));
        let (n, _, _) = split.energy_norms(&v, &g).unwrap();
        let l2 = g.norm_lk(&v, 2.0).unwrap();
        assert!((split.mu0() * l2 - n).abs() < 1e-10 * n);
    }

    #[test]
    fn tau_norm_examples_and_sandwich() {
        let (_, g, op) = reference_like(16, 16, -9.0);
        let split = eigendecompose(&op, &g).unwrap();
        // u = e_1 (first X- basis vector, X-normalized): tau = 1/4
        let idx = split.ek_indices()[0];
        let mut c = vec![0.0; split.resolved()];
        c[idx] = 1.0 / split.eigvals()[idx].abs().sqrt();
        let e1 = {
            let mut s = StateVector::new(split.from_coeffs(&c));
            s.set_cached_coeffs(c);
            s
        };
        assert!((split.tau_norm(&e1) - 0.25).abs() < 1e-12);
        // u in X+: tau = ||u+||
        let mut cp = vec![0.0; split.resolved()];
        cp[split.lowest_positive()] = 2.0;
        let up = {
            let mut s = StateVector::new(split.from_coeffs(&cp));
            s.set_cached_coeffs(cp);
            s
        };
        let (_, np, _) = split.energy_norms(&up, &g).unwrap();
        assert!((split.tau_norm(&up) - np).abs() < 1e-12 * np);
        // sandwich on random states
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(33);
        for _ in 0..1000 {
            let u = StateVector::new(crate::grid::random_smooth_field(&g, &mut rng));
            let (n, npl, _) = split.energy_norms(&u, &g).unwrap();
            let tau = split.tau_norm(&u);
            assert!(npl <= tau * (1.0 + 1e-10) + 1e-14);
            assert!(tau <= n * (1.0 + 1e-10) + 1e-14);
        }
    }

    #[test]
    fn kappa_contracts_at_q_two() {
        let (_, g, op) = reference_like(12, 12, -9.0);
        let split = eigendecompose(&op, &g).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let k = kappa_estimate(&split, &g, 2.0, 200, &mut rng);
        assert!((k - 1.1).abs() < 1e-9, "kappa at q=2 must be 1.1, got {k}");
    }

    #[test]
    fn single_eigvec_ratio_is_one() {
        let (_, g, op) = reference_like(12, 12, -9.0);
        let split = eigendecompose(&op, &g).unwrap();
        let v = split.basis_field(0); // negative mode
        let q = 3.0;
        let u = StateVector::new(v.clone());
        let um = split.project(&u, false);
        let ratio = g.norm_lk_slice(um.values(), q) / g.norm_lk_slice(&v, q);
        assert!((ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_config_n_minus_stable_under_refinement() {
        let (_, g48, op48) = reference_like(48, 48, -9.0);
        let s48 = eigendecompose(&op48, &g48).unwrap();
        let (_, g96, op96) = reference_like(96, 96, -9.0);
        let s96 = eigendecompose(&op96, &g96).unwrap();
        assert!(s96.n_minus() >= 1);
        assert_eq!(
            s48.n_minus(),
            s96.n_minus(),
            "negative eigenvalue count must agree between 48x48 and 96x96"
        );
        assert!(s96.mu0() > 0.0);
    }

    #[test]
    fn refinement_improves_separable_eigenvalue() {
        // second-order decrease of the lowest-eigenvalue error under doubling
        let exact = {
            // continuum lowest eigenvalue for K=2, a=1, V=-9 on the truncated
            // cylinder: (j_{1,1}/Rmax)^2 + (pi/(2 Zhalf))^2 - 9
            let j11 = 3.831705970207512;
            (j11 / 6.0_f64).powi(2) + (std::f64::consts::PI / 8.0).powi(2) - 9.0
        };
        let mut errors = Vec::new();
        for n in [32, 64, 128] {
            let (_, g, op) = reference_like(n, n, -9.0);
            let split = eigendecompose(&op, &g).unwrap();
            errors.push((split.eigvals()[0] - exact).abs());
        }
        // each doubling should cut the error by roughly 4; allow 3x
        assert!(errors[0] / errors[1] > 3.0, "{errors:?}");
        assert!(errors[1] / errors[2] > 3.0, "{errors:?}");
    }
}
