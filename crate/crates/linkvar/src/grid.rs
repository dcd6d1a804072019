//! Reduced cylindrical discretization: the (r, z) tensor grid with the
//! weighted measure r^{K-1} dr dz, conservative assembly of
//! -Laplace + a/r^2 + V, and the weighted inner products.
//!
//! The radial grid is cell-centered so the singular coefficient a/r^2 is
//! never evaluated on the axis; quadrature weights are exact cell volumes,
//! so the total weight telescopes to the truncated-domain volume. Dirichlet
//! walls at r = Rmax and |z| = Zhalf are imposed through reflected ghost
//! values; the axis face carries the natural zero-flux closure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// Potential families. All are bounded and Z-periodic in z where required.
#[derive(Debug, Clone)]
pub enum Potential {
    /// V(r, z) = v0.
    Constant(f64),
    /// V(r, z) = v0 + radial_amp * exp(-(r/radial_sigma)^2) + axial_amp * cos(2 pi z).
    Separable {
        v0: f64,
        radial_amp: f64,
        radial_sigma: f64,
        axial_amp: f64,
    },
    /// V sampled from a tabulated (r, z) lattice, taken 1-periodic in z.
    Table(PotentialTable),
}

impl Potential {
    /// True when the potential splits as V1(r) + V2(z), enabling the
    /// tensor-product eigendecomposition.
    pub fn is_separable(&self) -> bool {
        !matches!(self, Potential::Table(_))
    }

    pub fn eval(&self, r: f64, z: f64) -> f64 {
        match self {
            Potential::Constant(v0) => *v0,
            Potential::Separable {
                v0,
                radial_amp,
                radial_sigma,
                axial_amp,
            } => {
                let s = r / radial_sigma;
                v0 + radial_amp * (-s * s).exp()
                    + axial_amp * (2.0 * std::f64::consts::PI * z).cos()
            }
            Potential::Table(t) => t.sample(r, z),
        }
    }

    fn is_z_dependent(&self) -> bool {
        match self {
            Potential::Constant(_) => false,
            Potential::Separable { axial_amp, .. } => *axial_amp != 0.0,
            Potential::Table(_) => true,
        }
    }
}

/// Bounded potential table on a regular (r, z) lattice, 1-periodic in z.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialTable {
    pub r_nodes: Vec<f64>,
    pub z_nodes: Vec<f64>,
    /// Row-major `[r_index][z_index]`.
    pub values: Vec<f64>,
}

impl PotentialTable {
    /// Bilinear sample with z wrapped into the unit period and r clamped.
    pub fn sample(&self, r: f64, z: f64) -> f64 {
        let zw = z.rem_euclid(1.0);
        let (nr, nz) = (self.r_nodes.len(), self.z_nodes.len());
        let fi = clamped_segment(&self.r_nodes, r);
        let fj = clamped_segment(&self.z_nodes, zw);
        let (i, ti) = fi;
        let (j, tj) = fj;
        let at = |i: usize, j: usize| self.values[i * nz + j];
        let i1 = (i + 1).min(nr - 1);
        let j1 = (j + 1).min(nz - 1);
        (1.0 - ti) * (1.0 - tj) * at(i, j)
            + ti * (1.0 - tj) * at(i1, j)
            + (1.0 - ti) * tj * at(i, j1)
            + ti * tj * at(i1, j1)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn clamped_segment(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, 0.0);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    let i = match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    };
    (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

/// The continuous problem: dimensions, singular coefficient, potential,
/// coupling and nonlinearity.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Ambient dimension, N >= 3.
    pub n_dim: usize,
    /// Symmetry dimension, 2 <= K <= N with N - K = 1.
    pub k_dim: usize,
    /// Singular coefficient, a > -(K-2)^2/4 (a > 0 for K = 2).
    pub a: f64,
    pub potential: Potential,
    /// Coupling of the competing term, lambda >= 0.
    pub lambda: f64,
    pub nonlinearity: NonlinearitySpec,
}

impl ProblemSpec {
    pub fn validate(&self, zhalf: f64) -> Result<()> {
        if self.n_dim < 3 {
            return Err(Error::InvalidSpec(format!("N must be >= 3, got {}", self.n_dim)));
        }
        if self.k_dim < 2 || self.k_dim > self.n_dim {
            return Err(Error::InvalidSpec(format!(
                "K must satisfy 2 <= K <= N, got K = {}",
                self.k_dim
            )));
        }
        if self.n_dim - self.k_dim != 1 {
            return Err(Error::InvalidSpec(format!(
                "only N - K = 1 is supported, got N = {}, K = {}",
                self.n_dim, self.k_dim
            )));
        }
        let hardy_floor = if self.k_dim == 2 {
            0.0
        } else {
            -((self.k_dim as f64 - 2.0).powi(2)) / 4.0
        };
        if !(self.a > hardy_floor) {
            return Err(Error::InvalidSpec(format!(
                "a = {} violates Hardy admissibility (requires a > {hardy_floor})",
                self.a
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidSpec(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Potential::Table(t) = &self.potential {
            if !t.sup_norm().is_finite() {
                return Err(Error::InvalidSpec("potential table is unbounded".into()));
            }
        }
        if self.potential.is_z_dependent() && zhalf.fract() != 0.0 {
            return Err(Error::InvalidSpec(format!(
                "Zhalf = {zhalf} must be an integer multiple of the unit z-period for z-dependent potentials"
            )));
        }
        self.nonlinearity.validate()?;
        let two_star = 2.0 * self.n_dim as f64 / (self.n_dim as f64 - 2.0);
        if !(self.nonlinearity.p < two_star) {
            return Err(Error::InvalidSpec(format!(
                "p = {} must be below 2N/(N-2) = {two_star}",
                self.nonlinearity.p
            )));
        }
        // exclude p = 2* exactly as well as the supercritical range
        let _ = two_star;
        Ok(())
    }

    /// The Maxwell reconstruction case: N = 3, K = 2, a = 1.
    pub fn is_maxwell_case(&self) -> bool {
        self.n_dim == 3 && self.k_dim == 2 && self.a == 1.0
    }
}

/// Surface measure of the unit sphere S^{k-1}.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI * sphere_area(k - 2) / (k as f64 - 2.0),
    }
}

/// Cell-centered (r, z) tensor grid with exact-volume quadrature weights.
#[derive(Debug, Clone)]
pub struct Grid {
    pub nr: usize,
    pub nz: usize,
    pub rmax: f64,
    pub zhalf: f64,
    pub dr: f64,
    pub dz: f64,
    /// Cell-centered radii, r_i = (i + 1/2) dr, all strictly positive.
    pub r_nodes: Vec<f64>,
    /// Cell-centered z nodes on [-Zhalf, Zhalf].
    pub z_nodes: Vec<f64>,
    /// Radial measures m_i = omega_K (r_{i+1/2}^K - r_{i-1/2}^K)/K.
    pub radial_measure: Vec<f64>,
    /// Full quadrature weights w_{ij} = m_i dz, row-major `[i][j]`.
    pub weights: Vec<f64>,
    k_dim: usize,
}

impl Grid {
    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    pub fn k_dim(&self) -> usize {
        self.k_dim
    }

    /// Weighted L2 inner product sum w_ij u_ij v_ij.
    pub fn inner_l2w(&self, u: &StateVector, v: &StateVector) -> Result<f64> {
        self.check_shape(u)?;
        self.check_shape(v)?;
        Ok(self.inner_l2w_slices(u.values(), v.values()))
    }

    pub fn inner_l2w_slices(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// L^k norm (sum w |u|^k)^{1/k}, k >= 1.
    pub fn norm_lk(&self, u: &StateVector, k: f64) -> Result<f64> {
        self.check_shape(u)?;
        assert!(k >= 1.0);
        Ok(self.norm_lk_slice(u.values(), k))
    }

    pub fn norm_lk_slice(&self, u: &[f64], k: f64) -> f64 {
        let s: f64 = self
            .weights
            .iter()
            .zip(u)
            .map(|(w, a)| w * crate::util::pow_abs(*a, k))
            .sum();
        s.powf(1.0 / k)
    }

    /// Weighted integral of a pointwise map of u (used for F, G energies).
    pub fn integrate_map(&self, u: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        self.weights.iter().zip(u).map(|(w, a)| w * f(*a)).sum()
    }

    pub fn check_shape(&self, u: &StateVector) -> Result<()> {
        if u.values().len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: u.values().len(),
            });
        }
        Ok(())
    }

    /// Fraction of |u|^2 mass carried by the outer 10% radial shell plus the
    /// outer 10% z slabs; used as the truncation-quality diagnostic.
    pub fn boundary_mass_fraction(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut outer = 0.0;
        for i in 0..self.nr {
            for j in 0..self.nz {
                let m = self.weights[self.idx(i, j)] * u[self.idx(i, j)] * u[self.idx(i, j)];
                total += m;
                let near_r = self.r_nodes[i] > 0.9 * self.rmax;
                let near_z = self.z_nodes[j].abs() > 0.9 * self.zhalf;
                if near_r || near_z {
                    outer += m;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outer / total
        }
    }
}

/// Nodal values of a discrete state u with an optional cached
/// eigenbasis decomposition.
#[derive(Debug, Clone)]
pub struct StateVector {
    values: Vec<f64>,
    cached: Option<Vec<f64>>,
}

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, cached: None }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access drops any cached decomposition.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.cached = None;
        &mut self.values
    }

    pub fn cached_coeffs(&self) -> Option<&[f64]> {
        self.cached.as_deref()
    }

    pub fn set_cached_coeffs(&mut self, coeffs: Vec<f64>) {
        self.cached = Some(coeffs);
    }
}

/// Builds the cell-centered grid. Requires Nr, Nz >= 8.
pub fn build_grid(spec: &ProblemSpec, nr: usize, nz: usize, rmax: f64, zhalf: f64) -> Result<Grid> {
    if nr < 8 || nz < 8 {
        return Err(Error::InvalidResolution { nr, nz });
    }
    if !(rmax > 0.0 && zhalf > 0.0) {
        return Err(Error::InvalidSpec("Rmax and Zhalf must be positive".into()));
    }
    let k = spec.k_dim;
    let dr = rmax / nr as f64;
    let dz = 2.0 * zhalf / nz as f64;
    let r_nodes: Vec<f64> = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
    let z_nodes: Vec<f64> = (0..nz).map(|j| -zhalf + (j as f64 + 0.5) * dz).collect();
    let omega = sphere_area(k);
    let radial_measure: Vec<f64> = (0..nr)
        .map(|i| {
            let lo = i as f64 * dr;
            let hi = (i + 1) as f64 * dr;
            omega * (hi.powi(k as i32) - lo.powi(k as i32)) / k as f64
        })
        .collect();
    let mut weights = Vec::with_capacity(nr * nz);
    for m in &radial_measure {
        for _ in 0..nz {
            weights.push(m * dz);
        }
    }
    Ok(Grid {
        nr,
        nz,
        rmax,
        zhalf,
        dr,
        dz,
        r_nodes,
        z_nodes,
        radial_measure,
        weights,
        k_dim: k,
    })
}

/// One-dimensional operator in conservative flux form, symmetric with
/// respect to its cell measure.
#[derive(Debug, Clone)]
pub struct Tridiag1D {
    /// Cell measures.
    pub measure: Vec<f64>,
    /// Interior face conductances, length n-1.
    pub cond: Vec<f64>,
    /// Wall conductances (0 for a natural closure).
    pub bnd_lo: f64,
    pub bnd_hi: f64,
    /// Diagonal potential terms.
    pub diag: Vec<f64>,
}

impl Tridiag1D {
    pub fn n(&self) -> usize {
        self.measure.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = 0.0;
            if i > 0 {
                acc += self.cond[i - 1] * (x[i] - x[i - 1]);
            } else {
                acc += self.bnd_lo * x[i];
            }
            if i + 1 < n {
                acc += self.cond[i] * (x[i] - x[i + 1]);
            } else {
                acc += self.bnd_hi * x[i];
            }
            out[i] = acc / self.measure[i] + self.diag[i] * x[i];
        }
    }

    /// Energy sum cond (dx)^2 + wall terms + sum m diag x^2; equals
    /// the measure-weighted quadratic form of `apply` exactly.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut e = self.bnd_lo * x[0] * x[0] + self.bnd_hi * x[n - 1] * x[n - 1];
        for i in 0..n - 1 {
            let d = x[i + 1] - x[i];
            e += self.cond[i] * d * d;
        }
        for i in 0..n {
            e += self.measure[i] * self.diag[i] * x[i] * x[i];
        }
        e
    }

    /// Dense symmetric form B = M^{1/2} A M^{-1/2} for direct eigensolves.
    pub fn dense_symmetric(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut b = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            let mut d = self.diag[i] * self.measure[i];
            if i > 0 {
                d += self.cond[i - 1];
            } else {
                d += self.bnd_lo;
            }
            if i + 1 < n {
                d += self.cond[i];
            } else {
                d += self.bnd_hi;
            }
            b[(i, i)] = d / self.measure[i];
            if i + 1 < n {
                let off = -self.cond[i] / (self.measure[i] * self.measure[i + 1]).sqrt();
                b[(i, i + 1)] = off;
                b[(i + 1, i)] = off;
            }
        }
        b
    }
}

/// The discretized operator A = -r^{1-K} d_r (r^{K-1} d_r) - d_z^2
/// + a/r^2 + V, stored as a Kronecker sum plus a non-separable remainder.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    pub radial: Tridiag1D,
    pub axial: Tridiag1D,
    /// Non-separable potential remainder on the full grid (None when the
    /// potential splits, enabling the tensor eigendecomposition).
    pub coupling: Option<Vec<f64>>,
    nr: usize,
    nz: usize,
}

impl SymmetricOperator {
    pub fn shape(&self) -> (usize, usize) {
        (self.nr, self.nz)
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_separable(&self) -> bool {
        self.coupling.is_none()
    }

    /// A u, row-major. O(Nr Nz) per application.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nr, nz) = (self.nr, self.nz);
        debug_assert_eq!(u.len(), nr * nz);
        // axial part, contiguous rows
        let mut row = vec![0.0; nz];
        for i in 0..nr {
            self.axial.apply(&u[i * nz..(i + 1) * nz], &mut row);
            out[i * nz..(i + 1) * nz].copy_from_slice(&row);
        }
        // radial part, strided columns
        let mut col = vec![0.0; nr];
        let mut res = vec![0.0; nr];
        for j in 0..nz {
            for i in 0..nr {
                col[i] = u[i * nz + j];
            }
            self.radial.apply(&col, &mut res);
            for i in 0..nr {
                out[i * nz + j] += res[i];
            }
        }
        if let Some(c) = &self.coupling {
            for (o, (cv, uv)) in out.iter_mut().zip(c.iter().zip(u)) {
                *o += cv * uv;
            }
        }
    }

    pub fn apply_state(&self, u: &StateVector) -> StateVector {
        let mut out = vec![0.0; self.len()];
        self.apply(u.values(), &mut out);
        StateVector::new(out)
    }

    /// The quadratic form <A u, u>_{L2w} computed from face-flux energies;
    /// agrees with the inner product route to rounding.
    pub fn quadratic_form(&self, u: &[f64], grid: &Grid) -> f64 {
        let (nr, nz) = (self.nr, self.nz);
        let mut e = 0.0;
        // axial energies weighted by radial measure
        for i in 0..nr {
            e += grid.radial_measure[i] * self.axial.energy(&u[i * nz..(i + 1) * nz]);
        }
        // radial energies weighted by dz
        let mut col = vec![0.0; nr];
        for j in 0..nz {
            for i in 0..nr {
                col[i] = u[i * nz + j];
            }
            e += grid.dz * self.radial.energy(&col);
        }
        if let Some(c) = &self.coupling {
            for (idx, w) in grid.weights.iter().enumerate() {
                e += w * c[idx] * u[idx] * u[idx];
            }
        }
        e
    }

    /// Flux (gradient) energy plus the singular a/r^2 term, with all
    /// potential contributions removed: int |grad u|^2 + a u^2/r^2.
    pub fn gradient_and_singular_energy(&self, u: &[f64], grid: &Grid, spec: &ProblemSpec) -> f64 {
        let q = self.quadratic_form(u, grid);
        let mut pot = 0.0;
        for i in 0..self.nr {
            for j in 0..self.nz {
                let idx = grid.idx(i, j);
                pot += grid.weights[idx]
                    * spec.potential.eval(grid.r_nodes[i], grid.z_nodes[j])
                    * u[idx]
                    * u[idx];
            }
        }
        q - pot
    }
}

/// Assembles the operator for `spec` on `grid` in conservative flux form.
pub fn assemble_operator(spec: &ProblemSpec, grid: &Grid) -> SymmetricOperator {
    let (nr, nz) = (grid.nr, grid.nz);
    let k = spec.k_dim as i32;
    let omega = sphere_area(spec.k_dim);

    // radial face conductances omega * r_face^{K-1} / dr
    let face_r = |i: usize| ((i + 1) as f64 * grid.dr).powi(k - 1) * omega / grid.dr;
    let cond_r: Vec<f64> = (0..nr - 1).map(face_r).collect();
    let bnd_hi_r = 2.0 * face_r(nr - 1);

    let (v_r, v_z, coupling): (Vec<f64>, Vec<f64>, Option<Vec<f64>>) = match &spec.potential {
        Potential::Constant(v0) => (
            vec![0.0; nr],
            vec![*v0; nz],
            None,
        ),
        Potential::Separable {
            v0,
            radial_amp,
            radial_sigma,
            axial_amp,
        } => {
            let vr = grid
                .r_nodes
                .iter()
                .map(|&r| {
                    let s = r / radial_sigma;
                    radial_amp * (-s * s).exp()
                })
                .collect();
            let vz = grid
                .z_nodes
                .iter()
                .map(|&z| v0 + axial_amp * (2.0 * std::f64::consts::PI * z).cos())
                .collect();
            (vr, vz, None)
        }
        Potential::Table(t) => {
            let mut c = Vec::with_capacity(nr * nz);
            for &r in &grid.r_nodes {
                for &z in &grid.z_nodes {
                    c.push(t.sample(r, z));
                }
            }
            (vec![0.0; nr], vec![0.0; nz], Some(c))
        }
    };

    let radial = Tridiag1D {
        measure: grid.radial_measure.clone(),
        cond: cond_r,
        bnd_lo: 0.0,
        bnd_hi: bnd_hi_r,
        diag: grid
            .r_nodes
            .iter()
            .zip(&v_r)
            .map(|(&r, &v)| spec.a / (r * r) + v)
            .collect(),
    };
    let axial = Tridiag1D {
        measure: vec![grid.dz; nz],
        cond: vec![1.0 / grid.dz; nz - 1],
        bnd_lo: 2.0 / grid.dz,
        bnd_hi: 2.0 / grid.dz,
        diag: v_z,
    };
    SymmetricOperator {
        radial,
        axial,
        coupling,
        nr,
        nz,
    }
}

/// Result of the discrete Hardy-inequality sampling.
#[derive(Debug, Clone, Serialize)]
pub struct HardyReport {
    pub constant: f64,
    pub worst_ratio: f64,
    pub samples: usize,
}

/// Verifies int u^2/r^2 <= (2/(K-2))^2 int |grad u|^2 on random smooth
/// samples; K > 2 required.
pub fn hardy_check(
    grid: &Grid,
    k_dim: usize,
    samples: usize,
    rng: &mut impl rand::Rng,
) -> HardyReport {
    assert!(k_dim > 2, "the Hardy inequality requires K > 2");
    let constant = (2.0 / (k_dim as f64 - 2.0)).powi(2);
    // flux-only operator: a = 0, V = 0
    let omega = sphere_area(k_dim);
    let face_r = |i: usize| ((i + 1) as f64 * grid.dr).powi(k_dim as i32 - 1) * omega / grid.dr;
    let flux = SymmetricOperator {
        radial: Tridiag1D {
            measure: grid.radial_measure.clone(),
            cond: (0..grid.nr - 1).map(face_r).collect(),
            bnd_lo: 0.0,
            bnd_hi: 2.0 * face_r(grid.nr - 1),
            diag: vec![0.0; grid.nr],
        },
        axial: Tridiag1D {
            measure: vec![grid.dz; grid.nz],
            cond: vec![1.0 / grid.dz; grid.nz - 1],
            bnd_lo: 2.0 / grid.dz,
            bnd_hi: 2.0 / grid.dz,
            diag: vec![0.0; grid.nz],
        },
        coupling: None,
        nr: grid.nr,
        nz: grid.nz,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = random_smooth_field(grid, rng);
        let grad = flux.quadratic_form(&u, grid);
        let mut sing = 0.0;
        for i in 0..grid.nr {
            let inv_r2 = 1.0 / (grid.r_nodes[i] * grid.r_nodes[i]);
            for j in 0..grid.nz {
                let idx = grid.idx(i, j);
                sing += grid.weights[idx] * u[idx] * u[idx] * inv_r2;
            }
        }
        if grad > 0.0 {
            worst = worst.max(sing / grad);
        }
    }
    HardyReport {
        constant,
        worst_ratio: worst,
        samples,
    }
}

/// Sum of a few Gaussian bumps centered away from the axis and walls.
pub fn random_smooth_field(grid: &Grid, rng: &mut impl rand::Rng) -> Vec<f64> {
    let bumps = 3;
    let mut centers = Vec::new();
    for _ in 0..bumps {
        let r0: f64 = rng.random_range(0.25 * grid.rmax..0.75 * grid.rmax);
        let z0: f64 = rng.random_range(-0.6 * grid.zhalf..0.6 * grid.zhalf);
        let s: f64 = rng.random_range(0.08 * grid.rmax..0.2 * grid.rmax);
        let amp: f64 = rng.random_range(-1.0..1.0);
        centers.push((r0, z0, s, amp));
    }
    let mut u = vec![0.0; grid.len()];
    for i in 0..grid.nr {
        for j in 0..grid.nz {
            let (r, z) = (grid.r_nodes[i], grid.z_nodes[j]);
            let mut v = 0.0;
            for &(r0, z0, s, amp) in &centers {
                let d2 = (r - r0) * (r - r0) + (z - z0) * (z - z0);
                v += amp * (-d2 / (s * s)).exp();
            }
            u[grid.idx(i, j)] = v;
        }
    }
    u
}
