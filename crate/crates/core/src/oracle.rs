//! Independent finite-difference Dirichlet eigensolver for the slit rectangle
//! ([-a1, a2] x [0, 1]) minus the barrier {0} x (closure of [0,1] \ Gamma).

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::modebasis::Opening;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid grid configuration: {0}")]
    Config(String),
    #[error("operator is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("eigen-iteration did not converge: worst residual {residual:e} after {basis} basis vectors")]
    NoConvergence { residual: f64, basis: usize },
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Default grid spacing.
pub const DEFAULT_SPACING: f64 = 1.0 / 240.0;

/// Mass ratio above which a mode counts as localized.
pub const LOCALIZATION_RATIO: f64 = 10.0;

const GEOM_TOL: f64 = 1e-9;
const NODE_TOL: f64 = 1e-12;

/// Uniform grid on the slit rectangle. Columns i = 0..=nx1+nx2 sit at
/// x = (i - nx1) s, rows j = 0..=ny at y = j s; the barrier line is column nx1.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub a1: f64,
    pub a2: f64,
    /// None for a closed barrier (h = 0).
    pub opening: Option<Opening>,
    pub s: f64,
    nx1: usize,
    nx2: usize,
    ny: usize,
    /// Unknown index per (column, row), row-major over columns; usize::MAX for Dirichlet nodes.
    index: Vec<usize>,
    /// Column of each unknown.
    node_col: Vec<usize>,
}

fn integer_ratio(len: f64, s: f64, what: &str) -> Result<usize> {
    let r = len / s;
    let n = r.round();
    if (r - n).abs() > GEOM_TOL * r.max(1.0) || n < 2.0 {
        return Err(OracleError::Config(format!("{what} = {len} is not an integer multiple (>= 2) of s = {s}")));
    }
    Ok(n as usize)
}

impl GridSpec {
    pub fn new(a1: f64, a2: f64, opening: Option<Opening>, s: f64) -> Result<Self> {
        for (name, v) in [("a1", a1), ("a2", a2), ("s", s)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OracleError::Config(format!("{name} must be positive (got {v})")));
            }
        }
        let resolve = opening.map_or(a2, |o| o.width().min(a2));
        if s > resolve / 4.0 * (1.0 + GEOM_TOL) {
            return Err(OracleError::Config(format!(
                "spacing s = {s} does not resolve the geometry: need s <= min(h, a2)/4 = {}",
                resolve / 4.0
            )));
        }
        let nx1 = integer_ratio(a1, s, "a1")?;
        let nx2 = integer_ratio(a2, s, "a2")?;
        let ny = integer_ratio(1.0, s, "1")?;
        let ncol = nx1 + nx2 + 1;
        let mut index = vec![usize::MAX; ncol * (ny + 1)];
        let mut node_col = Vec::new();
        for i in 1..ncol - 1 {
            for j in 1..ny {
                if i == nx1 {
                    let y = j as f64 * s;
                    let open = opening.is_some_and(|o| y > o.g_lo + NODE_TOL && y < o.g_hi - NODE_TOL);
                    if !open {
                        continue;
                    }
                }
                index[i * (ny + 1) + j] = node_col.len();
                node_col.push(i);
            }
        }
        Ok(Self { a1, a2, opening, s, nx1, nx2, ny, index, node_col })
    }

    /// Opening Gamma = (0, h); h = 0 closes the barrier, h = 1 removes it.
    pub fn with_wall_opening(a1: f64, a2: f64, h: f64, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&h) {
            return Err(OracleError::Config(format!("h must lie in [0, 1] (got {h})")));
        }
        let opening = if h == 0.0 {
            None
        } else {
            Some(Opening::from_wall(h).map_err(|e| OracleError::Config(e.to_string()))?)
        };
        Self::new(a1, a2, opening, s)
    }

    pub fn unknowns(&self) -> usize {
        self.node_col.len()
    }

    /// Grid columns (x direction) including the two Dirichlet end columns.
    pub fn columns(&self) -> usize {
        self.nx1 + self.nx2 + 1
    }

    pub fn rows(&self) -> usize {
        self.ny + 1
    }

    /// Unknown index at grid node (column i, row j), if that node is free.
    pub fn node(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.columns() || j > self.ny {
            return None;
        }
        let k = self.index[i * (self.ny + 1) + j];
        (k != usize::MAX).then_some(k)
    }

    /// Coordinates of grid node (i, j).
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 - self.nx1 as f64) * self.s, j as f64 * self.s)
    }

    /// Column index of the barrier line x = 0.
    pub fn barrier_column(&self) -> usize {
        self.nx1
    }
}

/// Symmetric 5-point Laplacian in lower-band storage.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    bw: usize,
    /// Row i holds entries (i, i - bw ..= i) at i * (bw + 1) + (j + bw - i).
    band: Vec<f64>,
    /// Strictly lower nonzeros (i, j, value) for the matrix-vector product.
    lower: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry (i, j); symmetric access.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[i * (self.bw + 1) + j + self.bw - i]
        }
    }

    /// Nonzero count of row i.
    pub fn row_nnz(&self, i: usize) -> usize {
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        (lo..=hi).filter(|&j| self.get(i, j) != 0.0).count()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.bw + 1;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.band[i * w + self.bw] * x[i];
        }
        for &(i, j, a) in &self.lower {
            y[i] += a * x[j];
            y[j] += a * x[i];
        }
    }

    /// Banded Cholesky factor A = L L^T.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let w = self.bw + 1;
        let mut l = self.band.clone();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(self.bw));
                let ri = i * w + self.bw - i;
                let rj = j * w + self.bw - j;
                let sum = l[ri + j] - dot(&l[ri + klo..ri + j], &l[rj + klo..rj + j]);
                if j == i {
                    if sum <= 0.0 {
                        return Err(OracleError::NotPositiveDefinite(i));
                    }
                    l[ri + i] = sum.sqrt();
                } else {
                    l[ri + j] = sum / l[rj + j];
                }
            }
        }
        Ok(BandCholesky { n: self.n, bw: self.bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Overwrites b with A^{-1} b.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let ri = i * w + self.bw - i;
            b[i] = (b[i] - dot(&self.l[ri + lo..ri + i], &b[lo..i])) / self.l[ri + i];
        }
        for i in (0..self.n).rev() {
            let lo = i.saturating_sub(self.bw);
            let ri = i * w + self.bw - i;
            b[i] /= self.l[ri + i];
            let xi = b[i];
            axpy(-xi, &self.l[ri + lo..ri + i], &mut b[lo..i]);
        }
    }
}

/// 5-point stencil with Dirichlet elimination.
pub fn assemble(grid: &GridSpec) -> SparseOperator {
    let n = grid.unknowns();
    let inv = 1.0 / (grid.s * grid.s);
    let mut bw = 0;
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..grid.columns() {
        for j in 0..grid.rows() {
            let Some(k) = grid.node(i, j) else { continue };
            entries.push((k, k, 4.0 * inv));
            // Lower-triangle neighbours only: previous column and previous row.
            for (ii, jj) in [(i.wrapping_sub(1), j), (i, j.wrapping_sub(1))] {
                if let Some(kk) = grid.node(ii, jj) {
                    bw = bw.max(k - kk);
                    entries.push((k, kk, -inv));
                }
            }
        }
    }
    let w = bw + 1;
    let mut band = vec![0.0; n * w];
    for &(i, j, v) in &entries {
        band[i * w + j + bw - i] = v;
    }
    let lower = entries.into_iter().filter(|&(i, j, _)| i != j).collect();
    SparseOperator { n, bw, band, lower }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit Euclidean norm; sign fixed so the largest-magnitude entry is positive.
    pub vector: Vec<f64>,
    /// ||A v - lambda v|| / lambda.
    pub residual: f64,
}

/// Controls for the shift-invert block Krylov iteration.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub seed: u64,
    pub block: usize,
    pub max_basis: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { seed: 1, block: 4, max_basis: 240 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Orthogonalises v against the basis twice; returns the remaining norm ratio.
fn orthogonalize(basis: &[Vec<f64>], v: &mut [f64]) -> f64 {
    let before = dot(v, v).sqrt();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
    if before == 0.0 {
        0.0
    } else {
        dot(v, v).sqrt() / before
    }
}

/// The k smallest eigenpairs with default iteration options.
pub fn smallest_eigenpairs(op: &SparseOperator, k: usize, tol: f64) -> Result<Vec<EigenPair>> {
    smallest_eigenpairs_with(op, k, tol, EigenOptions::default())
}

/// Shift-invert (sigma = 0) block Krylov iteration with full reorthogonalisation
/// and Rayleigh-Ritz on the inverse. Blocks handle degenerate eigenvalues.
pub fn smallest_eigenpairs_with(op: &SparseOperator, k: usize, tol: f64, opts: EigenOptions) -> Result<Vec<EigenPair>> {
    if k == 0 || k > 12 {
        return Err(OracleError::Config(format!("k must lie in 1..=12 (got {k})")));
    }
    let n = op.dim();
    if k > n {
        return Err(OracleError::Config(format!("k = {k} exceeds the operator dimension {n}")));
    }
    let p = opts.block.max(1).min(n);
    let max_basis = opts.max_basis.min(n).max(k);
    let chol = op.cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vec = |basis: &[Vec<f64>]| -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if orthogonalize(basis, &mut v) > 1e-8 {
                normalize(&mut v);
                return v;
            }
        }
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    // t[i][j] = q_i^T A^{-1} q_j, filled as columns are created.
    let mut t = DMatrix::<f64>::zeros(max_basis, max_basis);
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let v = random_vec(&basis);
        basis.push(v.clone());
        block.push(v);
        if basis.len() == max_basis {
            break;
        }
    }
    let mut worst;
    let mut scratch = vec![0.0; n];
    loop {
        let first = basis.len() - block.len();
        let images: Vec<Vec<f64>> = block
            .par_iter()
            .map(|q| {
                let mut w = q.clone();
                chol.solve_in_place(&mut w);
                w
            })
            .collect();
        for (c, w) in images.iter().enumerate() {
            let col = first + c;
            for (r, q) in basis.iter().enumerate() {
                let v = dot(q, w);
                t[(r, col)] = v;
                t[(col, r)] = v;
            }
        }
        let m = basis.len();
        if m >= k + p || m == max_basis {
            let tm = t.view((0, 0), (m, m)).into_owned();
            let tm = (&tm + tm.transpose()) * 0.5;
            let eig = SymmetricEigen::new(tm);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let mut pairs = Vec::with_capacity(k);
            worst = 0.0f64;
            for &idx in order.iter().take(k) {
                let theta = eig.eigenvalues[idx];
                let lambda = 1.0 / theta;
                let mut v = vec![0.0; n];
                for (r, q) in basis.iter().enumerate() {
                    axpy(eig.eigenvectors[(r, idx)], q, &mut v);
                }
                normalize(&mut v);
                let imax = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map_or(0, |x| x.0);
                if v[imax] < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                op.matvec(&v, &mut scratch);
                axpy(-lambda, &v, &mut scratch);
                let residual = dot(&scratch, &scratch).sqrt() / lambda;
                worst = worst.max(residual);
                pairs.push(EigenPair { lambda, vector: v, residual });
            }
            if worst <= tol {
                return Ok(pairs);
            }
            if m == max_basis {
                break;
            }
        }
        let mut next = Vec::with_capacity(p);
        for mut w in images {
            if basis.len() == max_basis {
                break;
            }
            if orthogonalize(&basis, &mut w) < 1e-10 {
                w = random_vec(&basis);
            } else {
                normalize(&mut w);
            }
            basis.push(w.clone());
            next.push(w);
        }
        block = next;
    }
    Err(OracleError::NoConvergence { residual: worst, basis: basis.len() })
}

/// Discrete squared norm on the x < 0 and x > 0 sides; barrier-line nodes split evenly.
pub fn subdomain_mass(vector: &[f64], grid: &GridSpec) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (v, &col) in vector.iter().zip(&grid.node_col) {
        let e = v * v;
        match col.cmp(&grid.nx1) {
            std::cmp::Ordering::Less => m1 += e,
            std::cmp::Ordering::Greater => m2 += e,
            std::cmp::Ordering::Equal => {
                m1 += 0.5 * e;
                m2 += 0.5 * e;
            }
        }
    }
    let total = m1 + m2;
    if total > 0.0 {
        (m1 / total, m2 / total)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Localization {
    Omega1,
    Omega2,
    Delocalized,
}

impl std::fmt::Display for Localization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Localization::Omega1 => "omega1",
            Localization::Omega2 => "omega2",
            Localization::Delocalized => "delocalized",
        })
    }
}

/// Classification by the mass ratio threshold.
pub fn classify(m1: f64, m2: f64) -> Localization {
    if m1 > LOCALIZATION_RATIO * m2 {
        Localization::Omega1
    } else if m2 > LOCALIZATION_RATIO * m1 {
        Localization::Omega2
    } else {
        Localization::Delocalized
    }
}

/// Opening widths of the reference table.
pub const REFERENCE_H: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 1.0];

/// Reference first six eigenvalues for a1 = 1, a2 = 0.8; REFERENCE_TABLE[n][column].
pub const REFERENCE_TABLE: [[f64; 5]; 6] = [
    [19.74, 19.79, 19.70, 18.39, 12.92],
    [25.29, 25.39, 25.22, 23.58, 22.05],
    [49.35, 49.42, 48.77, 41.40, 37.29],
    [49.35, 49.59, 49.49, 49.33, 42.52],
    [54.30, 55.04, 54.52, 53.32, 51.66],
    [71.55, 72.01, 70.99, 62.88, 58.61],
];

/// Continuum eigenvalues of the two limit geometries (h = 0: disjoint rectangles,
/// h = 1: the full rectangle), smallest k.
pub fn limit_eigenvalues(a1: f64, a2: f64, h: f64, k: usize) -> Vec<f64> {
    let rect = |lx: f64| -> Vec<f64> {
        let mut v = Vec::new();
        for p in 1..=k {
            for q in 1..=k {
                v.push(PI * PI * ((p as f64 / lx).powi(2) + (q as f64).powi(2)));
            }
        }
        v
    };
    let mut all = if h >= 1.0 {
        rect(a1 + a2)
    } else {
        let mut v = rect(a1);
        v.extend(rect(a2));
        v
    };
    all.sort_by(f64::total_cmp);
    all.truncate(k);
    all
}

/// One oracle mode: raw values on the fine and coarse grids plus the extrapolation.
#[derive(Debug, Clone)]
pub struct OracleMode {
    pub n: usize,
    pub fine: f64,
    pub coarse: f64,
    pub extrapolated: f64,
    pub residual: f64,
    pub m1: f64,
    pub m2: f64,
    pub class: Localization,
}

#[derive(Debug, Clone)]
pub struct OracleColumn {
    pub h: f64,
    pub s_fine: f64,
    pub unknowns: usize,
    pub modes: Vec<OracleMode>,
}

/// Second-order Richardson extrapolation from spacings s and 2s.
pub fn richardson(fine: f64, coarse: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Solves one geometry on spacings s and 2s and extrapolates.
pub fn oracle_column(a1: f64, a2: f64, h: f64, s_fine: f64, k: usize, tol: f64, seed: u64) -> Result<OracleColumn> {
    let opts = EigenOptions { seed, ..EigenOptions::default() };
    let fine_grid = GridSpec::with_wall_opening(a1, a2, h, s_fine)?;
    let coarse_grid = GridSpec::with_wall_opening(a1, a2, h, 2.0 * s_fine)?;
    let coarse = smallest_eigenpairs_with(&assemble(&coarse_grid), k, tol, opts)?;
    let fine = smallest_eigenpairs_with(&assemble(&fine_grid), k, tol, opts)?;
    let modes = fine
        .iter()
        .zip(&coarse)
        .enumerate()
        .map(|(i, (f, c))| {
            let (m1, m2) = subdomain_mass(&f.vector, &fine_grid);
            OracleMode {
                n: i + 1,
                fine: f.lambda,
                coarse: c.lambda,
                extrapolated: richardson(f.lambda, c.lambda),
                residual: f.residual,
                m1,
                m2,
                class: classify(m1, m2),
            }
        })
        .collect();
    Ok(OracleColumn { h, s_fine, unknowns: fine_grid.unknowns(), modes })
}

/// Oracle reproduction of the reference table (a1 = 1, a2 = 0.8), one column per h.
pub fn oracle_table(s_fine: f64, tol: f64, seed: u64) -> Result<Vec<OracleColumn>> {
    REFERENCE_H.iter().map(|&h| oracle_column(1.0, 0.8, h, s_fine, 6, tol, seed)).collect()
}
