//! Transverse modes of the cross-section [0, 1], Galerkin bases on the
//! opening, overlap integrals and the per-mode branch factor.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use thiserror::Error;

use crate::specfun::{self, SpecFunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("cot pole of mode nu = {nu} at lambda = {lambda} (a = {a})")]
    Pole { nu: f64, lambda: f64, a: f64 },
    #[error("special function failure: {0}")]
    SpecFun(#[from] SpecFunError),
    #[error("opening Gram matrix is not positive definite (M = {0})")]
    Gram(usize),
}

pub type Result<T> = std::result::Result<T, BasisError>;

/// nu_n = pi^2 n^2.
pub fn transverse_eigenvalue(n: usize) -> f64 {
    let k = PI * n as f64;
    k * k
}

/// One Dirichlet mode of [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    pub n: usize,
    pub nu: f64,
}

impl TransverseMode {
    /// psi_n(y) = sqrt(2) sin(pi n y).
    pub fn eval(&self, y: f64) -> f64 {
        SQRT_2 * (PI * self.n as f64 * y).sin()
    }
}

/// (nu_n, psi_n) for n >= 1.
pub fn transverse_eigenpair(n: usize) -> Result<TransverseMode> {
    if n < 1 {
        return Err(BasisError::Domain("transverse mode index starts at 1".into()));
    }
    Ok(TransverseMode { n, nu: transverse_eigenvalue(n) })
}

/// The first `n_modes` transverse modes.
#[derive(Debug, Clone)]
pub struct TransverseBasis {
    pub modes: Vec<TransverseMode>,
}

impl TransverseBasis {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes < 1 {
            return Err(BasisError::Domain("need at least one transverse mode".into()));
        }
        Ok(Self { modes: (1..=n_modes).map(|n| TransverseMode { n, nu: transverse_eigenvalue(n) }).collect() })
    }
}

/// Single interval Gamma = (g_lo, g_hi) inside [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opening {
    pub g_lo: f64,
    pub g_hi: f64,
}

impl Opening {
    pub fn new(g_lo: f64, g_hi: f64) -> Result<Self> {
        if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo < 0.0 || g_hi > 1.0 || g_lo >= g_hi {
            return Err(BasisError::Domain(format!("opening ({g_lo}, {g_hi}) must satisfy 0 <= g_lo < g_hi <= 1")));
        }
        Ok(Self { g_lo, g_hi })
    }

    /// Gamma = (0, h).
    pub fn from_wall(h: f64) -> Result<Self> {
        Self::new(0.0, h)
    }

    pub fn width(&self) -> f64 {
        self.g_hi - self.g_lo
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.g_lo && y <= self.g_hi
    }

    fn shape(&self) -> Shape {
        match (self.g_lo == 0.0, self.g_hi == 1.0) {
            (true, true) => Shape::Full,
            (true, false) => Shape::LowerWall,
            (false, true) => Shape::UpperWall,
            (false, false) => Shape::Interior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Full,
    LowerWall,
    UpperWall,
    Interior,
}

/// Choice of Galerkin basis on the opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisKind {
    /// sqrt(2/h) sin(pi m (y - g_lo)/h): orthonormal, vanishes at both ends.
    Sine,
    /// Chebyshev-type functions with the square-root behaviour of the trace at
    /// a slit tip, orthonormalised on Gamma.
    #[default]
    Edge,
}

impl std::str::FromStr for BasisKind {
    type Err = BasisError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Self::Sine),
            "edge" => Ok(Self::Edge),
            other => Err(BasisError::Domain(format!("unknown basis `{other}` (sine | edge)"))),
        }
    }
}

/// Orthonormal basis on Gamma.
#[derive(Debug, Clone)]
pub struct OpeningBasis {
    pub opening: Opening,
    pub kind: BasisKind,
    pub m: usize,
    /// Coefficients of the orthonormal functions in the raw edge functions
    /// (L^{-1} of the Gram Cholesky factor); identity for the sine basis.
    coeffs: DMatrix<f64>,
}

impl OpeningBasis {
    pub fn sine(opening: Opening, m: usize) -> Self {
        Self { opening, kind: BasisKind::Sine, m, coeffs: DMatrix::identity(m, m) }
    }

    pub fn new(opening: Opening, kind: BasisKind, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(BasisError::Domain("basis size M must be >= 1".into()));
        }
        if kind == BasisKind::Sine || opening.shape() == Shape::Full {
            return Ok(Self::sine(opening, m));
        }
        let g = edge_gram(opening, m);
        let chol = Cholesky::new(g).ok_or(BasisError::Gram(m))?;
        let linv = chol.l().try_inverse().ok_or(BasisError::Gram(m))?;
        Ok(Self { opening, kind, m, coeffs: linv })
    }

    /// Effective basis kind (a full-width opening always uses sines).
    pub fn is_sine(&self) -> bool {
        self.kind == BasisKind::Sine || self.opening.shape() == Shape::Full
    }

    /// phi_m(y), m in 1..=M; zero outside Gamma.
    pub fn eval(&self, m: usize, y: f64) -> f64 {
        let o = self.opening;
        if !o.contains(y) {
            return 0.0;
        }
        let h = o.width();
        if self.is_sine() {
            return (2.0 / h).sqrt() * (PI * m as f64 * (y - o.g_lo) / h).sin();
        }
        let raw = |k: usize| -> f64 {
            match o.shape() {
                Shape::Interior => {
                    let t = ((2.0 * (y - o.g_lo) / h) - 1.0).clamp(-1.0, 1.0).acos();
                    (k as f64 * t).sin()
                }
                Shape::LowerWall => {
                    let t = (y / h).clamp(-1.0, 1.0).acos();
                    (2.0 * k as f64 * t).sin()
                }
                Shape::UpperWall => {
                    let t = ((1.0 - y) / h).clamp(-1.0, 1.0).acos();
                    (2.0 * k as f64 * t).sin()
                }
                Shape::Full => unreachable!(),
            }
        };
        (1..=m).map(|k| self.coeffs[(m - 1, k - 1)] * raw(k)).sum()
    }

    /// P[m][n] = (phi_m, psi_n) for n in 1..=n_max (columns).
    pub fn overlaps(&self, n_max: usize) -> Result<OverlapMatrix> {
        self.overlaps_range(1, n_max)
    }

    /// Overlap columns for n in n_lo..=n_hi.
    pub fn overlaps_range(&self, n_lo: usize, n_hi: usize) -> Result<OverlapMatrix> {
        if n_lo < 1 || n_hi < n_lo {
            return Err(BasisError::Domain(format!("bad mode range {n_lo}..={n_hi}")));
        }
        let ncols = n_hi - n_lo + 1;
        let mut p = DMatrix::zeros(self.m, ncols);
        if self.is_sine() {
            for (c, n) in (n_lo..=n_hi).enumerate() {
                for m in 1..=self.m {
                    p[(m - 1, c)] = sine_overlap(self.opening, m, n);
                }
            }
        } else {
            for (c, n) in (n_lo..=n_hi).enumerate() {
                let col = edge_raw_column(self.opening, self.m, n)?;
                for r in 0..self.m {
                    p[(r, c)] = (0..=r).map(|k| self.coeffs[(r, k)] * col[k]).sum();
                }
            }
        }
        Ok(OverlapMatrix { n_lo, p })
    }
}

/// Overlaps (phi_m, psi_n)_{L2(Gamma)}; column j holds mode n_lo + j.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    pub n_lo: usize,
    pub p: DMatrix<f64>,
}

impl OverlapMatrix {
    pub fn m(&self) -> usize {
        self.p.nrows()
    }

    pub fn n(&self) -> usize {
        self.p.ncols()
    }

    /// P[m][n] with 1-based m and n.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.p[(m - 1, n - self.n_lo)]
    }
}

/// Sine-basis overlap matrix (M x N) on Gamma.
pub fn overlap_matrix(opening: Opening, m: usize, n: usize) -> Result<OverlapMatrix> {
    if m < 1 || n < 1 {
        return Err(BasisError::Domain("M and N must be >= 1".into()));
    }
    OpeningBasis::sine(opening, m).overlaps(n)
}

/// Integral of cos(a y - phi) over (y1, y2), stable as a -> 0.
fn cos_integral(a: f64, phi: f64, y1: f64, y2: f64) -> f64 {
    let half = 0.5 * (y2 - y1);
    let mid = 0.5 * (y1 + y2);
    let t = a * half;
    // sin(t)/a = half * sinc(t)
    let sinc = if t.abs() < 1e-4 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    2.0 * (a * mid - phi).cos() * half * sinc
}

/// Closed-form (sqrt(2/h) sin(pi m (y - g_lo)/h), sqrt(2) sin(pi n y)) on Gamma.
fn sine_overlap(o: Opening, m: usize, n: usize) -> f64 {
    let h = o.width();
    let k1 = PI * m as f64 / h;
    let k2 = PI * n as f64;
    let phi = k1 * o.g_lo;
    // sin(k1 y - phi) sin(k2 y) = [cos((k1-k2) y - phi) - cos((k1+k2) y - phi)] / 2
    let a = cos_integral(k1 - k2, phi, o.g_lo, o.g_hi);
    let b = cos_integral(k1 + k2, phi, o.g_lo, o.g_hi);
    (2.0 / h).sqrt() * SQRT_2 * 0.5 * (a - b)
}

/// int_0^pi cos(j t) sin(t) dt.
fn cos_sin_moment(j: i64) -> f64 {
    if j.abs() == 1 {
        0.0
    } else if j % 2 == 0 {
        2.0 / (1.0 - (j * j) as f64)
    } else {
        0.0
    }
}

/// Gram matrix of the raw edge functions on Gamma.
fn edge_gram(o: Opening, m: usize) -> DMatrix<f64> {
    let h = o.width();
    let interior = o.shape() == Shape::Interior;
    DMatrix::from_fn(m, m, |r, c| {
        let (a, b) = if interior { ((r + 1) as i64, (c + 1) as i64) } else { (2 * (r + 1) as i64, 2 * (c + 1) as i64) };
        // int_0^pi sin(a t) sin(b t) sin t dt = [g(a-b) - g(a+b)] / 2, times dy/dt = (half-width) sin t;
        // the wall case integrates half of the reflected interval (-h, h), giving the same h/2
        0.25 * h * (cos_sin_moment(a - b) - cos_sin_moment(a + b))
    })
}

/// (chi_k, psi_n) for k = 1..=M of the raw edge functions.
fn edge_raw_column(o: Opening, m: usize, n: usize) -> Result<Vec<f64>> {
    let h = o.width();
    let nf = n as f64;
    match o.shape() {
        Shape::Interior => {
            // y = c + (h/2) cos t, chi_k = sin(k t):
            // (h/2) sqrt2 Im[e^{i pi n c} pi i^{k-1} k J_k(z)/z], z = pi n h / 2
            let z = PI * nf * h * 0.5;
            let c = 0.5 * (o.g_lo + o.g_hi);
            let js = specfun::bessel_j_integer_sequence(m, z)?;
            let theta = PI * nf * c;
            Ok((1..=m)
                .map(|k| {
                    let ph = theta + 0.5 * PI * (k as f64 - 1.0);
                    0.5 * h * SQRT_2 * PI * k as f64 * js[k] / z * ph.sin()
                })
                .collect())
        }
        Shape::LowerWall | Shape::UpperWall => {
            // odd reflection to (-h, h), y = h cos t, chi_k = sin(2 k t)
            let z = PI * nf * h;
            let js = specfun::bessel_j_integer_sequence(2 * m, z)?;
            let sign = if o.shape() == Shape::UpperWall && n.is_multiple_of(2) { -1.0 } else { 1.0 };
            Ok((1..=m)
                .map(|k| {
                    let mm = 2 * k;
                    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * 0.5 * h * SQRT_2 * PI * mm as f64 * js[mm] / z * s
                })
                .collect())
        }
        Shape::Full => unreachable!(),
    }
}

/// gamma coth(gamma a) for lambda < nu, kappa cot(kappa a) for lambda > nu,
/// 1/a at lambda = nu.
pub fn gamma_term(nu: f64, lambda: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) || !nu.is_finite() || !lambda.is_finite() {
        return Err(BasisError::Domain(format!("gamma_term needs a > 0 and finite inputs (a = {a})")));
    }
    let d = nu - lambda;
    if d >= 0.0 {
        let x = d.sqrt() * a;
        let xc = if x < 1e-4 { 1.0 + x * x / 3.0 } else { x / x.tanh() };
        Ok(xc / a)
    } else {
        let x = (-d).sqrt() * a;
        if x < 1e-4 {
            return Ok((1.0 - x * x / 3.0) / a);
        }
        let (s, c) = x.sin_cos();
        if s.abs() < 1e-13 {
            return Err(BasisError::Pole { nu, lambda, a });
        }
        Ok(x * c / s / a)
    }
}

/// Large-n part of 2 gamma_n: 2[pi n - lambda/(2 pi n) - lambda^2/(8 pi^3 n^3)].
fn tail_weights(n: f64) -> [f64; 3] {
    [n, 1.0 / n, 1.0 / (n * n * n)]
}

/// Truncation settings for a reduced interface operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub m: usize,
    /// Number of transverse modes summed exactly.
    pub n_head: usize,
    /// Upper end of the precomputed asymptotic tail (edge basis only; 0 = none).
    pub n_tail: usize,
}

impl Truncation {
    /// Defaults for the given basis and opening.
    pub fn default_for(kind: BasisKind, opening: Opening, min_length: f64) -> Self {
        match kind {
            BasisKind::Sine => {
                let m = 24;
                let n = ((8.0 * m as f64 / opening.width()).ceil() as usize).max(64);
                Self { m, n_head: n, n_tail: 0 }
            }
            BasisKind::Edge => Self { m: 12, n_head: head_for_length(min_length), n_tail: 50_000 },
        }
    }

    pub fn doubled(&self) -> Self {
        Self { m: 2 * self.m, n_head: 2 * self.n_head, n_tail: 2 * self.n_tail }
    }
}

/// Smallest head size for which coth(gamma_n a) = 1 to double precision past the head.
pub fn head_for_length(min_length: f64) -> usize {
    ((19.0 / (PI * min_length)).ceil() as usize).max(200)
}

/// Precomputed overlaps: exact head columns plus tail moment matrices.
#[derive(Debug, Clone)]
pub struct ModeSeries {
    pub basis: OpeningBasis,
    pub trunc: Truncation,
    pub head: OverlapMatrix,
    /// sum_{n > n_head} n^k P P^T for k = 1, -1, -3, including the remainder estimate.
    tail: Option<[DMatrix<f64>; 3]>,
}

impl ModeSeries {
    pub fn new(opening: Opening, kind: BasisKind, trunc: Truncation) -> Result<Self> {
        if trunc.n_head < 1 {
            return Err(BasisError::Domain("need at least one transverse mode".into()));
        }
        let basis = OpeningBasis::new(opening, kind, trunc.m)?;
        let head = basis.overlaps(trunc.n_head)?;
        let tail = if trunc.n_tail > trunc.n_head && !basis.is_sine() {
            Some(tail_moments(&basis, trunc.n_head, trunc.n_tail)?)
        } else {
            None
        };
        Ok(Self { basis, trunc, head, tail })
    }

    pub fn m(&self) -> usize {
        self.trunc.m
    }

    pub fn n_head(&self) -> usize {
        self.trunc.n_head
    }

    /// Effective number of transverse modes represented.
    pub fn n_total(&self) -> usize {
        if self.tail.is_some() {
            self.trunc.n_tail
        } else {
            self.trunc.n_head
        }
    }

    /// sum_{n <= n_head} w_n P[:, n] P[:, n]^T.
    pub fn head_form(&self, weights: &[f64]) -> DMatrix<f64> {
        let p = &self.head.p;
        let mut scaled = p.clone();
        for (j, w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*w);
        }
        &scaled * p.transpose()
    }

    /// Contribution of n > n_head with weight 2 gamma_n(lambda) (zero for the sine basis).
    pub fn tail_form(&self, lambda: f64) -> DMatrix<f64> {
        match &self.tail {
            None => DMatrix::zeros(self.m(), self.m()),
            Some([s1, sm1, sm3]) => {
                let c1 = 2.0 * PI;
                let c2 = -lambda / PI;
                let c3 = -lambda * lambda / (4.0 * PI * PI * PI);
                s1 * c1 + sm1 * c2 + sm3 * c3
            }
        }
    }
}

fn tail_moments(basis: &OpeningBasis, n_head: usize, n_tail: usize) -> Result<[DMatrix<f64>; 3]> {
    const CHUNK: usize = 2048;
    let m = basis.m;
    let half = (n_tail / 2).max(n_head);
    let starts: Vec<usize> = (n_head + 1..=n_tail).step_by(CHUNK).collect();
    let partial: Vec<Result<[DMatrix<f64>; 3]>> = starts
        .par_iter()
        .map(|&lo| {
            let hi = (lo + CHUNK - 1).min(n_tail);
            let ov = basis.overlaps_range(lo, hi)?;
            let mut acc = [DMatrix::zeros(m, m), DMatrix::zeros(m, m), DMatrix::zeros(m, m)];
            for (j, n) in (lo..=hi).enumerate() {
                let col = ov.p.column(j);
                let w = tail_weights(n as f64);
                // remainder beyond n_tail ~ block (n_tail/2, n_tail] for the n^1 moment
                let w0 = if n > half { 2.0 * w[0] } else { w[0] };
                let outer = col * col.transpose();
                acc[0] += &outer * w0;
                acc[1] += &outer * w[1];
                acc[2] += &outer * w[2];
            }
            Ok(acc)
        })
        .collect();
    let mut total = [DMatrix::zeros(m, m), DMatrix::zeros(m, m), DMatrix::zeros(m, m)];
    for p in partial {
        let p = p?;
        for k in 0..3 {
            total[k] += &p[k];
        }
    }
    Ok(total)
}

/// Dense symmetric eigen-decomposition with ascending eigenvalues.
pub(crate) fn sym_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = nalgebra::SymmetricEigen::<f64, Dyn>::new(a);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    /// Gauss-Chebyshev-friendly quadrature in t for functions with sqrt end behaviour.
    fn quad_theta<F: Fn(f64) -> f64>(f: F, o: Opening) -> f64 {
        // y = c + (h/2) cos t maps the sqrt endpoint singularities to smooth integrands
        let c = 0.5 * (o.g_lo + o.g_hi);
        let hh = 0.5 * o.width();
        simpson(|t| f(c + hh * t.cos()) * hh * t.sin(), 0.0, PI, 20000)
    }

    #[test]
    fn eigenpairs() {
        let m1 = transverse_eigenpair(1).unwrap();
        let m2 = transverse_eigenpair(2).unwrap();
        assert!((m1.nu - PI * PI).abs() < 1e-14);
        assert!((m2.nu - m1.nu - 3.0 * PI * PI).abs() < 1e-12);
        assert!((m2.eval(0.25) - SQRT_2).abs() < 1e-15);
        assert!(transverse_eigenpair(0).is_err());
    }

    #[test]
    fn transverse_orthonormality() {
        let b = TransverseBasis::new(6).unwrap();
        for a in &b.modes {
            for c in &b.modes {
                let v = simpson(|y| a.eval(y) * c.eval(y), 0.0, 1.0, 4000);
                let expect = if a.n == c.n { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "{} {} {v}", a.n, c.n);
            }
        }
    }

    #[test]
    fn full_opening_gives_identity() {
        let p = overlap_matrix(Opening::new(0.0, 1.0).unwrap(), 8, 8).unwrap();
        for m in 1..=8 {
            for n in 1..=8 {
                let e = if m == n { 1.0 } else { 0.0 };
                assert!((p.get(m, n) - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sine_overlap_matches_quadrature() {
        let o = Opening::new(0.0, 0.5).unwrap();
        let p = overlap_matrix(o, 1, 1).unwrap();
        let q = simpson(|y| SQRT_2 * (PI * y).sin() * 2.0 * (2.0 * PI * y).sin(), 0.0, 0.5, 4000);
        assert!((p.get(1, 1) - q).abs() < 1e-12);
        // resonant and general entries on an interior opening
        let o = Opening::new(0.3, 0.55).unwrap();
        let p = overlap_matrix(o, 5, 30).unwrap();
        let b = OpeningBasis::sine(o, 5);
        for &(m, n) in &[(1, 1), (1, 4), (2, 8), (5, 20), (3, 30)] {
            let q = simpson(|y| b.eval(m, y) * SQRT_2 * (PI * n as f64 * y).sin(), o.g_lo, o.g_hi, 20000);
            assert!((p.get(m, n) - q).abs() < 1e-12, "{m} {n}");
        }
    }

    #[test]
    fn sine_parseval() {
        for &(lo, hi) in &[(0.0, 0.25), (0.2, 0.3), (0.6, 1.0)] {
            let o = Opening::new(lo, hi).unwrap();
            let n = (64.0 / o.width()).ceil() as usize;
            let p = overlap_matrix(o, 4, n).unwrap();
            for m in 0..4 {
                let s: f64 = p.p.row(m).iter().map(|v| v * v).sum();
                assert!((0.999..=1.0 + 1e-12).contains(&s), "{s}");
            }
        }
    }

    #[test]
    fn edge_basis_is_orthonormal() {
        for &(lo, hi) in &[(0.0, 0.1), (0.0, 0.5), (0.7, 1.0), (0.2, 0.45)] {
            let o = Opening::new(lo, hi).unwrap();
            let b = OpeningBasis::new(o, BasisKind::Edge, 6).unwrap();
            for i in 1..=6 {
                for j in 1..=6 {
                    let v = quad_theta(|y| b.eval(i, y) * b.eval(j, y), o);
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-8, "{lo} {hi} {i} {j} {v}");
                }
            }
        }
    }

    #[test]
    fn edge_overlaps_match_quadrature() {
        for &(lo, hi) in &[(0.0, 0.1), (0.7, 1.0), (0.2, 0.45)] {
            let o = Opening::new(lo, hi).unwrap();
            let b = OpeningBasis::new(o, BasisKind::Edge, 5).unwrap();
            let p = b.overlaps(40).unwrap();
            for &(m, n) in &[(1, 1), (2, 3), (5, 17), (3, 40)] {
                let q = quad_theta(|y| b.eval(m, y) * SQRT_2 * (PI * n as f64 * y).sin(), o);
                assert!((p.get(m, n) - q).abs() < 1e-9, "{lo} {hi} {m} {n}: {} vs {q}", p.get(m, n));
            }
        }
    }

    #[test]
    fn overlaps_bounded_by_bessel_inequality() {
        let o = Opening::new(0.0, 0.2).unwrap();
        let b = OpeningBasis::new(o, BasisKind::Edge, 8).unwrap();
        let p = b.overlaps(2000).unwrap();
        for m in 0..8 {
            let s: f64 = p.p.row(m).iter().map(|v| v * v).sum();
            assert!(s <= 1.0 + 1e-10 && s > 0.99, "{s}");
            assert!(p.p.row(m).iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn gamma_term_examples() {
        let nu = PI * PI;
        assert!((gamma_term(nu, nu, 0.8).unwrap() - 1.25).abs() < 1e-15);
        let a = 1.0;
        let lam = nu + (PI / (2.0 * a)).powi(2);
        assert!(gamma_term(nu, lam, a).unwrap().abs() < 1e-12);
        // coth(1) from mpmath
        assert!((gamma_term(nu, nu - 1.0, 1.0).unwrap() - 1.313_035_285_499_331_3).abs() < 1e-14);
        let lam = nu + (PI / a).powi(2);
        assert!(matches!(gamma_term(nu, lam, a), Err(BasisError::Pole { .. })));
    }

    #[test]
    fn gamma_term_branch_continuity() {
        let nu = 4.0 * PI * PI;
        for &a in &[0.3, 1.0, 2.5] {
            let below = gamma_term(nu, nu - 1e-10, a).unwrap();
            let above = gamma_term(nu, nu + 1e-10, a).unwrap();
            assert!((below - above).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_moments_reproduce_direct_sums() {
        let o = Opening::from_wall(0.2).unwrap();
        let trunc = Truncation { m: 4, n_head: 50, n_tail: 4000 };
        let s = ModeSeries::new(o, BasisKind::Edge, trunc).unwrap();
        let lam = 19.0;
        let direct = {
            let b = OpeningBasis::new(o, BasisKind::Edge, 4).unwrap();
            let p = b.overlaps_range(51, 4000).unwrap();
            let mut acc = DMatrix::zeros(4, 4);
            for (j, n) in (51..=4000).enumerate() {
                let g = 2.0 * (transverse_eigenvalue(n) - lam).sqrt();
                let c = p.p.column(j);
                acc += c * c.transpose() * g;
            }
            acc
        };
        let t = s.tail_form(lam);
        // the tail includes a remainder estimate for n > 4000 of relative size ~ 1/n_tail
        let rel = (&t - &direct).norm() / direct.norm();
        assert!(rel < 0.02 && rel > 0.0, "{rel}");
    }
}
