//! Eigenvalues of the Dirichlet Laplacian in the slit cylinder
//! ([-a1, a2] x [0, 1]) \ ({0} x ([0, 1] \ Gamma)) via the reduced problem on Gamma.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::modebasis::{
    self, gamma_term, transverse_eigenvalue, BasisError, BasisKind, ModeSeries, Opening, OpeningBasis, Truncation,
};
use crate::roots;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("eta_1 does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("x = {x} outside the cylinder (-{a1}, {a2})")]
    OutOfRange { x: f64, a1: f64, a2: f64 },
    #[error("ratio bound precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate geometry: C_lambda denominator {denominator} <= 0")]
    Degenerate { denominator: f64 },
}

pub type Result<T> = std::result::Result<T, BarrierError>;

const NU1: f64 = PI * PI;

/// Lengths of the two cylinders and the opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierGeometry {
    pub a1: f64,
    pub a2: f64,
    pub opening: Opening,
}

impl BarrierGeometry {
    pub fn new(a1: f64, a2: f64, opening: Opening) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return Err(BarrierError::Geometry(format!("lengths must be positive (a1 = {a1}, a2 = {a2})")));
        }
        Ok(Self { a1, a2, opening })
    }

    /// Opening (0, h) at the lower wall.
    pub fn with_wall_opening(a1: f64, a2: f64, h: f64) -> Result<Self> {
        Self::new(a1, a2, Opening::from_wall(h)?)
    }

    /// a1 > a2.
    pub fn longer_left(&self) -> bool {
        self.a1 > self.a2
    }

    /// a1 >= pi / sqrt(nu_2 - nu_1).
    pub fn assump2_ok(&self) -> bool {
        self.a1 >= PI / (transverse_eigenvalue(2) - NU1).sqrt()
    }

    /// (nu_1 + pi^2/(a1+a2)^2, nu_1 + pi^2/max(a1,a2)^2).
    pub fn admissible_bracket(&self) -> (f64, f64) {
        let amax = self.a1.max(self.a2);
        (NU1 + (PI / (self.a1 + self.a2)).powi(2), NU1 + (PI / amax).powi(2))
    }
}

/// Basis choice and truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    pub basis: BasisKind,
    pub trunc: Truncation,
}

impl BarrierConfig {
    pub fn default_for(geom: &BarrierGeometry) -> Self {
        Self::with_basis(geom, BasisKind::Edge)
    }

    pub fn with_basis(geom: &BarrierGeometry, basis: BasisKind) -> Self {
        Self { basis, trunc: Truncation::default_for(basis, geom.opening, geom.a1.min(geom.a2)) }
    }

    pub fn doubled(&self) -> Self {
        Self { basis: self.basis, trunc: self.trunc.doubled() }
    }
}

/// A located eigenvalue with its interface data.
#[derive(Debug, Clone)]
pub struct BarrierEigenSolution {
    pub lambda: f64,
    /// pi - |gamma_1| a1 when the root was located in the pole-gap variable.
    pub pole_gap: Option<f64>,
    /// b_n = (u|Gamma, psi_n), n = 1..=N_head, normalised to sum b_n^2 = 1.
    pub b: Vec<f64>,
    /// gamma_n = sqrt(nu_n - lambda) (imaginary on the oscillatory branch).
    pub gamma: Vec<Complex64>,
    /// Galerkin coefficients of u|Gamma (unit norm).
    pub x: Vec<f64>,
    /// |eta_1(lambda)|.
    pub eta1_residual: f64,
    /// Spectral norm of A(lambda).
    pub a_norm: f64,
    /// Dispersion residual relative to sum b_n^2 sqrt(nu_n).
    pub dispersion_residual: f64,
    /// Projected mismatch of the normal derivatives relative to one side.
    pub matching_residual: f64,
    pub m: usize,
    pub n: usize,
    a1: f64,
    a2: f64,
}

impl BarrierEigenSolution {
    /// |gamma_1| a1 computed without cancellation when available.
    fn theta1(&self) -> Option<f64> {
        match self.pole_gap {
            Some(g) => Some(PI - g),
            None if self.lambda > NU1 => Some((self.lambda - NU1).sqrt() * self.a1),
            None => None,
        }
    }
}

/// Prepared solver: the overlap series is computed once per geometry.
#[derive(Debug, Clone)]
pub struct BarrierSolver {
    pub geom: BarrierGeometry,
    pub cfg: BarrierConfig,
    series: ModeSeries,
}

impl BarrierSolver {
    pub fn new(geom: BarrierGeometry, cfg: BarrierConfig) -> Result<Self> {
        let series = ModeSeries::new(geom.opening, cfg.basis, cfg.trunc)?;
        Ok(Self { geom, cfg, series })
    }

    pub fn series(&self) -> &ModeSeries {
        &self.series
    }

    /// Per-mode factors gamma_n [coth(gamma_n a1) + coth(gamma_n a2)] on the head.
    fn weights(&self, lambda: f64, pole_gap: Option<f64>) -> Result<Vec<f64>> {
        let (a1, a2) = (self.geom.a1, self.geom.a2);
        (1..=self.series.n_head())
            .map(|n| {
                if n == 1 {
                    if let Some(gap) = pole_gap {
                        // kappa a1 = pi - gap: cot(pi - gap) = -cot(gap)
                        let theta = PI - gap;
                        let kappa = theta / a1;
                        let (s, c) = gap.sin_cos();
                        if s.abs() < 1e-300 {
                            return Err(BasisError::Pole { nu: NU1, lambda, a: a1 }.into());
                        }
                        let left = -kappa * c / s;
                        let right = gamma_term(NU1, lambda, a2)?;
                        return Ok(left + right);
                    }
                }
                let nu = transverse_eigenvalue(n);
                Ok(gamma_term(nu, lambda, a1)? + gamma_term(nu, lambda, a2)?)
            })
            .collect()
    }

    fn assemble_at(&self, lambda: f64, pole_gap: Option<f64>) -> Result<DMatrix<f64>> {
        let w = self.weights(lambda, pole_gap)?;
        let mut a = self.series.head_form(&w);
        a += self.series.tail_form(lambda);
        a = (&a + a.transpose()) * 0.5;
        Ok(a)
    }

    /// A(lambda) in the orthonormal opening basis.
    pub fn assemble_reduced_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        self.assemble_at(lambda, None)
    }

    /// Smallest eigenvalue of A(lambda).
    pub fn eta1(&self, lambda: f64) -> Result<f64> {
        let (vals, _) = modebasis::sym_eigen(self.assemble_reduced_matrix(lambda)?);
        Ok(vals[0])
    }

    fn lambda_of_gap(&self, gap: f64) -> f64 {
        NU1 + ((PI - gap) / self.geom.a1).powi(2)
    }

    fn eta1_gap(&self, gap: f64) -> Result<f64> {
        let lambda = self.lambda_of_gap(gap);
        let (vals, _) = modebasis::sym_eigen(self.assemble_at(lambda, Some(gap))?);
        Ok(vals[0])
    }

    /// Root of eta_1 in the admissible interval (nu1 + pi^2/(a1+a2)^2, nu1 + pi^2/a1^2).
    pub fn find_first_eigenvalue(&self) -> Result<BarrierEigenSolution> {
        let (lo, hi) = self.geom.admissible_bracket();
        if self.geom.a1 < self.geom.a2 {
            return self.find_eigenvalue((lo, hi));
        }
        // sample theta = |gamma_1| a1 uniformly, then approach the pole at pi geometrically
        let theta_lo = (lo - NU1).sqrt() * self.geom.a1;
        let mut gaps: Vec<f64> = (0..200).map(|i| PI - (theta_lo + (PI - theta_lo) * i as f64 / 200.0)).collect();
        gaps.extend((0..=45).map(|k| PI * 10f64.powf(-3.0 - k as f64 * 0.2)));
        gaps[0] = PI - theta_lo * (1.0 + 1e-12);
        let vals: Vec<f64> = gaps.iter().map(|&g| self.eta1_gap(g).unwrap_or(f64::NAN)).collect();
        for i in roots::sign_changes(&vals) {
            if vals[i] > 0.0 && vals[i + 1] <= 0.0 {
                let r = roots::brent(|g| self.eta1_gap(g), gaps[i], gaps[i + 1], vals[i], vals[i + 1], 0.0)?;
                return self.solution_at(self.lambda_of_gap(r.x), Some(r.x));
            }
        }
        Err(BarrierError::NoSignChange { lo, hi })
    }

    /// Root of eta_1 on a user bracket: 200-point scan then refinement.
    pub fn find_eigenvalue(&self, bracket: (f64, f64)) -> Result<BarrierEigenSolution> {
        let roots = self.find_roots(bracket, 200)?;
        match roots.into_iter().next() {
            Some(s) => Ok(s),
            None => Err(BarrierError::NoSignChange { lo: bracket.0, hi: bracket.1 }),
        }
    }

    /// All downward sign changes of eta_1 on a uniform grid, refined.
    pub fn find_roots(&self, bracket: (f64, f64), samples: usize) -> Result<Vec<BarrierEigenSolution>> {
        let (lo, hi) = bracket;
        if !(lo < hi) {
            return Err(BarrierError::Geometry(format!("empty bracket [{lo}, {hi}]")));
        }
        let grid: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&l| self.eta1(l).unwrap_or(f64::NAN)).collect();
        let mut out = Vec::new();
        for i in roots::sign_changes(&vals) {
            if vals[i] > 0.0 && vals[i + 1] <= 0.0 {
                let r = roots::brent(|l| self.eta1(l), grid[i], grid[i + 1], vals[i], vals[i + 1], 1e-13)?;
                out.push(self.solution_at(r.x, None)?);
            }
        }
        Ok(out)
    }

    fn solution_at(&self, lambda: f64, pole_gap: Option<f64>) -> Result<BarrierEigenSolution> {
        let a = self.assemble_at(lambda, pole_gap)?;
        let (vals, vecs) = modebasis::sym_eigen(a.clone());
        let eta = vals[0];
        let a_norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x: DVector<f64> = vecs.column(0).into_owned();
        let p = &self.series.head.p;
        let mut b: Vec<f64> = (p.transpose() * &x).iter().copied().collect();
        // fix the sign so that b_1 >= 0
        if b[0] < 0.0 {
            x.neg_mut();
            b.iter_mut().for_each(|v| *v = -*v);
        }
        let s2: f64 = b.iter().map(|v| v * v).sum();
        let s = s2.sqrt();
        b.iter_mut().for_each(|v| *v /= s);

        // dispersion residual: x^T A x / s^2 against sum b_n^2 sqrt(nu_n) (head + tail)
        let sqrt_nu: Vec<f64> = (1..=self.series.n_head()).map(|n| PI * n as f64).collect();
        let head_ref = self.series.head_form(&sqrt_nu);
        let tail_ref = self.series.tail_form(0.0) * 0.5;
        let reference = (x.transpose() * (head_ref + tail_ref) * &x)[(0, 0)] / s2;
        let dispersion = (x.transpose() * &a * &x)[(0, 0)] / s2;

        // matching residual: ||A x|| against the one-sided operator
        let w1: Vec<f64> = (1..=self.series.n_head())
            .map(|n| {
                if n == 1 && pole_gap.is_some() {
                    let g = pole_gap.unwrap_or(0.0);
                    let kappa = (PI - g) / self.geom.a1;
                    -kappa * g.cos() / g.sin()
                } else {
                    gamma_term(transverse_eigenvalue(n), lambda, self.geom.a1).unwrap_or(f64::NAN)
                }
            })
            .collect();
        let one_side = self.series.head_form(&w1) + self.series.tail_form(lambda) * 0.5;
        let matching = (&a * &x).norm() / (one_side * &x).norm();

        let gamma = (1..=self.series.n_head())
            .map(|n| Complex64::new(transverse_eigenvalue(n) - lambda, 0.0).sqrt())
            .collect();
        Ok(BarrierEigenSolution {
            lambda,
            pole_gap,
            b,
            gamma,
            x: x.iter().copied().collect(),
            eta1_residual: eta.abs(),
            a_norm,
            dispersion_residual: dispersion.abs() / reference,
            matching_residual: matching,
            m: self.series.m(),
            n: self.series.n_total(),
            a1: self.geom.a1,
            a2: self.geom.a2,
        })
    }
}

/// A(lambda) for a one-off evaluation.
pub fn assemble_reduced_matrix(lambda: f64, geom: &BarrierGeometry, cfg: &BarrierConfig) -> Result<DMatrix<f64>> {
    BarrierSolver::new(*geom, *cfg)?.assemble_reduced_matrix(lambda)
}

/// eta_1(lambda) for a one-off evaluation.
pub fn eta1(lambda: f64, geom: &BarrierGeometry, cfg: &BarrierConfig) -> Result<f64> {
    BarrierSolver::new(*geom, *cfg)?.eta1(lambda)
}

/// Eigenvalue on a bracket, or in the admissible interval when `bracket` is None.
pub fn find_eigenvalue(
    geom: &BarrierGeometry,
    cfg: &BarrierConfig,
    bracket: Option<(f64, f64)>,
) -> Result<BarrierEigenSolution> {
    let solver = BarrierSolver::new(*geom, *cfg)?;
    match bracket {
        None => solver.find_first_eigenvalue(),
        Some(b) => solver.find_eigenvalue(b),
    }
}

/// sinh(g (a + x)) / sinh(g a) for 0 < a + x <= a, g > 0, without overflow.
fn sinh_ratio(g: f64, a: f64, x: f64) -> f64 {
    let t = a + x;
    let num = 1.0 - (-2.0 * g * t).exp();
    let den = 1.0 - (-2.0 * g * a).exp();
    (g * x).exp() * num / den
}

/// I(x) = ||u(x, .)||^2 on the cross-section at x.
pub fn cross_norm(sol: &BarrierEigenSolution, x: f64) -> Result<f64> {
    let (a1, a2) = (sol.a1, sol.a2);
    if !(x > -a1 && x < a2) {
        return Err(BarrierError::OutOfRange { x, a1, a2 });
    }
    if x == 0.0 {
        return Ok(sol.b.iter().map(|v| v * v).sum());
    }
    let (a, t) = if x < 0.0 { (a1, a1 + x) } else { (a2, a2 - x) };
    let mut total = 0.0;
    for (i, (&b, g)) in sol.b.iter().zip(&sol.gamma).enumerate() {
        let r = if g.im != 0.0 {
            let kappa = g.im.abs();
            let den = if i == 0 && x < 0.0 {
                match sol.theta1() {
                    Some(th) => th.sin(),
                    None => (kappa * a).sin(),
                }
            } else {
                (kappa * a).sin()
            };
            let num = if i == 0 && x < 0.0 {
                sol.theta1().map(|th| (th / a1 * t).sin()).unwrap_or((kappa * t).sin())
            } else {
                (kappa * t).sin()
            };
            (num / den).powi(2)
        } else if g.re == 0.0 {
            (t / a).powi(2)
        } else {
            sinh_ratio(g.re, a, t - a).powi(2)
        };
        total += b * b * r;
    }
    Ok(total)
}

/// C_lambda of the first-mode ratio bound.
pub fn c_lambda(g1: f64, gamma2: f64, a1: f64, a2: f64) -> (f64, f64) {
    let denom_even = gamma2 * (1.0 / (gamma2 * a1).tanh() + 1.0 / (gamma2 * a2).tanh());
    let (s1, c1) = (g1 * a1).sin_cos();
    let s2 = (g1 * a2).sin();
    let d = s1 / (s2 * s2) - g1 * (c1 + s1 * (g1 * a2).cos() / s2) / denom_even;
    (1.0 / d, d)
}

/// Lower bound on I(x1)/I(x2) for the first eigenfunction, with C_lambda.
pub fn ratio_bound(sol: &BarrierEigenSolution, geom: &BarrierGeometry, x1: f64, x2: f64) -> Result<(f64, f64)> {
    if !(x1 > -geom.a1 && x1 < 0.0 && x2 > 0.0 && x2 < geom.a2) {
        return Err(BarrierError::OutOfRange { x: if x1 >= 0.0 { x1 } else { x2 }, a1: geom.a1, a2: geom.a2 });
    }
    if !geom.assump2_ok() {
        return Err(BarrierError::Precondition(format!("a1 = {} < pi/sqrt(nu2 - nu1)", geom.a1)));
    }
    let nu2 = transverse_eigenvalue(2);
    if !(sol.lambda > NU1 && sol.lambda < nu2) {
        return Err(BarrierError::Precondition(format!("lambda = {} not in (nu1, nu2)", sol.lambda)));
    }
    let g1 = sol.theta1().unwrap_or(0.0) / geom.a1;
    let gamma2 = (nu2 - sol.lambda).sqrt();
    let (c, d) = c_lambda(g1, gamma2, geom.a1, geom.a2);
    if d <= 0.0 {
        return Err(BarrierError::Degenerate { denominator: d });
    }
    let s = (g1 * (geom.a1 + x1)).sin();
    Ok((c * s * s / (g1 * geom.a1).sin(), c))
}

/// Result of the second-mode bound with its side conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherModeBound {
    pub bound: Option<f64>,
    pub c_lambda: Option<f64>,
    /// cot(|gamma_1| a1) + cot(|gamma_1| a2) > 0.
    pub auxil5_ok: bool,
    /// sqrt(a2^2 (nu2 - nu1)/pi^2 + a2^2/a1^2) is not an integer.
    pub auxil6_ok: bool,
    pub auxil6_value: f64,
}

/// Lower bound on I(x1)/I(x2) for the eigenfunction near nu_2 + pi^2/a1^2.
pub fn higher_mode_bound(geom: &BarrierGeometry, lambda: f64, x1: f64, x2: f64) -> Result<HigherModeBound> {
    if !(x1 > -geom.a1 && x1 < 0.0 && x2 > 0.0 && x2 < geom.a2) {
        return Err(BarrierError::OutOfRange { x: if x1 >= 0.0 { x1 } else { x2 }, a1: geom.a1, a2: geom.a2 });
    }
    let (nu2, nu3) = (transverse_eigenvalue(2), transverse_eigenvalue(3));
    if !(lambda > nu2 && lambda < nu3) {
        return Err(BarrierError::Precondition(format!("lambda = {lambda} not in (nu2, nu3)")));
    }
    let (a1, a2) = (geom.a1, geom.a2);
    let g1 = (lambda - NU1).sqrt();
    let g2 = (lambda - nu2).sqrt();
    let gamma3 = (nu3 - lambda).sqrt();
    let cot = |v: f64| v.cos() / v.sin();
    let first = g1 * (cot(g1 * a1) + cot(g1 * a2));
    let auxil5_ok = cot(g1 * a1) + cot(g1 * a2) > 0.0;
    let auxil6_value = (a2 * a2 * (nu2 - NU1) / (PI * PI) + a2 * a2 / (a1 * a1)).sqrt();
    let auxil6_ok = (auxil6_value - auxil6_value.round()).abs() > 1e-9;
    if !(auxil5_ok && auxil6_ok) {
        return Ok(HigherModeBound { bound: None, c_lambda: None, auxil5_ok, auxil6_ok, auxil6_value });
    }
    let third = gamma3 * (1.0 / (gamma3 * a1).tanh() + 1.0 / (gamma3 * a2).tanh());
    let c = first.min(third);
    let (s21, c21) = (g2 * a1).sin_cos();
    let s22 = (g2 * a2).sin();
    let s12 = (g1 * a2).sin();
    let d = s21 / (s22 * s22) - g2 * (c21 + s21 * cot(g2 * a2)) / (c * s12 * s12);
    let cl = 1.0 / d;
    let s = (g2 * (a1 + x1)).sin();
    Ok(HigherModeBound { bound: Some(cl * s * s / s21), c_lambda: Some(cl), auxil5_ok, auxil6_ok, auxil6_value })
}

/// min over span{phi_m} of sum_n n (v, psi_n)^2 / (v, v), sine basis of size M.
pub fn rayleigh_infimum(opening: Opening, m: usize) -> Result<f64> {
    if m < 8 {
        return Err(BarrierError::Geometry(format!("rayleigh_infimum needs M >= 8 (got {m})")));
    }
    let n = ((256.0 * m as f64 / opening.width()).ceil() as usize).max(4096);
    let basis = OpeningBasis::sine(opening, m);
    let p = basis.overlaps(n)?;
    let weights: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let mut scaled = p.p.clone();
    for (j, w) in weights.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*w);
    }
    let b = &scaled * p.p.transpose();
    let (vals, _) = modebasis::sym_eigen((&b + b.transpose()) * 0.5);
    Ok(vals[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(h: f64) -> BarrierSolver {
        let g = BarrierGeometry::with_wall_opening(1.0, 0.8, h).unwrap();
        BarrierSolver::new(g, BarrierConfig::default_for(&g)).unwrap()
    }

    #[test]
    fn positive_definite_below_cutoff() {
        let s = solver(0.3);
        assert!(s.eta1(PI * PI - 1.0).unwrap() > 0.0);
    }

    #[test]
    fn full_opening_matrix_is_diagonal() {
        let g = BarrierGeometry::new(1.0, 0.8, Opening::new(0.0, 1.0).unwrap()).unwrap();
        let cfg = BarrierConfig { basis: BasisKind::Sine, trunc: Truncation { m: 6, n_head: 6, n_tail: 0 } };
        let s = BarrierSolver::new(g, cfg).unwrap();
        let lam = 15.0;
        let a = s.assemble_reduced_matrix(lam).unwrap();
        let mut diag = Vec::new();
        for i in 0..6 {
            let nu = transverse_eigenvalue(i + 1);
            let w = gamma_term(nu, lam, 1.0).unwrap() + gamma_term(nu, lam, 0.8).unwrap();
            assert!((a[(i, i)] - w).abs() < 1e-12 * w.abs().max(1.0));
            diag.push(w);
            for j in 0..6 {
                if i != j {
                    assert!(a[(i, j)].abs() < 1e-12);
                }
            }
        }
        let eta = s.eta1(lam).unwrap();
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((eta - min).abs() < 1e-12);
    }

    #[test]
    fn truncation_doubling_changes_eigenvalue_little() {
        let g = BarrierGeometry::with_wall_opening(1.0, 0.8, 0.1).unwrap();
        let cfg = BarrierConfig::default_for(&g);
        let a = find_eigenvalue(&g, &cfg, None).unwrap();
        let b = find_eigenvalue(&g, &cfg.doubled(), None).unwrap();
        let rel = (a.lambda - b.lambda).abs() / a.lambda;
        eprintln!("doubling: {} -> {} rel {rel:e}", a.lambda, b.lambda);
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn eta1_signs_at_bracket_ends() {
        let s = solver(0.05);
        let (lo, hi) = s.geom.admissible_bracket();
        assert!(s.eta1(lo + 1e-6).unwrap() > 0.0);
        assert!(s.eta1(hi - 1e-6).unwrap() < 0.0);
    }

    #[test]
    fn first_eigenvalue_h01() {
        let s = solver(0.1);
        let sol = s.find_first_eigenvalue().unwrap();
        let (lo, hi) = s.geom.admissible_bracket();
        assert!(sol.lambda > lo && sol.lambda < hi);
        assert!((sol.lambda - 19.79).abs() / 19.79 < 0.01);
        assert!(sol.eta1_residual <= 1e-10 * sol.a_norm);
        assert!(sol.dispersion_residual <= 1e-6);
        assert!(sol.matching_residual <= 1e-6);
        let sb: f64 = sol.b.iter().map(|v| v * v).sum();
        assert!((sb - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_norm_limits() {
        let sol = solver(0.1).find_first_eigenvalue().unwrap();
        let i0m = cross_norm(&sol, -1e-12).unwrap();
        let i0p = cross_norm(&sol, 1e-12).unwrap();
        assert!((i0m - 1.0).abs() < 1e-6 && (i0p - 1.0).abs() < 1e-6);
        assert!(cross_norm(&sol, -1.0 + 1e-9).unwrap() < 1e-12);
        assert!(cross_norm(&sol, 0.8 - 1e-9).unwrap() < 1e-12);
        let r = cross_norm(&sol, -0.5).unwrap() / cross_norm(&sol, 0.4).unwrap();
        assert!(r > 100.0, "{r}");
        assert!(cross_norm(&sol, -1.5).is_err());
    }

    #[test]
    fn bound_below_measured_ratio() {
        let g = BarrierGeometry::with_wall_opening(1.0, 0.8, 0.1).unwrap();
        let sol = solver(0.1).find_first_eigenvalue().unwrap();
        for &(x1, x2) in &[(-0.5, 0.4), (-0.2, 0.1), (-0.9, 0.7)] {
            let (bound, c) = ratio_bound(&sol, &g, x1, x2).unwrap();
            let measured = cross_norm(&sol, x1).unwrap() / cross_norm(&sol, x2).unwrap();
            assert!(c > 0.0);
            assert!(bound <= measured, "{bound} > {measured}");
        }
        let (near_end, _) = ratio_bound(&sol, &g, -1.0 + 1e-8, 0.4).unwrap();
        assert!(near_end < 1e-6);
    }

    #[test]
    fn c_lambda_vanishes_for_equal_lengths() {
        // a1 = a2 = 1: as |gamma_1| a1 -> pi the constant goes to zero
        let gamma2 = (transverse_eigenvalue(2) - 2.0 * NU1).sqrt();
        let mut last = f64::INFINITY;
        for &gap in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let (c, _) = c_lambda(PI - gap, gamma2, 1.0, 1.0);
            assert!(c > 0.0 && c < last);
            last = c;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn higher_mode_constraint_flags() {
        let g = BarrierGeometry::with_wall_opening(1.0, 0.5, 0.1).unwrap();
        let lam = transverse_eigenvalue(2) + PI * PI - 0.01;
        let r = higher_mode_bound(&g, lam, -0.5, 0.25).unwrap();
        assert!(!r.auxil6_ok);
        assert!((r.auxil6_value - 1.0).abs() < 1e-12);
        assert!(r.bound.is_none());
        let g = BarrierGeometry::with_wall_opening(1.0, 0.8, 0.1).unwrap();
        let r = higher_mode_bound(&g, lam, -0.5, 0.4).unwrap();
        assert!((r.auxil6_value - 1.6).abs() < 1e-12);
        assert!(r.auxil6_ok);
    }

    #[test]
    fn rayleigh_full_interval_is_one() {
        let v = rayleigh_infimum(Opening::new(0.0, 1.0).unwrap(), 8).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn rayleigh_scales_like_inverse_width() {
        // converged Galerkin minimum is about 0.8784 / h for openings at a wall
        for &h in &[0.5, 0.25, 0.1] {
            let v = rayleigh_infimum(Opening::from_wall(h).unwrap(), 40).unwrap();
            assert!((v * h - 0.8784).abs() < 0.01, "{h}: {v}");
        }
    }

    #[test]
    fn sine_basis_converges_slowly_to_edge_value() {
        let g = BarrierGeometry::with_wall_opening(1.0, 0.8, 0.25).unwrap();
        let edge = BarrierSolver::new(g, BarrierConfig::default_for(&g)).unwrap().find_first_eigenvalue().unwrap();
        let sine = BarrierSolver::new(g, BarrierConfig::with_basis(&g, BasisKind::Sine))
            .unwrap()
            .find_first_eigenvalue()
            .unwrap();
        // the sine Galerkin value is an upper bound (minimax) and within 0.5%
        assert!(sine.lambda >= edge.lambda - 1e-9);
        assert!((sine.lambda - edge.lambda) / edge.lambda < 5e-3);
    }
}
