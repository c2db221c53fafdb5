//! Reflection coefficient and full-transmission resonance for the waveguide
//! with two identical barriers at distance 2a, via the mirror-symmetric half problem.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::modebasis::{self, transverse_eigenvalue, BasisError, BasisKind, ModeSeries, Opening, Truncation};
use crate::roots;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatterError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("lambda = {lambda} outside the band ({lo}, {hi})")]
    OutOfBand { lambda: f64, lo: f64, hi: f64 },
    #[error("tan pole: |gamma_1| a = {theta} is within 1e-13 of pi/2")]
    Pole { theta: f64 },
    #[error("Galerkin matrix condition number {0:e} exceeds 1e12")]
    IllConditioned(f64),
}

pub type Result<T> = std::result::Result<T, ScatterError>;

const NU1: f64 = PI * PI;

/// Half inter-barrier distance and the opening of each barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterGeometry {
    pub a: f64,
    pub opening: Opening,
}

impl ScatterGeometry {
    pub fn new(a: f64, opening: Opening) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(ScatterError::Geometry(format!("a must be positive (got {a})")));
        }
        Ok(Self { a, opening })
    }

    pub fn with_wall_opening(a: f64, h: f64) -> Result<Self> {
        Self::new(a, Opening::from_wall(h)?)
    }

    /// Single-mode band (nu_1, min(nu_2, nu_1 + pi^2/(4a^2))).
    pub fn band(&self) -> (f64, f64) {
        (NU1, transverse_eigenvalue(2).min(NU1 + PI * PI / (4.0 * self.a * self.a)))
    }

    fn check_band(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.band();
        if lambda > lo && lambda < hi {
            Ok(())
        } else {
            Err(ScatterError::OutOfBand { lambda, lo, hi })
        }
    }
}

/// Basis, truncation and an optional replacement for beta_1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterConfig {
    pub basis: BasisKind,
    pub trunc: Truncation,
    /// Any positive beta_1 leaves eta and c_1 unchanged; used to check that.
    pub beta1_override: Option<f64>,
}

impl ScatterConfig {
    pub fn default_for(geom: &ScatterGeometry) -> Self {
        Self::with_basis(geom, BasisKind::Edge)
    }

    pub fn with_basis(geom: &ScatterGeometry, basis: BasisKind) -> Self {
        Self { basis, trunc: Truncation::default_for(basis, geom.opening, geom.a), beta1_override: None }
    }

    pub fn doubled(&self) -> Self {
        Self { trunc: self.trunc.doubled(), ..*self }
    }
}

/// Band sample of the half problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSample {
    pub lambda: f64,
    pub gamma1_abs: f64,
    pub g: f64,
    pub eta: f64,
    pub c1: Complex64,
}

/// Resonance located as a root of eta.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSolution {
    pub lambda: f64,
    pub gamma1_abs: f64,
    /// (A^{-1} psi_1, psi_1) on Gamma.
    pub g: f64,
    pub eta: f64,
    pub c1: Complex64,
    /// c_n = (u, psi_n) on Gamma for n = 2..=N_head.
    pub c_n: Vec<f64>,
    pub condition: f64,
    pub m: usize,
    pub n: usize,
}

/// beta_1 = 1 + tanh(|gamma_1| a), beta_n = gamma_n (1 + tanh(gamma_n a)) for n = 2..=n.
pub fn beta_coefficients(lambda: f64, a: f64, n: usize) -> Result<Vec<f64>> {
    let geom = ScatterGeometry::new(a, Opening::new(0.0, 1.0)?)?;
    geom.check_band(lambda)?;
    Ok(betas(lambda, a, n))
}

fn betas(lambda: f64, a: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if k == 1 {
                1.0 + ((lambda - NU1).sqrt() * a).tanh()
            } else {
                let g = (transverse_eigenvalue(k) - lambda).sqrt();
                g * (1.0 + (g * a).tanh())
            }
        })
        .collect()
}

/// Prepared solver for one geometry and configuration.
#[derive(Debug, Clone)]
pub struct ScatterSolver {
    pub geom: ScatterGeometry,
    pub cfg: ScatterConfig,
    series: ModeSeries,
}

impl ScatterSolver {
    pub fn new(geom: ScatterGeometry, cfg: ScatterConfig) -> Result<Self> {
        if let Some(b) = cfg.beta1_override {
            if !(b > 0.0 && b.is_finite()) {
                return Err(ScatterError::Geometry(format!("beta1 override must be positive (got {b})")));
            }
        }
        let series = ModeSeries::new(geom.opening, cfg.basis, cfg.trunc)?;
        Ok(Self { geom, cfg, series })
    }

    fn beta(&self, lambda: f64) -> Vec<f64> {
        let mut b = betas(lambda, self.geom.a, self.series.n_head());
        if let Some(b1) = self.cfg.beta1_override {
            b[0] = b1;
        }
        b
    }

    /// Galerkin matrix A-hat(lambda).
    pub fn assemble(&self, lambda: f64) -> Result<DMatrix<f64>> {
        self.geom.check_band(lambda)?;
        let a = self.series.head_form(&self.beta(lambda)) + self.series.tail_form(lambda);
        Ok((&a + a.transpose()) * 0.5)
    }

    /// (G, x, condition number) with A-hat x = p, p_m = P[m][1].
    fn solve(&self, lambda: f64) -> Result<(f64, DVector<f64>, f64)> {
        let a = self.assemble(lambda)?;
        let (vals, vecs) = modebasis::sym_eigen(a);
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= 1e12) {
            return Err(ScatterError::IllConditioned(cond));
        }
        let p: DVector<f64> = self.series.head.p.column(0).into_owned();
        let coeffs = vecs.transpose() * &p;
        let mut x = DVector::zeros(p.len());
        for (k, c) in coeffs.iter().enumerate() {
            x += vecs.column(k) * (c / vals[k]);
        }
        Ok((x.dot(&p), x, cond))
    }

    pub fn solve_g(&self, lambda: f64) -> Result<f64> {
        Ok(self.solve(lambda)?.0)
    }

    fn eta_from_g(&self, lambda: f64, g: f64) -> Result<f64> {
        let k = (lambda - NU1).sqrt();
        let theta = k * self.geom.a;
        let c = theta.cos();
        if c.abs() < 1e-13 {
            return Err(ScatterError::Pole { theta });
        }
        Ok(k * theta.sin() / c + self.beta(lambda)[0] - 1.0 / g)
    }

    /// eta in the pole-gap variable delta = pi/2 - |gamma_1| a (tan = cot delta exactly).
    fn eta_gap(&self, delta: f64) -> Result<(f64, f64, f64)> {
        let k = (0.5 * PI - delta) / self.geom.a;
        let lambda = NU1 + k * k;
        let g = self.solve_g(lambda)?;
        let (s, c) = delta.sin_cos();
        if s.abs() < 1e-300 {
            return Err(ScatterError::Pole { theta: 0.5 * PI - delta });
        }
        Ok((lambda, g, k * c / s + self.beta(lambda)[0] - 1.0 / g))
    }

    /// eta = |gamma_1| tan(|gamma_1| a) + beta_1 - 1/G.
    pub fn eta(&self, lambda: f64) -> Result<f64> {
        let g = self.solve_g(lambda)?;
        self.eta_from_g(lambda, g)
    }

    pub fn reflection_c1(&self, lambda: f64) -> Result<Complex64> {
        Ok(self.sample(lambda)?.c1)
    }

    pub fn sample(&self, lambda: f64) -> Result<ScatterSample> {
        let g = self.solve_g(lambda)?;
        let eta = self.eta_from_g(lambda, g)?;
        let k = (lambda - NU1).sqrt();
        Ok(ScatterSample { lambda, gamma1_abs: k, g, eta, c1: mobius(k, eta) })
    }

    /// Interior band points: uniform grid plus a geometric approach to the upper end.
    pub fn band_grid(&self, samples: usize) -> Vec<f64> {
        let (lo, hi) = self.geom.band();
        let mut grid: Vec<f64> = (1..samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
        grid.extend((0..=45).map(|k| hi - (hi - lo) * 10f64.powf(-3.0 - k as f64 * 0.2)));
        grid
    }

    /// Scan points in delta = pi/2 - |gamma_1| a, decreasing (lambda increasing).
    fn gap_grid(&self, samples: usize) -> Vec<f64> {
        let (_, hi) = self.geom.band();
        let d_min = 0.5 * PI - (hi - NU1).sqrt() * self.geom.a;
        let span = 0.5 * PI - d_min;
        let mut grid: Vec<f64> = (1..samples).map(|i| 0.5 * PI - span * i as f64 / samples as f64).collect();
        grid.extend((0..=45).map(|k| d_min + span * 10f64.powf(-3.0 - k as f64 * 0.2)));
        grid
    }

    /// First upward sign change of eta in the band; None when there is no resonance.
    pub fn find_critical_lambda(&self) -> Result<Option<ScatterSolution>> {
        let grid = self.gap_grid(400);
        let vals: Vec<f64> = grid.iter().map(|&d| self.eta_gap(d).map(|v| v.2).unwrap_or(f64::NAN)).collect();
        for i in roots::sign_changes(&vals) {
            if vals[i] < 0.0 && vals[i + 1] >= 0.0 {
                let r = roots::brent(|d| self.eta_gap(d).map(|v| v.2), grid[i], grid[i + 1], vals[i], vals[i + 1], 0.0)?;
                return self.solution_at(r.x).map(Some);
            }
        }
        Ok(None)
    }

    fn solution_at(&self, delta: f64) -> Result<ScatterSolution> {
        let (lambda, _, eta) = self.eta_gap(delta)?;
        let (g, x, condition) = self.solve(lambda)?;
        let k = (0.5 * PI - delta) / self.geom.a;
        let c1 = mobius(k, eta);
        // u on Gamma is (u, psi_1)/G A^{-1} psi_1, with (u, psi_1) = 2 at resonance
        let u_psi1 = (c1 + 1.0).re;
        let proj = self.series.head.p.transpose() * &x;
        let c_n = proj.iter().skip(1).map(|v| u_psi1 / g * v).collect();
        Ok(ScatterSolution {
            lambda,
            gamma1_abs: k,
            g,
            eta,
            c1,
            c_n,
            condition,
            m: self.series.m(),
            n: self.series.n_total(),
        })
    }
}

/// c_1 = (i k - eta) / (i k + eta).
fn mobius(k: f64, eta: f64) -> Complex64 {
    let ik = Complex64::new(0.0, k);
    (ik - eta) / (ik + eta)
}

pub fn solve_g(lambda: f64, geom: &ScatterGeometry, cfg: &ScatterConfig) -> Result<f64> {
    ScatterSolver::new(*geom, *cfg)?.solve_g(lambda)
}

pub fn eta(lambda: f64, geom: &ScatterGeometry, cfg: &ScatterConfig) -> Result<f64> {
    ScatterSolver::new(*geom, *cfg)?.eta(lambda)
}

pub fn reflection_c1(lambda: f64, geom: &ScatterGeometry, cfg: &ScatterConfig) -> Result<Complex64> {
    ScatterSolver::new(*geom, *cfg)?.reflection_c1(lambda)
}

pub fn find_critical_lambda(geom: &ScatterGeometry, cfg: &ScatterConfig) -> Result<Option<ScatterSolution>> {
    ScatterSolver::new(*geom, *cfg)?.find_critical_lambda()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(h: f64) -> ScatterSolver {
        let g = ScatterGeometry::with_wall_opening(1.0, h).unwrap();
        ScatterSolver::new(g, ScatterConfig::default_for(&g)).unwrap()
    }

    fn full_guide(m: usize) -> ScatterSolver {
        let g = ScatterGeometry::new(1.0, Opening::new(0.0, 1.0).unwrap()).unwrap();
        let cfg = ScatterConfig { basis: BasisKind::Sine, trunc: Truncation { m, n_head: m, n_tail: 0 }, beta1_override: None };
        ScatterSolver::new(g, cfg).unwrap()
    }

    #[test]
    fn beta_values() {
        let lam = NU1 + (PI / 4.0).powi(2);
        let b = beta_coefficients(lam, 1.0, 40).unwrap();
        assert!((b[0] - (1.0 + (PI / 4.0).tanh())).abs() < 1e-15);
        assert!(b.iter().all(|&v| v > 0.0));
        for (i, &v) in b.iter().enumerate().skip(1) {
            let g = (transverse_eigenvalue(i + 1) - lam).sqrt();
            if g > 3.0 {
                assert!((v / (2.0 * g) - 1.0).abs() < 0.01);
            }
        }
        assert!(beta_coefficients(NU1 - 1.0, 1.0, 4).is_err());
        assert!(beta_coefficients(NU1 + PI * PI / 4.0 + 0.1, 1.0, 4).is_err());
    }

    #[test]
    fn band_is_limited_by_second_mode_for_short_cavities() {
        let g = ScatterGeometry::with_wall_opening(0.2, 0.1).unwrap();
        assert_eq!(g.band().1, transverse_eigenvalue(2));
        let g = ScatterGeometry::with_wall_opening(1.0, 0.1).unwrap();
        assert!((g.band().1 - NU1 * 1.25).abs() < 1e-12);
    }

    #[test]
    fn full_guide_has_diagonal_solve() {
        let s = full_guide(8);
        let lam = NU1 + 1.0;
        let b = beta_coefficients(lam, 1.0, 1).unwrap()[0];
        assert!((s.solve_g(lam).unwrap() - 1.0 / b).abs() < 1e-13);
        let k = 1.0f64;
        assert!((s.eta(lam).unwrap() - k * k.tan()).abs() < 1e-12);
        assert!(s.find_critical_lambda().unwrap().is_none());
    }

    #[test]
    fn g_positive_and_below_upper_bound() {
        let s = solver(0.1);
        for &lam in &[NU1 + 0.1, NU1 + 1.0, NU1 + 2.4] {
            let g = s.solve_g(lam).unwrap();
            let beta = betas(lam, 1.0, 400);
            let c = beta.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(g > 0.0 && g <= 0.1 / c * (1.0 + 1e-12), "{g} {c}");
        }
    }

    #[test]
    fn g_decreases_with_opening() {
        let lam = NU1 + 1.0;
        let g = [0.3, 0.2, 0.1, 0.05].map(|h| solver(h).solve_g(lam).unwrap());
        assert!(g.windows(2).all(|w| w[1] < w[0]), "{g:?}");
    }

    #[test]
    fn unitarity_and_limits() {
        let s = solver(0.1);
        for lam in s.band_grid(50) {
            let c = s.reflection_c1(lam).unwrap();
            assert!((c.norm() - 1.0).abs() < 1e-10);
        }
        assert!(s.eta(NU1 + 1e-3).unwrap() < 0.0);
        let (_, hi) = s.geom.band();
        assert!(s.eta(hi - 1e-9).unwrap() > 0.0);
        assert!((mobius(1.0, 0.0) - 1.0).norm() < 1e-15);
        assert!((mobius(1.0, 1e12) + 1.0).norm() < 1e-11);
        assert!((mobius(1.0, -1e12) + 1.0).norm() < 1e-11);
    }

    #[test]
    fn resonance_exists_and_transmits() {
        let s = solver(0.1);
        let sol = s.find_critical_lambda().unwrap().unwrap();
        let (lo, hi) = s.geom.band();
        assert!(sol.lambda > lo && sol.lambda < hi);
        assert!(sol.eta.abs() <= 1e-10, "{}", sol.eta);
        assert!((sol.c1 - 1.0).norm() <= 1e-8);
        assert!(sol.c_n.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn beta1_cancels() {
        let g = ScatterGeometry::with_wall_opening(1.0, 0.2).unwrap();
        let cfg = ScatterConfig::default_for(&g);
        let a = find_critical_lambda(&g, &cfg).unwrap().unwrap();
        let b = find_critical_lambda(&g, &ScatterConfig { beta1_override: Some(3.7), ..cfg }).unwrap().unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-9, "{} {}", a.lambda, b.lambda);
    }
}
