//! Quick invariant suite over all modules, used by the CLI `validate` command.

use std::f64::consts::PI;

use crate::barrier::{self, BarrierConfig, BarrierGeometry, BarrierSolver};
use crate::modebasis::{overlap_matrix, transverse_eigenpair, Opening};
use crate::oracle::{self, GridSpec};
use crate::petal::{self, PetalConfig, PetalGeometry, PetalSolver};
use crate::scatter::{ScatterConfig, ScatterGeometry, ScatterSolver};
use crate::specfun;

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Specfun,
    Modebasis,
    Barrier,
    Scatter,
    Petal,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Specfun, Suite::Modebasis, Suite::Barrier, Suite::Scatter, Suite::Petal, Suite::Oracle];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Specfun => "specfun",
            Suite::Modebasis => "modebasis",
            Suite::Barrier => "barrier",
            Suite::Scatter => "scatter",
            Suite::Petal => "petal",
            Suite::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}' (expected one of specfun, modebasis, barrier, scatter, petal, oracle)"))
    }
}

struct Recorder {
    suite: &'static str,
    out: Vec<Check>,
}

impl Recorder {
    fn check(&mut self, name: &'static str, passed: bool, detail: String) {
        self.out.push(Check { suite: self.suite, name, passed, detail });
    }

    fn fail(&mut self, name: &'static str, err: impl std::fmt::Display) {
        self.check(name, false, format!("error: {err}"));
    }
}

pub fn run(suite: Suite) -> Vec<Check> {
    let mut r = Recorder { suite: suite.name(), out: Vec::new() };
    match suite {
        Suite::Specfun => specfun_checks(&mut r),
        Suite::Modebasis => modebasis_checks(&mut r),
        Suite::Barrier => barrier_checks(&mut r),
        Suite::Scatter => scatter_checks(&mut r),
        Suite::Petal => petal_checks(&mut r),
        Suite::Oracle => oracle_checks(&mut r),
    }
    r.out
}

pub fn run_all() -> Vec<Check> {
    Suite::ALL.into_iter().flat_map(run).collect()
}

const ORDERS: [f64; 8] = [0.0, 0.5, 1.0, 2.5, 7.0, 16.0, 50.0, 150.0];
const ARGS: [f64; 8] = [0.1, 0.7, 1.8, 5.0, 12.0, 40.0, 120.0, 400.0];

fn specfun_checks(r: &mut Recorder) {
    let mut worst_w = 0.0f64;
    let mut worst_rec = 0.0f64;
    let mut err = None;
    for nu in ORDERS {
        for x in ARGS {
            match specfun::bessel_jy(nu, x) {
                Ok(e) => worst_w = worst_w.max(e.wronskian_residual()),
                Err(specfun::SpecFunError::Overflow { .. }) => {}
                Err(e) => err = Some(e.to_string()),
            }
            if nu >= 1.0 {
                let vals = (specfun::bessel_j(nu - 1.0, x), specfun::bessel_j(nu, x), specfun::bessel_j(nu + 1.0, x));
                if let (Ok(a), Ok(b), Ok(c)) = vals {
                    let rhs = 2.0 * nu / x * b;
                    let scale = a.abs().max(c.abs()).max(rhs.abs());
                    if scale > 1e-250 {
                        worst_rec = worst_rec.max((a + c - rhs).abs() / scale);
                    }
                }
            }
        }
    }
    match err {
        Some(e) => r.check("wronskian", false, e),
        None => r.check("wronskian", worst_w <= 1e-10, format!("max rel {worst_w:.2e}")),
    }
    r.check("recurrence", worst_rec <= 1e-9, format!("max rel {worst_rec:.2e}"));

    let jp1 = specfun::J1_PRIME_ZERO;
    let xs: Vec<f64> = (1..=20).map(|i| jp1 * i as f64 / 20.0).collect();
    let mut bad_pos = 0;
    let mut bad_mono = 0;
    for &x in &xs {
        let mut prev = f64::NEG_INFINITY;
        for nu in [0.0, 0.3, 1.0, 2.0, 5.0, 16.0, 48.0] {
            let j = specfun::bessel_jy_scaled(nu, x).map(|s| s.j).unwrap_or(f64::NAN);
            if !(j > 0.0) {
                bad_pos += 1;
            }
            match specfun::bessel_j_log_derivative(nu, x) {
                Ok(l) if l >= prev => prev = l,
                _ => bad_mono += 1,
            }
        }
    }
    r.check("positivity", bad_pos == 0, format!("{bad_pos} violations"));
    r.check("log_derivative_monotone", bad_mono == 0, format!("{bad_mono} violations"));

    let zeros: Vec<f64> = [0.0, 0.5, 1.0, 3.0, 10.0, 40.0].iter().filter_map(|&nu| specfun::bessel_first_zero(nu).ok()).collect();
    let ordered = zeros.len() == 6 && zeros.windows(2).all(|w| w[0] < w[1]) && jp1 < zeros[0];
    r.check("zero_ordering", ordered, format!("j_0 = {:.12}", zeros.first().copied().unwrap_or(f64::NAN)));
    let j0_ok = zeros.first().is_some_and(|z| (z - specfun::J0_ZERO).abs() < 1e-9);
    r.check("j0_value", j0_ok, String::new());
}

fn modebasis_checks(r: &mut Recorder) {
    let mut worst = 0.0f64;
    for n in 1..=6 {
        match transverse_eigenpair(n) {
            Ok(mode) => {
                let h = 1.0 / 2000.0;
                let norm: f64 = (1..2000).map(|i| mode.eval(i as f64 * h).powi(2)).sum::<f64>() * h;
                worst = worst.max((norm - 1.0).abs()).max((mode.nu - (PI * n as f64).powi(2)).abs());
            }
            Err(e) => return r.fail("transverse_orthonormal", e),
        }
    }
    r.check("transverse_orthonormal", worst < 1e-9, format!("max dev {worst:.2e}"));
    match Opening::new(0.3, 0.55).and_then(|o| overlap_matrix(o, 4, 4000)) {
        Ok(p) => {
            let worst = (1..=4)
                .map(|m| (1.0 - (1..=4000).map(|n| p.get(m, n).powi(2)).sum::<f64>()).abs())
                .fold(0.0f64, f64::max);
            r.check("parseval", worst < 1e-3, format!("max tail {worst:.2e}"));
        }
        Err(e) => r.fail("parseval", e),
    }
}

fn barrier_checks(r: &mut Recorder) {
    let mut run = || -> barrier::Result<()> {
        let geom = BarrierGeometry::with_wall_opening(1.0, 0.8, 0.1)?;
        let cfg = BarrierConfig::default_for(&geom);
        let sol = BarrierSolver::new(geom, cfg)?.find_first_eigenvalue()?;
        let (lo, hi) = geom.admissible_bracket();
        r.check("lambda_in_bracket", sol.lambda > lo && sol.lambda < hi, format!("lambda = {:.12}", sol.lambda));
        r.check("eta1_residual", sol.eta1_residual.abs() <= 1e-8 * sol.a_norm.max(1.0), format!("{:.2e}", sol.eta1_residual));
        let norm: f64 = sol.b.iter().map(|v| v * v).sum();
        r.check("b_normalised", (norm - 1.0).abs() < 1e-12, String::new());
        let doubled = BarrierSolver::new(geom, cfg.doubled())?.find_first_eigenvalue()?;
        let d = (doubled.lambda - sol.lambda).abs();
        r.check("truncation_doubling", d < 1e-6, format!("|dlambda| = {d:.2e}"));
        let (bound, _) = barrier::ratio_bound(&sol, &geom, -0.5, 0.4)?;
        let ratio = barrier::cross_norm(&sol, -0.5)? / barrier::cross_norm(&sol, 0.4)?;
        r.check("ratio_bound", ratio >= bound, format!("ratio {ratio:.4e} >= bound {bound:.4e}"));
        Ok(())
    };
    if let Err(e) = run() {
        r.fail("barrier", e);
    }
}

fn scatter_checks(r: &mut Recorder) {
    let mut run = || -> crate::scatter::Result<()> {
        let geom = ScatterGeometry::with_wall_opening(1.0, 0.2)?;
        let solver = ScatterSolver::new(geom, ScatterConfig::default_for(&geom))?;
        let mut worst = 0.0f64;
        for lam in solver.band_grid(50) {
            worst = worst.max((solver.reflection_c1(lam)?.norm() - 1.0).abs());
        }
        r.check("unitarity", worst <= 1e-10, format!("max ||c1| - 1| = {worst:.2e}"));
        match solver.find_critical_lambda()? {
            Some(sol) => {
                let d = (sol.c1 - 1.0).norm();
                r.check("resonance", d <= 1e-8, format!("lambda_c = {:.12}, |c1 - 1| = {d:.2e}", sol.lambda));
            }
            None => r.check("resonance", false, "no root of eta in band".into()),
        }
        let open = ScatterGeometry::with_wall_opening(1.0, 1.0)?;
        let none = ScatterSolver::new(open, ScatterConfig::default_for(&open))?.find_critical_lambda()?;
        r.check("fully_open_no_resonance", none.is_none(), String::new());
        Ok(())
    };
    if let Err(e) = run() {
        r.fail("scatter", e);
    }
}

fn petal_checks(r: &mut Recorder) {
    let mut run = || -> petal::Result<()> {
        let geom = PetalGeometry::new(1.0, 8.0, PI / 16.0)?;
        let Some(sol) = PetalSolver::new(geom, PetalConfig::default())?.find_lambda_near_mu()? else {
            r.check("root_near_mu", false, "no root in bracket".into());
            return Ok(());
        };
        r.check("root_near_mu", sol.rel_dev.abs() <= 0.05, format!("lambda = {:.12}, mu = {:.12}", sol.lambda, sol.mu));
        let (i1, i2) = (sol.i1(geom.r1)?, sol.i2(geom.r1)?);
        let gap = (i1 - i2).abs() / i1.abs().max(i2.abs());
        r.check("continuity", gap <= 1e-8, format!("rel gap {gap:.2e}"));
        let audit = petal::truncation_audit(&sol)?;
        r.check("wronskian", audit.wronskian_max_rel <= 1e-10, format!("{:.2e}", audit.wronskian_max_rel));
        r.check("besselnorm", audit.besselnorm_max_rel <= 1e-8, format!("{:.2e}", audit.besselnorm_max_rel));
        r.check("psin_general", audit.psin_general_violations == 0, format!("{} of {}", audit.psin_general_violations, audit.psin_general_checked));
        r.check("psi_ineq", audit.psi_ineq_violations == 0, format!("{} of {}", audit.psi_ineq_violations, audit.psi_ineq_checked));
        r.check("psi2_j0", audit.psi2_j0_ok, String::new());
        r.check("positivity", audit.positivity_violations == 0, format!("{}", audit.positivity_violations));
        Ok(())
    };
    if let Err(e) = run() {
        r.fail("petal", e);
    }
}

fn oracle_checks(r: &mut Recorder) {
    let mut run = || -> oracle::Result<()> {
        let s = 1.0 / 40.0;
        let grid = GridSpec::with_wall_opening(1.0, 0.8, 1.0, s)?;
        let pairs = oracle::smallest_eigenpairs(&oracle::assemble(&grid), 1, 1e-9)?;
        let d1 = |p: f64, l: f64| 2.0 * (1.0 - (p * PI * s / l).cos()) / (s * s);
        let expect = d1(1.0, 1.8) + d1(1.0, 1.0);
        let rel = (pairs[0].lambda - expect).abs() / expect;
        r.check("rectangle_closed_form", rel < 1e-10, format!("rel {rel:.2e}"));
        let grid = GridSpec::with_wall_opening(1.0, 0.8, 0.25, s)?;
        let pairs = oracle::smallest_eigenpairs(&oracle::assemble(&grid), 6, 1e-9)?;
        let worst = pairs
            .iter()
            .map(|p| {
                let (m1, m2) = oracle::subdomain_mass(&p.vector, &grid);
                (m1 + m2 - 1.0).abs()
            })
            .fold(0.0f64, f64::max);
        r.check("mass_partition", worst < 1e-12, format!("{worst:.2e}"));
        Ok(())
    };
    if let Err(e) = run() {
        r.fail("oracle", e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for suite in Suite::ALL {
            for c in run(suite) {
                assert!(c.passed, "{}::{} failed: {}", c.suite, c.name, c.detail);
            }
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
