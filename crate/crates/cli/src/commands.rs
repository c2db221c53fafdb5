//! Subcommand implementations: each builds a table and writes it.

use anyhow::Result;
use modematch::barrier::{self, BarrierConfig, BarrierGeometry, BarrierSolver};
use modematch::oracle::{self, REFERENCE_H};
use modematch::petal::{self, PetalConfig, PetalGeometry, PetalSolver};
use modematch::scatter::{ScatterConfig, ScatterGeometry, ScatterSolver};
use modematch::validate::{self, Suite};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{emit, Cell, Table};
use crate::{Command, ConfigError, NoRoot, ValidationFailed};

/// Residual tolerance of the oracle eigenpairs.
const ORACLE_TOL: f64 = 1e-8;

/// Sample points (r1 / R1, (r2 - R1) / (R2 - R1)) for the petal ratio table.
const PETAL_PAIRS: [(f64, f64); 5] = [(0.5, 3.0 / 7.0), (0.2, 1.0 / 7.0), (0.9, 0.5 / 7.0), (0.1, 5.0 / 7.0), (0.7, 6.0 / 7.0)];

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    let (table, pending) = match cmd {
        Command::BarrierEigen => (barrier_table(cfg, &[cfg.h])?, None),
        Command::BarrierSweep => {
            let hs = cfg.sweep.map(|s| s.points()).unwrap_or_else(|| (1..=10).map(|i| 0.05 * i as f64).collect());
            barrier_sweep(cfg, &hs)
        }
        Command::Scatter => (scatter_table(cfg)?, None),
        Command::ScatterSweep => (scatter_sweep(cfg)?, None),
        Command::Petal => (petal_table(cfg)?, None),
        Command::OracleTable => (oracle_table(cfg)?, None),
        Command::Validate { suite } => validate_table(suite.as_deref())?,
    };
    emit(&table.render(cfg.format)?, cfg.out.as_deref())?;
    match pending {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

const BARRIER_COLUMNS: [&str; 14] = [
    "a1",
    "a2",
    "h",
    "lambda",
    "ratio_I",
    "ratio_bound",
    "eta1_residual",
    "dispersion_residual",
    "matching_residual",
    "basis",
    "M",
    "N",
    "N_tail",
    "status",
];

fn barrier_row(cfg: &RunConfig, h: f64) -> Result<Vec<Cell>> {
    let geom = BarrierGeometry::with_wall_opening(cfg.a1, cfg.a2, h)?;
    let mut bcfg = BarrierConfig::with_basis(&geom, cfg.basis);
    if let Some(m) = cfg.modes_m {
        bcfg.trunc.m = m;
    }
    if let Some(n) = cfg.modes_n {
        bcfg.trunc.n_head = n;
    }
    let sol = BarrierSolver::new(geom, bcfg)?.find_first_eigenvalue()?;
    let (x1, x2) = (-0.5 * cfg.a1, 0.5 * cfg.a2);
    let ratio = barrier::cross_norm(&sol, x1)? / barrier::cross_norm(&sol, x2)?;
    let bound = barrier::ratio_bound(&sol, &geom, x1, x2).ok().map(|b| b.0);
    Ok(vec![
        cfg.a1.into(),
        cfg.a2.into(),
        h.into(),
        sol.lambda.into(),
        ratio.into(),
        bound.into(),
        sol.eta1_residual.into(),
        sol.dispersion_residual.into(),
        sol.matching_residual.into(),
        basis_name(cfg).into(),
        sol.m.into(),
        bcfg.trunc.n_head.into(),
        bcfg.trunc.n_tail.into(),
        "ok".into(),
    ])
}

fn basis_name(cfg: &RunConfig) -> &'static str {
    match cfg.basis {
        modematch::modebasis::BasisKind::Edge => "edge",
        modematch::modebasis::BasisKind::Sine => "sine",
    }
}

fn barrier_table(cfg: &RunConfig, hs: &[f64]) -> Result<Table> {
    let mut t = Table::new(BARRIER_COLUMNS);
    for &h in hs {
        t.push(barrier_row(cfg, h)?);
    }
    Ok(t)
}

/// Failed points keep their row (with the error as status); the first failure is returned after output.
fn barrier_sweep(cfg: &RunConfig, hs: &[f64]) -> (Table, Option<anyhow::Error>) {
    let results: Vec<Result<Vec<Cell>>> = hs.par_iter().map(|&h| barrier_row(cfg, h)).collect();
    let mut t = Table::new(BARRIER_COLUMNS);
    let mut first_err = None;
    for (&h, r) in hs.iter().zip(results) {
        match r {
            Ok(row) => t.push(row),
            Err(e) => {
                let mut row = vec![Cell::Missing; BARRIER_COLUMNS.len()];
                row[0] = cfg.a1.into();
                row[1] = cfg.a2.into();
                row[2] = h.into();
                row[9] = basis_name(cfg).into();
                row[13] = format!("error: {e}").into();
                t.push(row);
                first_err.get_or_insert(e);
            }
        }
    }
    (t, first_err)
}

fn scatter_solver(cfg: &RunConfig) -> Result<ScatterSolver> {
    let geom = ScatterGeometry::with_wall_opening(cfg.a, cfg.h)?;
    let mut scfg = ScatterConfig::with_basis(&geom, cfg.basis);
    if let Some(m) = cfg.modes_m {
        scfg.trunc.m = m;
    }
    if let Some(n) = cfg.modes_n {
        scfg.trunc.n_head = n;
    }
    Ok(ScatterSolver::new(geom, scfg)?)
}

fn scatter_table(cfg: &RunConfig) -> Result<Table> {
    let solver = scatter_solver(cfg)?;
    let (lo, hi) = solver.geom.band();
    let Some(sol) = solver.find_critical_lambda()? else {
        return Err(NoRoot(format!("no resonance in band ({lo}, {hi}) for a = {}, h = {}", cfg.a, cfg.h)).into());
    };
    let mut t = Table::new([
        "a",
        "h",
        "lambda_c",
        "gamma1_abs",
        "G",
        "eta",
        "re_c1",
        "im_c1",
        "c1_minus_1",
        "unitarity_residual",
        "condition",
        "basis",
        "M",
        "N",
        "N_tail",
    ]);
    t.push(vec![
        cfg.a.into(),
        cfg.h.into(),
        sol.lambda.into(),
        sol.gamma1_abs.into(),
        sol.g.into(),
        sol.eta.into(),
        sol.c1.re.into(),
        sol.c1.im.into(),
        (sol.c1 - 1.0).norm().into(),
        (sol.c1.norm() - 1.0).abs().into(),
        sol.condition.into(),
        basis_name(cfg).into(),
        solver.cfg.trunc.m.into(),
        solver.cfg.trunc.n_head.into(),
        solver.cfg.trunc.n_tail.into(),
    ]);
    Ok(t)
}

fn scatter_sweep(cfg: &RunConfig) -> Result<Table> {
    let solver = scatter_solver(cfg)?;
    let lambdas = match cfg.sweep {
        Some(s) => s.points(),
        None => solver.band_grid(400),
    };
    let samples: Vec<_> = lambdas.par_iter().map(|&l| solver.sample(l)).collect::<std::result::Result<_, _>>()?;
    let tr = solver.cfg.trunc;
    let mut t = Table::new([
        "a",
        "h",
        "lambda",
        "re_c1",
        "im_c1",
        "arg_c1",
        "G",
        "eta",
        "unitarity_residual",
        "basis",
        "M",
        "N",
        "N_tail",
    ]);
    for s in samples {
        t.push(vec![
            cfg.a.into(),
            cfg.h.into(),
            s.lambda.into(),
            s.c1.re.into(),
            s.c1.im.into(),
            s.c1.arg().into(),
            s.g.into(),
            s.eta.into(),
            (s.c1.norm() - 1.0).abs().into(),
            basis_name(cfg).into(),
            tr.m.into(),
            tr.n_head.into(),
            tr.n_tail.into(),
        ]);
    }
    Ok(t)
}

fn petal_table(cfg: &RunConfig) -> Result<Table> {
    let geom = PetalGeometry::new(cfg.r1, cfg.r2, cfg.phi1)?;
    let mut pcfg = PetalConfig::default();
    if let Some(m) = cfg.modes_m {
        pcfg.m_arc = m;
    }
    if cfg.modes_n.is_some() {
        pcfg.n_disk = cfg.modes_n;
    }
    let Some(sol) = PetalSolver::new(geom, pcfg)?.find_lambda_near_mu()? else {
        let mu = petal::sector_mu(&geom)?.mu;
        return Err(NoRoot(format!("no eigenvalue within {:.0}% of mu = {mu}", 100.0 * pcfg.bracket)).into());
    };
    let audit = petal::truncation_audit(&sol)?;
    let (c1, c2) = (sol.i1(geom.r1)?, sol.i2(geom.r1)?);
    let continuity = (c1 - c2).abs() / c1.abs().max(c2.abs());
    let mut t = Table::new([
        "R1",
        "R2",
        "phi1",
        "lambda",
        "mu",
        "rel_dev",
        "r1",
        "r2",
        "ratio_I2_I1",
        "bound",
        "psi",
        "bound_holds",
        "dispersion_residual",
        "outer_residual",
        "continuity_residual",
        "wronskian_max_rel",
        "besselnorm_max_rel",
        "psin_general_violations",
        "psi_ineq_violations",
        "psi2_j0_ok",
        "positivity_violations",
        "disk_precondition",
        "M",
        "N",
    ]);
    for (f1, f2) in PETAL_PAIRS {
        let r1 = f1 * geom.r1;
        let r2 = geom.r1 + f2 * (geom.r2 - geom.r1);
        let (i1, i2) = petal::norms_i1_i2(&sol, r1, r2)?;
        let b = petal::ratio_bound_petal(&sol, r2)?;
        let ratio = i2 / i1;
        t.push(vec![
            geom.r1.into(),
            geom.r2.into(),
            geom.phi1.into(),
            sol.lambda.into(),
            sol.mu.into(),
            sol.rel_dev.into(),
            r1.into(),
            r2.into(),
            ratio.into(),
            b.bound.into(),
            b.psi.into(),
            b.bound.map_or(Cell::Missing, |v| Cell::Bool(ratio >= v)),
            sol.dispersion_residual.into(),
            sol.outer_residual.into(),
            continuity.into(),
            audit.wronskian_max_rel.into(),
            audit.besselnorm_max_rel.into(),
            audit.psin_general_violations.into(),
            audit.psi_ineq_violations.into(),
            audit.psi2_j0_ok.into(),
            audit.positivity_violations.into(),
            sol.disk_precondition.into(),
            sol.m_arc.into(),
            sol.n_disk.into(),
        ]);
    }
    Ok(t)
}

fn oracle_table(cfg: &RunConfig) -> Result<Table> {
    if cfg.grid < 8 || !cfg.grid.is_multiple_of(2) {
        return Err(ConfigError(format!("grid must be an even integer >= 8 (got {})", cfg.grid)).into());
    }
    if !(1..=12).contains(&cfg.k) {
        return Err(ConfigError(format!("k must lie in 1..=12 (got {})", cfg.k)).into());
    }
    let s = 1.0 / cfg.grid as f64;
    let cols: Vec<oracle::OracleColumn> = REFERENCE_H
        .par_iter()
        .map(|&h| oracle::oracle_column(cfg.a1, cfg.a2, h, s, cfg.k, ORACLE_TOL, cfg.seed))
        .collect::<std::result::Result<_, _>>()?;
    let mut names = vec!["n".to_string()];
    for c in &cols {
        for p in ["lambda", "raw", "coarse", "mass_ratio", "class"] {
            names.push(format!("{p}_h{}", c.h));
        }
    }
    names.extend(["grid", "max_residual"].map(String::from));
    let mut t = Table::new(names);
    for r in 0..cfg.k {
        let mut row: Vec<Cell> = vec![(r + 1).into()];
        let mut worst = 0.0f64;
        for c in &cols {
            let m = &c.modes[r];
            worst = worst.max(m.residual);
            row.extend([
                m.extrapolated.into(),
                m.fine.into(),
                m.coarse.into(),
                (m.m1 / m.m2).into(),
                m.class.to_string().into(),
            ]);
        }
        row.push(cfg.grid.into());
        row.push(worst.into());
        t.push(row);
    }
    Ok(t)
}

fn validate_table(suite: Option<&str>) -> Result<(Table, Option<anyhow::Error>)> {
    let checks = match suite {
        Some(s) => validate::run(s.parse::<Suite>().map_err(ConfigError)?),
        None => validate::run_all(),
    };
    let mut t = Table::new(["suite", "check", "passed", "detail"]);
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in checks {
        t.push(vec![c.suite.into(), c.name.into(), c.passed.into(), c.detail.into()]);
    }
    Ok((t, (failed > 0).then(|| ValidationFailed(failed).into())))
}
