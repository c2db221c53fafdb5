//! Run configuration: command-line flags override config-file values override defaults.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::Args;
use modematch::modebasis::BasisKind;

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive linear sweep lo:hi:steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let d = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| if i + 1 == self.steps { self.hi } else { self.lo + d * i as f64 }).collect()
    }
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(format!("sweep `{s}` must have the form lo:hi:steps"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("sweep lower end `{lo}` is not a number"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("sweep upper end `{hi}` is not a number"))?;
        let steps: usize = steps.trim().parse().map_err(|_| format!("sweep step count `{steps}` is not a positive integer"))?;
        if steps == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi || (steps > 1 && lo == hi) {
            return Err(format!("sweep `{s}` is empty (need lo < hi and steps >= 1, or lo = hi with steps = 1)"));
        }
        Ok(Sweep { lo, hi, steps })
    }
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat TOML file with the same keys as the long flags (e.g. a1 = 1.0, modes-M = 16).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Left length of the slit cylinder.
    #[arg(long, global = true)]
    pub a1: Option<f64>,
    /// Right length of the slit cylinder.
    #[arg(long, global = true)]
    pub a2: Option<f64>,
    /// Opening width: Gamma = (0, h).
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Half distance between the two barriers of the waveguide.
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Disk radius.
    #[arg(long = "R1", global = true)]
    pub r1: Option<f64>,
    /// Petal outer radius.
    #[arg(long = "R2", global = true)]
    pub r2: Option<f64>,
    /// Petal opening angle.
    #[arg(long, global = true)]
    pub phi1: Option<f64>,
    /// Galerkin size on the opening (arc modes for the petal).
    #[arg(long = "modes-M", global = true)]
    pub modes_m: Option<usize>,
    /// Exactly summed transverse modes (disk harmonics for the petal).
    #[arg(long = "modes-N", global = true)]
    pub modes_n: Option<usize>,
    /// Oracle grid resolution 1/s.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Number of oracle eigenvalues.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format (csv by default).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed of the oracle start vectors.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sweep range lo:hi:steps (h for barrier-sweep, lambda for scatter-sweep).
    #[arg(long, global = true, value_name = "LO:HI:STEPS")]
    pub sweep: Option<String>,
    /// Opening basis: edge (default) or sine.
    #[arg(long, global = true)]
    pub basis: Option<String>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a1: f64,
    pub a2: f64,
    pub h: f64,
    pub a: f64,
    pub r1: f64,
    pub r2: f64,
    pub phi1: f64,
    pub modes_m: Option<usize>,
    pub modes_n: Option<usize>,
    pub grid: usize,
    pub k: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub basis: BasisKind,
}

const KEYS: [&str; 16] =
    ["a1", "a2", "h", "a", "R1", "R2", "phi1", "modes-M", "modes-N", "grid", "k", "out", "format", "seed", "sweep", "basis"];

fn cfg_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn file_table(path: &Path) -> anyhow::Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    if let Some(bad) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(cfg_err(format!("{}: unknown key `{bad}`", path.display())));
    }
    if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table() || v.is_array()) {
        return Err(cfg_err(format!("{}: key `{k}` must be a scalar", path.display())));
    }
    Ok(table)
}

fn file_f64(t: &toml::Table, key: &str) -> anyhow::Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(toml::Value::Float(v)) => Ok(Some(*v)),
        Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(v) => Err(cfg_err(format!("config key `{key}` must be a number (got {v})"))),
    }
}

fn file_uint(t: &toml::Table, key: &str) -> anyhow::Result<Option<u64>> {
    match t.get(key) {
        None => Ok(None),
        Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
        Some(v) => Err(cfg_err(format!("config key `{key}` must be a non-negative integer (got {v})"))),
    }
}

fn file_str(t: &toml::Table, key: &str) -> anyhow::Result<Option<String>> {
    match t.get(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s.clone())),
        Some(v) => Err(cfg_err(format!("config key `{key}` must be a string (got {v})"))),
    }
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(format!("{name} must be a positive length (got {v})")))
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(p) => file_table(p)?,
            None => toml::Table::new(),
        };
        let f = |flag: Option<f64>, key: &str, default: f64| -> anyhow::Result<f64> {
            Ok(flag.or(file_f64(&file, key)?).unwrap_or(default))
        };
        let usize_of = |flag: Option<usize>, key: &str| -> anyhow::Result<Option<usize>> {
            Ok(flag.or(file_uint(&file, key)?.map(|v| v as usize)))
        };

        let a1 = positive("a1", f(flags.a1, "a1", 1.0)?)?;
        let a2 = positive("a2", f(flags.a2, "a2", 0.8)?)?;
        let h = f(flags.h, "h", 0.1)?;
        if !(0.0..=1.0).contains(&h) {
            return Err(cfg_err(format!("h must lie in [0, 1] (got {h})")));
        }
        let a = positive("a", f(flags.a, "a", 1.0)?)?;
        let r1 = positive("R1", f(flags.r1, "R1", 1.0)?)?;
        let r2 = positive("R2", f(flags.r2, "R2", 8.0)?)?;
        let phi1 = positive("phi1", f(flags.phi1, "phi1", PI / 16.0)?)?;
        let modes_m = usize_of(flags.modes_m, "modes-M")?;
        let modes_n = usize_of(flags.modes_n, "modes-N")?;
        if modes_m == Some(0) || modes_n == Some(0) {
            return Err(cfg_err("modes-M and modes-N must be positive"));
        }
        let grid = usize_of(flags.grid, "grid")?.unwrap_or(240);
        let k = usize_of(flags.k, "k")?.unwrap_or(6);
        let seed = flags.seed.or(file_uint(&file, "seed")?).unwrap_or(1);
        let out = flags.out.clone().or(file_str(&file, "out")?.map(PathBuf::from));
        let format = match (flags.format, file_str(&file, "format")?) {
            (Some(fmt), _) => fmt,
            (None, Some(s)) => match s.as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                other => return Err(cfg_err(format!("format must be csv or json (got `{other}`)"))),
            },
            (None, None) => Format::Csv,
        };
        let sweep = match flags.sweep.clone().or(file_str(&file, "sweep")?) {
            Some(s) => Some(s.parse::<Sweep>().map_err(cfg_err)?),
            None => None,
        };
        let basis = match flags.basis.clone().or(file_str(&file, "basis")?) {
            Some(s) => s.parse::<BasisKind>().map_err(|e| cfg_err(e.to_string()))?,
            None => BasisKind::Edge,
        };
        Ok(Self { a1, a2, h, a, r1, r2, phi1, modes_m, modes_n, grid, k, out, format, seed, sweep, basis })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "0.1:0.5:5".parse().unwrap();
        let p = s.points();
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], 0.1);
        assert_eq!(p[4], 0.5);
        assert_eq!("2:2:1".parse::<Sweep>().unwrap().points(), vec![2.0]);
        for bad in ["1:0:3", "0:1:0", "0:1", "a:1:2", "1:1:3"] {
            assert!(bad.parse::<Sweep>().is_err(), "{bad}");
        }
    }

    #[test]
    fn precedence_flag_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "a1 = 2.0\na2 = 1\nmodes-M = 16\nformat = \"json\"\n").unwrap();
        let flags = Flags { config: Some(path), a1: Some(3.0), ..Flags::default() };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.a1, 3.0);
        assert_eq!(cfg.a2, 1.0);
        assert_eq!(cfg.modes_m, Some(16));
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.h, 0.1);
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "bogus = 1\n").unwrap();
        let flags = Flags { config: Some(path), ..Flags::default() };
        assert!(RunConfig::resolve(&flags).unwrap_err().downcast_ref::<ConfigError>().is_some());
        let flags = Flags { a2: Some(-1.0), ..Flags::default() };
        assert!(RunConfig::resolve(&flags).unwrap_err().downcast_ref::<ConfigError>().is_some());
    }
}
