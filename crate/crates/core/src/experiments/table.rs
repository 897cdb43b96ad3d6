//! Power-law exponent tables: per system variant and observed coordinate,
//! one fit of `α₂σ^α₁ + α₃` per repetition, summarized as mean ± std.

use std::fmt;
use std::str::FromStr;

use crate::edmd::EdmdOptions;
use crate::error::{Error, Result};

use super::power_law::{fit_power_law, PowerLawFit};
use super::trial::{run_sigma_sweep, AccuracyRecord, DictSpec, ReferenceMethodChoice, SystemKind, TrialConfig};
use super::{mean_std, SimOverrides};

pub const LORENZ_SIGMA_GRID: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
/// Stops at 0.7: beyond that, noise drives the h = x1 oscillator to |x1| ≈ 10
/// where the truncated polynomial reference no longer converges.
pub const VDP_SIGMA_GRID: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TableKind {
    LorenzRho28,
    LorenzRho13,
    ModifiedVdp,
}

impl TableKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TableKind::LorenzRho28 => "lorenz_rho28",
            TableKind::LorenzRho13 => "lorenz_rho13",
            TableKind::ModifiedVdp => "modified_vdp",
        }
    }

    /// `(variant label, system, observed coordinates)`.
    pub fn variants(&self) -> Vec<(String, SystemKind, Vec<usize>)> {
        match self {
            TableKind::LorenzRho28 => vec![("rho=28".into(), SystemKind::lorenz(28.0), vec![1, 2, 3])],
            TableKind::LorenzRho13 => vec![("rho=13".into(), SystemKind::lorenz(13.0), vec![1, 2, 3])],
            TableKind::ModifiedVdp => [1, 3, 5]
                .iter()
                .map(|&h| {
                    let label = if h == 1 { "h=x1".to_string() } else { format!("h=x1^{h}") };
                    (label, SystemKind::modified_vdp(h), vec![1, 2])
                })
                .collect(),
        }
    }

    pub fn default_sigma_grid(&self) -> Vec<f64> {
        match self {
            TableKind::ModifiedVdp => VDP_SIGMA_GRID.to_vec(),
            _ => LORENZ_SIGMA_GRID.to_vec(),
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lorenz_rho28" => Ok(TableKind::LorenzRho28),
            "lorenz_rho13" => Ok(TableKind::LorenzRho13),
            "modified_vdp" => Ok(TableKind::ModifiedVdp),
            other => Err(Error::InvalidArgument(format!(
                "unknown table {other:?} (expected lorenz_rho28, lorenz_rho13 or modified_vdp)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableConfig {
    pub table: TableKind,
    pub sigma_grid: Vec<f64>,
    /// One repetition per seed.
    pub seeds: Vec<u64>,
    pub spec: DictSpec,
    pub n_test: usize,
    pub edmd: EdmdOptions,
    pub reference_method: ReferenceMethodChoice,
    pub sim: SimOverrides,
}

impl TableConfig {
    pub fn new(table: TableKind) -> Self {
        TableConfig {
            table,
            sigma_grid: table.default_sigma_grid(),
            seeds: (0..5).collect(),
            spec: DictSpec { m: 8, degree: 2 },
            n_test: 1000,
            edmd: EdmdOptions::default(),
            reference_method: ReferenceMethodChoice::CrankNicolson,
            sim: SimOverrides::default(),
        }
    }

    pub fn trial_config(&self, system: SystemKind) -> TrialConfig {
        let mut cfg = TrialConfig::benchmark_defaults(system);
        cfg.sim.m_max = self.spec.m;
        cfg.sim.points_per_traj = 101 + self.spec.m;
        self.sim.apply(&mut cfg.sim);
        cfg.n_test = self.n_test;
        cfg.edmd = self.edmd;
        cfg.reference_method = self.reference_method;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentRow {
    pub variant: String,
    pub observed_dim: usize,
    /// One fit per repetition, in seed order.
    pub fits: Vec<PowerLawFit>,
    pub alpha1_mean: f64,
    pub alpha1_std: f64,
}

impl ExponentRow {
    pub fn alphas(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.alpha1).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentTable {
    pub table: TableKind,
    pub rows: Vec<ExponentRow>,
    pub records: Vec<AccuracyRecord>,
}

impl ExponentTable {
    pub fn row(&self, variant: &str, observed_dim: usize) -> Option<&ExponentRow> {
        self.rows.iter().find(|r| r.variant == variant && r.observed_dim == observed_dim)
    }
}

/// Fits one power law per `(variant, observed coordinate, seed)` from the
/// σ-sweep errors of that seed.
pub fn fit_rows(variant: &str, observed_dims: &[usize], seeds: &[u64], records: &[AccuracyRecord]) -> Result<Vec<ExponentRow>> {
    let mut rows = Vec::new();
    for &d in observed_dims {
        let mut fits = Vec::new();
        for &seed in seeds {
            let pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.observed_dim == d && r.seed == seed)
                .map(|r| (r.sigma, r.error))
                .collect();
            fits.push(fit_power_law(&pts)?);
        }
        let alphas: Vec<f64> = fits.iter().map(|f| f.alpha1).collect();
        let (alpha1_mean, alpha1_std) = mean_std(&alphas);
        rows.push(ExponentRow {
            variant: variant.to_string(),
            observed_dim: d,
            fits,
            alpha1_mean,
            alpha1_std,
        });
    }
    Ok(rows)
}

pub fn run_exponent_table(cfg: &TableConfig) -> Result<ExponentTable> {
    if cfg.sigma_grid.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("table needs a non-empty sigma grid and seed list".into()));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (label, system, dims) in cfg.table.variants() {
        let tc = cfg.trial_config(system);
        let recs = run_sigma_sweep(&tc, &dims, cfg.spec, &cfg.sigma_grid, &cfg.seeds)?;
        rows.extend(fit_rows(&label, &dims, &cfg.seeds, &recs)?);
        records.extend(recs);
    }
    Ok(ExponentTable {
        table: cfg.table,
        rows,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in [TableKind::LorenzRho28, TableKind::LorenzRho13, TableKind::ModifiedVdp] {
            assert_eq!(k.as_str().parse::<TableKind>().unwrap(), k);
        }
        assert!("lorenz".parse::<TableKind>().is_err());
    }

    #[test]
    fn modified_vdp_variants() {
        let v = TableKind::ModifiedVdp.variants();
        assert_eq!(v.len(), 3);
        assert_eq!(v[2].1, SystemKind::modified_vdp(5));
        assert_eq!(v[0].2, vec![1, 2]);
    }

    #[test]
    fn empty_config_is_rejected() {
        let mut cfg = TableConfig::new(TableKind::LorenzRho28);
        cfg.sigma_grid.clear();
        assert!(run_exponent_table(&cfg).is_err());
        let mut cfg = TableConfig::new(TableKind::LorenzRho28);
        cfg.seeds.clear();
        assert!(run_exponent_table(&cfg).is_err());
    }

    #[test]
    fn trial_config_applies_overrides() {
        let mut cfg = TableConfig::new(TableKind::ModifiedVdp);
        cfg.sim.n_traj = Some(7);
        cfg.n_test = 11;
        let tc = cfg.trial_config(SystemKind::modified_vdp(3));
        assert_eq!(tc.sim.n_traj, 7);
        assert_eq!(tc.sim.points_per_traj, 109);
        assert_eq!(tc.n_test, 11);
        assert_eq!(tc.reference_degree, 8);
    }

    #[test]
    fn rows_from_synthetic_records() {
        let mk = |d: usize, seed: u64, s: f64, e: f64| AccuracyRecord {
            system: "lorenz".into(),
            params: Default::default(),
            observed_dim: d,
            statistic: crate::polynomial::MultiIndex::new(vec![1, 0, 0]),
            dictionary: DictSpec { m: 8, degree: 2 },
            sigma: s,
            error: e,
            n_test: 1,
            seed,
        };
        let mut recs = Vec::new();
        for seed in [0, 1] {
            for s in [0.5, 1.0, 2.0, 4.0] {
                recs.push(mk(1, seed, s, 0.3 * s.powf(0.9 + 0.1 * seed as f64) + 0.01));
            }
        }
        let rows = fit_rows("x", &[1], &[0, 1], &recs).unwrap();
        assert!((rows[0].fits[0].alpha1 - 0.9).abs() < 1e-6);
        assert!((rows[0].fits[1].alpha1 - 1.0).abs() < 1e-6);
        assert!((rows[0].alpha1_mean - 0.95).abs() < 1e-6);
        // sample standard deviation of {0.9, 1.0}
        assert!((rows[0].alpha1_std - 0.1 / 2f64.sqrt()).abs() < 1e-6);
    }
}
