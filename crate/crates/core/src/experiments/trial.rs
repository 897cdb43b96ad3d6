//! Partial-observation accuracy trials: delay-EDMD predictions conditioned
//! on a history of one coordinate, scored against reference-Koopman
//! predictions conditioned on the full state.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dictionary::{delay_dictionary, monomial_dictionary, Dictionary};
use crate::edmd::{fit_koopman, EdmdOptions, KoopmanMatrix};
use crate::error::{Error, Result};
use crate::generator::{reference_koopman, reference_koopman_expm};
use crate::polynomial::MultiIndex;
use crate::simulate::{make_delay_pairs, simulate_dataset_with_offset, SimConfig, TrajectoryDataset};
use crate::systems::{make_lorenz, make_modified_vdp, make_van_der_pol, SdeSystem};

/// Stream offset separating test trajectories from training ones.
pub const TEST_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq)]
pub enum SystemKind {
    VanDerPol { mu: f64 },
    Lorenz { nu: f64, rho: f64, beta: f64 },
    ModifiedVdp { mu: f64, h_degree: u32 },
}

impl SystemKind {
    pub fn van_der_pol() -> Self {
        SystemKind::VanDerPol { mu: 1.0 }
    }

    pub fn lorenz(rho: f64) -> Self {
        SystemKind::Lorenz {
            nu: 10.0,
            rho,
            beta: 8.0 / 3.0,
        }
    }

    pub fn modified_vdp(h_degree: u32) -> Self {
        SystemKind::ModifiedVdp { mu: 1.0, h_degree }
    }

    pub fn build(&self, sigma: f64) -> Result<SdeSystem<f64>> {
        match *self {
            SystemKind::VanDerPol { mu } => make_van_der_pol(mu, sigma),
            SystemKind::Lorenz { nu, rho, beta } => make_lorenz(nu, rho, beta, sigma),
            SystemKind::ModifiedVdp { mu, h_degree } => make_modified_vdp(mu, h_degree, sigma),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemKind::Lorenz { .. } => 3,
            _ => 2,
        }
    }

    pub fn name(&self) -> String {
        match self {
            SystemKind::VanDerPol { .. } => "van_der_pol".into(),
            SystemKind::Lorenz { .. } => "lorenz".into(),
            SystemKind::ModifiedVdp { .. } => "modified_vdp".into(),
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match *self {
            SystemKind::VanDerPol { mu } => {
                p.insert("mu".into(), mu);
            }
            SystemKind::Lorenz { nu, rho, beta } => {
                p.insert("nu".into(), nu);
                p.insert("rho".into(), rho);
                p.insert("beta".into(), beta);
            }
            SystemKind::ModifiedVdp { mu, h_degree } => {
                p.insert("mu".into(), mu);
                p.insert("h_degree".into(), f64::from(h_degree));
            }
        }
        p
    }

    /// Simulation protocol of the benchmark family.
    pub fn sim_defaults(&self, m_max: usize, seed: u64) -> SimConfig<f64> {
        match self {
            SystemKind::Lorenz { .. } => SimConfig::lorenz_defaults(m_max, seed),
            _ => SimConfig::van_der_pol_defaults(m_max, seed),
        }
    }

    /// `(degree, dt)` used for the reference Koopman matrix.
    pub fn reference_defaults(&self) -> (u32, f64) {
        match self {
            SystemKind::Lorenz { .. } => (6, 1e-4),
            _ => (8, 1e-3),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReferenceMethodChoice {
    #[default]
    CrankNicolson,
    MatrixExponential,
}

/// Everything a trial needs besides `(σ, seed, M, dictionary)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig {
    pub system: SystemKind,
    /// Simulation template; the seed field is replaced per trial.
    pub sim: SimConfig<f64>,
    pub reference_degree: u32,
    pub reference_dt: f64,
    pub reference_method: ReferenceMethodChoice,
    pub n_test: usize,
    pub edmd: EdmdOptions,
}

impl TrialConfig {
    pub fn benchmark_defaults(system: SystemKind) -> Self {
        let sim = system.sim_defaults(8, 0);
        let (reference_degree, reference_dt) = system.reference_defaults();
        TrialConfig {
            system,
            sim,
            reference_degree,
            reference_dt,
            reference_method: ReferenceMethodChoice::CrankNicolson,
            n_test: 1000,
            edmd: EdmdOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.n_test == 0 {
            return Err(Error::InvalidArgument("n_test must be positive".into()));
        }
        if self.sim.init_box.len() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.system.dim(),
                found: self.sim.init_box.len(),
                context: "initial box vs system dimension",
            });
        }
        Ok(())
    }

    pub fn reference(&self, sigma: f64) -> Result<KoopmanMatrix<f64>> {
        let system = self.system.build(sigma)?;
        let dict = monomial_dictionary(system.dim(), self.reference_degree)?;
        match self.reference_method {
            ReferenceMethodChoice::CrankNicolson => reference_koopman(&system, &dict, self.reference_dt, self.sim.dt_obs),
            ReferenceMethodChoice::MatrixExponential => reference_koopman_expm(&system, &dict, self.sim.dt_obs),
        }
    }
}

/// Model dictionary: monomials of total degree ≤ `degree` in the `m + 1`
/// delay variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DictSpec {
    pub m: usize,
    pub degree: u32,
}

impl DictSpec {
    pub fn build(&self) -> Result<Dictionary> {
        if self.degree <= 2 && self.degree >= 1 {
            delay_dictionary(self.m, self.degree)
        } else {
            monomial_dictionary(self.m + 1, self.degree)
        }
    }
}

/// `E[X_d^power]`, `dim` zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Statistic {
    pub dim: usize,
    pub power: u32,
}

impl Statistic {
    pub fn full_state_index(&self, d: usize) -> MultiIndex {
        let mut e = vec![0; d];
        e[self.dim] = self.power;
        MultiIndex::new(e)
    }

    pub fn label(&self) -> String {
        if self.power == 1 {
            format!("E[X{}]", self.dim + 1)
        } else {
            format!("E[X{}^{}]", self.dim + 1, self.power)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRecord {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    /// One-based observed coordinate.
    pub observed_dim: usize,
    pub statistic: MultiIndex,
    pub dictionary: DictSpec,
    pub sigma: f64,
    /// Mean absolute error over the test set.
    pub error: f64,
    pub n_test: usize,
    pub seed: u64,
}

/// Training trajectories plus an independent test set for one `(σ, seed)`.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub sigma: f64,
    pub seed: u64,
    pub train: TrajectoryDataset<f64>,
    pub test: TrajectoryDataset<f64>,
}

impl TrialData {
    pub fn generate(cfg: &TrialConfig, sigma: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let system = cfg.system.build(sigma)?;
        let mut sim = cfg.sim.clone();
        sim.seed = seed;
        let train = simulate_dataset_with_offset(&system, &sim, 0)?;
        let test_cfg = SimConfig {
            n_traj: cfg.n_test,
            points_per_traj: sim.m_max + 2,
            ..sim
        };
        let test = simulate_dataset_with_offset(&system, &test_cfg, TEST_STREAM_OFFSET)?;
        Ok(TrialData { sigma, seed, train, test })
    }

    /// Full states at the end of every test history (`n_test × D`).
    pub fn test_states(&self) -> DMatrix<f64> {
        let last = self.test.rows_per_traj() - 1;
        let d = self.test.dim();
        DMatrix::from_fn(self.test.trajectories.len(), d, |i, j| self.test.trajectories[i][(last, j)])
    }

    /// Histories of coordinate `dim` ending at the last row, newest first.
    pub fn test_histories(&self, dim: usize, m: usize) -> Result<DMatrix<f64>> {
        let last = self.test.rows_per_traj() - 1;
        if m > last {
            return Err(Error::DelayTooLarge {
                m,
                needed: m + 1,
                rows: last + 1,
            });
        }
        Ok(DMatrix::from_fn(self.test.trajectories.len(), m + 1, |i, j| {
            self.test.trajectories[i][(last - j, dim)]
        }))
    }
}

/// Reference predictions of each statistic at the test states; depends on
/// the full state only.
pub fn reference_truth(reference: &KoopmanMatrix<f64>, data: &TrialData, stats: &[Statistic]) -> Result<DMatrix<f64>> {
    let d = data.test.dim();
    let targets: Vec<MultiIndex> = stats.iter().map(|s| s.full_state_index(d)).collect();
    reference.predict_one_step(&data.test_states(), &targets)
}

/// Delay-model predictions of `E[z_1^power]` for every test history. A
/// power whose monomial lies outside the dictionary has zero projection onto
/// the monomial span, so its prediction is identically zero.
pub fn model_predictions(model: &KoopmanMatrix<f64>, histories: &DMatrix<f64>, powers: &[u32]) -> Result<DMatrix<f64>> {
    let v = model.dict.variable_count();
    let present: Vec<(usize, MultiIndex)> = powers
        .iter()
        .enumerate()
        .filter_map(|(k, &p)| {
            let mut e = vec![0; v];
            e[0] = p;
            let idx = MultiIndex::new(e);
            model.dict.index_of(&idx).map(|_| (k, idx))
        })
        .collect();
    let mut out = DMatrix::zeros(histories.nrows(), powers.len());
    if present.is_empty() {
        return Ok(out);
    }
    let targets: Vec<MultiIndex> = present.iter().map(|(_, m)| m.clone()).collect();
    let raw = model.predict_one_step(histories, &targets)?;
    for (c, (k, _)) in present.iter().enumerate() {
        out.set_column(*k, &raw.column(c));
    }
    Ok(out)
}

fn mean_abs_diff(a: &DMatrix<f64>, ca: usize, b: &DMatrix<f64>, cb: usize) -> f64 {
    let n = a.nrows();
    (0..n).map(|i| (a[(i, ca)] - b[(i, cb)]).abs()).sum::<f64>() / n as f64
}

/// One prepared `(σ, seed)` job: data, reference and cached truth values.
pub struct TrialContext<'a> {
    pub cfg: &'a TrialConfig,
    pub data: TrialData,
    pub truth: DMatrix<f64>,
    pub stats: Vec<Statistic>,
}

impl<'a> TrialContext<'a> {
    pub fn new(cfg: &'a TrialConfig, reference: &KoopmanMatrix<f64>, sigma: f64, seed: u64, stats: Vec<Statistic>) -> Result<Self> {
        let data = TrialData::generate(cfg, sigma, seed)?;
        let truth = reference_truth(reference, &data, &stats)?;
        Ok(TrialContext { cfg, data, truth, stats })
    }

    /// Fits the delay model for `(observed dim, spec)` and scores every
    /// statistic on that coordinate.
    pub fn evaluate(&self, dim: usize, spec: DictSpec) -> Result<Vec<AccuracyRecord>> {
        if spec.m > self.cfg.sim.m_max {
            return Err(Error::DelayTooLarge {
                m: spec.m,
                needed: spec.m + 2,
                rows: self.cfg.sim.m_max + 2,
            });
        }
        let dict = spec.build()?;
        let pairs = make_delay_pairs(&self.data.train, dim, spec.m)?;
        let model = fit_koopman(&pairs, &dict, &self.cfg.edmd)?;
        let hist = self.data.test_histories(dim, spec.m)?;
        let mine: Vec<(usize, Statistic)> = self.stats.iter().copied().enumerate().filter(|(_, s)| s.dim == dim).collect();
        let powers: Vec<u32> = mine.iter().map(|(_, s)| s.power).collect();
        let pred = model_predictions(&model, &hist, &powers)?;
        let d = self.cfg.system.dim();
        Ok(mine
            .iter()
            .enumerate()
            .map(|(k, &(col, s))| AccuracyRecord {
                system: self.cfg.system.name(),
                params: self.cfg.system.params(),
                observed_dim: dim + 1,
                statistic: s.full_state_index(d),
                dictionary: spec,
                sigma: self.data.sigma,
                error: mean_abs_diff(&self.truth, col, &pred, k),
                n_test: self.cfg.n_test,
                seed: self.data.seed,
            })
            .collect())
    }
}

fn check_dim(cfg: &TrialConfig, observed_dim: usize) -> Result<usize> {
    if observed_dim == 0 || observed_dim > cfg.system.dim() {
        return Err(Error::IndexOutOfRange {
            index: observed_dim,
            size: cfg.system.dim(),
        });
    }
    Ok(observed_dim - 1)
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    Ok(())
}

/// Runs `jobs` for every `(σ, seed)` in parallel, sharing one reference
/// matrix per σ. Output order follows `(σ, seed)` input order.
pub fn run_grid<F>(cfg: &TrialConfig, sigmas: &[f64], seeds: &[u64], stats: &[Statistic], job: F) -> Result<Vec<AccuracyRecord>>
where
    F: Fn(&TrialContext) -> Result<Vec<AccuracyRecord>> + Sync,
{
    cfg.validate()?;
    check_seeds(seeds)?;
    if sigmas.is_empty() {
        return Err(Error::InvalidArgument("sigma grid is empty".into()));
    }
    let references = sigmas.par_iter().map(|&s| cfg.reference(s)).collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, u64)> = (0..sigmas.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let chunks = tasks
        .par_iter()
        .map(|&(i, seed)| {
            let ctx = TrialContext::new(cfg, &references[i], sigmas[i], seed, stats.to_vec())?;
            job(&ctx)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Accuracy of `E[X_d]` and `E[X_d²]` for each delay depth in `ms`.
pub fn run_partial_observation_trial(
    cfg: &TrialConfig,
    observed_dim: usize,
    ms: &[usize],
    delay_degree: u32,
    sigma: f64,
    seeds: &[u64],
) -> Result<Vec<AccuracyRecord>> {
    let dim = check_dim(cfg, observed_dim)?;
    if !(1..=2).contains(&delay_degree) {
        return Err(Error::InvalidArgument(format!("delay degree must be 1 or 2, got {delay_degree}")));
    }
    let stats = vec![Statistic { dim, power: 1 }, Statistic { dim, power: 2 }];
    run_grid(cfg, &[sigma], seeds, &stats, |ctx| {
        let mut out = Vec::new();
        for &m in ms {
            out.extend(ctx.evaluate(dim, DictSpec { m, degree: delay_degree })?);
        }
        Ok(out)
    })
}

/// No delay (`M = 0`): monomial dictionaries of the observed coordinate with
/// increasing degree.
pub fn run_dictionary_degree_sweep(
    cfg: &TrialConfig,
    observed_dim: usize,
    degrees: &[u32],
    sigma: f64,
    seeds: &[u64],
) -> Result<Vec<AccuracyRecord>> {
    let dim = check_dim(cfg, observed_dim)?;
    if degrees.iter().any(|&p| p == 0) {
        return Err(Error::InvalidArgument("dictionary degree must be positive".into()));
    }
    let stats = vec![Statistic { dim, power: 1 }, Statistic { dim, power: 2 }];
    run_grid(cfg, &[sigma], seeds, &stats, |ctx| {
        let mut out = Vec::new();
        for &degree in degrees {
            out.extend(ctx.evaluate(dim, DictSpec { m: 0, degree })?);
        }
        Ok(out)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreePair {
    pub degree1: AccuracyRecord,
    pub degree2: AccuracyRecord,
}

impl DegreePair {
    /// `error(degree 2) − error(degree 1)`.
    pub fn difference(&self) -> f64 {
        self.degree2.error - self.degree1.error
    }
}

/// `E[X_d]` with the degree-1 and degree-2 delay dictionaries on identical
/// data, paired per seed.
pub fn run_degree_comparison(
    cfg: &TrialConfig,
    observed_dim: usize,
    m: usize,
    sigma: f64,
    seeds: &[u64],
) -> Result<Vec<DegreePair>> {
    let dim = check_dim(cfg, observed_dim)?;
    let stats = vec![Statistic { dim, power: 1 }];
    let recs = run_grid(cfg, &[sigma], seeds, &stats, |ctx| {
        let mut out = ctx.evaluate(dim, DictSpec { m, degree: 1 })?;
        out.extend(ctx.evaluate(dim, DictSpec { m, degree: 2 })?);
        Ok(out)
    })?;
    Ok(recs
        .chunks(2)
        .map(|c| DegreePair {
            degree1: c[0].clone(),
            degree2: c[1].clone(),
        })
        .collect())
}

/// First-moment accuracy `E[X_d]` for each observed coordinate in
/// `observed_dims`, over a σ grid. One record per `(σ, seed, d)`.
pub fn run_sigma_sweep(
    cfg: &TrialConfig,
    observed_dims: &[usize],
    spec: DictSpec,
    sigma_grid: &[f64],
    seeds: &[u64],
) -> Result<Vec<AccuracyRecord>> {
    let dims = observed_dims.iter().map(|&d| check_dim(cfg, d)).collect::<Result<Vec<_>>>()?;
    if dims.is_empty() {
        return Err(Error::InvalidArgument("no observed coordinates requested".into()));
    }
    if let Some(s) = sigma_grid.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be finite and non-negative, got {s}")));
    }
    let stats: Vec<Statistic> = dims.iter().map(|&dim| Statistic { dim, power: 1 }).collect();
    run_grid(cfg, sigma_grid, seeds, &stats, |ctx| {
        let mut out = Vec::new();
        for &dim in &dims {
            out.extend(ctx.evaluate(dim, spec)?);
        }
        Ok(out)
    })
}
