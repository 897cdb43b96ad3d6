//! Run configuration: strict TOML with presets, benchmark defaults and
//! command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use koopman_po::experiments::{
    DictSpec, ReferenceMethodChoice, SimOverrides, SystemKind, TableConfig, TableKind, TrialConfig, LORENZ_SIGMA_GRID,
    VDP_SIGMA_GRID,
};
use koopman_po::{EdmdOptions, SimConfig, Solver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    FitEdmd,
    Reference,
    Mz,
    Trial,
    Sweep,
    Table,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitEdmd => "fit-edmd",
            Command::Reference => "reference",
            Command::Mz => "mz",
            Command::Trial => "trial",
            Command::Sweep => "sweep",
            Command::Table => "table",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKindName {
    Delay,
    FullState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethodName {
    CrankNicolson,
    Expm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Qr,
    NormalEquations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// First moments over the σ grid, with power-law fits.
    Sigma,
    /// Full-state dictionary degree at `M = 0`.
    Degree,
    /// Delay degree 1 against 2 at fixed `M`.
    DegreePair,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    /// `van_der_pol`, `lorenz`, `modified_vdp`, or a preset
    /// (`lorenz_rho28`, `lorenz_rho13`). Empty selects the default.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_obs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax_steps_obs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_box: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DictKindName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<ReferenceMethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_validation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdmdBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_scaling: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    /// 1-based coordinate seen by the delay models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_dim: Option<usize>,
    /// Coordinates of a σ sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MzBlock {
    /// 1-based observed coordinates; the observed functions are the
    /// monomials in these coordinates only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    /// Exponents of the tracked observable on the full state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

/// Output placement; excluded from the config hash.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Run directory name; defaults to `<command>-<UTC timestamp>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Trajectory CSV used by `fit-edmd` instead of simulating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemBlock>,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub dict: DictBlock,
    #[serde(default)]
    pub reference: ReferenceBlock,
    #[serde(default)]
    pub edmd: EdmdBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub mz: MzBlock,
    #[serde(default)]
    pub io: IoBlock,
}

/// Parses strict TOML; errors carry line and column.
pub fn from_toml_str(text: &str) -> Result<RunConfig> {
    Ok(toml::from_str(text)?)
}

/// Reads an optional config file and applies `key=value` overrides, where
/// `key` is a dotted path such as `system.sigma` and `value` is a TOML
/// literal (bare words are taken as strings).
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    let cfg = from_toml_str(&text).with_context(|| match path {
        Some(p) => format!("parsing config {}", p.display()),
        None => "parsing config".into(),
    })?;
    if sets.is_empty() {
        return Ok(cfg);
    }
    let mut table: toml::Table = toml::from_str(&text)?;
    for s in sets {
        apply_set(&mut table, s)?;
    }
    RunConfig::deserialize(toml::Value::Table(table)).context("applying --set overrides")
}

fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    ensure!(parts.iter().all(|p| !p.is_empty()), "empty segment in override key {key:?}");
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {key:?}: {p:?} is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn system_family(name: &str) -> Result<(SystemKind, BTreeMap<String, f64>)> {
    let mut fixed = BTreeMap::new();
    let kind = match name {
        "van_der_pol" => SystemKind::van_der_pol(),
        "modified_vdp" => SystemKind::modified_vdp(3),
        "lorenz" => SystemKind::lorenz(28.0),
        "lorenz_rho28" => {
            fixed.insert("rho".to_string(), 28.0);
            SystemKind::lorenz(28.0)
        }
        "lorenz_rho13" => {
            fixed.insert("rho".to_string(), 13.0);
            SystemKind::lorenz(13.0)
        }
        other => bail!(
            "unknown system {other:?} (expected van_der_pol, lorenz, lorenz_rho28, lorenz_rho13 or modified_vdp)"
        ),
    };
    Ok((kind, fixed))
}

fn kind_from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemKind> {
    let get = |k: &str| params[k];
    Ok(match name {
        "van_der_pol" => SystemKind::VanDerPol { mu: get("mu") },
        "lorenz" => SystemKind::Lorenz {
            nu: get("nu"),
            rho: get("rho"),
            beta: get("beta"),
        },
        "modified_vdp" => {
            let h = get("h_degree");
            ensure!(h >= 1.0 && h.fract() == 0.0 && h <= 99.0, "h_degree must be a positive integer, got {h}");
            SystemKind::ModifiedVdp {
                mu: get("mu"),
                h_degree: h as u32,
            }
        }
        _ => unreachable!("canonical system name"),
    })
}

fn resolve_system(block: &SystemBlock) -> Result<(SystemBlock, SystemKind)> {
    let (preset, fixed) = system_family(&block.name)?;
    let mut params = preset.params();
    for (k, v) in &block.params {
        ensure!(params.contains_key(k), "unknown parameter {k:?} for system {}", block.name);
        if let Some(f) = fixed.get(k) {
            ensure!(f == v, "preset {} fixes {k} = {f}, got {v}", block.name);
        }
        params.insert(k.clone(), *v);
    }
    let name = preset.name();
    let kind = kind_from_params(&name, &params)?;
    let sigma = block.sigma.unwrap_or(match kind {
        SystemKind::Lorenz { .. } => 3.0,
        _ => 0.5,
    });
    ensure!(sigma.is_finite() && sigma >= 0.0, "sigma must be finite and non-negative, got {sigma}");
    kind.build(sigma)?;
    Ok((
        SystemBlock {
            name,
            sigma: Some(sigma),
            params,
        },
        kind,
    ))
}

fn table_system(table: TableKind) -> SystemBlock {
    let name = match table {
        TableKind::LorenzRho28 => "lorenz_rho28",
        TableKind::LorenzRho13 => "lorenz_rho13",
        TableKind::ModifiedVdp => "modified_vdp",
    };
    SystemBlock {
        name: name.into(),
        ..Default::default()
    }
}

fn default_table(kind: &SystemKind) -> TableKind {
    match kind {
        SystemKind::Lorenz { rho, .. } if *rho == 13.0 => TableKind::LorenzRho13,
        SystemKind::Lorenz { .. } => TableKind::LorenzRho28,
        _ => TableKind::ModifiedVdp,
    }
}

fn table_matches(table: TableKind, kind: &SystemKind) -> bool {
    match (table, kind) {
        (TableKind::LorenzRho28, SystemKind::Lorenz { rho, .. }) => *rho == 28.0,
        (TableKind::LorenzRho13, SystemKind::Lorenz { rho, .. }) => *rho == 13.0,
        (TableKind::ModifiedVdp, SystemKind::Lorenz { .. }) => false,
        (TableKind::ModifiedVdp, _) => true,
        _ => false,
    }
}

fn check_dims(dims: &[usize], d: usize, what: &str) -> Result<()> {
    ensure!(!dims.is_empty(), "{what} is empty");
    for &k in dims {
        ensure!(k >= 1 && k <= d, "{what}: coordinate {k} out of range 1..={d}");
    }
    Ok(())
}

impl RunConfig {
    /// Fills every default for `command` and checks value ranges. The
    /// result resolves to itself.
    pub fn resolve(&self, command: Command) -> Result<RunConfig> {
        let mut c = self.clone();
        c.command = Some(command);

        let table = c.experiment.table.as_deref().map(str::parse::<TableKind>).transpose()?;
        let mut sys_block = c.system.clone().unwrap_or_default();
        if sys_block.name.is_empty() {
            sys_block.name = match table {
                Some(t) if command == Command::Table => table_system(t).name,
                _ => "van_der_pol".into(),
            };
        }
        let (sys_block, kind) = resolve_system(&sys_block)?;
        c.system = Some(sys_block);
        let dim = kind.dim();

        let m_max = c.sim.m_max.unwrap_or(8);
        let seed = c.sim.seed.unwrap_or(0);
        let tpl = kind.sim_defaults(m_max, seed);
        let sim = &mut c.sim;
        sim.m_max = Some(m_max);
        sim.seed = Some(seed);
        sim.dt = Some(sim.dt.unwrap_or(tpl.dt));
        sim.dt_obs = Some(sim.dt_obs.unwrap_or(tpl.dt_obs));
        sim.relax_steps_obs = Some(sim.relax_steps_obs.unwrap_or(tpl.relax_steps_obs));
        sim.points_per_traj = Some(sim.points_per_traj.unwrap_or(tpl.points_per_traj));
        sim.n_traj = Some(sim.n_traj.unwrap_or(tpl.n_traj));
        if sim.init_box.is_none() {
            sim.init_box = Some(tpl.init_box.iter().map(|&(lo, hi)| [lo, hi]).collect());
        }
        ensure!(
            sim.init_box.as_ref().map(Vec::len) == Some(dim),
            "sim.init_box needs {dim} intervals"
        );
        c.sim_config().validate()?;

        let dict = &mut c.dict;
        dict.kind = Some(dict.kind.unwrap_or(DictKindName::Delay));
        dict.degree = Some(dict.degree.unwrap_or(2));
        dict.m = Some(dict.m.unwrap_or(m_max));
        ensure!(dict.degree > Some(0), "dict.degree must be positive");
        ensure!(dict.m <= Some(m_max), "dict.m = {} exceeds sim.m_max = {m_max}", dict.m.unwrap());

        let (ref_degree, ref_dt) = kind.reference_defaults();
        let r = &mut c.reference;
        r.degree = Some(r.degree.unwrap_or(ref_degree));
        r.dt = Some(r.dt.unwrap_or(ref_dt));
        r.method = Some(r.method.unwrap_or(ReferenceMethodName::CrankNicolson));
        r.n_validation = Some(r.n_validation.unwrap_or(1000));
        r.validation_seed = Some(r.validation_seed.unwrap_or(0));
        ensure!(r.degree > Some(0), "reference.degree must be positive");
        ensure!(r.dt.is_some_and(|v| v > 0.0), "reference.dt must be positive");
        ensure!(r.n_validation > Some(0), "reference.n_validation must be positive");

        let e = &mut c.edmd;
        e.ridge = Some(e.ridge.unwrap_or(0.0));
        e.solver = Some(e.solver.unwrap_or(SolverName::Qr));
        e.column_scaling = Some(e.column_scaling.unwrap_or(false));
        ensure!(e.ridge.is_some_and(|v| v.is_finite() && v >= 0.0), "edmd.ridge must be non-negative");

        let default_obs = if matches!(kind, SystemKind::Lorenz { .. }) { 1 } else { 2 };
        let x = &mut c.experiment;
        x.observed_dim = Some(x.observed_dim.unwrap_or(default_obs));
        check_dims(&[x.observed_dim.unwrap()], dim, "experiment.observed_dim")?;
        x.observed_dims = Some(x.observed_dims.take().unwrap_or_else(|| (1..=dim).collect()));
        check_dims(x.observed_dims.as_ref().unwrap(), dim, "experiment.observed_dims")?;
        x.ms = Some(x.ms.take().unwrap_or_else(|| (0..=m_max).collect()));
        ensure!(!x.ms.as_ref().unwrap().is_empty(), "experiment.ms is empty");
        if let Some(m) = x.ms.as_ref().unwrap().iter().find(|&&m| m > m_max) {
            bail!("experiment.ms contains {m} > sim.m_max = {m_max}");
        }
        x.degrees = Some(x.degrees.take().unwrap_or_else(|| vec![1, 2, 3, 4]));
        ensure!(
            !x.degrees.as_ref().unwrap().is_empty() && x.degrees.as_ref().unwrap().iter().all(|&d| d > 0),
            "experiment.degrees must be non-empty and positive"
        );
        let grid = match kind {
            SystemKind::Lorenz { .. } => LORENZ_SIGMA_GRID.to_vec(),
            _ => VDP_SIGMA_GRID.to_vec(),
        };
        x.sigma_grid = Some(x.sigma_grid.take().unwrap_or(grid));
        ensure!(
            x.sigma_grid.as_ref().unwrap().iter().all(|s| s.is_finite() && *s >= 0.0),
            "experiment.sigma_grid entries must be finite and non-negative"
        );
        x.seeds = Some(x.seeds.take().unwrap_or_else(|| (0..5).collect()));
        ensure!(!x.seeds.as_ref().unwrap().is_empty(), "experiment.seeds is empty");
        x.n_test = Some(x.n_test.unwrap_or(1000));
        ensure!(x.n_test > Some(0), "experiment.n_test must be positive");
        x.sweep = Some(x.sweep.unwrap_or(SweepKind::Sigma));
        let table = table.unwrap_or_else(|| default_table(&kind));
        ensure!(
            command != Command::Table || table_matches(table, &kind),
            "table {table} does not match system {}",
            kind.name()
        );
        x.table = Some(table.to_string());
        x.plot_samples = Some(x.plot_samples.unwrap_or(100));
        ensure!(x.plot_samples >= Some(2), "experiment.plot_samples must be at least 2");

        let obs = c.experiment.observed_dim.unwrap();
        let z = &mut c.mz;
        z.observed_dims = Some(z.observed_dims.take().unwrap_or_else(|| vec![obs]));
        check_dims(z.observed_dims.as_ref().unwrap(), dim, "mz.observed_dims")?;
        ensure!(
            z.observed_dims.as_ref().unwrap().len() < dim,
            "mz.observed_dims must leave at least one coordinate unobserved"
        );
        z.degree = Some(z.degree.unwrap_or(c.reference.degree.unwrap()));
        ensure!(z.degree > Some(0), "mz.degree must be positive");
        let first = z.observed_dims.as_ref().unwrap()[0];
        z.target = Some(z.target.take().unwrap_or_else(|| {
            let mut t = vec![0; dim];
            t[first - 1] = 1;
            t
        }));
        let target = z.target.as_ref().unwrap();
        ensure!(target.len() == dim, "mz.target needs {dim} exponents");
        ensure!(
            target
                .iter()
                .enumerate()
                .all(|(i, &p)| p == 0 || z.observed_dims.as_ref().unwrap().contains(&(i + 1))),
            "mz.target must involve observed coordinates only"
        );
        ensure!(target.iter().sum::<u32>() <= z.degree.unwrap(), "mz.target exceeds mz.degree");
        z.t_end = Some(z.t_end.unwrap_or(1.0));
        z.dt = Some(z.dt.unwrap_or(1e-3));
        ensure!(
            z.t_end.is_some_and(|v| v > 0.0) && z.dt.is_some_and(|v| v > 0.0),
            "mz.t_end and mz.dt must be positive"
        );

        let io = &mut c.io;
        io.out = Some(io.out.take().unwrap_or_else(|| "runs".into()));
        io.force = Some(io.force.unwrap_or(false));
        if let Some(name) = &io.run_name {
            ensure!(
                !name.is_empty() && !name.contains(['/', '\\']) && name != "." && name != "..",
                "io.run_name must be a plain directory name"
            );
        }
        ensure!(io.jobs != Some(0), "io.jobs must be positive");
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML without the `io` block, so output
    /// placement and thread count do not change the hash.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.io = IoBlock::default();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Replaces the simulation seed and shifts the repetition seeds to
    /// start at `seed`, keeping their count.
    pub fn override_seed(&mut self, seed: u64) {
        self.sim.seed = Some(seed);
        let n = self.experiment.seeds.as_ref().map_or(5, Vec::len) as u64;
        self.experiment.seeds = Some((seed..seed + n).collect());
    }

    fn system(&self) -> &SystemBlock {
        self.system.as_ref().expect("resolved config")
    }

    pub fn system_kind(&self) -> SystemKind {
        let s = self.system();
        let (preset, _) = system_family(&s.name).expect("resolved system");
        kind_from_params(&preset.name(), &s.params).expect("resolved system")
    }

    pub fn sigma(&self) -> f64 {
        self.system().sigma.expect("resolved config")
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            dt: s.dt.unwrap(),
            dt_obs: s.dt_obs.unwrap(),
            relax_steps_obs: s.relax_steps_obs.unwrap(),
            points_per_traj: s.points_per_traj.unwrap(),
            n_traj: s.n_traj.unwrap(),
            m_max: s.m_max.unwrap(),
            seed: s.seed.unwrap(),
            init_box: s.init_box.as_ref().unwrap().iter().map(|&[lo, hi]| (lo, hi)).collect(),
        }
    }

    pub fn edmd_options(&self) -> EdmdOptions {
        EdmdOptions {
            ridge: self.edmd.ridge.unwrap(),
            solver: match self.edmd.solver.unwrap() {
                SolverName::Qr => Solver::OrthogonalDecomposition,
                SolverName::NormalEquations => Solver::NormalEquations,
            },
            column_scaling: self.edmd.column_scaling.unwrap(),
        }
    }

    pub fn reference_method(&self) -> ReferenceMethodChoice {
        match self.reference.method.unwrap() {
            ReferenceMethodName::CrankNicolson => ReferenceMethodChoice::CrankNicolson,
            ReferenceMethodName::Expm => ReferenceMethodChoice::MatrixExponential,
        }
    }

    pub fn dict_spec(&self) -> DictSpec {
        DictSpec {
            m: self.dict.m.unwrap(),
            degree: self.dict.degree.unwrap(),
        }
    }

    pub fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            system: self.system_kind(),
            sim: self.sim_config(),
            reference_degree: self.reference.degree.unwrap(),
            reference_dt: self.reference.dt.unwrap(),
            reference_method: self.reference_method(),
            n_test: self.experiment.n_test.unwrap(),
            edmd: self.edmd_options(),
        }
    }

    pub fn table_config(&self) -> Result<TableConfig> {
        let table: TableKind = self.experiment.table.as_deref().unwrap().parse()?;
        let mut t = TableConfig::new(table);
        t.sigma_grid = self.experiment.sigma_grid.clone().unwrap();
        t.seeds = self.experiment.seeds.clone().unwrap();
        t.spec = self.dict_spec();
        t.n_test = self.experiment.n_test.unwrap();
        t.edmd = self.edmd_options();
        t.reference_method = self.reference_method();
        let s = self.sim_config();
        t.sim = SimOverrides {
            dt: Some(s.dt),
            dt_obs: Some(s.dt_obs),
            relax_steps_obs: Some(s.relax_steps_obs),
            points_per_traj: Some(s.points_per_traj),
            n_traj: Some(s.n_traj),
        };
        Ok(t)
    }
}
