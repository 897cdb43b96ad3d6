//! Subcommand dispatch. Each stage writes into one run directory and
//! failures are reported with the stage name.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DVector;

use koopman_po::experiments::{
    fit_power_law, mean_error_by_sigma, run_degree_comparison, run_dictionary_degree_sweep, run_exponent_table,
    run_partial_observation_trial, run_sigma_sweep, AccuracyRecord, PowerLawFit, ReferenceMethodChoice,
};
use koopman_po::generator::reference_koopman_from_generator;
use koopman_po::io::{self, num, render_table, CsvHeader};
use koopman_po::{
    build_generator, delay_dictionary, expm_times_vector, fit_koopman, integrate_gle, make_delay_pairs,
    make_fullstate_pairs, monomial_dictionary, reference_koopman_expm, simulate_dataset, split_generator,
    validate_reference, Dictionary, KoopmanMatrix, MultiIndex, SnapshotPairs, TrajectoryDataset,
};

use crate::config::{Command, DictKindName, RunConfig, SweepKind};

/// Output sink for one invocation.
pub struct RunDir {
    pub path: PathBuf,
    pub hash: String,
}

impl RunDir {
    /// Creates `<out>/<run name>`; an existing directory is replaced only
    /// when `force` is set.
    pub fn create(cfg: &RunConfig, command: Command) -> Result<Self> {
        let name = cfg.io.run_name.clone().unwrap_or_else(|| {
            format!("{}-{}", command, chrono::Utc::now().format("%Y%m%dT%H%M%SZ"))
        });
        let path = Path::new(cfg.io.out.as_deref().unwrap_or("runs")).join(name);
        if path.exists() {
            ensure!(
                cfg.io.force == Some(true),
                "run directory {} already exists (use --force to overwrite)",
                path.display()
            );
            fs::remove_dir_all(&path).with_context(|| format!("removing {}", path.display()))?;
        }
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir {
            path,
            hash: cfg.hash()?,
        })
    }

    pub fn write(&self, name: &str, content: &str) -> Result<()> {
        let p = self.path.join(name);
        fs::write(&p, content).with_context(|| format!("writing {}", p.display()))
    }
}

/// The manifest is the resolved config with its hash as a leading comment;
/// it parses back as a config.
pub fn manifest(cfg: &RunConfig) -> Result<String> {
    Ok(format!(
        "# config_hash = {}\n# koopman-po {}\n{}",
        cfg.hash()?,
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()?
    ))
}

/// Runs a resolved config and returns the run directory.
pub fn execute(cfg: &RunConfig) -> Result<PathBuf> {
    let command = cfg.command.context("config has no command")?;
    let dir = RunDir::create(cfg, command)?;
    dir.write("manifest.toml", &manifest(cfg)?)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.io.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("building thread pool")?;
    pool.install(|| match command {
        Command::Simulate => simulate(cfg, &dir),
        Command::FitEdmd => fit_edmd(cfg, &dir),
        Command::Reference => reference(cfg, &dir),
        Command::Mz => mz(cfg, &dir),
        Command::Trial => trial(cfg, &dir),
        Command::Sweep => sweep(cfg, &dir),
        Command::Table => table(cfg, &dir),
    })?;
    Ok(dir.path)
}

fn stage<T>(name: &str, r: koopman_po::Result<T>) -> Result<T> {
    r.with_context(|| format!("stage {name}"))
}

fn dataset(cfg: &RunConfig) -> Result<TrajectoryDataset> {
    if let Some(input) = &cfg.io.input {
        let text = fs::read_to_string(input).with_context(|| format!("stage read-input: reading {input}"))?;
        return stage("read-input", io::read_trajectories_csv(&text));
    }
    let system = stage("system", cfg.system_kind().build(cfg.sigma()))?;
    stage("simulate", simulate_dataset(&system, &cfg.sim_config()))
}

fn pairs_and_dictionary(cfg: &RunConfig, ds: &TrajectoryDataset) -> Result<(SnapshotPairs, Dictionary)> {
    let degree = cfg.dict.degree.unwrap();
    match cfg.dict.kind.unwrap() {
        DictKindName::Delay => {
            let m = cfg.dict.m.unwrap();
            let d = cfg.experiment.observed_dim.unwrap();
            ensure!(d <= ds.dim(), "stage pairs: observed_dim {d} exceeds data dimension {}", ds.dim());
            let pairs = stage("pairs", make_delay_pairs(ds, d - 1, m))?;
            Ok((pairs, stage("dictionary", delay_dictionary(m, degree))?))
        }
        DictKindName::FullState => {
            let pairs = stage("pairs", make_fullstate_pairs(ds))?;
            Ok((pairs, stage("dictionary", monomial_dictionary(ds.dim(), degree))?))
        }
    }
}

fn simulate(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let ds = dataset(cfg)?;
    dir.write("trajectories.csv", &stage("write", io::trajectories_csv(&ds, &dir.hash))?)?;
    let (pairs, _) = pairs_and_dictionary(cfg, &ds)?;
    let var = match cfg.dict.kind.unwrap() {
        DictKindName::Delay => "z",
        DictKindName::FullState => "x",
    };
    let (x, y) = stage("write", io::pairs_csv(&pairs, &dir.hash, var))?;
    dir.write("pairs_x.csv", &x)?;
    dir.write("pairs_y.csv", &y)
}

fn fit_edmd(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let ds = dataset(cfg)?;
    let (pairs, dict) = pairs_and_dictionary(cfg, &ds)?;
    let k: KoopmanMatrix = stage("fit-edmd", fit_koopman(&pairs, &dict, &cfg.edmd_options()))?;
    if k.is_underdetermined() {
        eprintln!("warning: {} pairs for {} basis functions", pairs.len(), dict.len());
    }
    dir.write("koopman.csv", &stage("write", io::koopman_csv(&k, &dir.hash))?)
}

fn reference(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let system = stage("system", cfg.system_kind().build(cfg.sigma()))?;
    let dict = stage("dictionary", monomial_dictionary(system.dim(), cfg.reference.degree.unwrap()))?;
    let gen = stage("generator", build_generator(&system, &dict))?;
    dir.write("generator.csv", &stage("write", io::generator_csv(&gen, &dir.hash))?)?;
    let sim = cfg.sim_config();
    let dt = cfg.reference.dt.unwrap();
    let k = match cfg.reference_method() {
        ReferenceMethodChoice::CrankNicolson => stage("reference", reference_koopman_from_generator(&gen, dt, sim.dt_obs))?,
        ReferenceMethodChoice::MatrixExponential => stage("reference", reference_koopman_expm(&system, &dict, sim.dt_obs))?,
    };
    dir.write("reference.csv", &stage("write", io::koopman_csv(&k, &dir.hash))?)?;
    if cfg.sigma() != 0.0 {
        eprintln!("note: sigma > 0, skipping the deterministic RK4 validation");
        return Ok(());
    }
    let report = stage(
        "validation",
        validate_reference(
            &system,
            &k,
            &sim.init_box,
            cfg.reference.n_validation.unwrap(),
            dt,
            cfg.reference.validation_seed.unwrap(),
        ),
    )?;
    let mut h = CsvHeader::new(&dir.hash);
    h.push("n_points", report.n_points).push("rk4_dt", num(report.rk4_dt));
    let cols = ["coordinate", "mae", "max_abs"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = (0..report.mae.len())
        .map(|j| vec![format!("x{}", j + 1), num(report.mae[j]), num(report.max_abs[j])])
        .collect();
    dir.write("validation.csv", &stage("write", render_table(&h, &cols, &rows))?)
}

fn mz(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let system = stage("system", cfg.system_kind().build(cfg.sigma()))?;
    let dict = stage("dictionary", monomial_dictionary(system.dim(), cfg.mz.degree.unwrap()))?;
    let gen = stage("generator", build_generator(&system, &dict))?;
    let obs_dims = cfg.mz.observed_dims.as_ref().unwrap();
    let observed: Vec<usize> = dict
        .basis()
        .iter()
        .enumerate()
        .filter(|(_, m)| m.exponents().iter().enumerate().all(|(i, &p)| p == 0 || obs_dims.contains(&(i + 1))))
        .map(|(k, _)| k)
        .collect();
    let split = stage("split", split_generator(&gen, &observed))?;
    let target = MultiIndex::new(cfg.mz.target.clone().unwrap());
    let pos = dict.index_of(&target).context("stage mz: target not in dictionary")?;
    let opos = split.observed.iter().position(|&k| k == pos).context("stage mz: target is not observed")?;
    let mut c_o0 = DVector::zeros(split.n_observed());
    c_o0[opos] = 1.0;
    let c_u0 = DVector::zeros(split.n_unobserved());
    let (t_end, dt) = (cfg.mz.t_end.unwrap(), cfg.mz.dt.unwrap());
    let sol = stage("gle", integrate_gle(&split, &c_o0, &c_u0, t_end, dt))?;
    let labels: Vec<String> = split.observed.iter().map(|&k| dict.basis()[k].label("x")).collect();
    dir.write("gle.csv", &stage("write", io::gle_csv(&sol, &labels, &dir.hash))?)?;

    let mut c0 = DVector::zeros(dict.len());
    c0[pos] = 1.0;
    let direct = stage("direct", expm_times_vector(&gen.a, sol.times[sol.len() - 1], &c0))?;
    let mut h = CsvHeader::new(&dir.hash);
    h.push("t", num(sol.times[sol.len() - 1])).push("dt", num(dt));
    let cols = ["function", "gle", "direct", "abs_diff"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = split
        .observed
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (g, d) = (sol.last()[i], direct[k]);
            vec![labels[i].clone(), num(g), num(d), num((g - d).abs())]
        })
        .collect();
    dir.write("mz_check.csv", &stage("write", render_table(&h, &cols, &rows))?)
}

fn trial(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let recs = stage(
        "trial",
        run_partial_observation_trial(
            &cfg.trial_config(),
            cfg.experiment.observed_dim.unwrap(),
            cfg.experiment.ms.as_ref().unwrap(),
            cfg.dict.degree.unwrap(),
            cfg.sigma(),
            cfg.experiment.seeds.as_ref().unwrap(),
        ),
    )?;
    dir.write("accuracy.csv", &stage("write", io::accuracy_csv(&recs, &dir.hash))?)
}

fn fit_series(label: &str, pts: &[(f64, f64)]) -> Result<PowerLawFit> {
    fit_power_law(pts).with_context(|| format!("stage fit ({label})"))
}

fn sweep(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let tc = cfg.trial_config();
    let x = &cfg.experiment;
    let seeds = x.seeds.as_ref().unwrap();
    match x.sweep.unwrap() {
        SweepKind::Sigma => {
            let dims = x.observed_dims.as_ref().unwrap();
            let recs = stage(
                "sweep",
                run_sigma_sweep(&tc, dims, cfg.dict_spec(), x.sigma_grid.as_ref().unwrap(), seeds),
            )?;
            dir.write("accuracy.csv", &stage("write", io::accuracy_csv(&recs, &dir.hash))?)?;
            let mut series = Vec::new();
            for &d in dims {
                let sel: Vec<&AccuracyRecord> = recs.iter().filter(|r| r.observed_dim == d).collect();
                let pts = mean_error_by_sigma(&sel);
                let label = format!("E[X{d}]");
                let fit = fit_series(&label, &pts)?;
                series.push((label, pts, Some(fit)));
            }
            write_fits(dir, &series)?;
            let plot = stage("write", io::plot_csv(&series, x.plot_samples.unwrap(), &dir.hash))?;
            dir.write("plot.csv", &plot)
        }
        SweepKind::Degree => {
            let recs = stage(
                "sweep",
                run_dictionary_degree_sweep(
                    &tc,
                    x.observed_dim.unwrap(),
                    x.degrees.as_ref().unwrap(),
                    cfg.sigma(),
                    seeds,
                ),
            )?;
            dir.write("accuracy.csv", &stage("write", io::accuracy_csv(&recs, &dir.hash))?)
        }
        SweepKind::DegreePair => {
            let pairs = stage(
                "sweep",
                run_degree_comparison(&tc, x.observed_dim.unwrap(), cfg.dict.m.unwrap(), cfg.sigma(), seeds),
            )?;
            let recs: Vec<AccuracyRecord> = pairs.iter().flat_map(|p| [p.degree1.clone(), p.degree2.clone()]).collect();
            dir.write("accuracy.csv", &stage("write", io::accuracy_csv(&recs, &dir.hash))?)?;
            let h = CsvHeader::new(&dir.hash);
            let cols = ["seed", "error_degree1", "error_degree2", "difference"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = pairs
                .iter()
                .map(|p| {
                    vec![
                        p.degree1.seed.to_string(),
                        num(p.degree1.error),
                        num(p.degree2.error),
                        num(p.difference()),
                    ]
                })
                .collect();
            dir.write("paired.csv", &stage("write", render_table(&h, &cols, &rows))?)
        }
    }
}

fn write_fits(dir: &RunDir, series: &[(String, Vec<(f64, f64)>, Option<PowerLawFit>)]) -> Result<()> {
    let h = CsvHeader::new(&dir.hash);
    let cols = [
        "series",
        "alpha1",
        "alpha2",
        "alpha3",
        "residual_rms",
        "n_points",
        "alpha1_identifiable",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = series
        .iter()
        .filter_map(|(name, _, fit)| fit.as_ref().map(|f| (name, f)))
        .map(|(name, f)| {
            vec![
                name.clone(),
                num(f.alpha1),
                num(f.alpha2),
                num(f.alpha3),
                num(f.residual_rms),
                f.n_points.to_string(),
                f.alpha1_identifiable.to_string(),
            ]
        })
        .collect();
    dir.write("fits.csv", &stage("write", render_table(&h, &cols, &rows))?)
}

fn table(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let tc = cfg.table_config()?;
    if tc.sigma_grid.len() < 4 {
        bail!("stage table: the power-law fit needs at least 4 sigma values, got {}", tc.sigma_grid.len());
    }
    let t = stage("table", run_exponent_table(&tc))?;
    dir.write("accuracy.csv", &stage("write", io::accuracy_csv(&t.records, &dir.hash))?)?;
    dir.write("exponents.csv", &stage("write", io::exponent_summary_csv(&t, &dir.hash))?)?;
    dir.write("exponent_fits.csv", &stage("write", io::exponent_fits_csv(&t, &tc.seeds, &dir.hash))?)?;
    let mut series = Vec::new();
    for (label, _, dims) in tc.table.variants() {
        for d in dims {
            let sel: Vec<&AccuracyRecord> = t
                .records
                .iter()
                .filter(|r| r.observed_dim == d && variant_matches(&label, r))
                .collect();
            let pts = mean_error_by_sigma(&sel);
            let name = format!("{label} E[X{d}]");
            let fit = fit_series(&name, &pts)?;
            series.push((name, pts, Some(fit)));
        }
    }
    dir.write("plot.csv", &stage("write", io::plot_csv(&series, cfg.experiment.plot_samples.unwrap(), &dir.hash))?)
}

fn variant_matches(label: &str, r: &AccuracyRecord) -> bool {
    match r.params.get("h_degree") {
        Some(&h) => {
            let want = if h == 1.0 { "h=x1".to_string() } else { format!("h=x1^{h}") };
            label == want
        }
        None => true,
    }
}
