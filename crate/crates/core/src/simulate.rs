//! Euler–Maruyama Monte Carlo simulation and snapshot-pair construction.
//!
//! Each trajectory draws from its own ChaCha stream (`stream = trajectory
//! index + offset`) of a generator keyed by the run seed, so results do not
//! depend on how trajectories are scheduled across threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::systems::SdeSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig<T> {
    /// Integrator step.
    pub dt: T,
    /// Observation interval; an integer multiple of `dt`.
    pub dt_obs: T,
    /// Observation intervals discarded as burn-in.
    pub relax_steps_obs: usize,
    pub points_per_traj: usize,
    pub n_traj: usize,
    /// Largest delay depth the data must support.
    pub m_max: usize,
    pub seed: u64,
    /// Per-dimension interval for the uniform initial draw.
    pub init_box: Vec<(T, T)>,
}

impl<T: Real> SimConfig<T> {
    /// Van der Pol protocol: `dt = 1e-3`, `dt_obs = 0.1`, box `[-1, 1]²`.
    pub fn van_der_pol_defaults(m_max: usize, seed: u64) -> Self {
        SimConfig {
            dt: T::lit(1e-3),
            dt_obs: T::lit(0.1),
            relax_steps_obs: 100,
            points_per_traj: 101 + m_max,
            n_traj: 100,
            m_max,
            seed,
            init_box: vec![(T::lit(-1.0), T::lit(1.0)); 2],
        }
    }

    /// Lorenz protocol: `dt = 1e-4`, `dt_obs = 0.01`, box `[-10, 10]³`.
    pub fn lorenz_defaults(m_max: usize, seed: u64) -> Self {
        SimConfig {
            dt: T::lit(1e-4),
            dt_obs: T::lit(0.01),
            relax_steps_obs: 100,
            points_per_traj: 101 + m_max,
            n_traj: 100,
            m_max,
            seed,
            init_box: vec![(T::lit(-10.0), T::lit(10.0)); 3],
        }
    }

    /// Number of integrator steps per observation interval.
    pub fn steps_per_obs(&self) -> Result<usize> {
        if !(self.dt > T::zero()) || !(self.dt_obs > T::zero()) {
            return Err(Error::InvalidArgument("dt and dt_obs must be positive".into()));
        }
        let ratio = (self.dt_obs / self.dt).as_f64();
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * k {
            return Err(Error::InvalidArgument(format!(
                "dt_obs = {} is not an integer multiple of dt = {}",
                self.dt_obs, self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_obs()?;
        if self.n_traj == 0 || self.points_per_traj == 0 {
            return Err(Error::InvalidArgument("n_traj and points_per_traj must be positive".into()));
        }
        if self.points_per_traj < self.m_max + 2 {
            return Err(Error::InvalidArgument(format!(
                "points_per_traj = {} must be at least m_max + 2 = {}",
                self.points_per_traj,
                self.m_max + 2
            )));
        }
        if let Some((lo, hi)) = self.init_box.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidArgument(format!("empty initial interval [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Post-relaxation trajectories sampled every `dt_obs`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset<T> {
    pub system_name: String,
    pub sigma: T,
    pub dt_obs: T,
    /// Simulated time of the first retained row.
    pub t_start: T,
    /// One `points_per_traj × D` matrix per trajectory.
    pub trajectories: Vec<DMatrix<T>>,
}

impl<T: Real> TrajectoryDataset<T> {
    pub fn dim(&self) -> usize {
        self.trajectories.first().map_or(0, DMatrix::ncols)
    }

    pub fn rows_per_traj(&self) -> usize {
        self.trajectories.first().map_or(0, DMatrix::nrows)
    }

    pub fn time_of_row(&self, row: usize) -> T {
        self.t_start + self.dt_obs * T::from_count(row)
    }
}

/// Paired observations `(x_n, y_n)` one observation interval apart.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotPairs<T> {
    pub x: DMatrix<T>,
    pub y: DMatrix<T>,
    pub dt_obs: T,
}

impl<T: Real> SnapshotPairs<T> {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// SHA-256 over the little-endian `f64` images of `X` then `Y`, row-major.
    pub fn data_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in [&self.x, &self.y] {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    h.update(m[(r, c)].as_f64().to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One Euler–Maruyama step `x + a(x)dt + σ√dt·ξ` for standard normals `ξ`.
pub fn euler_maruyama_step<T: Real>(system: &SdeSystem<T>, x: &[T], dt: T, noise: &[T]) -> Result<Vec<T>> {
    let d = system.dim();
    if noise.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: noise.len(),
            context: "noise vector",
        });
    }
    let drift = system.eval_drift(x)?;
    let amp = system.sigma() * dt.sqrt();
    Ok(x.iter()
        .zip(&drift)
        .zip(noise)
        .map(|((&xi, &ai), &ni)| xi + ai * dt + amp * ni)
        .collect())
}

/// Drift flattened to `(coefficient, [(variable, power)])` for the inner loop.
struct CompiledDrift<T> {
    components: Vec<Vec<(T, Vec<(usize, i32)>)>>,
}

impl<T: Real> CompiledDrift<T> {
    fn new(system: &SdeSystem<T>) -> Self {
        let components = system
            .drift()
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(k, c)| {
                        let factors = k
                            .exponents()
                            .iter()
                            .enumerate()
                            .filter(|(_, &n)| n > 0)
                            .map(|(v, &n)| (v, n as i32))
                            .collect();
                        (c, factors)
                    })
                    .collect()
            })
            .collect();
        CompiledDrift { components }
    }

    #[inline]
    fn eval(&self, x: &[T], out: &mut [T]) {
        for (o, terms) in out.iter_mut().zip(&self.components) {
            let mut s = T::zero();
            for (c, factors) in terms {
                let mut m = *c;
                for &(v, n) in factors {
                    m *= if n == 1 { x[v] } else { x[v].powi(n) };
                }
                s += m;
            }
            *o = s;
        }
    }
}

fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn standard_normal<T: Real>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Simulates `cfg.n_traj` independent trajectories.
pub fn simulate_dataset<T: Real>(system: &SdeSystem<T>, cfg: &SimConfig<T>) -> Result<TrajectoryDataset<T>> {
    simulate_dataset_with_offset(system, cfg, 0)
}

/// As [`simulate_dataset`], drawing trajectory `i` from stream `offset + i`.
/// Disjoint offsets give statistically independent datasets under one seed.
pub fn simulate_dataset_with_offset<T: Real>(
    system: &SdeSystem<T>,
    cfg: &SimConfig<T>,
    stream_offset: u64,
) -> Result<TrajectoryDataset<T>> {
    cfg.validate()?;
    let dim = system.dim();
    if cfg.init_box.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: cfg.init_box.len(),
            context: "initial box dimensions",
        });
    }
    let steps = cfg.steps_per_obs()?;
    let drift = CompiledDrift::new(system);
    let amp = system.sigma() * cfg.dt.sqrt();
    let noisy = system.sigma() != T::zero();

    let trajectories = (0..cfg.n_traj)
        .into_par_iter()
        .map(|traj| {
            let mut rng = trajectory_rng(cfg.seed, stream_offset + traj as u64);
            let mut x: Vec<T> = cfg
                .init_box
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * T::lit(rng.random::<f64>()))
                .collect();
            let mut a = vec![T::zero(); dim];
            let mut out = DMatrix::zeros(cfg.points_per_traj, dim);
            let total_obs = cfg.relax_steps_obs + cfg.points_per_traj - 1;
            for obs in 0..=total_obs {
                if obs >= cfg.relax_steps_obs {
                    let row = obs - cfg.relax_steps_obs;
                    for d in 0..dim {
                        out[(row, d)] = x[d];
                    }
                }
                if obs == total_obs {
                    break;
                }
                for _ in 0..steps {
                    drift.eval(&x, &mut a);
                    for d in 0..dim {
                        x[d] += a[d] * cfg.dt;
                        if noisy {
                            x[d] += amp * standard_normal::<T>(&mut rng);
                        }
                    }
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged {
                        trajectory: traj,
                        time: (cfg.dt_obs * T::from_count(obs + 1)).as_f64(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TrajectoryDataset {
        system_name: system.name().to_string(),
        sigma: system.sigma(),
        dt_obs: cfg.dt_obs,
        t_start: cfg.dt_obs * T::from_count(cfg.relax_steps_obs),
        trajectories,
    })
}

/// All adjacent-row pairs of every trajectory.
pub fn make_fullstate_pairs<T: Real>(ds: &TrajectoryDataset<T>) -> Result<SnapshotPairs<T>> {
    let rows = ds.rows_per_traj();
    if ds.trajectories.is_empty() || rows < 2 {
        return Err(Error::EmptyDataset);
    }
    let dim = ds.dim();
    let per = rows - 1;
    let n = per * ds.trajectories.len();
    let mut x = DMatrix::zeros(n, dim);
    let mut y = DMatrix::zeros(n, dim);
    for (t, traj) in ds.trajectories.iter().enumerate() {
        for k in 0..per {
            x.row_mut(t * per + k).copy_from(&traj.row(k));
            y.row_mut(t * per + k).copy_from(&traj.row(k + 1));
        }
    }
    Ok(SnapshotPairs { x, y, dt_obs: ds.dt_obs })
}

/// Delay window ending at row `k`: `(x_d[k], x_d[k-1], ..., x_d[k-m])`.
pub fn delay_window<T: Real>(traj: &DMatrix<T>, observed_dim: usize, m: usize, k: usize) -> Vec<T> {
    (0..=m).map(|j| traj[(k - j, observed_dim)]).collect()
}

/// Delay-history pairs of coordinate `observed_dim` with depth `m`, newest
/// value first. Windows never cross trajectory boundaries.
pub fn make_delay_pairs<T: Real>(ds: &TrajectoryDataset<T>, observed_dim: usize, m: usize) -> Result<SnapshotPairs<T>> {
    if ds.trajectories.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if observed_dim >= ds.dim() {
        return Err(Error::IndexOutOfRange {
            index: observed_dim,
            size: ds.dim(),
        });
    }
    let rows = ds.rows_per_traj();
    if rows < m + 2 {
        return Err(Error::DelayTooLarge {
            m,
            needed: m + 2,
            rows,
        });
    }
    let per = rows - m - 1;
    let n = per * ds.trajectories.len();
    let mut x = DMatrix::zeros(n, m + 1);
    let mut y = DMatrix::zeros(n, m + 1);
    for (t, traj) in ds.trajectories.iter().enumerate() {
        for w in 0..per {
            let k = m + w;
            let r = t * per + w;
            for j in 0..=m {
                x[(r, j)] = traj[(k - j, observed_dim)];
                y[(r, j)] = traj[(k + 1 - j, observed_dim)];
            }
        }
    }
    Ok(SnapshotPairs { x, y, dt_obs: ds.dt_obs })
}
