use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::edmd::KoopmanMatrix;
use crate::error::{Error, Result};
use crate::polynomial::MultiIndex;
use crate::scalar::Real;
use crate::systems::SdeSystem;

use super::rk4::rk4_flow;

/// Deterministic check of a reference matrix: one-step coordinate
/// predictions at uniform random points against the RK4 flow over `dt_obs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub n_points: usize,
    pub rk4_dt: f64,
    /// Mean absolute error per state coordinate.
    pub mae: Vec<f64>,
    pub max_abs: Vec<f64>,
}

impl ValidationReport {
    pub fn worst_mae(&self) -> f64 {
        self.mae.iter().copied().fold(0.0, f64::max)
    }
}

/// Draws `n_points` states uniformly from `init_box` and compares
/// `K ψ(x)` restricted to the linear monomials with `rk4_flow(x)`.
pub fn validate_reference<T: Real>(
    system: &SdeSystem<T>,
    reference: &KoopmanMatrix<T>,
    init_box: &[(T, T)],
    n_points: usize,
    rk4_dt: T,
    seed: u64,
) -> Result<ValidationReport> {
    let d = system.dim();
    if init_box.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: init_box.len(),
            context: "validation box",
        });
    }
    if n_points == 0 {
        return Err(Error::InvalidArgument("validation needs at least one point".into()));
    }
    let ratio = (reference.dt_obs / rk4_dt).as_f64();
    let steps = ratio.round();
    if !(rk4_dt > T::zero()) || steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps {
        return Err(Error::InvalidArgument("RK4 step must divide dt_obs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = DMatrix::from_fn(n_points, d, |_, j| {
        let (lo, hi) = init_box[j];
        lo + (hi - lo) * T::lit(rng.random::<f64>())
    });
    let targets: Vec<MultiIndex> = (0..d).map(|j| MultiIndex::unit(d, j)).collect();
    let pred = reference.predict_one_step(&pts, &targets)?;
    let truth = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let x: Vec<T> = pts.row(i).iter().copied().collect();
            rk4_flow(system, &x, rk4_dt, steps as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mae = vec![0.0; d];
    let mut max_abs = vec![0.0f64; d];
    for (i, y) in truth.iter().enumerate() {
        for j in 0..d {
            let e = (pred[(i, j)] - y[j]).abs().as_f64();
            mae[j] += e;
            max_abs[j] = max_abs[j].max(e);
        }
    }
    for m in &mut mae {
        *m /= n_points as f64;
    }
    Ok(ValidationReport {
        n_points,
        rk4_dt: rk4_dt.as_f64(),
        mae,
        max_abs,
    })
}
