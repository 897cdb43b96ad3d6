//! Accuracy experiments under partial observation and the power-law fits
//! of error against noise amplitude.

mod power_law;
mod table;
mod trial;

pub use power_law::{fit_power_law, PowerLawFit};
pub use table::{
    fit_rows, run_exponent_table, ExponentRow, ExponentTable, TableConfig, TableKind, LORENZ_SIGMA_GRID, VDP_SIGMA_GRID,
};
pub use trial::{
    model_predictions, reference_truth, run_degree_comparison, run_dictionary_degree_sweep, run_grid,
    run_partial_observation_trial, run_sigma_sweep, AccuracyRecord, DegreePair, DictSpec, ReferenceMethodChoice,
    Statistic, SystemKind, TrialConfig, TrialContext, TrialData, TEST_STREAM_OFFSET,
};

use crate::simulate::SimConfig;

/// Optional replacements for simulation protocol fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOverrides {
    pub dt: Option<f64>,
    pub dt_obs: Option<f64>,
    pub relax_steps_obs: Option<usize>,
    pub points_per_traj: Option<usize>,
    pub n_traj: Option<usize>,
}

impl SimOverrides {
    pub fn apply(&self, sim: &mut SimConfig<f64>) {
        if let Some(v) = self.dt {
            sim.dt = v;
        }
        if let Some(v) = self.dt_obs {
            sim.dt_obs = v;
        }
        if let Some(v) = self.relax_steps_obs {
            sim.relax_steps_obs = v;
        }
        if let Some(v) = self.points_per_traj {
            sim.points_per_traj = v;
        }
        if let Some(v) = self.n_traj {
            sim.n_traj = v;
        }
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Mean error per distinct σ, in ascending σ order.
pub fn mean_error_by_sigma(records: &[&AccuracyRecord]) -> Vec<(f64, f64)> {
    let mut sigmas: Vec<f64> = records.iter().map(|r| r.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    sigmas
        .into_iter()
        .map(|s| {
            let e: Vec<f64> = records.iter().filter(|r| r.sigma == s).map(|r| r.error).collect();
            (s, mean_std(&e).0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summary_statistics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman(&[1.0, 2.0], &[1.0, 1.0]).is_nan());
    }

    #[test]
    fn overrides_touch_only_given_fields() {
        let mut sim = SimConfig::<f64>::lorenz_defaults(8, 0);
        let before = sim.clone();
        SimOverrides::default().apply(&mut sim);
        assert_eq!(sim, before);
        SimOverrides { n_traj: Some(3), ..Default::default() }.apply(&mut sim);
        assert_eq!(sim.n_traj, 3);
        assert_eq!(sim.dt, before.dt);
    }

    proptest! {
        #[test]
        fn spearman_is_one_for_increasing_maps(xs in prop::collection::vec(-1e3f64..1e3, 3..20)) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            prop_assume!(xs.len() >= 3);
            let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            prop_assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        }
    }
}
