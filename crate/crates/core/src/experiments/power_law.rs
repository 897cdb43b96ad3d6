//! Fit of `f(σ) = α₂ σ^α₁ + α₃` by damped Gauss–Newton in linear space.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const REL_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub residual_rms: f64,
    pub n_points: usize,
    /// False for the degenerate constant-error branch (`α₂ = 0`).
    pub alpha1_identifiable: bool,
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn eval(&self, sigma: f64) -> f64 {
        model(&[self.alpha1, self.alpha2, self.alpha3], sigma)
    }

    /// `n` points of the fitted curve, log-spaced over `[lo, hi]`.
    pub fn curve(&self, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        if n < 2 || !(lo > 0.0) || !(hi > lo) {
            return vec![(lo, self.eval(lo))];
        }
        let (a, b) = (lo.ln(), hi.ln());
        (0..n)
            .map(|k| {
                let s = (a + (b - a) * k as f64 / (n - 1) as f64).exp();
                (s, self.eval(s))
            })
            .collect()
    }
}

fn model(p: &[f64; 3], s: f64) -> f64 {
    p[1] * s.powf(p[0]) + p[2]
}

fn sse(p: &[f64; 3], data: &[(f64, f64)]) -> f64 {
    data.iter().map(|&(s, e)| (e - model(p, s)).powi(2)).sum()
}

/// Least-squares fit over `(σ, error)` samples. Needs at least four
/// distinct positive σ values and positive errors.
pub fn fit_power_law(data: &[(f64, f64)]) -> Result<PowerLawFit> {
    if data.iter().any(|&(s, e)| !s.is_finite() || !e.is_finite()) {
        return Err(Error::NonFinite("power-law data"));
    }
    if let Some(&(s, e)) = data.iter().find(|&&(s, e)| !(s > 0.0) || !(e > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "power-law fit needs positive sigma and error, got ({s}, {e})"
        )));
    }
    let mut sigmas: Vec<f64> = data.iter().map(|d| d.0).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    if sigmas.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 4 distinct sigma values, got {}",
            sigmas.len()
        )));
    }
    let n = data.len();
    let mean = data.iter().map(|d| d.1).sum::<f64>() / n as f64;
    if data.iter().all(|d| d.1 == data[0].1) {
        return Ok(PowerLawFit {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: mean,
            residual_rms: 0.0,
            n_points: n,
            alpha1_identifiable: false,
            iterations: 0,
        });
    }

    let mut p = initial_guess(data);
    let mut cost = sse(&p, data);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let step = match gauss_newton_step(&p, data) {
            Some(d) => d,
            None => break,
        };
        let scale = p.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let step_size = step.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = [p[0] + lambda * step[0], p[1] + lambda * step[1], p[2] + lambda * step[2]];
            let c = sse(&trial, data);
            if c.is_finite() && c <= cost {
                accepted = Some((trial, c));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, c)) => {
                let change = lambda * step_size / scale;
                p = trial;
                cost = c;
                if change < REL_TOL {
                    converged = true;
                    break;
                }
            }
            None => {
                // no descent along the Gauss–Newton direction: stationary to
                // working precision
                converged = true;
                break;
            }
        }
    }
    let residual_rms = (cost / n as f64).sqrt();
    if !converged {
        return Err(Error::FitNotConverged {
            iterations,
            alpha1: p[0],
            alpha2: p[1],
            alpha3: p[2],
        });
    }
    Ok(PowerLawFit {
        alpha1: p[0],
        alpha2: p[1],
        alpha3: p[2],
        residual_rms,
        n_points: n,
        alpha1_identifiable: p[1] != 0.0,
        iterations,
    })
}

/// `α₃₀ = 0.9·min(err)`, then `(α₁₀, ln α₂₀)` from a straight-line fit of
/// `ln(err − α₃₀)` against `ln σ`.
fn initial_guess(data: &[(f64, f64)]) -> [f64; 3] {
    let min_err = data.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let a3 = 0.9 * min_err;
    let pts: Vec<(f64, f64)> = data.iter().map(|&(s, e)| (s.ln(), (e - a3).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a1 = sxy / sxx;
    let a2 = (my - a1 * mx).exp();
    [a1, a2, a3]
}

fn gauss_newton_step(p: &[f64; 3], data: &[(f64, f64)]) -> Option<[f64; 3]> {
    let mut jtj = Matrix3::<f64>::zeros();
    let mut jtr = Vector3::<f64>::zeros();
    for &(s, e) in data {
        let pw = s.powf(p[0]);
        let j = Vector3::new(p[1] * pw * s.ln(), pw, 1.0);
        let r = e - model(p, s);
        jtj += j * j.transpose();
        jtr += j * r;
    }
    let step = jtj.svd(true, true).solve(&jtr, 1e-14 * jtj.norm()).ok()?;
    step.iter().all(|v| v.is_finite()).then(|| [step[0], step[1], step[2]])
}
