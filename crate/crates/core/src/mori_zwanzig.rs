//! Mori–Zwanzig decomposition of linear coefficient dynamics `ċ = A c`.
//!
//! Splitting the basis into observed `O` and unobserved `U` indices gives the
//! exact generalized Langevin equation
//!
//! ```text
//! d/dt c_O(t) = M c_O(t) − ∫₀ᵗ K_mem(t − s) c_O(s) ds + f(t)
//! M        = A_OO
//! K_mem(s) = −A_OU e^{s A_UU} A_UO
//! f(t)     = A_OU e^{t A_UU} c_U(0)
//! ```
//!
//! `f` vanishes when the unobserved coefficients start at zero, which is the
//! case for one-hot initial data on observed monomials.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{expm, GeneratorMatrix};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct MzSplit<T> {
    pub observed: Vec<usize>,
    pub unobserved: Vec<usize>,
    pub l_oo: DMatrix<T>,
    pub l_ou: DMatrix<T>,
    pub l_uo: DMatrix<T>,
    pub l_uu: DMatrix<T>,
    /// Dual-basis normalization of the unobserved elements, when the split
    /// came from a monomial dictionary.
    pub z_unobserved: Option<Vec<T>>,
}

fn submatrix<T: Real>(a: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Splits a square matrix into observed/unobserved blocks. Indices are
/// sorted so blocks follow the basis order.
pub fn split_matrix<T: Real>(a: &DMatrix<T>, observed: &[usize]) -> Result<MzSplit<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
            context: "generator must be square",
        });
    }
    let n = a.nrows();
    if observed.is_empty() {
        return Err(Error::InvalidArgument("observed set must be non-empty".into()));
    }
    let mut obs = observed.to_vec();
    obs.sort_unstable();
    if let Some(&bad) = obs.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, size: n });
    }
    if let Some(w) = obs.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateIndex(w[0]));
    }
    if obs.len() == n {
        return Err(Error::InvalidArgument(
            "observed set must be a strict subset (unobserved complement is empty)".into(),
        ));
    }
    let unobs: Vec<usize> = (0..n).filter(|i| obs.binary_search(i).is_err()).collect();
    Ok(MzSplit {
        l_oo: submatrix(a, &obs, &obs),
        l_ou: submatrix(a, &obs, &unobs),
        l_uo: submatrix(a, &unobs, &obs),
        l_uu: submatrix(a, &unobs, &unobs),
        observed: obs,
        unobserved: unobs,
        z_unobserved: None,
    })
}

pub fn split_generator<T: Real>(gen: &GeneratorMatrix<T>, observed: &[usize]) -> Result<MzSplit<T>> {
    let mut split = split_matrix(&gen.a, observed)?;
    let z = gen.dict.dual_normalization::<T>().z_diag;
    split.z_unobserved = Some(split.unobserved.iter().map(|&i| z[i]).collect());
    Ok(split)
}

impl<T: Real> MzSplit<T> {
    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn n_unobserved(&self) -> usize {
        self.unobserved.len()
    }

    /// Markov transition matrix `M = A_OO`.
    pub fn markov_matrix(&self) -> &DMatrix<T> {
        &self.l_oo
    }

    /// Rescales unobserved coordinates `c_U → Z c_U`. The observed dynamics
    /// are unchanged by any such diagonal change of basis.
    pub fn rescale_unobserved(&self, factors: &[T]) -> Result<MzSplit<T>> {
        if factors.len() != self.n_unobserved() {
            return Err(Error::DimensionMismatch {
                expected: self.n_unobserved(),
                found: factors.len(),
                context: "unobserved scale factors",
            });
        }
        if factors.iter().any(|&z| z == T::zero() || !z.is_finite()) {
            return Err(Error::InvalidArgument("scale factors must be finite and non-zero".into()));
        }
        let mut out = self.clone();
        for (u, &z) in factors.iter().enumerate() {
            out.l_ou.column_mut(u).unscale_mut(z);
            out.l_uo.row_mut(u).scale_mut(z);
        }
        for i in 0..factors.len() {
            for j in 0..factors.len() {
                out.l_uu[(i, j)] = self.l_uu[(i, j)] * factors[i] / factors[j];
            }
        }
        out.z_unobserved = None;
        Ok(out)
    }

    /// Applies the stored dual-basis normalization via [`Self::rescale_unobserved`].
    pub fn with_dual_normalization(&self) -> Result<MzSplit<T>> {
        let z = self
            .z_unobserved
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("split carries no dual normalization".into()))?;
        self.rescale_unobserved(z)
    }
}

/// `K_mem(s) = −A_OU e^{s A_UU} A_UO`.
pub fn memory_kernel<T: Real>(split: &MzSplit<T>, s: T) -> Result<DMatrix<T>> {
    if !(s >= T::zero()) {
        return Err(Error::InvalidArgument(format!("memory kernel lag must be non-negative, got {s}")));
    }
    let e = expm(&(&split.l_uu * s))?;
    Ok(-(&split.l_ou * e * &split.l_uo))
}

/// `f(t) = A_OU e^{t A_UU} c_U(0)`.
pub fn noise_term<T: Real>(split: &MzSplit<T>, c_u0: &DVector<T>, t: T) -> Result<DVector<T>> {
    if c_u0.len() != split.n_unobserved() {
        return Err(Error::DimensionMismatch {
            expected: split.n_unobserved(),
            found: c_u0.len(),
            context: "unobserved initial coefficients",
        });
    }
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let e = expm(&(&split.l_uu * t))?;
    Ok(&split.l_ou * (e * c_u0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GleOptions {
    /// Abort once `‖c_O‖` exceeds this multiple of its initial scale.
    pub growth_bound: f64,
}

impl Default for GleOptions {
    fn default() -> Self {
        GleOptions { growth_bound: 1e6 }
    }
}

/// Time series of the observed coefficients and the three right-hand-side
/// contributions at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GleSolution<T> {
    pub times: Vec<T>,
    pub c_o: Vec<DVector<T>>,
    pub markov: Vec<DVector<T>>,
    pub memory: Vec<DVector<T>>,
    pub noise: Vec<DVector<T>>,
}

impl<T: Real> GleSolution<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &DVector<T> {
        self.c_o.last().expect("solution has at least the initial point")
    }

    /// Right-hand side `markov + memory + noise` at grid point `n`.
    pub fn derivative(&self, n: usize) -> DVector<T> {
        &self.markov[n] + &self.memory[n] + &self.noise[n]
    }
}

/// Integrates the generalized Langevin equation with Heun's method and a
/// trapezoidal convolution over the stored history.
pub fn integrate_gle<T: Real>(
    split: &MzSplit<T>,
    c_o0: &DVector<T>,
    c_u0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<GleSolution<T>> {
    integrate_gle_with(split, c_o0, c_u0, t_end, dt, &GleOptions::default())
}

pub fn integrate_gle_with<T: Real>(
    split: &MzSplit<T>,
    c_o0: &DVector<T>,
    c_u0: &DVector<T>,
    t_end: T,
    dt: T,
    opts: &GleOptions,
) -> Result<GleSolution<T>> {
    let no = split.n_observed();
    if c_o0.len() != no {
        return Err(Error::DimensionMismatch {
            expected: no,
            found: c_o0.len(),
            context: "observed initial coefficients",
        });
    }
    if c_u0.len() != split.n_unobserved() {
        return Err(Error::DimensionMismatch {
            expected: split.n_unobserved(),
            found: c_u0.len(),
            context: "unobserved initial coefficients",
        });
    }
    if !(dt > T::zero()) || !(t_end > T::zero()) {
        return Err(Error::InvalidArgument("t_end and dt must be positive".into()));
    }
    let ratio = (t_end / dt).as_f64();
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide t_end = {t_end}")));
    }
    let steps = steps as usize;

    // e^{k·dt·A_UU} for every lag, independently
    let exps = (0..=steps)
        .into_par_iter()
        .map(|k| expm(&(&split.l_uu * (dt * T::from_count(k)))))
        .collect::<Result<Vec<_>>>()?;
    let kernels: Vec<DMatrix<T>> = exps.iter().map(|e| -(&split.l_ou * e * &split.l_uo)).collect();
    let noise: Vec<DVector<T>> = exps.iter().map(|e| &split.l_ou * (e * c_u0)).collect();
    drop(exps);

    let half = T::lit(0.5);
    // dt·Σ_j w_j K(t_n − t_j) c_j with trapezoid weights
    let convolution = |hist: &[DVector<T>], n: usize| -> DVector<T> {
        let mut acc = DVector::zeros(no);
        if n == 0 {
            return acc;
        }
        for (j, c) in hist.iter().enumerate().take(n + 1) {
            let w = if j == 0 || j == n { half } else { T::one() };
            acc += &kernels[n - j] * c * w;
        }
        acc * dt
    };

    let scale = {
        let s = c_o0.norm().max(c_u0.norm());
        if s > T::zero() { s } else { T::one() }
    };
    let bound = T::lit(opts.growth_bound) * scale;

    let mut times = Vec::with_capacity(steps + 1);
    let mut c_o = Vec::with_capacity(steps + 1);
    let mut markov = Vec::with_capacity(steps + 1);
    let mut memory = Vec::with_capacity(steps + 1);
    c_o.push(c_o0.clone());
    times.push(T::zero());
    markov.push(&split.l_oo * c_o0);
    memory.push(DVector::zeros(no));

    for n in 0..steps {
        let f_n = &markov[n] + &memory[n] + &noise[n];
        let predictor = &c_o[n] + &f_n * dt;
        c_o.push(predictor);
        let conv_pred = convolution(&c_o, n + 1);
        let f_pred = &split.l_oo * &c_o[n + 1] - conv_pred + &noise[n + 1];
        let corrected = &c_o[n] + (f_n + f_pred) * (dt * half);
        c_o[n + 1] = corrected;

        let norm = c_o[n + 1].norm();
        if !norm.is_finite() || norm > bound {
            return Err(Error::Unstable {
                time: (dt * T::from_count(n + 1)).as_f64(),
                growth: (norm / scale).as_f64(),
            });
        }
        markov.push(&split.l_oo * &c_o[n + 1]);
        memory.push(-convolution(&c_o, n + 1));
        times.push(dt * T::from_count(n + 1));
    }

    Ok(GleSolution {
        times,
        c_o,
        markov,
        memory,
        noise,
    })
}

/// Places observed and unobserved parts back into one full-length vector.
pub fn assemble<T: Real>(split: &MzSplit<T>, c_o: &DVector<T>, c_u: &DVector<T>) -> DVector<T> {
    let mut v = DVector::zeros(split.n_observed() + split.n_unobserved());
    for (k, &i) in split.observed.iter().enumerate() {
        v[i] = c_o[k];
    }
    for (k, &i) in split.unobserved.iter().enumerate() {
        v[i] = c_u[k];
    }
    v
}
