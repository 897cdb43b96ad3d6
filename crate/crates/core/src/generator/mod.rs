//! Backward-Kolmogorov generator on a monomial dictionary and the
//! reference Koopman matrix obtained by propagating its coefficient dynamics.
//!
//! For `dX = a(X) dt + σ dW` the generator is
//! `L = Σ_d a_d ∂_d + ½σ² Σ_d ∂²_d`. Acting on a monomial it yields a
//! polynomial, which is expanded back onto the dictionary; terms above the
//! dictionary degree are dropped. Column `j` of the matrix `A` holds the
//! expansion of `L ψ_j`, so coefficient vectors evolve as `ċ = A c`.

mod expm;
mod rk4;
mod validation;

pub use expm::{expm, expm_times_vector};
pub use rk4::rk4_flow;
pub use validation::{validate_reference, ValidationReport};

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::dictionary::{Dictionary, DictionaryKind};
use crate::edmd::{KoopmanMatrix, Provenance, ReferenceMethod};
use crate::error::{Error, Result};
use crate::polynomial::MultiIndexPolynomial;
use crate::scalar::Real;
use crate::systems::SdeSystem;

/// Koopman matrix produced from the generator rather than from data.
pub type ReferenceKoopman<T> = KoopmanMatrix<T>;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix<T> {
    pub dict: Dictionary,
    /// `L ψ_j = Σ_i a[(i, j)] ψ_i` after truncation.
    pub a: DMatrix<T>,
    pub system: String,
    pub sigma: T,
}

/// Expands `L ψ_j` for every dictionary element.
pub fn build_generator<T: Real>(system: &SdeSystem<T>, dict: &Dictionary) -> Result<GeneratorMatrix<T>> {
    let max_degree = match dict.kind() {
        DictionaryKind::FullState { max_degree } => max_degree,
        DictionaryKind::Delay { .. } => {
            return Err(Error::InvalidArgument(
                "the generator is defined on full-state dictionaries only".into(),
            ))
        }
    };
    let dim = system.dim();
    if dict.variable_count() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: dict.variable_count(),
            context: "dictionary variables vs system dimension",
        });
    }
    let half_var = T::lit(0.5) * system.sigma() * system.sigma();
    let n = dict.len();
    let mut a = DMatrix::zeros(n, n);
    for (j, index) in dict.basis().iter().enumerate() {
        let psi = MultiIndexPolynomial::monomial(index.clone(), T::one());
        let mut image = MultiIndexPolynomial::zero(dim);
        for d in 0..dim {
            let dpsi = psi.derivative(d);
            if dpsi.is_zero() {
                continue;
            }
            image = &image + &(&system.drift()[d] * &dpsi);
            if half_var != T::zero() {
                image = &image + &dpsi.derivative(d).scale(half_var);
            }
        }
        for (k, c) in image.truncated(max_degree).terms() {
            if let Some(i) = dict.index_of(k) {
                a[(i, j)] = c;
            }
        }
    }
    Ok(GeneratorMatrix {
        dict: dict.clone(),
        a,
        system: system.name().to_string(),
        sigma: system.sigma(),
    })
}

/// Crank–Nicolson stepper for `ċ = A c` with a factorization of
/// `(I − dt/2·A)` computed once.
pub struct CrankNicolson<T: Real> {
    lu: LU<T, Dyn, Dyn>,
    explicit: DMatrix<T>,
    dt: T,
}

impl<T: Real> CrankNicolson<T> {
    pub fn new(a: &DMatrix<T>, dt: T) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
                context: "Crank-Nicolson operator must be square",
            });
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let n = a.nrows();
        let h = dt * T::lit(0.5);
        let id = DMatrix::<T>::identity(n, n);
        let implicit = &id - a * h;
        let explicit = &id + a * h;
        let lu = implicit.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularPropagator { dt: dt.as_f64() });
        }
        Ok(CrankNicolson { lu, explicit, dt })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Advances every column of `c` by `steps` steps.
    pub fn propagate_columns(&self, c: &DMatrix<T>, steps: usize) -> Result<DMatrix<T>> {
        let mut cur = c.clone();
        for _ in 0..steps {
            let rhs = &self.explicit * &cur;
            cur = self
                .lu
                .solve(&rhs)
                .ok_or(Error::SingularPropagator { dt: self.dt.as_f64() })?;
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("propagated coefficients"));
        }
        Ok(cur)
    }

    pub fn propagate(&self, c0: &DVector<T>, steps: usize) -> Result<DVector<T>> {
        if c0.len() != self.explicit.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.explicit.nrows(),
                found: c0.len(),
                context: "coefficient vector",
            });
        }
        let m = DMatrix::from_column_slice(c0.len(), 1, c0.as_slice());
        Ok(self.propagate_columns(&m, steps)?.column(0).into_owned())
    }
}

/// Solves `(I − dt/2·A) c_{k+1} = (I + dt/2·A) c_k` for `steps` steps.
pub fn propagate_coefficients_cn<T: Real>(a: &DMatrix<T>, c0: &DVector<T>, dt: T, steps: usize) -> Result<DVector<T>> {
    CrankNicolson::new(a, dt)?.propagate(c0, steps)
}

fn integer_ratio<T: Real>(dt: T, dt_obs: T) -> Result<usize> {
    if !(dt > T::zero()) || !(dt_obs > T::zero()) {
        return Err(Error::InvalidArgument("dt and dt_obs must be positive".into()));
    }
    let r = (dt_obs / dt).as_f64();
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-9 * k {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide dt_obs = {dt_obs}")));
    }
    Ok(k as usize)
}

fn reference_from_propagated<T: Real>(
    gen: &GeneratorMatrix<T>,
    propagated: DMatrix<T>,
    dt_obs: T,
    method: ReferenceMethod,
) -> Result<ReferenceKoopman<T>> {
    if propagated.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reference Koopman matrix"));
    }
    Ok(KoopmanMatrix {
        dict: gen.dict.clone(),
        dt_obs,
        // column i of the propagated identity is the evolved ψ_i → row i of K
        k: propagated.transpose(),
        provenance: Provenance::Reference {
            method,
            system: gen.system.clone(),
            sigma: gen.sigma.as_f64(),
        },
    })
}

/// Reference Koopman matrix over `dt_obs` by Crank–Nicolson with step `dt`.
pub fn reference_koopman<T: Real>(system: &SdeSystem<T>, dict: &Dictionary, dt: T, dt_obs: T) -> Result<ReferenceKoopman<T>> {
    let gen = build_generator(system, dict)?;
    reference_koopman_from_generator(&gen, dt, dt_obs)
}

pub fn reference_koopman_from_generator<T: Real>(gen: &GeneratorMatrix<T>, dt: T, dt_obs: T) -> Result<ReferenceKoopman<T>> {
    let steps = integer_ratio(dt, dt_obs)?;
    let n = gen.dict.len();
    let cn = CrankNicolson::new(&gen.a, dt)?;
    let propagated = cn.propagate_columns(&DMatrix::identity(n, n), steps)?;
    reference_from_propagated(gen, propagated, dt_obs, ReferenceMethod::CrankNicolson { dt: dt.as_f64() })
}

/// Reference Koopman matrix `exp(A·dt_obs)ᵀ` by direct exponentiation.
pub fn reference_koopman_expm<T: Real>(system: &SdeSystem<T>, dict: &Dictionary, dt_obs: T) -> Result<ReferenceKoopman<T>> {
    let gen = build_generator(system, dict)?;
    let e = expm(&(&gen.a * dt_obs))?;
    reference_from_propagated(&gen, e, dt_obs, ReferenceMethod::MatrixExponential)
}
