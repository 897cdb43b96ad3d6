//! Least-squares Koopman matrices and prediction of conditional statistics.
//!
//! Convention: row `i` of `K` holds the expansion of the time-evolved basis
//! function `ψ_i` in the dictionary, so `E[ψ(X(t+Δt)) | X(t)=x] ≈ K ψ(x)`.
//! Both the data-driven fit and the generator-based reference matrix use it.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::polynomial::MultiIndex;
use crate::scalar::Real;
use crate::simulate::SnapshotPairs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Solver {
    /// Column-pivoted QR on the stacked feature matrix.
    #[default]
    OrthogonalDecomposition,
    /// Cholesky on the feature Gram matrix.
    NormalEquations,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdmdOptions {
    /// Tikhonov strength added as `ridge·‖K‖²_F`.
    pub ridge: f64,
    pub solver: Solver,
    /// Scale each feature column by its maximum magnitude before solving.
    pub column_scaling: bool,
}

impl Default for EdmdOptions {
    fn default() -> Self {
        EdmdOptions {
            ridge: 0.0,
            solver: Solver::OrthogonalDecomposition,
            column_scaling: false,
        }
    }
}

/// How a Koopman matrix was obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Estimated {
        ridge: f64,
        solver: Solver,
        n_data: usize,
        data_hash: String,
    },
    Reference {
        method: ReferenceMethod,
        system: String,
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceMethod {
    CrankNicolson { dt: f64 },
    MatrixExponential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KoopmanMatrix<T> {
    pub dict: Dictionary,
    pub dt_obs: T,
    pub k: DMatrix<T>,
    pub provenance: Provenance,
}

impl<T: Real> KoopmanMatrix<T> {
    pub fn len(&self) -> usize {
        self.k.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.nrows() == 0
    }

    pub fn is_reference(&self) -> bool {
        matches!(self.provenance, Provenance::Reference { .. })
    }

    /// True when the fit had fewer snapshot pairs than basis functions.
    pub fn is_underdetermined(&self) -> bool {
        matches!(self.provenance, Provenance::Estimated { n_data, .. } if n_data < self.len())
    }

    fn target_position(&self, target: &MultiIndex) -> Result<usize> {
        self.dict
            .index_of(target)
            .ok_or_else(|| Error::TargetNotInDictionary(target.label("v")))
    }

    /// `K^steps ψ(x0)`.
    pub fn propagate_features(&self, x0: &[T], steps: usize) -> Result<DVector<T>> {
        let mut f = self.dict.evaluate_point(x0)?;
        for _ in 0..steps {
            f = &self.k * f;
        }
        Ok(f)
    }

    /// Estimate of `E[target(X(t + steps·Δt)) | X(t) = x0]`.
    pub fn predict_statistic(&self, target: &MultiIndex, x0: &[T], steps: usize) -> Result<T> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        let pos = self.target_position(target)?;
        Ok(self.propagate_features(x0, steps)?[pos])
    }

    /// One-step estimates of several targets at many points (rows of
    /// `points`); output is `points.nrows() × targets.len()`.
    pub fn predict_one_step(&self, points: &DMatrix<T>, targets: &[MultiIndex]) -> Result<DMatrix<T>> {
        let pos = targets
            .iter()
            .map(|t| self.target_position(t))
            .collect::<Result<Vec<_>>>()?;
        let feats = self.dict.evaluate(points)?;
        // rows of K for the targets only: out = feats · K[pos, :]ᵀ
        let rows = DMatrix::from_fn(pos.len(), self.len(), |r, c| self.k[(pos[r], c)]);
        Ok(feats * rows.transpose())
    }
}

fn has_non_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().any(|v| !v.is_finite())
}

/// Rank of an upper-triangular factor from a column-pivoted QR.
fn pivoted_rank<T: Real>(r: &DMatrix<T>, rows: usize) -> (usize, f64) {
    let n = r.ncols().min(r.nrows());
    let d: Vec<f64> = (0..n).map(|i| r[(i, i)].abs().as_f64()).collect();
    let top = d.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return (0, 0.0);
    }
    let tol = T::eps().as_f64() * rows.max(n) as f64 * top;
    let rank = d.iter().filter(|&&v| v > tol).count();
    let smallest = d.iter().copied().fold(f64::INFINITY, f64::min);
    (rank, smallest / top)
}

/// Solves `min ‖A X − B‖_F` for tall `A` by column-pivoted QR.
pub(crate) fn lstsq_qr<T: Real>(a: DMatrix<T>, b: DMatrix<T>) -> Result<DMatrix<T>> {
    let (rows, n) = a.shape();
    let qr = a.col_piv_qr();
    let r = qr.r();
    let (rank, ratio) = pivoted_rank(&r, rows);
    if rank < n {
        return Err(Error::RankDeficient {
            rank,
            columns: n,
            ratio,
        });
    }
    let mut qtb = b;
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, n).into_owned();
    let r_sq = r.columns(0, n).into_owned();
    let mut z = r_sq
        .solve_upper_triangular(&top)
        .ok_or(Error::RankDeficient { rank, columns: n, ratio })?;
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

/// Fits `K = argmin Σ_n ‖ψ(y_n) − K ψ(x_n)‖² (+ ridge·‖K‖²_F)`.
pub fn fit_koopman<T: Real>(pairs: &SnapshotPairs<T>, dict: &Dictionary, opts: &EdmdOptions) -> Result<KoopmanMatrix<T>> {
    if pairs.dim() != dict.variable_count() {
        return Err(Error::DimensionMismatch {
            expected: dict.variable_count(),
            found: pairs.dim(),
            context: "snapshot dimension vs dictionary variables",
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(opts.ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be non-negative, got {}", opts.ridge)));
    }
    let mut px = dict.evaluate(&pairs.x)?;
    let mut py = dict.evaluate(&pairs.y)?;
    if has_non_finite(&px) || has_non_finite(&py) {
        return Err(Error::NonFinite("dictionary features"));
    }
    let n = dict.len();
    let n_data = px.nrows();

    let scale: Vec<T> = if opts.column_scaling {
        (0..n)
            .map(|j| {
                let s = px.column(j).iter().fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m });
                if s > T::zero() { s } else { T::one() }
            })
            .collect()
    } else {
        vec![T::one(); n]
    };
    if opts.column_scaling {
        for j in 0..n {
            let inv = T::one() / scale[j];
            px.column_mut(j).scale_mut(inv);
            py.column_mut(j).scale_mut(inv);
        }
    }

    let ridge = T::lit(opts.ridge);
    // B solves Px·B ≈ Py in scaled coordinates; B = Kᵀ when unscaled.
    let b = match opts.solver {
        Solver::OrthogonalDecomposition => {
            if opts.ridge > 0.0 {
                let mut a = DMatrix::zeros(n_data + n, n);
                a.rows_mut(0, n_data).copy_from(&px);
                a.rows_mut(n_data, n).fill_diagonal(ridge.sqrt());
                let mut rhs = DMatrix::zeros(n_data + n, n);
                rhs.rows_mut(0, n_data).copy_from(&py);
                lstsq_qr(a, rhs)?
            } else {
                lstsq_qr(px, py)?
            }
        }
        Solver::NormalEquations => {
            let mut g = px.transpose() * &px;
            for i in 0..n {
                g[(i, i)] += ridge;
            }
            let h = px.transpose() * &py;
            let g_max = (0..n).map(|i| g[(i, i)]).fold(T::zero(), |m, v| if v > m { v } else { m });
            let floor = T::eps() * T::from_count(n) * g_max;
            match g.clone().cholesky().filter(|ch| (0..n).all(|i| ch.l_dirty()[(i, i)].powi(2) > floor)) {
                Some(ch) => ch.solve(&h),
                None => {
                    let (rank, ratio) = pivoted_rank(&px.col_piv_qr().r(), n_data);
                    return Err(Error::RankDeficient {
                        rank: rank.min(n.saturating_sub(1)),
                        columns: n,
                        ratio,
                    });
                }
            }
        }
    };

    // Kᵀ = S⁻¹ B S, where S = diag(scale).
    let kt = DMatrix::from_fn(n, n, |i, j| b[(i, j)] * scale[j] / scale[i]);
    let k = kt.transpose();
    if has_non_finite(&k) {
        return Err(Error::NonFinite("fitted Koopman matrix"));
    }
    let data_hash = pairs.data_hash();
    Ok(KoopmanMatrix {
        dict: dict.clone(),
        dt_obs: pairs.dt_obs,
        k,
        provenance: Provenance::Estimated {
            ridge: opts.ridge,
            solver: opts.solver,
            n_data,
            data_hash,
        },
    })
}
