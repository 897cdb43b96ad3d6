//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants (orders 3, 5, 7, 9, 13).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;
const MAX_SQUARINGS: i32 = 1000;

const B3: [f64; 4] = [120., 60., 12., 1.];
const B5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const B7: [f64; 8] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.];
const B9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const B13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

fn norm1<T: Real>(a: &DMatrix<T>) -> T {
    a.column_iter()
        .map(|c| c.iter().fold(T::zero(), |s, v| s + v.abs()))
        .fold(T::zero(), |m, v| if v > m { v } else { m })
}

/// Padé numerator/denominator pieces `(U, V)` for orders up to 9.
fn pade_low<T: Real>(a: &DMatrix<T>, b: &[f64]) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut odd = DMatrix::<T>::identity(n, n) * T::lit(b[1]);
    let mut even = DMatrix::<T>::identity(n, n) * T::lit(b[0]);
    let mut pow = DMatrix::<T>::identity(n, n);
    for k in 1..b.len() / 2 {
        pow = &pow * &a2;
        even += &pow * T::lit(b[2 * k]);
        odd += &pow * T::lit(b[2 * k + 1]);
    }
    (a * odd, even)
}

fn pade13<T: Real>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let b = |i: usize| T::lit(B13[i]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    (u, v)
}

/// `e^{A}` for a square matrix.
pub fn expm<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
            context: "matrix exponential of non-square matrix",
        });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let nrm = norm1(a).as_f64();

    let (u, v, squarings) = if let Some(&(m, _)) = THETA.iter().find(|(_, th)| nrm <= *th) {
        let (u, v) = match m {
            3 => pade_low(a, &B3),
            5 => pade_low(a, &B5),
            7 => pade_low(a, &B7),
            _ => pade_low(a, &B9),
        };
        (u, v, 0)
    } else {
        let s = (nrm / THETA_13).log2().ceil().max(0.0);
        if s > f64::from(MAX_SQUARINGS) {
            return Err(Error::ExpmOverflow { scaled_norm: nrm });
        }
        let s = s as i32;
        let scaled = a * T::lit(2f64.powi(-s));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::ExpmOverflow { scaled_norm: nrm })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::ExpmOverflow { scaled_norm: nrm });
    }
    Ok(r)
}

/// `e^{tA} v`.
pub fn expm_times_vector<T: Real>(a: &DMatrix<T>, t: T, v: &DVector<T>) -> Result<DVector<T>> {
    if v.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: v.len(),
            context: "matrix exponential vector",
        });
    }
    if t == T::zero() {
        return Ok(v.clone());
    }
    Ok(expm(&(a * t))? * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Truncated Taylor series with enough terms for modest norms.
    fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
    }

    #[test]
    fn zero_time_is_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = DVector::from_vec(vec![0.5, -1.5]);
        assert_eq!(expm_times_vector(&a, 0.0, &v).unwrap(), v);
    }

    #[test]
    fn diagonal_matrix() {
        let lam = [-3.0f64, 0.5, 2.0, -0.1];
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&lam));
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0, 3.0]);
        let got = expm_times_vector(&a, 1.0, &v).unwrap();
        for i in 0..4 {
            let want = v[i] * lam[i].exp();
            assert!((got[i] - want).abs() <= 1e-13 * want.abs());
        }
    }

    #[test]
    fn matches_taylor_for_each_pade_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scale in [1e-3, 0.03, 0.1, 0.25, 0.5, 1.0] {
            let a = random_matrix(&mut rng, 6, scale);
            let e = expm(&a).unwrap();
            let t = taylor_expm(&a);
            let err = (&e - &t).norm() / t.norm();
            assert!(err < 1e-13, "scale {scale}: {err}");
        }
    }

    #[test]
    fn inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 8, 1.0);
            let v = DVector::from_fn(8, |_, _| rng.random::<f64>() - 0.5);
            let w = expm_times_vector(&a, -1.0, &v).unwrap();
            let back = expm_times_vector(&a, 1.0, &w).unwrap();
            assert!((&back - &v).norm() <= 1e-8 * v.norm());
        }
    }

    #[test]
    fn scaling_and_squaring_against_eigen_closed_form() {
        // rotation generator: e^{tJ} is a rotation by t
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let t = 25.0f64;
        let e = expm(&(a * t)).unwrap();
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-12);
        assert!((e[(1, 0)] - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn overflow_reported() {
        let a = DMatrix::from_row_slice(1, 1, &[1e308]);
        assert!(matches!(expm(&a), Err(Error::ExpmOverflow { .. })));
        let a = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(expm(&a).is_err());
    }

    #[test]
    fn single_precision_instantiation() {
        let a = DMatrix::<f32>::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - (-1.0f32).exp()).abs() < 1e-6);
        assert!((e[(1, 1)] - (-2.0f32).exp()).abs() < 1e-6);
    }
}
