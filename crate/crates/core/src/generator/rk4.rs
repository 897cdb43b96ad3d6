use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::systems::SdeSystem;

/// Classical fourth-order Runge–Kutta on the drift field; the noise
/// amplitude is ignored.
pub fn rk4_flow<T: Real>(system: &SdeSystem<T>, x0: &[T], dt: T, steps: usize) -> Result<Vec<T>> {
    let d = system.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x0.len(),
            context: "RK4 initial state",
        });
    }
    let half = dt * T::lit(0.5);
    let sixth = dt / T::lit(6.0);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]);
    let mut tmp = vec![T::zero(); d];
    for _ in 0..steps {
        system.eval_drift_into(&x, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + half * k1[i];
        }
        system.eval_drift_into(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + half * k2[i];
        }
        system.eval_drift_into(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + dt * k3[i];
        }
        system.eval_drift_into(&tmp, &mut k4);
        for i in 0..d {
            x[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RK4 state"));
        }
    }
    Ok(x)
}
