//! Adaptive Dormand–Prince 5(4) integration of `i dψ/dt = H(t) ψ`.

use super::{ComplexMatrix, C64, I, ZERO};
use crate::{Error, Result};

/// Step-control settings for the Runge–Kutta integrator.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    /// Relative and absolute local error tolerance.
    pub tol: f64,
    /// Upper bound on the step size; `None` leaves it to the controller.
    pub max_step: Option<f64>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_step: None }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` and returns `y(t1)`.
///
/// `rhs(t, y, dy)` must write the derivative into `dy`.
pub fn ode_propagate_state<F>(mut rhs: F, y0: &[C64], t0: f64, t1: f64, opts: OdeOptions) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if !(t1 >= t0) {
        return Err(Error::InvalidInput(format!("ODE interval must satisfy t1 >= t0 (got {t0} -> {t1})")));
    }
    if !(opts.tol > 0.0 && opts.tol <= 1e-6) {
        return Err(Error::InvalidInput(format!("ODE tolerance must lie in (0, 1e-6], got {}", opts.tol)));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![ZERO; n]).collect();
    let mut stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let span = t1 - t0;
    let h_max = opts.max_step.unwrap_or(span).min(span);
    let mut t = t0;
    let mut h = (0.01 * span).min(h_max).max(1e-6 * span);
    rhs(t, &y, &mut k[0]);
    let atol = opts.tol;
    let rtol = opts.tol;
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        let h_floor = 1e-13 * t.abs().max(span).max(1.0);
        if h < h_floor {
            return Err(Error::StepUnderflow { time: t });
        }
        let combo = |stage: &mut [C64], y: &[C64], k: &[Vec<C64>], coeffs: &[f64]| {
            for i in 0..n {
                let mut acc = ZERO;
                for (kj, &a) in k.iter().zip(coeffs) {
                    if a != 0.0 {
                        acc += kj[i] * a;
                    }
                }
                stage[i] = y[i] + acc * h;
            }
        };
        combo(&mut stage, &y, &k[..1], &[A21]);
        rhs(t + C2 * h, &stage, &mut k[1]);
        combo(&mut stage, &y, &k[..2], &[A31, A32]);
        rhs(t + C3 * h, &stage, &mut k[2]);
        combo(&mut stage, &y, &k[..3], &[A41, A42, A43]);
        rhs(t + C4 * h, &stage, &mut k[3]);
        combo(&mut stage, &y, &k[..4], &[A51, A52, A53, A54]);
        rhs(t + C5 * h, &stage, &mut k[4]);
        combo(&mut stage, &y, &k[..5], &[A61, A62, A63, A64, A65]);
        rhs(t + h, &stage, &mut k[5]);
        combo(&mut y_new, &y, &k[..6], &[B1, 0.0, B3, B4, B5, B6]);
        rhs(t + h, &y_new, &mut k[6]);

        let mut err = 0.0_f64;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let scale = atol + rtol * y[i].norm().max(y_new[i].norm());
            let ratio = e.norm() / scale;
            err = if ratio.is_nan() { f64::INFINITY } else { err.max(ratio) };
        }
        if !err.is_finite() || y_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).min(h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(y)
}

/// Propagator `U(t1, t0)` of `i ∂_t U = H(t) U`, `U(t0, t0) = I`.
pub fn ode_propagate<F>(h_of_t: F, t0: f64, t1: f64, tol: f64) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> ComplexMatrix,
{
    ode_propagate_with(h_of_t, t0, t1, OdeOptions::with_tol(tol))
}

pub(crate) fn ode_propagate_with<F>(h_of_t: F, t0: f64, t1: f64, opts: OdeOptions) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let dim = h_of_t(t0).dim();
    let start = ComplexMatrix::identity(dim);
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let h = h_of_t(t);
        for r in 0..dim {
            for c in 0..dim {
                let mut acc = ZERO;
                for k in 0..dim {
                    acc += h[(r, k)] * y[k * dim + c];
                }
                dy[r * dim + c] = -I * acc;
            }
        }
    };
    let y = ode_propagate_state(rhs, start.as_slice(), t0, t1, opts)?;
    let mut u = ComplexMatrix::zeros(dim);
    u.as_mut_slice().copy_from_slice(&y);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, unitary_exp, unitarity_defect};

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let u = ode_propagate(|_| ComplexMatrix::zeros(2), 0.0, 3.0, 1e-8).unwrap();
        assert!((&u - &ComplexMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn autonomous_matches_exponential() {
        let tol = 1e-8;
        let u = ode_propagate(|_| pauli(3), 0.0, 1.0, tol).unwrap();
        let v = unitary_exp(&pauli(3), 1.0).unwrap();
        assert!((&u - &v).op_norm() <= 100.0 * tol);
        assert!(unitarity_defect(&u) <= 100.0 * tol);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ode_propagate(|_| pauli(1), 1.0, 0.0, 1e-8).is_err());
        assert!(ode_propagate(|_| pauli(1), 0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn singular_rhs_reports_breakdown_time() {
        let res = ode_propagate_state(
            |t, y, dy| {
                for (d, v) in dy.iter_mut().zip(y) {
                    *d = v * (1.0 / (0.5 - t).powi(3));
                }
            },
            &[C64::new(1.0, 0.0)],
            0.0,
            1.0,
            OdeOptions::with_tol(1e-8),
        );
        match res {
            Err(Error::StepUnderflow { time }) => assert!(time > 0.4 && time <= 0.5, "breakdown at {time}"),
            other => panic!("expected underflow, got {other:?}"),
        }
    }
}
