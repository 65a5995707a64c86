//! Dormand–Prince 5(4) embedded Runge–Kutta pair for complex vector ODEs.

use crate::{Error, Result, C64};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) struct OdeOptions {
    pub rtol: f64,
    /// Absolute tolerance per component (length 1 broadcasts).
    pub atol: Vec<f64>,
    pub max_steps: usize,
    pub initial_step: f64,
}

pub(crate) struct OdeSolution {
    pub states: Vec<Vec<C64>>,
    /// Largest accepted scaled local error up to each output time, times `rtol`.
    pub local_error: Vec<f64>,
}

/// Integrates `y' = f(t, y)` from `t = 0` and reports `y` at each of the
/// sorted, nonnegative `times`.
pub(crate) fn integrate<F>(mut f: F, y0: Vec<C64>, times: &[f64], opts: &OdeOptions) -> Result<OdeSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let dim = y0.len();
    let atol = |i: usize| if opts.atol.len() == 1 { opts.atol[0] } else { opts.atol[i] };
    let mut t = 0.0;
    let mut y = y0;
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); dim]; 7];
    let mut tmp = vec![C64::new(0.0, 0.0); dim];
    let mut y_new = vec![C64::new(0.0, 0.0); dim];
    f(t, &y, &mut k[0]);
    let mut h = opts.initial_step;
    let mut steps = 0usize;
    let mut worst = 0.0f64;

    let mut states = Vec::with_capacity(times.len());
    let mut local_error = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Accuracy {
                    requested: opts.rtol,
                    achieved: worst.max(1.0) * opts.rtol,
                });
            }
            let step = h.min(target - t);
            let clipped = step < h;

            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (step * A[s][j]);
                        }
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * step, &tmp, &mut k[s]);
            }
            // The last stage is evaluated at the fifth-order solution (FSAL).
            y_new.copy_from_slice(&tmp);

            let mut err = 0.0f64;
            for i in 0..dim {
                let mut e = C64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * (step * E[j]);
                    }
                }
                let scale = atol(i) + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / scale);
            }
            steps += 1;

            let accepted = err <= 1.0;
            if accepted {
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                worst = worst.max(err);
            } else if step <= 1e-15 * t.abs().max(1.0) {
                return Err(Error::Accuracy {
                    requested: opts.rtol,
                    achieved: err * opts.rtol,
                });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // A step shortened to land on an output time says little about
            // the natural step size; only let it shrink h.
            if !(accepted && clipped) || factor < 1.0 {
                h = step * factor;
            }
        }
        states.push(y.clone());
        local_error.push(worst * opts.rtol);
    }
    Ok(OdeSolution { states, local_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(tol: f64) -> OdeOptions {
        OdeOptions {
            rtol: tol,
            atol: vec![tol],
            max_steps: 100_000,
            initial_step: 1e-3,
        }
    }

    #[test]
    fn harmonic_oscillator() {
        // y0' = y1, y1' = -y0 with y(0) = (1, 0).
        let times = [0.0, 0.5, 1.0, 3.0, 10.0];
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            &times,
            &opts(1e-11),
        )
        .unwrap();
        for (t, s) in times.iter().zip(&sol.states) {
            assert!((s[0].re - t.cos()).abs() < 1e-9, "t = {t}");
            assert!((s[1].re + t.sin()).abs() < 1e-9, "t = {t}");
        }
        assert!(sol.local_error.iter().all(|&e| e <= 1e-11));
    }

    #[test]
    fn complex_rotation_time_dependent() {
        // y' = -i t y, y = exp(-i t^2 / 2).
        let times = [0.2, 1.0, 2.5];
        let sol = integrate(
            |t, y, dy| dy[0] = C64::new(0.0, -t) * y[0],
            vec![C64::new(1.0, 0.0)],
            &times,
            &opts(1e-12),
        )
        .unwrap();
        for (t, s) in times.iter().zip(&sol.states) {
            assert!((s[0] - C64::from_polar(1.0, -t * t / 2.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn step_budget_exhaustion_is_an_accuracy_error() {
        let o = OdeOptions {
            max_steps: 3,
            ..opts(1e-12)
        };
        let r = integrate(|_, y, dy| dy[0] = C64::new(0.0, -50.0) * y[0], vec![C64::new(1.0, 0.0)], &[10.0], &o);
        assert!(matches!(r, Err(Error::Accuracy { .. })));
    }
}
