//! Embedded Dormand–Prince 5(4) stepping for small complex systems.

use crate::error::{Error, Result};
use crate::C64;

/// Steps below this (ps) abort the integration.
pub(crate) const MIN_STEP: f64 = 1e-6;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive stepper; `step` carries the proposed step size between calls.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    pub tol: f64,
    pub step: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Stepper {
    pub fn new(tol: f64, initial_step: f64) -> Self {
        Stepper {
            tol,
            step: initial_step,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Integrate `y' = f(t, y)` from `t_start` to `t_end`.
    ///
    /// The local error estimate of every accepted step satisfies
    /// `|err_i| ≤ tol·(1 + |y_i|)`.
    pub fn advance<const N: usize, F>(
        &mut self,
        f: F,
        t_start: f64,
        t_end: f64,
        y: &mut [C64; N],
    ) -> Result<()>
    where
        F: Fn(f64, &[C64; N]) -> [C64; N],
    {
        let mut t = t_start;
        let zero = C64::new(0.0, 0.0);
        while t < t_end {
            let remaining = t_end - t;
            let clipped = self.step >= remaining;
            let h = if clipped { remaining } else { self.step };

            let mut k = [[zero; N]; 7];
            k[0] = f(t, y);
            for s in 1..7 {
                let mut ys = *y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += kj[i] * (h * a);
                        }
                    }
                }
                k[s] = f(t + C[s] * h, &ys);
            }
            // the 7th stage is evaluated at the fifth-order solution
            let mut y_new = *y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let b = A[6][j];
                if b != 0.0 {
                    for i in 0..N {
                        y_new[i] += kj[i] * (h * b);
                    }
                }
            }
            let mut err: f64 = 0.0;
            for i in 0..N {
                let mut e = zero;
                for (j, kj) in k.iter().enumerate() {
                    e += kj[i] * E[j];
                }
                let scale = self.tol * (1.0 + y[i].norm().max(y_new[i].norm()));
                let ratio = (e * h).norm() / scale;
                err = if ratio.is_finite() { err.max(ratio) } else { f64::INFINITY };
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                *y = y_new;
                t = if clipped { t_end } else { t + h };
                self.accepted += 1;
                // keep the unclipped proposal for the next interval
                if !clipped || factor < 1.0 {
                    self.step = h * factor;
                }
                self.step = self.step.max(MIN_STEP);
            } else {
                self.rejected += 1;
                self.step = h * factor;
                if self.step < MIN_STEP {
                    return Err(Error::StepUnderflow {
                        t_ps: t,
                        step_ps: self.step,
                    });
                }
            }
        }
        Ok(())
    }
}
