//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) over a
//! flat `f64` state vector.
//!
//! Complex-valued systems are integrated componentwise by packing real and
//! imaginary parts into the state. The right-hand side may fail (coefficient
//! domain errors), and an observer can stop the integration early, which the
//! m-coefficient search uses to cut off as soon as its Weyl-disk radius
//! target is reached.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights coincide with the last row of A (FSAL scheme).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integration failure.
#[derive(Debug, Clone, PartialEq)]
pub enum RkError<E> {
    /// Right-hand side failed at `t` (e.g. coefficient domain error).
    Rhs { t: f64, source: E },
    /// Step size collapsed below machine resolution at `t`
    /// (coefficient singularity or hopelessly stiff problem).
    StepUnderflow { t: f64 },
    /// Step budget exhausted before reaching the end of the interval.
    MaxSteps { t: f64 },
}

impl<E: fmt::Display> fmt::Display for RkError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RkError::Rhs { t, source } => write!(f, "rhs evaluation failed at t={}: {}", t, source),
            RkError::StepUnderflow { t } => write!(f, "step size underflow at t={}", t),
            RkError::MaxSteps { t } => write!(f, "step budget exhausted at t={}", t),
        }
    }
}

#[cfg(feature = "std")]
impl<E: fmt::Display + fmt::Debug> std::error::Error for RkError<E> {}

/// What the observer wants after seeing an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 50_000_000,
            h_max: f64::INFINITY,
        }
    }
}

/// Result of an integration run.
#[derive(Debug, Clone)]
pub struct Integration {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    /// True when the observer stopped the run before reaching `t_end`.
    pub stopped_early: bool,
}

impl Dopri5 {
    /// Integrate `y' = f(t, y)` from `(t0, y0)` to `t_end` (forward only).
    ///
    /// The observer sees every accepted step `(t, y)` including the initial
    /// state, and may stop the run. On success the final accepted state is
    /// returned.
    pub fn integrate<E>(
        &self,
        mut f: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
        t0: f64,
        t_end: f64,
        y0: &[f64],
        mut observer: impl FnMut(f64, &[f64]) -> Control,
    ) -> Result<Integration, RkError<E>> {
        let dim = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
        let mut y_stage = vec![0.0; dim];
        let mut y5 = vec![0.0; dim];
        let mut steps = 0usize;
        let mut rejected = 0usize;

        if observer(t, &y) == Control::Stop {
            return Ok(Integration {
                t,
                y,
                steps,
                rejected,
                stopped_early: true,
            });
        }
        if t_end <= t0 {
            return Ok(Integration {
                t,
                y,
                steps,
                rejected,
                stopped_early: false,
            });
        }

        let rhs_err = |t: f64, source: E| RkError::Rhs { t, source };
        f(t, &y, &mut k[0]).map_err(|e| rhs_err(t, e))?;
        let mut h = self.initial_step(t0, t_end, &y, &k[0]);
        let mut fsal_valid = true;

        loop {
            if steps + rejected >= self.max_steps {
                return Err(RkError::MaxSteps { t });
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(RkError::StepUnderflow { t });
            }
            let mut last = false;
            if t + h >= t_end {
                h = t_end - t;
                last = true;
            }

            if !fsal_valid {
                f(t, &y, &mut k[0]).map_err(|e| rhs_err(t, e))?;
                fsal_valid = true;
            }
            for stage in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        let a = A[stage][j];
                        if a != 0.0 {
                            acc += a * kj[i];
                        }
                    }
                    y_stage[i] = y[i] + h * acc;
                }
                let t_stage = t + C[stage] * h;
                f(t_stage, &y_stage, &mut k[stage]).map_err(|e| rhs_err(t_stage, e))?;
            }

            // 5th-order solution and embedded error estimate
            let mut err_sq = 0.0;
            for i in 0..dim {
                let mut acc5 = 0.0;
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    if B5[j] != 0.0 {
                        acc5 += B5[j] * kj[i];
                    }
                    if B4[j] != 0.0 {
                        acc4 += B4[j] * kj[i];
                    }
                }
                y5[i] = y[i] + h * acc5;
                let scale = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                let e = h * (acc5 - acc4) / scale;
                err_sq += e * e;
            }
            let err = (err_sq / dim as f64).sqrt();

            if err <= 1.0 {
                t += h;
                core::mem::swap(&mut y, &mut y5);
                // FSAL: the 7th stage is f at the accepted point
                k.swap(0, 6);
                steps += 1;
                if observer(t, &y) == Control::Stop {
                    return Ok(Integration {
                        t,
                        y,
                        steps,
                        rejected,
                        stopped_early: true,
                    });
                }
                if last {
                    return Ok(Integration {
                        t,
                        y,
                        steps,
                        rejected,
                        stopped_early: false,
                    });
                }
                let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
                h = (h * factor).min(self.h_max);
            } else {
                rejected += 1;
                fsal_valid = false;
                let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= factor;
            }
        }
    }

    /// Crude but safe initial step: small fraction of the interval, shrunk
    /// further when the initial slope is steep.
    fn initial_step(&self, t0: f64, t_end: f64, y0: &[f64], f0: &[f64]) -> f64 {
        let span = t_end - t0;
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..y0.len() {
            let scale = self.atol + self.rtol * y0[i].abs();
            d0 = d0.max((y0[i] / scale).abs());
            d1 = d1.max((f0[i] / scale).abs());
        }
        let h_slope = if d1 > 0.0 {
            0.01 * (d0.max(1.0) / d1)
        } else {
            span
        };
        // the slope guess is unreliable for (near-)zero initial states, so
        // keep a healthy floor and let the controller adapt downward
        (0.1 * span).min(h_slope).min(self.h_max).max(1e-6 * span)
    }
}
