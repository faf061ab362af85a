//! Adaptive Dormand-Prince 5(4) stepper for two-component systems.
//!
//! Error control is per unit step and relative: a step of size `h` is
//! accepted when the embedded estimate satisfies
//! `|err_i|/h <= tol * (|y_0| + |y_1|)` componentwise.
//! The caller supplies a step-size cap, used to hold the explicit method
//! inside its stability region when the problem stiffens, and a stage guard
//! that rejects steps entering forbidden state (for example nonpositive `w`).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at s = {s} (dt = {dt:.3e})")]
    StepSizeUnderflow { s: f64, dt: f64 },
}

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

/// Difference between the 5th and embedded 4th order quadrature weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub struct Dopri5<'a> {
    /// Relative tolerance on the local error per unit step.
    pub tol: f64,
    /// Hard upper bound on the step size at `(s, y)`; used as a stability cap.
    pub max_step: &'a dyn Fn(f64, &[f64; 2]) -> f64,
    /// Stage admissibility; a `false` rejects the whole step.
    pub guard: &'a dyn Fn(&[f64; 2]) -> bool,
}

impl<'a> Dopri5<'a> {
    /// Integrate from `(s0, y0)` to `s_end`, landing exactly on every value
    /// of `milestones` (assumed sorted, strictly inside `(s0, s_end)`).
    /// Each accepted node is reported through `on_accept`, including the
    /// initial state.
    pub fn integrate<F, G>(
        &self,
        rhs: F,
        s0: f64,
        y0: [f64; 2],
        s_end: f64,
        milestones: &[f64],
        mut on_accept: G,
    ) -> Result<[f64; 2], OdeError>
    where
        F: Fn(f64, &[f64; 2]) -> [f64; 2],
        G: FnMut(f64, &[f64; 2]),
    {
        let mut s = s0;
        let mut y = y0;
        let mut next_milestone = milestones.iter().copied().filter(|&t| t > s0);
        let mut target = next_milestone.next().unwrap_or(s_end).min(s_end);

        on_accept(s, &y);
        if s >= s_end {
            return Ok(y);
        }

        let mut k = [[0.0f64; 2]; 7];
        k[0] = rhs(s, &y);
        let mut h = self.initial_step(s, &y, &k[0]).min((self.max_step)(s, &y));

        loop {
            let floor = 1e-14 * s.abs().max(1.0);
            if h < floor {
                return Err(OdeError::StepSizeUnderflow { s, dt: h });
            }
            let mut hit_target = false;
            if s + h >= target {
                h = target - s;
                hit_target = true;
            }

            let mut stage_fail = false;
            for i in 1..7 {
                let mut yi = y;
                for (j, kj) in k.iter().enumerate().take(i) {
                    let a = A[i][j];
                    if a != 0.0 {
                        yi[0] += h * a * kj[0];
                        yi[1] += h * a * kj[1];
                    }
                }
                if !(self.guard)(&yi) {
                    stage_fail = true;
                    break;
                }
                k[i] = rhs(s + C[i] * h, &yi);
            }
            if stage_fail {
                h *= 0.5;
                continue;
            }

            // 5th order solution is the k7 stage value (FSAL).
            let mut y1 = y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let a = A[6][j];
                if a != 0.0 {
                    y1[0] += h * a * kj[0];
                    y1[1] += h * a * kj[1];
                }
            }
            if !(self.guard)(&y1) || !y1[0].is_finite() || !y1[1].is_finite() {
                h *= 0.5;
                continue;
            }

            // Error per unit step, relative to the state magnitude. A pure
            // relative scale keeps the grid fine enough for interpolation
            // even where the solution itself is exponentially small.
            let mag = y[0].abs().max(y1[0].abs()) + y[1].abs().max(y1[1].abs());
            let scale = self.tol * mag.max(f64::MIN_POSITIVE);
            let mut ratio: f64 = 0.0;
            for c in 0..2 {
                let mut err = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    err += E[j] * kj[c];
                }
                ratio = ratio.max(err.abs() / scale);
            }

            if ratio <= 1.0 {
                s = if hit_target { target } else { s + h };
                y = y1;
                on_accept(s, &y);
                if s >= s_end {
                    return Ok(y);
                }
                if hit_target {
                    target = next_milestone.next().unwrap_or(s_end).min(s_end);
                    // FSAL stage was computed at the clipped endpoint.
                }
                k[0] = k[6];
                let grow = if ratio > 0.0 {
                    (0.9 * ratio.powf(-0.25)).min(5.0)
                } else {
                    5.0
                };
                h = (h * grow).min((self.max_step)(s, &y));
            } else {
                h *= (0.9 * ratio.powf(-0.25)).max(0.2);
            }
        }
    }

    fn initial_step(&self, _s: f64, y: &[f64; 2], dy: &[f64; 2]) -> f64 {
        let d0 = y[0].abs().max(y[1].abs()).max(1e-6);
        let d1 = dy[0].abs().max(dy[1].abs()).max(1e-12);
        (0.01 * d0 / d1).clamp(1e-8, 0.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_accuracy() {
        let solver = Dopri5 {
            tol: 1e-10,
            max_step: &|_, _| f64::INFINITY,
            guard: &|_| true,
        };
        let end = 10.0;
        let y = solver
            .integrate(
                |_, y| [y[1], -y[0]],
                0.0,
                [1.0, 0.0],
                end,
                &[],
                |_, _| {},
            )
            .unwrap();
        assert_relative_eq!(y[0], end.cos(), epsilon = 1e-8);
        assert_relative_eq!(y[1], -end.sin(), epsilon = 1e-8);
    }

    #[test]
    fn milestones_are_hit_exactly() {
        let solver = Dopri5 {
            tol: 1e-8,
            max_step: &|_, _| f64::INFINITY,
            guard: &|_| true,
        };
        let marks = [0.3, 1.0, 2.5];
        let mut seen = Vec::new();
        solver
            .integrate(|_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], 3.0, &marks, |s, _| {
                seen.push(s)
            })
            .unwrap();
        for m in marks {
            assert!(seen.iter().any(|&s| s == m), "milestone {m} missing");
        }
        assert_eq!(*seen.last().unwrap(), 3.0);
    }

    #[test]
    fn stability_cap_respected() {
        // Stiff linear decay: explicit RK must keep h below the cap to survive.
        let lam = 1e4;
        let solver = Dopri5 {
            tol: 1e-6,
            max_step: &move |_, _| 2.5 / lam,
            guard: &|y| y[0].is_finite(),
        };
        let y = solver
            .integrate(
                move |_, y| [-lam * y[0], 0.0],
                0.0,
                [1.0, 0.0],
                0.01,
                &[],
                |_, _| {},
            )
            .unwrap();
        assert_relative_eq!(y[0], (-lam * 0.01f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn guard_triggers_underflow_error() {
        // Solution crosses zero; the guard forbids it, so the step collapses.
        let solver = Dopri5 {
            tol: 1e-8,
            max_step: &|_, _| f64::INFINITY,
            guard: &|y| y[0] > 0.5,
        };
        let err = solver
            .integrate(|_, y| [-y[0], 0.0], 0.0, [1.0, 0.0], 5.0, &[], |_, _| {})
            .unwrap_err();
        assert!(matches!(err, OdeError::StepSizeUnderflow { .. }));
    }
}
