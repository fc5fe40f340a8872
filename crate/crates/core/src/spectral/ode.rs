//! Adaptive explicit Runge-Kutta 5(4) (Dormand-Prince) for linear systems
//! `y' = f(y)` given as an in-place action. Autonomous, so the stage
//! nodes are not needed.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}); the system is stiffer than expected")]
    StepUnderflow { t: f64, h: f64 },
    #[error("sample times must be finite, nonnegative and sorted")]
    BadTimes,
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: u64,
    pub rejected: u64,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (equal to the last row of `A`).
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Fourth-order embedded weights.
const BHAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate from `t = 0` and call `observe(i, y)` at each `times[i]`.
/// Steps are clipped to land on sample times exactly. `h0` is the first
/// trial step; a good choice is about `0.1 / L` for a Lipschitz constant `L`.
pub fn integrate(
    rhs: &mut dyn FnMut(&[f64], &mut [f64]),
    y0: &[f64],
    times: &[f64],
    rtol: f64,
    atol: f64,
    h0: f64,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<OdeStats, OdeError> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(OdeError::BadTimes);
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut stats = OdeStats::default();
    let mut t = 0.0;
    let mut h = h0;
    // k[0] always holds f(y)
    rhs(&y, &mut k[0]);
    for (i, &target) in times.iter().enumerate() {
        while t < target {
            let step = h.min(target - t);
            if step < 1e-14 * (1.0 + t) {
                return Err(OdeError::StepUnderflow { t, h: step });
            }
            for s in 1..7 {
                for j in 0..n {
                    let mut acc = y[j];
                    for (q, a) in A[s].iter().enumerate().take(s) {
                        acc += step * a * k[q][j];
                    }
                    tmp[j] = acc;
                }
                rhs(&tmp, &mut k[s]);
            }
            let mut err = 0.0f64;
            for j in 0..n {
                let mut hi = y[j];
                let mut lo = y[j];
                for s in 0..7 {
                    hi += step * B[s] * k[s][j];
                    lo += step * BHAT[s] * k[s][j];
                }
                y5[j] = hi;
                let scale = atol + rtol * y[j].abs().max(hi.abs());
                err = err.max(((hi - lo) / scale).abs());
            }
            if !err.is_finite() {
                return Err(OdeError::NonFinite(t));
            }
            if err <= 1.0 {
                t = if step == target - t { target } else { t + step };
                std::mem::swap(&mut y, &mut y5);
                // first-same-as-last: stage 7 was evaluated at the new point
                k.swap(0, 6);
                stats.accepted += 1;
            } else {
                stats.rejected += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
            if err > 1.0 {
                h = h.min(step * 0.9);
            }
        }
        observe(i, &y);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_growth() {
        for rate in [-2.0, 0.7] {
            let times = [0.5, 1.0, 3.0];
            let mut got = vec![0.0; 3];
            integrate(
                &mut |y, out| out[0] = rate * y[0],
                &[1.0],
                &times,
                1e-10,
                1e-14,
                0.01,
                &mut |i, y| got[i] = y[0],
            )
            .unwrap();
            for (i, &t) in times.iter().enumerate() {
                let want = (rate * t).exp();
                assert!((got[i] - want).abs() < 1e-8 * want, "{rate} {t}");
            }
        }
    }

    #[test]
    fn rotation_preserves_norm() {
        let mut end = vec![0.0; 2];
        let stats = integrate(
            &mut |y, out| {
                out[0] = -y[1];
                out[1] = y[0];
            },
            &[1.0, 0.0],
            &[10.0],
            1e-9,
            1e-12,
            0.1,
            &mut |_, y| end.copy_from_slice(y),
        )
        .unwrap();
        assert!((end[0] - 10f64.cos()).abs() < 1e-7);
        assert!((end[1] - 10f64.sin()).abs() < 1e-7);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn zero_stays_zero() {
        let mut end = vec![1.0; 3];
        integrate(
            &mut |y, out| out.iter_mut().zip(y).for_each(|(o, v)| *o = -3.0 * v),
            &[0.0; 3],
            &[2.0],
            1e-8,
            1e-12,
            0.1,
            &mut |_, y| end.copy_from_slice(y),
        )
        .unwrap();
        assert_eq!(end, vec![0.0; 3]);
    }

    #[test]
    fn bad_times() {
        let r = integrate(&mut |_, _| {}, &[1.0], &[2.0, 1.0], 1e-8, 1e-12, 0.1, &mut |_, _| {});
        assert_eq!(r, Err(OdeError::BadTimes));
    }
}
