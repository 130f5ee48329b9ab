//! Adaptive Dormand–Prince 5(4) integration of scalar ODEs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Integration stops with an error once |y| exceeds this.
    pub blowup: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 5_000_000,
            blowup: 1e12,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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

/// Solves `y' = f(t, y)` from `(t0, y0)` and returns `y` at each of `times`
/// (non-decreasing, all `>= t0`). Steps land exactly on the sample times.
pub fn solve_scalar(
    f: impl Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut y) = (t0, y0);
    let mut h = 1e-3_f64;
    let mut steps = 0usize;
    for &target in times {
        if target < t - 1e-14 * t.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "sample times must be non-decreasing (got {target} after {t})"
            )));
        }
        while t < target {
            let mut step = h.min(target - t);
            let last = step == target - t;
            let mut k = [0.0; 7];
            k[0] = f(t, y);
            for s in 1..7 {
                let ys = y + step * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
                k[s] = f(t + C[s] * step, ys);
            }
            let y5 = y + step * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
            let err = step * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
            let scale = opts.atol + opts.rtol * y.abs().max(y5.abs());
            let ratio = (err / scale).abs();
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Precondition(format!(
                    "ODE step budget exhausted at t = {t}"
                )));
            }
            if ratio <= 1.0 || step < 1e-14 {
                t = if last { target } else { t + step };
                y = y5;
                if !y.is_finite() || y.abs() > opts.blowup {
                    return Err(Error::Precondition(format!(
                        "scalar ODE solution blows up near t = {t}"
                    )));
                }
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            step *= factor;
            h = step;
        }
        out.push(y);
    }
    Ok(out)
}
