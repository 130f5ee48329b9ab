//! Adaptive Gauss–Kronrod integration, Gauss–Legendre rules and Bessel J0/J1.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error, integral of |f|).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = h * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        kron += WGK[i] * (f1 + f2);
        abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs(), abs * h.abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod 7/15 on `[a, b]` with absolute tolerance.
///
/// The tolerance is floored at a few ulps of `∫|f|` so round-off cannot stall
/// the refinement.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
        });
    }
    let (v, e, abs) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        err: e,
    });
    let (mut err, mut abs_total) = (e, abs);
    let floor = |abs_total: f64| 50.0 * f64::EPSILON * abs_total;
    while err > tol.max(floor(abs_total)) {
        if heap.len() >= max_panels {
            return Err(Error::Quadrature {
                achieved: err,
                requested: tol,
            });
        }
        let p = heap.pop().expect("heap never empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1, a1) = gk15(&f, p.a, m);
        let (v2, e2, a2) = gk15(&f, m, p.b);
        err += e1 + e2 - p.err;
        abs_total += a1 + a2;
        heap.push(Panel {
            a: p.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: m,
            b: p.b,
            value: v2,
            err: e2,
        });
    }
    // recompute sums to shed accumulated cancellation in the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
    Ok(QuadResult { value, error })
}

/// Integrates over `[0, upper]` in panels of width `panel`, each adaptively.
/// Used for oscillatory integrands where `panel` is a half period.
pub fn integrate_panels(
    f: impl Fn(f64) -> f64,
    upper: f64,
    panel: f64,
    tol: f64,
) -> Result<QuadResult> {
    let count = (upper / panel).ceil().max(1.0) as usize;
    let width = upper / count as f64;
    let per_panel = tol / count as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut comp = 0.0;
    for i in 0..count {
        let a = i as f64 * width;
        let r = integrate(&f, a, a + width, per_panel, 200)?;
        // Kahan summation: up to 1e5 panels of alternating sign
        let y = r.value - comp;
        let t = value + y;
        comp = (t - value) - y;
        value = t;
        error += r.error;
    }
    Ok(QuadResult { value, error })
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Bessel functions `(J0(x), J1(x))` for `x >= 0`.
///
/// Miller backward recurrence below 25, Hankel asymptotics above.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    let x = x.abs();
    if x < 1e-8 {
        return (1.0 - 0.25 * x * x, 0.5 * x);
    }
    if x >= 25.0 {
        return (hankel(0.0, x), hankel(1.0, x));
    }
    let mut m = (x as usize) + 40;
    m += m % 2;
    let (mut jp1, mut j) = (0.0_f64, 1e-30_f64);
    let (mut j0, mut j1) = (0.0, 0.0);
    let mut norm = 0.0;
    for n in (1..=m).rev() {
        let jm1 = 2.0 * n as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
        // j now holds J_{n-1}
        match n - 1 {
            0 => j0 = j,
            1 => j1 = j,
            k if k % 2 == 0 => norm += 2.0 * j,
            _ => {}
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let chi = x - (0.5 * nu + 0.25) * PI;
    let (mut p, mut q) = (0.0, 0.0);
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
