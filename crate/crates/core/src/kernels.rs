//! Fractional heat kernel `K_t^α`, its mass and the Kato-class quantity.
//!
//! `K^α(x) = (2π)^{-N} ∫ e^{iξ·x} e^{-|ξ|^{2α}} dξ` and
//! `K_t^α(x) = t^{-N/2α} K^α(t^{-1/2α} x)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quad::{bessel_j01, gauss_legendre_unit, integrate_panels};
use crate::spectral::{Field, Spectral};

/// `e^{-41.5} < 1e-18`: the Fourier damping is negligible past this exponent.
const DAMPING_CUTOFF: f64 = 41.5;
const VALUE_TOL: f64 = 1e-13;
const NEGATIVE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub alpha: f64,
    pub dim: usize,
    pub t: f64,
}

impl KernelSpec {
    pub fn new(alpha: f64, dim: usize, t: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::Parameter(format!(
                "kernel dim must be 1 or 2, got {dim}"
            )));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!(
                "kernel time must be positive, got {t}"
            )));
        }
        Ok(KernelSpec { alpha, dim, t })
    }

    fn xi_max(&self, t: f64) -> f64 {
        (DAMPING_CUTOFF / t).powf(0.5 / self.alpha)
    }
}

/// Radial profile of the unit-time kernel `K^α` at distance `y`.
fn unit_kernel(spec: &KernelSpec, y: f64) -> Result<f64> {
    let alpha = spec.alpha;
    let upper = spec.xi_max(1.0);
    let panel = if y > 0.0 { (PI / y).min(upper) } else { upper };
    let r = match spec.dim {
        1 => {
            integrate_panels(
                |xi: f64| (xi * y).cos() * (-xi.powf(2.0 * alpha)).exp(),
                upper,
                panel,
                VALUE_TOL,
            )?
            .value
                / PI
        }
        _ => {
            integrate_panels(
                |xi: f64| bessel_j01(xi * y).0 * (-xi.powf(2.0 * alpha)).exp() * xi,
                upper,
                panel,
                VALUE_TOL,
            )?
            .value
                / (2.0 * PI)
        }
    };
    Ok(r)
}

/// Pointwise kernel value `K_t^α(x)`; `x` has `dim` components.
pub fn heat_kernel_value(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim {
        return Err(Error::Parameter(format!(
            "point has {} components, kernel dim is {}",
            x.len(),
            spec.dim
        )));
    }
    let dist = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = spec.t.powf(-0.5 / spec.alpha);
    let raw = unit_kernel(spec, dist * scale)? * scale.powi(spec.dim as i32);
    if raw >= 0.0 {
        return Ok(raw);
    }
    if raw >= -NEGATIVE_SLACK {
        log::warn!("kernel value {raw:e} at |x| = {dist} clipped to zero");
        return Ok(0.0);
    }
    Err(Error::Quadrature {
        achieved: -raw,
        requested: NEGATIVE_SLACK,
    })
}

/// `(x, K_t^α(x))` on `n` equispaced points of `[0, xmax]` (radial in 2D).
pub fn tabulate(spec: &KernelSpec, xmax: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 || !(xmax > 0.0) {
        return Err(Error::Parameter(format!(
            "tabulation needs n >= 2 and xmax > 0, got n = {n}, xmax = {xmax}"
        )));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = xmax * i as f64 / (n - 1) as f64;
            let mut p = vec![0.0; spec.dim];
            p[0] = x;
            heat_kernel_value(spec, &p).map(|k| (x, k))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct KernelMass {
    /// `∫_{|x|<R} K_t^α`.
    pub ball: f64,
    /// Leading-order estimate of `∫_{|x|>R} K_t^α`.
    pub tail: f64,
    /// Bound on what `ball + tail` misses.
    pub remainder: f64,
    pub total: f64,
}

fn sphere_area(dim: usize) -> f64 {
    if dim == 1 {
        2.0
    } else {
        2.0 * PI
    }
}

/// Coefficient `c_j` of the large-`|x|` expansion `K^α(x) ~ Σ_j c_j |x|^{-N-2αj}`.
fn tail_coefficient(alpha: f64, dim: usize, j: u32) -> f64 {
    let n = dim as f64;
    let aj = alpha * j as f64;
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    let fact = (1..=j).map(f64::from).product::<f64>();
    sign / fact * gamma(aj + 1.0) * gamma(aj + 0.5 * n) * (PI * aj).sin() * 4f64.powf(aj)
        / PI.powf(0.5 * n + 1.0)
}

fn tail_term(spec: &KernelSpec, radius: f64, j: u32) -> f64 {
    let aj = spec.alpha * j as f64;
    sphere_area(spec.dim)
        * spec.t.powi(j as i32)
        * tail_coefficient(spec.alpha, spec.dim, j)
        * radius.powf(-2.0 * aj)
        / (2.0 * aj)
}

/// Kernel mass split into a quadrature over `|x| < R` and an asymptotic tail.
pub fn kernel_mass(spec: &KernelSpec, truncation_radius: f64, tol: f64) -> Result<KernelMass> {
    let r = truncation_radius;
    if !(r > 0.0) {
        return Err(Error::Parameter(format!(
            "truncation radius must be positive, got {r}"
        )));
    }
    let (t, alpha) = (spec.t, spec.alpha);
    let upper = spec.xi_max(t);
    let panel = (PI / r).min(upper);
    let quad_tol = (0.01 * tol).max(1e-14);
    let damp = move |xi: f64| (-t * xi.powf(2.0 * alpha)).exp();
    let ball = match spec.dim {
        1 => {
            let q = integrate_panels(
                |xi: f64| {
                    let s = if xi * r < 1e-8 {
                        r
                    } else {
                        (xi * r).sin() / xi
                    };
                    damp(xi) * s
                },
                upper,
                panel,
                quad_tol,
            )?;
            (2.0 / PI * q.value, 2.0 / PI * q.error)
        }
        _ => {
            let q = integrate_panels(
                |xi: f64| damp(xi) * r * bessel_j01(xi * r).1,
                upper,
                panel,
                quad_tol,
            )?;
            (q.value, q.error)
        }
    };
    let (tail, asymptotic_rest) = if alpha == 1.0 {
        let z = r / (2.0 * t.sqrt());
        let exact = if spec.dim == 1 {
            erfc(z)
        } else {
            (-z * z).exp()
        };
        (exact, 0.0)
    } else {
        (
            tail_term(spec, r, 1),
            tail_term(spec, r, 2).abs() + tail_term(spec, r, 3).abs(),
        )
    };
    let remainder = asymptotic_rest + ball.1;
    if remainder > tol {
        return Err(Error::InsufficientTruncation { remainder, tol });
    }
    Ok(KernelMass {
        ball: ball.0,
        tail,
        remainder,
        total: ball.0 + tail,
    })
}

/// `‖K_t ∗ (K_s ∗ f) − K_{t+s} ∗ f‖∞` with the convolutions applied as
/// Fourier multipliers `e^{-t|ξ|^{2α}}`.
pub fn semigroup_defect(alpha: f64, dim: usize, t: f64, s: f64, probe: &Field) -> Result<f64> {
    KernelSpec::new(alpha, dim, t)?;
    KernelSpec::new(alpha, dim, s)?;
    if probe.grid().dim() != dim {
        return Err(Error::Grid(format!(
            "probe has dim {}, expected {dim}",
            probe.grid().dim()
        )));
    }
    probe.check_finite()?;
    let sp = Spectral::new(*probe.grid());
    let spec = sp.forward(probe);
    let mult = |tau: f64| -> Vec<f64> {
        sp.ksq()
            .iter()
            .map(|&k2| (-tau * k2.powf(alpha)).exp())
            .collect()
    };
    let (mt, ms, mts) = (mult(t), mult(s), mult(t + s));
    let two_step: Vec<_> = spec
        .iter()
        .zip(mt.iter().zip(&ms))
        .map(|(c, (a, b))| c * *b * *a)
        .collect();
    let one_step: Vec<_> = spec.iter().zip(&mts).map(|(c, m)| c * *m).collect();
    let lhs = sp.inverse(two_step);
    let rhs = sp.inverse(one_step);
    Ok(lhs.linf_distance(&rhs))
}

fn periodic_linear(values: &[f64], n: usize, pos: f64) -> f64 {
    let fl = pos.floor();
    let frac = pos - fl;
    let i0 = (fl as i64).rem_euclid(n as i64) as usize;
    let i1 = (i0 + 1) % n;
    values[i0] * (1.0 - frac) + values[i1] * frac
}

fn periodic_bilinear(values: &[f64], n: usize, p0: f64, p1: f64) -> f64 {
    let (f0, f1) = (p0.floor(), p1.floor());
    let (s, t) = (p0 - f0, p1 - f1);
    let i0 = (f0 as i64).rem_euclid(n as i64) as usize;
    let j0 = (f1 as i64).rem_euclid(n as i64) as usize;
    let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
    let at = |i: usize, j: usize| values[i * n + j];
    (1.0 - s) * ((1.0 - t) * at(i0, j0) + t * at(i0, j1))
        + s * ((1.0 - t) * at(i1, j0) + t * at(i1, j1))
}

const KATO_RADIAL_NODES: usize = 48;
const KATO_ANGLES: usize = 64;

/// `sup_x ∫_{B_r(x)} |f(y)| / |x−y|^{N+1−2α} dy` over grid centres `x`.
///
/// With `ρ = r τ^{1/(2α−1)}` the weight `ρ^{2α−2}` becomes constant, so the
/// radial integral is a smooth one on `[0, 1]`; `|f|` is interpolated
/// (bi)linearly between grid samples.
pub fn kato_quantity(f: &Field, r: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.5) {
        return Err(Error::DivergentSingularity(format!(
            "the Kato integral diverges for alpha <= 1/2 (got {alpha})"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Parameter(format!(
            "Kato radius must be positive, got {r}"
        )));
    }
    f.check_finite()?;
    let g = *f.grid();
    let n = g.points_per_axis();
    let h = g.spacing();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let expo = 1.0 / (2.0 * alpha - 1.0);
    let (tau, wts) = gauss_legendre_unit(KATO_RADIAL_NODES);
    let steps: Vec<(f64, f64)> = tau
        .iter()
        .zip(&wts)
        .map(|(&s, &w)| (r * s.powf(expo) / h, w))
        .collect();
    let dirs: Vec<(f64, f64)> = (0..KATO_ANGLES)
        .map(|m| {
            let th = 2.0 * PI * m as f64 / KATO_ANGLES as f64;
            (th.cos(), th.sin())
        })
        .collect();
    let sup = (0..g.size())
        .into_par_iter()
        .map(|idx| {
            let [i, j] = g.axis_indices(idx);
            let (ci, cj) = (i as f64, j as f64);
            steps
                .iter()
                .map(|&(rho, w)| {
                    let a = match g.dim() {
                        1 => {
                            periodic_linear(&abs, n, ci + rho) + periodic_linear(&abs, n, ci - rho)
                        }
                        _ => {
                            dirs.iter()
                                .map(|&(c, s)| {
                                    periodic_bilinear(&abs, n, ci + rho * c, cj + rho * s)
                                })
                                .sum::<f64>()
                                * (2.0 * PI / KATO_ANGLES as f64)
                        }
                    };
                    w * a
                })
                .sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup * r.powf(2.0 * alpha - 1.0) / (2.0 * alpha - 1.0))
}

#[derive(Debug, Clone)]
pub struct KatoCheck {
    /// `(r, K_f(r))` in the order the radii were given.
    pub table: Vec<(f64, f64)>,
    /// Least-squares slope of `ln K_f` against `ln r` (positive entries only).
    pub exponent: Option<f64>,
    pub decreasing: bool,
    /// The last entry is below the tolerance.
    pub vanishing: bool,
}

pub fn kato_limit_check(f: &Field, alpha: f64, radii: &[f64], tol: f64) -> Result<KatoCheck> {
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "radii must be strictly decreasing".into(),
        ));
    }
    let table = radii
        .iter()
        .map(|&r| kato_quantity(f, r, alpha).map(|k| (r, k)))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = table
        .iter()
        .filter(|(_, k)| *k > 0.0)
        .map(|&(r, k)| (r.ln(), k.ln()))
        .collect();
    let exponent = (pts.len() >= 2).then(|| {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let decreasing = table.windows(2).all(|w| w[1].1 <= w[0].1);
    let vanishing = table.last().is_some_and(|&(_, k)| k <= tol);
    Ok(KatoCheck {
        table,
        exponent,
        decreasing,
        vanishing,
    })
}

/// Bound `(χ₁μ₁/√λ₁ + χ₂μ₂/√λ₂)·√N·C₀^k·r^{2α−1}/(2α−1)` on the Kato quantity
/// of `|∇(χ₁v − χ₂w)|` for solutions bounded by `c0`.
pub fn kato_gradient_bound(p: &Params, c0: f64, r: f64) -> f64 {
    let lead = p.attraction() / p.lambda1.sqrt() + p.repulsion() / p.lambda2.sqrt();
    lead * (p.dim as f64).sqrt() * c0.powf(p.k) * r.powf(2.0 * p.alpha - 1.0)
        / (2.0 * p.alpha - 1.0)
}
