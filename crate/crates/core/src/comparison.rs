//! Closed-form constants `M`, `H`, `C₀`, `M₁`, the constant equilibrium and the
//! scalar ODE oracles (lower solution and bracket limits).

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::ode::{solve_scalar, OdeOptions};
use crate::params::Params;
use crate::regime::{case_checks, DEFAULT_EQ_TOL};

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// The two branches `(λ₁-branch, λ₂-branch)` of `M`.
pub fn m_branches(p: &Params) -> (f64, f64) {
    let (a, b) = (p.attraction(), p.repulsion());
    let cross = pos(b * p.lambda2 - a * p.lambda1);
    let dl = pos(p.lambda1 - p.lambda2);
    ((cross + b * dl) / p.lambda1, (cross + a * dl) / p.lambda2)
}

/// `M = min{[(χ₂μ₂λ₂ − χ₁μ₁λ₁)₊ + χ₂μ₂(λ₁ − λ₂)₊]/λ₁, [(χ₂μ₂λ₂ − χ₁μ₁λ₁)₊ + χ₁μ₁(λ₁ − λ₂)₊]/λ₂}`.
pub fn constant_m(p: &Params) -> f64 {
    let (m1, m2) = m_branches(p);
    m1.min(m2)
}

/// Same branches as [`constant_m`] with absolute values in place of positive parts.
pub fn constant_h(p: &Params) -> f64 {
    let (a, b) = (p.attraction(), p.repulsion());
    let cross = (a * p.lambda1 - b * p.lambda2).abs();
    let dl = (p.lambda1 - p.lambda2).abs();
    ((cross + b * dl) / p.lambda1).min((cross + a * dl) / p.lambda2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundednessCase {
    A,
    B,
    C,
    D,
}

impl BoundednessCase {
    pub const ALL: [BoundednessCase; 4] = [Self::A, Self::B, Self::C, Self::D];
}

impl fmt::Display for BoundednessCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
            Self::D => "d",
        };
        f.write_str(s)
    }
}

/// Case formula for `C₀` without checking the hypotheses.
pub fn c0_formula(p: &Params, u0_sup: f64, case: BoundednessCase) -> f64 {
    let third = match case {
        BoundednessCase::A => (p.a / (p.effective_damping() - constant_m(p))).powf(1.0 / p.k),
        BoundednessCase::B | BoundednessCase::D => (p.a / p.b).powf(1.0 / (p.gamma - 1.0)),
        BoundednessCase::C => ((p.b - p.a) / (constant_m(p) + p.attraction())).powf(1.0 / p.k),
    };
    1f64.max(u0_sup).max(third)
}

/// The a-priori bound `C₀` of the given case; errors name the failed hypothesis.
pub fn bound_c0(p: &Params, u0_sup: f64, case: BoundednessCase) -> Result<f64> {
    if let Some(failed) = case_checks(p, u0_sup, case, DEFAULT_EQ_TOL)
        .into_iter()
        .find(|c| !c.holds)
    {
        return Err(Error::Precondition(format!(
            "case ({case}) hypothesis fails: {failed}"
        )));
    }
    Ok(c0_formula(p, u0_sup, case))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

/// `u* = (a/b)^{1/(γ−1)}`, `v* = μ₁u*^k/λ₁`, `w* = μ₂u*^k/λ₂`.
pub fn equilibrium(p: &Params) -> Equilibrium {
    let u = (p.a / p.b).powf(1.0 / (p.gamma - 1.0));
    let uk = u.powf(p.k);
    Equilibrium {
        u,
        v: p.mu1 * uk / p.lambda1,
        w: p.mu2 * uk / p.lambda2,
    }
}

/// Bound `M₁` on `v`, `w` and their gradients along a moving frame.
pub fn constant_m1(p: &Params, c0: f64) -> f64 {
    let n = p.dim as f64;
    let ck = c0.powf(p.k);
    [(p.mu1, p.lambda1), (p.mu2, p.lambda2)]
        .iter()
        .map(|&(mu, la)| {
            let first = mu / la + mu * ck / (la * PI.powf(0.5 * n));
            let second = mu / la.sqrt() + mu * ck / la.sqrt() * PI.powf(0.5 * (1.0 - n));
            first.max(second)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    pub m: f64,
    pub h: f64,
    /// `C₀` for every case whose hypotheses hold.
    pub c0: Vec<(BoundednessCase, f64)>,
    /// `M₁` evaluated with the smallest valid `C₀` (or `max(1, ‖u₀‖)` if none).
    pub m1: f64,
    pub equilibrium: Equilibrium,
}

impl Constants {
    pub fn smallest_c0(&self) -> Option<f64> {
        self.c0.iter().map(|c| c.1).reduce(f64::min)
    }
}

pub fn constants(p: &Params, u0_sup: f64, tol: f64) -> Constants {
    let c0: Vec<_> = BoundednessCase::ALL
        .iter()
        .filter(|&&case| case_checks(p, u0_sup, case, tol).iter().all(|c| c.holds))
        .map(|&case| (case, c0_formula(p, u0_sup, case)))
        .collect();
    let base = c0
        .iter()
        .map(|c| c.1)
        .reduce(f64::min)
        .unwrap_or(1f64.max(u0_sup));
    Constants {
        m: constant_m(p),
        h: constant_h(p),
        m1: constant_m1(p, base),
        c0,
        equilibrium: equilibrium(p),
    }
}

/// Values of the lower solution `w̄' = w̄(a − Z − b w̄^{γ−1} + (χ₁μ₁ − χ₂μ₂) w̄^k)`
/// at `times`, starting from `w̄(0) = w0`.
pub fn lower_ode(p: &Params, z: f64, w0: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(w0 > 0.0) {
        return Err(Error::Precondition(format!(
            "lower ODE needs w0 > 0, got {w0}"
        )));
    }
    let drift = p.attraction() - p.repulsion();
    let rhs = |_t: f64, w: f64| {
        let w = w.max(0.0);
        w * (p.a - z - p.b * w.powf(p.gamma - 1.0) + drift * w.powf(p.k))
    };
    let out = solve_scalar(rhs, 0.0, w0, times, OdeOptions::default())?;
    let guaranteed = if p.is_critical() {
        p.effective_damping() > 0.0
    } else {
        p.b > 0.0
    };
    if guaranteed {
        if let Some((i, w)) = out.iter().enumerate().find(|(_, w)| **w <= 0.0) {
            return Err(Error::OracleInconsistency(format!(
                "lower ODE reached {w:e} at t = {} although positivity is guaranteed",
                times[i]
            )));
        }
    }
    Ok(out)
}

/// The homogeneous reduction `u' = a u − b u^γ` sampled at `times`.
pub fn reaction_ode(p: &Params, u0: f64, times: &[f64]) -> Result<Vec<f64>> {
    let rhs = |_t: f64, u: f64| {
        let u = u.max(0.0);
        p.a * u - p.b * u.powf(p.gamma)
    };
    solve_scalar(rhs, 0.0, u0, times, OdeOptions::default())
}

/// Long-time limits `(upper, lower)` of the bracket ODEs for given
/// `ū ≥ u̲ ≥ 0`. Both branches of the chemotactic coupling bound are
/// evaluated and the tighter pair returned.
pub fn bracket_ode_limits(p: &Params, u_bar: f64, u_under: f64, eps: f64) -> Result<(f64, f64)> {
    let damping = p.effective_damping();
    if !(damping > 0.0) {
        return Err(Error::Precondition(format!(
            "bracket limits need b + χ₂μ₂ − χ₁μ₁ > 0, got {damping}"
        )));
    }
    if !(u_bar >= u_under && u_under >= 0.0) {
        return Err(Error::Precondition(format!(
            "bracket limits need u_bar >= u_under >= 0, got {u_bar}, {u_under}"
        )));
    }
    let hi = (u_bar + eps).powf(p.k);
    let lo = pos(u_under - eps).powf(p.k);
    let expo = 1.0 / (p.gamma - 1.0);
    let (g1, g2) = m_branches(p);
    let limits = |g: f64| {
        let spread = g * (hi - lo);
        let upper = ((p.a + spread) / damping).powf(expo);
        let lower = pos((p.a - spread) / damping).powf(expo);
        (upper, lower)
    };
    let (u1, l1) = limits(g1);
    let (u2, l2) = limits(g2);
    Ok((u1.min(u2), l1.max(l2)))
}

#[derive(Debug, Clone, Copy)]
pub struct BracketIteration {
    pub upper: f64,
    pub lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `(ū, u̲) ↦ bracket_ode_limits(ū, u̲, 0)` until the pair stops moving.
pub fn bracket_iteration(
    p: &Params,
    u_bar: f64,
    u_under: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BracketIteration> {
    let (mut hi, mut lo) = (u_bar, u_under);
    for it in 1..=max_iter {
        let (nh, nl) = bracket_ode_limits(p, hi, lo, 0.0)?;
        let moved = (nh - hi).abs().max((nl - lo).abs());
        hi = nh;
        lo = nl.min(nh);
        if moved <= tol * hi.max(1.0) {
            return Ok(BracketIteration {
                upper: hi,
                lower: lo,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(BracketIteration {
        upper: hi,
        lower: lo,
        iterations: max_iter,
        converged: false,
    })
}
