use crate::error::{Error, Result};

/// Coefficients of the coupled system
///
/// ```text
/// u_t = -(-Δ)^α u - χ₁∇·(u∇v) + χ₂∇·(u∇w) + a u - b u^γ
/// 0   = Δv - λ₁v + μ₁u^k
/// 0   = Δw - λ₂w + μ₂u^k
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub dim: usize,
    pub alpha: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub k: f64,
}

impl Params {
    /// Checks every range; the error names the violated field and interval.
    pub fn validate(&self) -> Result<()> {
        fn fail(msg: String) -> Result<()> {
            Err(Error::Parameter(msg))
        }
        let finite = [
            ("alpha", self.alpha),
            ("chi1", self.chi1),
            ("chi2", self.chi2),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("a", self.a),
            ("b", self.b),
            ("gamma", self.gamma),
            ("k", self.k),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return fail(format!("{name} must be finite, got {v}"));
            }
        }
        if self.dim != 1 && self.dim != 2 {
            return fail(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return fail(format!("alpha ∈ (1/2, 1) required, got {}", self.alpha));
        }
        for (name, v) in [("chi1", self.chi1), ("chi2", self.chi2)] {
            if v < 0.0 {
                return fail(format!("{name} ≥ 0 required, got {v}"));
            }
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("a", self.a),
            ("b", self.b),
        ] {
            if v <= 0.0 {
                return fail(format!("{name} > 0 required, got {v}"));
            }
        }
        if self.gamma <= 1.0 {
            return fail(format!("gamma > 1 required, got {}", self.gamma));
        }
        if self.k < 1.0 {
            return fail(format!("k ≥ 1 required, got {}", self.k));
        }
        Ok(())
    }

    /// χ₁μ₁, the attraction strength.
    pub fn attraction(&self) -> f64 {
        self.chi1 * self.mu1
    }

    /// χ₂μ₂, the repulsion strength.
    pub fn repulsion(&self) -> f64 {
        self.chi2 * self.mu2
    }

    /// `b + χ₂μ₂ − χ₁μ₁`.
    pub fn effective_damping(&self) -> f64 {
        self.b + self.repulsion() - self.attraction()
    }

    pub fn is_critical(&self) -> bool {
        rel_eq(self.gamma, self.k + 1.0, 1e-12)
    }

    /// χ₁μ₁ = χ₂μ₂ and λ₁ = λ₂ up to relative tolerance `tol` (0 = exact).
    pub fn is_balanced(&self, tol: f64) -> bool {
        rel_eq(self.attraction(), self.repulsion(), tol) && rel_eq(self.lambda1, self.lambda2, tol)
    }
}

pub(crate) fn rel_eq(x: f64, y: f64, tol: f64) -> bool {
    if tol == 0.0 {
        return x == y;
    }
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
pub(crate) fn sample_params() -> Params {
    Params {
        dim: 1,
        alpha: 0.75,
        chi1: 1.0,
        chi2: 1.0,
        lambda1: 1.0,
        lambda2: 1.0,
        mu1: 1.0,
        mu2: 1.0,
        a: 1.0,
        b: 1.0,
        gamma: 2.0,
        k: 1.0,
    }
}
