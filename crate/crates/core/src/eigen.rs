//! Restricted fractional Dirichlet Laplacian on `(−l, l)` and its drifted variant.
//!
//! Interior nodes `x_j = −l + j h`, `h = 2l/(n+1)`, `j = 1..=n`; `u` vanishes
//! outside the interval. The hypersingular integral is split into the
//! singular cell pair `|z| < h` (second-difference Taylor term), the remaining
//! cells (exact product integration against the piecewise-linear
//! interpolant) and the exterior (closed form).

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// `c_{1,α} = α 4^α Γ(1/2+α) / (√π Γ(1−α))`.
pub fn fractional_constant(alpha: f64) -> f64 {
    alpha * 4f64.powf(alpha) * gamma(0.5 + alpha)
        / (std::f64::consts::PI.sqrt() * gamma(1.0 - alpha))
}

#[derive(Debug, Clone)]
pub struct DirichletOperator {
    pub l: f64,
    pub n: usize,
    pub alpha: f64,
    pub matrix: DMatrix<f64>,
}

impl DirichletOperator {
    pub fn spacing(&self) -> f64 {
        2.0 * self.l / (self.n + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.n).map(|j| -self.l + j as f64 * h).collect()
    }
}

pub fn assemble_restricted(l: f64, n: usize, alpha: f64) -> Result<DirichletOperator> {
    if n < 32 {
        return Err(Error::Parameter(format!(
            "need at least 32 interior points, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Parameter(format!(
            "half-width must be positive, got {l}"
        )));
    }
    let h = 2.0 * l / (n + 1) as f64;
    let s = 2.0 * alpha;
    // Weights of the cell at distance [m h, (m+1) h], m >= 1:
    // (∫ z^{-1-2α}, weight of the near node, weight of the far node).
    let cell = |m: usize| -> (f64, f64, f64) {
        let (za, zb) = (m as f64 * h, (m + 1) as f64 * h);
        let w0 = (za.powf(-s) - zb.powf(-s)) / s;
        let i1 = if (1.0 - s).abs() < 1e-14 {
            (zb / za).ln()
        } else {
            (zb.powf(1.0 - s) - za.powf(1.0 - s)) / (1.0 - s)
        };
        let far = (i1 - za * w0) / h;
        (w0, w0 - far, far)
    };
    let cells: Vec<(f64, f64, f64)> = (0..=n)
        .map(|m| if m == 0 { (0.0, 0.0, 0.0) } else { cell(m) })
        .collect();
    let singular = h.powf(-s) / (2.0 - s);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let node = i + 1;
        let x = -l + node as f64 * h;
        a[(i, i)] += 2.0 * singular + ((l - x).powf(-s) + (l + x).powf(-s)) / s;
        if i > 0 {
            a[(i, i - 1)] -= singular;
        }
        if i + 1 < n {
            a[(i, i + 1)] -= singular;
        }
        // right cells [x_j, x_{j+1}] for node+1 <= j <= n
        for j in (node + 1)..=n {
            let (w0, near, far) = cells[j - node];
            a[(i, i)] += w0;
            a[(i, j - 1)] -= near;
            if j < n {
                a[(i, j)] -= far;
            }
        }
        // left cells [x_{j-1}, x_j] for 1 <= j <= node-1
        for j in 1..node {
            let (w0, near, far) = cells[node - j];
            a[(i, i)] += w0;
            a[(i, j - 1)] -= near;
            if j > 1 {
                a[(i, j - 2)] -= far;
            }
        }
    }
    a *= fractional_constant(alpha);
    Ok(DirichletOperator {
        l,
        n,
        alpha,
        matrix: a,
    })
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Nonnegative, max-normalised eigenvector on the interior nodes.
    pub phi: Vec<f64>,
    pub second: f64,
    pub residual: f64,
}

impl Eigenpair {
    pub fn relative_gap(&self) -> f64 {
        (self.second - self.lambda) / self.lambda
    }
}

const MAX_ITER: usize = 500;
const TOL: f64 = 1e-10;

fn rayleigh(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x)) / x.dot(x)
}

fn relative_residual(a: &DMatrix<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    (a * x - x * lambda).norm() / (lambda.abs() * x.norm())
}

/// Inverse iteration, optionally orthogonal to `deflate`.
fn inverse_iteration(
    a: &DMatrix<f64>,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    deflate: Option<&DVector<f64>>,
) -> Result<(f64, DVector<f64>, f64)> {
    let n = a.nrows();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7 % 13) as f64));
    let project = |x: &mut DVector<f64>| {
        if let Some(d) = deflate {
            let c = x.dot(d) / d.dot(d);
            *x -= d * c;
        }
    };
    project(&mut x);
    x.normalize_mut();
    let mut residual = f64::INFINITY;
    let mut lambda = rayleigh(a, &x);
    for _ in 0..MAX_ITER {
        let mut y = lu.solve(&x).ok_or(Error::Convergence {
            residual: f64::INFINITY,
        })?;
        project(&mut y);
        y.normalize_mut();
        lambda = rayleigh(a, &y);
        let mut r = a * &y - &y * lambda;
        if let Some(d) = deflate {
            let c = r.dot(d) / d.dot(d);
            r -= d * c;
        }
        residual = r.norm() / lambda.abs();
        x = y;
        if residual < TOL {
            return Ok((lambda, x, residual));
        }
    }
    if residual < 1e3 * TOL {
        return Ok((lambda, x, residual));
    }
    Err(Error::Convergence { residual })
}

/// Smallest eigenvalue, its nonnegative eigenvector and the second eigenvalue.
pub fn principal_eigenpair(op: &DirichletOperator) -> Result<Eigenpair> {
    let a = &op.matrix;
    let lu = a.clone().lu();
    let (lambda, mut v, _) = inverse_iteration(a, &lu, None)?;
    if v.sum() < 0.0 {
        v = -v;
    }
    let residual = relative_residual(a, &v, lambda);
    let (second, _, _) = inverse_iteration(a, &lu, Some(&v))?;
    let max = v.iter().copied().fold(0.0, f64::max);
    let phi = v.iter().map(|x| (x / max).max(0.0)).collect();
    Ok(Eigenpair {
        lambda,
        phi,
        second,
        residual,
    })
}

/// Upwinded matrix of `(−Δ)^α u − d·u'` with `d = c·ξ·e^{ξ T̃₀}`.
pub fn drifted_matrix(op: &DirichletOperator, c: f64, xi: f64, t0_tilde: f64) -> DMatrix<f64> {
    let d = c * xi * (xi * t0_tilde).exp();
    let h = op.spacing();
    let mut b = op.matrix.clone();
    let n = op.n;
    for i in 0..n {
        if d > 0.0 {
            b[(i, i)] += d / h;
            if i + 1 < n {
                b[(i, i + 1)] -= d / h;
            }
        } else if d < 0.0 {
            b[(i, i)] -= d / h;
            if i > 0 {
                b[(i, i - 1)] += d / h;
            }
        }
    }
    b
}

/// Principal eigenvalue of `(−Δ)^α − c ξ e^{ξ T̃₀} ∂ₓ − ā` on `(−l, l)`.
///
/// The upwinded matrix is an M-matrix, so its principal eigenvalue is real
/// and found by power iteration on the inverse.
pub fn drifted_principal_eigen(
    op: &DirichletOperator,
    c: f64,
    xi: f64,
    a_bar: f64,
    t0_tilde: f64,
) -> Result<f64> {
    if xi != 1.0 && xi != -1.0 {
        return Err(Error::Parameter(format!("xi must be ±1, got {xi}")));
    }
    let b = drifted_matrix(op, c, xi, t0_tilde);
    let n = op.n;
    let lu = b.clone().lu();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut mu_prev = f64::NAN;
    for _ in 0..2 * MAX_ITER {
        let y = lu.solve(&x).ok_or(Error::Convergence {
            residual: f64::INFINITY,
        })?;
        let mu = y.norm();
        let y = y / mu;
        let lambda = 1.0 / mu;
        let residual = (&b * &y - &y * lambda).norm() / lambda.abs();
        x = y;
        if residual < TOL {
            return Ok(lambda - a_bar);
        }
        mu_prev = mu;
    }
    let lambda = 1.0 / mu_prev;
    let residual = (&b * &x - &x * lambda).norm() / lambda.abs();
    if residual < 1e-8 {
        return Ok(lambda - a_bar);
    }
    Err(Error::Discretization(format!(
        "power iteration did not settle on a real principal eigenvalue (residual {residual:e}); refine the grid"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matches_known_values() {
        // c_{1,1/2} = 1/π
        assert!((fractional_constant(0.5) - 1.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn matrix_is_symmetric_with_positive_row_sums() {
        let op = assemble_restricted(1.0, 64, 0.75).unwrap();
        let a = &op.matrix;
        assert!((a - a.transpose()).amax() <= 1e-12 * a.amax());
        let h = op.spacing();
        let c = fractional_constant(0.75);
        for (i, x) in op.nodes().iter().enumerate() {
            let row: f64 = a.row(i).sum();
            assert!(row > 0.0);
            // for u ≡ 1 inside, only boundary-adjacent and exterior terms survive
            let exterior = c * ((1.0 - x).powf(-1.5) + (1.0 + x).powf(-1.5)) / 1.5;
            if i > 0 && i + 1 < op.n {
                assert!(
                    row >= exterior * 0.999,
                    "{row} vs {exterior} at {x}, h = {h}"
                );
            }
        }
        assert!(assemble_restricted(1.0, 16, 0.75).is_err());
    }

    #[test]
    fn principal_pair_properties() {
        let op = assemble_restricted(1.0, 128, 0.75).unwrap();
        let e = principal_eigenpair(&op).unwrap();
        assert!(e.lambda > 0.0);
        assert!(e.phi.iter().all(|&p| p >= 0.0));
        assert!((e.phi.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
        assert!(e.relative_gap() > 1e-3);
        let x = DVector::from_vec(e.phi.clone());
        assert!((rayleigh(&op.matrix, &x) - e.lambda).abs() < 1e-8 * e.lambda);
    }

    #[test]
    fn scaling_in_the_half_width() {
        let a = principal_eigenpair(&assemble_restricted(1.0, 128, 0.6).unwrap()).unwrap();
        let b = principal_eigenpair(&assemble_restricted(2.0, 128, 0.6).unwrap()).unwrap();
        assert!((b.lambda / a.lambda - 2f64.powf(-1.2)).abs() < 1e-10);
        let c = principal_eigenpair(&assemble_restricted(1.5, 128, 0.6).unwrap()).unwrap();
        assert!(a.lambda > c.lambda && c.lambda > b.lambda);
    }

    #[test]
    fn near_local_limit() {
        // α → 1: compare with the second-difference Dirichlet Laplacian
        let op = assemble_restricted(1.0, 128, 0.999).unwrap();
        let e = principal_eigenpair(&op).unwrap();
        let h = op.spacing();
        let classic = 4.0 / (h * h) * (std::f64::consts::PI * h / 4.0).sin().powi(2);
        assert!(
            (e.lambda / classic - 1.0).abs() < 0.05,
            "{} vs {classic}",
            e.lambda
        );
    }

    #[test]
    fn drift_examples() {
        let op = assemble_restricted(1.0, 96, 0.75).unwrap();
        let l1 = principal_eigenpair(&op).unwrap().lambda;
        let shifted = drifted_principal_eigen(&op, 0.0, 1.0, l1 + 0.3, 0.0).unwrap();
        assert!((shifted + 0.3).abs() < 1e-8);
        let plain = drifted_principal_eigen(&op, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!((plain - l1).abs() < 1e-8 * l1);
        for c in [-0.2, 0.2] {
            let v = drifted_principal_eigen(&op, c, -1.0, l1 + 0.05, 0.0).unwrap();
            assert!(v < -1e-8, "c = {c}: {v}");
        }
        assert!(drifted_principal_eigen(&op, 0.1, 0.5, 1.0, 0.0).is_err());
    }
}
