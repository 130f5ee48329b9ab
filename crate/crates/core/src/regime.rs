//! Which boundedness / asymptotic / spreading hypotheses a parameter set meets.

use std::fmt;

use crate::comparison::{
    c0_formula, constant_h, constant_m, equilibrium, BoundednessCase, Equilibrium,
};
use crate::params::{rel_eq, Params};

/// Relative tolerance for equality hypotheses unless `strict` is requested.
pub const DEFAULT_EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Greater,
    GreaterEq,
    Less,
    LessEq,
    Equal,
    NotEqual,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Greater => ">",
            Relation::GreaterEq => ">=",
            Relation::Less => "<",
            Relation::LessEq => "<=",
            Relation::Equal => "=",
            Relation::NotEqual => "!=",
        }
    }
}

/// One inequality `lhs <rel> rhs` with its evaluated margin `lhs − rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub holds: bool,
}

impl Check {
    fn new(label: &str, lhs: f64, relation: Relation, rhs: f64, tol: f64) -> Self {
        let eq = rel_eq(lhs, rhs, tol);
        let holds = match relation {
            Relation::Greater => lhs > rhs && !eq,
            Relation::GreaterEq => lhs >= rhs || eq,
            Relation::Less => lhs < rhs && !eq,
            Relation::LessEq => lhs <= rhs || eq,
            Relation::Equal => eq,
            Relation::NotEqual => !eq,
        };
        Check {
            label: label.to_string(),
            lhs,
            relation,
            rhs,
            holds,
        }
    }

    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} {} {} (margin {:e}) {}",
            self.label,
            self.lhs,
            self.relation.symbol(),
            self.rhs,
            self.margin(),
            if self.holds { "holds" } else { "fails" }
        )
    }
}

use Relation::*;

/// Hypotheses of one boundedness case, evaluated individually.
pub fn case_checks(p: &Params, u0_sup: f64, case: BoundednessCase, tol: f64) -> Vec<Check> {
    let (att, rep) = (p.attraction(), p.repulsion());
    let m = constant_m(p);
    let kp1 = p.k + 1.0;
    match case {
        BoundednessCase::A => vec![
            Check::new("γ >= k+1", p.gamma, GreaterEq, kp1, tol),
            Check::new(
                "b + χ₂μ₂ − χ₁μ₁ − M > 0",
                p.effective_damping() - m,
                Greater,
                0.0,
                0.0,
            ),
        ],
        BoundednessCase::B => vec![
            Check::new("γ < k+1", p.gamma, Less, kp1, tol),
            Check::new(
                "χ₂λ₂μ₂ > χ₁λ₁μ₁",
                rep * p.lambda2,
                Greater,
                att * p.lambda1,
                tol,
            ),
            Check::new("λ₁ > λ₂", p.lambda1, Greater, p.lambda2, tol),
        ],
        BoundednessCase::C => vec![
            Check::new("γ < k+1", p.gamma, Less, kp1, tol),
            Check::new(
                "‖u₀‖ <= ((b−a)/(M+χ₁μ₁))^{1/k}",
                u0_sup,
                LessEq,
                ((p.b - p.a) / (m + att)).powf(1.0 / p.k),
                0.0,
            ),
            Check::new("b > a + M + χ₁μ₁", p.b, Greater, p.a + m + att, 0.0),
        ],
        BoundednessCase::D => vec![
            Check::new("γ != k+1", p.gamma, NotEqual, kp1, tol),
            Check::new("χ₂μ₂ = χ₁μ₁", rep, Equal, att, tol),
            Check::new("λ₁ = λ₂", p.lambda1, Equal, p.lambda2, tol),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessVerdict {
    pub matching: Vec<BoundednessCase>,
    /// Smallest `C₀` among the matching cases.
    pub c0: Option<f64>,
    pub checks: Vec<(BoundednessCase, Check)>,
}

pub fn classify_boundedness(p: &Params, u0_sup: f64, tol: f64) -> BoundednessVerdict {
    let mut matching = Vec::new();
    let mut checks = Vec::new();
    let mut c0: Option<f64> = None;
    for case in BoundednessCase::ALL {
        let cs = case_checks(p, u0_sup, case, tol);
        if cs.iter().all(|c| c.holds) {
            matching.push(case);
            let v = c0_formula(p, u0_sup, case);
            c0 = Some(c0.map_or(v, |c| c.min(v)));
        }
        checks.extend(cs.into_iter().map(|c| (case, c)));
    }
    BoundednessVerdict {
        matching,
        c0,
        checks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticCase {
    A,
    B,
}

impl fmt::Display for AsymptoticCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AsymptoticCase::A => "a",
            AsymptoticCase::B => "b",
        })
    }
}

fn critical_or_balanced(
    p: &Params,
    tol: f64,
    threshold: f64,
    name: &str,
) -> (Option<AsymptoticCase>, Vec<(AsymptoticCase, Check)>) {
    let kp1 = p.k + 1.0;
    let a_checks = vec![
        Check::new("γ = k+1", p.gamma, Equal, kp1, tol),
        Check::new(name, p.effective_damping() - threshold, Greater, 0.0, 0.0),
    ];
    let b_checks = vec![
        Check::new("γ != k+1", p.gamma, NotEqual, kp1, tol),
        Check::new("χ₂μ₂ = χ₁μ₁", p.repulsion(), Equal, p.attraction(), tol),
        Check::new("λ₁ = λ₂", p.lambda1, Equal, p.lambda2, tol),
    ];
    let case = if a_checks.iter().all(|c| c.holds) {
        Some(AsymptoticCase::A)
    } else if b_checks.iter().all(|c| c.holds) {
        Some(AsymptoticCase::B)
    } else {
        None
    };
    let checks = a_checks
        .into_iter()
        .map(|c| (AsymptoticCase::A, c))
        .chain(b_checks.into_iter().map(|c| (AsymptoticCase::B, c)))
        .collect();
    (case, checks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticVerdict {
    pub case: Option<AsymptoticCase>,
    pub equilibrium: Equilibrium,
    pub checks: Vec<(AsymptoticCase, Check)>,
}

/// Convergence to the constant equilibrium: (a) critical with
/// `b + χ₂μ₂ − χ₁μ₁ − H > 0`, (b) non-critical and balanced.
pub fn classify_asymptotics(p: &Params, tol: f64) -> AsymptoticVerdict {
    let (case, checks) = critical_or_balanced(p, tol, constant_h(p), "b + χ₂μ₂ − χ₁μ₁ − H > 0");
    AsymptoticVerdict {
        case,
        equilibrium: equilibrium(p),
        checks,
    }
}

/// Spreading case: same shape as the asymptotic one but with `M` in place of `H`.
pub fn speed_case(p: &Params, tol: f64) -> (Option<AsymptoticCase>, Vec<(AsymptoticCase, Check)>) {
    critical_or_balanced(p, tol, constant_m(p), "b + χ₂μ₂ − χ₁μ₁ − M > 0")
}

/// `(lower, upper)` exponential rates; `upper` is infinite when neither
/// spreading case applies.
pub fn predicted_speed_bounds(p: &Params, c0: f64, tol: f64) -> (f64, f64) {
    let denom = p.dim as f64 + 2.0 * p.alpha;
    let lower = p.a / denom;
    let upper = match speed_case(p, tol).0 {
        Some(AsymptoticCase::A) => (p.a + constant_m(p) * c0.powf(p.k)) / denom,
        Some(AsymptoticCase::B) => lower,
        None => f64::INFINITY,
    };
    (lower, upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeVerdict {
    pub boundedness: BoundednessVerdict,
    pub asymptotics: AsymptoticVerdict,
    pub speed_case: Option<AsymptoticCase>,
    pub speed_lower: f64,
    pub speed_upper: f64,
}

impl RegimeVerdict {
    /// First matching boundedness case.
    pub fn boundedness_case(&self) -> Option<BoundednessCase> {
        self.boundedness.matching.first().copied()
    }

    pub fn c0(&self) -> Option<f64> {
        self.boundedness.c0
    }

    fn all_checks(&self) -> Vec<(String, &Check)> {
        let mut out: Vec<(String, &Check)> = self
            .boundedness
            .checks
            .iter()
            .map(|(c, chk)| (format!("boundedness_{c}"), chk))
            .collect();
        out.extend(
            self.asymptotics
                .checks
                .iter()
                .map(|(c, chk)| (format!("asymptotics_{c}"), chk)),
        );
        out
    }

    /// Plain-text verdict.
    pub fn render_text(&self) -> String {
        let list = |v: &[BoundednessCase]| {
            if v.is_empty() {
                "none".to_string()
            } else {
                v.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            }
        };
        let opt = |c: Option<AsymptoticCase>| c.map_or("none".to_string(), |c| c.to_string());
        let mut s = String::new();
        s.push_str(&format!(
            "boundedness_case = {}\n",
            list(&self.boundedness.matching)
        ));
        match self.c0() {
            Some(c) => s.push_str(&format!("C0 = {c}\n")),
            None => s.push_str("C0 = absent\n"),
        }
        s.push_str(&format!(
            "asymptotic_case = {}\n",
            opt(self.asymptotics.case)
        ));
        let e = self.asymptotics.equilibrium;
        s.push_str(&format!("equilibrium = ({}, {}, {})\n", e.u, e.v, e.w));
        s.push_str(&format!("speed_case = {}\n", opt(self.speed_case)));
        s.push_str(&format!("speed_lower = {}\n", self.speed_lower));
        s.push_str(&format!("speed_upper = {}\n", self.speed_upper));
        for (group, c) in self.all_checks() {
            s.push_str(&format!("[{group}] {c}\n"));
        }
        s
    }

    /// CSV of every inequality: `group,label,lhs,relation,rhs,margin,holds`.
    pub fn render_csv(&self) -> String {
        let mut s = String::from("group,label,lhs,relation,rhs,margin,holds\n");
        for (group, c) in self.all_checks() {
            s.push_str(&format!(
                "{group},\"{}\",{},{},{},{},{}\n",
                c.label,
                c.lhs,
                c.relation.symbol(),
                c.rhs,
                c.margin(),
                c.holds
            ));
        }
        s
    }
}

/// Full verdict. `strict` turns the equality tolerance off.
pub fn classify(p: &Params, u0_sup: f64, strict: bool) -> RegimeVerdict {
    let tol = if strict { 0.0 } else { DEFAULT_EQ_TOL };
    let boundedness = classify_boundedness(p, u0_sup, tol);
    let asymptotics = classify_asymptotics(p, tol);
    let (speed_case, _) = speed_case(p, tol);
    let c0 = boundedness.c0.unwrap_or(1f64.max(u0_sup));
    let (speed_lower, speed_upper) = predicted_speed_bounds(p, c0, tol);
    RegimeVerdict {
        boundedness,
        asymptotics,
        speed_case,
        speed_lower,
        speed_upper,
    }
}

/// Table 1 row (1–4) for a parameter set, by the signs of
/// `χ₂λ₂μ₂ − χ₁λ₁μ₁` and `λ₁ − λ₂`.
pub fn table1_row(p: &Params) -> usize {
    let repulsive = p.repulsion() * p.lambda2 >= p.attraction() * p.lambda1;
    let wide = p.lambda1 >= p.lambda2;
    match (repulsive, wide) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 4,
    }
}

/// Threshold on `b` as printed in Table 1 for the given row and column
/// (`BoundednessCase::A` or `BoundednessCase::C`).
pub fn table1_threshold(p: &Params, row: usize, column: BoundednessCase) -> f64 {
    let (att, rep) = (p.attraction(), p.repulsion());
    let (l1, l2) = (p.lambda1, p.lambda2);
    let a_col = match row {
        1 => 0.0,
        2 => att * (1.0 - l1 / l2),
        3 => att - rep * l2 / l1,
        4 => att - rep,
        _ => panic!("Table 1 has rows 1-4, got {row}"),
    };
    match column {
        BoundednessCase::A => a_col,
        BoundednessCase::C => match row {
            1 => p.a + rep,
            2 => p.a + att * (1.0 - l1 / l2) + rep,
            3 => p.a + att + rep * (1.0 - l2 / l1),
            _ => p.a + att,
        },
        _ => panic!("Table 1 has columns (a) and (c) only"),
    }
}

/// Threshold on `b` implied by the general formulas: `χ₁μ₁ − χ₂μ₂ + M` for
/// column (a), `a + M + χ₁μ₁` for column (c).
pub fn formula_threshold(p: &Params, column: BoundednessCase) -> f64 {
    let m = constant_m(p);
    match column {
        BoundednessCase::A => p.attraction() - p.repulsion() + m,
        BoundednessCase::C => p.a + m + p.attraction(),
        _ => panic!("only columns (a) and (c) carry a threshold on b"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::sample_params;

    fn base() -> Params {
        sample_params()
    }

    #[test]
    fn table_row_one_case_a() {
        let p = Params {
            gamma: 3.0,
            k: 2.0,
            chi2: 2.0,
            lambda1: 1.5,
            b: 0.1,
            ..base()
        };
        assert_eq!(table1_row(&p), 1);
        assert!(classify_boundedness(&p, 1.0, DEFAULT_EQ_TOL)
            .matching
            .contains(&BoundednessCase::A));
    }

    #[test]
    fn table_row_two_threshold() {
        let p = Params {
            gamma: 3.0,
            k: 2.0,
            lambda1: 1.0,
            lambda2: 2.0,
            b: 0.6,
            ..base()
        };
        assert_eq!(table1_row(&p), 2);
        assert!((table1_threshold(&p, 2, BoundednessCase::A) - 0.5).abs() < 1e-15);
        assert!(classify_boundedness(&p, 1.0, DEFAULT_EQ_TOL)
            .matching
            .contains(&BoundednessCase::A));
        let q = Params { b: 0.4, ..p };
        assert!(!classify_boundedness(&q, 1.0, DEFAULT_EQ_TOL)
            .matching
            .contains(&BoundednessCase::A));
    }

    #[test]
    fn table_row_four_case_c() {
        let p = Params {
            gamma: 2.0,
            k: 2.0,
            chi2: 0.4,
            lambda1: 1.0,
            lambda2: 2.0,
            b: 2.5,
            ..base()
        };
        assert_eq!(table1_row(&p), 4);
        let v = classify_boundedness(&p, 1.0, DEFAULT_EQ_TOL);
        assert!(v.matching.contains(&BoundednessCase::C), "{:?}", v.checks);
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(
            classify_asymptotics(&base(), 1e-12).case,
            Some(AsymptoticCase::A)
        );
        let p = Params {
            gamma: 2.5,
            ..base()
        };
        assert_eq!(
            classify_asymptotics(&p, 1e-12).case,
            Some(AsymptoticCase::B)
        );
        let p = Params {
            chi2: 2.0,
            lambda1: 2.0,
            lambda2: 1.0,
            b: 0.5,
            ..base()
        };
        assert_eq!(
            classify_asymptotics(&p, 1e-12).case,
            Some(AsymptoticCase::A)
        );
    }

    #[test]
    fn speed_examples() {
        let p = Params {
            gamma: 2.5,
            ..base()
        };
        let (lo, hi) = predicted_speed_bounds(&p, 1.0, 1e-12);
        assert!((lo - 0.4).abs() < 1e-15 && (hi - 0.4).abs() < 1e-15);
        let p = Params {
            chi2: 2.0,
            lambda1: 2.0,
            ..base()
        };
        assert_eq!(constant_m(&p), 1.0);
        let (lo, hi) = predicted_speed_bounds(&p, 1.0, 1e-12);
        assert!((lo - 0.4).abs() < 1e-15 && (hi - 0.8).abs() < 1e-15);
        let (lo, hi) = predicted_speed_bounds(&base(), 3.0, 1e-12);
        assert_eq!(lo, hi);
    }

    #[test]
    fn strict_mode_rejects_near_equality() {
        let p = Params {
            gamma: 2.5,
            mu2: 1.0 + 1e-14,
            ..base()
        };
        assert!(classify(&p, 1.0, false)
            .boundedness
            .matching
            .contains(&BoundednessCase::D));
        assert!(!classify(&p, 1.0, true)
            .boundedness
            .matching
            .contains(&BoundednessCase::D));
    }

    #[test]
    fn verdict_rendering_is_deterministic() {
        let p = Params {
            gamma: 2.5,
            ..base()
        };
        let a = classify(&p, 1.2, false);
        let b = classify(&p, 1.2, false);
        assert_eq!(a.render_text(), b.render_text());
        assert_eq!(a.render_csv(), b.render_csv());
        // balanced with γ > k+1: both (a) and (d) hold, with the same C₀
        assert!(a
            .render_text()
            .contains("boundedness_case = a,d\nC0 = 1.2\n"));
        assert_eq!(a.boundedness_case(), Some(BoundednessCase::A));
    }
}
