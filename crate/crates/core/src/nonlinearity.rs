//! Polynomial nonlinearities `f(x, u) = sum_k g_k(x) u^k` and boundary data.
//!
//! The PDE is always `-Δu + f(x, u) = 0`. Problems written in right-hand-side
//! form `-Δu = h(x, u)` are converted by negation (`f = -h`), which the config
//! layer does for you.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Segment;

/// Highest power of `u` accepted in a nonlinearity.
pub const MAX_DEGREE: usize = 12;

/// Default upper bound on `alpha / beta` for Robin segments.
pub const DEFAULT_ROBIN_BOUND: f64 = 1e8;

/// Spatial coefficient of one power of `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefFn {
    Constant { c: f64 },
    /// `c * |x|^r` in the first coordinate.
    PowerAbs { c: f64, r: f64 },
    /// `s * sin(pi x) sin(pi y)`.
    SineProduct { s: f64 },
    /// `sum_j coeffs[j] * x^j` in the first coordinate.
    PolyX { coeffs: Vec<f64> },
}

impl CoefFn {
    pub fn constant(c: f64) -> Self {
        CoefFn::Constant { c }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            CoefFn::Constant { c } => *c,
            CoefFn::PowerAbs { c, r } => c * x[0].abs().powf(*r),
            CoefFn::SineProduct { s } => s * (PI * x[0]).sin() * (PI * x[1]).sin(),
            CoefFn::PolyX { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c),
        }
    }

    /// Polynomial degree in `x` used to size quadrature rules. Non-polynomial
    /// coefficients report the degree whose rule is used for them.
    pub fn quadrature_degree(&self) -> usize {
        match self {
            CoefFn::Constant { .. } => 0,
            CoefFn::PowerAbs { r, .. } => {
                if r.fract() == 0.0 {
                    *r as usize
                } else {
                    r.ceil() as usize + 2
                }
            }
            CoefFn::SineProduct { .. } => 6,
            CoefFn::PolyX { coeffs } => coeffs.len().saturating_sub(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            CoefFn::Constant { c } => c.is_finite(),
            CoefFn::PowerAbs { c, r } => {
                if *r < 0.0 {
                    return Err(Error::InvalidInput(format!("power_abs exponent r = {r} must be >= 0")));
                }
                c.is_finite() && r.is_finite()
            }
            CoefFn::SineProduct { s } => s.is_finite(),
            CoefFn::PolyX { coeffs } => coeffs.iter().all(|c| c.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("non-finite coefficient in {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub power: usize,
    pub coef: CoefFn,
}

/// `f(x, u) = sum over terms of coef(x) * u^power`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PolyNonlinearity {
    pub terms: Vec<Term>,
}

impl PolyNonlinearity {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let nl = PolyNonlinearity { terms };
        nl.validate()?;
        Ok(nl)
    }

    pub fn term(mut self, power: usize, coef: CoefFn) -> Self {
        self.terms.push(Term { power, coef });
        self
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    pub fn quadrature_degree(&self) -> usize {
        self.terms.iter().map(|t| t.coef.quadrature_degree()).max().unwrap_or(0)
    }

    pub fn is_nonlinear(&self) -> bool {
        self.terms.iter().any(|t| t.power >= 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree() > MAX_DEGREE {
            return Err(Error::InvalidInput(format!(
                "nonlinearity degree {} exceeds the maximum of {MAX_DEGREE}",
                self.degree()
            )));
        }
        for t in &self.terms {
            t.coef.validate()?;
        }
        if !self.is_nonlinear() {
            log::warn!("nonlinearity has no term of degree >= 2; the problem is linear");
        }
        Ok(())
    }

    /// Coefficients `g_0(x), ..., g_m(x)`.
    pub fn coefficients_at(&self, x: [f64; 2]) -> Vec<f64> {
        let mut c = vec![0.0; self.degree() + 1];
        for t in &self.terms {
            c[t.power] += t.coef.eval(x);
        }
        c
    }

    pub fn eval_f(&self, x: [f64; 2], u: f64) -> f64 {
        self.terms.iter().map(|t| t.coef.eval(x) * u.powi(t.power as i32)).sum()
    }

    pub fn eval_df(&self, x: [f64; 2], u: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.power > 0)
            .map(|t| t.power as f64 * t.coef.eval(x) * u.powi(t.power as i32 - 1))
            .sum()
    }
}

/// Horner evaluation of `sum c[k] u^k` and its derivative.
#[inline]
pub(crate) fn horner_with_derivative(c: &[f64], u: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ck in c.iter().rev() {
        dp = dp * u + p;
        p = p * u + ck;
    }
    (p, dp)
}

#[inline]
pub(crate) fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * u + ck)
}

/// Condition on one boundary segment.
///
/// Neumann and Robin data enter the weak form as
/// `+ int (alpha/beta) u v ds - int g v ds`, i.e. `du/dn + (alpha/beta) u = g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet { value: f64 },
    Neumann { g: f64 },
    Robin { alpha_over_beta: f64, g: f64 },
}

/// Boundary conditions per segment. Segments without an entry are
/// homogeneous Neumann.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BoundarySpec {
    pub conditions: Vec<(Segment, BoundaryCondition)>,
}

impl BoundarySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(bc: BoundaryCondition) -> Self {
        BoundarySpec { conditions: Segment::ALL.iter().map(|&s| (s, bc)).collect() }
    }

    pub fn with(mut self, segment: Segment, bc: BoundaryCondition) -> Self {
        self.conditions.retain(|(s, _)| *s != segment);
        self.conditions.push((segment, bc));
        self
    }

    pub fn get(&self, segment: Segment) -> Option<&BoundaryCondition> {
        self.conditions.iter().find(|(s, _)| *s == segment).map(|(_, bc)| bc)
    }

    pub fn dirichlet_value(&self, segment: Segment) -> Option<f64> {
        match self.get(segment) {
            Some(BoundaryCondition::Dirichlet { value }) => Some(*value),
            _ => None,
        }
    }

    pub fn validate(&self, robin_bound: f64) -> Result<()> {
        for (seg, bc) in &self.conditions {
            match *bc {
                BoundaryCondition::Robin { alpha_over_beta, g } => {
                    if !(0.0..=robin_bound).contains(&alpha_over_beta) || !g.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "robin condition on {} needs 0 <= alpha/beta <= {robin_bound}, got {alpha_over_beta}",
                            seg.name()
                        )));
                    }
                }
                BoundaryCondition::Dirichlet { value } if !value.is_finite() => {
                    return Err(Error::InvalidInput(format!("non-finite dirichlet value on {}", seg.name())));
                }
                BoundaryCondition::Neumann { g } if !g.is_finite() => {
                    return Err(Error::InvalidInput(format!("non-finite neumann data on {}", seg.name())));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// True when no segment carries a Dirichlet condition.
    pub fn is_pure_natural(&self, segments: &[Segment]) -> bool {
        segments.iter().all(|s| self.dirichlet_value(*s).is_none())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex1() -> PolyNonlinearity {
        // -u'' = 1 + u^4  =>  f = -(1 + u^4)
        PolyNonlinearity::default()
            .term(0, CoefFn::constant(-1.0))
            .term(4, CoefFn::constant(-1.0))
    }

    #[test]
    fn eval_f_examples() {
        assert_eq!(ex1().eval_f([0.3, 0.0], 1.0), -2.0);
        assert_eq!(PolyNonlinearity::default().eval_f([0.1, 0.0], 7.5), 0.0);
        let henon = PolyNonlinearity::default().term(3, CoefFn::PowerAbs { c: -1.0, r: 3.0 });
        assert_eq!(henon.eval_f([0.5, 0.0], 2.0), -1.0);
    }

    #[test]
    fn eval_df_examples() {
        assert_eq!(ex1().eval_df([0.0, 0.0], 1.0), -4.0);
        let sq = PolyNonlinearity::default().term(2, CoefFn::constant(-1.0));
        assert_eq!(sq.eval_df([0.0, 0.0], 3.0), -6.0);
        let c = PolyNonlinearity::default().term(0, CoefFn::constant(5.0));
        assert_eq!(c.eval_df([0.2, 0.0], 3.0), 0.0);
    }

    #[test]
    fn degree_cap() {
        let nl = PolyNonlinearity::default().term(13, CoefFn::constant(1.0));
        assert!(nl.validate().is_err());
        let neg = PolyNonlinearity::default().term(2, CoefFn::PowerAbs { c: 1.0, r: -1.0 });
        assert!(neg.validate().is_err());
    }

    #[test]
    fn robin_bound_checked() {
        let bc = BoundarySpec::new().with(Segment::Left, BoundaryCondition::Robin { alpha_over_beta: -1.0, g: 0.0 });
        assert!(bc.validate(DEFAULT_ROBIN_BOUND).is_err());
        let bc = BoundarySpec::new().with(Segment::Left, BoundaryCondition::Robin { alpha_over_beta: 2.0, g: 0.0 });
        assert!(bc.validate(1.0).is_err());
        assert!(bc.validate(DEFAULT_ROBIN_BOUND).is_ok());
    }

    #[test]
    fn coefficient_library() {
        let s = CoefFn::SineProduct { s: 2.0 };
        assert!((s.eval([0.5, 0.5]) - 2.0).abs() < 1e-15);
        let p = CoefFn::PolyX { coeffs: vec![1.0, -2.0, 3.0] };
        assert_eq!(p.eval([2.0, 9.0]), 1.0 - 4.0 + 12.0);
        assert_eq!(p.quadrature_degree(), 2);
    }

    fn mixed() -> PolyNonlinearity {
        PolyNonlinearity::default()
            .term(0, CoefFn::SineProduct { s: 3.0 })
            .term(1, CoefFn::PolyX { coeffs: vec![0.5, 1.0] })
            .term(2, CoefFn::constant(-1.0))
            .term(3, CoefFn::PowerAbs { c: 0.7, r: 2.5 })
            .term(5, CoefFn::constant(0.01))
    }

    proptest! {
        #[test]
        fn derivative_matches_centered_difference(x in -1.0f64..1.0, y in 0.0f64..1.0, u in -10.0f64..10.0) {
            let nl = mixed();
            let eps = 1e-5 * (1.0 + u.abs());
            let fd = (nl.eval_f([x, y], u + eps) - nl.eval_f([x, y], u - eps)) / (2.0 * eps);
            let df = nl.eval_df([x, y], u);
            prop_assert!((fd - df).abs() <= 1e-6 * df.abs().max(1.0), "fd {fd} vs df {df}");
        }

        #[test]
        fn f_is_exactly_polynomial_in_u(x in -1.0f64..1.0, u in -3.0f64..3.0) {
            let nl = mixed();
            let p = [x, 0.4];
            let c = nl.coefficients_at(p);
            prop_assert_eq!(c.len(), nl.degree() + 1);
            let direct = nl.eval_f(p, u);
            let fitted = horner(&c, u);
            prop_assert!((direct - fitted).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}
