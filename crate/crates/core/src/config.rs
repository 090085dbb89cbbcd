//! TOML problem configs.
//!
//! ```toml
//! name = "ex3"
//! levels = 5                      # index of the finest level
//!
//! [parameters]
//! p = 7
//!
//! [domain]
//! kind = "interval"               # or "unit_square"
//! a = 0
//! b = 1
//!
//! [[bc]]                          # unlisted segments are zero-flux
//! segment = "right"
//! type = "dirichlet"              # "neumann" (g) | "robin" (alpha_over_beta, g)
//! value = 0
//!
//! [nonlinearity]
//! form = "rhs"                    # terms give h in −Δu = h(x, u)
//! terms = [ { power = 2, c = "p" }, { power = 4, c = -1 } ]
//!
//! [solver]                        # any FilterConfig field
//! root_mode = "real_parts"
//!
//! [analysis]
//! probe = [0.0, 0.0]
//! oracle_bracket = [0.0, 3.0]
//! sweep = { param = "p", values = [1, 7, 18] }
//! ```
//!
//! Any coefficient may be a number or an expression string over
//! `[parameters]`. Two-field problems use a `[system]` section instead of
//! `[nonlinearity]`.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::cbmfem::FilterConfig;
use crate::error::{Error, Result};
use crate::expr;
use crate::mesh::{Domain, MeshHierarchy, Segment};
use crate::nonlinearity::{BoundaryCondition, BoundarySpec, CoefFn, PolyNonlinearity, Term};
use crate::problem::ProblemSpec;
use crate::systems::{LinearPart, TwoFieldSpec};

const DEFAULT_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum NumOrExpr {
    Value(f64),
    Expr(String),
}

type Num = Spanned<NumOrExpr>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    levels: Option<usize>,
    #[serde(default)]
    parameters: BTreeMap<String, Num>,
    domain: RawDomain,
    #[serde(default)]
    bc: Vec<RawBc>,
    nonlinearity: Option<RawNonlinearity>,
    rhs: Option<RawCoef>,
    system: Option<RawSystem>,
    solver: Option<FilterConfig>,
    analysis: Option<RawAnalysis>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: Spanned<String>,
    a: Option<Num>,
    b: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBc {
    segment: Spanned<String>,
    #[serde(rename = "type")]
    kind: Spanned<String>,
    value: Option<Num>,
    g: Option<Num>,
    alpha_over_beta: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNonlinearity {
    form: Option<Spanned<String>>,
    #[serde(default)]
    terms: Vec<Spanned<RawCoef>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoef {
    power: Option<Spanned<usize>>,
    kind: Option<Spanned<String>>,
    c: Option<Num>,
    r: Option<Num>,
    s: Option<Num>,
    coeffs: Option<Vec<Num>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    kind: Spanned<String>,
    a: Option<Num>,
    b: Option<Num>,
    d: Option<Num>,
    eta: Option<Num>,
    d_a: Option<Num>,
    d_s: Option<Num>,
    mu: Option<Num>,
    rho: Option<Num>,
    d_u: Option<Num>,
    d_v: Option<Num>,
    first: Option<RawLinear>,
    second: Option<RawLinear>,
    coupling: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinear {
    constant: Option<Num>,
    u: Option<Num>,
    v: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    probe: Option<[f64; 2]>,
    oracle_bracket: Option<[f64; 2]>,
    sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

/// A built problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Scalar(ProblemSpec),
    TwoField(TwoFieldSpec),
}

impl Problem {
    pub fn name(&self) -> &str {
        match self {
            Problem::Scalar(p) => &p.name,
            Problem::TwoField(p) => &p.name,
        }
    }

    pub fn domain(&self) -> &Domain {
        match self {
            Problem::Scalar(p) => &p.domain,
            Problem::TwoField(p) => &p.domain,
        }
    }

    pub fn hierarchy(&self, max_level: usize) -> Result<MeshHierarchy> {
        match self {
            Problem::Scalar(p) => p.hierarchy(max_level),
            Problem::TwoField(p) => p.hierarchy(max_level),
        }
    }
}

/// A parsed and validated config.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    source: String,
    origin: String,
    raw: RawConfig,
    pub name: String,
    pub levels: usize,
    pub parameters: BTreeMap<String, f64>,
    pub solver: FilterConfig,
    pub problem: Problem,
    pub probe: [f64; 2],
    pub oracle_bracket: Option<(f64, f64)>,
    pub sweep: Option<SweepSpec>,
}

struct Ctx<'a> {
    source: &'a str,
    origin: &'a str,
    params: &'a BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn err(&self, span: Option<Range<usize>>, msg: impl std::fmt::Display) -> Error {
        Error::Config(match span {
            Some(s) => {
                let (line, col) = line_col(self.source, s.start);
                format!("{}:{line}:{col}: {msg}", self.origin)
            }
            None => format!("{}: {msg}", self.origin),
        })
    }

    fn num(&self, n: &Num) -> Result<f64> {
        match n.get_ref() {
            NumOrExpr::Value(v) if v.is_finite() => Ok(*v),
            NumOrExpr::Value(v) => Err(self.err(Some(n.span()), format!("value {v} is not finite"))),
            NumOrExpr::Expr(src) => {
                expr::eval(src, &|name| self.params.get(name).copied()).map_err(|e| self.err(Some(n.span()), format!("in \"{src}\": {e}")))
            }
        }
    }

    fn req(&self, n: &Option<Num>, what: &str, at: Range<usize>) -> Result<f64> {
        match n {
            Some(n) => self.num(n),
            None => Err(self.err(Some(at), format!("missing {what}"))),
        }
    }

    fn opt(&self, n: &Option<Num>, default: f64) -> Result<f64> {
        n.as_ref().map_or(Ok(default), |n| self.num(n))
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ProblemConfig {
    pub fn from_path(path: &Path) -> Result<ProblemConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
        ProblemConfig::from_str(&text, &path.display().to_string())
    }

    /// Parses `source`; `origin` names it in error messages.
    pub fn from_str(source: &str, origin: &str) -> Result<ProblemConfig> {
        let raw: RawConfig = toml::from_str(source).map_err(|e| {
            let ctx = Ctx { source, origin, params: &BTreeMap::new() };
            ctx.err(e.span(), e.message().trim())
        })?;
        let empty = BTreeMap::new();
        let ctx = Ctx { source, origin, params: &empty };
        let params = raw.parameters.iter().map(|(k, v)| Ok((k.clone(), ctx.num(v)?))).collect::<Result<_>>()?;
        ProblemConfig::build(source.to_string(), origin.to_string(), raw, params)
    }

    fn build(source: String, origin: String, raw: RawConfig, parameters: BTreeMap<String, f64>) -> Result<ProblemConfig> {
        let ctx = Ctx { source: &source, origin: &origin, params: &parameters };
        for (k, v) in &parameters {
            if !v.is_finite() {
                return Err(ctx.err(None, format!("parameter {k} = {v} is not finite")));
            }
        }
        let name = raw.name.clone().unwrap_or_else(|| "problem".into());
        let domain = build_domain(&ctx, &raw.domain)?;
        let problem = match (&raw.system, &raw.nonlinearity) {
            (Some(_), Some(_)) => return Err(ctx.err(None, "[system] and [nonlinearity] are mutually exclusive")),
            (Some(sys), None) => {
                if !raw.bc.is_empty() || raw.rhs.is_some() {
                    return Err(ctx.err(Some(sys.kind.span()), "two-field systems take zero-flux boundaries and no rhs"));
                }
                Problem::TwoField(build_system(&ctx, sys, domain, &name)?)
            }
            (None, nl) => {
                let boundary = build_bc(&ctx, &raw.bc, &domain)?;
                let nonlinearity = build_nonlinearity(&ctx, nl.as_ref(), raw.rhs.as_ref())?;
                Problem::Scalar(ProblemSpec::new(name.clone(), domain, boundary, nonlinearity).map_err(|e| ctx.err(None, e))?)
            }
        };
        let solver = raw.solver.clone().unwrap_or_default();
        solver.validate().map_err(|e| ctx.err(None, e))?;
        let analysis = raw.analysis.clone();
        let probe = analysis.as_ref().and_then(|a| a.probe).unwrap_or(match problem.domain() {
            Domain::Interval { a, .. } => [*a, 0.0],
            Domain::UnitSquare => [0.5, 0.5],
        });
        let oracle_bracket = analysis.as_ref().and_then(|a| a.oracle_bracket).map(|b| (b[0], b[1]));
        let sweep = analysis.and_then(|a| a.sweep);
        if let Some(s) = &sweep {
            if !parameters.contains_key(&s.param) {
                return Err(ctx.err(None, format!("sweep parameter '{}' is not defined in [parameters]", s.param)));
            }
        }
        Ok(ProblemConfig {
            levels: raw.levels.unwrap_or(DEFAULT_LEVELS),
            name,
            parameters,
            solver,
            problem,
            probe,
            oracle_bracket,
            sweep,
            source,
            origin,
            raw,
        })
    }

    /// Rebuilds the problem with some parameters replaced. Every overridden
    /// name must already be defined.
    pub fn with_parameters(&self, overrides: &[(String, f64)]) -> Result<ProblemConfig> {
        let mut params = self.parameters.clone();
        for (k, v) in overrides {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    let known: Vec<&str> = self.parameters.keys().map(String::as_str).collect();
                    let known = if known.is_empty() { "none".to_string() } else { known.join(", ") };
                    return Err(Error::Config(format!("{}: unknown parameter '{k}' (defined: {known})", self.origin)));
                }
            }
        }
        let mut cfg = ProblemConfig::build(self.source.clone(), self.origin.clone(), self.raw.clone(), params)?;
        cfg.levels = self.levels;
        cfg.solver = self.solver.clone();
        cfg.probe = self.probe;
        Ok(cfg)
    }
}

/// Parses `name=value`.
pub fn parse_override(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("parameter override '{s}' is not of the form name=value")))?;
    let v = expr::eval(v.trim(), &|_| None).map_err(|e| Error::Config(format!("parameter override '{s}': {e}")))?;
    Ok((k.trim().to_string(), v))
}

fn build_domain(ctx: &Ctx, d: &RawDomain) -> Result<Domain> {
    let dom = match d.kind.get_ref().as_str() {
        "interval" => Domain::Interval { a: ctx.req(&d.a, "domain.a", d.kind.span())?, b: ctx.req(&d.b, "domain.b", d.kind.span())? },
        "unit_square" => {
            if d.a.is_some() || d.b.is_some() {
                return Err(ctx.err(Some(d.kind.span()), "unit_square takes no endpoints"));
            }
            Domain::UnitSquare
        }
        other => return Err(ctx.err(Some(d.kind.span()), format!("unknown domain kind '{other}' (expected interval or unit_square)"))),
    };
    dom.validate().map_err(|e| ctx.err(Some(d.kind.span()), e))?;
    Ok(dom)
}

fn build_bc(ctx: &Ctx, list: &[RawBc], domain: &Domain) -> Result<BoundarySpec> {
    let allowed: &[Segment] = match domain {
        Domain::Interval { .. } => &[Segment::Left, Segment::Right],
        Domain::UnitSquare => &Segment::ALL,
    };
    let mut spec = BoundarySpec::new();
    for bc in list {
        let segs: Vec<Segment> = match bc.segment.get_ref().as_str() {
            "all" => allowed.to_vec(),
            name => match Segment::from_name(name) {
                Some(s) if allowed.contains(&s) => vec![s],
                _ => return Err(ctx.err(Some(bc.segment.span()), format!("unknown boundary segment '{name}' for this domain"))),
            },
        };
        let at = bc.kind.span();
        let cond = match bc.kind.get_ref().as_str() {
            "dirichlet" => BoundaryCondition::Dirichlet { value: ctx.opt(&bc.value, 0.0)? },
            "neumann" => BoundaryCondition::Neumann { g: ctx.opt(&bc.g, 0.0)? },
            "robin" => BoundaryCondition::Robin {
                alpha_over_beta: ctx.req(&bc.alpha_over_beta, "alpha_over_beta", at.clone())?,
                g: ctx.opt(&bc.g, 0.0)?,
            },
            other => return Err(ctx.err(Some(at), format!("unknown boundary type '{other}' (expected dirichlet, neumann or robin)"))),
        };
        for s in segs {
            if spec.get(s).is_some() {
                return Err(ctx.err(Some(bc.segment.span()), format!("segment {} given twice", s.name())));
            }
            spec = spec.with(s, cond.clone());
        }
    }
    Ok(spec)
}

fn build_coef(ctx: &Ctx, c: &RawCoef, at: Range<usize>) -> Result<CoefFn> {
    let kind = c.kind.as_ref().map_or("constant", |k| k.get_ref().as_str());
    let at = c.kind.as_ref().map_or(at, |k| k.span());
    let unused = |names: &[(&str, bool)]| -> Result<()> {
        for (n, present) in names {
            if *present {
                return Err(ctx.err(Some(at.clone()), format!("field '{n}' does not apply to a {kind} coefficient")));
            }
        }
        Ok(())
    };
    let f = match kind {
        "constant" => {
            unused(&[("r", c.r.is_some()), ("s", c.s.is_some()), ("coeffs", c.coeffs.is_some())])?;
            CoefFn::Constant { c: ctx.req(&c.c, "c", at.clone())? }
        }
        "power_abs" => {
            unused(&[("s", c.s.is_some()), ("coeffs", c.coeffs.is_some())])?;
            CoefFn::PowerAbs { c: ctx.opt(&c.c, 1.0)?, r: ctx.req(&c.r, "r", at.clone())? }
        }
        "sine_product" => {
            unused(&[("c", c.c.is_some()), ("r", c.r.is_some()), ("coeffs", c.coeffs.is_some())])?;
            CoefFn::SineProduct { s: ctx.req(&c.s, "s", at.clone())? }
        }
        "poly_x" => {
            unused(&[("c", c.c.is_some()), ("r", c.r.is_some()), ("s", c.s.is_some())])?;
            let coeffs = c.coeffs.as_ref().ok_or_else(|| ctx.err(Some(at.clone()), "missing coeffs"))?;
            CoefFn::PolyX { coeffs: coeffs.iter().map(|n| ctx.num(n)).collect::<Result<_>>()? }
        }
        other => {
            return Err(ctx.err(Some(at), format!("unknown coefficient kind '{other}' (expected constant, power_abs, sine_product or poly_x)")))
        }
    };
    f.validate().map_err(|e| ctx.err(Some(at), e))?;
    Ok(f)
}

fn negate(f: CoefFn) -> CoefFn {
    match f {
        CoefFn::Constant { c } => CoefFn::Constant { c: -c },
        CoefFn::PowerAbs { c, r } => CoefFn::PowerAbs { c: -c, r },
        CoefFn::SineProduct { s } => CoefFn::SineProduct { s: -s },
        CoefFn::PolyX { coeffs } => CoefFn::PolyX { coeffs: coeffs.into_iter().map(|c| -c).collect() },
    }
}

fn build_nonlinearity(ctx: &Ctx, nl: Option<&RawNonlinearity>, rhs: Option<&RawCoef>) -> Result<PolyNonlinearity> {
    let mut terms = Vec::new();
    if let Some(nl) = nl {
        let rhs_form = match nl.form.as_ref().map(|f| (f.get_ref().as_str(), f.span())) {
            None | Some(("lhs", _)) => false,
            Some(("rhs", _)) => true,
            Some((other, span)) => return Err(ctx.err(Some(span), format!("unknown form '{other}' (expected lhs or rhs)"))),
        };
        for t in &nl.terms {
            let power = t.get_ref().power.as_ref().ok_or_else(|| ctx.err(Some(t.span()), "term is missing its power"))?;
            let coef = build_coef(ctx, t.get_ref(), power.span())?;
            terms.push(Term { power: *power.get_ref(), coef: if rhs_form { negate(coef) } else { coef } });
        }
    }
    // −Δu + f = rhs(x) moves to f as −rhs.
    if let Some(r) = rhs {
        let at = r.kind.as_ref().map_or(0..0, |k| k.span());
        if let Some(p) = &r.power {
            return Err(ctx.err(Some(p.span()), "rhs takes no power"));
        }
        terms.push(Term { power: 0, coef: negate(build_coef(ctx, r, at)?) });
    }
    let nl = PolyNonlinearity::new(terms).map_err(|e| ctx.err(None, e))?;
    if !nl.is_nonlinear() {
        log::warn!("{}: the problem is linear; expect a single solution", ctx.origin);
    }
    Ok(nl)
}

fn build_system(ctx: &Ctx, s: &RawSystem, domain: Domain, name: &str) -> Result<TwoFieldSpec> {
    let at = s.kind.span();
    let wrap = |r: Result<TwoFieldSpec>| r.map_err(|e| ctx.err(Some(at.clone()), e));
    let mut spec = match s.kind.get_ref().as_str() {
        "schnakenberg" => {
            let mut spec = wrap(TwoFieldSpec::schnakenberg(
                ctx.req(&s.a, "a", at.clone())?,
                ctx.req(&s.b, "b", at.clone())?,
                ctx.req(&s.d, "d", at.clone())?,
                ctx.req(&s.eta, "eta", at.clone())?,
            ))?;
            spec.domain = domain;
            spec
        }
        "gray_scott" => wrap(TwoFieldSpec::gray_scott(
            domain,
            ctx.req(&s.d_a, "d_a", at.clone())?,
            ctx.req(&s.d_s, "d_s", at.clone())?,
            ctx.req(&s.mu, "mu", at.clone())?,
            ctx.req(&s.rho, "rho", at.clone())?,
        ))?,
        "general" => {
            let lin = |l: &Option<RawLinear>| -> Result<LinearPart> {
                match l {
                    None => Ok(LinearPart::default()),
                    Some(l) => Ok(LinearPart { constant: ctx.opt(&l.constant, 0.0)?, u: ctx.opt(&l.u, 0.0)?, v: ctx.opt(&l.v, 0.0)? }),
                }
            };
            wrap(
                TwoFieldSpec {
                    name: String::new(),
                    domain,
                    d_u: ctx.req(&s.d_u, "d_u", at.clone())?,
                    d_v: ctx.req(&s.d_v, "d_v", at.clone())?,
                    first: lin(&s.first)?,
                    second: lin(&s.second)?,
                    coupling: ctx.req(&s.coupling, "coupling", at.clone())?,
                }
                .validated(),
            )?
        }
        other => return Err(ctx.err(Some(at), format!("unknown system kind '{other}' (expected schnakenberg, gray_scott or general)"))),
    };
    spec.name = name.to_string();
    Ok(spec)
}
