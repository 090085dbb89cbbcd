//! Convergence tables, parameter sweeps and a 1D shooting oracle.

use serde::Serialize;

use crate::assembly::{element_quadrature, energy_norms, CoefVec};
use crate::cbmfem::{cbmfem_run_seeded, interpolate, FilterConfig, LevelDiagnostics, SolutionSet};
use crate::error::{Error, Result};
use crate::mesh::{Domain, MeshHierarchy, MeshLevel, Segment};
use crate::nonlinearity::{BoundaryCondition, PolyNonlinearity};
use crate::problem::ProblemSpec;
use crate::system::SystemBuilder;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct BranchMatch {
    /// `(coarse id, fine id)`.
    pub pairs: Vec<(usize, usize)>,
    /// Fine records without a parent in the coarse set.
    pub unmatched: Vec<usize>,
}

/// Pairs fine records with their coarse parents by lineage.
pub fn match_branches(coarse: &SolutionSet, fine: &SolutionSet) -> Result<BranchMatch> {
    if fine.level != coarse.level + 1 {
        return Err(Error::NonConsecutiveLevels { coarse: coarse.level, fine: fine.level });
    }
    let mut out = BranchMatch::default();
    for rec in &fine.records {
        match rec.parent_id.filter(|p| coarse.get(*p).is_some()) {
            Some(p) => out.pairs.push((p, rec.id)),
            None => out.unmatched.push(rec.id),
        }
    }
    Ok(out)
}

/// Record ids of one branch from the coarsest level it reaches down to
/// `fine_id` on the last set, following parent links.
pub fn lineage(sets: &[SolutionSet], fine_id: usize) -> Result<Vec<usize>> {
    let last = sets.last().ok_or_else(|| Error::InvalidInput("no solution sets".into()))?;
    let mut rec = last
        .get(fine_id)
        .ok_or_else(|| Error::InvalidInput(format!("no record {fine_id} on level {}", last.level)))?;
    let mut ids = vec![fine_id];
    for set in sets[..sets.len() - 1].iter().rev() {
        match rec.parent_id.and_then(|p| set.get(p)) {
            Some(parent) => {
                ids.push(parent.id);
                rec = parent;
            }
            None => break,
        }
    }
    ids.reverse();
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub l2_err: f64,
    pub l2_order: f64,
    pub h1_err: f64,
    pub h1_order: f64,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    /// Id of the branch on the finest level.
    pub branch: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    fn from_errors(branch: usize, errs: Vec<(usize, f64, f64, f64, f64)>) -> ConvergenceTable {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(errs.len());
        for (level, h, l2, h1, cpu) in errs {
            let (l2_order, h1_order) = match rows.last() {
                Some(p) => {
                    let r = (p.h / h).ln();
                    ((p.l2_err / l2).ln() / r, (p.h1_err / h1).ln() / r)
                }
                None => (f64::NAN, f64::NAN),
            };
            rows.push(ConvergenceRow { level, h, l2_err: l2, l2_order, h1_err: h1, h1_order, cpu_seconds: cpu });
        }
        ConvergenceTable { branch, rows }
    }

    /// Orders of the last row, the usual summary of a study.
    pub fn final_orders(&self) -> Option<(f64, f64)> {
        self.rows.last().filter(|_| self.rows.len() >= 2).map(|r| (r.l2_order, r.h1_order))
    }
}

fn cpu(diags: &[LevelDiagnostics], level: usize) -> f64 {
    diags.iter().find(|d| d.level == level).map_or(f64::NAN, |d| d.wall_seconds)
}

fn branch_levels(sets: &[SolutionSet], fine_id: usize, min_levels: usize) -> Result<Vec<usize>> {
    let ids = lineage(sets, fine_id)?;
    if ids.len() < min_levels {
        return Err(Error::InvalidInput(format!(
            "branch {fine_id} is traced over {} level(s); at least {min_levels} are needed",
            ids.len()
        )));
    }
    Ok(ids)
}

/// Nested-level errors `‖u_h − I_h u_H‖` along the branch ending at
/// `fine_id`.
pub fn convergence_table(
    hierarchy: &MeshHierarchy,
    sets: &[SolutionSet],
    diags: &[LevelDiagnostics],
    fine_id: usize,
) -> Result<ConvergenceTable> {
    let ids = branch_levels(sets, fine_id, 3)?;
    let first = sets.len() - ids.len();
    let mut errs = Vec::new();
    for k in 1..ids.len() {
        let (cs, fs) = (&sets[first + k - 1], &sets[first + k]);
        let coarse_mesh = &hierarchy.levels[cs.level];
        let fine_mesh = &hierarchy.levels[fs.level];
        let uc = &cs.get(ids[k - 1]).expect("lineage").u;
        let uf = &fs.get(ids[k]).expect("lineage").u;
        let ui = interpolate(uc, coarse_mesh, fine_mesh)?;
        let (l2, h1) = energy_norms(fine_mesh, uf, &ui)?;
        errs.push((fs.level, fine_mesh.h, l2, h1, cpu(diags, fs.level)));
    }
    Ok(ConvergenceTable::from_errors(fine_id, errs))
}

/// Errors against a reference solution returning value and gradient.
pub fn convergence_table_exact(
    hierarchy: &MeshHierarchy,
    sets: &[SolutionSet],
    diags: &[LevelDiagnostics],
    fine_id: usize,
    reference: &dyn Fn([f64; 2]) -> (f64, [f64; 2]),
) -> Result<ConvergenceTable> {
    let ids = branch_levels(sets, fine_id, 2)?;
    let first = sets.len() - ids.len();
    let mut errs = Vec::new();
    for (k, &id) in ids.iter().enumerate() {
        let set = &sets[first + k];
        let mesh = &hierarchy.levels[set.level];
        let (l2, h1) = error_against(mesh, &set.get(id).expect("lineage").u, reference)?;
        errs.push((set.level, mesh.h, l2, h1, cpu(diags, set.level)));
    }
    Ok(ConvergenceTable::from_errors(fine_id, errs))
}

/// L² and H¹ norms of `u_h − u` for a P1 function and a reference `u`.
pub fn error_against(mesh: &MeshLevel, u: &CoefVec, reference: &dyn Fn([f64; 2]) -> (f64, [f64; 2])) -> Result<(f64, f64)> {
    u.check(mesh)?;
    let (mut l2, mut semi) = (0.0, 0.0);
    for (e, el) in mesh.elements.iter().enumerate() {
        let grad = p1_gradient(mesh, e, &u.values);
        for (x, w, phi) in element_quadrature(mesh, e, 10) {
            let uh: f64 = el.iter().enumerate().map(|(a, &n)| phi[a] * u.values[n]).sum();
            let (ue, ge) = reference(x);
            l2 += w * (uh - ue).powi(2);
            semi += w * ((grad[0] - ge[0]).powi(2) + if mesh.dim == 2 { (grad[1] - ge[1]).powi(2) } else { 0.0 });
        }
    }
    Ok((l2.sqrt(), (l2 + semi).sqrt()))
}

fn p1_gradient(mesh: &MeshLevel, e: usize, u: &[f64]) -> [f64; 2] {
    let el = &mesh.elements[e];
    if mesh.dim == 1 {
        return [(u[el[1]] - u[el[0]]) / mesh.element_measure(e), 0.0];
    }
    let p: Vec<[f64; 2]> = el.iter().map(|&n| mesh.nodes[n]).collect();
    let two_a = 2.0 * mesh.element_measure(e);
    let g = [
        [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
        [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
        [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
    ];
    let mut out = [0.0; 2];
    for a in 0..3 {
        out[0] += g[a][0] * u[el[a]];
        out[1] += g[a][1] * u[el[a]];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Mixed,
}

impl Sign {
    pub fn of(values: &[f64], tol: f64) -> Sign {
        let pos = values.iter().any(|&v| v > tol);
        let neg = values.iter().any(|&v| v < -tol);
        match (pos, neg) {
            (true, true) => Sign::Mixed,
            (true, false) => Sign::Positive,
            (false, true) => Sign::Negative,
            (false, false) => Sign::Zero,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
            Sign::Zero => "zero",
            Sign::Mixed => "mixed",
        }
    }

    /// Non-negative up to `tol`.
    pub fn is_nonnegative(self) -> bool {
        matches!(self, Sign::Positive | Sign::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSummary {
    pub id: usize,
    /// Solution value at the probe point.
    pub probe_value: f64,
    pub sup_norm: f64,
    pub sign: Sign,
}

/// Scalar summaries of every record of a set.
pub fn summarize(mesh: &MeshLevel, set: &SolutionSet, probe: [f64; 2]) -> Vec<BranchSummary> {
    set.records
        .iter()
        .map(|r| BranchSummary {
            id: r.id,
            probe_value: mesh.evaluate(&r.u.values, probe).unwrap_or(f64::NAN),
            sup_norm: r.u.sup_norm(),
            sign: Sign::of(&r.u.values, 1e-8 * r.u.sup_norm().max(1.0)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub param: f64,
    pub count: usize,
    pub branches: Vec<BranchSummary>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BranchTrace {
    pub param_name: String,
    pub points: Vec<TracePoint>,
}

/// Runs the solver at each parameter value, seeding the finest level with
/// the previous value's solutions (natural continuation).
///
/// `make` builds the problem and its hierarchy for a parameter value.
pub fn parameter_sweep<B, F>(param_name: &str, values: &[f64], make: F, cfg: &FilterConfig, probe: [f64; 2]) -> Result<BranchTrace>
where
    B: SystemBuilder,
    F: Fn(f64) -> Result<(B, MeshHierarchy)>,
{
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if values.iter().any(|v| !v.is_finite()) || !(increasing || decreasing) {
        return Err(Error::InvalidInput(format!("sweep values for {param_name} must be finite and strictly monotone")));
    }
    let mut trace = BranchTrace { param_name: param_name.to_string(), points: Vec::new() };
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for &p in values {
        let (builder, hierarchy) = match make(p) {
            Ok(x) => x,
            Err(e) => {
                log::warn!("{param_name}={p}: {e}");
                trace.points.push(TracePoint { param: p, count: 0, branches: Vec::new(), failure: Some(e.to_string()) });
                continue;
            }
        };
        // Seeds only carry over when the finest meshes agree.
        let n = hierarchy.finest().node_count();
        seeds.retain(|s| s.len() == n);
        let run = cbmfem_run_seeded(&builder, &hierarchy, cfg, &seeds);
        let finest = run.sets.last().filter(|s| s.level + 1 == hierarchy.len());
        let point = match finest {
            Some(set) => {
                seeds = set.records.iter().map(|r| r.u.values.clone()).collect();
                TracePoint { param: p, count: set.len(), branches: summarize(hierarchy.finest(), set, probe), failure: run.failure }
            }
            None => {
                log::warn!("{param_name}={p}: {}", run.failure.as_deref().unwrap_or("no solutions on the finest level"));
                TracePoint {
                    param: p,
                    count: 0,
                    branches: Vec::new(),
                    failure: Some(run.failure.unwrap_or_else(|| "no solutions on the finest level".into())),
                }
            }
        };
        trace.points.push(point);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingOptions {
    /// Integrator step as a fraction of the interval length.
    pub step_fraction: f64,
    /// Sub-intervals of the bracket scanned for sign changes.
    pub scan_points: usize,
    /// Trajectories with `|u|` beyond this are treated as blown up.
    pub blowup: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { step_fraction: 1e-4, scan_points: 400, blowup: 1e8 }
    }
}

enum Shoot {
    /// Unknown `u(a)`; slope `u'(a) = k u(a) − g`.
    Value { k: f64, g: f64 },
    /// Known `u(a)`; unknown slope.
    Slope { value: f64 },
}

/// A shooting solution with dense output.
#[derive(Debug, Clone, Serialize)]
pub struct ShootingSolution {
    /// The shooting unknown: `u(a)`, or `u'(a)` under a left Dirichlet condition.
    pub parameter: f64,
    pub u0: f64,
    pub du0: f64,
    /// `u(b)` minus the prescribed right value.
    pub mismatch: f64,
    /// Richardson estimate of the integrator error at `b`.
    pub richardson: f64,
    xs: Vec<f64>,
    us: Vec<f64>,
    dus: Vec<f64>,
    #[serde(skip)]
    nl: PolyNonlinearity,
}

impl ShootingSolution {
    /// Value and derivative at `x`, by cubic Hermite interpolation.
    pub fn sample(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let (a, b) = (self.xs[0], self.xs[n - 1]);
        let x = x.clamp(a, b);
        let i = (((x - a) / (b - a) * (n - 1) as f64) as usize).min(n - 2);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, m0, m1) = (self.us[i], self.us[i + 1], self.dus[i] * h, self.dus[i + 1] * h);
        let (t2, t3) = (t * t, t * t * t);
        let u = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let du = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1) / h;
        (u, du)
    }

    /// `−u'' + f(x, u)` at a stored integrator node, using a centred
    /// difference of the stored slopes.
    pub fn ode_residual_at_node(&self, i: usize) -> f64 {
        let i = i.clamp(1, self.xs.len() - 2);
        let d2 = (self.dus[i + 1] - self.dus[i - 1]) / (self.xs[i + 1] - self.xs[i - 1]);
        -d2 + self.nl.eval_f([self.xs[i], 0.0], self.us[i])
    }

    pub fn nodes(&self) -> usize {
        self.xs.len()
    }
}

struct Integrator<'a> {
    nl: &'a PolyNonlinearity,
    a: f64,
    b: f64,
    blowup: f64,
}

impl Integrator<'_> {
    fn rhs(&self, x: f64, u: f64) -> f64 {
        self.nl.eval_f([x, 0.0], u)
    }

    /// RK4 for `u'' = f(x, u)`; `None` on blow-up.
    fn run(&self, u0: f64, du0: f64, steps: usize, keep: bool) -> Option<(f64, f64, Vec<(f64, f64, f64)>)> {
        let h = (self.b - self.a) / steps as f64;
        let (mut u, mut v) = (u0, du0);
        let mut traj = Vec::with_capacity(if keep { steps + 1 } else { 0 });
        if keep {
            traj.push((self.a, u, v));
        }
        for k in 0..steps {
            let x = self.a + k as f64 * h;
            let (k1u, k1v) = (v, self.rhs(x, u));
            let (k2u, k2v) = (v + 0.5 * h * k1v, self.rhs(x + 0.5 * h, u + 0.5 * h * k1u));
            let (k3u, k3v) = (v + 0.5 * h * k2v, self.rhs(x + 0.5 * h, u + 0.5 * h * k2u));
            let (k4u, k4v) = (v + h * k3v, self.rhs(x + h, u + h * k3u));
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if !(u.abs() < self.blowup && v.abs() < self.blowup * 1e3) {
                return None;
            }
            if keep {
                traj.push((self.a + (k + 1) as f64 * h, u, v));
            }
        }
        Some((u, v, traj))
    }
}

/// A root between a finite point `a` and a blow-up point `b`: the mismatch
/// usually diverges near the edge of the finite region, so a sign change can
/// hide inside a scan interval whose far end is not finite.
fn root_before_blowup(mismatch: &dyn Fn(f64) -> Option<f64>, a: f64, b: f64, fa: f64) -> Option<f64> {
    let (mut finite, mut blown) = (a, b);
    let mut f_edge = fa;
    for _ in 0..60 {
        let m = 0.5 * (finite + blown);
        match mismatch(m) {
            Some(fm) => {
                if fm * fa < 0.0 {
                    return if a < m { refine_root(mismatch, a, m, fa, fm) } else { refine_root(mismatch, m, a, fm, fa) };
                }
                finite = m;
                f_edge = fm;
            }
            None => blown = m,
        }
        if (blown - finite).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
    }
    (f_edge == 0.0).then_some(finite)
}

/// The oracle solution nearest to nodal values `u`, with the largest nodal
/// deviation from it.
pub fn closest_oracle(mesh: &MeshLevel, u: &[f64], oracles: &[ShootingSolution]) -> Option<(usize, f64)> {
    oracles
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let dev = mesh.nodes.iter().zip(u).map(|(x, v)| (o.sample(x[0]).0 - v).abs()).fold(0.0, f64::max);
            (k, dev)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Finds all solutions of a 1D problem `−u'' + f(x, u) = 0` with a right
/// Dirichlet condition whose shooting unknown lies in `bracket`.
pub fn shooting_oracle_1d(spec: &ProblemSpec, bracket: (f64, f64), opts: &ShootingOptions) -> Result<Vec<ShootingSolution>> {
    let (a, b) = match spec.domain {
        Domain::Interval { a, b } => (a, b),
        _ => return Err(Error::UnsupportedDomain("the shooting oracle is one-dimensional".into())),
    };
    let right = spec
        .boundary
        .dirichlet_value(Segment::Right)
        .ok_or_else(|| Error::InvalidInput("the shooting oracle needs a Dirichlet condition on the right".into()))?;
    // du/dn = −u'(a) on the left end.
    let shoot = match spec.boundary.get(Segment::Left) {
        None => Shoot::Value { k: 0.0, g: 0.0 },
        Some(BoundaryCondition::Neumann { g }) => Shoot::Value { k: 0.0, g: *g },
        Some(BoundaryCondition::Robin { alpha_over_beta, g }) => Shoot::Value { k: *alpha_over_beta, g: *g },
        Some(BoundaryCondition::Dirichlet { value }) => Shoot::Slope { value: *value },
    };
    if !(bracket.0 < bracket.1) || opts.scan_points < 1 || !(opts.step_fraction > 0.0 && opts.step_fraction <= 0.5) {
        return Err(Error::InvalidInput("invalid shooting bracket or options".into()));
    }
    let initial = |s: f64| match shoot {
        Shoot::Value { k, g } => (s, k * s - g),
        Shoot::Slope { value } => (value, s),
    };
    let steps = (1.0 / opts.step_fraction).round() as usize;
    let integ = Integrator { nl: &spec.nonlinearity, a, b, blowup: opts.blowup };
    let mismatch = |s: f64| {
        let (u0, du0) = initial(s);
        integ.run(u0, du0, steps, false).map(|(u, _, _)| u - right)
    };

    let n = opts.scan_points;
    let grid: Vec<f64> = (0..=n).map(|i| bracket.0 + (bracket.1 - bracket.0) * i as f64 / n as f64).collect();
    let vals: Vec<Option<f64>> = grid.iter().map(|&s| mismatch(s)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (fa, fb) = match (vals[i], vals[i + 1]) {
            (Some(fa), Some(fb)) => (fa, fb),
            (Some(fa), None) => {
                if let Some(r) = root_before_blowup(&mismatch, grid[i], grid[i + 1], fa) {
                    roots.push(r);
                }
                continue;
            }
            (None, Some(fb)) => {
                if let Some(r) = root_before_blowup(&mismatch, grid[i + 1], grid[i], fb) {
                    roots.push(r);
                }
                continue;
            }
            (None, None) => continue,
        };
        if fa == 0.0 {
            roots.push(grid[i]);
        } else if fa * fb < 0.0 {
            if let Some(r) = refine_root(&mismatch, grid[i], grid[i + 1], fa, fb) {
                roots.push(r);
            }
        }
    }
    if let Some(Some(last)) = vals.last() {
        if *last == 0.0 {
            roots.push(grid[n]);
        }
    }

    let mut out = Vec::new();
    for s in roots {
        let (u0, du0) = initial(s);
        let Some((ub, _, traj)) = integ.run(u0, du0, steps, true) else { continue };
        let coarse = integ.run(u0, du0, steps / 2, false).map_or(f64::NAN, |(u, _, _)| u);
        out.push(ShootingSolution {
            parameter: s,
            u0,
            du0,
            mismatch: ub - right,
            richardson: (ub - coarse).abs() / 15.0,
            xs: traj.iter().map(|t| t.0).collect(),
            us: traj.iter().map(|t| t.1).collect(),
            dus: traj.iter().map(|t| t.2).collect(),
            nl: spec.nonlinearity.clone(),
        });
    }
    Ok(out)
}

/// Bisection down to a narrow bracket, then safeguarded secant steps.
fn refine_root(f: &dyn Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64) -> Option<f64> {
    for _ in 0..200 {
        let mid = if hi - lo > 1e-6 * (1.0 + lo.abs()) {
            0.5 * (lo + hi)
        } else {
            let s = hi - fhi * (hi - lo) / (fhi - flo);
            if s > lo && s < hi {
                s
            } else {
                0.5 * (lo + hi)
            }
        };
        let fm = f(mid)?;
        if fm == 0.0 || (hi - lo) <= 4.0 * f64::EPSILON * (1.0 + mid.abs()) {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if fm.abs() < 1e-14 {
            return Some(mid);
        }
    }
    Some(0.5 * (lo + hi))
}
