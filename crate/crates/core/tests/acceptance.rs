//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the report.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use cbmfem::analysis::{
    closest_oracle, convergence_table, convergence_table_exact, shooting_oracle_1d, summarize, ConvergenceTable, ShootingOptions,
    ShootingSolution, Sign,
};
use cbmfem::assembly::{l2_norm, CoefVec, ScalarProblem};
use cbmfem::cbmfem::{cbmfem_run, interpolate, newton, relative_distance, FilterConfig, RunResult, SolutionSet};
use cbmfem::companion::{poly_roots, UniPoly};
use cbmfem::config::{Problem, ProblemConfig};
use cbmfem::export::{read_json, reassembled_pair_residual, reassembled_residual, write_json, PairFile, SolutionFile};
use cbmfem::mesh::{MeshHierarchy, MeshLevel};
use cbmfem::presets;
use cbmfem::problem::ProblemSpec;
use cbmfem::system::{DiscreteSystem, SystemBuilder};
use cbmfem::systems::{solve_system, ReducedSystem, TwoFieldSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn config(name: &str, overrides: &[(&str, f64)]) -> ProblemConfig {
    let cfg = presets::load(name).unwrap();
    let o: Vec<(String, f64)> = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    if o.is_empty() {
        cfg
    } else {
        cfg.with_parameters(&o).unwrap()
    }
}

fn scalar(cfg: &ProblemConfig) -> ProblemSpec {
    match &cfg.problem {
        Problem::Scalar(s) => s.clone(),
        Problem::TwoField(_) => panic!("{} is a system", cfg.name),
    }
}

fn two_field(cfg: &ProblemConfig) -> TwoFieldSpec {
    match &cfg.problem {
        Problem::TwoField(s) => s.clone(),
        Problem::Scalar(_) => panic!("{} is scalar", cfg.name),
    }
}

fn solve(cfg: &ProblemConfig, levels: usize) -> (MeshHierarchy, RunResult, Duration) {
    let spec = scalar(cfg);
    let hier = spec.hierarchy(levels).unwrap();
    let t = Instant::now();
    let run = cbmfem_run(&spec, &hier, &cfg.solver);
    (hier, run, t.elapsed())
}

fn finest(run: &RunResult, level: usize) -> Option<&SolutionSet> {
    run.sets.last().filter(|s| s.level == level)
}

fn count_at(run: &RunResult, level: usize) -> usize {
    finest(run, level).map_or(0, |s| s.len())
}

fn oracle(cfg: &ProblemConfig) -> Vec<ShootingSolution> {
    shooting_oracle_1d(&scalar(cfg), cfg.oracle_bracket.expect("oracle bracket"), &ShootingOptions::default()).unwrap()
}

fn value_at_left(mesh: &MeshLevel, u: &[f64]) -> f64 {
    let i = (0..mesh.node_count()).min_by(|&a, &b| mesh.nodes[a][0].total_cmp(&mesh.nodes[b][0])).unwrap();
    u[i]
}

const L2_TOL: f64 = 0.1;
const H1_TOL: f64 = 0.1;

/// Orders computed from the errors on the last three levels.
fn last_orders(t: &ConvergenceTable) -> [(f64, f64); 2] {
    let n = t.rows.len();
    [(t.rows[n - 2].l2_order, t.rows[n - 2].h1_order), (t.rows[n - 1].l2_order, t.rows[n - 1].h1_order)]
}

fn orders_ok(t: &ConvergenceTable) -> bool {
    last_orders(t).iter().all(|(l2, h1)| (l2 - 2.0).abs() <= L2_TOL && (h1 - 1.0).abs() <= H1_TOL)
}

fn nontrivial(t: &ConvergenceTable) -> bool {
    t.rows.last().is_some_and(|r| r.l2_err > 1e-12)
}

/// Node permutations realising the non-trivial symmetries of the unit square
/// (reflections in both axes, both diagonals, and the rotations).
fn reflections(mesh: &MeshLevel) -> Vec<Vec<usize>> {
    let key = |x: f64, y: f64| ((x * 1e9).round() as i64, (y * 1e9).round() as i64);
    let index: HashMap<(i64, i64), usize> = mesh.nodes.iter().enumerate().map(|(i, p)| (key(p[0], p[1]), i)).collect();
    let maps: [fn([f64; 2]) -> [f64; 2]; 7] = [
        |p| [1.0 - p[0], p[1]],
        |p| [p[0], 1.0 - p[1]],
        |p| [1.0 - p[0], 1.0 - p[1]],
        |p| [p[1], p[0]],
        |p| [1.0 - p[1], 1.0 - p[0]],
        |p| [1.0 - p[1], p[0]],
        |p| [p[1], 1.0 - p[0]],
    ];
    maps.iter()
        .map(|m| mesh.nodes.iter().map(|&p| index[&key(m(p)[0], m(p)[1])]).collect())
        .collect()
}

fn permute(u: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for (i, &j) in perm.iter().enumerate() {
        out[j] = u[i];
    }
    out
}

fn symmetry_orbits(mesh: &MeshLevel, set: &SolutionSet, tol: f64) -> usize {
    let perms = reflections(mesh);
    let mut orbit_of: Vec<Option<usize>> = vec![None; set.len()];
    let mut orbits = 0;
    for i in 0..set.len() {
        if orbit_of[i].is_some() {
            continue;
        }
        orbit_of[i] = Some(orbits);
        for p in &perms {
            let img = permute(&set.records[i].u.values, p);
            for (j, r) in set.records.iter().enumerate() {
                if orbit_of[j].is_none() && relative_distance(mesh, &img, &r.u.values) <= tol {
                    orbit_of[j] = Some(orbits);
                }
            }
        }
        orbits += 1;
    }
    orbits
}

/// Residual of −u'' + f(x, u) = 0 for P1 data on a 1D mesh, assembled here
/// with 5-point Gauss–Legendre quadrature. Rows at `fixed` nodes are omitted.
fn residual_1d(mesh: &MeshLevel, u: &[f64], f: &dyn Fn(f64, f64) -> f64, fixed: &dyn Fn(f64) -> bool) -> f64 {
    let gx = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    let gw = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    let mut r = vec![0.0; mesh.node_count()];
    for el in &mesh.elements {
        let (i, j) = (el[0], el[1]);
        let (xi, xj) = (mesh.nodes[i][0], mesh.nodes[j][0]);
        let len = xj - xi;
        let slope = (u[j] - u[i]) / len;
        r[i] -= slope * len.signum();
        r[j] += slope * len.signum();
        for (t, w) in gx.iter().zip(gw) {
            let s = 0.5 * (1.0 + t);
            let x = xi + s * len;
            let uq = (1.0 - s) * u[i] + s * u[j];
            let wq = 0.5 * w * len.abs();
            let fq = f(x, uq);
            r[i] += wq * fq * (1.0 - s);
            r[j] += wq * fq * s;
        }
    }
    r.iter().enumerate().filter(|(k, _)| !fixed(mesh.nodes[*k][0])).map(|(_, v)| v * v).sum::<f64>().sqrt()
}

fn fd_jacobian_error<S: DiscreteSystem>(sys: &S, u: &[f64], analytic: &nalgebra::DMatrix<f64>) -> f64 {
    let free = sys.free_nodes();
    let mut worst: f64 = 0.0;
    let scale = analytic.amax().max(1.0);
    for (col, &node) in free.iter().enumerate() {
        let step = 1e-6 * (1.0 + u[node].abs());
        let (mut up, mut dn) = (u.to_vec(), u.to_vec());
        up[node] += step;
        dn[node] -= step;
        let (rp, rm) = (sys.residual(&up), sys.residual(&dn));
        for row in 0..free.len() {
            let fd = (rp[row] - rm[row]) / (2.0 * step);
            worst = worst.max((fd - analytic[(row, col)]).abs() / scale);
        }
    }
    worst
}

fn random_state(rng: &mut StdRng, sys: &impl DiscreteSystem, amp: f64) -> Vec<f64> {
    let mut u: Vec<f64> = (0..sys.mesh().node_count()).map(|_| rng.random_range(-amp..amp)).collect();
    sys.enforce_constraints(&mut u);
    u
}

fn criterion_1(rep: &mut Report) {
    let cfg = config("ex2", &[]);
    let (hier, run, wall) = solve(&cfg, 6);
    let Some(set) = finest(&run, 6) else {
        return rep.line("1", false, format!("ex2 did not reach h=2^-7: {:?}", run.failure));
    };
    let mesh = hier.finest();
    let mut u0: Vec<f64> = set.records.iter().map(|r| value_at_left(mesh, &r.u.values)).collect();
    u0.sort_by(f64::total_cmp);
    let oracle_u0: Vec<f64> = {
        let mut v: Vec<f64> = oracle(&cfg).iter().map(|s| s.u0).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let paper = [0.5227, 1.3084];
    let pass = u0.len() == 2
        && oracle_u0.len() == 2
        && u0.iter().zip(paper).all(|(a, b)| (a - b).abs() <= 2e-3)
        && u0.iter().zip(&oracle_u0).all(|(a, b)| (a - b).abs() <= 2e-3)
        && wall < Duration::from_secs(60);
    rep.line(
        "1",
        pass,
        format!(
            "ex2 h=2^-7: {} solutions, u(0) = {:.4?} (paper {:?}, shooting {:.4?}, tol 2e-3), {:.2}s (limit 60s)",
            u0.len(),
            u0,
            paper,
            oracle_u0,
            wall.as_secs_f64()
        ),
    );
}

fn criterion_2(rep: &mut Report) {
    let mut parts = Vec::new();
    let mut pass = true;
    let studies: [(&str, &[(&str, f64)], usize); 4] =
        [("ex2", &[], 6), ("example2", &[], 6), ("ex3", &[("p", 7.0)], 6), ("exnew", &[("r", 3.0), ("d", 1.0)], 7)];
    for (name, params, level) in studies {
        let cfg = config(name, params);
        let t = Instant::now();
        let (hier, run, _) = solve(&cfg, level);
        let ids: Vec<usize> = finest(&run, level).map_or(vec![], |s| s.records.iter().map(|r| r.id).collect());
        let tables: Vec<(ConvergenceTable, Sign)> = ids
            .iter()
            .map(|&id| {
                let t = convergence_table(&hier, &run.sets, &run.diagnostics, id).unwrap();
                let rec = finest(&run, level).unwrap().get(id).unwrap();
                (t, Sign::of(&rec.u.values, 1e-8 * rec.u.sup_norm().max(1.0)))
            })
            .filter(|(t, _)| nontrivial(t))
            .collect();
        let elapsed = t.elapsed();
        // Only non-negative branches are tabulated for the Hénon-type problem.
        let checked: Vec<&ConvergenceTable> =
            tables.iter().filter(|(_, s)| name != "exnew" || s.is_nonnegative()).map(|(t, _)| t).collect();
        let ok = !checked.is_empty() && checked.iter().all(|t| orders_ok(t)) && elapsed < Duration::from_secs(120);
        pass &= ok;
        let worst = checked
            .iter()
            .flat_map(|t| last_orders(t))
            .fold((0.0f64, 0.0f64), |w, (l2, h1)| (w.0.max((l2 - 2.0).abs()), w.1.max((h1 - 1.0).abs())));
        let extra = if name == "exnew" {
            format!(", all {} branches in tolerance: {}", tables.len(), tables.iter().filter(|(t, _)| orders_ok(t)).count())
        } else {
            String::new()
        };
        parts.push(format!(
            "{name}: {} branches, max |L2-2| {:.3}, max |H1-1| {:.3}, {:.1}s{extra}",
            checked.len(),
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ));
    }
    let cfg = config("schnakenberg", &[]);
    let spec = two_field(&cfg);
    let hier = spec.hierarchy(6).unwrap();
    let t = Instant::now();
    let run = cbmfem_run(&spec, &hier, &cfg.solver);
    let tables: Vec<ConvergenceTable> = finest(&run, 6)
        .map_or(vec![], |s| s.records.iter().map(|r| convergence_table(&hier, &run.sets, &run.diagnostics, r.id).unwrap()).collect())
        .into_iter()
        .filter(nontrivial)
        .collect();
    let elapsed = t.elapsed();
    let ok = !tables.is_empty() && tables.iter().all(orders_ok) && elapsed < Duration::from_secs(120);
    pass &= ok;
    let worst = tables
        .iter()
        .flat_map(last_orders)
        .fold((0.0f64, 0.0f64), |w, (l2, h1)| (w.0.max((l2 - 2.0).abs()), w.1.max((h1 - 1.0).abs())));
    parts.push(format!(
        "schnakenberg: {} branches, max |L2-2| {:.3}, max |H1-1| {:.3}, {:.1}s",
        tables.len(),
        worst.0,
        worst.1,
        elapsed.as_secs_f64()
    ));
    rep.line("2", pass, format!("orders over the last three levels to h=2^-7 (tol 0.1, 120s each): {}", parts.join("; ")));
}

fn criterion_3(rep: &mut Report) {
    let mut parts = Vec::new();
    let mut pass = true;
    for (p, want) in [(1.0, 2usize), (7.0, 4), (18.0, 8)] {
        let cfg = config("ex3", &[("p", p)]);
        let (_, run, _) = solve(&cfg, 5);
        let got = count_at(&run, 5);
        let shoot = oracle(&cfg).len();
        pass &= got == want;
        parts.push(format!("ex3 p={p}: {got} (want {want}; shooting oracle {shoot})"));
    }
    let cfg = config("schnakenberg", &[]);
    let spec = two_field(&cfg);
    let run = solve_system(&spec, &spec.hierarchy(5).unwrap(), &cfg.solver);
    let got = run.sets.last().filter(|s| s.level == 5).map_or(0, |s| s.len());
    pass &= got == 3;
    parts.push(format!("schnakenberg: {got} (want 3)"));

    let cfg = config("exnew", &[("r", 3.0), ("d", 1.0)]);
    let (hier, run, _) = solve(&cfg, 6);
    let nonneg = finest(&run, 6).map_or(0, |s| summarize(hier.finest(), s, cfg.probe).iter().filter(|b| b.sign.is_nonnegative()).count());
    pass &= nonneg == 4;
    parts.push(format!("exnew: {nonneg} non-negative of {} (want 4)", count_at(&run, 6)));
    rep.line("3", pass, format!("counts at h=2^-6: {}", parts.join("; ")));
}

fn criterion_4(rep: &mut Report, keep: &mut Option<(MeshHierarchy, RunResult)>) {
    let cfg = config("2dex", &[("s", 1600.0)]);
    let (hier, run, wall) = solve(&cfg, 3);
    let c0 = run.sets.first().map_or(0, |s| s.len());
    let c3 = count_at(&run, 3);
    let orbits = finest(&run, 3).map_or(0, |s| symmetry_orbits(hier.finest(), s, 1e-6));
    let counts: Vec<usize> = run.sets.iter().map(|s| s.len()).collect();
    let pass = c0 == 2 && c3 == 10 && orbits == 4 && wall < Duration::from_secs(600);
    rep.line(
        "4",
        pass,
        format!(
            "2dex s=1600: level 0 {c0} (want 2), h=2^-3 {c3} (want 10), {orbits} up to symmetry (want 4), per-level {counts:?}, {:.1}s (limit 600s)",
            wall.as_secs_f64()
        ),
    );
    *keep = Some((hier, run));
}

fn criterion_5(rep: &mut Report, dex: Option<&(MeshHierarchy, RunResult)>) {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut notes = Vec::new();
    let mut pass = true;

    // Companion roots of random polynomials.
    let mut worst_root: f64 = 0.0;
    for _ in 0..500 {
        let deg = rng.random_range(1..=6);
        let mut c: Vec<f64> = (0..=deg).map(|_| rng.random_range(-10.0..10.0)).collect();
        if c[deg].abs() < 1e-3 {
            c[deg] = 1.0;
        }
        let p = UniPoly::new(c.clone());
        for z in poly_roots(&p).unwrap().roots {
            let scale: f64 = c.iter().enumerate().map(|(k, a)| a.abs() * z.norm().powi(k as i32)).sum();
            worst_root = worst_root.max(p.eval_complex(z).norm() / scale);
        }
    }
    pass &= worst_root <= 1e-8;
    notes.push(format!("companion residual {worst_root:.1e} (<= 1e-8)"));

    // Jacobian against central differences, 10 random states per preset.
    let mut worst_jac: f64 = 0.0;
    for name in presets::NAMES {
        let cfg = presets::load(name).unwrap();
        let hier = cfg.problem.hierarchy(2).unwrap();
        let mesh = &hier.levels[2];
        for _ in 0..10 {
            match &cfg.problem {
                Problem::Scalar(spec) => {
                    let sys = ScalarProblem::new(mesh, spec).unwrap();
                    let u = random_state(&mut rng, &sys, 2.0);
                    worst_jac = worst_jac.max(fd_jacobian_error(&sys, &u, &sys.jacobian(&u).to_dense()));
                }
                Problem::TwoField(spec) => {
                    let sys = ReducedSystem::new(mesh, spec).unwrap();
                    let v = random_state(&mut rng, &sys, 2.0);
                    worst_jac = worst_jac.max(fd_jacobian_error(&sys, &v, &sys.jacobian(&v)));
                }
            }
        }
    }
    pass &= worst_jac <= 1e-5;
    notes.push(format!("Jacobian vs FD {worst_jac:.1e} (<= 1e-5)"));

    // Nested interpolation preserves the function, hence its L² norm.
    let mut worst_interp: f64 = 0.0;
    for name in ["ex2", "exnew", "2dex"] {
        let hier = presets::load(name).unwrap().problem.hierarchy(3).unwrap();
        for l in 0..3 {
            let (c, f) = (&hier.levels[l], &hier.levels[l + 1]);
            let u = CoefVec::new(l, (0..c.node_count()).map(|_| rng.random_range(-5.0..5.0)).collect());
            let fine = interpolate(&u, c, f).unwrap();
            let (a, b) = (l2_norm(c, &u.values), l2_norm(f, &fine.values));
            worst_interp = worst_interp.max((a - b).abs() / a.max(1.0));
        }
    }
    pass &= worst_interp <= 1e-12;
    notes.push(format!("interpolation L2 drift {worst_interp:.1e} (<= 1e-12)"));

    // Stored solutions, written out and read back, re-assembled from scratch.
    let dir = tempfile::tempdir().unwrap();
    let mut worst_res: f64 = 0.0;
    let mut worst_indep: f64 = 0.0;
    let mut solutions = 0;
    let one_d: [(&str, &[(&str, f64)], Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64) -> bool>); 4] = [
        ("ex2", &[], Box::new(|_, u: f64| -1.0 - u.powi(4)), Box::new(|x| x == 1.0)),
        ("example2", &[], Box::new(|_, u: f64| u * u), Box::new(|x| x == 0.0 || x == 1.0)),
        ("ex3", &[("p", 18.0)], Box::new(|_, u: f64| -18.0 * u * u + u.powi(4)), Box::new(|x| x == 1.0)),
        ("exnew", &[], Box::new(|x: f64, u: f64| -x.abs().powi(3) * u.powi(3)), Box::new(|x: f64| x.abs() == 1.0)),
    ];
    for (name, params, f, fixed) in &one_d {
        let cfg = config(name, params);
        let (hier, run, _) = solve(&cfg, 4);
        let fresh = scalar(&config(name, params));
        for set in &run.sets {
            let path = dir.path().join(format!("{name}_{}.json", set.level));
            write_json(&path, &SolutionFile::from(set)).unwrap();
            let back: SolutionFile = read_json(&path).unwrap();
            let mesh = &hier.levels[back.level];
            for s in &back.solutions {
                worst_res = worst_res.max(reassembled_residual(&fresh, mesh, &s.values).unwrap());
                worst_indep = worst_indep.max(residual_1d(mesh, &s.values, f.as_ref(), fixed.as_ref()));
                solutions += 1;
            }
        }
    }
    let cfg = config("schnakenberg", &[]);
    let spec = two_field(&cfg);
    let hier = spec.hierarchy(4).unwrap();
    for set in &solve_system(&spec, &hier, &cfg.solver).sets {
        let path = dir.path().join(format!("sch_{}.json", set.level));
        write_json(&path, &PairFile::from(set)).unwrap();
        let back: PairFile = read_json(&path).unwrap();
        for s in &back.solutions {
            worst_res = worst_res.max(reassembled_pair_residual(&spec, &hier.levels[back.level], &s.u, &s.v).unwrap());
            solutions += 1;
        }
    }
    if let Some((hier, run)) = dex {
        let fresh = scalar(&config("2dex", &[]));
        for set in &run.sets {
            for r in &set.records {
                worst_res = worst_res.max(reassembled_residual(&fresh, &hier.levels[set.level], &r.u.values).unwrap());
                solutions += 1;
            }
        }
    }
    let tol = FilterConfig::default().newton_tol;
    pass &= worst_res <= tol && worst_indep <= tol;
    notes.push(format!("{solutions} stored solutions re-assembled: {worst_res:.1e}, independent 1D {worst_indep:.1e} (<= {tol:e})"));

    // Reflections of the 2D solution set are again in the set after Newton.
    let cfg = config("2dex", &[]);
    let spec = scalar(&cfg);
    let hier = spec.hierarchy(1).unwrap();
    let run = cbmfem_run(&spec, &hier, &cfg.solver);
    let mesh = &hier.levels[1];
    let set = finest(&run, 1).unwrap();
    let sys = spec.build(mesh).unwrap();
    let mut closed = true;
    for p in reflections(mesh) {
        for r in &set.records {
            let img = newton(&sys, &permute(&r.u.values, &p), &cfg.solver).map(|s| s.u);
            closed &= img.is_ok_and(|u| set.records.iter().any(|q| relative_distance(mesh, &u, &q.u.values) <= cfg.solver.dedup_tol));
        }
    }
    pass &= closed;
    notes.push(format!("2dex symmetry closure over {} solutions: {closed}", set.len()));

    // Identical runs give identical sets.
    let cfg = config("ex3", &[("p", 18.0)]);
    let (_, a, _) = solve(&cfg, 5);
    let (_, b, _) = solve(&cfg, 5);
    let same = a.sets == b.sets;
    pass &= same;
    notes.push(format!("deterministic: {same}"));

    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    rep.line("5", pass, format!("property suite in {:.1}s (limit 60s): {}", elapsed.as_secs_f64(), notes.join("; ")));
}

fn criterion_6(rep: &mut Report) {
    let cfg = config("ex2", &[]);
    let sols = oracle(&cfg);
    let (hier, run, _) = solve(&cfg, 6);
    let Some(set) = finest(&run, 6) else {
        return rep.line("6", false, "ex2 did not reach h=2^-7".into());
    };
    let mut parts = Vec::new();
    let mut pass = set.len() == 2;
    for r in &set.records {
        let asym = convergence_table(&hier, &run.sets, &run.diagnostics, r.id).unwrap();
        let (k, dev) = closest_oracle(hier.finest(), &r.u.values, &sols).unwrap();
        let sol = &sols[k];
        let exact = convergence_table_exact(&hier, &run.sets, &run.diagnostics, r.id, &|x| {
            let (v, d) = sol.sample(x[0]);
            (v, [d, 0.0])
        })
        .unwrap();
        let (oa, oe) = (asym.final_orders().map_or(f64::NAN, |o| o.0), exact.final_orders().map_or(f64::NAN, |o| o.0));
        pass &= dev < 1e-2 && (oa - oe).abs() <= 0.1;
        parts.push(format!("branch {}: asymptotic {oa:.3}, vs oracle {oe:.3}", r.id));
    }
    rep.line("6", pass, format!("ex2 L2 orders agree within 0.1: {}", parts.join("; ")));
}

#[test]
fn acceptance_criteria() {
    let mut rep = Report { failed: Vec::new() };
    let mut dex = None;
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep, &mut dex);
    criterion_5(&mut rep, dex.as_ref());
    criterion_6(&mut rep);
    assert!(rep.failed.is_empty(), "failed criteria: {:?}", rep.failed);
}
