//! The multilevel driver: coarse exhaustive solve, interpolation, companion
//! root enumeration at new nodes, filtering, Newton, deduplication.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{p1_norms, CoefVec};
use crate::companion::{local_polynomial, poly_roots_with, real_roots, RootMode, RootOptions};
use crate::error::{Error, Result};
use crate::mesh::{MeshHierarchy, MeshLevel};
use crate::system::{DiscreteSystem, SystemBuilder};

/// Filter constants and solver tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Locality: residual of a guess must stay below `c1` times the
    /// interpolant's.
    pub c1: f64,
    /// Convergence: residual below `c2 * h^2`.
    pub c2: f64,
    /// Boundedness: nodal sup norm below `c3`.
    pub c3: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_guesses_per_level: usize,
    /// Finest level at which the full Cartesian enumeration runs.
    pub comb_level_cap: usize,
    pub root_mode: RootMode,
    pub dedup_tol: f64,
    pub imag_tol: f64,
    pub root_dedup_tol: f64,
    /// Gauss-Seidel enumeration sweeps on the coarsest level.
    pub level0_sweeps: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            c1: 10.0,
            c2: 100.0,
            c3: 100.0,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            max_guesses_per_level: 200_000,
            comb_level_cap: 2,
            root_mode: RootMode::RealOnly,
            dedup_tol: 1e-6,
            imag_tol: 1e-9,
            root_dedup_tol: 1e-8,
            level0_sweeps: 2,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        // An infinite filter constant switches that filter off.
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        let positive = [
            ("newton_tol", self.newton_tol),
            ("dedup_tol", self.dedup_tol),
            ("imag_tol", self.imag_tol),
            ("root_dedup_tol", self.root_dedup_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver.{name} must be positive and finite, got {v}")));
            }
        }
        if self.newton_max_iter == 0 || self.max_guesses_per_level == 0 || self.level0_sweeps == 0 {
            return Err(Error::Config(
                "solver.newton_max_iter, solver.max_guesses_per_level and solver.level0_sweeps must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn root_options(&self) -> RootOptions {
        RootOptions { imag_tol: self.imag_tol, dedup_tol: self.root_dedup_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub id: usize,
    pub u: CoefVec,
    pub residual_l2: f64,
    pub newton_iters: usize,
    pub parent_id: Option<usize>,
    pub guess_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    pub level: usize,
    pub h: f64,
    pub records: Vec<SolutionRecord>,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&SolutionRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Per-level counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub h: f64,
    pub parents: usize,
    pub guesses: usize,
    pub truncated: bool,
    pub rejected_locality: usize,
    pub rejected_convergence: usize,
    pub rejected_boundedness: usize,
    pub newton_attempts: usize,
    pub newton_successes: usize,
    pub solutions: usize,
    pub wall_seconds: f64,
}

/// Result of a multilevel run. On failure the sets reached so far are kept.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub sets: Vec<SolutionSet>,
    pub diagnostics: Vec<LevelDiagnostics>,
    pub failure: Option<String>,
}

impl RunResult {
    pub fn finest(&self) -> Option<&SolutionSet> {
        self.sets.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Accept,
    Locality,
    Convergence,
    Boundedness,
}

/// Residual norm used by the filters: Euclidean norm scaled by `h^(d/2)`.
pub fn filter_norm(mesh: &MeshLevel, r: &[f64]) -> f64 {
    euclid(r) * mesh.h.powf(mesh.dim as f64 / 2.0)
}

fn euclid(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Checks locality, convergence and boundedness in that order and reports the
/// first failure.
///
/// An interpolant that already solves the fine problem has zero residual; the
/// locality bound then uses `newton_tol` scaled like the filter norm as a floor,
/// so exact solutions are still accepted.
pub fn filter_verdict(guess_norm: f64, interp_norm: f64, guess_sup: f64, mesh: &MeshLevel, cfg: &FilterConfig) -> FilterVerdict {
    let floor = cfg.newton_tol * mesh.h.powf(mesh.dim as f64 / 2.0);
    if !(guess_norm < cfg.c1 * interp_norm.max(floor)) {
        FilterVerdict::Locality
    } else if !(guess_norm < cfg.c2 * mesh.h * mesh.h) {
        FilterVerdict::Convergence
    } else if !(guess_sup < cfg.c3) {
        FilterVerdict::Boundedness
    } else {
        FilterVerdict::Accept
    }
}

pub fn apply_filters<S: DiscreteSystem + ?Sized>(sys: &S, guess: &[f64], interp: &[f64], cfg: &FilterConfig) -> FilterVerdict {
    let mesh = sys.mesh();
    let gn = filter_norm(mesh, &sys.residual(guess));
    let inn = filter_norm(mesh, &sys.residual(interp));
    filter_verdict(gn, inn, sup(guess), mesh, cfg)
}

/// P1 interpolation of a coarse function onto the next finer level.
pub fn interpolate(u_coarse: &CoefVec, coarse: &MeshLevel, fine: &MeshLevel) -> Result<CoefVec> {
    u_coarse.check(coarse)?;
    if fine.level != coarse.level + 1 || fine.coarse_nodes.len() != coarse.node_count() || fine.dim != coarse.dim {
        return Err(Error::NonConsecutiveLevels { coarse: coarse.level, fine: fine.level });
    }
    let mut v = vec![0.0; fine.node_count()];
    for (k, &f) in fine.coarse_nodes.iter().enumerate() {
        if fine.nodes[f] != coarse.nodes[k] {
            return Err(Error::NonConsecutiveLevels { coarse: coarse.level, fine: fine.level });
        }
        v[f] = u_coarse.values[k];
    }
    for (&m, ends) in fine.new_nodes.iter().zip(&fine.midpoint_of) {
        v[m] = 0.5 * (v[ends[0]] + v[ends[1]]);
    }
    Ok(CoefVec::new(fine.level, v))
}

/// Candidate values at `node`: real roots of the local polynomial within the
/// boundedness constant, or the current value if there are none.
pub fn node_candidates<S: DiscreteSystem + ?Sized>(sys: &S, u: &[f64], node: usize, cfg: &FilterConfig) -> Vec<f64> {
    let roots = local_polynomial(sys, u, node).and_then(|p| {
        if p.degree() == 0 {
            return Ok(Vec::new());
        }
        let rs = poly_roots_with(&p, &cfg.root_options())?;
        Ok(real_roots(&rs, cfg.root_mode, &cfg.root_options()))
    });
    let mut vals = match roots {
        Ok(r) => r,
        Err(e) => {
            log::debug!("node {node}: {e}; using the frozen value");
            Vec::new()
        }
    };
    vals.retain(|v| v.abs() <= cfg.c3);
    if vals.is_empty() {
        vals.push(u[node]);
    }
    vals
}

/// Lazy stream of initial guesses: the interpolant first (id 0), then the
/// Cartesian product of per-node candidates in lexicographic order with the
/// first new node as the most significant digit.
#[derive(Debug, Clone)]
pub struct GuessStream {
    base: Vec<f64>,
    nodes: Vec<usize>,
    candidates: Vec<Vec<f64>>,
    counter: Vec<usize>,
    next_id: usize,
    cap: usize,
    product_done: bool,
}

impl GuessStream {
    pub fn new(base: Vec<f64>, nodes: Vec<usize>, candidates: Vec<Vec<f64>>, cap: usize) -> GuessStream {
        let counter = vec![0; nodes.len()];
        GuessStream { base, nodes, candidates, counter, next_id: 0, cap, product_done: false }
    }

    /// Number of guesses the uncapped stream would produce.
    pub fn full_len(&self) -> u128 {
        1 + self.candidates.iter().map(|c| c.len() as u128).product::<u128>()
    }

    pub fn is_truncated(&self) -> bool {
        self.full_len() > self.cap as u128
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }
}

impl Iterator for GuessStream {
    type Item = (usize, Vec<f64>);

    fn next(&mut self) -> Option<(usize, Vec<f64>)> {
        if self.next_id >= self.cap {
            return None;
        }
        let id = self.next_id;
        if id == 0 {
            self.next_id += 1;
            return Some((0, self.base.clone()));
        }
        if self.product_done {
            return None;
        }
        let mut g = self.base.clone();
        for (k, &node) in self.nodes.iter().enumerate() {
            g[node] = self.candidates[k][self.counter[k]];
        }
        // Advance the mixed-radix counter, least significant digit last.
        let mut k = self.nodes.len();
        loop {
            if k == 0 {
                self.product_done = true;
                break;
            }
            k -= 1;
            self.counter[k] += 1;
            if self.counter[k] < self.candidates[k].len() {
                break;
            }
            self.counter[k] = 0;
        }
        self.next_id += 1;
        Some((id, g))
    }
}

/// Builds the guess stream for one interpolated coarse solution.
pub fn enumerate_guesses<S: DiscreteSystem + ?Sized>(sys: &S, interp: &[f64], cfg: &FilterConfig, cap: usize) -> GuessStream {
    let mesh = sys.mesh();
    let nodes: Vec<usize> = mesh.new_nodes.iter().copied().filter(|&n| sys.is_free(n)).collect();
    let candidates: Vec<Vec<f64>> = nodes.iter().map(|&n| node_candidates(sys, interp, n, cfg)).collect();
    GuessStream::new(interp.to_vec(), nodes, candidates, cap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSuccess {
    pub u: Vec<f64>,
    pub residual_l2: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    MaxIterations { residual_l2: f64 },
    NonFinite,
    Diverged,
    Singular(String),
}

/// Damped Newton iteration. Each step halves the update up to ten times until
/// the residual decreases; if none does, the full step is taken.
pub fn newton<S: DiscreteSystem + ?Sized>(sys: &S, guess: &[f64], cfg: &FilterConfig) -> std::result::Result<NewtonSuccess, NewtonFailure> {
    let free = sys.free_nodes();
    let mut u = guess.to_vec();
    sys.enforce_constraints(&mut u);
    let start_scale = sup(&u).max(1.0);
    let mut r = sys.residual(&u);
    let mut norm = euclid(&r);
    for it in 0..=cfg.newton_max_iter {
        if !norm.is_finite() {
            return Err(NewtonFailure::NonFinite);
        }
        if norm < cfg.newton_tol {
            return Ok(NewtonSuccess { u, residual_l2: norm, iterations: it });
        }
        if it == cfg.newton_max_iter {
            break;
        }
        let du = sys.newton_direction(&u, &r).map_err(|e| NewtonFailure::Singular(e.to_string()))?;
        let mut lambda = 1.0;
        let mut fallback: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        let mut accepted = None;
        for _ in 0..=10 {
            let mut trial = u.clone();
            for (k, &node) in free.iter().enumerate() {
                trial[node] -= lambda * du[k];
            }
            let rt = sys.residual(&trial);
            let nt = euclid(&rt);
            if nt.is_finite() && nt < norm {
                accepted = Some((trial, rt, nt));
                break;
            }
            if fallback.is_none() {
                fallback = Some((trial, rt, nt));
            }
            lambda *= 0.5;
        }
        let (nu, nr, nn) = accepted.or(fallback).expect("at least one trial step");
        u = nu;
        r = nr;
        norm = nn;
        if sup(&u) > 1e12 * start_scale {
            return Err(NewtonFailure::Diverged);
        }
    }
    Err(NewtonFailure::MaxIterations { residual_l2: norm })
}

/// L² distance `|u - v| / max(|u|, |v|, 1)`.
pub fn relative_distance(mesh: &MeshLevel, u: &[f64], v: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let nd = p1_norms(mesh, &d).0;
    // Floored at 1 so that numerically-zero solutions compare absolutely.
    let scale = p1_norms(mesh, u).0.max(p1_norms(mesh, v).0).max(1.0);
    nd / scale
}

/// Greedy deduplication keeping first arrivals; ids are renumbered.
pub fn dedup(records: Vec<SolutionRecord>, mesh: &MeshLevel, tol: f64) -> Vec<SolutionRecord> {
    let mut kept: Vec<SolutionRecord> = Vec::new();
    for rec in records {
        if kept.iter().all(|k| relative_distance(mesh, &k.u.values, &rec.u.values) > tol) {
            kept.push(rec);
        }
    }
    for (i, r) in kept.iter_mut().enumerate() {
        r.id = i;
    }
    kept
}

struct Candidate {
    guess: Vec<f64>,
    parent: Option<usize>,
    guess_id: usize,
}

/// Newton on each candidate in parallel, returning successes in input order.
fn refine_candidates<S: DiscreteSystem + ?Sized>(sys: &S, cands: Vec<Candidate>, cfg: &FilterConfig, diag: &mut LevelDiagnostics) -> Vec<SolutionRecord> {
    diag.newton_attempts += cands.len();
    let level = sys.mesh().level;
    let results: Vec<Option<SolutionRecord>> = cands
        .into_par_iter()
        .map(|c| match newton(sys, &c.guess, cfg) {
            Ok(s) => Some(SolutionRecord {
                id: 0,
                u: CoefVec::new(level, s.u),
                residual_l2: s.residual_l2,
                newton_iters: s.iterations,
                parent_id: c.parent,
                guess_id: c.guess_id,
            }),
            Err(f) => {
                log::debug!("level {level} guess {}: newton failed: {f:?}", c.guess_id);
                None
            }
        })
        .collect();
    let ok: Vec<SolutionRecord> = results.into_iter().flatten().collect();
    diag.newton_successes += ok.len();
    ok
}

fn bounded(records: Vec<SolutionRecord>, cfg: &FilterConfig) -> Vec<SolutionRecord> {
    records.into_iter().filter(|r| r.u.sup_norm() < cfg.c3).collect()
}

/// Coarsest-level solve. One free node: the roots of its polynomial. Several:
/// Gauss-Seidel tree enumeration of per-node roots, Newton on every leaf.
pub fn solve_level0<S: DiscreteSystem + ?Sized>(sys: &S, cfg: &FilterConfig) -> Result<(SolutionSet, LevelDiagnostics)> {
    let t0 = Instant::now();
    let mesh = sys.mesh();
    let mut diag = LevelDiagnostics { level: mesh.level, h: mesh.h, ..Default::default() };
    let free = sys.free_nodes().to_vec();
    let mut reversed = free.clone();
    reversed.reverse();
    let orders = if free.len() > 1 { vec![free.clone(), reversed] } else { vec![free.clone()] };
    let seed = sys.constrained_vector();

    let mut leaves: Vec<Vec<f64>> = vec![seed];
    for _ in 0..cfg.level0_sweeps {
        let mut next: Vec<Vec<f64>> = Vec::new();
        'seeds: for s in &leaves {
            // Sweeping in both node orders reaches branches a one-directional
            // sweep from the same seed cannot.
            for order in &orders {
                expand_tree(sys, s.clone(), order, 0, cfg, cfg.max_guesses_per_level, &mut next);
                if next.len() >= cfg.max_guesses_per_level {
                    diag.truncated = true;
                    break 'seeds;
                }
            }
        }
        // Identical leaves from different seeds only need one Newton run.
        next.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        next.dedup();
        leaves = next;
        if free.len() <= 1 {
            break;
        }
    }
    if diag.truncated {
        log::warn!("level 0 enumeration truncated at {} leaves", cfg.max_guesses_per_level);
    }
    diag.guesses = leaves.len();
    let cands = leaves
        .into_iter()
        .enumerate()
        .map(|(i, guess)| Candidate { guess, parent: None, guess_id: i })
        .collect();
    let found = bounded(refine_candidates(sys, cands, cfg, &mut diag), cfg);
    let records = dedup(found, mesh, cfg.dedup_tol);
    diag.solutions = records.len();
    diag.wall_seconds = t0.elapsed().as_secs_f64();
    if records.is_empty() {
        return Err(Error::NoSolutions {
            level: mesh.level,
            hint: "raise solver.c3, solver.max_guesses_per_level or solver.level0_sweeps".into(),
        });
    }
    Ok((SolutionSet { level: mesh.level, h: mesh.h, records }, diag))
}

fn expand_tree<S: DiscreteSystem + ?Sized>(
    sys: &S,
    mut u: Vec<f64>,
    free: &[usize],
    depth: usize,
    cfg: &FilterConfig,
    cap: usize,
    out: &mut Vec<Vec<f64>>,
) {
    if out.len() >= cap {
        return;
    }
    if depth == free.len() {
        out.push(u);
        return;
    }
    let node = free[depth];
    for y in node_candidates(sys, &u, node, cfg) {
        u[node] = y;
        expand_tree(sys, u.clone(), free, depth + 1, cfg, cap, out);
    }
}

/// Processes one refinement level given the coarse solutions.
pub fn solve_level<S: DiscreteSystem + ?Sized>(
    sys: &S,
    coarse_mesh: &MeshLevel,
    coarse: &SolutionSet,
    cfg: &FilterConfig,
    extra_guesses: &[Vec<f64>],
) -> Result<(SolutionSet, LevelDiagnostics)> {
    let t0 = Instant::now();
    let mesh = sys.mesh();
    let mut diag = LevelDiagnostics { level: mesh.level, h: mesh.h, parents: coarse.len(), ..Default::default() };
    let combinatorial = mesh.level <= cfg.comb_level_cap;
    let mut found = Vec::new();
    let mut budget = cfg.max_guesses_per_level;

    for parent in &coarse.records {
        let mut interp = interpolate(&parent.u, coarse_mesh, mesh)?.values;
        sys.enforce_constraints(&mut interp);
        if !combinatorial {
            diag.guesses += 1;
            let c = Candidate { guess: interp, parent: Some(parent.id), guess_id: 0 };
            found.extend(refine_candidates(sys, vec![c], cfg, &mut diag));
            continue;
        }
        if budget == 0 {
            diag.truncated = true;
            break;
        }
        let stream = enumerate_guesses(sys, &interp, cfg, budget);
        if stream.is_truncated() {
            diag.truncated = true;
            log::warn!(
                "level {}: parent {} has {} guesses; truncating to {budget}",
                mesh.level,
                parent.id,
                stream.full_len()
            );
        }
        let interp_norm = filter_norm(mesh, &sys.residual(&interp));
        let mut stream = stream.peekable();
        while stream.peek().is_some() {
            let chunk: Vec<(usize, Vec<f64>)> = stream.by_ref().take(4096).collect();
            budget -= chunk.len();
            diag.guesses += chunk.len();
            let verdicts: Vec<FilterVerdict> = chunk
                .par_iter()
                .map(|(_, g)| filter_verdict(filter_norm(mesh, &sys.residual(g)), interp_norm, sup(g), mesh, cfg))
                .collect();
            let mut accepted = Vec::new();
            for ((id, g), v) in chunk.into_iter().zip(verdicts) {
                match v {
                    FilterVerdict::Accept => accepted.push(Candidate { guess: g, parent: Some(parent.id), guess_id: id }),
                    FilterVerdict::Locality => diag.rejected_locality += 1,
                    FilterVerdict::Convergence => diag.rejected_convergence += 1,
                    FilterVerdict::Boundedness => diag.rejected_boundedness += 1,
                }
            }
            found.extend(refine_candidates(sys, accepted, cfg, &mut diag));
        }
    }
    if !extra_guesses.is_empty() {
        diag.guesses += extra_guesses.len();
        let cands = extra_guesses
            .iter()
            .enumerate()
            .map(|(i, g)| Candidate { guess: g.clone(), parent: None, guess_id: i })
            .collect();
        found.extend(refine_candidates(sys, cands, cfg, &mut diag));
    }
    let records = dedup(bounded(found, cfg), mesh, cfg.dedup_tol);
    diag.solutions = records.len();
    diag.wall_seconds = t0.elapsed().as_secs_f64();
    Ok((SolutionSet { level: mesh.level, h: mesh.h, records }, diag))
}

/// Runs the full pipeline over a hierarchy.
pub fn cbmfem_run<B: SystemBuilder + ?Sized>(builder: &B, hierarchy: &MeshHierarchy, cfg: &FilterConfig) -> RunResult {
    cbmfem_run_seeded(builder, hierarchy, cfg, &[])
}

/// As [`cbmfem_run`], with extra initial guesses Newton-refined on the finest
/// level (used for natural continuation).
pub fn cbmfem_run_seeded<B: SystemBuilder + ?Sized>(builder: &B, hierarchy: &MeshHierarchy, cfg: &FilterConfig, finest_seeds: &[Vec<f64>]) -> RunResult {
    let mut out = RunResult { sets: Vec::new(), diagnostics: Vec::new(), failure: None };
    if let Err(e) = cfg.validate() {
        out.failure = Some(e.to_string());
        return out;
    }
    let last = hierarchy.len().saturating_sub(1);
    for (l, mesh) in hierarchy.levels.iter().enumerate() {
        let step = builder.build(mesh).and_then(|sys| {
            if l == 0 {
                let (mut set, mut diag) = solve_level0(&sys, cfg)?;
                if l == last && !finest_seeds.is_empty() {
                    let t0 = Instant::now();
                    let cands = finest_seeds
                        .iter()
                        .enumerate()
                        .map(|(i, g)| Candidate { guess: g.clone(), parent: None, guess_id: i })
                        .collect();
                    let mut all = set.records.clone();
                    all.extend(bounded(refine_candidates(&sys, cands, cfg, &mut diag), cfg));
                    set.records = dedup(all, mesh, cfg.dedup_tol);
                    diag.solutions = set.records.len();
                    diag.wall_seconds += t0.elapsed().as_secs_f64();
                }
                Ok((set, diag))
            } else {
                let seeds = if l == last { finest_seeds } else { &[] };
                solve_level(&sys, &hierarchy.levels[l - 1], out.sets.last().unwrap(), cfg, seeds)
            }
        });
        match step {
            Ok((set, diag)) => {
                log::info!("level {l}: {} solutions from {} guesses", set.len(), diag.guesses);
                let empty = set.is_empty();
                out.sets.push(set);
                out.diagnostics.push(diag);
                if empty {
                    out.failure = Some(
                        Error::NoSolutions { level: l, hint: "every guess was filtered out or failed Newton; relax solver.c1/c2/c3".into() }
                            .to_string(),
                    );
                    break;
                }
            }
            Err(e) => {
                out.failure = Some(e.to_string());
                break;
            }
        }
    }
    out
}
