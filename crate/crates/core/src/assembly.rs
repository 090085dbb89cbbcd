//! P1 finite element residual and Jacobian for `-Δu + f(x, u) = 0`.
//!
//! Dirichlet nodes are eliminated: the residual and Jacobian live on free
//! nodes only, while nodal vectors stay full length with prescribed values in
//! the Dirichlet slots. Element quadrature is exact for the polynomial
//! integrands, which makes each residual component an exact polynomial in any
//! single nodal value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{rcm_ordering, BandedLu, CsrMatrix};
use crate::mesh::{BoundaryTag, MeshLevel};
use crate::nonlinearity::{horner, horner_with_derivative, BoundaryCondition, PolyNonlinearity};
use crate::problem::ProblemSpec;
use crate::quadrature::{LineRule, TriangleRule};
use crate::system::{DiscreteSystem, SystemBuilder};

/// Nodal coefficients of a P1 function on one mesh level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefVec {
    pub level: usize,
    pub values: Vec<f64>,
}

impl CoefVec {
    pub fn new(level: usize, values: Vec<f64>) -> CoefVec {
        CoefVec { level, values }
    }

    pub fn check(&self, mesh: &MeshLevel) -> Result<()> {
        if self.level != mesh.level {
            return Err(Error::LevelMismatch { expected: mesh.level, actual: self.level });
        }
        if self.values.len() != mesh.node_count() {
            return Err(Error::InvalidInput(format!(
                "vector has {} entries but level {} has {} nodes",
                self.values.len(),
                mesh.level,
                mesh.node_count()
            )));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
struct QuadPoint {
    weight: f64,
    phi: [f64; 3],
    coefs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ElementData {
    nodes: Vec<usize>,
    stiffness: Vec<f64>,
    quad: Vec<QuadPoint>,
    /// Jacobian value positions for local pairs (a, b); `usize::MAX` when a
    /// row or column is a Dirichlet node.
    jac_pos: Vec<usize>,
}

#[derive(Debug, Clone)]
struct BoundaryData {
    nodes: Vec<usize>,
    mass: Vec<f64>,
    load: Vec<f64>,
    jac_pos: Vec<usize>,
}

/// Precomputed P1 discretisation of a scalar problem on one mesh level.
#[derive(Debug, Clone)]
pub struct ScalarProblem {
    mesh: MeshLevel,
    dirichlet: Vec<Option<f64>>,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
    elements: Vec<ElementData>,
    boundary: Vec<BoundaryData>,
    node_elements: Vec<Vec<(usize, usize)>>,
    node_boundary: Vec<Vec<(usize, usize)>>,
    pattern: CsrMatrix,
    ordering: Vec<usize>,
    degree: usize,
}

/// Polynomial degree in `x` of the residual and Jacobian integrands.
fn integrand_degree(nl: &PolyNonlinearity) -> usize {
    nl.terms
        .iter()
        .map(|t| t.power + 1 + t.coef.quadrature_degree())
        .max()
        .unwrap_or(0)
        .max(2)
}

/// Local P1 stiffness matrix (row-major) and the element measure.
pub(crate) fn local_stiffness(mesh: &MeshLevel, e: usize) -> (Vec<f64>, f64) {
    let el = &mesh.elements[e];
    let meas = mesh.element_measure(e).abs();
    if mesh.dim == 1 {
        let k = 1.0 / meas;
        (vec![k, -k, -k, k], meas)
    } else {
        let p: Vec<[f64; 2]> = el.iter().map(|&n| mesh.nodes[n]).collect();
        let two_a = 2.0 * mesh.element_measure(e);
        let grads = [
            [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
            [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
            [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
        ];
        let mut k = vec![0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                k[3 * a + b] = meas * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            }
        }
        (k, meas)
    }
}

/// Local P1 mass matrix (row-major).
pub(crate) fn local_mass(dim: usize, meas: f64) -> Vec<f64> {
    if dim == 1 {
        let s = meas / 6.0;
        vec![2.0 * s, s, s, 2.0 * s]
    } else {
        let s = meas / 12.0;
        (0..9).map(|k| if k % 4 == 0 { 2.0 * s } else { s }).collect()
    }
}

/// Quadrature points of element `e` with physical weights and basis values.
pub(crate) fn element_quadrature(mesh: &MeshLevel, e: usize, degree: usize) -> Vec<([f64; 2], f64, [f64; 3])> {
    let el = &mesh.elements[e];
    let meas = mesh.element_measure(e).abs();
    if mesh.dim == 1 {
        let rule = LineRule::for_degree(degree);
        let (x0, x1) = (mesh.nodes[el[0]][0], mesh.nodes[el[1]][0]);
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| ([x0 + t * (x1 - x0), 0.0], w * meas, [1.0 - t, t, 0.0]))
            .collect()
    } else {
        let rule = TriangleRule::for_degree(degree);
        let p: Vec<[f64; 2]> = el.iter().map(|&n| mesh.nodes[n]).collect();
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, &w)| {
                let x = [
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ];
                (x, w * meas, *l)
            })
            .collect()
    }
}

impl ScalarProblem {
    pub fn new(mesh: &MeshLevel, spec: &ProblemSpec) -> Result<ScalarProblem> {
        if mesh.dim != spec.domain.dim() {
            return Err(Error::InvalidInput(format!(
                "mesh dimension {} does not match the problem domain",
                mesh.dim
            )));
        }
        let n = mesh.node_count();
        let nl = &spec.nonlinearity;
        let degree = nl.degree().max(1);
        let qdeg = integrand_degree(nl);

        let dirichlet: Vec<Option<f64>> = (0..n)
            .map(|i| {
                if mesh.tags[i] != BoundaryTag::Dirichlet {
                    return None;
                }
                // Dirichlet wins at corners; take the value from a Dirichlet segment.
                mesh.segments[i].iter().find_map(|s| spec.boundary.dirichlet_value(*s))
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| dirichlet[i].is_none()).collect();
        let mut free_index = vec![None; n];
        for (k, &i) in free.iter().enumerate() {
            free_index[i] = Some(k);
        }

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); free.len()];
        for el in &mesh.elements {
            for &a in el {
                for &b in el {
                    if let (Some(fa), Some(fb)) = (free_index[a], free_index[b]) {
                        rows[fa].push(fb);
                    }
                }
            }
        }
        let pattern = CsrMatrix::from_pattern(free.len(), rows);
        let ordering = rcm_ordering(&pattern);
        let pos = |a: usize, b: usize| -> usize {
            match (free_index[a], free_index[b]) {
                (Some(fa), Some(fb)) => pattern.position(fa, fb).expect("pattern covers element pairs"),
                _ => usize::MAX,
            }
        };

        let mut elements = Vec::with_capacity(mesh.element_count());
        let mut node_elements = vec![Vec::new(); n];
        for e in 0..mesh.element_count() {
            let nodes = mesh.elements[e].clone();
            let (stiffness, _) = local_stiffness(mesh, e);
            let quad = element_quadrature(mesh, e, qdeg)
                .into_iter()
                .map(|(x, weight, phi)| QuadPoint { weight, phi, coefs: nl.coefficients_at(x) })
                .collect();
            let mut jac_pos = Vec::with_capacity(nodes.len() * nodes.len());
            for &a in &nodes {
                for &b in &nodes {
                    jac_pos.push(pos(a, b));
                }
            }
            for (local, &node) in nodes.iter().enumerate() {
                node_elements[node].push((e, local));
            }
            elements.push(ElementData { nodes, stiffness, quad, jac_pos });
        }

        let mut boundary = Vec::new();
        let mut node_boundary = vec![Vec::new(); n];
        for f in &mesh.facets {
            let (ab, g) = match spec.boundary.get(f.segment) {
                None => (0.0, 0.0),
                Some(BoundaryCondition::Neumann { g }) => (0.0, *g),
                Some(BoundaryCondition::Robin { alpha_over_beta, g }) => (*alpha_over_beta, *g),
                Some(BoundaryCondition::Dirichlet { .. }) => continue,
            };
            if ab == 0.0 && g == 0.0 {
                continue;
            }
            let (mass, load) = if mesh.dim == 1 {
                (vec![ab], vec![g])
            } else {
                let (p, q) = (mesh.nodes[f.nodes[0]], mesh.nodes[f.nodes[1]]);
                let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                let s = ab * len / 6.0;
                (vec![2.0 * s, s, s, 2.0 * s], vec![g * len / 2.0; 2])
            };
            let mut jac_pos = Vec::new();
            for &a in &f.nodes {
                for &b in &f.nodes {
                    jac_pos.push(pos(a, b));
                }
            }
            let idx = boundary.len();
            for (local, &node) in f.nodes.iter().enumerate() {
                node_boundary[node].push((idx, local));
            }
            boundary.push(BoundaryData { nodes: f.nodes.clone(), mass, load, jac_pos });
        }

        Ok(ScalarProblem {
            mesh: mesh.clone(),
            dirichlet,
            free,
            free_index,
            elements,
            boundary,
            node_elements,
            node_boundary,
            pattern,
            ordering,
            degree,
        })
    }

    /// Full-length nodal residual (Dirichlet rows included, unused).
    fn nodal_residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; u.len()];
        for el in &self.elements {
            let k = el.nodes.len();
            for a in 0..k {
                let mut s = 0.0;
                for b in 0..k {
                    s += el.stiffness[a * k + b] * u[el.nodes[b]];
                }
                r[el.nodes[a]] += s;
            }
            for q in &el.quad {
                let uq: f64 = (0..k).map(|a| q.phi[a] * u[el.nodes[a]]).sum();
                let fq = q.weight * horner(&q.coefs, uq);
                for a in 0..k {
                    r[el.nodes[a]] += fq * q.phi[a];
                }
            }
        }
        for bd in &self.boundary {
            let k = bd.nodes.len();
            for a in 0..k {
                let mut s = -bd.load[a];
                for b in 0..k {
                    s += bd.mass[a * k + b] * u[bd.nodes[b]];
                }
                r[bd.nodes[a]] += s;
            }
        }
        r
    }

    pub fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        let mut j = self.pattern.clone();
        for el in &self.elements {
            let k = el.nodes.len();
            for a in 0..k {
                for b in 0..k {
                    let p = el.jac_pos[a * k + b];
                    if p != usize::MAX {
                        j.values[p] += el.stiffness[a * k + b];
                    }
                }
            }
            for q in &el.quad {
                let uq: f64 = (0..k).map(|a| q.phi[a] * u[el.nodes[a]]).sum();
                let (_, dfq) = horner_with_derivative(&q.coefs, uq);
                let w = q.weight * dfq;
                for a in 0..k {
                    for b in 0..k {
                        let p = el.jac_pos[a * k + b];
                        if p != usize::MAX {
                            j.values[p] += w * q.phi[a] * q.phi[b];
                        }
                    }
                }
            }
        }
        for bd in &self.boundary {
            for (idx, &p) in bd.jac_pos.iter().enumerate() {
                if p != usize::MAX {
                    j.values[p] += bd.mass[idx];
                }
            }
        }
        j
    }

    pub fn dirichlet_value(&self, node: usize) -> Option<f64> {
        self.dirichlet[node]
    }
}

impl DiscreteSystem for ScalarProblem {
    fn mesh(&self) -> &MeshLevel {
        &self.mesh
    }

    fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    fn local_degree(&self) -> usize {
        self.degree
    }

    fn constrained_vector(&self) -> Vec<f64> {
        self.dirichlet.iter().map(|d| d.unwrap_or(0.0)).collect()
    }

    fn enforce_constraints(&self, u: &mut [f64]) {
        for (ui, d) in u.iter_mut().zip(&self.dirichlet) {
            if let Some(v) = d {
                *ui = *v;
            }
        }
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let r = self.nodal_residual(u);
        self.free.iter().map(|&i| r[i]).collect()
    }

    fn residual_component(&self, u: &[f64], node: usize) -> f64 {
        let mut r = 0.0;
        for &(e, a) in &self.node_elements[node] {
            let el = &self.elements[e];
            let k = el.nodes.len();
            for b in 0..k {
                r += el.stiffness[a * k + b] * u[el.nodes[b]];
            }
            for q in &el.quad {
                let uq: f64 = (0..k).map(|c| q.phi[c] * u[el.nodes[c]]).sum();
                r += q.weight * horner(&q.coefs, uq) * q.phi[a];
            }
        }
        for &(f, a) in &self.node_boundary[node] {
            let bd = &self.boundary[f];
            let k = bd.nodes.len();
            r -= bd.load[a];
            for b in 0..k {
                r += bd.mass[a * k + b] * u[bd.nodes[b]];
            }
        }
        r
    }

    fn newton_direction(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let j = self.jacobian(u);
        Ok(BandedLu::factor(&j, &self.ordering)?.solve(r))
    }
}

impl SystemBuilder for ProblemSpec {
    type System = ScalarProblem;

    fn build(&self, mesh: &MeshLevel) -> Result<ScalarProblem> {
        ScalarProblem::new(mesh, self)
    }
}

/// Residual over free nodes.
pub fn residual(mesh: &MeshLevel, spec: &ProblemSpec, u: &CoefVec) -> Result<Vec<f64>> {
    u.check(mesh)?;
    Ok(ScalarProblem::new(mesh, spec)?.residual(&u.values))
}

/// Jacobian over free nodes.
pub fn jacobian(mesh: &MeshLevel, spec: &ProblemSpec, u: &CoefVec) -> Result<CsrMatrix> {
    u.check(mesh)?;
    Ok(ScalarProblem::new(mesh, spec)?.jacobian(&u.values))
}

/// Exact L² norm and full H¹ norm of a P1 function given by nodal values.
pub fn p1_norms(mesh: &MeshLevel, e: &[f64]) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for (idx, el) in mesh.elements.iter().enumerate() {
        let (k, meas) = local_stiffness(mesh, idx);
        let m = local_mass(mesh.dim, meas);
        let n = el.len();
        for a in 0..n {
            for b in 0..n {
                let w = e[el[a]] * e[el[b]];
                l2 += m[a * n + b] * w;
                semi += k[a * n + b] * w;
            }
        }
    }
    let l2 = l2.max(0.0);
    (l2.sqrt(), (l2 + semi.max(0.0)).sqrt())
}

pub fn l2_norm(mesh: &MeshLevel, u: &[f64]) -> f64 {
    p1_norms(mesh, u).0
}

/// L² and H¹ norms of `u - v`.
pub fn energy_norms(mesh: &MeshLevel, u: &CoefVec, v: &CoefVec) -> Result<(f64, f64)> {
    u.check(mesh)?;
    v.check(mesh)?;
    let e: Vec<f64> = u.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
    Ok(p1_norms(mesh, &e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, Segment};
    use crate::nonlinearity::{BoundarySpec, CoefFn};
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn example2() -> ProblemSpec {
        ProblemSpec::new(
            "example2",
            Domain::Interval { a: 0.0, b: 1.0 },
            BoundarySpec::new()
                .with(Segment::Left, BoundaryCondition::Dirichlet { value: 0.0 })
                .with(Segment::Right, BoundaryCondition::Dirichlet { value: 1.0 }),
            PolyNonlinearity::default().term(2, CoefFn::constant(1.0)),
        )
        .unwrap()
    }

    fn ex2_like() -> ProblemSpec {
        ProblemSpec::new(
            "ex2",
            Domain::Interval { a: 0.0, b: 1.0 },
            BoundarySpec::new().with(Segment::Right, BoundaryCondition::Dirichlet { value: 0.0 }),
            PolyNonlinearity::default().term(0, CoefFn::constant(-1.0)).term(4, CoefFn::constant(-1.0)),
        )
        .unwrap()
    }

    fn square_2d() -> ProblemSpec {
        ProblemSpec::new(
            "2d",
            Domain::UnitSquare,
            BoundarySpec::uniform(BoundaryCondition::Dirichlet { value: 0.0 })
                .with(Segment::Top, BoundaryCondition::Robin { alpha_over_beta: 2.0, g: 0.5 }),
            PolyNonlinearity::default()
                .term(2, CoefFn::constant(-1.0))
                .term(0, CoefFn::SineProduct { s: 30.0 })
                .term(3, CoefFn::PolyX { coeffs: vec![0.1, 0.2] }),
        )
        .unwrap()
    }

    #[test]
    fn residual_of_linear_interpolant_matches_hand_integral() {
        // -u'' + u^2 = 0 with u = x on the 3-node mesh. The stiffness part
        // vanishes at the midpoint; the rest is int x^2 phi(x) dx.
        let spec = example2();
        let mesh = spec.initial_mesh().unwrap();
        let u = CoefVec::new(0, vec![0.0, 0.5, 1.0]);
        let r = residual(&mesh, &spec, &u).unwrap();
        let hat = |x: f64| if x <= 0.5 { 2.0 * x } else { 2.0 * (1.0 - x) };
        let oracle = simpson(|x| x * x * hat(x), 0.0, 0.5, 64) + simpson(|x| x * x * hat(x), 0.5, 1.0, 64);
        assert_eq!(r.len(), 1);
        assert!((r[0] - oracle).abs() < 1e-14, "{} vs {}", r[0], oracle);
        assert!((oracle - 7.0 / 48.0).abs() < 1e-14);
    }

    #[test]
    fn zero_problem_zero_residual() {
        let spec = ProblemSpec::new(
            "zero",
            Domain::UnitSquare,
            BoundarySpec::uniform(BoundaryCondition::Neumann { g: 0.0 }),
            PolyNonlinearity::default(),
        )
        .unwrap();
        let hier = spec.hierarchy(2).unwrap();
        let mesh = hier.finest();
        let u = CoefVec::new(2, vec![0.0; mesh.node_count()]);
        assert!(residual(mesh, &spec, &u).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn one_d_laplacian_is_tridiagonal() {
        let spec = ProblemSpec::new(
            "lap",
            Domain::Interval { a: 0.0, b: 1.0 },
            BoundarySpec::new()
                .with(Segment::Left, BoundaryCondition::Dirichlet { value: 0.0 })
                .with(Segment::Right, BoundaryCondition::Dirichlet { value: 0.0 }),
            PolyNonlinearity::default(),
        )
        .unwrap();
        let hier = spec.hierarchy(3).unwrap();
        let mesh = hier.finest();
        let u = CoefVec::new(3, vec![0.3; mesh.node_count()]);
        let j = jacobian(mesh, &spec, &u).unwrap().to_dense();
        let h = mesh.h;
        for r in 0..j.nrows() {
            for c in 0..j.ncols() {
                let expected = match r.abs_diff(c) {
                    0 => 2.0 / h,
                    1 => -1.0 / h,
                    _ => 0.0,
                };
                assert!((j[(r, c)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_f_gives_state_independent_jacobian() {
        let spec = ProblemSpec::new(
            "lin",
            Domain::Interval { a: 0.0, b: 1.0 },
            BoundarySpec::new().with(Segment::Right, BoundaryCondition::Dirichlet { value: 0.0 }),
            PolyNonlinearity::default().term(1, CoefFn::constant(3.0)).term(0, CoefFn::constant(1.0)),
        )
        .unwrap();
        let hier = spec.hierarchy(2).unwrap();
        let m = hier.finest();
        let p = ScalarProblem::new(m, &spec).unwrap();
        let a: Vec<f64> = (0..m.node_count()).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..m.node_count()).map(|i| -(i as f64).sin()).collect();
        assert_eq!(p.jacobian(&a), p.jacobian(&b));
    }

    fn fd_check(spec: &ProblemSpec, level: usize, u: &[f64]) {
        let hier = spec.hierarchy(level).unwrap();
        let mesh = hier.finest();
        let p = ScalarProblem::new(mesh, spec).unwrap();
        let mut u = u.to_vec();
        p.enforce_constraints(&mut u);
        let j = p.jacobian(&u).to_dense();
        let eps = 1e-6;
        for (col, &node) in p.free_nodes().iter().enumerate() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[node] += eps;
            dn[node] -= eps;
            let (rp, rn) = (p.residual(&up), p.residual(&dn));
            for row in 0..rp.len() {
                let fd = (rp[row] - rn[row]) / (2.0 * eps);
                let scale = j.column(col).amax().max(1.0);
                assert!((fd - j[(row, col)]).abs() <= 1e-5 * scale, "J[{row},{col}] = {} vs fd {fd}", j[(row, col)]);
            }
        }
    }

    #[test]
    fn hat_function_norms() {
        let spec = example2();
        let hier = spec.hierarchy(2).unwrap();
        let mesh = hier.finest();
        let mut e = vec![0.0; mesh.node_count()];
        e[3] = 1.0;
        let (l2, h1) = p1_norms(mesh, &e);
        let h = mesh.h;
        assert!((l2 - (2.0 * h / 3.0).sqrt()).abs() < 1e-14);
        assert!((h1 - (2.0 * h / 3.0 + 2.0 / h).sqrt()).abs() < 1e-13);
        let ones = vec![1.0; mesh.node_count()];
        let (l2, h1) = p1_norms(mesh, &ones);
        assert!((l2 - 1.0).abs() < 1e-14 && (h1 - 1.0).abs() < 1e-14);
        let u = CoefVec::new(2, ones.clone());
        assert_eq!(energy_norms(mesh, &u, &u).unwrap(), (0.0, 0.0));
        assert!(matches!(energy_norms(mesh, &CoefVec::new(1, ones.clone()), &u), Err(Error::LevelMismatch { .. })));
    }

    #[test]
    fn residual_component_agrees_with_full_residual() {
        for spec in [ex2_like(), square_2d()] {
            let hier = spec.hierarchy(2).unwrap();
            let mesh = hier.finest();
            let p = ScalarProblem::new(mesh, &spec).unwrap();
            let mut u: Vec<f64> = (0..mesh.node_count()).map(|i| (i as f64 * 0.7).cos()).collect();
            p.enforce_constraints(&mut u);
            let r = p.residual(&u);
            for (k, &node) in p.free_nodes().iter().enumerate() {
                assert!((p.residual_component(&u, node) - r[k]).abs() < 1e-12 * (1.0 + r[k].abs()));
            }
        }
    }

    #[test]
    fn robin_and_neumann_terms_enter_residual() {
        // -u'' = 0 on [0, 1], u'(0)... with Robin at the left: the residual
        // at x = 0 for u = const c is (alpha/beta) c - g.
        let spec = ProblemSpec::new(
            "robin",
            Domain::Interval { a: 0.0, b: 1.0 },
            BoundarySpec::new()
                .with(Segment::Left, BoundaryCondition::Robin { alpha_over_beta: 2.0, g: 0.5 })
                .with(Segment::Right, BoundaryCondition::Neumann { g: 1.5 }),
            PolyNonlinearity::default(),
        )
        .unwrap();
        let mesh = spec.initial_mesh().unwrap();
        let r = residual(&mesh, &spec, &CoefVec::new(0, vec![3.0; 3])).unwrap();
        assert_eq!(r, vec![2.0 * 3.0 - 0.5, 0.0, -1.5]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn jacobian_matches_finite_differences_1d(seed in proptest::collection::vec(-2.0f64..2.0, 9)) {
            fd_check(&ex2_like(), 2, &seed);
        }

        #[test]
        fn jacobian_matches_finite_differences_2d(seed in proptest::collection::vec(-2.0f64..2.0, 41)) {
            fd_check(&square_2d(), 2, &seed);
        }

        #[test]
        fn element_order_does_not_matter(seed in proptest::collection::vec(-2.0f64..2.0, 41), shift in 1usize..63) {
            let spec = square_2d();
            let hier = spec.hierarchy(2).unwrap();
            let mesh = hier.finest();
            let mut shuffled = mesh.clone();
            let n = shuffled.elements.len();
            shuffled.elements = (0..n).map(|k| mesh.elements[(k * shift + 7) % n].clone()).collect();
            // A non-coprime stride repeats elements; only keep permutations.
            let mut seen = shuffled.elements.clone();
            seen.sort();
            seen.dedup();
            prop_assume!(seen.len() == n);
            let a = ScalarProblem::new(mesh, &spec).unwrap();
            let b = ScalarProblem::new(&shuffled, &spec).unwrap();
            let mut u = seed.clone();
            a.enforce_constraints(&mut u);
            for (x, y) in a.residual(&u).iter().zip(b.residual(&u)) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
