//! Two-field reaction-diffusion steady states whose only nonlinearity is one
//! coupling monomial `κ u²v`, entering the two equations with opposite signs:
//!
//! ```text
//! d_u Δu + c₀ + c_u u + c_v v + κ u²v = 0
//! d_v Δv + e₀ + e_u u + e_v v − κ u²v = 0
//! ```
//!
//! with zero-flux boundaries. Adding the equations cancels the coupling, so
//! `u` is an affine function of `v`; substituting into the second equation
//! leaves a scalar system in `v` that is cubic in every nodal value.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{element_quadrature, local_mass, local_stiffness, CoefVec};
use crate::cbmfem::{cbmfem_run, newton, FilterConfig, LevelDiagnostics};
use crate::error::{Error, Result};
use crate::linalg::dense_solve;
use crate::mesh::{build_hierarchy, Domain, MeshHierarchy, MeshLevel};
use crate::nonlinearity::BoundarySpec;
use crate::system::{DiscreteSystem, SystemBuilder};

/// Constant and linear reaction coefficients of one equation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearPart {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub v: f64,
}

impl LinearPart {
    fn eval(&self, u: f64, v: f64) -> f64 {
        self.constant + self.u * u + self.v * v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoFieldSpec {
    pub name: String,
    pub domain: Domain,
    pub d_u: f64,
    pub d_v: f64,
    pub first: LinearPart,
    pub second: LinearPart,
    pub coupling: f64,
}

impl TwoFieldSpec {
    /// `u'' + η(a − u + u²v) = 0`, `d v'' + η(b − u²v) = 0`.
    pub fn schnakenberg(a: f64, b: f64, d: f64, eta: f64) -> Result<TwoFieldSpec> {
        TwoFieldSpec {
            name: "schnakenberg".into(),
            domain: Domain::Interval { a: 0.0, b: 1.0 },
            d_u: 1.0,
            d_v: d,
            first: LinearPart { constant: eta * a, u: -eta, v: 0.0 },
            second: LinearPart { constant: eta * b, u: 0.0, v: 0.0 },
            coupling: eta,
        }
        .validated()
    }

    /// `D_A ΔA + S A² − (μ+ρ)A = 0`, `D_S ΔS + ρ(1 − S) − S A² = 0` with
    /// `u = A`, `v = S`.
    pub fn gray_scott(domain: Domain, d_a: f64, d_s: f64, mu: f64, rho: f64) -> Result<TwoFieldSpec> {
        TwoFieldSpec {
            name: "grayscott".into(),
            domain,
            d_u: d_a,
            d_v: d_s,
            first: LinearPart { constant: 0.0, u: -(mu + rho), v: 0.0 },
            second: LinearPart { constant: rho, u: 0.0, v: -rho },
            coupling: 1.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<TwoFieldSpec> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !(self.d_u > 0.0 && self.d_v > 0.0 && self.d_u.is_finite() && self.d_v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "diffusions must be positive and finite, got d_u={} d_v={}",
                self.d_u, self.d_v
            )));
        }
        let consts = [
            self.first.constant,
            self.first.u,
            self.first.v,
            self.second.constant,
            self.second.u,
            self.second.v,
            self.coupling,
        ];
        if consts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("reaction constants must be finite".into()));
        }
        Ok(())
    }

    pub fn hierarchy(&self, max_level: usize) -> Result<MeshHierarchy> {
        build_hierarchy(&self.domain, &BoundarySpec::new(), max_level)
    }

    /// Pointwise reaction terms of both equations at `(u, v)`.
    pub fn reaction(&self, u: f64, v: f64) -> (f64, f64) {
        let c = self.coupling * u * u * v;
        (self.first.eval(u, v) + c, self.second.eval(u, v) - c)
    }
}

struct QuadPoint {
    weight: f64,
    phi: [f64; 3],
}

/// Per-element data shared by the reduced and unreduced assemblies.
struct Elements {
    stiff: Vec<Vec<f64>>,
    mass: Vec<Vec<f64>>,
    quad: Vec<Vec<QuadPoint>>,
    node_elements: Vec<Vec<usize>>,
}

impl Elements {
    fn new(mesh: &MeshLevel) -> Elements {
        let n = mesh.node_count();
        let mut node_elements = vec![Vec::new(); n];
        let mut stiff = Vec::with_capacity(mesh.element_count());
        let mut mass = Vec::with_capacity(mesh.element_count());
        let mut quad = Vec::with_capacity(mesh.element_count());
        for (e, el) in mesh.elements.iter().enumerate() {
            for &a in el {
                node_elements[a].push(e);
            }
            let (k, meas) = local_stiffness(mesh, e);
            stiff.push(k);
            mass.push(local_mass(mesh.dim, meas));
            // u²vφ is degree 4 on P1 elements.
            quad.push(
                element_quadrature(mesh, e, 4)
                    .into_iter()
                    .map(|(_, weight, phi)| QuadPoint { weight, phi })
                    .collect(),
            );
        }
        Elements { stiff, mass, quad, node_elements }
    }

    fn global(&self, mesh: &MeshLevel, local: &[Vec<f64>]) -> DMatrix<f64> {
        let n = mesh.node_count();
        let mut m = DMatrix::zeros(n, n);
        for (e, el) in mesh.elements.iter().enumerate() {
            let k = el.len();
            for (a, &i) in el.iter().enumerate() {
                for (b, &j) in el.iter().enumerate() {
                    m[(i, j)] += local[e][a * k + b];
                }
            }
        }
        m
    }

    /// `Σ_b local[a][b] x[el[b]]` for local row `a` of element `e`.
    fn apply_local(&self, mesh: &MeshLevel, local: &[Vec<f64>], e: usize, a: usize, x: &[f64]) -> f64 {
        let el = &mesh.elements[e];
        let k = el.len();
        el.iter().enumerate().map(|(b, &j)| local[e][a * k + b] * x[j]).sum()
    }

    /// `∫ u²v φ_a` over element `e`.
    fn coupling_integral(&self, mesh: &MeshLevel, e: usize, a: usize, u: &[f64], v: &[f64]) -> f64 {
        let el = &mesh.elements[e];
        self.quad[e]
            .iter()
            .map(|q| {
                let (mut uq, mut vq) = (0.0, 0.0);
                for (b, &j) in el.iter().enumerate() {
                    uq += q.phi[b] * u[j];
                    vq += q.phi[b] * v[j];
                }
                q.weight * uq * uq * vq * q.phi[a]
            })
            .sum()
    }

    /// `∫ w φ_i φ_j` with `w` given at quadrature points by `w(u_q, v_q)`.
    fn weighted_mass(&self, mesh: &MeshLevel, u: &[f64], v: &[f64], w: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
        let n = mesh.node_count();
        let mut m = DMatrix::zeros(n, n);
        for (e, el) in mesh.elements.iter().enumerate() {
            for q in &self.quad[e] {
                let (mut uq, mut vq) = (0.0, 0.0);
                for (b, &j) in el.iter().enumerate() {
                    uq += q.phi[b] * u[j];
                    vq += q.phi[b] * v[j];
                }
                let wq = q.weight * w(uq, vq);
                for (a, &i) in el.iter().enumerate() {
                    for (b, &j) in el.iter().enumerate() {
                        m[(i, j)] += wq * q.phi[a] * q.phi[b];
                    }
                }
            }
        }
        m
    }
}

/// The scalar system in `v` obtained by eliminating `u`.
pub struct ReducedSystem {
    mesh: MeshLevel,
    spec: TwoFieldSpec,
    free: Vec<usize>,
    elements: Elements,
    stiffness: DMatrix<f64>,
    mass: DMatrix<f64>,
    /// `u = u0 + B v`.
    u0: Vec<f64>,
    b: DMatrix<f64>,
}

impl ReducedSystem {
    pub fn new(mesh: &MeshLevel, spec: &TwoFieldSpec) -> Result<ReducedSystem> {
        spec.validate()?;
        if mesh.dim != spec.domain.dim() {
            return Err(Error::InvalidInput(format!("mesh dimension {} does not match the problem domain", mesh.dim)));
        }
        let n = mesh.node_count();
        let elements = Elements::new(mesh);
        let stiffness = elements.global(mesh, &elements.stiff);
        let mass = elements.global(mesh, &elements.mass);

        // Sum of the two equations: (d_u K − s_u M) u = s₀ M1 + (s_v M − d_v K) v.
        let s0 = spec.first.constant + spec.second.constant;
        let su = spec.first.u + spec.second.u;
        let sv = spec.first.v + spec.second.v;
        let a = &stiffness * spec.d_u - &mass * su;
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lu = a.lu();
        let min_pivot = {
            let u = lu.u();
            (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min)
        };
        if !(min_pivot > scale * 1e3 * f64::EPSILON) {
            return Err(Error::SingularMatrix(format!(
                "the summed linear equation d_u K - ({su}) M is singular under zero-flux boundaries; \
                 the combined linear u-coefficient must be negative"
            )));
        }
        let ones = nalgebra::DVector::from_element(n, 1.0);
        let load = &mass * &ones * s0;
        let u0 = lu.solve(&load).ok_or_else(|| Error::SingularMatrix("linear block solve failed".into()))?;
        let rhs = &mass * sv - &stiffness * spec.d_v;
        let b = lu.solve(&rhs).ok_or_else(|| Error::SingularMatrix("linear block solve failed".into()))?;
        Ok(ReducedSystem {
            mesh: mesh.clone(),
            spec: spec.clone(),
            free: (0..n).collect(),
            elements,
            stiffness,
            mass,
            u0: u0.iter().copied().collect(),
            b,
        })
    }

    /// Recovers the eliminated field `u` from `v`.
    pub fn recover(&self, v: &[f64]) -> Vec<f64> {
        let vv = nalgebra::DVector::from_column_slice(v);
        let bu = &self.b * vv;
        self.u0.iter().zip(bu.iter()).map(|(a, b)| a + b).collect()
    }

    fn recover_at(&self, v: &[f64], j: usize) -> f64 {
        self.u0[j] + self.b.row(j).iter().zip(v).map(|(b, x)| b * x).sum::<f64>()
    }

    fn component(&self, u: &[f64], v: &[f64], node: usize) -> f64 {
        let s = &self.spec;
        let el = &self.elements;
        let mut r = 0.0;
        for &e in &el.node_elements[node] {
            let a = self.mesh.elements[e].iter().position(|&x| x == node).expect("adjacency");
            let kv = el.apply_local(&self.mesh, &el.stiff, e, a, v);
            let mu = el.apply_local(&self.mesh, &el.mass, e, a, u);
            let mv = el.apply_local(&self.mesh, &el.mass, e, a, v);
            let m1: f64 = {
                let k = self.mesh.elements[e].len();
                (0..k).map(|b| el.mass[e][a * k + b]).sum()
            };
            r += s.d_v * kv - s.second.constant * m1 - s.second.u * mu - s.second.v * mv
                + s.coupling * el.coupling_integral(&self.mesh, e, a, u, v);
        }
        r
    }

    /// Dense Jacobian of the reduced residual with respect to `v`.
    pub fn jacobian(&self, v: &[f64]) -> DMatrix<f64> {
        let s = &self.spec;
        let u = self.recover(v);
        let w_uv = self.elements.weighted_mass(&self.mesh, &u, v, |a, b| 2.0 * a * b);
        let w_uu = self.elements.weighted_mass(&self.mesh, &u, v, |a, _| a * a);
        let dr_du = &w_uv * s.coupling - &self.mass * s.second.u;
        let dr_dv = &self.stiffness * s.d_v - &self.mass * s.second.v + w_uu * s.coupling;
        dr_dv + dr_du * &self.b
    }
}

impl DiscreteSystem for ReducedSystem {
    fn mesh(&self) -> &MeshLevel {
        &self.mesh
    }

    fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    fn free_index(&self, node: usize) -> Option<usize> {
        (node < self.free.len()).then_some(node)
    }

    fn local_degree(&self) -> usize {
        3
    }

    fn constrained_vector(&self) -> Vec<f64> {
        vec![0.0; self.mesh.node_count()]
    }

    fn enforce_constraints(&self, _u: &mut [f64]) {}

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        let u = self.recover(v);
        (0..self.free.len()).map(|i| self.component(&u, v, i)).collect()
    }

    fn residual_component(&self, v: &[f64], node: usize) -> f64 {
        // Only u on the patch of `node` is needed.
        let mut u = vec![0.0; v.len()];
        for &e in &self.elements.node_elements[node] {
            for &j in &self.mesh.elements[e] {
                u[j] = self.recover_at(v, j);
            }
        }
        self.component(&u, v, node)
    }

    fn newton_direction(&self, v: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        dense_solve(self.jacobian(v), r)
    }
}

impl SystemBuilder for TwoFieldSpec {
    type System = ReducedSystem;

    fn build(&self, mesh: &MeshLevel) -> Result<ReducedSystem> {
        ReducedSystem::new(mesh, self)
    }
}

/// Residual of both original equations, assembled without the reduction.
/// The first `n` entries belong to the `u` equation.
pub fn unreduced_residual(mesh: &MeshLevel, spec: &TwoFieldSpec, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = mesh.node_count();
    if u.len() != n || v.len() != n {
        return Err(Error::LevelMismatch { expected: n, actual: u.len().min(v.len()) });
    }
    let el = Elements::new(mesh);
    let mut r = vec![0.0; 2 * n];
    for (e, nodes) in mesh.elements.iter().enumerate() {
        let k = nodes.len();
        for (a, &i) in nodes.iter().enumerate() {
            let m1: f64 = (0..k).map(|b| el.mass[e][a * k + b]).sum();
            let mu = el.apply_local(mesh, &el.mass, e, a, u);
            let mv = el.apply_local(mesh, &el.mass, e, a, v);
            let c = spec.coupling * el.coupling_integral(mesh, e, a, u, v);
            r[i] += spec.d_u * el.apply_local(mesh, &el.stiff, e, a, u)
                - spec.first.constant * m1
                - spec.first.u * mu
                - spec.first.v * mv
                - c;
            r[n + i] += spec.d_v * el.apply_local(mesh, &el.stiff, e, a, v)
                - spec.second.constant * m1
                - spec.second.u * mu
                - spec.second.v * mv
                + c;
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub id: usize,
    pub u: CoefVec,
    pub v: CoefVec,
    /// l² norm of the unreduced two-equation residual.
    pub residual_l2: f64,
    pub parent_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSet {
    pub level: usize,
    pub h: f64,
    pub records: Vec<PairRecord>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemRunResult {
    pub sets: Vec<PairSet>,
    pub diagnostics: Vec<LevelDiagnostics>,
    pub failure: Option<String>,
}

fn euclid(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs the multilevel solver on the reduced system and recovers both fields.
pub fn solve_system(spec: &TwoFieldSpec, hierarchy: &MeshHierarchy, cfg: &FilterConfig) -> SystemRunResult {
    let run = cbmfem_run(spec, hierarchy, cfg);
    let mut sets = Vec::with_capacity(run.sets.len());
    let mut failure = run.failure;
    for set in &run.sets {
        let mesh = &hierarchy.levels[set.level];
        let sys = match ReducedSystem::new(mesh, spec) {
            Ok(s) => s,
            Err(e) => {
                failure.get_or_insert(e.to_string());
                break;
            }
        };
        let records = set
            .records
            .iter()
            .map(|rec| {
                let mut v = rec.u.values.clone();
                let mut res = unreduced_residual(mesh, spec, &sys.recover(&v), &v).unwrap_or_default();
                // The full residual is about sqrt(2) times the reduced one, so
                // a solution at the reduced tolerance may need one more step.
                if euclid(&res) >= cfg.newton_tol {
                    let tight = FilterConfig { newton_tol: cfg.newton_tol / 2.0, ..cfg.clone() };
                    if let Ok(done) = newton(&sys, &v, &tight) {
                        v = done.u;
                        res = unreduced_residual(mesh, spec, &sys.recover(&v), &v).unwrap_or_default();
                    }
                }
                let u = sys.recover(&v);
                PairRecord {
                    id: rec.id,
                    residual_l2: euclid(&res),
                    u: CoefVec::new(set.level, u),
                    v: CoefVec::new(set.level, v),
                    parent_id: rec.parent_id,
                }
            })
            .collect();
        sets.push(PairSet { level: set.level, h: set.h, records });
    }
    SystemRunResult { sets, diagnostics: run.diagnostics, failure }
}
