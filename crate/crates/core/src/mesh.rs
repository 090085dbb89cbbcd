//! Nested 1D interval and 2D triangular meshes.
//!
//! A level-0 mesh is the coarsest triangulation. Each refinement bisects every
//! edge: coarse nodes keep their coordinates (copied, never recomputed) and every
//! edge midpoint becomes a new node. In 1D nodes are numbered left to right, so
//! fine node `2j` is coarse node `j`. In 2D coarse nodes keep their indices and
//! midpoints are appended.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{BoundaryCondition, BoundarySpec};

/// Physical domain of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    UnitSquare,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::UnitSquare => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::UnitSquare => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Interval { a, b } if !(a.is_finite() && b.is_finite() && a < b) => Err(
                Error::UnsupportedDomain(format!("interval [{a}, {b}] must satisfy a < b")),
            ),
            _ => Ok(()),
        }
    }
}

/// Boundary segment. Intervals use `Left` (x = a) and `Right` (x = b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Left,
    Right,
    Bottom,
    Top,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::Left, Segment::Right, Segment::Bottom, Segment::Top];

    pub fn name(&self) -> &'static str {
        match self {
            Segment::Left => "left",
            Segment::Right => "right",
            Segment::Bottom => "bottom",
            Segment::Top => "top",
        }
    }

    pub fn from_name(name: &str) -> Option<Segment> {
        Segment::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Per-node boundary classification.
///
/// Ordered by precedence: a node shared by segments of different kinds takes the
/// largest tag, so Dirichlet wins at corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Interior,
    Neumann,
    Robin,
    Dirichlet,
}

impl BoundaryTag {
    fn of(bc: Option<&BoundaryCondition>) -> BoundaryTag {
        match bc {
            None | Some(BoundaryCondition::Neumann { .. }) => BoundaryTag::Neumann,
            Some(BoundaryCondition::Robin { .. }) => BoundaryTag::Robin,
            Some(BoundaryCondition::Dirichlet { .. }) => BoundaryTag::Dirichlet,
        }
    }
}

/// A boundary facet: a single node in 1D, an edge in 2D.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Facet {
    pub nodes: Vec<usize>,
    pub segment: Segment,
}

#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub dim: usize,
    pub level: usize,
    /// Node coordinates; 1D meshes store `[x, 0.0]`.
    pub nodes: Vec<[f64; 2]>,
    /// Element connectivity, `dim + 1` node indices per element.
    pub elements: Vec<Vec<usize>>,
    pub facets: Vec<Facet>,
    pub tags: Vec<BoundaryTag>,
    /// Per node, the segments it lies on (empty for interior nodes).
    pub segments: Vec<Vec<Segment>>,
    pub coarse_nodes: Vec<usize>,
    pub new_nodes: Vec<usize>,
    /// For each entry of `new_nodes`, the two fine-level indices of the coarse
    /// edge endpoints it bisects.
    pub midpoint_of: Vec<[usize; 2]>,
    pub h: f64,
    segment_tags: Vec<(Segment, BoundaryTag)>,
}

impl MeshLevel {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Signed area (2D) or signed length (1D) of an element.
    pub fn element_measure(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        match self.dim {
            1 => self.nodes[el[1]][0] - self.nodes[el[0]][0],
            _ => signed_area(self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]),
        }
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.tags[node] == BoundaryTag::Dirichlet
    }

    /// Locates the element containing `x` and returns the P1 interpolation
    /// weights for its nodes.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, Vec<f64>)> {
        const TOL: f64 = 1e-12;
        for (e, el) in self.elements.iter().enumerate() {
            if self.dim == 1 {
                let (x0, x1) = (self.nodes[el[0]][0], self.nodes[el[1]][0]);
                if x[0] >= x0 - TOL && x[0] <= x1 + TOL {
                    let t = (x[0] - x0) / (x1 - x0);
                    return Some((e, vec![1.0 - t, t]));
                }
            } else {
                let (a, b, c) = (self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]);
                let area = signed_area(a, b, c);
                let la = signed_area(x, b, c) / area;
                let lb = signed_area(a, x, c) / area;
                let lc = 1.0 - la - lb;
                if la >= -TOL && lb >= -TOL && lc >= -TOL {
                    return Some((e, vec![la, lb, lc]));
                }
            }
        }
        None
    }

    /// Evaluates the P1 function with nodal `values` at the point `x`.
    pub fn evaluate(&self, values: &[f64], x: [f64; 2]) -> Option<f64> {
        let (e, weights) = self.locate(x)?;
        Some(
            self.elements[e]
                .iter()
                .zip(&weights)
                .map(|(&n, w)| w * values[n])
                .sum(),
        )
    }

    pub fn to_export(&self) -> MeshExport {
        MeshExport {
            dim: self.dim,
            level: self.level,
            h: self.h,
            nodes: self
                .nodes
                .iter()
                .map(|p| p[..self.dim].to_vec())
                .collect(),
            elements: self.elements.clone(),
            tags: self.tags.clone(),
        }
    }

    fn tag_for(&self, segs: &[Segment]) -> BoundaryTag {
        segs.iter()
            .map(|s| {
                self.segment_tags
                    .iter()
                    .find(|(t, _)| t == s)
                    .map(|(_, tag)| *tag)
                    .unwrap_or(BoundaryTag::Neumann)
            })
            .max()
            .unwrap_or(BoundaryTag::Interior)
    }
}

/// Serializable view of a mesh level.
#[derive(Debug, Clone, Serialize)]
pub struct MeshExport {
    pub dim: usize,
    pub level: usize,
    pub h: f64,
    pub nodes: Vec<Vec<f64>>,
    pub elements: Vec<Vec<usize>>,
    pub tags: Vec<BoundaryTag>,
}

#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `parent_map[l - 1][k]` is the index on level `l - 1` of
    /// `levels[l].coarse_nodes[k]`.
    pub parent_map: Vec<Vec<usize>>,
}

impl MeshHierarchy {
    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn max_diameter(nodes: &[[f64; 2]], elements: &[Vec<usize>]) -> f64 {
    elements
        .iter()
        .map(|el| {
            let mut d: f64 = 0.0;
            for i in 0..el.len() {
                for j in (i + 1)..el.len() {
                    d = d.max(dist(nodes[el[i]], nodes[el[j]]));
                }
            }
            d
        })
        .fold(0.0, f64::max)
}

/// Level-0 mesh: three nodes on an interval, or the four corners plus the
/// centre of the unit square split into four triangles.
pub fn build_initial_mesh(domain: &Domain, boundary: &BoundarySpec) -> Result<MeshLevel> {
    domain.validate()?;
    let segment_tags: Vec<(Segment, BoundaryTag)> = Segment::ALL
        .iter()
        .map(|&s| (s, BoundaryTag::of(boundary.get(s))))
        .collect();

    let (dim, nodes, elements, facets, segments): (usize, Vec<[f64; 2]>, Vec<Vec<usize>>, Vec<Facet>, Vec<Vec<Segment>>) =
        match *domain {
            Domain::Interval { a, b } => (
                1,
                vec![[a, 0.0], [0.5 * (a + b), 0.0], [b, 0.0]],
                vec![vec![0, 1], vec![1, 2]],
                vec![
                    Facet { nodes: vec![0], segment: Segment::Left },
                    Facet { nodes: vec![2], segment: Segment::Right },
                ],
                vec![vec![Segment::Left], vec![], vec![Segment::Right]],
            ),
            Domain::UnitSquare => (
                2,
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
                vec![vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]],
                vec![
                    Facet { nodes: vec![0, 1], segment: Segment::Bottom },
                    Facet { nodes: vec![1, 2], segment: Segment::Right },
                    Facet { nodes: vec![2, 3], segment: Segment::Top },
                    Facet { nodes: vec![3, 0], segment: Segment::Left },
                ],
                vec![
                    vec![Segment::Left, Segment::Bottom],
                    vec![Segment::Right, Segment::Bottom],
                    vec![Segment::Right, Segment::Top],
                    vec![Segment::Left, Segment::Top],
                    vec![],
                ],
            ),
        };

    let h = max_diameter(&nodes, &elements);
    let n = nodes.len();
    let mut mesh = MeshLevel {
        dim,
        level: 0,
        nodes,
        elements,
        facets,
        tags: Vec::new(),
        segments,
        coarse_nodes: (0..n).collect(),
        new_nodes: Vec::new(),
        midpoint_of: Vec::new(),
        h,
        segment_tags,
    };
    mesh.tags = mesh.segments.iter().map(|s| mesh.tag_for(s)).collect();
    Ok(mesh)
}

/// Uniform refinement. Returns the fine level and the parent map of its coarse
/// nodes.
pub fn refine(coarse: &MeshLevel) -> (MeshLevel, Vec<usize>) {
    match coarse.dim {
        1 => refine_1d(coarse),
        _ => refine_2d(coarse),
    }
}

fn refine_1d(coarse: &MeshLevel) -> (MeshLevel, Vec<usize>) {
    let nc = coarse.node_count();
    let mut nodes = Vec::with_capacity(2 * nc - 1);
    let mut segments = Vec::with_capacity(2 * nc - 1);
    let mut coarse_nodes = Vec::with_capacity(nc);
    let mut new_nodes = Vec::with_capacity(nc - 1);
    let mut midpoint_of = Vec::with_capacity(nc - 1);
    for (j, p) in coarse.nodes.iter().enumerate() {
        if j > 0 {
            let q = coarse.nodes[j - 1];
            new_nodes.push(nodes.len());
            midpoint_of.push([nodes.len() - 1, nodes.len() + 1]);
            nodes.push([0.5 * (q[0] + p[0]), 0.0]);
            segments.push(Vec::new());
        }
        coarse_nodes.push(nodes.len());
        nodes.push(*p);
        segments.push(coarse.segments[j].clone());
    }
    let elements: Vec<Vec<usize>> = (0..nodes.len() - 1).map(|i| vec![i, i + 1]).collect();
    let facets = coarse
        .facets
        .iter()
        .map(|f| Facet { nodes: vec![2 * f.nodes[0]], segment: f.segment })
        .collect();
    let h = max_diameter(&nodes, &elements);
    let mut mesh = MeshLevel {
        dim: 1,
        level: coarse.level + 1,
        nodes,
        elements,
        facets,
        tags: Vec::new(),
        segments,
        coarse_nodes,
        new_nodes,
        midpoint_of,
        h,
        segment_tags: coarse.segment_tags.clone(),
    };
    mesh.tags = mesh.segments.iter().map(|s| mesh.tag_for(s)).collect();
    (mesh, (0..nc).collect())
}

fn refine_2d(coarse: &MeshLevel) -> (MeshLevel, Vec<usize>) {
    let nc = coarse.node_count();
    let mut nodes = coarse.nodes.clone();
    let mut segments = coarse.segments.clone();
    let mut new_nodes = Vec::new();
    let mut midpoint_of = Vec::new();
    let mut edge_mid: HashMap<(usize, usize), usize> = HashMap::new();

    let boundary_edges: HashMap<(usize, usize), Segment> = coarse
        .facets
        .iter()
        .map(|f| (edge_key(f.nodes[0], f.nodes[1]), f.segment))
        .collect();

    let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>, segments: &mut Vec<Vec<Segment>>| -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = edge_mid.get(&key) {
            return m;
        }
        let (p, q) = (nodes[key.0], nodes[key.1]);
        let m = nodes.len();
        nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        segments.push(boundary_edges.get(&key).map(|s| vec![*s]).unwrap_or_default());
        new_nodes.push(m);
        midpoint_of.push([key.0, key.1]);
        edge_mid.insert(key, m);
        m
    };

    let mut elements = Vec::with_capacity(4 * coarse.element_count());
    for el in &coarse.elements {
        let (a, b, c) = (el[0], el[1], el[2]);
        let ab = midpoint(a, b, &mut nodes, &mut segments);
        let bc = midpoint(b, c, &mut nodes, &mut segments);
        let ca = midpoint(c, a, &mut nodes, &mut segments);
        elements.push(vec![a, ab, ca]);
        elements.push(vec![ab, b, bc]);
        elements.push(vec![ca, bc, c]);
        elements.push(vec![ab, bc, ca]);
    }

    let mut facets = Vec::with_capacity(2 * coarse.facets.len());
    for f in &coarse.facets {
        let m = edge_mid[&edge_key(f.nodes[0], f.nodes[1])];
        facets.push(Facet { nodes: vec![f.nodes[0], m], segment: f.segment });
        facets.push(Facet { nodes: vec![m, f.nodes[1]], segment: f.segment });
    }

    let h = max_diameter(&nodes, &elements);
    let mut mesh = MeshLevel {
        dim: 2,
        level: coarse.level + 1,
        nodes,
        elements,
        facets,
        tags: Vec::new(),
        segments,
        coarse_nodes: (0..nc).collect(),
        new_nodes,
        midpoint_of,
        h,
        segment_tags: coarse.segment_tags.clone(),
    };
    mesh.tags = mesh.segments.iter().map(|s| mesh.tag_for(s)).collect();
    (mesh, (0..nc).collect())
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn build_hierarchy(domain: &Domain, boundary: &BoundarySpec, max_level: usize) -> Result<MeshHierarchy> {
    let mut levels = vec![build_initial_mesh(domain, boundary)?];
    let mut parent_map = Vec::with_capacity(max_level);
    for _ in 0..max_level {
        let (fine, parents) = refine(levels.last().unwrap());
        levels.push(fine);
        parent_map.push(parents);
    }
    Ok(MeshHierarchy { levels, parent_map })
}
