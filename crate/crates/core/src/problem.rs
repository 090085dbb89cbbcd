use serde::Serialize;

use crate::error::Result;
use crate::mesh::{self, Domain, MeshHierarchy, MeshLevel};
use crate::nonlinearity::{BoundarySpec, PolyNonlinearity, DEFAULT_ROBIN_BOUND};

/// A scalar semilinear problem `-Δu + f(x, u) = 0` with mixed boundary data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub boundary: BoundarySpec,
    pub nonlinearity: PolyNonlinearity,
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>, domain: Domain, boundary: BoundarySpec, nonlinearity: PolyNonlinearity) -> Result<Self> {
        let spec = ProblemSpec { name: name.into(), domain, boundary, nonlinearity };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.boundary.validate(DEFAULT_ROBIN_BOUND)?;
        self.nonlinearity.validate()
    }

    pub fn initial_mesh(&self) -> Result<MeshLevel> {
        mesh::build_initial_mesh(&self.domain, &self.boundary)
    }

    pub fn hierarchy(&self, max_level: usize) -> Result<MeshHierarchy> {
        mesh::build_hierarchy(&self.domain, &self.boundary, max_level)
    }
}
