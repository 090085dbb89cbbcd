//! The interface the multilevel driver needs from a discretised problem.

use crate::error::Result;
use crate::mesh::MeshLevel;

/// A nonlinear algebraic system `F(u) = 0` over the free nodes of one mesh
/// level, whose components are polynomial in each single nodal value.
///
/// Vectors passed in are full-length nodal vectors; constrained (Dirichlet)
/// entries carry their prescribed values. Residuals are over free nodes in the
/// order of [`free_nodes`](DiscreteSystem::free_nodes).
pub trait DiscreteSystem: Send + Sync {
    fn mesh(&self) -> &MeshLevel;

    fn free_nodes(&self) -> &[usize];

    fn free_index(&self, node: usize) -> Option<usize>;

    /// Degree of the residual component at a node as a polynomial in that
    /// node's own value.
    fn local_degree(&self) -> usize;

    /// Nodal vector with prescribed values on constrained nodes, zero elsewhere.
    fn constrained_vector(&self) -> Vec<f64>;

    fn enforce_constraints(&self, u: &mut [f64]);

    fn residual(&self, u: &[f64]) -> Vec<f64>;

    /// Residual component of free node `node`.
    fn residual_component(&self, u: &[f64], node: usize) -> f64;

    /// Solves `J(u) du = r` for the Newton correction over free nodes.
    fn newton_direction(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>>;

    fn is_free(&self, node: usize) -> bool {
        self.free_index(node).is_some()
    }
}

/// Builds the discrete system for one mesh level.
pub trait SystemBuilder: Sync {
    type System: DiscreteSystem;

    fn build(&self, mesh: &MeshLevel) -> Result<Self::System>;
}
