use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point};

/// Nodal values of a P1 function on a mesh.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: &Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::MeshMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MeshMismatch(format!("non-finite value at node {i}")));
        }
        Ok(Self { mesh: Arc::clone(mesh), values })
    }

    pub fn constant(mesh: &Arc<Mesh>, c: f64) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![c; mesh.node_count()],
        }
    }

    /// Nodal interpolant of a closed-form function.
    pub fn interpolate(mesh: &Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_on(&self, mesh: &Arc<Mesh>) -> bool {
        Arc::ptr_eq(&self.mesh, mesh)
    }

    pub fn ensure_on(&self, mesh: &Arc<Mesh>) -> Result<()> {
        if self.is_on(mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch("field belongs to a different mesh".into()))
        }
    }
}
