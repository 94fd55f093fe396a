use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Nodal coefficient vector of a P1 function on a shared mesh.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::config(
                "values",
                format!("expected {} nodal values, got {}", mesh.n_nodes(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config("values", format!("non-finite value at node {i}")));
        }
        Ok(Self { mesh, values })
    }

    /// Obstacle-style function: finite values or `+inf` (no constraint at that node).
    pub fn obstacle(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::config("obstacle", "obstacle length differs from node count"));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::config("obstacle", format!("invalid obstacle value at node {i}")));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.n_nodes();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64; 2]) -> f64) -> Result<Self> {
        let values = mesh.nodes().iter().map(f).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_mesh(&self, other: &Arc<Mesh>) -> bool {
        Arc::ptr_eq(&self.mesh, other)
    }

    pub fn check_mesh(&self, other: &Arc<Mesh>) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// Same mesh, new values (unchecked length is a programming error).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            mesh: self.mesh.clone(),
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    pub fn sub(&self, other: &DiscreteFunction) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `sqrt(sum_i w_i v_i^2)` with vertex-lumped weights.
    pub fn lumped_norm(&self) -> f64 {
        lumped_norm(self.mesh.lumped_weights(), &self.values)
    }

    pub fn lumped_distance(&self, other: &DiscreteFunction) -> f64 {
        let w = self.mesh.lumped_weights();
        self.values
            .iter()
            .zip(&other.values)
            .zip(w)
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::norm_inf(&self.values)
    }
}

pub fn lumped_norm(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
}

impl Serialize for DiscreteFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}
