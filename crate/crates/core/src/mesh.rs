//! Uniform simplicial meshes (intervals and structured triangulations of a
//! rectangle) with P1 element geometry and a two-part boundary partition.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary part: `Gamma1` carries the homogeneous Dirichlet condition,
/// `Gamma2` the nonsmooth (Clarke subdifferential) condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
}

/// Sides of the axis-aligned domain. In 1D only `Left` and `Right` exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

type FacePredicate = dyn Fn(&[f64; 2]) -> BoundaryTag + Send + Sync;

/// Rule assigning every boundary face to exactly one of `Gamma1`/`Gamma2`,
/// evaluated at face midpoints.
#[derive(Clone)]
pub enum BoundaryPartition {
    /// The whole boundary is Dirichlet.
    AllGamma1,
    /// Faces on the listed sides belong to `Gamma2`, the rest to `Gamma1`.
    Gamma2Sides(Vec<Side>),
    /// Arbitrary midpoint predicate.
    Predicate(Arc<FacePredicate>),
}

impl fmt::Debug for BoundaryPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllGamma1 => write!(f, "AllGamma1"),
            Self::Gamma2Sides(s) => f.debug_tuple("Gamma2Sides").field(s).finish(),
            Self::Predicate(_) => write!(f, "Predicate(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFace {
    pub nodes: Vec<usize>,
    pub tag: BoundaryTag,
    /// Face measure: 1 for the point faces of a 1D mesh, edge length in 2D.
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    boundary_faces: Vec<BoundaryFace>,
    element_volumes: Vec<f64>,
    /// Gradients of the local P1 basis functions, constant per element.
    basis_gradients: Vec<[[f64; 2]; 3]>,
    stiffness: Vec<[[f64; 3]; 3]>,
    node_elements: Vec<Vec<usize>>,
    lumped_weights: Vec<f64>,
    bbox: ([f64; 2], [f64; 2]),
}

/// JSON view of a mesh for plotting.
#[derive(Debug, Serialize)]
pub struct MeshSummary<'a> {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub elements: Vec<&'a [usize]>,
    pub boundary_faces: &'a [BoundaryFace],
}

impl Mesh {
    /// Uniform mesh of `[a, b]`; the boundary faces are the two endpoints.
    pub fn interval(a: f64, b: f64, n_elements: usize, partition: &BoundaryPartition) -> Result<Arc<Mesh>> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::config("mesh.extents", format!("degenerate interval [{a}, {b}]")));
        }
        if n_elements == 0 {
            return Err(Error::config("mesh.counts", "need at least one element"));
        }
        let h = (b - a) / n_elements as f64;
        let nodes: Vec<[f64; 2]> = (0..=n_elements)
            .map(|i| {
                let x = if i == n_elements { b } else { a + i as f64 * h };
                [x, 0.0]
            })
            .collect();
        let elements: Vec<[usize; 3]> = (0..n_elements).map(|i| [i, i + 1, usize::MAX]).collect();
        let faces = vec![(vec![0], [a, 0.0], 1.0), (vec![n_elements], [b, 0.0], 1.0)];
        Self::assemble(1, nodes, elements, faces, ([a, 0.0], [b, 0.0]), partition, Some(h))
    }

    /// Structured triangulation of `[0, lx] x [0, ly]` with `nx * ny` cells,
    /// each split into two triangles along alternating diagonals.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize, partition: &BoundaryPartition) -> Result<Arc<Mesh>> {
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::config("mesh.extents", "extents must be positive"));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::config("mesh.counts", "need at least one cell per direction"));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { lx } else { i as f64 * lx / nx as f64 };
                let y = if j == ny { ly } else { j as f64 * ly / ny as f64 };
                nodes.push([x, y]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                if (i + j) % 2 == 0 {
                    elements.push([n00, n10, n11]);
                    elements.push([n00, n11, n01]);
                } else {
                    elements.push([n00, n10, n01]);
                    elements.push([n10, n11, n01]);
                }
            }
        }
        let mut faces = Vec::new();
        let mut edge = |p: usize, q: usize| {
            let (a, b) = (nodes[p], nodes[q]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            faces.push((vec![p, q], mid, len));
        };
        for i in 0..nx {
            edge(id(i, 0), id(i + 1, 0));
        }
        for j in 0..ny {
            edge(id(nx, j), id(nx, j + 1));
        }
        for i in (0..nx).rev() {
            edge(id(i + 1, ny), id(i, ny));
        }
        for j in (0..ny).rev() {
            edge(id(0, j + 1), id(0, j));
        }
        Self::assemble(2, nodes, elements, faces, ([0.0, 0.0], [lx, ly]), partition, None)
    }

    fn assemble(
        dim: usize,
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        faces: Vec<(Vec<usize>, [f64; 2], f64)>,
        bbox: ([f64; 2], [f64; 2]),
        partition: &BoundaryPartition,
        spacing: Option<f64>,
    ) -> Result<Arc<Mesh>> {
        let nloc = dim + 1;
        let mut element_volumes = Vec::with_capacity(elements.len());
        let mut basis_gradients = Vec::with_capacity(elements.len());
        let mut stiffness = Vec::with_capacity(elements.len());
        for el in &elements {
            let (vol, grads) = element_geometry(dim, &nodes, &el[..nloc], spacing);
            if !(vol > 0.0) {
                return Err(Error::config("mesh", "element with non-positive volume"));
            }
            let mut k = [[0.0; 3]; 3];
            for a in 0..nloc {
                for b in 0..nloc {
                    k[a][b] = if dim == 1 {
                        // (+-1/h)(+-1/h) h, without the rounding of the product
                        if a == b {
                            1.0 / vol
                        } else {
                            -1.0 / vol
                        }
                    } else {
                        vol * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1])
                    };
                }
            }
            element_volumes.push(vol);
            basis_gradients.push(grads);
            stiffness.push(k);
        }
        let mut node_elements = vec![Vec::new(); nodes.len()];
        let mut lumped_weights = vec![0.0; nodes.len()];
        for (e, el) in elements.iter().enumerate() {
            for &n in &el[..nloc] {
                node_elements[n].push(e);
                lumped_weights[n] += element_volumes[e] / nloc as f64;
            }
        }
        let extent = (bbox.1[0] - bbox.0[0]).max(bbox.1[1] - bbox.0[1]);
        let tol = 1e-12 * extent.max(1.0);
        let boundary_faces: Vec<BoundaryFace> = faces
            .into_iter()
            .map(|(fnodes, mid, measure)| {
                let tag = match partition {
                    BoundaryPartition::AllGamma1 => BoundaryTag::Gamma1,
                    BoundaryPartition::Gamma2Sides(sides) => {
                        let on = |s: &Side| match s {
                            Side::Left => (mid[0] - bbox.0[0]).abs() <= tol,
                            Side::Right => (mid[0] - bbox.1[0]).abs() <= tol,
                            Side::Bottom => dim == 2 && (mid[1] - bbox.0[1]).abs() <= tol,
                            Side::Top => dim == 2 && (mid[1] - bbox.1[1]).abs() <= tol,
                        };
                        if sides.iter().any(on) {
                            BoundaryTag::Gamma2
                        } else {
                            BoundaryTag::Gamma1
                        }
                    }
                    BoundaryPartition::Predicate(pred) => pred(&mid),
                };
                BoundaryFace {
                    nodes: fnodes,
                    tag,
                    measure,
                }
            })
            .collect();
        if let BoundaryPartition::Gamma2Sides(sides) = partition {
            if dim == 1 && sides.iter().any(|s| matches!(s, Side::Bottom | Side::Top)) {
                return Err(Error::config("mesh.gamma2", "bottom/top sides do not exist in 1D"));
            }
        }
        if !boundary_faces.iter().any(|f| f.tag == BoundaryTag::Gamma1) {
            return Err(Error::config("mesh.gamma2", "partition leaves Gamma1 empty"));
        }
        Ok(Arc::new(Mesh {
            dim,
            nodes,
            elements,
            boundary_faces,
            element_volumes,
            basis_gradients,
            stiffness,
            node_elements,
            lumped_weights,
            bbox,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.element_volumes[e]
    }

    pub fn element_volumes(&self) -> &[f64] {
        &self.element_volumes
    }

    /// Gradients of the local basis functions of element `e`.
    pub fn basis_gradients(&self, e: usize) -> &[[f64; 2]] {
        &self.basis_gradients[e][..self.dim + 1]
    }

    /// Element Laplacian stiffness `|e| grad phi_a . grad phi_b`.
    pub fn element_stiffness(&self, e: usize) -> &[[f64; 3]; 3] {
        &self.stiffness[e]
    }

    pub fn barycenter(&self, e: usize) -> [f64; 2] {
        let el = self.element(e);
        let k = el.len() as f64;
        let mut c = [0.0; 2];
        for &n in el {
            c[0] += self.nodes[n][0] / k;
            c[1] += self.nodes[n][1] / k;
        }
        c
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn node_elements(&self, i: usize) -> &[usize] {
        &self.node_elements[i]
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        self.bbox
    }

    /// Vertex-lumped volume weights: each element gives `|e| / (dim + 1)`
    /// to each of its nodes.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped_weights
    }

    pub fn measure(&self) -> f64 {
        self.element_volumes.iter().sum()
    }

    /// Constant gradient of the P1 interpolant of `values` on element `e`.
    pub fn element_gradient(&self, e: usize, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&n, bg) in self.element(e).iter().zip(self.basis_gradients(e)) {
            g[0] += values[n] * bg[0];
            g[1] += values[n] * bg[1];
        }
        g
    }

    /// Volume-weighted average of the gradients of the elements around node `i`.
    pub fn nodal_gradient(&self, i: usize, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        let mut vol = 0.0;
        for &e in &self.node_elements[i] {
            let ge = self.element_gradient(e, values);
            let v = self.element_volumes[e];
            g[0] += v * ge[0];
            g[1] += v * ge[1];
            vol += v;
        }
        [g[0] / vol, g[1] / vol]
    }

    /// Nodes lying on at least one face with the given tag.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.n_nodes()];
        for f in self.boundary_faces.iter().filter(|f| f.tag == tag) {
            for &n in &f.nodes {
                mask[n] = true;
            }
        }
        mask
    }

    /// Nodes carrying the Dirichlet condition.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        self.tagged_nodes(BoundaryTag::Gamma1)
    }

    /// Vertex-lumped surface measure of the faces with the given tag.
    pub fn boundary_lumped_weights(&self, tag: BoundaryTag) -> Vec<f64> {
        let mut w = vec![0.0; self.n_nodes()];
        for f in self.boundary_faces.iter().filter(|f| f.tag == tag) {
            let share = f.measure / f.nodes.len() as f64;
            for &n in &f.nodes {
                w[n] += share;
            }
        }
        w
    }

    pub fn boundary_measure(&self, tag: BoundaryTag) -> f64 {
        self.boundary_faces.iter().filter(|f| f.tag == tag).map(|f| f.measure).sum()
    }

    /// Largest deviation between stored geometry and a fresh recomputation.
    pub fn geometry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (e, el) in self.elements.iter().enumerate() {
            let (vol, grads) = element_geometry(self.dim, &self.nodes, &el[..self.dim + 1], None);
            worst = worst.max((vol - self.element_volumes[e]).abs());
            for a in 0..=self.dim {
                for c in 0..2 {
                    worst = worst.max((grads[a][c] - self.basis_gradients[e][a][c]).abs());
                }
            }
        }
        worst
    }

    pub fn summary(&self) -> MeshSummary<'_> {
        MeshSummary {
            dim: self.dim,
            nodes: self.nodes.iter().map(|p| p[..self.dim].to_vec()).collect(),
            elements: (0..self.n_elements()).map(|e| self.element(e)).collect(),
            boundary_faces: &self.boundary_faces,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("mesh summary serializes")
    }
}

fn element_geometry(dim: usize, nodes: &[[f64; 2]], el: &[usize], spacing: Option<f64>) -> (f64, [[f64; 2]; 3]) {
    let mut grads = [[0.0; 2]; 3];
    if dim == 1 {
        let h = spacing.unwrap_or(nodes[el[1]][0] - nodes[el[0]][0]);
        grads[0] = [-1.0 / h, 0.0];
        grads[1] = [1.0 / h, 0.0];
        (h, grads)
    } else {
        let (p0, p1, p2) = (nodes[el[0]], nodes[el[1]], nodes[el[2]]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        grads[0] = [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det];
        grads[1] = [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det];
        grads[2] = [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det];
        (det / 2.0, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_two_elements() {
        let m = Mesh::interval(0.0, 1.0, 2, &BoundaryPartition::AllGamma1).unwrap();
        assert_eq!(m.n_nodes(), 3);
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.element_volumes(), &[0.5, 0.5]);
        assert!(m.boundary_faces().iter().all(|f| f.tag == BoundaryTag::Gamma1));
    }

    #[test]
    fn interval_single_element_right_gamma2() {
        let m = Mesh::interval(0.0, 1.0, 1, &BoundaryPartition::Gamma2Sides(vec![Side::Right])).unwrap();
        assert_eq!(m.n_elements(), 1);
        assert_eq!(m.tagged_nodes(BoundaryTag::Gamma2), vec![false, true]);
        assert_eq!(m.boundary_lumped_weights(BoundaryTag::Gamma2), vec![0.0, 1.0]);
    }

    #[test]
    fn interval_gradient_map() {
        let m = Mesh::interval(0.0, 2.0, 4, &BoundaryPartition::AllGamma1).unwrap();
        for e in 0..4 {
            assert_eq!(m.basis_gradients(e)[0][0], -2.0);
            assert_eq!(m.basis_gradients(e)[1][0], 2.0);
        }
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(Mesh::interval(1.0, 1.0, 3, &BoundaryPartition::AllGamma1).is_err());
        assert!(Mesh::interval(0.0, 1.0, 0, &BoundaryPartition::AllGamma1).is_err());
    }

    #[test]
    fn gamma1_must_be_nonempty() {
        let all = BoundaryPartition::Gamma2Sides(vec![Side::Left, Side::Right]);
        assert!(Mesh::interval(0.0, 1.0, 4, &all).is_err());
        let all2 = BoundaryPartition::Gamma2Sides(vec![Side::Left, Side::Right, Side::Bottom, Side::Top]);
        assert!(Mesh::rectangle(1.0, 1.0, 2, 2, &all2).is_err());
    }

    #[test]
    fn rectangle_areas() {
        let m = Mesh::rectangle(1.0, 1.0, 1, 1, &BoundaryPartition::AllGamma1).unwrap();
        assert_eq!(m.n_elements(), 2);
        assert!(m.element_volumes().iter().all(|&v| v == 0.5));
        let m = Mesh::rectangle(1.0, 1.0, 2, 2, &BoundaryPartition::AllGamma1).unwrap();
        assert_eq!(m.n_elements(), 8);
        assert!((m.measure() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn linear_function_gradient_is_reproduced() {
        let m = Mesh::rectangle(1.0, 2.0, 3, 4, &BoundaryPartition::AllGamma1).unwrap();
        let u: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        for e in 0..m.n_elements() {
            let g = m.element_gradient(e, &u);
            assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
        }
    }

    #[test]
    fn bottom_edge_weights() {
        let m = Mesh::rectangle(1.0, 1.0, 2, 2, &BoundaryPartition::Gamma2Sides(vec![Side::Bottom])).unwrap();
        let w = m.boundary_lumped_weights(BoundaryTag::Gamma2);
        assert_eq!(&w[0..3], &[0.25, 0.5, 0.25]);
        assert!(w[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_maps_annihilate_constants_and_match_recomputation() {
        for m in [
            Mesh::interval(-1.0, 3.0, 7, &BoundaryPartition::AllGamma1).unwrap(),
            Mesh::rectangle(2.0, 0.5, 5, 3, &BoundaryPartition::Gamma2Sides(vec![Side::Top])).unwrap(),
        ] {
            for e in 0..m.n_elements() {
                let g = m.element_gradient(e, &vec![1.0; m.n_nodes()]);
                assert!(g[0].abs().max(g[1].abs()) <= 1e-14 * (1.0 + m.n_elements() as f64));
            }
            assert!(m.geometry_defect() <= 1e-14);
            let lumped: f64 = m.lumped_weights().iter().sum();
            assert!((lumped - m.measure()).abs() <= 1e-13 * m.measure());
        }
    }

    #[test]
    fn boundary_weight_total_is_gamma2_measure() {
        let m = Mesh::rectangle(3.0, 2.0, 6, 5, &BoundaryPartition::Gamma2Sides(vec![Side::Bottom, Side::Right])).unwrap();
        let total: f64 = m.boundary_lumped_weights(BoundaryTag::Gamma2).iter().sum();
        assert!((total - 5.0).abs() <= 1e-14 * 5.0 * 4.0);
        assert!((m.boundary_measure(BoundaryTag::Gamma2) - 5.0).abs() < 1e-13);
    }

    #[test]
    fn summary_serializes() {
        let m = Mesh::interval(0.0, 1.0, 2, &BoundaryPartition::Gamma2Sides(vec![Side::Right])).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["dim"], 1);
        assert_eq!(v["elements"].as_array().unwrap().len(), 2);
        assert_eq!(v["boundary_faces"][1]["tag"], "Gamma2");
    }
}
