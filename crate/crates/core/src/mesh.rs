//! Structured P1 triangulations of the unit square.
//!
//! The square is cut into `n × n` congruent cells, each split by its
//! lower-left to upper-right diagonal. Node `(i, j)` has index `j(n+1) + i`;
//! cell `(i, j)` owns triangles `2(jn + i)` (below the diagonal) and
//! `2(jn + i) + 1` (above it), both counter-clockwise.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potentials::Vec2;

/// Barycentric coordinates may dip this far below zero for points on edges.
const BARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    divisions: usize,
    h_max_actual: f64,
}

/// P1 coefficient vector: one value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: &TriMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::Argument(format!(
                "field has {} values but mesh has {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite field value at node {i}")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(mesh: &TriMesh, f: impl Fn(&Vec2) -> f64) -> Self {
        Self {
            values: mesh.nodes().iter().map(f).collect(),
        }
    }

    pub fn try_from_fn(mesh: &TriMesh, f: impl Fn(&Vec2) -> Result<f64>) -> Result<Self> {
        Self::new(mesh, mesh.nodes().iter().map(f).collect::<Result<Vec<_>>>()?)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn build_square_mesh(h_max: f64) -> Result<TriMesh> {
    if !(h_max > 0.0 && h_max <= 1.0) {
        return Err(Error::Argument(format!(
            "target maximum edge length must lie in (0, 1], got {h_max}"
        )));
    }
    let n = (std::f64::consts::SQRT_2 / h_max).ceil() as usize;
    Ok(TriMesh::structured(n))
}

impl TriMesh {
    /// `n × n` cells, `n ≥ 1`.
    pub fn structured(n: usize) -> Self {
        assert!(n >= 1, "at least one cell per side");
        let h = 1.0 / n as f64;
        let node = |i: usize, j: usize| j * (n + 1) + i;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // i == n maps to exactly 1.0
                nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([node(i, j), node(i + 1, j), node(i + 1, j + 1)]);
                triangles.push([node(i, j), node(i + 1, j + 1), node(i, j + 1)]);
            }
        }
        let boundary_nodes = (0..nodes.len()).filter(|&k| boundary[k]).collect();
        Self {
            nodes,
            triangles,
            boundary,
            boundary_nodes,
            divisions: n,
            h_max_actual: std::f64::consts::SQRT_2 * h,
        }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn h_max_actual(&self) -> f64 {
        self.h_max_actual
    }

    pub fn vertices(&self, tri: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[tri];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area (positive for counter-clockwise vertices).
    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.vertices(tri);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Triangle containing `x` and the barycentric coordinates of `x` in it.
    pub fn locate(&self, x: &Vec2) -> Result<(usize, [f64; 3])> {
        if !(x[0] >= -BARY_TOL && x[0] <= 1.0 + BARY_TOL && x[1] >= -BARY_TOL && x[1] <= 1.0 + BARY_TOL) {
            return Err(Error::Argument(format!("point {x:?} outside the unit square")));
        }
        let n = self.divisions;
        let cell = |t: f64| ((t * n as f64).floor().max(0.0) as usize).min(n - 1);
        let (i, j) = (cell(x[0]), cell(x[1]));
        let h = 1.0 / n as f64;
        let s = (x[0] - i as f64 * h) / h;
        let t = (x[1] - j as f64 * h) / h;
        let base = 2 * (j * n + i);
        if t <= s {
            // vertices (0,0), (1,0), (1,1) in local coordinates
            Ok((base, [1.0 - s, s - t, t]))
        } else {
            // vertices (0,0), (1,1), (0,1)
            Ok((base + 1, [1.0 - t, s, t - s]))
        }
    }

    /// Value of the P1 function with nodal values `field` at `x`.
    pub fn evaluate(&self, field: &NodalField, x: &Vec2) -> Result<f64> {
        let (tri, bary) = self.locate(x)?;
        let v = self.triangles[tri];
        Ok(bary[0] * field.values[v[0]] + bary[1] * field.values[v[1]] + bary[2] * field.values[v[2]])
    }

    /// Node list as `x,y` CSV and triangle list as `a,b,c` CSV.
    pub fn write_csv<W: Write, V: Write>(&self, mut nodes: W, mut tris: V) -> Result<()> {
        let io = |e| Error::io("<mesh csv>", e);
        writeln!(nodes, "x,y,boundary").map_err(io)?;
        for (k, p) in self.nodes.iter().enumerate() {
            writeln!(nodes, "{},{},{}", p[0], p[1], u8::from(self.boundary[k])).map_err(io)?;
        }
        writeln!(tris, "a,b,c").map_err(io)?;
        for t in &self.triangles {
            writeln!(tris, "{},{},{}", t[0], t[1], t[2]).map_err(io)?;
        }
        Ok(())
    }
}

/// Transfers a P1 field from `coarse` to the nodes of `fine` by evaluating the
/// coarse interpolant.
pub fn interpolate(coarse: &TriMesh, field: &NodalField, fine: &TriMesh) -> Result<NodalField> {
    if field.len() != coarse.node_count() {
        return Err(Error::Argument("field does not belong to the coarse mesh".into()));
    }
    let values = fine
        .nodes()
        .iter()
        .map(|x| coarse.evaluate(field, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(NodalField { values })
}
