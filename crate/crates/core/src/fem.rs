//! P1 finite elements for the quasi-linear trace equation
//!
//! ```text
//! div( Du / √(p − |Du|²) ) + ½ σ q / (p − |Du|²) = 0   in the unit square,
//! u = u_exact                                          on its boundary.
//! ```
//!
//! Multiplying by a test function `v` vanishing on the boundary and
//! integrating the divergence by parts gives the residual
//!
//! ```text
//! R_v(u) = ∫ a Du·Dv − ½ σ q a² v,      a = (p − |Du|²)^{−1/2},
//! ```
//!
//! whose Newton linearisation is
//!
//! ```text
//! J(w, v) = ∫ a Dw·Dv + a³ (Du·Dw)(Du·Dv) − σ q a⁴ (Du·Dw) v.
//! ```
//!
//! The coefficient `p − |Du_h|²` is floored at `ε_f · p`; clamped quadrature
//! points are counted and their coefficient is treated as constant in the
//! Jacobian.
//!
//! Vectors and matrices are indexed by mesh node. Residual entries at
//! Dirichlet nodes are zero and Dirichlet rows of Newton systems are identity
//! rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NonConvergence, Result};
use crate::mesh::{interpolate, TriMesh};
use crate::quadrature::{DEGREE_2, DEGREE_4};
use crate::sparse::{norm2, norm_inf, solve_linear, CsrMatrix, SparseSystem};
use crate::trace::{check_admissible, TraceData};

pub use crate::mesh::NodalField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Convergence threshold on the max-norm of the Newton update.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Relative floor `ε_f`: `p − |Du_h|² ≥ ε_f · p` at every quadrature point.
    pub ellipticity_floor: f64,
    pub line_search: bool,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 50,
            ellipticity_floor: 1e-8,
            line_search: true,
            max_halvings: 20,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.newton_tol) || !positive(self.ellipticity_floor) || self.max_iters == 0 {
            return Err(Error::Argument(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ElementGeometry {
    area: f64,
    /// Gradients of the three P1 basis functions.
    grads: [[f64; 2]; 3],
}

fn element_geometry(mesh: &TriMesh) -> Result<Vec<ElementGeometry>> {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.vertices(t);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let area = 0.5 * det;
            if area.is_nan() || area <= 0.0 {
                return Err(Error::Assembly(format!(
                    "degenerate or inverted triangle {t} (area {area})"
                )));
            }
            let grads = [
                [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
                [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
            ];
            Ok(ElementGeometry { area, grads })
        })
        .collect()
}

/// Node-to-node coupling pattern of a P1 mesh.
fn p1_pattern(mesh: &TriMesh) -> CsrMatrix {
    let mut rows = vec![Vec::new(); mesh.node_count()];
    for t in mesh.triangles() {
        for &i in t {
            rows[i].extend_from_slice(t);
        }
    }
    CsrMatrix::from_pattern(mesh.node_count(), rows).expect("pattern indices are node indices")
}

fn dot2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn field_gradient(geom: &ElementGeometry, tri: &[usize; 3], u: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for k in 0..3 {
        g[0] += u[tri[k]] * geom.grads[k][0];
        g[1] += u[tri[k]] * geom.grads[k][1];
    }
    g
}

/// Stiffness matrix `∫ Dw·Dv` with zero right-hand side; no boundary conditions.
pub fn assemble_laplace(mesh: &TriMesh) -> Result<SparseSystem> {
    let geom = element_geometry(mesh)?;
    let mut a = p1_pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = &geom[t];
        for i in 0..3 {
            for j in 0..3 {
                a.add(tri[i], tri[j], g.area * dot2(&g.grads[i], &g.grads[j]));
            }
        }
    }
    SparseSystem::new(a, vec![0.0; mesh.node_count()])
}

/// Imposes `u = g` at boundary nodes by symmetric elimination: boundary rows
/// become identity rows with right-hand side `g`, and boundary columns of free
/// rows are moved to the right-hand side. `g` is indexed by node; only its
/// boundary entries are read.
pub fn apply_dirichlet(system: &SparseSystem, mesh: &TriMesh, g: &[f64]) -> Result<SparseSystem> {
    let n = mesh.node_count();
    if system.matrix.nrows() != n || g.len() != n {
        return Err(Error::Argument(format!(
            "system of size {} and boundary vector of length {} do not match a mesh with {n} nodes",
            system.matrix.nrows(),
            g.len()
        )));
    }
    if let Some(&k) = mesh.boundary_nodes().iter().find(|&&k| !g[k].is_finite()) {
        return Err(Error::Argument(format!("missing boundary value at node {k}")));
    }
    let mut out = system.clone();
    let offsets = out.matrix.row_offsets().to_vec();
    let cols = out.matrix.col_indices().to_vec();
    let vals = out.matrix.values_mut();
    for i in 0..n {
        let range = offsets[i]..offsets[i + 1];
        if mesh.is_boundary(i) {
            for k in range {
                vals[k] = if cols[k] == i { 1.0 } else { 0.0 };
            }
            out.rhs[i] = g[i];
        } else {
            for k in range {
                let j = cols[k];
                if mesh.is_boundary(j) {
                    out.rhs[i] -= vals[k] * g[j];
                    vals[k] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

/// Restriction of a constrained system to the free nodes, together with the
/// node index of each free unknown.
pub fn free_subsystem(system: &SparseSystem, mesh: &TriMesh) -> Result<(SparseSystem, Vec<usize>)> {
    let free: Vec<usize> = (0..mesh.node_count()).filter(|&k| !mesh.is_boundary(k)).collect();
    let mut local = vec![usize::MAX; mesh.node_count()];
    for (l, &k) in free.iter().enumerate() {
        local[k] = l;
    }
    let pattern = free
        .iter()
        .map(|&i| {
            system
                .matrix
                .row(i)
                .filter(|&(j, _)| local[j] != usize::MAX)
                .map(|(j, _)| local[j])
                .collect()
        })
        .collect();
    let mut a = CsrMatrix::from_pattern(free.len(), pattern)?;
    for (l, &i) in free.iter().enumerate() {
        for (j, v) in system.matrix.row(i) {
            if local[j] != usize::MAX {
                a.add(l, local[j], v);
            }
        }
    }
    let rhs = free.iter().map(|&i| system.rhs[i]).collect();
    Ok((SparseSystem::new(a, rhs)?, free))
}

#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    p: f64,
    q: f64,
    sigma: f64,
    phi: [f64; 3],
    /// Quadrature weight times element area.
    weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct Coefficient {
    /// `(max(p − |Du_h|², ε_f p))^{−1/2}`
    a: f64,
    clamped: bool,
}

/// Mesh, data and options bound together, with the data sampled once at
/// every assembly quadrature point.
pub struct Discretization<'a> {
    mesh: &'a TriMesh,
    opts: SolveOptions,
    geom: Vec<ElementGeometry>,
    points: Vec<[QuadPoint; 3]>,
    pattern: CsrMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// One entry per node; zero at Dirichlet nodes.
    pub values: Vec<f64>,
    pub clamp_count: usize,
}

impl Residual {
    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
}

impl<'a> Discretization<'a> {
    pub fn new(mesh: &'a TriMesh, data: &TraceData, opts: &SolveOptions) -> Result<Self> {
        opts.validate()?;
        let geom = element_geometry(mesh)?;
        let mut points = Vec::with_capacity(mesh.triangle_count());
        for (t, g) in geom.iter().enumerate() {
            let verts = mesh.vertices(t);
            let mut qp = [QuadPoint {
                p: 0.0,
                q: 0.0,
                sigma: 0.0,
                phi: [0.0; 3],
                weight: 0.0,
            }; 3];
            for (k, (x, bary, w)) in DEGREE_2.map(&verts).enumerate() {
                let d = data.at(&x)?;
                if !(d.p.is_finite() && d.q.is_finite()) || d.p <= 0.0 {
                    return Err(Error::Assembly(format!(
                        "invalid data p = {}, q = {} at {x:?} (triangle {t})",
                        d.p, d.q
                    )));
                }
                qp[k] = QuadPoint {
                    p: d.p,
                    q: d.q,
                    sigma: d.sigma,
                    phi: bary,
                    weight: w * g.area,
                };
            }
            points.push(qp);
        }
        Ok(Self {
            mesh,
            opts: *opts,
            geom,
            points,
            pattern: p1_pattern(mesh),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    fn coefficient(&self, qp: &QuadPoint, grad: &[f64; 2], tri: usize) -> Result<Coefficient> {
        let margin = qp.p - dot2(grad, grad);
        let floor = self.opts.ellipticity_floor * qp.p;
        if !margin.is_finite() {
            return Err(Error::Assembly(format!("non-finite coefficient in triangle {tri}")));
        }
        let clamped = margin < floor;
        Ok(Coefficient {
            a: 1.0 / margin.max(floor).sqrt(),
            clamped,
        })
    }

    fn check_field(&self, u: &NodalField) -> Result<()> {
        if u.len() != self.mesh.node_count() {
            return Err(Error::Argument("field does not belong to this mesh".into()));
        }
        Ok(())
    }

    pub fn residual(&self, u: &NodalField) -> Result<Residual> {
        self.check_field(u)?;
        let mut r = vec![0.0; self.mesh.node_count()];
        let mut clamp_count = 0;
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let g = &self.geom[t];
            let du = field_gradient(g, tri, &u.values);
            for qp in &self.points[t] {
                let c = self.coefficient(qp, &du, t)?;
                clamp_count += usize::from(c.clamped);
                let src = 0.5 * qp.sigma * qp.q * c.a * c.a;
                for i in 0..3 {
                    r[tri[i]] += qp.weight * (c.a * dot2(&du, &g.grads[i]) - src * qp.phi[i]);
                }
            }
        }
        for &k in self.mesh.boundary_nodes() {
            r[k] = 0.0;
        }
        if let Some(k) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::Assembly(format!(
                "non-finite residual at node {k} {:?}",
                self.mesh.nodes()[k]
            )));
        }
        Ok(Residual { values: r, clamp_count })
    }

    /// Unconstrained Jacobian (Dirichlet rows not yet replaced).
    pub fn jacobian(&self, u: &NodalField) -> Result<(CsrMatrix, usize)> {
        self.check_field(u)?;
        let mut jac = self.pattern.clone();
        jac.set_zero();
        let mut clamp_count = 0;
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let g = &self.geom[t];
            let du = field_gradient(g, tri, &u.values);
            let du_dphi = [dot2(&du, &g.grads[0]), dot2(&du, &g.grads[1]), dot2(&du, &g.grads[2])];
            for qp in &self.points[t] {
                let c = self.coefficient(qp, &du, t)?;
                clamp_count += usize::from(c.clamped);
                let a = c.a;
                let (a3, sq_a4) = if c.clamped {
                    (0.0, 0.0)
                } else {
                    let a2 = a * a;
                    (a2 * a, qp.sigma * qp.q * a2 * a2)
                };
                for i in 0..3 {
                    for j in 0..3 {
                        let v = a * dot2(&g.grads[j], &g.grads[i]) + a3 * du_dphi[j] * du_dphi[i]
                            - sq_a4 * du_dphi[j] * qp.phi[i];
                        jac.add(tri[i], tri[j], qp.weight * v);
                    }
                }
            }
        }
        if jac.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Assembly("non-finite Jacobian entry".into()));
        }
        Ok((jac, clamp_count))
    }
}

pub fn assemble_residual(mesh: &TriMesh, u: &NodalField, data: &TraceData, opts: &SolveOptions) -> Result<Residual> {
    Discretization::new(mesh, data, opts)?.residual(u)
}

/// Newton system at `u`: Jacobian with homogeneous Dirichlet rows and
/// right-hand side `−R(u)`. Also returns the clamp count.
pub fn assemble_jacobian(
    mesh: &TriMesh,
    u: &NodalField,
    data: &TraceData,
    opts: &SolveOptions,
) -> Result<(SparseSystem, usize)> {
    let disc = Discretization::new(mesh, data, opts)?;
    newton_system(&disc, u)
}

fn newton_system(disc: &Discretization<'_>, u: &NodalField) -> Result<(SparseSystem, usize)> {
    let (jac, clamps) = disc.jacobian(u)?;
    let r = disc.residual(u)?;
    let rhs = r.values.iter().map(|v| -v).collect();
    let sys = SparseSystem::new(jac, rhs)?;
    let zeros = vec![0.0; disc.mesh.node_count()];
    Ok((apply_dirichlet(&sys, disc.mesh, &zeros)?, clamps))
}

/// Exact trace at every node.
pub fn exact_nodal(mesh: &TriMesh, data: &TraceData) -> Result<NodalField> {
    NodalField::try_from_fn(mesh, |x| data.u_exact(x))
}

/// Laplace solve with the exact trace as Dirichlet data.
pub fn solve_laplace(mesh: &TriMesh, data: &TraceData) -> Result<NodalField> {
    let g = exact_nodal(mesh, data)?;
    let sys = apply_dirichlet(&assemble_laplace(mesh)?, mesh, &g.values)?;
    NodalField::new(mesh, solve_linear(&sys)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonDiagnostics {
    pub mesh_h: f64,
    pub iterations: usize,
    pub final_update_norm: f64,
    pub final_residual_norm: f64,
    pub initial_residual_norm: f64,
    /// Clamped quadrature points at the final iterate.
    pub clamp_count: usize,
    pub halvings: usize,
    pub converged: bool,
    /// Clamping still active at the final iterate.
    pub ellipticity_warning: bool,
    /// The interpolated start failed and the solve was redone from the
    /// Laplace solution.
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct MeshSolution {
    pub field: NodalField,
    pub diagnostics: NewtonDiagnostics,
}

/// Damped Newton iteration from `initial`, whose boundary values must already
/// hold the Dirichlet data. `observe` sees every iterate, including the
/// initial one, before its Newton step.
pub fn newton_solve_observed(
    disc: &Discretization<'_>,
    initial: NodalField,
    mut observe: impl FnMut(&NodalField),
) -> std::result::Result<MeshSolution, (NodalField, NewtonDiagnostics, String)> {
    let opts = *disc.options();
    let mut u = initial;
    let mut diag = NewtonDiagnostics {
        mesh_h: disc.mesh.h_max_actual(),
        iterations: 0,
        final_update_norm: f64::NAN,
        final_residual_norm: f64::NAN,
        initial_residual_norm: f64::NAN,
        clamp_count: 0,
        halvings: 0,
        converged: false,
        ellipticity_warning: false,
        restarted: false,
    };
    macro_rules! bail {
        ($u:expr, $msg:expr) => {
            return Err(($u, diag, $msg))
        };
    }
    let mut res = match disc.residual(&u) {
        Ok(r) => r,
        Err(e) => bail!(u, e.to_string()),
    };
    diag.initial_residual_norm = res.norm();
    diag.final_residual_norm = res.norm();
    diag.clamp_count = res.clamp_count;
    for it in 1..=opts.max_iters {
        observe(&u);
        diag.iterations = it;
        let step = match newton_system(disc, &u).and_then(|(sys, _)| solve_linear(&sys)) {
            Ok(s) => s,
            Err(e) => bail!(u, e.to_string()),
        };
        let update = norm_inf(&step);
        let rnorm = res.norm();
        let trial_at = |t: f64| NodalField {
            values: u.values.iter().zip(&step).map(|(a, d)| a + t * d).collect(),
        };
        if update <= opts.newton_tol {
            // converged; keep the final small step only if it does not hurt
            let trial = trial_at(1.0);
            if let Ok(r) = disc.residual(&trial) {
                if r.norm() <= rnorm {
                    u = trial;
                    res = r;
                }
            }
            diag.final_update_norm = update;
            diag.final_residual_norm = res.norm();
            diag.clamp_count = res.clamp_count;
            diag.converged = true;
            diag.ellipticity_warning = res.clamp_count > 0;
            return Ok(MeshSolution {
                field: u,
                diagnostics: diag,
            });
        }
        let mut t = 1.0;
        let mut halvings = 0;
        loop {
            let trial = trial_at(t);
            match disc.residual(&trial) {
                Ok(r) if !opts.line_search || r.norm() <= rnorm => {
                    u = trial;
                    res = r;
                    break;
                }
                Ok(_) | Err(_) if halvings < opts.max_halvings && opts.line_search => {
                    t *= 0.5;
                    halvings += 1;
                }
                Ok(_) => {
                    diag.final_update_norm = update;
                    bail!(u, format!("line search failed after {halvings} halvings"))
                }
                Err(e) => bail!(u, e.to_string()),
            }
        }
        diag.halvings += halvings;
        diag.final_update_norm = t * update;
        diag.final_residual_norm = res.norm();
        diag.clamp_count = res.clamp_count;
    }
    let msg = format!("no convergence in {} iterations", opts.max_iters);
    bail!(u, msg)
}

pub fn newton_solve(
    disc: &Discretization<'_>,
    initial: NodalField,
) -> std::result::Result<MeshSolution, (NodalField, NewtonDiagnostics, String)> {
    newton_solve_observed(disc, initial, |_| {})
}

/// Solves on every mesh of a coarse-to-fine sequence. The coarsest mesh starts
/// from the Laplace solution with the same Dirichlet data; each finer mesh
/// starts from the interpolated previous solution, falling back to the
/// Laplace start if Newton fails from there.
pub fn solve_backus(data: &TraceData, meshes: &[TriMesh], opts: &SolveOptions) -> Result<Vec<MeshSolution>> {
    opts.validate()?;
    let report = check_admissible(data, 33)?;
    if !report.admissible {
        return Err(Error::Data(format!(
            "inadmissible data: min p = {:e}, min margin = {:e}, constant sign = {}",
            report.min_p, report.min_margin, report.sigma_constant
        )));
    }
    let mut out: Vec<MeshSolution> = Vec::with_capacity(meshes.len());
    for (level, mesh) in meshes.iter().enumerate() {
        let disc = Discretization::new(mesh, data, opts)?;
        let attempt = match out.last() {
            None => newton_solve(&disc, solve_laplace(mesh, data)?),
            Some(prev) => {
                let mut initial = interpolate(&meshes[level - 1], &prev.field, mesh)?;
                for &k in mesh.boundary_nodes() {
                    initial.values[k] = data.u_exact(&mesh.nodes()[k])?;
                }
                match newton_solve(&disc, initial) {
                    Ok(sol) => Ok(sol),
                    Err(first) => match newton_solve(&disc, solve_laplace(mesh, data)?) {
                        Ok(mut sol) => {
                            sol.diagnostics.restarted = true;
                            Ok(sol)
                        }
                        Err(_) => Err(first),
                    },
                }
            }
        };
        match attempt {
            Ok(sol) => out.push(sol),
            Err((last_iterate, diagnostics, reason)) => {
                return Err(Error::NonConvergence(Box::new(NonConvergence {
                    level,
                    reason,
                    last_iterate,
                    diagnostics,
                    completed: out,
                })))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// Full H¹ norm, L² part included.
    pub h1: f64,
}

/// L² and H¹ norms of `u_h − u_exact`, with the exact trace and its gradient
/// evaluated analytically at degree-4 quadrature points.
pub fn error_norms(mesh: &TriMesh, u_h: &NodalField, data: &TraceData) -> Result<ErrorNorms> {
    if u_h.len() != mesh.node_count() {
        return Err(Error::Argument("field does not belong to this mesh".into()));
    }
    let geom = element_geometry(mesh)?;
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = &geom[t];
        let du = field_gradient(g, tri, &u_h.values);
        for (x, bary, w) in DEGREE_4.map(&mesh.vertices(t)) {
            let d = data.at(&x)?;
            let uh = bary[0] * u_h.values[tri[0]] + bary[1] * u_h.values[tri[1]] + bary[2] * u_h.values[tri[2]];
            let e = uh - d.u;
            let ex = du[0] - d.grad_t[0];
            let ey = du[1] - d.grad_t[1];
            l2 += w * g.area * e * e;
            semi += w * g.area * (ex * ex + ey * ey);
        }
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_square_mesh;
    use crate::potentials::{Background3D, Potential3D};
    use crate::trace::make_trace;

    fn trace(p: Potential3D) -> TraceData {
        make_trace(&p).unwrap()
    }

    #[test]
    fn reference_element_stiffness() {
        // the single-cell mesh's first triangle is congruent to the unit right
        // triangle with the right angle at its second vertex
        let mesh = TriMesh::structured(1);
        let geom = element_geometry(&mesh).unwrap();
        let g = &geom[0];
        let k: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| g.area * dot2(&g.grads[i], &g.grads[j])).collect())
            .collect();
        // right angle at local vertex 1: reorder to put it first
        let order = [1, 0, 2];
        let expected = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[order[i]][order[j]] - 0.5 * expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn laplace_matrix_properties() {
        let mesh = build_square_mesh(0.3).unwrap();
        let sys = assemble_laplace(&mesh).unwrap();
        assert!(sys.matrix.is_symmetric(0.0));
        for i in 0..mesh.node_count() {
            let s: f64 = sys.matrix.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-13);
        }
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dirichlet_reduces_to_single_unknown() {
        let mesh = TriMesh::structured(2);
        let sys = apply_dirichlet(&assemble_laplace(&mesh).unwrap(), &mesh, &[1.0; 9]).unwrap();
        let (reduced, free) = free_subsystem(&sys, &mesh).unwrap();
        assert_eq!(free, vec![4]);
        assert_eq!(reduced.matrix.nrows(), 1);
        let x = solve_linear(&reduced).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_constant_and_affine() {
        let mesh = build_square_mesh(0.15).unwrap();
        let lap = assemble_laplace(&mesh).unwrap();
        let c = vec![2.5; mesh.node_count()];
        let x = solve_linear(&apply_dirichlet(&lap, &mesh, &c).unwrap()).unwrap();
        assert!(x.iter().all(|v| (v - 2.5).abs() < 1e-12));

        let g: Vec<f64> = mesh.nodes().iter().map(|x| x[0] + 2.0 * x[1]).collect();
        let sys = apply_dirichlet(&lap, &mesh, &g).unwrap();
        assert!(sys.matrix.is_symmetric(0.0));
        let x = solve_linear(&sys).unwrap();
        for (k, p) in mesh.nodes().iter().enumerate() {
            assert!((x[k] - (p[0] + 2.0 * p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_rejects_missing_values() {
        let mesh = TriMesh::structured(3);
        let lap = assemble_laplace(&mesh).unwrap();
        let mut g = vec![0.0; mesh.node_count()];
        g[0] = f64::NAN;
        assert!(matches!(apply_dirichlet(&lap, &mesh, &g), Err(Error::Argument(_))));
        assert!(apply_dirichlet(&lap, &mesh, &[0.0; 3]).is_err());
    }

    #[test]
    fn affine_residual_vanishes() {
        let mesh = build_square_mesh(0.2).unwrap();
        let data = trace(Potential3D::affine());
        let u = NodalField::from_fn(&mesh, |x| x[0]);
        let r = assemble_residual(&mesh, &u, &data, &SolveOptions::default()).unwrap();
        assert!(norm_inf(&r.values) < 1e-14);
        assert_eq!(r.clamp_count, 0);
    }

    #[test]
    fn forced_clamp_is_counted() {
        let mesh = build_square_mesh(0.2).unwrap();
        let data = trace(Potential3D::affine());
        // |Du_h| = 10 > √p = √5
        let u = NodalField::from_fn(&mesh, |x| 10.0 * x[0]);
        let r = assemble_residual(&mesh, &u, &data, &SolveOptions::default()).unwrap();
        assert_eq!(r.clamp_count, 3 * mesh.triangle_count());
        assert!(r.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn jacobian_degenerates_to_scaled_stiffness() {
        // u = 2 x₃: p = 4, q = 0, trace 0
        let pot = Potential3D::new(
            Some(Background3D::Affine {
                constant: 0.0,
                gradient: [0.0, 0.0, 2.0],
            }),
            vec![],
        );
        let data = trace(pot);
        let mesh = build_square_mesh(0.3).unwrap();
        let disc = Discretization::new(&mesh, &data, &SolveOptions::default()).unwrap();
        let (jac, _) = disc.jacobian(&NodalField::from_fn(&mesh, |_| 0.0)).unwrap();
        let k = assemble_laplace(&mesh).unwrap().matrix;
        for (a, b) in jac.values().iter().zip(k.values()) {
            assert!((a - 0.5 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobian_symmetric_when_q_vanishes() {
        let data = trace(Potential3D::affine());
        let mesh = build_square_mesh(0.25).unwrap();
        let disc = Discretization::new(&mesh, &data, &SolveOptions::default()).unwrap();
        let u = NodalField::from_fn(&mesh, |x| x[0] + 0.3 * x[1] * x[1] - 0.2 * x[0] * x[1]);
        let (jac, clamps) = disc.jacobian(&u).unwrap();
        assert_eq!(clamps, 0);
        assert!(jac.is_symmetric(1e-15));
    }

    #[test]
    fn jacobian_matches_central_differences_on_u0() {
        let data = trace(Potential3D::u0());
        let mesh = build_square_mesh(0.2).unwrap();
        let disc = Discretization::new(&mesh, &data, &SolveOptions::default()).unwrap();
        let base = exact_nodal(&mesh, &data).unwrap();
        let u = NodalField {
            values: base
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| v + 0.05 * ((k * 7 % 11) as f64 - 5.0) / 5.0)
                .collect(),
        };
        let w: Vec<f64> = (0..mesh.node_count())
            .map(|k| ((k * 13 % 17) as f64 - 8.0) / 8.0)
            .collect();
        let (jac, _) = disc.jacobian(&u).unwrap();
        let jw = jac.matvec(&w);
        let eps = 1e-6;
        let shifted = |s: f64| NodalField {
            values: u.values.iter().zip(&w).map(|(a, b)| a + s * b).collect(),
        };
        let rp = disc.residual(&shifted(eps)).unwrap();
        let rm = disc.residual(&shifted(-eps)).unwrap();
        let fd: Vec<f64> = rp
            .values
            .iter()
            .zip(&rm.values)
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        let free_jw: Vec<f64> = (0..mesh.node_count())
            .map(|k| if mesh.is_boundary(k) { 0.0 } else { jw[k] })
            .collect();
        let diff: Vec<f64> = fd.iter().zip(&free_jw).map(|(a, b)| a - b).collect();
        assert!(
            norm2(&diff) <= 1e-5 * norm2(&free_jw),
            "{} vs {}",
            norm2(&diff),
            norm2(&free_jw)
        );
    }

    #[test]
    fn error_norms_trivial_cases() {
        let mesh = build_square_mesh(0.2).unwrap();
        let affine = trace(Potential3D::affine());
        let exact = exact_nodal(&mesh, &affine).unwrap();
        let e = error_norms(&mesh, &exact, &affine).unwrap();
        assert!(e.l2 < 1e-12 && e.h1 < 1e-12);

        let shifted = NodalField {
            values: exact.values.iter().map(|v| v + 0.25).collect(),
        };
        let e = error_norms(&mesh, &shifted, &affine).unwrap();
        assert!((e.l2 - 0.25).abs() < 1e-12);
        assert!((e.h1 - 0.25).abs() < 1e-12);

        // u_exact ≡ 1 on the plane, u_h ≡ 0
        let one = trace(Potential3D::new(
            Some(Background3D::Affine {
                constant: 1.0,
                gradient: [0.0, 0.0, 1.0],
            }),
            vec![],
        ));
        let zero = NodalField::from_fn(&mesh, |_| 0.0);
        let e = error_norms(&mesh, &zero, &one).unwrap();
        assert!((e.l2 - 1.0).abs() < 1e-12 && (e.h1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_instance_solves_exactly() {
        let data = trace(Potential3D::affine());
        let meshes: Vec<_> = [0.2, 0.1].iter().map(|&h| build_square_mesh(h).unwrap()).collect();
        let sols = solve_backus(&data, &meshes, &SolveOptions::default()).unwrap();
        for (mesh, s) in meshes.iter().zip(&sols) {
            assert!(s.diagnostics.iterations <= 2);
            assert!(s.diagnostics.converged);
            for (k, x) in mesh.nodes().iter().enumerate() {
                assert!((s.field.values[k] - x[0]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn inadmissible_data_is_rejected() {
        let tangent = trace(Potential3D::new(
            Some(Background3D::Affine {
                constant: 0.0,
                gradient: [1.0, 0.0, 0.0],
            }),
            vec![],
        ));
        let mesh = build_square_mesh(0.5).unwrap();
        assert!(matches!(
            solve_backus(&tangent, &[mesh], &SolveOptions::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn options_validation() {
        let bad = SolveOptions {
            newton_tol: 0.0,
            ..SolveOptions::default()
        };
        assert!(bad.validate().is_err());
        let parsed: SolveOptions = serde_json::from_str(r#"{"max_iters": 7}"#).unwrap();
        assert_eq!(parsed.max_iters, 7);
        assert_eq!(parsed.newton_tol, 1e-10);
    }
}
