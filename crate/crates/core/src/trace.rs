//! Augmented boundary data on the plane `x₃ = 0`.
//!
//! For a harmonic `u` in 3D, the data on the plane are
//!
//! * `p = |∇u|²` (squared full field magnitude),
//! * `q = ∂p/∂x₃ = 2 Σ_k ∂_k u ∂_{k3} u` with the normal fixed as `+e₃`,
//! * `σ = sgn ∂₃u`,
//!
//! together with the exact trace `u(x₁, x₂, 0)` used for Dirichlet values and
//! error norms.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::{eval_grad3, eval_hess3, eval_u3, Potential3D, Vec2};

/// Everything known about the data at one point of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub u: f64,
    /// Tangential gradient `(∂₁u, ∂₂u)`.
    pub grad_t: Vec2,
    /// Normal derivative `∂₃u`.
    pub normal: f64,
    /// Tangential gradient of `p`.
    pub grad_p: Vec2,
    /// Tangential Hessian `∂_{ij}u`, `i, j ∈ {1, 2}`.
    pub hess_t: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    source: Potential3D,
}

/// Builds the data fields from a potential, rejecting sources on the plane.
pub fn make_trace(pot: &Potential3D) -> Result<TraceData> {
    for t in &pot.terms {
        let [x, y, z] = t.location;
        if z == 0.0 {
            let inside = (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y);
            return Err(Error::Domain(format!(
                "point term at ({x}, {y}, 0) lies on the trace plane{}",
                if inside { " inside the unit square" } else { "" }
            )));
        }
    }
    Ok(TraceData { source: pot.clone() })
}

impl TraceData {
    pub fn source(&self) -> &Potential3D {
        &self.source
    }

    pub fn at(&self, x: &Vec2) -> Result<TracePoint> {
        let pt = [x[0], x[1], 0.0];
        let g = eval_grad3(&self.source, &pt)?;
        let h = eval_hess3(&self.source, &pt)?;
        let u = eval_u3(&self.source, &pt)?;
        let p = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let q = 2.0 * (g[0] * h[0][2] + g[1] * h[1][2] + g[2] * h[2][2]);
        let grad_p = [
            2.0 * (g[0] * h[0][0] + g[1] * h[1][0] + g[2] * h[2][0]),
            2.0 * (g[0] * h[0][1] + g[1] * h[1][1] + g[2] * h[2][1]),
        ];
        let sigma = if g[2] > 0.0 {
            1.0
        } else if g[2] < 0.0 {
            -1.0
        } else {
            0.0
        };
        Ok(TracePoint {
            p,
            q,
            sigma,
            u,
            grad_t: [g[0], g[1]],
            normal: g[2],
            grad_p,
            hess_t: [[h[0][0], h[0][1]], [h[1][0], h[1][1]]],
        })
    }

    pub fn p(&self, x: &Vec2) -> Result<f64> {
        Ok(self.at(x)?.p)
    }

    pub fn q(&self, x: &Vec2) -> Result<f64> {
        Ok(self.at(x)?.q)
    }

    pub fn sigma(&self, x: &Vec2) -> Result<f64> {
        Ok(self.at(x)?.sigma)
    }

    pub fn u_exact(&self, x: &Vec2) -> Result<f64> {
        eval_u3(&self.source, &[x[0], x[1], 0.0])
    }

    /// Terms of the non-divergence form of the trace equation at `x`,
    /// evaluated from the exact potential:
    /// `(p − |Du|²)Δu`, `Du·D²u·Du`, `−½ Dp·Du`, `(q/2) σ √(p − |Du|²)`.
    pub fn nondivergence_terms(&self, x: &Vec2) -> Result<[f64; 4]> {
        let t = self.at(x)?;
        let [gx, gy] = t.grad_t;
        let h = t.hess_t;
        let margin = t.p - (gx * gx + gy * gy);
        let lap = h[0][0] + h[1][1];
        let quad = gx * gx * h[0][0] + 2.0 * gx * gy * h[0][1] + gy * gy * h[1][1];
        let dp = -0.5 * (t.grad_p[0] * gx + t.grad_p[1] * gy);
        let src = 0.5 * t.q * t.sigma * margin.max(0.0).sqrt();
        Ok([margin * lap, quad, dp, src])
    }

    /// The two terms of the divergence form,
    /// `div(Du/√(p − |Du|²))` and `½ σ q / (p − |Du|²)`.
    pub fn divergence_terms(&self, x: &Vec2) -> Result<(f64, f64)> {
        let t = self.at(x)?;
        let [gx, gy] = t.grad_t;
        let h = t.hess_t;
        let margin = t.p - (gx * gx + gy * gy);
        if margin <= 0.0 {
            return Err(Error::Data(format!("ellipticity lost at {x:?}")));
        }
        let s = margin.sqrt();
        // D(margin) = Dp − 2 D²u Du
        let dm = [
            t.grad_p[0] - 2.0 * (h[0][0] * gx + h[0][1] * gy),
            t.grad_p[1] - 2.0 * (h[1][0] * gx + h[1][1] * gy),
        ];
        let lap = h[0][0] + h[1][1];
        let div = lap / s - (gx * dm[0] + gy * dm[1]) / (2.0 * s * margin);
        let src = 0.5 * t.sigma * t.q / margin;
        Ok((div, src))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub grid_n: usize,
    pub min_p: f64,
    pub max_p: f64,
    /// Minimum of `p − |Du|²` (the smaller ellipticity eigenvalue).
    pub min_margin: f64,
    pub sigma_constant: bool,
    pub sigma: Option<f64>,
    /// Margin fell below `1e−10 · max p` somewhere on the lattice.
    pub degenerate: bool,
    pub admissible: bool,
}

/// Scans a `grid_n × grid_n` lattice of the unit square (endpoints included).
pub fn check_admissible(td: &TraceData, grid_n: usize) -> Result<AdmissibilityReport> {
    if grid_n < 2 {
        return Err(Error::Argument(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let mut min_p = f64::INFINITY;
    let mut max_p = f64::NEG_INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut sigma: Option<f64> = None;
    let mut sigma_constant = true;
    let step = 1.0 / (grid_n - 1) as f64;
    for j in 0..grid_n {
        for i in 0..grid_n {
            let t = td.at(&[i as f64 * step, j as f64 * step])?;
            min_p = min_p.min(t.p);
            max_p = max_p.max(t.p);
            let [gx, gy] = t.grad_t;
            min_margin = min_margin.min(t.p - (gx * gx + gy * gy));
            match sigma {
                None => sigma = Some(t.sigma),
                Some(s) if s != t.sigma => sigma_constant = false,
                _ => {}
            }
        }
    }
    let sigma_constant = sigma_constant && sigma.is_some_and(|s| s != 0.0);
    let degenerate = min_margin < 1e-10 * max_p || max_p <= 0.0;
    Ok(AdmissibilityReport {
        grid_n,
        min_p,
        max_p,
        min_margin,
        sigma_constant,
        sigma: if sigma_constant { sigma } else { None },
        degenerate,
        admissible: min_p > 0.0 && sigma_constant && !degenerate,
    })
}

/// CSV with header `x,y,p,q,sigma,u_exact`, row-major (x fastest) over an
/// `n × n` lattice of the unit square including endpoints.
pub fn write_grid_csv<W: Write>(td: &TraceData, n: usize, mut out: W) -> Result<()> {
    if n < 2 {
        return Err(Error::Argument(format!("grid size must be at least 2, got {n}")));
    }
    let io = |e| Error::io("<grid csv>", e);
    writeln!(out, "x,y,p,q,sigma,u_exact").map_err(io)?;
    let step = 1.0 / (n - 1) as f64;
    for j in 0..n {
        for i in 0..n {
            let x = [i as f64 * step, j as f64 * step];
            let t = td.at(&x)?;
            writeln!(out, "{},{},{},{},{},{}", x[0], x[1], t.p, t.q, t.sigma, t.u).map_err(io)?;
        }
    }
    Ok(())
}
