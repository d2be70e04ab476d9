//! Pole counting for planar potentials from boundary data.
//!
//! For `u` harmonic in a disc apart from isolated singularities, the
//! meromorphic function `f = u_y + i u_x` satisfies
//!
//! ```text
//! −(1/2π) ∮ q / (2p) dτ = n₋ − n₊,    p = |Du|²,  q = ∂p/∂ν,
//! ```
//!
//! where `n₋` counts the poles of `f` inside the curve (a term of pole order
//! `m` in `u` gives a pole of order `m + 1`) and `n₊` counts the zeros of `Du`.
//! The integrand is smooth and periodic, so the trapezoid rule converges
//! spectrally.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::{eval_grad2, eval_hess2, PoleSet2D, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCurve {
    pub center: Vec2,
    pub radius: f64,
    /// Number of trapezoid nodes `M`.
    pub quadrature_points: usize,
}

impl BoundaryCurve {
    pub fn circle(center: Vec2, radius: f64, quadrature_points: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Argument(format!("radius must be positive, got {radius}")));
        }
        if quadrature_points < 8 {
            return Err(Error::Argument(format!(
                "need at least 8 quadrature points, got {quadrature_points}"
            )));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Argument("circle center must be finite".into()));
        }
        Ok(Self {
            center,
            radius,
            quadrature_points,
        })
    }

    /// Point and outward unit normal at parameter `t`.
    pub fn point(&self, t: f64) -> (Vec2, Vec2) {
        let (s, c) = t.sin_cos();
        (
            [self.center[0] + self.radius * c, self.center[1] + self.radius * s],
            [c, s],
        )
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        d[0] * d[0] + d[1] * d[1] < self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    /// `−(1/2π) ∮ q/(2p) dτ` by the trapezoid rule.
    pub estimate: f64,
    pub rounded: i64,
    /// Σ (order + 1) over all poles of the configuration.
    pub exact_n_minus: u64,
    /// Zeros of `Du` inside the curve found by [`scan_zeros`].
    pub n_plus_detected: usize,
    pub p_min_on_curve: f64,
    pub quadrature_points: usize,
    pub ambiguous_cells: usize,
}

/// `(p, q)` at `x` with outward normal `normal`, from the analytic gradient and
/// Hessian: `Dp = 2 D²u Du`.
pub fn boundary_data(ps: &PoleSet2D, x: &Vec2, normal: &Vec2) -> Result<(f64, f64)> {
    let g = eval_grad2(ps, x)?;
    let h = eval_hess2(ps, x)?;
    let p = g[0] * g[0] + g[1] * g[1];
    let dp = [
        2.0 * (h[0][0] * g[0] + h[0][1] * g[1]),
        2.0 * (h[1][0] * g[0] + h[1][1] * g[1]),
    ];
    Ok((p, normal[0] * dp[0] + normal[1] * dp[1]))
}

/// `∂p/∂ν` by a central difference with step `1e−6`, Richardson-extrapolated
/// once. Independent of the analytic Hessian.
pub fn normal_derivative_fd(ps: &PoleSet2D, x: &Vec2, normal: &Vec2) -> Result<f64> {
    let p_at = |s: f64| -> Result<f64> {
        let g = eval_grad2(ps, &[x[0] + s * normal[0], x[1] + s * normal[1]])?;
        Ok(g[0] * g[0] + g[1] * g[1])
    };
    let central = |h: f64| -> Result<f64> { Ok((p_at(h)? - p_at(-h)?) / (2.0 * h)) };
    let h = 1e-6;
    Ok((4.0 * central(h / 2.0)? - central(h)?) / 3.0)
}

/// Trapezoid estimate of `n₋ − n₊` only, without the zero scan.
pub fn boundary_integral(ps: &PoleSet2D, curve: &BoundaryCurve) -> Result<(f64, f64)> {
    for pole in &ps.poles {
        let d = ((pole.center[0] - curve.center[0]).powi(2) + (pole.center[1] - curve.center[1]).powi(2)).sqrt();
        if (d - curve.radius).abs() <= 1e-12 * curve.radius.max(1.0) {
            return Err(Error::Domain(format!("pole at {:?} lies on the curve", pole.center)));
        }
    }
    let m = curve.quadrature_points;
    let mut sum = 0.0;
    let mut p_min = f64::INFINITY;
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let (x, nu) = curve.point(t);
        let (p, q) = boundary_data(ps, &x, &nu)?;
        if p.is_nan() || p <= 0.0 || !q.is_finite() {
            return Err(Error::Data(format!("p = {p:e} at boundary point {x:?}")));
        }
        p_min = p_min.min(p);
        sum += q / (2.0 * p);
    }
    // −(1/2π) · (2πR/M) · Σ
    Ok((-curve.radius / m as f64 * sum, p_min))
}

pub fn estimate_count(ps: &PoleSet2D, curve: &BoundaryCurve) -> Result<CountReport> {
    let (estimate, p_min) = boundary_integral(ps, curve)?;
    let scan = scan_zeros(ps, curve, 64)?;
    Ok(CountReport {
        estimate,
        rounded: estimate.round() as i64,
        exact_n_minus: exact_count(ps),
        n_plus_detected: scan.zeros.len(),
        p_min_on_curve: p_min,
        quadrature_points: curve.quadrature_points,
        ambiguous_cells: scan.ambiguous,
    })
}

pub fn exact_count(ps: &PoleSet2D) -> u64 {
    ps.exact_count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroScan {
    /// Distinct zeros of `Du` strictly inside the curve.
    pub zeros: Vec<Vec2>,
    /// Candidate cells whose refinement did not settle on a zero.
    pub ambiguous: usize,
}

impl ZeroScan {
    pub fn count(&self) -> usize {
        self.zeros.len()
    }
}

/// Heuristic search for simple zeros of `Du` inside the curve.
///
/// The bounding square of the circle is split into `grid_n²` cells. A cell is
/// a candidate when both gradient components take both signs (or vanish) on
/// its corners; each candidate is polished with Newton's method on `Du = 0`
/// using the analytic Hessian, and kept if the root stays within one cell of
/// where it started. Cells touching a pole are quartered, up to
/// [`POLE_REFINEMENT_DEPTH`] times, and skipped below that. Multiplicity is not
/// detected.
pub fn scan_zeros(ps: &PoleSet2D, curve: &BoundaryCurve, grid_n: usize) -> Result<ZeroScan> {
    if grid_n < 32 {
        return Err(Error::Argument(format!("grid_n must be at least 32, got {grid_n}")));
    }
    let r = curve.radius;
    let step = 2.0 * r / grid_n as f64;
    let x0 = curve.center[0] - r;
    let y0 = curve.center[1] - r;
    let mut scan = ZeroScan {
        zeros: Vec::new(),
        ambiguous: 0,
    };
    for j in 0..grid_n {
        for i in 0..grid_n {
            let lo = [x0 + i as f64 * step, y0 + j as f64 * step];
            scan_cell(ps, curve, lo, step, 0, &mut scan)?;
        }
    }
    Ok(scan)
}

pub const POLE_REFINEMENT_DEPTH: usize = 8;

fn scan_cell(
    ps: &PoleSet2D,
    curve: &BoundaryCurve,
    lo: Vec2,
    size: f64,
    depth: usize,
    scan: &mut ZeroScan,
) -> Result<()> {
    let hi = [lo[0] + size, lo[1] + size];
    // nearest point of the cell to the circle center
    let nx = curve.center[0].clamp(lo[0], hi[0]) - curve.center[0];
    let ny = curve.center[1].clamp(lo[1], hi[1]) - curve.center[1];
    if nx * nx + ny * ny >= curve.radius * curve.radius {
        return Ok(());
    }
    let near_pole = ps.poles.iter().any(|p| {
        p.center[0] >= lo[0] - size
            && p.center[0] <= hi[0] + size
            && p.center[1] >= lo[1] - size
            && p.center[1] <= hi[1] + size
    });
    if near_pole {
        if depth < POLE_REFINEMENT_DEPTH {
            let half = 0.5 * size;
            for (a, b) in [(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)] {
                scan_cell(ps, curve, [lo[0] + a, lo[1] + b], half, depth + 1, scan)?;
            }
        }
        return Ok(());
    }
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let mut grads = [[0.0; 2]; 4];
    for (g, c) in grads.iter_mut().zip(&corners) {
        *g = eval_grad2(ps, c)?;
    }
    let straddles = |k: usize| {
        let lo = grads.iter().map(|g| g[k]).fold(f64::INFINITY, f64::min);
        let hi = grads.iter().map(|g| g[k]).fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    };
    if !(straddles(0) && straddles(1)) {
        return Ok(());
    }
    let start = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    match polish_zero(ps, start, size) {
        Some(z) if z[0] >= lo[0] - size && z[0] <= hi[0] + size && z[1] >= lo[1] - size && z[1] <= hi[1] + size => {
            if !curve.contains(&z) {
                return Ok(());
            }
            let tol = 1e-8 * curve.radius.max(1.0);
            if !scan
                .zeros
                .iter()
                .any(|w| (w[0] - z[0]).abs() + (w[1] - z[1]).abs() <= tol)
            {
                scan.zeros.push(z);
            }
        }
        _ => scan.ambiguous += 1,
    }
    Ok(())
}

fn polish_zero(ps: &PoleSet2D, start: Vec2, step: f64) -> Option<Vec2> {
    let mut z = start;
    for _ in 0..60 {
        let g = eval_grad2(ps, &z).ok()?;
        let h = eval_hess2(ps, &z).ok()?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dy = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
        // keep the iteration local
        let len = (dx * dx + dy * dy).sqrt();
        let s = if len > step { step / len } else { 1.0 };
        z = [z[0] - s * dx, z[1] - s * dy];
        if len <= 1e-14 * (1.0 + z[0].abs() + z[1].abs()) {
            return Some(z);
        }
    }
    None
}
