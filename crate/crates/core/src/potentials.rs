//! Closed-form harmonic potentials.
//!
//! In 3D a potential is an optional harmonic background plus a finite sum of
//! point terms `b · D^α Γ(x − y)` with `Γ(x) = −1/(4π|x|)` and `|α| ≤ 1`.
//! In 2D a potential is a harmonic polynomial of degree at most two plus
//! singular terms parameterised by their complex pole order: order 0 is
//! `c₀/(2π) · log|x − x_c|` and order `m ≥ 1` is `Re(c · (z − z_c)^{−m})`.
//!
//! All derivatives are analytic. The 2D terms are differentiated through the
//! holomorphic function `F` with `u = Re F`, so that `u_x = Re F'`,
//! `u_y = −Im F'`, `u_xx = −u_yy = Re F''` and `u_xy = −Im F''`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Squared distance below which a point is treated as sitting on a singularity.
const SINGULAR_R2: f64 = 1e-24;

/// Harmonic background of a 3D potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Background3D {
    /// `(x₁−x₀)² + (x₂−y₀)² − 2(x₃−z₀)²`.
    Quadratic(QuadraticBackground3D),
    /// `constant + gradient · x`.
    Affine { constant: f64, gradient: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBackground3D {
    pub center: Vec3,
}

impl QuadraticBackground3D {
    pub fn new(center: Vec3) -> Self {
        Self { center }
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        let d = sub3(x, &self.center);
        d[0] * d[0] + d[1] * d[1] - 2.0 * d[2] * d[2]
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let d = sub3(x, &self.center);
        [2.0 * d[0], 2.0 * d[1], -4.0 * d[2]]
    }

    pub fn hessian(&self) -> Mat3 {
        [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -4.0]]
    }
}

impl Background3D {
    fn value(&self, x: &Vec3) -> f64 {
        match self {
            Background3D::Quadratic(q) => q.value(x),
            Background3D::Affine { constant, gradient } => constant + dot3(gradient, x),
        }
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        match self {
            Background3D::Quadratic(q) => q.gradient(x),
            Background3D::Affine { gradient, .. } => *gradient,
        }
    }

    fn hessian(&self) -> Mat3 {
        match self {
            Background3D::Quadratic(q) => q.hessian(),
            Background3D::Affine { .. } => [[0.0; 3]; 3],
        }
    }
}

/// Derivative order of a point term: `Γ` itself or one first derivative `D_k Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiindex {
    Monopole,
    Dipole(usize),
}

impl Multiindex {
    pub fn as_array(self) -> [u32; 3] {
        match self {
            Multiindex::Monopole => [0, 0, 0],
            Multiindex::Dipole(k) => {
                let mut a = [0; 3];
                a[k] = 1;
                a
            }
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Multiindex::Monopole => 0,
            Multiindex::Dipole(_) => 1,
        }
    }
}

impl TryFrom<[u32; 3]> for Multiindex {
    type Error = Error;

    fn try_from(alpha: [u32; 3]) -> Result<Self> {
        match alpha {
            [0, 0, 0] => Ok(Multiindex::Monopole),
            [1, 0, 0] => Ok(Multiindex::Dipole(0)),
            [0, 1, 0] => Ok(Multiindex::Dipole(1)),
            [0, 0, 1] => Ok(Multiindex::Dipole(2)),
            other => Err(Error::Argument(format!(
                "multiindex {other:?} not supported, |alpha| must be 0 or 1"
            ))),
        }
    }
}

/// `moment · D^α Γ(x − location)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointTermRepr", into = "PointTermRepr")]
pub struct PointTerm3D {
    pub location: Vec3,
    pub moment: f64,
    pub alpha: Multiindex,
}

#[derive(Serialize, Deserialize)]
struct PointTermRepr {
    loc: Vec3,
    moment: f64,
    #[serde(default)]
    alpha: [u32; 3],
}

impl TryFrom<PointTermRepr> for PointTerm3D {
    type Error = Error;

    fn try_from(r: PointTermRepr) -> Result<Self> {
        PointTerm3D::new(r.loc, r.moment, Multiindex::try_from(r.alpha)?)
    }
}

impl From<PointTerm3D> for PointTermRepr {
    fn from(t: PointTerm3D) -> Self {
        PointTermRepr {
            loc: t.location,
            moment: t.moment,
            alpha: t.alpha.as_array(),
        }
    }
}

impl PointTerm3D {
    pub fn new(location: Vec3, moment: f64, alpha: Multiindex) -> Result<Self> {
        if !location.iter().all(|c| c.is_finite()) || !moment.is_finite() {
            return Err(Error::Argument(
                "point term must have finite location and moment".into(),
            ));
        }
        if location[2] == 0.0 {
            return Err(Error::Argument(format!(
                "point term at {location:?} lies on the trace plane x3 = 0"
            )));
        }
        Ok(Self {
            location,
            moment,
            alpha,
        })
    }

    pub fn monopole(location: Vec3, moment: f64) -> Result<Self> {
        Self::new(location, moment, Multiindex::Monopole)
    }

    fn offset(&self, x: &Vec3) -> Result<(Vec3, f64)> {
        let d = sub3(x, &self.location);
        let r2 = dot3(&d, &d);
        if r2 <= SINGULAR_R2 {
            return Err(Error::Domain(format!(
                "evaluation at point term location {:?}",
                self.location
            )));
        }
        Ok((d, r2))
    }

    pub fn value(&self, x: &Vec3) -> Result<f64> {
        let (d, r2) = self.offset(x)?;
        let r = r2.sqrt();
        let v = match self.alpha {
            Multiindex::Monopole => -1.0 / (4.0 * PI * r),
            Multiindex::Dipole(k) => d[k] / (4.0 * PI * r2 * r),
        };
        Ok(self.moment * v)
    }

    pub fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        let (d, r2) = self.offset(x)?;
        let r = r2.sqrt();
        let mut g = [0.0; 3];
        match self.alpha {
            Multiindex::Monopole => {
                let s = 1.0 / (4.0 * PI * r2 * r);
                for i in 0..3 {
                    g[i] = s * d[i];
                }
            }
            Multiindex::Dipole(k) => {
                let r5 = r2 * r2 * r;
                for i in 0..3 {
                    let delta = if i == k { r2 } else { 0.0 };
                    g[i] = (delta - 3.0 * d[i] * d[k]) / (4.0 * PI * r5);
                }
            }
        }
        Ok(scale3(&g, self.moment))
    }

    pub fn hessian(&self, x: &Vec3) -> Result<Mat3> {
        let (d, r2) = self.offset(x)?;
        let r = r2.sqrt();
        let r5 = r2 * r2 * r;
        let mut h = [[0.0; 3]; 3];
        match self.alpha {
            Multiindex::Monopole => {
                for i in 0..3 {
                    for j in 0..3 {
                        let delta = if i == j { r2 } else { 0.0 };
                        h[i][j] = (delta - 3.0 * d[i] * d[j]) / (4.0 * PI * r5);
                    }
                }
            }
            Multiindex::Dipole(k) => {
                let r7 = r5 * r2;
                let kd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                for i in 0..3 {
                    for j in 0..3 {
                        let first = -3.0 * (kd(i, k) * d[j] + kd(i, j) * d[k] + kd(j, k) * d[i]) / r5;
                        let second = 15.0 * d[i] * d[j] * d[k] / r7;
                        h[i][j] = (first + second) / (4.0 * PI);
                    }
                }
            }
        }
        for row in h.iter_mut() {
            for v in row.iter_mut() {
                *v *= self.moment;
            }
        }
        Ok(h)
    }
}

/// Background plus point terms; harmonic on ℝ³ minus the term locations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Potential3D {
    #[serde(default)]
    pub background: Option<Background3D>,
    #[serde(default)]
    pub terms: Vec<PointTerm3D>,
}

impl Potential3D {
    pub fn new(background: Option<Background3D>, terms: Vec<PointTerm3D>) -> Self {
        Self { background, terms }
    }

    /// Background field `(x+2)² + (y+3)² − 2(z+2.5)²`.
    pub fn u0() -> Self {
        Self::new(
            Some(Background3D::Quadratic(QuadraticBackground3D::new([-2.0, -3.0, -2.5]))),
            Vec::new(),
        )
    }

    /// Unit monopole `Γ(x − (0.2, 0.1, 0.5))`.
    pub fn u1() -> Self {
        let term = PointTerm3D::monopole([0.2, 0.1, 0.5], 1.0).expect("off-plane location");
        Self::new(None, vec![term])
    }

    pub fn u0_plus_u1() -> Self {
        Self::new(Self::u0().background, Self::u1().terms)
    }

    /// `x₁ + 2x₃`: exactly representable by P1 on the trace plane.
    pub fn affine() -> Self {
        Self::new(
            Some(Background3D::Affine {
                constant: 0.0,
                gradient: [1.0, 0.0, 2.0],
            }),
            Vec::new(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn eval_u3(pot: &Potential3D, x: &Vec3) -> Result<f64> {
    let mut v = pot.background.map_or(0.0, |b| b.value(x));
    for t in &pot.terms {
        v += t.value(x)?;
    }
    Ok(v)
}

pub fn eval_grad3(pot: &Potential3D, x: &Vec3) -> Result<Vec3> {
    let mut g = pot.background.map_or([0.0; 3], |b| b.gradient(x));
    for t in &pot.terms {
        g = add3(&g, &t.gradient(x)?);
    }
    Ok(g)
}

pub fn eval_hess3(pot: &Potential3D, x: &Vec3) -> Result<Mat3> {
    let mut h = pot.background.map_or([[0.0; 3]; 3], |b| b.hessian());
    for t in &pot.terms {
        let th = t.hessian(x)?;
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += th[i][j];
            }
        }
    }
    Ok(h)
}

/// One singular term of a planar potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole2D {
    pub center: Vec2,
    pub order: u32,
    pub coef: Complex64,
}

impl Pole2D {
    pub fn new(center: Vec2, order: u32, coef: Complex64) -> Result<Self> {
        if coef.norm() == 0.0 || !coef.re.is_finite() || !coef.im.is_finite() {
            return Err(Error::Argument("pole coefficient must be finite and nonzero".into()));
        }
        if order == 0 && coef.im != 0.0 {
            return Err(Error::Argument(
                "logarithmic pole (order 0) needs a real coefficient".into(),
            ));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Argument("pole center must be finite".into()));
        }
        Ok(Self { center, order, coef })
    }

    /// `c₀/(2π) · log|x − center|`.
    pub fn log(center: Vec2, c0: f64) -> Result<Self> {
        Self::new(center, 0, Complex64::new(c0, 0.0))
    }

    fn local(&self, x: &Vec2) -> Result<Complex64> {
        let z = Complex64::new(x[0] - self.center[0], x[1] - self.center[1]);
        if z.norm_sqr() <= SINGULAR_R2 {
            return Err(Error::Domain(format!("evaluation at pole center {:?}", self.center)));
        }
        Ok(z)
    }

    fn value(&self, x: &Vec2) -> Result<f64> {
        let z = self.local(x)?;
        Ok(match self.order {
            0 => self.coef.re / (2.0 * PI) * z.norm().ln(),
            m => (self.coef * z.powi(-(m as i32))).re,
        })
    }

    /// First and second derivatives of the holomorphic `F` with `u = Re F`.
    fn holomorphic_derivatives(&self, x: &Vec2) -> Result<(Complex64, Complex64)> {
        let z = self.local(x)?;
        Ok(match self.order {
            0 => {
                let c = self.coef.re / (2.0 * PI);
                (c / z, -c / (z * z))
            }
            m => {
                let mf = m as f64;
                let m = m as i32;
                let d1 = -mf * self.coef * z.powi(-m - 1);
                let d2 = mf * (mf + 1.0) * self.coef * z.powi(-m - 2);
                (d1, d2)
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PoleRepr {
    center: Vec2,
    order: u32,
    coef: [f64; 2],
}

/// Planar potential with harmonic quadratic background and singular terms.
///
/// The background coefficients multiply `1, x, y, x² − y², xy`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoleSet2D {
    pub background: [f64; 5],
    pub poles: Vec<Pole2D>,
}

#[derive(Serialize, Deserialize)]
struct PoleSetRepr {
    #[serde(default)]
    background: [f64; 5],
    #[serde(default)]
    poles: Vec<PoleRepr>,
}

impl Serialize for PoleSet2D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoleSetRepr {
            background: self.background,
            poles: self
                .poles
                .iter()
                .map(|p| PoleRepr {
                    center: p.center,
                    order: p.order,
                    coef: [p.coef.re, p.coef.im],
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PoleSet2D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PoleSetRepr::deserialize(d)?;
        let poles = repr
            .poles
            .into_iter()
            .map(|p| Pole2D::new(p.center, p.order, Complex64::new(p.coef[0], p.coef[1])))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Ok(PoleSet2D {
            background: repr.background,
            poles,
        })
    }
}

impl PoleSet2D {
    pub fn new(background: [f64; 5], poles: Vec<Pole2D>) -> Self {
        Self { background, poles }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Σ (order + 1): the number of poles of `u_y + i u_x`, counted with order.
    /// Assumes distinct centers; terms sharing a center merge into one pole.
    pub fn exact_count(&self) -> u64 {
        self.poles.iter().map(|p| u64::from(p.order) + 1).sum()
    }

    /// Same configuration rigidly rotated by `angle` about `pivot` and then
    /// shifted by `shift`.
    pub fn transformed(&self, pivot: Vec2, angle: f64, shift: Vec2) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let map = |p: &Vec2| {
            let d = [p[0] - pivot[0], p[1] - pivot[1]];
            [
                pivot[0] + c * d[0] - s * d[1] + shift[0],
                pivot[1] + s * d[0] + c * d[1] + shift[1],
            ]
        };
        let rot = Complex64::from_polar(1.0, angle);
        let poles = self
            .poles
            .iter()
            .map(|p| {
                // (z − z_c)^{−m} picks up e^{−imθ}; compensate in the coefficient.
                let coef = if p.order == 0 {
                    p.coef
                } else {
                    p.coef * rot.powi(p.order as i32)
                };
                Pole2D::new(map(&p.center), p.order, coef)
            })
            .collect::<Result<Vec<_>>>()?;
        if self.background.iter().skip(1).any(|&b| b != 0.0) {
            return Err(Error::Argument(
                "rigid transformation of a non-constant background is not supported".into(),
            ));
        }
        Ok(Self::new(self.background, poles))
    }
}

fn background2_value(b: &[f64; 5], x: &Vec2) -> f64 {
    b[0] + b[1] * x[0] + b[2] * x[1] + b[3] * (x[0] * x[0] - x[1] * x[1]) + b[4] * x[0] * x[1]
}

fn background2_gradient(b: &[f64; 5], x: &Vec2) -> Vec2 {
    [
        b[1] + 2.0 * b[3] * x[0] + b[4] * x[1],
        b[2] - 2.0 * b[3] * x[1] + b[4] * x[0],
    ]
}

fn background2_hessian(b: &[f64; 5]) -> Mat2 {
    [[2.0 * b[3], b[4]], [b[4], -2.0 * b[3]]]
}

pub fn eval_u2(ps: &PoleSet2D, x: &Vec2) -> Result<f64> {
    let mut v = background2_value(&ps.background, x);
    for p in &ps.poles {
        v += p.value(x)?;
    }
    Ok(v)
}

pub fn eval_grad2(ps: &PoleSet2D, x: &Vec2) -> Result<Vec2> {
    let mut g = background2_gradient(&ps.background, x);
    for p in &ps.poles {
        let (d1, _) = p.holomorphic_derivatives(x)?;
        g[0] += d1.re;
        g[1] -= d1.im;
    }
    Ok(g)
}

pub fn eval_hess2(ps: &PoleSet2D, x: &Vec2) -> Result<Mat2> {
    let mut h = background2_hessian(&ps.background);
    for p in &ps.poles {
        let (_, d2) = p.holomorphic_derivatives(x)?;
        h[0][0] += d2.re;
        h[1][1] -= d2.re;
        h[0][1] -= d2.im;
        h[1][0] -= d2.im;
    }
    Ok(h)
}

pub(crate) fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale3(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u0_value_and_gradient_at_origin() {
        let u0 = Potential3D::u0();
        let x = [0.0; 3];
        assert!((eval_u3(&u0, &x).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(eval_grad3(&u0, &x).unwrap(), [4.0, 6.0, -10.0]);
        assert_eq!(
            eval_hess3(&u0, &[0.3, -1.0, 7.0]).unwrap(),
            [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -4.0]]
        );
    }

    #[test]
    fn monopole_value_at_origin() {
        // independent scalar evaluation of −1/(4π r), r² = 0.04 + 0.01 + 0.25
        let expected = -1.0 / (4.0 * std::f64::consts::PI * (0.30f64).sqrt());
        let v = eval_u3(&Potential3D::u1(), &[0.0; 3]).unwrap();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - (-0.145287920783)).abs() < 1e-11);
    }

    #[test]
    fn monopole_normal_gradient_is_negative_on_plane() {
        let u1 = Potential3D::u1();
        for &(x, y) in &[(0.0, 0.0), (0.2, 0.1), (1.0, 1.0), (-3.0, 5.0)] {
            assert!(eval_grad3(&u1, &[x, y, 0.0]).unwrap()[2] < 0.0);
        }
    }

    #[test]
    fn empty_potential_is_zero() {
        let p = Potential3D::default();
        assert_eq!(eval_u3(&p, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(eval_grad3(&p, &[1.0, 2.0, 3.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn evaluation_at_term_location_is_a_domain_error() {
        let u1 = Potential3D::u1();
        assert!(matches!(eval_u3(&u1, &[0.2, 0.1, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(eval_grad3(&u1, &[0.2, 0.1, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(eval_hess3(&u1, &[0.2, 0.1, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_second_order_multiindex_and_plane_locations() {
        assert!(Multiindex::try_from([1, 1, 0]).is_err());
        assert!(Multiindex::try_from([0, 0, 2]).is_err());
        assert!(PointTerm3D::monopole([0.5, 0.5, 0.0], 1.0).is_err());
    }

    #[test]
    fn log_pole_gradient() {
        let ps = PoleSet2D::new([0.0; 5], vec![Pole2D::log([0.0, 0.0], 1.0).unwrap()]);
        for &r in &[0.5, 1.0, 3.0] {
            let g = eval_grad2(&ps, &[r, 0.0]).unwrap();
            assert!((g[0] - 1.0 / (2.0 * PI * r)).abs() < 1e-15);
            assert!(g[1].abs() < 1e-15);
        }
    }

    #[test]
    fn saddle_background_gradient() {
        let ps = PoleSet2D::new([0.0, 0.0, 0.0, 1.0, 0.0], vec![]);
        assert_eq!(eval_grad2(&ps, &[1.0, 1.0]).unwrap(), [2.0, -2.0]);
    }

    #[test]
    fn dipole_pole_matches_real_part_of_inverse() {
        // Re(c/z) with c = 1: x/(x² + y²)
        let ps = PoleSet2D::new(
            [0.0; 5],
            vec![Pole2D::new([0.0, 0.0], 1, Complex64::new(1.0, 0.0)).unwrap()],
        );
        let x = [0.3, -0.7];
        let r2 = x[0] * x[0] + x[1] * x[1];
        assert!((eval_u2(&ps, &x).unwrap() - x[0] / r2).abs() < 1e-14);
        let g = eval_grad2(&ps, &x).unwrap();
        assert!((g[0] - (x[1] * x[1] - x[0] * x[0]) / (r2 * r2)).abs() < 1e-13);
        assert!((g[1] - (-2.0 * x[0] * x[1]) / (r2 * r2)).abs() < 1e-13);
    }

    #[test]
    fn pole_validation() {
        assert!(Pole2D::new([0.0, 0.0], 0, Complex64::new(1.0, 0.5)).is_err());
        assert!(Pole2D::new([0.0, 0.0], 2, Complex64::new(0.0, 0.0)).is_err());
        let ps = PoleSet2D::new([0.0; 5], vec![Pole2D::log([1.0, 1.0], 1.0).unwrap()]);
        assert!(matches!(eval_u2(&ps, &[1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_counts() {
        let log = Pole2D::log([0.0, 0.0], 1.0).unwrap();
        let dip = Pole2D::new([1.0, 0.0], 1, Complex64::new(0.0, 1.0)).unwrap();
        assert_eq!(PoleSet2D::new([0.0; 5], vec![log]).exact_count(), 1);
        assert_eq!(PoleSet2D::new([0.0; 5], vec![log, log, dip]).exact_count(), 4);
        assert_eq!(PoleSet2D::default().exact_count(), 0);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"background": {"kind": "quadratic", "center": [-2, -3, -2.5]},
                       "terms": [{"loc": [0.2, 0.1, 0.5], "moment": 1.0, "alpha": [0, 0, 0]}]}"#;
        let pot = Potential3D::from_json(text).unwrap();
        assert_eq!(pot, Potential3D::u0_plus_u1());
        let back: Potential3D = serde_json::from_str(&serde_json::to_string(&pot).unwrap()).unwrap();
        assert_eq!(back, pot);

        let bad = r#"{"terms": [{"loc": [0, 0, 1], "moment": 1.0, "alpha": [2, 0, 0]}]}"#;
        assert!(Potential3D::from_json(bad).is_err());

        let text = r#"{"poles": [{"center": [0, 0], "order": 1, "coef": [1.0, -2.0]}],
                       "background": [0, 1, 0, 0, 0]}"#;
        let ps = PoleSet2D::from_json(text).unwrap();
        assert_eq!(ps.poles[0].coef, Complex64::new(1.0, -2.0));
        assert_eq!(ps.background[1], 1.0);
        let back: PoleSet2D = serde_json::from_str(&serde_json::to_string(&ps).unwrap()).unwrap();
        assert_eq!(back, ps);
    }
}
