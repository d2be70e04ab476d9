//! Symmetric quadrature rules on triangles, in barycentric coordinates.
//! Weights sum to one; multiply by the triangle area.

pub struct TriangleRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

const A2: f64 = 2.0 / 3.0;
const B2: f64 = 1.0 / 6.0;

/// 3-point interior rule, exact for degree 2.
pub const DEGREE_2: TriangleRule = TriangleRule {
    points: &[[A2, B2, B2], [B2, A2, B2], [B2, B2, A2]],
    weights: &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
};

const A4: f64 = 0.445_948_490_915_964_9;
const C4: f64 = 1.0 - 2.0 * A4;
const W4A: f64 = 0.223_381_589_678_011_5;
const B4: f64 = 0.091_576_213_509_770_74;
const D4: f64 = 1.0 - 2.0 * B4;
const W4B: f64 = 0.109_951_743_655_321_9;

/// 6-point Dunavant rule, exact for degree 4.
pub const DEGREE_4: TriangleRule = TriangleRule {
    points: &[
        [A4, A4, C4],
        [A4, C4, A4],
        [C4, A4, A4],
        [B4, B4, D4],
        [B4, D4, B4],
        [D4, B4, B4],
    ],
    weights: &[W4A, W4A, W4A, W4B, W4B, W4B],
};

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical quadrature points for a triangle with vertices `v`.
    pub fn map(&self, v: &[[f64; 2]; 3]) -> impl Iterator<Item = ([f64; 2], [f64; 3], f64)> + '_ {
        let v = *v;
        self.points.iter().zip(self.weights).map(move |(b, &w)| {
            let x = [
                b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
            ];
            (x, *b, w)
        })
    }
}
