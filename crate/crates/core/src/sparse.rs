//! Compressed-row sparse matrices and a banded direct solver.
//!
//! Finite-element matrices on the structured square meshes have bandwidth
//! `n + 2` in natural node order, so a banded LU with partial pivoting is
//! both exact and cheap. The Newton Jacobian is nonsymmetric, which rules out
//! Cholesky.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sparsity pattern. Each row's column list is
    /// sorted and deduplicated.
    pub fn from_pattern(ncols: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let nrows = rows.len();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::Argument("column index out of range".into()));
            }
            col_indices.extend(cols);
            row_offsets.push(col_indices.len());
        }
        let values = vec![0.0; col_indices.len()];
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Keeps only the nonzero entries of a dense row-major matrix.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Argument("ragged dense matrix".into()));
        }
        let pattern = rows
            .iter()
            .map(|r| (0..ncols).filter(|&j| r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(ncols, pattern)?;
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    m.add(i, j, v);
                }
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, (0..n).map(|i| vec![i]).collect()).expect("diagonal pattern");
        m.values.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        let cols = &self.col_indices[start..self.row_offsets[i + 1]];
        cols.binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn set_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && (0..self.nrows).all(|i| self.row(i).all(|(j, a)| (a - self.get(j, i)).abs() <= tol))
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for i in 0..self.nrows {
            for &j in &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]] {
                if j < i {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
        (lower, upper)
    }
}

/// Matrix plus right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != rhs.len() {
            return Err(Error::Argument(format!(
                "matrix has {} rows but right-hand side has {} entries",
                matrix.nrows(),
                rhs.len()
            )));
        }
        Ok(Self { matrix, rhs })
    }

    /// `‖Ax − b‖₂ / ‖b‖₂`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let r = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let b = norm2(&self.rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// LU factors of a band matrix with partial pivoting.
///
/// Row `i` stores columns `i − kl ..= i + kl + ku`; the extra `kl`
/// superdiagonals hold fill-in from row interchanges.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Solver(format!(
                "matrix is {}x{}, not square",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for (j, v) in a.row(i) {
                if !v.is_finite() {
                    return Err(Error::Solver(format!("non-finite matrix entry ({i}, {j})")));
                }
                let k = lu.idx(i, j);
                lu.data[k] = v;
                scale = scale.max(v.abs());
            }
        }
        let tiny = scale * f64::EPSILON * 1e-4;
        let reach = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = lu.data[lu.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny || best == 0.0 {
                return Err(Error::Solver(format!("matrix is singular at column {k}")));
            }
            lu.pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (x, y) = (lu.idx(k, c), lu.idx(p, c));
                    lu.data.swap(x, y);
                }
            }
            let d = lu.data[lu.idx(k, k)];
            for r in k + 1..=last_row {
                let rk = lu.idx(r, k);
                let l = lu.data[rk] / d;
                lu.data[rk] = l;
                if l != 0.0 {
                    for c in k + 1..=last_col {
                        let kc = lu.data[lu.idx(k, c)];
                        let rc = lu.idx(r, c);
                        lu.data[rc] -= l * kc;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                x[r] -= self.data[self.idx(r, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.data[self.idx(k, c)] * x[c];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        x
    }
}

/// Required relative residual of a linear solve.
pub const LINEAR_RESIDUAL_TOL: f64 = 1e-12;

/// Direct solve with up to three steps of iterative refinement.
pub fn solve_linear(system: &SparseSystem) -> Result<Vec<f64>> {
    if system.matrix.nrows() == 0 {
        return Ok(Vec::new());
    }
    let lu = BandedLu::factor(&system.matrix)?;
    let mut x = lu.solve(&system.rhs);
    let mut res = system.relative_residual(&x);
    for _ in 0..3 {
        if res <= LINEAR_RESIDUAL_TOL {
            break;
        }
        let ax = system.matrix.matvec(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        res = system.relative_residual(&x);
    }
    if !res.is_finite() || res > LINEAR_RESIDUAL_TOL {
        return Err(Error::Solver(format!("relative residual {res:e} after refinement")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let sys = SparseSystem::new(CsrMatrix::identity(5), vec![1.0, -2.0, 3.5, 0.0, 7.0]).unwrap();
        assert_eq!(solve_linear(&sys).unwrap(), sys.rhs);
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = solve_linear(&SparseSystem::new(a, vec![3.0, 3.0]).unwrap()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        // A = BᵀB + I
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = SparseSystem::new(CsrMatrix::from_dense(&a).unwrap(), rhs).unwrap();
        let x = solve_linear(&sys).unwrap();
        assert!(sys.relative_residual(&x) <= 1e-12);
    }

    #[test]
    fn needs_pivoting() {
        // zero leading diagonal entry
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 1.0]]).unwrap();
        let sys = SparseSystem::new(a, vec![1.0, 3.0, 4.0]).unwrap();
        let x = solve_linear(&sys).unwrap();
        for (xi, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((xi - e).abs() < 1e-14);
        }
    }

    #[test]
    fn random_banded_nonsymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let (kl, ku) = (7, 4);
        let pattern = (0..n)
            .map(|i: usize| (i.saturating_sub(kl)..=(i + ku).min(n - 1)).collect())
            .collect();
        let mut a = CsrMatrix::from_pattern(n, pattern).unwrap();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        assert_eq!(a.bandwidth(), (kl, ku));
        let rhs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = SparseSystem::new(a, rhs).unwrap();
        let x = solve_linear(&sys).unwrap();
        assert!(sys.relative_residual(&x) <= 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let err = solve_linear(&SparseSystem::new(a, vec![1.0, 1.0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(
            solve_linear(&SparseSystem::new(a, vec![1.0, 1.0]).unwrap()),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn pattern_access() {
        let mut a = CsrMatrix::from_pattern(3, vec![vec![2, 0, 0], vec![1], vec![]]).unwrap();
        assert_eq!(a.nnz(), 3);
        a.add(0, 2, 1.5);
        a.add(0, 2, 1.0);
        assert_eq!(a.get(0, 2), 2.5);
        assert_eq!(a.get(2, 2), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 2.0]), vec![5.0, 0.0, 0.0]);
        assert!(CsrMatrix::from_pattern(2, vec![vec![3]]).is_err());
    }
}
