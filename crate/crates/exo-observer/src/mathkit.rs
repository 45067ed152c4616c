//! Deterministic numerical kernel: small dense matrix algebra, fixed-step
//! Runge-Kutta integration, Sylvester solve and symmetric eigenvalue bounds.
//!
//! Everything here is plain `f64` over row-major storage. The sizes involved
//! are tiny (nothing above 6x6 in the benchmark), so the decompositions are
//! written directly rather than pulled from a BLAS-backed crate; this keeps
//! runs bit-reproducible across machines.

use crate::Error;

/// Relative singularity tolerance: a determinant is treated as zero when
/// `|det| <= SINGULAR_TOL * ||M||_F^n`.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows * cols > 0, "matrix must have at least one entry");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from a row-major slice.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match dimensions");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Column vector from a slice.
    pub fn col_from_slice(v: &[f64]) -> Self {
        Self::from_row_slice(v.len(), 1, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    /// Submatrix with row `i` and column `j` removed.
    fn minor(&self, i: usize, j: usize) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n - 1, n - 1);
        let mut r = 0;
        for ii in 0..n {
            if ii == i {
                continue;
            }
            let mut c = 0;
            for jj in 0..n {
                if jj == j {
                    continue;
                }
                out[(r, c)] = self[(ii, jj)];
                c += 1;
            }
            r += 1;
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting
// ---------------------------------------------------------------------------

/// Compact LU factorization `PA = LU` of a square matrix.
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    /// Smallest pivot magnitude relative to the largest.
    pub min_pivot_rel: f64,
}

impl Lu {
    pub fn factor(m: &Matrix) -> Lu {
        assert!(m.is_square());
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut max = lu[(k, k)].abs();
            for i in k + 1..n {
                let a = lu[(i, k)].abs();
                if a > max {
                    max = a;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[(k, k)];
            if piv == 0.0 {
                continue; // column already eliminated; matrix is singular
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        let mut max_piv = 0.0f64;
        let mut min_piv = f64::INFINITY;
        for k in 0..n {
            let a = lu[(k, k)].abs();
            max_piv = max_piv.max(a);
            min_piv = min_piv.min(a);
        }
        let min_pivot_rel = if max_piv > 0.0 {
            min_piv / max_piv
        } else {
            0.0
        };
        Lu {
            lu,
            perm,
            sign,
            min_pivot_rel,
        }
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.rows;
        let mut d = self.sign;
        for k in 0..n {
            d *= self.lu[(k, k)];
        }
        d
    }

    /// Solve `A x = b`. Returns `None` when a pivot is exactly zero.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            let piv = self.lu[(i, i)];
            if piv == 0.0 {
                return None;
            }
            x[i] /= piv;
        }
        Some(x)
    }
}

// ---------------------------------------------------------------------------
// Determinant, adjugate, inverse
// ---------------------------------------------------------------------------

fn det_cofactor(m: &Matrix) -> f64 {
    let n = m.rows;
    match n {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => {
            let mut d = 0.0;
            for j in 0..n {
                let a = m[(0, j)];
                if a == 0.0 {
                    continue;
                }
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                d += s * a * det_cofactor(&m.minor(0, j));
            }
            d
        }
    }
}

/// Determinant. Cofactor expansion for n <= 4, LU with partial pivoting above.
pub fn det(m: &Matrix) -> f64 {
    assert!(m.is_square(), "det of non-square matrix");
    if m.rows <= 4 {
        det_cofactor(m)
    } else {
        Lu::factor(m).det()
    }
}

fn adjugate_cofactor(m: &Matrix) -> Matrix {
    let n = m.rows;
    if n == 1 {
        return Matrix::from_row_slice(1, 1, &[1.0]);
    }
    let mut adj = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // cofactor C_ij lands transposed in the adjugate
            adj[(j, i)] = s * det_cofactor(&m.minor(i, j));
        }
    }
    adj
}

/// Adjugate (classical adjoint): `adj(M) * M = det(M) * I` for every square
/// matrix, including singular ones. Cofactor expansion for n <= 4; LU-based
/// `inverse * det` for larger matrices, falling back to cofactors when the
/// determinant passes through zero.
pub fn adjugate(m: &Matrix) -> Matrix {
    assert!(m.is_square(), "adjugate of non-square matrix");
    let n = m.rows;
    if n <= 4 {
        return adjugate_cofactor(m);
    }
    let lu = Lu::factor(m);
    let d = lu.det();
    let tol = singular_tol(m);
    if d.abs() <= tol {
        return adjugate_cofactor(m);
    }
    let mut adj = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = d;
        if let Some(col) = lu.solve(&e) {
            adj.set_col(j, &col);
        } else {
            return adjugate_cofactor(m);
        }
        e[j] = 0.0;
    }
    adj
}

/// `adj(M) * v` without forming the full adjugate. Uses the LU path
/// `det(M) * M^{-1} v` when well conditioned, cofactors otherwise.
pub fn adjugate_mul_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    let lu = Lu::factor(m);
    let d = lu.det();
    if d.abs() > singular_tol(m) && lu.min_pivot_rel > 1e-10 {
        if let Some(mut x) = lu.solve(v) {
            for xi in x.iter_mut() {
                *xi *= d;
            }
            return x;
        }
    }
    adjugate_cofactor(m).mul_vec(v)
}

fn singular_tol(m: &Matrix) -> f64 {
    SINGULAR_TOL * m.norm_fro().powi(m.rows as i32)
}

/// Matrix inverse, failing when `|det| <= 1e-12 * ||M||_F^n`.
pub fn inverse(m: &Matrix) -> Result<Matrix, Error> {
    assert!(m.is_square(), "inverse of non-square matrix");
    let n = m.rows;
    let d = det(m);
    let tol = singular_tol(m);
    if d.abs() <= tol {
        return Err(Error::SingularMatrix { det: d, tol });
    }
    let lu = Lu::factor(m);
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lu.solve(&e).ok_or(Error::SingularMatrix { det: d, tol })?;
        inv.set_col(j, &col);
        e[j] = 0.0;
    }
    Ok(inv)
}

/// Solve the dense linear system `A x = b`.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, Error> {
    let d = det(a);
    let tol = singular_tol(a);
    if d.abs() <= tol {
        return Err(Error::SingularMatrix { det: d, tol });
    }
    Lu::factor(a)
        .solve(b)
        .ok_or(Error::SingularMatrix { det: d, tol })
}

// ---------------------------------------------------------------------------
// Sylvester equation
// ---------------------------------------------------------------------------

/// Solve `M A - G M = Q` for `M` by vectorizing into an `n^2 x n^2` linear
/// system. Requires the spectra of `A` and `G` to be disjoint; a near-singular
/// vectorized system is reported as spectra overlap.
pub fn solve_sylvester(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<Matrix, Error> {
    let n = a.rows();
    assert!(a.is_square() && g.is_square() && q.rows() == n && q.cols() == n);
    assert_eq!(g.rows(), n);
    let n2 = n * n;
    // unknown m[(i,k)] at flat index i*n + k
    let mut big = Matrix::zeros(n2, n2);
    let mut rhs = vec![0.0; n2];
    for i in 0..n {
        for j in 0..n {
            let e = i * n + j;
            rhs[e] = q[(i, j)];
            for k in 0..n {
                big[(e, i * n + k)] += a[(k, j)];
                big[(e, k * n + j)] -= g[(i, k)];
            }
        }
    }
    let lu = Lu::factor(&big);
    let d = lu.det();
    if d.abs() <= singular_tol(&big) || lu.min_pivot_rel < 1e-13 {
        return Err(Error::SpectraOverlap {
            pivot: lu.min_pivot_rel,
        });
    }
    let sol = lu.solve(&rhs).ok_or(Error::SpectraOverlap { pivot: 0.0 })?;
    let m = Matrix::from_row_slice(n, n, &sol);
    let residual = m.mul(a).sub(&g.mul(&m)).sub(q).norm_fro();
    let bound = 1e-10 * q.norm_fro().max(1e-300);
    if residual > bound {
        return Err(Error::SpectraOverlap {
            pivot: lu.min_pivot_rel,
        });
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalue bound
// ---------------------------------------------------------------------------

/// Smallest eigenvalue of a symmetric matrix via cyclic Jacobi rotations.
/// Inputs with relative skew above 1e-9 are rejected.
pub fn min_eig_sym(m: &Matrix) -> Result<f64, Error> {
    assert!(m.is_square());
    let n = m.rows();
    let norm = m.norm_fro();
    let skew = m.sub(&m.transpose()).norm_fro();
    if skew > 1e-9 * norm {
        return Err(Error::NotSymmetric { skew: skew / norm });
    }
    if norm == 0.0 {
        return Ok(0.0);
    }
    // Work on the symmetrized copy to kill round-off skew.
    let mut a = m.add(&m.transpose()).scale(0.5);
    let tol = 1e-15 * norm;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut min = f64::INFINITY;
    for i in 0..n {
        min = min.min(a[(i, i)]);
    }
    Ok(min)
}

// ---------------------------------------------------------------------------
// Characteristic polynomial and Hurwitz test
// ---------------------------------------------------------------------------

/// Coefficients `[1, c1, ..., cn]` of `det(sI - A)` via the Faddeev-LeVerrier
/// recursion.
pub fn char_poly(a: &Matrix) -> Vec<f64> {
    assert!(a.is_square());
    let n = a.rows();
    let mut coeffs = vec![1.0];
    let mut b = Matrix::identity(n);
    for k in 1..=n {
        let m = a.mul(&b);
        let tr: f64 = (0..n).map(|i| m[(i, i)]).sum();
        let c = -tr / k as f64;
        coeffs.push(c);
        b = m;
        for i in 0..n {
            b[(i, i)] += c;
        }
    }
    coeffs
}

/// Routh-Hurwitz stability test on `det(sI - A)`. All roots must have
/// strictly negative real part.
pub fn is_hurwitz(a: &Matrix) -> bool {
    let coeffs = char_poly(a);
    if coeffs.iter().any(|c| *c <= 0.0) {
        return false;
    }
    // Routh array; any zero or negative first-column element fails.
    let n = coeffs.len();
    let width = n.div_ceil(2);
    let mut prev: Vec<f64> = (0..width)
        .map(|i| coeffs.get(2 * i).copied().unwrap_or(0.0))
        .collect();
    let mut curr: Vec<f64> = (0..width)
        .map(|i| coeffs.get(2 * i + 1).copied().unwrap_or(0.0))
        .collect();
    for _ in 2..n {
        if curr[0] == 0.0 {
            return false;
        }
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (curr[0] * prev[j + 1] - prev[0] * curr[j + 1]) / curr[0];
        }
        if next.iter().all(|x| *x == 0.0) {
            return false; // row of zeros: roots on the imaginary axis
        }
        prev = curr;
        curr = next;
    }
    prev.first().map(|x| *x > 0.0).unwrap_or(false)
        && curr.first().map(|x| *x > 0.0).unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Runge-Kutta integration
// ---------------------------------------------------------------------------

/// Right-hand side: writes `x'` into the output slice given `(t, x)`.
pub type OdeRhs<'a> = &'a dyn Fn(f64, &[f64], &mut [f64]);

/// A deterministic first-order ODE system `x' = f(t, x)`.
pub struct OdeSystem<'a> {
    pub dim: usize,
    pub rhs: OdeRhs<'a>,
}

/// Scratch buffers for in-place RK4 stepping.
pub struct Rk4Buffers {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Buffers {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One classical fourth-order Runge-Kutta step, in place, without divergence
/// checks. The hot simulation loop owns its own checks.
pub fn rk4_step_in_place(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t: f64,
    x: &mut [f64],
    h: f64,
    buf: &mut Rk4Buffers,
) {
    let n = x.len();
    rhs(t, x, &mut buf.k1);
    for i in 0..n {
        buf.tmp[i] = x[i] + 0.5 * h * buf.k1[i];
    }
    rhs(t + 0.5 * h, &buf.tmp, &mut buf.k2);
    for i in 0..n {
        buf.tmp[i] = x[i] + 0.5 * h * buf.k2[i];
    }
    rhs(t + 0.5 * h, &buf.tmp, &mut buf.k3);
    for i in 0..n {
        buf.tmp[i] = x[i] + h * buf.k3[i];
    }
    rhs(t + h, &buf.tmp, &mut buf.k4);
    for i in 0..n {
        x[i] += h / 6.0 * (buf.k1[i] + 2.0 * buf.k2[i] + 2.0 * buf.k3[i] + buf.k4[i]);
    }
}

/// One classical RK4 step with divergence detection. A non-finite value in
/// any stage or in the result is reported with the offending component.
pub fn rk4_step(sys: &OdeSystem, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>, Error> {
    assert!(h > 0.0, "step size must be positive");
    let mut buf = Rk4Buffers::new(sys.dim);
    let mut out = x.to_vec();
    let mut f = |t: f64, x: &[f64], dx: &mut [f64]| (sys.rhs)(t, x, dx);
    rk4_step_in_place(&mut f, t, &mut out, h, &mut buf);
    for stage in [&buf.k1, &buf.k2, &buf.k3, &buf.k4, &out] {
        if let Some(i) = stage.iter().position(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged {
                component: format!("state[{i}]"),
                t,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn rk4_zero_field_is_fixed_point() {
        let sys = OdeSystem {
            dim: 2,
            rhs: &|_t, _x, dx: &mut [f64]| dx.fill(0.0),
        };
        let out = rk4_step(&sys, 0.0, &[3.0, -1.0], 0.01).unwrap();
        assert_eq!(out, vec![3.0, -1.0]);
    }

    #[test]
    fn rk4_scalar_exponential() {
        // x' = x, x(0) = 1, h = 0.1: closed form e^0.1
        let sys = OdeSystem {
            dim: 1,
            rhs: &|_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0],
        };
        let out = rk4_step(&sys, 0.0, &[1.0], 0.1).unwrap();
        assert_close(out[0], 1.105_170_918, 1e-7);
    }

    #[test]
    fn rk4_harmonic_oscillator_closed_form() {
        // x' = A x with A = [[0,1],[-10,0]]: x(t) = (cos(w t), -w sin(w t)), w = sqrt(10)
        let sys = OdeSystem {
            dim: 2,
            rhs: &|_t, x: &[f64], dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = -10.0 * x[0];
            },
        };
        let h = 1e-4;
        let mut x = vec![1.0, 0.0];
        let mut t = 0.0;
        for _ in 0..10_000 {
            x = rk4_step(&sys, t, &x, h).unwrap();
            t += h;
        }
        let w = 10.0f64.sqrt();
        assert_close(x[0], w.cos(), 1e-6);
        assert_close(x[1], -w * w.sin(), 1e-6);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // halving h shrinks the one-step-sequence error on x' = x by >= 15x
        let sys = OdeSystem {
            dim: 1,
            rhs: &|_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0],
        };
        let err_at = |h: f64| -> f64 {
            let steps = (1.0 / h).round() as usize;
            let mut x = vec![1.0];
            let mut t = 0.0;
            for _ in 0..steps {
                x = rk4_step(&sys, t, &x, h).unwrap();
                t += h;
            }
            (x[0] - 1.0f64.exp()).abs()
        };
        let e1 = err_at(0.02);
        let e2 = err_at(0.01);
        assert!(e1 / e2 >= 15.0, "order check failed: ratio {}", e1 / e2);
    }

    #[test]
    fn rk4_divergence_names_component() {
        let sys = OdeSystem {
            dim: 2,
            rhs: &|_t, x: &[f64], dx: &mut [f64]| {
                dx[0] = 0.0;
                dx[1] = x[1] * f64::MAX; // overflows on the first stage
            },
        };
        let err = rk4_step(&sys, 0.0, &[0.0, 1.0], 1.0).unwrap_err();
        match err {
            Error::IntegrationDiverged { component, .. } => assert_eq!(component, "state[1]"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn det_and_adjugate_identity_matrix() {
        let i3 = Matrix::identity(3);
        assert_eq!(det(&i3), 1.0);
        assert_eq!(adjugate(&i3), i3);
    }

    #[test]
    fn inverse_of_benchmark_observability_matrix() {
        // this is O^{-1} at theta = (1, 1, -1); inverse derived by direct solve
        let m = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
        assert_close(det(&m), 1.0, 1e-14);
        let inv = inverse(&m).unwrap();
        let expect = Matrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(inv.sub(&expect).max_abs() < 1e-13);
    }

    #[test]
    fn laplace_identity_on_random_4x4() {
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..50 {
            let data: Vec<f64> = (0..16).map(|_| next()).collect();
            let m = Matrix::from_row_slice(4, 4, &data);
            let lhs = adjugate(&m).mul(&m);
            let d = det(&m);
            let rhs = Matrix::identity(4).scale(d);
            let bound = 1e-10 * m.norm_fro().powi(4);
            assert!(lhs.sub(&rhs).norm_fro() <= bound);
        }
    }

    #[test]
    fn adjugate_of_singular_matrix_still_satisfies_identity() {
        // rank-1 matrix: det = 0, adj(M) M must be exactly the zero matrix scale
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0]);
        let lhs = adjugate(&m).mul(&m);
        assert!(lhs.norm_fro() <= 1e-10 * m.norm_fro().powi(3));
        // 6x6 singular exercises the cofactor fallback path
        let mut big = Matrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                big[(i, j)] = ((i + 1) * (j + 2)) as f64;
            }
        }
        let lhs = adjugate(&big).mul(&big);
        let d = det(&big);
        let rhs = Matrix::identity(6).scale(d);
        assert!(lhs.sub(&rhs).norm_fro() <= 1e-10 * big.norm_fro().powi(6));
    }

    #[test]
    fn adjugate_mul_vec_matches_full_adjugate() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, -1.0, 3.0, 2.0, 0.0, 1.0, 4.0]);
        let v = [1.0, -2.0, 0.5];
        let fast = adjugate_mul_vec(&m, &v);
        let slow = adjugate(&m).mul_vec(&v);
        for (a, b) in fast.iter().zip(&slow) {
            assert_close(*a, *b, 1e-12);
        }
    }

    #[test]
    fn inverse_rejects_singular() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(inverse(&m), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn sylvester_zero_rhs_gives_zero() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let g = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        let q = Matrix::zeros(2, 2);
        let m = solve_sylvester(&a, &g, &q).unwrap();
        assert!(m.norm_fro() == 0.0);
    }

    #[test]
    fn sylvester_benchmark_solution() {
        // M A - G M = l hbar^T with the exosystem/filter data; solved by hand
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]);
        let g = Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]);
        let q = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 2.0]);
        let m = solve_sylvester(&a, &g, &q).unwrap();
        let expect = Matrix::from_row_slice(2, 2, &[5.0 / 7.0, 3.0 / 28.0, 25.0 / 14.0, 1.0 / 7.0]);
        assert!(m.sub(&expect).max_abs() < 1e-12);
        let residual = m.mul(&a).sub(&g.mul(&m)).sub(&q).norm_fro();
        assert!(residual <= 1e-12);
    }

    #[test]
    fn sylvester_detects_spectra_overlap() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let q = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            solve_sylvester(&a, &a, &q),
            Err(Error::SpectraOverlap { .. })
        ));
    }

    #[test]
    fn min_eig_examples() {
        assert_eq!(min_eig_sym(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        assert_close(min_eig_sym(&Matrix::identity(6)).unwrap(), 1.0, 1e-12);
        // rank-1 Gram matrix v v^T has min eigenvalue 0
        let v = [1.0, 2.0, 3.0];
        let mut m = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = v[i] * v[j];
            }
        }
        assert_close(min_eig_sym(&m).unwrap(), 0.0, 1e-10);
    }

    #[test]
    fn min_eig_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_close(min_eig_sym(&m).unwrap(), 1.0, 1e-10);
    }

    #[test]
    fn min_eig_rejects_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(min_eig_sym(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn hurwitz_test() {
        // (s+1)^3 companion in observer form
        let a = Matrix::from_row_slice(3, 3, &[-3.0, 1.0, 0.0, -3.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
        assert!(is_hurwitz(&a));
        let g = Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]);
        assert!(is_hurwitz(&g));
        // pure oscillator is not Hurwitz
        let osc = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]);
        assert!(!is_hurwitz(&osc));
        // closed-form unstable matrix
        let unst = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(!is_hurwitz(&unst));
    }

    #[test]
    fn char_poly_of_companion() {
        let a = Matrix::from_row_slice(3, 3, &[-3.0, 1.0, 0.0, -3.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
        let c = char_poly(&a);
        let expect = [1.0, 3.0, 3.0, 1.0];
        for (a, b) in c.iter().zip(&expect) {
            assert_close(*a, *b, 1e-12);
        }
    }
}
