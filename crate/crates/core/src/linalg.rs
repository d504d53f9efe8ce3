//! Dense complex matrices and the spectral routines the rest of the crate
//! is built on.
//!
//! Storage is row-major. Operators on `M_n` are vectorized by stacking
//! columns, so entry `(i, j)` of an `n x n` matrix lands at index `j * n + i`
//! and the map `X -> A X B` is represented by `B^T ⊗ A`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default tolerances. Every routine that needs one also takes it as an
/// argument, these are only the values used when the caller has no opinion.
pub mod tol {
    pub const HERM: f64 = 1e-10;
    pub const TRACE: f64 = 1e-10;
    pub const PSD: f64 = 1e-9;
    pub const EIG: f64 = 1e-10;
    pub const EXP: f64 = 1e-12;
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Builds a matrix from a real part and an imaginary part given as nested rows.
    pub fn from_re_im(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        if re.len() != im.len() || re.iter().zip(im).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Dimension("real and imaginary parts differ in shape".into()));
        }
        let rows: Vec<Vec<C64>> = re
            .iter()
            .zip(im)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_real(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
    }

    /// `|v><w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    /// Elementary matrix `e_ij` in `M_n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = ONE;
        m
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn re_im(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let re = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].re).collect())
            .collect();
        let im = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].im).collect())
            .collect();
        (re, im)
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise deviation from `A = A^†`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "elementwise shape mismatch"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

fn require_square(a: &ComplexMatrix, what: &str) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    Ok(a.rows)
}

/// Kronecker product; block `(i, j)` of the result is `a_ij * b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// `[a, b] = ab - ba`
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

/// `{a, b} = ab + ba`
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) + &(b * a)
}

fn check_bipartite(x: &ComplexMatrix, n: usize, m: usize) -> Result<()> {
    if !x.is_square() || x.rows != n * m {
        return Err(Error::Dimension(format!(
            "partial trace over {n}x{m} factors needs a {0}x{0} matrix, got {1}x{2}",
            n * m,
            x.rows,
            x.cols
        )));
    }
    Ok(())
}

/// Traces out the first (n-dimensional) factor of an operator on `C^n ⊗ C^m`.
pub fn partial_trace_first(x: &ComplexMatrix, n: usize, m: usize) -> Result<ComplexMatrix> {
    check_bipartite(x, n, m)?;
    Ok(ComplexMatrix::from_fn(m, m, |a, b| {
        (0..n).map(|i| x[(i * m + a, i * m + b)]).sum()
    }))
}

/// Traces out the second (m-dimensional) factor of an operator on `C^n ⊗ C^m`.
pub fn partial_trace_second(x: &ComplexMatrix, n: usize, m: usize) -> Result<ComplexMatrix> {
    check_bipartite(x, n, m)?;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..m).map(|a| x[(i * m + a, j * m + a)]).sum()
    }))
}

/// Column-stacking vectorization.
pub fn vectorize(a: &ComplexMatrix) -> Vec<C64> {
    let mut v = Vec::with_capacity(a.rows * a.cols);
    for j in 0..a.cols {
        for i in 0..a.rows {
            v.push(a[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vectorize`] for square matrices.
pub fn devectorize(v: &[C64]) -> Result<ComplexMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n * n != v.len() {
        return Err(Error::Dimension(format!(
            "vector of length {} is not a vectorized square matrix",
            v.len()
        )));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| v[j * n + i]))
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
///
/// Cyclic complex Jacobi. Each rotation first removes the phase of the pivot
/// and then applies a real plane rotation, so the sequence of operations (and
/// the result) is a fixed function of the input.
pub fn hermitian_eigs(a: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    let n = require_square(a, "hermitian_eigs")?;
    let defect = a.hermitian_defect();
    if defect > tol {
        return Err(Error::NotHermitian(defect));
    }
    Ok(jacobi(a.hermitian_part(), n))
}

fn jacobi(mut a: ComplexMatrix, n: usize) -> HermitianEigen {
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 || mag <= 1e-18 * scale {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_eigenvalue(a: &ComplexMatrix) -> f64 {
    jacobi(a.hermitian_part(), a.rows).min()
}

/// Singular values (descending) via the Hermitian dilation `[[0, A], [A^†, 0]]`,
/// whose spectrum is `±σ_k`. Avoids the square roots of `A A^†`, which lose
/// half the digits for small singular values.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let (r, c) = (a.rows, a.cols);
    let n = r + c;
    let dil = ComplexMatrix::from_fn(n, n, |i, j| {
        if i < r && j >= r {
            a[(i, j - r)]
        } else if i >= r && j < r {
            a[(j, i - r)].conj()
        } else {
            ZERO
        }
    });
    let eig = jacobi(dil, n);
    let mut sv: Vec<f64> = eig.values.iter().rev().take(r.min(c)).map(|&x| x.max(0.0)).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    let n = require_square(a, "trace_norm")?;
    let scale = a.max_abs();
    if a.hermitian_defect() <= 1e-13 * scale.max(1e-300) {
        return Ok(jacobi(a.hermitian_part(), n).values.iter().map(|x| x.abs()).sum());
    }
    Ok(singular_values(a).iter().sum())
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
pub fn matrix_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = require_square(a, "matrix_exp")?;
    let norm = a.norm_one();
    if !norm.is_finite() {
        return Err(Error::Dimension("matrix_exp of non-finite matrix".into()));
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a.scale_re(0.5f64.powi(squarings as i32));

    let mut sum = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=40 {
        term = (&term * &b).scale_re(1.0 / k as f64);
        sum = &sum + &term;
        if term.max_abs() <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// LU factorization with partial pivoting, returning the inverse.
pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = require_square(a, "inverse")?;
    let mut lu = a.clone();
    let mut inv = ComplexMatrix::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[(i, col)].norm().total_cmp(&lu[(j, col)].norm()))
            .unwrap_or(col);
        if lu[(pivot, col)].norm() == 0.0 {
            return Err(Error::SingularMap {
                condition_number: f64::INFINITY,
            });
        }
        if pivot != col {
            for k in 0..n {
                lu.data.swap(pivot * n + k, col * n + k);
                inv.data.swap(pivot * n + k, col * n + k);
            }
        }
        let d = lu[(col, col)];
        for k in 0..n {
            lu[(col, k)] /= d;
            inv[(col, k)] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = lu[(row, col)];
            if f == ZERO {
                continue;
            }
            for k in 0..n {
                let l = lu[(col, k)];
                let r = inv[(col, k)];
                lu[(row, k)] -= f * l;
                inv[(row, k)] -= f * r;
            }
        }
    }
    Ok(inv)
}

/// 1-norm condition number together with the inverse.
pub fn inverse_with_condition(a: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let inv = inverse(a)?;
    let cond = a.norm_one() * inv.norm_one();
    Ok((inv, cond))
}

/// Is `u` unitary within `tol` (max-norm of `U^† U - I`)?
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (&(&u.adjoint() * u) - &ComplexMatrix::identity(u.rows)).max_abs()
}

/// Pauli matrices and qubit ladder operators in the basis `{|1>, |2>}`.
pub mod pauli {
    use super::*;

    pub fn id() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -I,
            (1, 0) => I,
            _ => ZERO,
        })
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    /// `σ_+ = |2><1|`
    pub fn plus() -> ComplexMatrix {
        ComplexMatrix::unit(2, 1, 0)
    }

    /// `σ_- = |1><2|`
    pub fn minus() -> ComplexMatrix {
        ComplexMatrix::unit(2, 0, 1)
    }

    /// `[σ_0, σ_1, σ_2, σ_3]`
    pub fn all() -> [ComplexMatrix; 4] {
        [id(), x(), y(), z()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_tensor_identity() {
        let out = tensor(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2));
        assert_eq!(out, ComplexMatrix::identity(4));
    }

    #[test]
    fn elementary_tensor_lands_in_first_block() {
        // e_11 ⊗ e_22 (1-indexed) has its single one at (1, 1).
        let out = tensor(&ComplexMatrix::unit(2, 0, 0), &ComplexMatrix::unit(2, 1, 1));
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 1) { ONE } else { ZERO };
                assert_eq!(out[(i, j)], expect);
            }
        }
    }

    #[test]
    fn sigma_z_tensor_sigma_z() {
        let out = tensor(&pauli::z(), &pauli::z());
        assert_eq!(out, ComplexMatrix::diag(&[c(1.0), c(-1.0), c(-1.0), c(1.0)]));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let rho = ComplexMatrix::from_real(&[&[0.7, 0.1], &[0.1, 0.3]]);
        let sigma = ComplexMatrix::from_real(&[&[0.25, 0.0, 0.1], &[0.0, 0.5, 0.0], &[0.1, 0.0, 0.25]]);
        let x = tensor(&rho, &sigma);
        let first = partial_trace_first(&x, 2, 3).unwrap();
        assert!((&first - &sigma).max_abs() < 1e-15);
        let second = partial_trace_second(&x, 2, 3).unwrap();
        assert!((&second - &rho).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_projector_is_maximally_mixed() {
        let mut p = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            p[(i, j)] = c(0.5);
        }
        let red = partial_trace_first(&p, 2, 2).unwrap();
        assert!((&red - &ComplexMatrix::identity(2).scale_re(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_identity() {
        let red = partial_trace_first(&ComplexMatrix::identity(4), 2, 2).unwrap();
        assert_eq!(red, ComplexMatrix::identity(2).scale_re(2.0));
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let x = ComplexMatrix::identity(5);
        assert!(matches!(partial_trace_first(&x, 2, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn trace_norm_of_reflection() {
        let a = ComplexMatrix::diag(&[c(1.0), c(-1.0)]);
        assert_abs_diff_eq!(trace_norm(&a).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn trace_norm_matches_characteristic_polynomial() {
        // A = σ_x/2 + i σ_y/3. For a 2x2 matrix the eigenvalues of A A^† are
        // the roots of λ² - tr(AA^†) λ + det(AA^†).
        let a = &pauli::x().scale_re(0.5) + &pauli::y().scale(I / 3.0);
        let aa = &a * &a.adjoint();
        let tr = aa.trace().re;
        let det = (aa[(0, 0)] * aa[(1, 1)] - aa[(0, 1)] * aa[(1, 0)]).re;
        let disc = (tr * tr - 4.0 * det).sqrt();
        let expect = ((tr + disc) / 2.0).sqrt() + ((tr - disc) / 2.0).max(0.0).sqrt();
        // Singular values are 1/2 + 1/3 and 1/2 - 1/3.
        assert_abs_diff_eq!(expect, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_norm(&a).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn trace_norm_rejects_non_square() {
        assert!(trace_norm(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        assert_eq!(matrix_exp(&ComplexMatrix::zeros(3, 3)).unwrap(), ComplexMatrix::identity(3));
        let d = ComplexMatrix::diag(&[c(0.3), c(-2.0), C64::new(0.0, 1.5)]);
        let e = matrix_exp(&d).unwrap();
        let expect = ComplexMatrix::diag(&[c(0.3f64.exp()), c((-2.0f64).exp()), C64::new(0.0, 1.5).exp()]);
        assert!((&e - &expect).max_abs() < 1e-14);
    }

    #[test]
    fn exp_of_skew_generator_is_rotation() {
        for theta in [0.1, 1.0, 2.5, 7.0] {
            let a = ComplexMatrix::from_real(&[&[0.0, -theta], &[theta, 0.0]]);
            let e = matrix_exp(&a).unwrap();
            let (s, co) = theta.sin_cos();
            let expect = ComplexMatrix::from_real(&[&[co, -s], &[s, co]]);
            assert!((&e - &expect).max_abs() < 1e-13, "theta = {theta}");
        }
    }

    #[test]
    fn exp_inverse_pair() {
        let a = ComplexMatrix::from_fn(4, 4, |i, j| C64::new((i as f64 - j as f64) * 0.7, (i * j) as f64 * 0.2));
        let prod = &matrix_exp(&a).unwrap() * &matrix_exp(&-&a).unwrap();
        assert!((&prod - &ComplexMatrix::identity(4)).max_abs() < tol::EXP);
    }

    #[test]
    fn column_stacking_convention() {
        // e_12 (1-indexed) is entry (0, 1), which sits at index 2 of vec.
        let v = vectorize(&ComplexMatrix::unit(2, 0, 1));
        assert_eq!(v.iter().position(|&z| z == ONE), Some(2));
    }

    #[test]
    fn sandwich_superoperator_is_bt_kron_a() {
        // X -> σ_x X σ_x has matrix σ_x^T ⊗ σ_x and sends σ_z to -σ_z.
        let x = pauli::x();
        let s = tensor(&x.transpose(), &x);
        let out = devectorize(&s.matvec(&vectorize(&pauli::z()))).unwrap();
        assert_eq!(out, -&pauli::z());
    }

    #[test]
    fn devectorize_rejects_non_square_length() {
        assert!(matches!(devectorize(&[ONE; 5]), Err(Error::Dimension(_))));
    }

    #[test]
    fn pauli_spectra() {
        let ez = hermitian_eigs(&pauli::z(), tol::HERM).unwrap();
        assert_eq!(ez.values, vec![-1.0, 1.0]);
        let ex = hermitian_eigs(&pauli::x(), tol::HERM).unwrap();
        assert_abs_diff_eq!(ex.values[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ex.values[1], 1.0, epsilon = 1e-15);
        let v = ex.vector(0);
        // (1, -1)/√2 up to phase
        assert_abs_diff_eq!((v[0] + v[1]).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0].norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn swap_choi_spectrum() {
        // ½ Σ e_ij ⊗ e_ji
        let mut m = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            m[(i, j)] = c(0.5);
        }
        let e = hermitian_eigs(&m, tol::HERM).unwrap();
        let expect = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in e.values.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigs_reject_non_hermitian() {
        let a = ComplexMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eigs(&a, tol::HERM), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eigs_complex_hermitian_reconstruct() {
        let a = ComplexMatrix::from_fn(5, 5, |i, j| {
            let z = C64::new((i + 2 * j) as f64 * 0.31 - 1.0, (i as f64 - j as f64) * 0.17);
            if i == j { c(z.re) } else if i < j { z } else { C64::new((j + 2 * i) as f64 * 0.31 - 1.0, (j as f64 - i as f64) * 0.17).conj() }
        });
        assert!(a.is_hermitian(1e-15));
        let e = hermitian_eigs(&a, tol::HERM).unwrap();
        for k in 0..5 {
            let v = e.vector(k);
            let av = a.matvec(&v);
            for (x, y) in av.iter().zip(&v) {
                assert!((x - y * e.values[k]).norm() < tol::EIG);
            }
        }
        let vv = &e.vectors.adjoint() * &e.vectors;
        assert!((&vv - &ComplexMatrix::identity(5)).max_abs() < 1e-13);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigs_are_deterministic() {
        let a = &pauli::x() + &pauli::y().scale_re(0.3);
        let e1 = hermitian_eigs(&a, tol::HERM).unwrap();
        let e2 = hermitian_eigs(&a, tol::HERM).unwrap();
        assert_eq!(e1.values, e2.values);
        assert_eq!(e1.vectors, e2.vectors);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = ComplexMatrix::from_fn(4, 4, |i, j| C64::new(1.0 / (1.0 + i as f64 + j as f64), (i as f64 - j as f64) * 0.1));
        let (inv, cond) = inverse_with_condition(&a).unwrap();
        assert!((&(&a * &inv) - &ComplexMatrix::identity(4)).max_abs() < 1e-9);
        assert!(cond > 1.0);
    }

    #[test]
    fn inverse_of_singular_fails() {
        let a = ComplexMatrix::from_real(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(inverse(&a), Err(Error::SingularMap { .. })));
    }

    #[test]
    fn singular_values_of_rectangular() {
        let a = ComplexMatrix::from_real(&[&[3.0, 0.0, 0.0], &[0.0, -2.0, 0.0]]);
        let sv = singular_values(&a);
        assert_abs_diff_eq!(sv[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sv[1], 2.0, epsilon = 1e-14);
    }
}
