//! Dense complex linear algebra: vectors, matrices, orthonormal subspaces.
//!
//! Everything here is deliberately small and explicit. Matrices are stored
//! row-major, subspaces always carry an orthonormal basis, and every rank
//! decision goes through a single tolerance.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default tolerance for rank and orthogonality decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A dense complex column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CVec(Vec<Complex64>);

impl CVec {
    pub fn zeros(n: usize) -> Self {
        CVec(vec![ZERO; n])
    }

    pub fn new(entries: Vec<Complex64>) -> Self {
        CVec(entries)
    }

    pub fn from_real(entries: &[f64]) -> Self {
        CVec(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Standard basis vector `e_i` of length `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    /// Inner product `<self, other>`, conjugate-linear in `self`.
    pub fn dot(&self, other: &CVec) -> Complex64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> CVec {
        CVec(self.0.iter().map(|z| z * s).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: Complex64, x: &CVec) {
        axpy(&mut self.0, a, &x.0);
    }

    pub fn sub(&self, other: &CVec) -> CVec {
        CVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &CVec) -> CVec {
        CVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs_diff(&self, other: &CVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn normalized(&self) -> Option<CVec> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<usize> for CVec {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl FromIterator<Complex64> for CVec {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        CVec(iter.into_iter().collect())
    }
}

/// A dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: rows.iter().map(Vec::len).find(|&l| l != cols).unwrap_or(0),
            });
        }
        Ok(Self::from_fn(rows.len(), cols, |i, j| {
            Complex64::new(rows[i][j], 0.0)
        }))
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, columns: &[CVec]) -> Self {
        let mut m = Self::zeros(n, columns.len());
        for (j, c) in columns.iter().enumerate() {
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
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

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVec {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                axpy(out_row, a, other.row(k));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &CVec) -> Result<CVec> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn add(&self, other: &CMat) -> Result<CMat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMat) -> Result<CMat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &CMat,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation; `f64::INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A subspace of `C^n` held by an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: Vec<CVec>,
    ambient: usize,
    tol: f64,
}

impl Subspace {
    pub fn empty(ambient: usize) -> Self {
        Subspace {
            basis: Vec::new(),
            ambient,
            tol: DEFAULT_TOL,
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            basis: (0..ambient).map(|i| CVec::unit(ambient, i)).collect(),
            ambient,
            tol: DEFAULT_TOL,
        }
    }

    pub fn basis(&self) -> &[CVec] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Basis vectors as the columns of an `ambient x dim` matrix.
    pub fn as_matrix(&self) -> CMat {
        CMat::from_columns(self.ambient, &self.basis)
    }

    /// Coefficients `<b_j, v>` of `v` in this basis.
    pub fn coefficients(&self, v: &CVec) -> Result<Vec<Complex64>> {
        self.check(v.len())?;
        Ok(self.basis.iter().map(|b| b.dot(v)).collect())
    }

    pub fn project(&self, v: &CVec) -> Result<CVec> {
        let coeffs = self.coefficients(v)?;
        let mut out = CVec::zeros(self.ambient);
        for (b, c) in self.basis.iter().zip(coeffs) {
            out.axpy(c, b);
        }
        Ok(out)
    }

    /// `||P v||^2`, the weight of `v` inside the subspace.
    pub fn weight(&self, v: &CVec) -> Result<f64> {
        Ok(self.coefficients(v)?.iter().map(|c| c.norm_sqr()).sum())
    }

    pub fn projector_matrix(&self) -> CMat {
        let mut p = CMat::zeros(self.ambient, self.ambient);
        for b in &self.basis {
            for i in 0..self.ambient {
                if b[i] == ZERO {
                    continue;
                }
                let bi = b[i];
                let row = p.row_mut(i);
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot += bi * b[j].conj();
                }
            }
        }
        p
    }

    pub fn contains(&self, v: &CVec, tol: f64) -> Result<bool> {
        let residual = v.sub(&self.project(v)?);
        Ok(residual.norm() <= tol * v.norm().max(1.0))
    }

    /// Maps a subspace of coefficient space `C^dim` into the ambient space.
    pub fn embed(&self, coefficients: &Subspace) -> Result<Subspace> {
        self.check_dim(coefficients.ambient)?;
        let vectors: Vec<CVec> = coefficients
            .basis
            .iter()
            .map(|c| self.combine(c.as_slice()))
            .collect();
        orthonormalize(&vectors, self.tol)
    }

    /// `sum_j c_j b_j`
    pub fn combine(&self, coefficients: &[Complex64]) -> CVec {
        let mut out = CVec::zeros(self.ambient);
        for (b, &c) in self.basis.iter().zip(coefficients) {
            out.axpy(c, b);
        }
        out
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                found: n,
            });
        }
        Ok(())
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Removes from `v` its components along the orthonormal `basis`, twice.
fn orthogonalize_against(v: &mut [Complex64], basis: &[CVec]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b.as_slice(), v);
            axpy(v, -c, b.as_slice());
        }
    }
}

/// Appends the normalized residual of `v` against an orthonormal `basis`
/// when it exceeds `tol * ||v||`. Returns whether `v` was added.
pub fn extend_orthonormal(basis: &mut Vec<CVec>, v: CVec, tol: f64) -> bool {
    let original = v.norm();
    if original == 0.0 {
        return false;
    }
    let mut w = v.into_inner();
    orthogonalize_against(&mut w, basis);
    let residual = norm(&w);
    if residual <= tol * original {
        return false;
    }
    let inv = Complex64::new(1.0 / residual, 0.0);
    basis.push(w.into_iter().map(|z| z * inv).collect());
    true
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Inputs are processed in order; a vector whose residual after projection
/// falls below `tol * ||v||` is dropped as linearly dependent.
pub fn orthonormalize(vectors: &[CVec], tol: f64) -> Result<Subspace> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let ambient = vectors.first().map_or(0, CVec::len);
    if let Some(bad) = vectors.iter().find(|v| v.len() != ambient) {
        return Err(Error::DimensionMismatch {
            expected: ambient,
            found: bad.len(),
        });
    }
    let mut basis: Vec<CVec> = Vec::new();
    for v in vectors {
        extend_orthonormal(&mut basis, v.clone(), tol);
    }
    Ok(Subspace {
        basis,
        ambient,
        tol,
    })
}

/// Orthonormal basis of the span of `rows`, chosen by largest residual
/// first (Gram-Schmidt with pivoting). Stops once every remaining residual
/// is at most `threshold`.
pub fn row_space(rows: &[Vec<Complex64>], n: usize, threshold: f64) -> Vec<CVec> {
    let mut work: Vec<Vec<Complex64>> = rows
        .iter()
        .filter(|r| norm(r) > threshold)
        .cloned()
        .collect();
    let mut basis: Vec<CVec> = Vec::new();
    while !work.is_empty() && basis.len() < n {
        let (pivot, best) = work
            .iter()
            .enumerate()
            .map(|(i, r)| (i, norm(r)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= threshold {
            break;
        }
        let mut q = work.swap_remove(pivot);
        // Restores orthogonality lost in the running updates.
        orthogonalize_against(&mut q, &basis);
        let qn = norm(&q);
        if qn <= threshold {
            continue;
        }
        let inv = Complex64::new(1.0 / qn, 0.0);
        q.iter_mut().for_each(|z| *z *= inv);
        for r in work.iter_mut() {
            let c = dot(&q, r);
            axpy(r, -c, &q);
        }
        work.retain(|r| norm(r) > threshold);
        basis.push(CVec(q));
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of an orthonormal set in
/// `C^n`, built from pivoted standard basis vectors.
pub fn orthogonal_complement(basis: &[CVec], n: usize) -> Vec<CVec> {
    let target = n.saturating_sub(basis.len());
    let mut residual: Vec<f64> = (0..n)
        .map(|i| 1.0 - basis.iter().map(|b| b[i].norm_sqr()).sum::<f64>())
        .collect();
    let mut all: Vec<CVec> = basis.to_vec();
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let (pivot, best) =
            residual
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc },
                );
        if best == f64::NEG_INFINITY {
            break;
        }
        let mut w = CVec::unit(n, pivot).into_inner();
        orthogonalize_against(&mut w, &all);
        let wn = norm(&w);
        residual[pivot] = f64::NEG_INFINITY;
        if wn < 1e-8 {
            continue;
        }
        let inv = Complex64::new(1.0 / wn, 0.0);
        let q = CVec(w.into_iter().map(|z| z * inv).collect());
        for (i, r) in residual.iter_mut().enumerate() {
            if r.is_finite() {
                *r -= q[i].norm_sqr();
            }
        }
        all.push(q.clone());
        out.push(q);
    }
    out
}

/// Null space of `m`: vectors with `||m x|| <= tol * ||m|| * ||x||`, where
/// `||m||` is the largest row norm.
pub fn kernel_basis(m: &CMat, tol: f64) -> Result<Subspace> {
    if !m.is_finite() {
        return Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    let scale = (0..m.rows()).map(|i| norm(m.row(i))).fold(0.0, f64::max);
    let rows: Vec<Vec<Complex64>> = (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| z.conj()).collect())
        .collect();
    Ok(kernel_of_conjugate_rows(&rows, m.cols(), tol * scale, tol))
}

/// Null space of the matrix whose rows are the conjugates of `conj_rows`,
/// with an absolute rank threshold.
pub fn kernel_of_conjugate_rows(
    conj_rows: &[Vec<Complex64>],
    n: usize,
    threshold: f64,
    tol: f64,
) -> Subspace {
    let row_basis = row_space(conj_rows, n, threshold);
    Subspace {
        basis: orthogonal_complement(&row_basis, n),
        ambient: n,
        tol,
    }
}

/// Upper bound on the largest principal angle between two subspaces
/// (radians). Unequal dimensions give `pi/2`.
pub fn max_principal_angle(a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.ambient != b.ambient {
        return Err(Error::DimensionMismatch {
            expected: a.ambient,
            found: b.ambient,
        });
    }
    if a.dim() != b.dim() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    let gap = |x: &Subspace, y: &Subspace| -> Result<f64> {
        let mut s = 0.0;
        for v in &x.basis {
            s += v.sub(&y.project(v)?).norm_sqr();
        }
        Ok(s.sqrt())
    };
    let sin = gap(a, b)?.max(gap(b, a)?);
    Ok(sin.min(1.0).asin())
}

/// Intersection of two subspaces of the same ambient space.
pub fn intersect(a: &Subspace, b: &Subspace, tol: f64) -> Result<Subspace> {
    if a.ambient != b.ambient {
        return Err(Error::DimensionMismatch {
            expected: a.ambient,
            found: b.ambient,
        });
    }
    // x = A c lies in B iff (I - P_B) A c = 0.
    let columns: Vec<CVec> = a
        .basis
        .iter()
        .map(|v| Ok(v.sub(&b.project(v)?)))
        .collect::<Result<_>>()?;
    let m = CMat::from_columns(a.ambient, &columns);
    let coefficients = if m.rows() == 0 {
        Subspace::full(a.dim())
    } else {
        let rows: Vec<Vec<Complex64>> = (0..m.rows())
            .map(|i| m.row(i).iter().map(|z| z.conj()).collect())
            .collect();
        kernel_of_conjugate_rows(&rows, a.dim(), tol, tol)
    };
    a.embed(&coefficients)
}
