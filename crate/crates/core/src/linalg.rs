//! Dense linear algebra for the small and moderate matrices used across the lab.
//!
//! Everything here is a pure function of its inputs. The eigensolver is a cyclic
//! Jacobi iteration, which certifies its own off-diagonal residual and is accurate
//! for the n <= 64 Gram and kernel matrices this crate produces.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for eigen and norm iterations.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix literal");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Diagonal matrix with the given entries.
    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `M x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Mᵀ y`.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), &mut out);
            }
        }
        out
    }

    /// `Mᵀ (M x)` in a single pass over the rows.
    pub fn gram_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let r = self.row(i);
            let t = dot(r, x);
            if t != 0.0 {
                axpy(t, r, &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "matmul shape mismatch: {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    axpy(a, other.row(k), out.row_mut(i));
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
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

    /// Largest `|M_ij - M_ji|`; `INFINITY` for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn require_symmetric(&self, what: &str) -> Result<()> {
        if !self.is_square() {
            return Err(Error::contract(format!(
                "{what}: matrix is {}x{}, expected square",
                self.rows, self.cols
            )));
        }
        if !self.is_finite() {
            return Err(Error::contract(format!("{what}: non-finite entries")));
        }
        let scale = self.max_abs();
        if self.asymmetry() > 1e-12 * scale {
            return Err(Error::contract(format!(
                "{what}: matrix is not symmetric (asymmetry {:.3e})",
                self.asymmetry()
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators keep the reduction order fixed and let the compiler vectorize
    let mut acc = [0.0_f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Full spectrum of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
    pub sweeps: usize,
    pub off_diagonal_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSpectrumReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub iterations: usize,
    pub off_diagonal_residual: f64,
}

fn off_diagonal_mass(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Sweeps until the off-diagonal Frobenius mass drops below `tol * ‖M‖_F`; the
/// sweep cap is `100 n²`.
pub fn symmetric_eigen(m: &Matrix, tol: f64) -> Result<SymmetricEigen> {
    m.require_symmetric("symmetric_eigen")?;
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize exactly so rotations see a truly symmetric input
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = frobenius_norm(&a);
    let max_sweeps = (100 * n * n).max(1);
    let mut sweeps = 0;
    let mut off = off_diagonal_mass(&a);

    while off > tol * scale {
        if sweeps >= max_sweeps {
            return Err(Error::NoConvergence {
                what: "cyclic Jacobi",
                iterations: sweeps,
                residual: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
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
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        off = off_diagonal_mass(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
        off_diagonal_residual: off,
    })
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(m: &Matrix, tol: f64) -> Result<SymmetricSpectrumReport> {
    if m.rows() == 0 {
        return Err(Error::contract("symmetric_min_eigenvalue: empty matrix"));
    }
    let eig = symmetric_eigen(m, tol)?;
    Ok(SymmetricSpectrumReport {
        min_eigenvalue: eig.values[0],
        max_eigenvalue: *eig.values.last().expect("non-empty"),
        iterations: eig.sweeps,
        off_diagonal_residual: eig.off_diagonal_residual,
    })
}

/// Shorthand for `symmetric_min_eigenvalue(m, DEFAULT_TOL).min_eigenvalue`.
pub fn lambda_min(m: &Matrix) -> Result<f64> {
    Ok(symmetric_min_eigenvalue(m, DEFAULT_TOL)?.min_eigenvalue)
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    norm2(m.as_slice())
}

/// Largest singular value by power iteration on `MᵀM`.
///
/// Starts from the normalized all-ones vector. If that start is annihilated by
/// `M` (orthogonal to the row space) a single deterministic perturbed start is
/// tried. Stops once the eigen-residual of `MᵀM` falls below `tol` relative.
pub fn operator_norm(m: &Matrix, tol: f64) -> f64 {
    let n = m.cols();
    if n == 0 || m.rows() == 0 || m.max_abs() == 0.0 {
        return 0.0;
    }
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    if let Some(s) = power_iterate(m, ones, tol) {
        return s;
    }
    // golden-ratio sequence gives a start with no special alignment
    let mut alt: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract() - 0.5)
        .collect();
    let nrm = norm2(&alt);
    alt.iter_mut().for_each(|v| *v /= nrm);
    power_iterate(m, alt, tol).unwrap_or(0.0)
}

const POWER_MAX_ITERS: usize = 200_000;

fn power_iterate(m: &Matrix, mut v: Vec<f64>, tol: f64) -> Option<f64> {
    let mut sigma2 = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.gram_matvec(&v);
        let lambda = dot(&v, &w);
        let wn = norm2(&w);
        if wn == 0.0 {
            return None;
        }
        // ‖MᵀMv − λv‖ relative to λ
        let mut r2 = 0.0;
        for (wi, vi) in w.iter().zip(&v) {
            let d = wi - lambda * vi;
            r2 += d * d;
        }
        sigma2 = lambda;
        v = w.iter().map(|x| x / wn).collect();
        if r2.sqrt() <= tol * lambda.abs() {
            break;
        }
    }
    Some(sigma2.max(0.0).sqrt())
}

/// Largest singular value by Lanczos on `MᵀM` with full reorthogonalization.
///
/// Intended for the wide square matrices of the trained network, where plain
/// power iteration stalls on the tiny gap at the top of the spectrum. Returns a
/// Ritz value, which never exceeds the true value in exact arithmetic.
pub fn operator_norm_lanczos(m: &Matrix, tol: f64, max_steps: usize) -> f64 {
    let n = m.cols();
    if n == 0 || m.rows() == 0 || m.max_abs() == 0.0 {
        return 0.0;
    }
    let steps_cap = max_steps.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps_cap);
    let mut q = vec![1.0 / (n as f64).sqrt(); n];
    if norm2(&m.matvec(&q)) == 0.0 {
        q = (0..n)
            .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract() - 0.5)
            .collect();
        let nrm = norm2(&q);
        q.iter_mut().for_each(|v| *v /= nrm);
    }
    let mut alphas = Vec::with_capacity(steps_cap);
    let mut betas: Vec<f64> = Vec::with_capacity(steps_cap);
    let mut estimate = 0.0_f64;
    for k in 0..steps_cap {
        let mut w = m.gram_matvec(&q);
        let alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        basis.push(q);
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let beta = norm2(&w);
        let theta = tridiagonal_max_eigenvalue(&alphas, &betas);
        let converged = k > 0 && (theta - estimate).abs() <= tol * theta.abs();
        estimate = theta;
        if converged || beta <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|x| x / beta).collect();
    }
    estimate.max(0.0).sqrt()
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off` (length `diag.len() - 1` or more; extra entries ignored),
/// by Sturm-sequence bisection.
pub fn tridiagonal_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    if n == 0 {
        return 0.0;
    }
    let offv = |i: usize| if i < off.len() { off[i] } else { 0.0 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { offv(i - 1).abs() } else { 0.0 } + if i + 1 < n { offv(i).abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    // number of eigenvalues strictly below x
    let count_below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { offv(i - 1).powi(2) } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Entrywise product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.zip_with(b, |x, y| x * y)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(b: &Matrix) -> Result<Matrix> {
    b.require_symmetric("cholesky")?;
    let n = b.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Determinant of a symmetric positive definite matrix via Cholesky.
pub fn spd_determinant(b: &Matrix) -> Result<f64> {
    let l = cholesky(b)?;
    Ok(l.diagonal().iter().map(|d| d * d).product())
}

/// `((n-1)/n)^((n-1)/2)`, with the value 1 at n = 1.
pub fn hadamard_bound_prefactor(n: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let nf = n as f64;
    ((nf - 1.0) / nf).powf((nf - 1.0) / 2.0)
}

/// Lower bound on `λ_min(A ⊙ B)` for PSD `A` and PD `B`:
/// `((n-1)/n)^((n-1)/2) · ∏ a_ii · det(B)`.
pub fn hadamard_min_eig_bound(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.require_symmetric("hadamard_min_eig_bound (A)")?;
    if a.shape() != b.shape() {
        return Err(Error::contract(format!(
            "hadamard_min_eig_bound: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    let det_b = spd_determinant(b)?;
    let diag_prod: f64 = a.diagonal().iter().product();
    Ok(hadamard_bound_prefactor(a.rows()) * diag_prod * det_b)
}

/// Hong–Pan lower bound for PSD `c`: `det(c) ((n-1)/‖c‖_F²)^((n-1)/2)`.
pub fn hong_pan_min_eig_bound(c: &Matrix) -> Result<f64> {
    c.require_symmetric("hong_pan_min_eig_bound")?;
    let n = c.rows();
    if n <= 1 {
        return Ok(c.as_slice().first().copied().unwrap_or(0.0));
    }
    let fro2 = frobenius_norm(c).powi(2);
    let det = spd_determinant(c)?;
    Ok(det * ((n as f64 - 1.0) / fro2).powf((n as f64 - 1.0) / 2.0))
}

/// Oppenheim plus Hong–Pan with the Frobenius normalization kept:
/// `∏ a_ii · det(B) · ((n-1)/‖A ⊙ B‖_F²)^((n-1)/2)`.
pub fn hadamard_min_eig_bound_normalized(a: &Matrix, b: &Matrix) -> Result<f64> {
    let unnormalized = hadamard_min_eig_bound(a, b)?;
    let n = a.rows();
    if n <= 1 {
        return Ok(unnormalized);
    }
    let fro2 = frobenius_norm(&hadamard(a, b)?).powi(2);
    let nf = n as f64;
    Ok(unnormalized / hadamard_bound_prefactor(n) * ((nf - 1.0) / fro2).powf((nf - 1.0) / 2.0))
}
