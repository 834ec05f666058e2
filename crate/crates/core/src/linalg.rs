//! Dense linear-algebra contracts used by the solvers, plus a banded
//! symmetric-positive-definite Cholesky and a block subspace iteration for
//! the large finite-difference eigenproblems.
//!
//! The dense kernels are thin wrappers over LAPACK (zgetrf/zgetrs, zheev,
//! dsygv) with the argument checks and error mapping the callers rely on.

use crate::error::{CoreError, Result};
use ndarray::prelude::*;
use ndarray::OwnedRepr;
use ndarray_linalg::error::LinalgError;
use ndarray_linalg::{Eigh, FactorizeInto, LUFactorized, Solve, UPLO};
use num_complex::Complex64;

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;
pub type RMat = Array2<f64>;
pub type RVec = Array1<f64>;

fn map_lapack(context: &str, err: LinalgError) -> CoreError {
    match err {
        LinalgError::Lapack(lax::error::Error::LapackComputationalFailure { .. }) => {
            CoreError::SingularMatrix(context.to_string())
        }
        other => CoreError::backend(context, other),
    }
}

/// Reusable LU factorization of a square complex matrix (partial pivoting).
pub struct CluFactor {
    inner: LUFactorized<OwnedRepr<Complex64>>,
    n: usize,
}

impl CluFactor {
    pub fn new(a: &CMat) -> Result<CluFactor> {
        let (n, m) = a.dim();
        if n != m {
            return Err(CoreError::invalid(format!(
                "LU factorization needs a square matrix, got {n}x{m}"
            )));
        }
        let inner = a
            .clone()
            .factorize_into()
            .map_err(|e| map_lapack("lu_factor", e))?;
        Ok(CluFactor { inner, n })
    }

    pub fn solve_vec(&self, b: &CVec) -> Result<CVec> {
        if b.len() != self.n {
            return Err(CoreError::invalid(format!(
                "right-hand side length {} does not match system size {}",
                b.len(),
                self.n
            )));
        }
        self.inner.solve(b).map_err(|e| map_lapack("lu_solve", e))
    }

    pub fn solve_mat(&self, b: &CMat) -> Result<CMat> {
        let mut x = CMat::zeros(b.dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            let xj = self.solve_vec(&col.to_owned())?;
            x.column_mut(j).assign(&xj);
        }
        Ok(x)
    }
}

/// Solve `A X = B` with partial pivoting.
pub fn lu_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return Err(CoreError::invalid(format!(
            "dimension mismatch: A is {}x{}, B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    CluFactor::new(a)?.solve_mat(b)
}

fn hermitian_deviation(a: &CMat) -> (f64, f64) {
    let mut dev = 0.0_f64;
    let mut norm = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            norm += a[[i, j]].norm_sqr();
            let d = a[[i, j]] - a[[j, i]].conj();
            dev += d.norm_sqr();
        }
    }
    (dev.sqrt(), norm.sqrt())
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// unitary eigenvector columns. The input is symmetrized internally but must
/// be Hermitian within `1e-10` relative deviation.
pub fn hermitian_eig(a: &CMat) -> Result<(RVec, CMat)> {
    if a.nrows() != a.ncols() {
        return Err(CoreError::invalid("hermitian_eig needs a square matrix"));
    }
    let (dev, norm) = hermitian_deviation(a);
    if dev > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(CoreError::NotHermitian {
            deviation: dev,
            norm,
        });
    }
    let sym = (a + &conj_transpose(a)).mapv(|z| 0.5 * z);
    let (vals, vecs) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| map_lapack("hermitian_eig", e))?;
    // the backend hands back the conjugate of the eigenvector matrix
    // (zheev's row-major output reinterpreted); undo it so that
    // A = V diag(vals) V^H holds
    Ok((vals, vecs.mapv(|z| z.conj())))
}

pub fn conj_transpose(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Spectral absolute value `|A| = V |Lambda| V*` of a Hermitian matrix.
pub fn operator_abs(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eig(a)?;
    let scaled = &vecs * &vals.mapv(f64::abs).mapv(|v| Complex64::new(v, 0.0));
    Ok(scaled.dot(&conj_transpose(&vecs)))
}

/// Smallest `count` eigenpairs of the generalized symmetric-definite problem
/// `A v = lambda B v` (dense, via dsygv). Eigenvectors are B-orthonormal.
pub fn gen_symdef_eig(a: &RMat, b: &RMat, count: usize) -> Result<(Vec<f64>, RMat)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(CoreError::invalid(
            "gen_symdef_eig needs square matrices of equal size",
        ));
    }
    if count > n {
        return Err(CoreError::invalid(format!(
            "requested {count} eigenvalues from a {n}-dimensional problem"
        )));
    }
    let (vals, (vecs, _)) = (a.clone(), b.clone()).eigh(UPLO::Lower).map_err(|e| match e {
        LinalgError::Lapack(lax::error::Error::LapackComputationalFailure { return_code })
            if return_code > n as i32 =>
        {
            CoreError::NotPositiveDefinite(format!(
                "B factorization failed at leading minor {}",
                return_code - n as i32
            ))
        }
        other => map_lapack("gen_symdef_eig", other),
    })?;
    let vals: Vec<f64> = vals.iter().take(count).copied().collect();
    let vecs = vecs.slice(s![.., ..count]).to_owned();
    Ok((vals, vecs))
}

/// Symmetric banded matrix stored by rows: `data[i][d] = A[i, i - d]`,
/// `d = 0..=bw` (lower band).
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> SymBanded {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, d: usize) -> usize {
        i * (self.bw + 1) + d
    }

    /// Add `v` to `A[i, j]` (and implicitly `A[j, i]`); `|i - j| <= bw`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= self.bw);
        let k = self.idx(hi, d);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bw {
            0.0
        } else {
            self.data[self.idx(hi, d)]
        }
    }

    pub fn to_dense(&self) -> RMat {
        let mut a = RMat::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..=i.min(self.n - 1) {
                if i - j <= self.bw {
                    let v = self.get(i, j);
                    a[[i, j]] = v;
                    a[[j, i]] = v;
                }
            }
        }
        a
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for i in 0..self.n {
            let dmax = self.bw.min(i);
            let mut acc = self.data[self.idx(i, 0)] * x[i];
            for d in 1..=dmax {
                let v = self.data[self.idx(i, d)];
                acc += v * x[i - d];
                y[i - d] += v * x[i];
            }
            y[i] += acc;
        }
    }

    /// Cholesky factorization `A = L L^T`; fails if not positive definite.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.data.clone();
        let w = bw + 1;
        for j in 0..n {
            let mut diag = l[j * w];
            // subtract contributions from previous columns
            for d in 1..=bw.min(j) {
                let v = l[j * w + d];
                diag -= v * v;
            }
            if diag <= 0.0 {
                return Err(CoreError::NotPositiveDefinite(format!(
                    "banded Cholesky pivot {diag:.3e} at row {j}"
                )));
            }
            let dsqrt = diag.sqrt();
            l[j * w] = dsqrt;
            let imax = (j + bw).min(n - 1);
            for i in (j + 1)..=imax {
                let mut s = l[i * w + (i - j)];
                // dot of rows i and j over shared columns
                let kmin = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / dsqrt;
            }
        }
        Ok(BandedCholesky {
            n,
            bw,
            l,
        })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let w = self.bw + 1;
        // forward: L y = b
        for i in 0..self.n {
            let mut s = b[i];
            for d in 1..=self.bw.min(i) {
                s -= self.l[i * w + d] * b[i - d];
            }
            b[i] = s / self.l[i * w];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let mut s = b[i];
            let dmax = self.bw.min(self.n - 1 - i);
            for d in 1..=dmax {
                s -= self.l[(i + d) * w + d] * b[i + d];
            }
            b[i] = s / self.l[i * w];
        }
    }
}

/// Smallest `count` eigenpairs of the pencil `A v = lambda B v` where only
/// `A^{-1}` (via its banded Cholesky) and `B`-multiplication are available.
///
/// Block inverse subspace iteration with Rayleigh-Ritz in the B-inner
/// product; the projected problems go through [`gen_symdef_eig`].
pub fn banded_pencil_smallest_eigs(
    a_chol: &BandedCholesky,
    b_mul: &dyn Fn(&[f64], &mut [f64]),
    n: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if count == 0 || count > n {
        return Err(CoreError::invalid(format!(
            "eigenvalue count {count} out of range for dimension {n}"
        )));
    }
    let p = (count + 8).min(n);
    // deterministic pseudo-random start block
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|c| {
            let mut state = 0x9e3779b97f4a7c15u64.wrapping_mul(c as u64 + 1);
            (0..n)
                .map(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect()
        })
        .collect();
    let mut prev = vec![f64::INFINITY; count];
    let mut bx = vec![vec![0.0; n]; p];
    for iter in 0..max_iter {
        // Y = A^{-1} B X
        let mut y = Vec::with_capacity(p);
        for (xc, bxc) in x.iter().zip(bx.iter_mut()) {
            b_mul(xc, bxc);
            let mut yc = bxc.clone();
            a_chol.solve_in_place(&mut yc);
            y.push(yc);
        }
        // projected matrices: H = Y^T A Y = Y^T B X, G = Y^T B Y
        let mut h = RMat::zeros((p, p));
        let mut g = RMat::zeros((p, p));
        let mut by = vec![vec![0.0; n]; p];
        for (c, yc) in y.iter().enumerate() {
            b_mul(yc, &mut by[c]);
        }
        for i in 0..p {
            for j in 0..p {
                h[[i, j]] = dot(&y[i], &bx[j]);
                g[[i, j]] = dot(&y[i], &by[j]);
            }
        }
        // symmetrize round-off
        let h = 0.5 * (&h + &h.t());
        let g = 0.5 * (&g + &g.t());
        let (theta, c) = gen_symdef_eig(&h, &g, p)?;
        // rotate the block
        let mut xnew = vec![vec![0.0; n]; p];
        for (col, xn) in xnew.iter_mut().enumerate() {
            for (src, yc) in y.iter().enumerate() {
                let w = c[[src, col]];
                if w != 0.0 {
                    for (o, v) in xn.iter_mut().zip(yc.iter()) {
                        *o += w * v;
                    }
                }
            }
        }
        x = xnew;
        let done = theta
            .iter()
            .take(count)
            .zip(prev.iter())
            .all(|(t, p)| (t - p).abs() <= tol * t.abs().max(1e-300));
        prev[..count].copy_from_slice(&theta[..count]);
        if done && iter > 0 {
            x.truncate(count);
            return Ok((prev, x));
        }
    }
    Err(CoreError::NoConvergence(format!(
        "subspace iteration did not reach tol {tol} in {max_iter} iterations"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
