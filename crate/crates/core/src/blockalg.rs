//! Dense complex linear algebra with block vectorization and block Kronecker
//! products. All vectorizations are column-major.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Dimension above which `spectral_radius` switches from a full eigensolve
/// to power iteration.
pub const EIGENSOLVE_CUTOFF: usize = 512;

/// A dense complex matrix tagged with a block partition.
///
/// `matrix` is split into sub-blocks of size `block_rows x block_cols`; the
/// divisibility invariant is checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub matrix: CMat,
    pub block_rows: usize,
    pub block_cols: usize,
}

impl BlockMatrix {
    pub fn new(matrix: CMat, block_rows: usize, block_cols: usize) -> Result<Self> {
        if block_rows == 0 || block_cols == 0 {
            return Err(Error::DimensionMismatch("block size must be positive".into()));
        }
        if matrix.nrows() % block_rows != 0 || matrix.ncols() % block_cols != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix not divisible into {}x{} blocks",
                matrix.nrows(),
                matrix.ncols(),
                block_rows,
                block_cols
            )));
        }
        Ok(Self { matrix, block_rows, block_cols })
    }

    /// Number of block rows in the partition.
    pub fn grid_rows(&self) -> usize {
        self.matrix.nrows() / self.block_rows
    }

    /// Number of block columns in the partition.
    pub fn grid_cols(&self) -> usize {
        self.matrix.ncols() / self.block_cols
    }

    /// The (k, l)-th sub-block, zero-based.
    pub fn block(&self, k: usize, l: usize) -> CMat {
        self.matrix
            .view(
                (k * self.block_rows, l * self.block_cols),
                (self.block_rows, self.block_cols),
            )
            .into_owned()
    }
}

/// Block vectorization: stacks `vec` of each block, scanning block columns
/// outer and block rows inner.
pub fn bvec(x: &BlockMatrix) -> CVec {
    let (r, c) = (x.block_rows, x.block_cols);
    let mut out = CVec::zeros(x.matrix.nrows() * x.matrix.ncols());
    let mut off = 0;
    for l in 0..x.grid_cols() {
        for k in 0..x.grid_rows() {
            for j in 0..c {
                for i in 0..r {
                    out[off] = x.matrix[(k * r + i, l * c + j)];
                    off += 1;
                }
            }
        }
    }
    out
}

/// Inverse of `bvec`: `bvec(unbvec(v)) == v` exactly.
pub fn unbvec(
    v: &CVec,
    rows: usize,
    cols: usize,
    block_rows: usize,
    block_cols: usize,
) -> Result<BlockMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "vector length {} != {}x{}",
            v.len(),
            rows,
            cols
        )));
    }
    let mut m = CMat::zeros(rows, cols);
    let x = BlockMatrix::new(m.clone(), block_rows, block_cols)?;
    let (gr, gc) = (x.grid_rows(), x.grid_cols());
    let mut off = 0;
    for l in 0..gc {
        for k in 0..gr {
            for j in 0..block_cols {
                for i in 0..block_rows {
                    m[(k * block_rows + i, l * block_cols + j)] = v[off];
                    off += 1;
                }
            }
        }
    }
    BlockMatrix::new(m, block_rows, block_cols)
}

/// Standard Kronecker product.
pub fn kron(x: &CMat, y: &CMat) -> CMat {
    x.kronecker(y)
}

/// Block Kronecker product. Block (k,l) of the result collects
/// `X_{kl} (x) Y_{mn}` over the block grid of `Y`.
pub fn block_kron(x: &BlockMatrix, y: &BlockMatrix) -> CMat {
    let (nx, mx) = (x.grid_rows(), x.grid_cols());
    let (ny, my) = (y.grid_rows(), y.grid_cols());
    let zr = x.block_rows * y.block_rows;
    let zc = x.block_cols * y.block_cols;
    let mut out = CMat::zeros(nx * ny * zr, mx * my * zc);
    for k in 0..nx {
        for l in 0..mx {
            let xb = x.block(k, l);
            for m in 0..ny {
                for n in 0..my {
                    let piece = xb.kronecker(&y.block(m, n));
                    out.view_mut(((k * ny + m) * zr, (l * my + n) * zc), (zr, zc))
                        .copy_from(&piece);
                }
            }
        }
    }
    out
}

/// The N^2 x N^2 permutation with `vec(A) = pi * vec(A^T)` for every NxN `A`.
/// It is symmetric and involutory.
pub fn vec_perm(n: usize) -> CMat {
    let mut p = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            // vec(A^T)[i + j n] = A[j, i] = vec(A)[j + i n]
            p[(j + i * n, i + j * n)] = Complex64::new(1.0, 0.0);
        }
    }
    p
}

/// Eigenvalues of a general complex square matrix, together with their
/// conjugates (2n values for an n x n input).
///
/// The matrix `X = A + iB` is embedded in the real companion form
/// `[[A, -B], [B, A]]`, whose spectrum is the spectrum of `X` united with
/// its conjugate, and the real Schur form of the companion is taken. This
/// sidesteps the complex Schur path, which can stall on some inputs.
/// Returns `None` if the QR iteration fails to converge.
pub fn try_eigenvalues(x: &CMat) -> Option<Vec<Complex64>> {
    let n = x.nrows();
    let mut c = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let v = x[(i, j)];
            c[(i, j)] = v.re;
            c[(i + n, j + n)] = v.re;
            c[(i, j + n)] = -v.im;
            c[(i + n, j)] = v.im;
        }
    }
    let schur = nalgebra::linalg::Schur::try_new(c, f64::EPSILON, 1_000_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Panicking variant of [`try_eigenvalues`].
pub fn eigenvalues(x: &CMat) -> Vec<Complex64> {
    try_eigenvalues(x).expect("QR eigenvalue iteration did not converge")
}

/// Eigenvalues of a Hermitian matrix (symmetrized first to suppress
/// rounding asymmetry).
pub fn hermitian_eigenvalues(x: &CMat) -> Vec<f64> {
    let h = (x + x.adjoint()).scale(0.5);
    h.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Spectral radius: full eigensolve up to `EIGENSOLVE_CUTOFF`, power
/// iteration with tolerance `tol` beyond it.
pub fn spectral_radius(x: &CMat, tol: f64) -> Result<f64> {
    assert_eq!(x.nrows(), x.ncols(), "spectral_radius requires a square matrix");
    let n = x.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    if n <= EIGENSOLVE_CUTOFF {
        if let Some(eigs) = try_eigenvalues(x) {
            return Ok(eigs.iter().map(|l| l.norm()).fold(0.0, f64::max));
        }
        // fall through to power iteration if the QR iteration stalls
    }
    // Power iteration on magnitudes; a deterministic pseudo-random start
    // avoids orthogonality to the dominant eigenvector.
    let mut v = CVec::from_iterator(
        n,
        (0..n).map(|i| {
            let t = (i as f64 + 1.0) * 0.754_877_666;
            Complex64::new((t.sin() + 1.5).abs(), t.cos() * 0.25)
        }),
    );
    v /= Complex64::new(v.norm(), 0.0);
    let max_iter = 100_000;
    let mut prev_est = f64::NAN;
    let mut est = 0.0;
    for it in 0..max_iter {
        let w = x * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        prev_est = est;
        est = norm;
        v = w / Complex64::new(norm, 0.0);
        if it > 0 && (est - prev_est).abs() <= tol * est.max(1.0) {
            return Ok(est);
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, last: est, prev: prev_est })
}

/// Solves `A x = b` by full-pivot LU with a singularity guard.
pub fn solve_linear(a: &CMat, b: &CVec) -> Result<CVec> {
    assert_eq!(a.nrows(), a.ncols(), "solve_linear requires a square matrix");
    assert_eq!(a.nrows(), b.len(), "rhs length must match");
    let scale = matrix_norm(a);
    let lu = a.clone().full_piv_lu();
    let min_pivot = lu
        .lu_internal()
        .diagonal()
        .iter()
        .map(|p| p.norm())
        .fold(f64::INFINITY, f64::min);
    let threshold = 1e-13 * scale;
    if min_pivot < threshold {
        return Err(Error::Singular { pivot: min_pivot, threshold });
    }
    lu.solve(b).ok_or(Error::Singular { pivot: min_pivot, threshold })
}

/// Frobenius norm.
pub fn matrix_norm(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// True when every entry is finite.
pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(a: &DMatrix<f64>) -> CMat {
    CMat::from_iterator(a.nrows(), a.ncols(), a.iter().map(|&x| Complex64::new(x, 0.0)))
}

/// Column-major serialized form used by `--dump-matrices` and the reports.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat, block_rows: usize, block_cols: usize) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            block_rows,
            block_cols,
            re: m.iter().map(|x| x.re).collect(),
            im: m.iter().map(|x| x.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch("entry arrays do not match rows*cols".into()));
        }
        Ok(CMat::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i)),
        ))
    }
}
