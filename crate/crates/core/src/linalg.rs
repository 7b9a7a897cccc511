//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Operators on the system
//! Hilbert space are `d x d`; superoperators are `d^2 x d^2` matrices acting
//! on column-stacked vectorizations, so `vec(A X B) = (B^T ⊗ A) vec(X)`.
//! Because nalgebra stores column-major, `vec(X)` is simply the storage slice.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical tolerances shared by the analysis routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum deviation of `|λ|` from 1 for an eigenvalue to count as peripheral.
    pub eig_peripheral: f64,
    /// Allowed negativity of eigenvalues of matrices that should be PSD.
    pub psd: f64,
    /// Generic equality tolerance; also the relative singular-value cutoff
    /// for rank decisions.
    pub equality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eig_peripheral: 1e-9, psd: 1e-9, equality: 1e-8 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if self.eig_peripheral > 0.0 && self.psd > 0.0 && self.equality > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams("tolerances must be strictly positive".into()))
        }
    }
}

/// Which tensor factor survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// A subspace of `C^n` represented by an isometry whose columns form an
/// orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub isometry: ComplexMatrix,
}

impl Subspace {
    pub fn new(isometry: ComplexMatrix) -> Result<Self> {
        let gram = isometry.adjoint() * &isometry;
        let defect = max_abs(&(gram - ComplexMatrix::identity(isometry.ncols(), isometry.ncols())));
        if defect > 1e-8 {
            return Err(Error::Stage { stage: "subspace isometry", defect });
        }
        Ok(Subspace { isometry })
    }

    pub fn full(n: usize) -> Self {
        Subspace { isometry: ComplexMatrix::identity(n, n) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.isometry.nrows()
    }

    pub fn dim(&self) -> usize {
        self.isometry.ncols()
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.isometry * self.isometry.adjoint()
    }
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() == m.ncols() {
        Ok(m.nrows())
    } else {
        Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() })
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Hilbert–Schmidt inner product `tr(a† b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn hs_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - ComplexMatrix::identity(n, n)))
}

/// Column-stacking vectorization.
pub fn vec(m: &ComplexMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a square `d x d` matrix.
pub fn unvec(v: &[C64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v)
}

pub fn matrix_unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut e = ComplexMatrix::zeros(d, d);
    e[(i, j)] = ONE;
    e
}

/// Kronecker product; entry `(i·p+k, j·q+l)` is `a[i,j]·b[k,l]` for `b` of shape `p x q`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Block-diagonal matrix with the given square blocks.
pub fn direct_sum(blocks: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut n = 0;
    for b in blocks {
        n += check_square(b)?;
    }
    let mut out = ComplexMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    Ok(out)
}

/// Partial trace of an operator on `C^dim_a ⊗ C^dim_b`.
pub fn partial_trace(m: &ComplexMatrix, dim_a: usize, dim_b: usize, keep: Keep) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "partial trace expects {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(match keep {
        Keep::First => ComplexMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum()
        }),
        Keep::Second => ComplexMatrix::from_fn(dim_b, dim_b, |k, l| {
            (0..dim_a).map(|i| m[(i * dim_b + k, i * dim_b + l)]).sum()
        }),
    })
}

fn schur(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = check_square(m)?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solver("non-finite input".into()));
    }
    // The QR iteration can stall at machine-precision deflation on nearly
    // unitary inputs; a slightly looser threshold then converges.
    [f64::EPSILON, 1e-15, 1e-14, 1e-13]
        .into_iter()
        .find_map(|eps| Schur::try_new(m.clone(), eps, 1000 * n.max(1)))
        .map(|s| s.unpack())
        .ok_or_else(|| Error::Solver("Schur iteration did not converge".into()))
}

/// All eigenvalues (with multiplicity) of a square matrix, from its complex Schur form.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues and unit-norm right eigenvectors (as columns).
///
/// The eigenvectors of the triangular Schur factor are found by back
/// substitution; tiny pivots from repeated eigenvalues are perturbed the
/// same way LAPACK's `trevc` does.
pub fn eig(m: &ComplexMatrix) -> Result<(Vec<C64>, ComplexMatrix)> {
    let (q, t) = schur(m)?;
    let n = t.nrows();
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut vecs = ComplexMatrix::zeros(n, n);
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    for i in 0..n {
        let lambda = values[i];
        let mut y = DVector::<C64>::zeros(n);
        y[i] = ONE;
        for j in (0..i).rev() {
            let mut acc = t[(j, i)];
            for l in j + 1..i {
                acc += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - lambda;
            if den.norm() < small {
                den = c(small);
            }
            y[j] = -acc / den;
        }
        let v = &q * y;
        let nv = v.norm();
        vecs.set_column(i, &(v / c(nv)));
    }
    Ok((values, vecs))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_square(m)?;
    let se = SymmetricEigen::new(hermitian_part(m));
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(m.nrows(), idx.len(), |r, col| se.eigenvectors[(r, idx[col])]);
    Ok((values, vectors))
}

/// Singular value decomposition with singular values sorted descending.
///
/// Returns `(u, s, v)` with `m = u diag(s) v†`. For wide matrices the input
/// is padded with zero rows so that `v` is always a full `ncols x ncols`
/// unitary, which is what the null-space routines need.
///
/// nalgebra's bidiagonal SVD loses accuracy on some rank-deficient complex
/// inputs, so this uses one-sided Jacobi rotations instead.
pub fn svd_full(m: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let (r, cols) = m.shape();
    let rows = r.max(cols);
    let mut a = ComplexMatrix::zeros(rows, cols);
    a.view_mut((0, 0), (r, cols)).copy_from(m);
    let mut v = ComplexMatrix::identity(cols, cols);
    // Columns below this squared norm are numerically zero; rotating them
    // only amplifies rounding in subnormal arithmetic.
    let negligible = a.norm_squared() * f64::EPSILON * f64::EPSILON;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if alpha.min(beta) <= negligible || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let phase = phase / phase.norm();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut a, p, q, cs, sn, phase);
                rotate_columns(&mut v, p, q, cs, sn, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut idx: Vec<usize> = (0..cols).collect();
    idx.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    // Normalized columns; vanishing ones are replaced by the unit vector
    // with the largest component outside the span of the previous columns.
    let mut u = ComplexMatrix::zeros(rows, cols);
    for (j, &k) in idx.iter().enumerate() {
        let project_out = |mut x: DVector<C64>, u: &ComplexMatrix| {
            for _ in 0..2 {
                for i in 0..j {
                    let proj = u.column(i).dotc(&x);
                    x -= u.column(i) * proj;
                }
            }
            x
        };
        let mut col = if norms[k] > 0.0 { project_out(a.column(k) / c(norms[k]), &u) } else { DVector::zeros(rows) };
        if col.norm() < 0.5 {
            col = (0..rows)
                .map(|i| project_out(DVector::from_fn(rows, |r, _| if r == i { ONE } else { ZERO }), &u))
                .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                .expect("rows >= cols >= 1");
        }
        let nc = col.norm();
        u.set_column(j, &(col / c(nc)));
    }
    let v_sorted = ComplexMatrix::from_fn(cols, cols, |i, j| v[(i, idx[j])]);
    let s_sorted = idx.iter().map(|&k| norms[k]).collect();
    (u.rows(0, r).into_owned(), s_sorted, v_sorted)
}

const JACOBI_SWEEPS: usize = 80;

/// Right-multiplies columns `p`, `q` by the unitary `[[c, s], [−s e^{−iφ}, c e^{−iφ}]]`.
fn rotate_columns(m: &mut ComplexMatrix, p: usize, q: usize, cs: f64, sn: f64, phase: C64) {
    let back = phase.conj();
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)] * back);
        m[(i, p)] = x * cs - y * sn;
        m[(i, q)] = x * sn + y * cs;
    }
}

/// Numerical rank: singular values above `rel_tol` times the largest.
pub fn rank(m: &ComplexMatrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let (_, s, _) = svd_full(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

/// Orthonormal basis (columns) of the null space of `m`.
///
/// With `count = Some(k)` the `k` right singular vectors of smallest
/// singular value are returned; otherwise all vectors whose singular value
/// is at most `rel_tol` times the largest (or below `rel_tol` when `m` is
/// numerically zero).
pub fn null_space(m: &ComplexMatrix, rel_tol: f64, count: Option<usize>) -> (ComplexMatrix, Vec<f64>) {
    let n = m.ncols();
    let (_, s, v) = svd_full(m);
    let top = s.first().copied().unwrap_or(0.0);
    let k = match count {
        Some(k) => k.min(n),
        None => {
            let cut = rel_tol * top.max(1.0);
            s.iter().filter(|&&x| x <= cut).count() + n.saturating_sub(s.len())
        }
    };
    let start = n - k;
    let tail: Vec<f64> = s.iter().skip(start).copied().collect();
    (v.columns(start, k).into_owned(), tail)
}

/// Orthonormal basis (columns) of the range of a Hermitian PSD matrix.
pub fn support_isometry(m: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    let (vals, vecs) = hermitian_eig(m)?;
    let top = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > rel_tol * top && top > 0.0).collect();
    Ok(ComplexMatrix::from_fn(m.nrows(), keep.len(), |r, col| vecs[(r, keep[col])]))
}

/// Square root and Moore–Penrose inverse square root of a PSD matrix.
///
/// Eigenvalues at most `tol` times the largest are treated as kernel, where
/// the inverse square root is set to zero.
pub fn psd_sqrt_pinv(m: &ComplexMatrix, tol: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = check_square(m)?;
    let herm = hermiticity_defect(m);
    let (vals, vecs) = hermitian_eig(m)?;
    let top = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if herm > tol * top.max(1.0) {
        return Err(Error::NotHermitian { defect: herm });
    }
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -tol * top.max(1.0) {
        return Err(Error::NotPsd { min_eig: min });
    }
    let mut sq = ComplexMatrix::zeros(n, n);
    let mut isq = ComplexMatrix::zeros(n, n);
    for (i, &lam) in vals.iter().enumerate() {
        if lam <= tol * top {
            continue;
        }
        let v = vecs.column(i);
        let outer = v * v.adjoint();
        sq += &outer * c(lam.sqrt());
        isq += outer * c(1.0 / lam.sqrt());
    }
    Ok((sq, isq))
}

/// Principal `m`-th root of a unitary: every eigenphase in `(-π, π]` is divided by `m`.
pub fn unitary_mth_root(u: &ComplexMatrix, m: usize) -> Result<ComplexMatrix> {
    check_square(u)?;
    if m == 0 {
        return Err(Error::InvalidParams("root order must be at least 1".into()));
    }
    let defect = unitarity_defect(u);
    if defect > 1e-8 {
        return Err(Error::NotUnitary { defect });
    }
    if m == 1 {
        return Ok(u.clone());
    }
    // A normal matrix has a diagonal Schur form, so the Schur vectors are eigenvectors.
    let (q, t) = schur(u)?;
    let n = u.nrows();
    let mut diag = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let phase = t[(i, i)].arg();
        if std::f64::consts::PI - phase.abs() < 1e-9 {
            return Err(Error::BranchAmbiguity { phase });
        }
        diag[(i, i)] = C64::from_polar(1.0, phase / m as f64);
    }
    Ok(&q * diag * q.adjoint())
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square(m)?;
    Ok(m.exp())
}

/// Multiply a matrix by the phase that makes its first entry of maximal
/// modulus real and positive.
pub fn fix_phase(m: &ComplexMatrix) -> ComplexMatrix {
    let best = m.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    match m.iter().find(|z| z.norm() >= best * (1.0 - 1e-12) && best > 0.0) {
        Some(z) => m * (z.conj() / c(z.norm())),
        None => m.clone(),
    }
}

/// Hilbert–Schmidt orthonormal basis of the span of `vectors`.
///
/// Directions whose singular value is below `tol` times the largest are
/// dropped. Each returned element is phase-fixed with [`fix_phase`].
pub fn orthonormalize(vectors: &[ComplexMatrix], tol: f64) -> Result<Vec<ComplexMatrix>> {
    let first = vectors.first().ok_or(Error::Empty("orthonormalize needs at least one element"))?;
    let (r, cols) = first.shape();
    if vectors.iter().any(|v| v.shape() != (r, cols)) {
        return Err(Error::DimensionMismatch("orthonormalize inputs differ in shape".into()));
    }
    let stacked = stack_columns(vectors);
    let (u, s, _) = svd_full(&stacked);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(Vec::new());
    }
    let k = s.iter().filter(|&&x| x > tol * top).count();
    Ok((0..k)
        .map(|j| fix_phase(&ComplexMatrix::from_column_slice(r, cols, u.column(j).as_slice())))
        .collect())
}

/// Matrix whose columns are the vectorizations of `items`.
pub fn stack_columns(items: &[ComplexMatrix]) -> ComplexMatrix {
    let len = items.first().map(|m| m.len()).unwrap_or(0);
    ComplexMatrix::from_fn(len, items.len(), |i, j| items[j].as_slice()[i])
}

/// Largest HS distance from a member of `a` to the span of the orthonormal set `b`.
///
/// `a` need not be orthonormal; each element is normalized first.
pub fn span_residual(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    a.iter()
        .map(|x| {
            let nx = hs_norm(x);
            if nx == 0.0 {
                return 0.0;
            }
            let mut r = x / c(nx);
            for y in b {
                let coef = hs_inner(y, &r);
                r -= y * coef;
            }
            hs_norm(&r)
        })
        .fold(0.0, f64::max)
}

/// Symmetric subspace distance between two orthonormal sets.
pub fn span_distance(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    if a.len() != b.len() {
        return 1.0_f64.max(span_residual(a, b)).max(span_residual(b, a));
    }
    span_residual(a, b).max(span_residual(b, a))
}

/// Greedy multiset match of complex numbers; returns the worst pairing distance,
/// or infinity if the sizes differ.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    // Match the largest-magnitude entries first; they are the best conditioned.
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].norm().total_cmp(&a[i].norm()));
    for i in order {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (j, z) in b.iter().enumerate() {
            if !used[j] && (a[i] - z).norm() < best_d {
                best_d = (a[i] - z).norm();
                best = Some(j);
            }
        }
        if let Some(j) = best {
            used[j] = true;
            worst = worst.max(best_d);
        }
    }
    worst
}

pub fn pauli() -> [ComplexMatrix; 3] {
    let s1 = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let s2 = ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let s3 = ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [s1, s2, s3]
}

pub fn diag(entries: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn diag_real(entries: &[f64]) -> ComplexMatrix {
    diag(&entries.iter().map(|&x| c(x)).collect::<Vec<_>>())
}
