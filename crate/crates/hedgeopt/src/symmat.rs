//! Dense linear algebra for small symmetric problems (dimension 1..=8).
//!
//! Everything here is sized for the per-date work of a rebalancing schedule:
//! diagonalize a d x d matrix, invert a volatility matrix, take a PSD square
//! root, evaluate a quadratic form. Cyclic Jacobi rotations are used for the
//! eigendecomposition — for d <= 8 they are robust and give orthogonal bases
//! to machine precision — and LU with partial pivoting for inversion.
//!
//! All operations are pure: identical input bits produce identical output
//! bits, so results are reproducible across runs and worker counts.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

/// Off-diagonal convergence threshold for Jacobi sweeps, relative to the
/// Frobenius norm of the input.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// LU pivots below `SINGULAR_TOL * ||a||_inf` are treated as zero.
const SINGULAR_TOL: f64 = 1e-13;

/// Eigenvalues in `[-PSD_CLAMP, 0]` are clamped to zero in PSD contexts;
/// below `NOT_PSD_TOL` the matrix is rejected.
const PSD_CLAMP: f64 = 1e-12;
const NOT_PSD_TOL: f64 = -1e-8;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::input(format!("dimension {dim} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

fn check_finite(entries: &[f64]) -> Result<()> {
    if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite matrix entry {v}")));
    }
    Ok(())
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::input(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        check_finite(&entries)?;
        Ok(SquareMatrix { dim, entries })
    }

    pub fn zero(dim: usize) -> Self {
        SquareMatrix { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn transpose(&self) -> SquareMatrix {
        let d = self.dim;
        let mut t = SquareMatrix::zero(d);
        for i in 0..d {
            for j in 0..d {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = SquareMatrix::zero(d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.get(i, k) * rhs.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len(), "apply dimension mismatch");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Operator infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Dense symmetric matrix, row-major; `entries[i][j] == entries[j][i]`
/// holds exactly (mirrored at construction).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Build from full row-major entries; requires exact symmetry.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::input(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        check_finite(&entries)?;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (aij, aji) = (entries[i * dim + j], entries[j * dim + i]);
                if aij != aji && !(aij.is_nan() && aji.is_nan()) {
                    return Err(Error::Asymmetric { i, j, aij, aji });
                }
            }
        }
        Ok(SymMatrix { dim, entries })
    }

    /// Build from the upper triangle via `f(i, j)` with `i <= j`; the lower
    /// triangle is mirrored, so symmetry holds structurally.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dim(dim)?;
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        check_finite(&entries)?;
        Ok(SymMatrix { dim, entries })
    }

    pub fn zero(dim: usize) -> Self {
        SymMatrix { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, v) in values.iter().enumerate() {
            entries[i * dim + i] = *v;
        }
        SymMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_square(&self) -> SquareMatrix {
        SquareMatrix { dim: self.dim, entries: self.entries.clone() }
    }

    /// Symmetric part of a square matrix: `(a + a^T) / 2`.
    pub fn symmetrize(a: &SquareMatrix) -> Self {
        SymMatrix::from_upper(a.dim(), |i, j| 0.5 * (a.get(i, j) + a.get(j, i)))
            .expect("finite input stays finite under averaging")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Entrywise `self + scale * I`.
    pub fn add_scaled_identity(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.entries[i * self.dim + i] += scale;
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.entries {
            *v *= factor;
        }
        out
    }
}

/// Full spectral decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted descending; `basis` columns are the matching
/// orthonormal eigenvectors with a deterministic sign convention (the
/// largest-magnitude component of each column is positive).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub basis: SquareMatrix,
}

impl Spectrum {
    /// Reassemble `basis * Diag(f(eigenvalue)) * basis^T` as a `SymMatrix`.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.basis.dim();
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        SymMatrix::from_upper(d, |i, j| {
            (0..d).map(|k| self.basis.get(i, k) * mapped[k] * self.basis.get(j, k)).sum()
        })
        .expect("assembled spectrum entries are finite")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("spectrum is nonempty")
    }
}

/// Spectral decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps zero the off-diagonal entries until their Frobenius mass falls
/// below `1e-14 * ||a||_F` (at most 100 sweeps; for d <= 8 a handful
/// suffices).
pub fn eigh_sym(a: &SymMatrix) -> Result<Spectrum> {
    let d = a.dim();
    let norm = a.frobenius_norm();
    let mut m = a.as_square();
    let mut basis = SquareMatrix::identity(d);

    let off = |m: &SquareMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m.get(i, j) * m.get(i, j);
                }
            }
        }
        s.sqrt()
    };

    let threshold = JACOBI_TOL * norm;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&m) <= threshold {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                // Classic Jacobi rotation choosing the smaller angle.
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..d {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..d {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..d {
                    let bkp = basis.get(k, p);
                    let bkq = basis.get(k, q);
                    basis.set(k, p, c * bkp - s * bkq);
                    basis.set(k, q, s * bkp + c * bkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    // Descending by eigenvalue; index order breaks exact ties deterministically.
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).expect("finite eigenvalues"));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| m.get(k, k)).collect();
    let mut sorted = SquareMatrix::zero(d);
    for (col, &k) in order.iter().enumerate() {
        // Sign convention: make the largest-magnitude component positive.
        let mut lead = 0;
        for i in 1..d {
            if basis.get(i, k).abs() > basis.get(lead, k).abs() {
                lead = i;
            }
        }
        let flip = if basis.get(lead, k) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            sorted.set(i, col, flip * basis.get(i, k));
        }
    }

    Ok(Spectrum { eigenvalues, basis: sorted })
}

/// Invert a square matrix by LU decomposition with partial pivoting.
///
/// A pivot with magnitude below `1e-13 * ||a||_inf` is declared singular and
/// reported together with its magnitude.
pub fn mat_inverse(a: &SquareMatrix) -> Result<SquareMatrix> {
    let d = a.dim();
    let threshold = SINGULAR_TOL * a.inf_norm();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..d).collect();

    for col in 0..d {
        let mut pivot_row = col;
        for r in (col + 1)..d {
            if lu.get(r, col).abs() > lu.get(pivot_row, col).abs() {
                pivot_row = r;
            }
        }
        let pivot = lu.get(pivot_row, col);
        if pivot.abs() < threshold || pivot == 0.0 {
            return Err(Error::Singular { pivot: pivot.abs(), threshold });
        }
        if pivot_row != col {
            for j in 0..d {
                let tmp = lu.get(col, j);
                lu.set(col, j, lu.get(pivot_row, j));
                lu.set(pivot_row, j, tmp);
            }
            perm.swap(col, pivot_row);
        }
        for r in (col + 1)..d {
            let factor = lu.get(r, col) / pivot;
            lu.set(r, col, factor);
            for j in (col + 1)..d {
                lu.set(r, j, lu.get(r, j) - factor * lu.get(col, j));
            }
        }
    }

    // Solve A x = e_k column by column.
    let mut inv = SquareMatrix::zero(d);
    let mut work = vec![0.0; d];
    for k in 0..d {
        for (i, w) in work.iter_mut().enumerate() {
            *w = if perm[i] == k { 1.0 } else { 0.0 };
        }
        for i in 1..d {
            for j in 0..i {
                work[i] -= lu.get(i, j) * work[j];
            }
        }
        for i in (0..d).rev() {
            for j in (i + 1)..d {
                work[i] -= lu.get(i, j) * work[j];
            }
            work[i] /= lu.get(i, i);
        }
        for i in 0..d {
            inv.set(i, k, work[i]);
        }
    }
    Ok(inv)
}

/// PSD square root via the spectral decomposition.
///
/// Eigenvalue roundoff down to `-1e-8` is clamped to zero; anything more
/// negative is rejected as not PSD.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let spectrum = eigh_sym(a)?;
    let min = spectrum.min_eigenvalue();
    if min < NOT_PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min, context: String::new() });
    }
    Ok(spectrum.assemble(|l| l.max(0.0).sqrt()))
}

/// Clamp tiny negative eigenvalue roundoff when a PSD quantity is expected.
pub fn clamp_psd_eigenvalue(l: f64) -> f64 {
    if l < 0.0 && l >= -PSD_CLAMP {
        0.0
    } else {
        l
    }
}

/// Quadratic form `v^T h v`, evaluated as the plain double sum in a fixed
/// order so results are bit-deterministic.
pub fn quad_form(h: &SymMatrix, v: &[f64]) -> Result<f64> {
    if v.len() != h.dim() {
        return Err(Error::input(format!(
            "quad_form dimension mismatch: matrix {} vs vector {}",
            h.dim(),
            v.len()
        )));
    }
    let d = h.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += v[i] * h.get(i, j) * v[j];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn random_sym(rng: &mut StdRng, dim: usize, scale: f64) -> SymMatrix {
        SymMatrix::from_upper(dim, |_, _| rng.gen_range(-scale..scale)).unwrap()
    }

    fn reconstruct(spec: &Spectrum) -> SymMatrix {
        spec.assemble(|l| l)
    }

    #[test]
    fn eigh_diagonal_is_identity_basis() {
        let a = SymMatrix::diag(&[2.0, 1.0]);
        let spec = eigh_sym(&a).unwrap();
        assert_eq!(spec.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(spec.basis, SquareMatrix::identity(2));
    }

    #[test]
    fn eigh_off_diagonal_pair() {
        // [[0,1],[1,0]] has eigenvalues +-1 with eigenvectors (1,1)/sqrt2,
        // (1,-1)/sqrt2 (characteristic polynomial l^2 - 1).
        let a = SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let spec = eigh_sym(&a).unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] + 1.0).abs() < 1e-14);
        for i in 0..2 {
            assert!((spec.basis.get(i, 0).abs() - inv_sqrt2).abs() < 1e-14);
            assert!((spec.basis.get(i, 1).abs() - inv_sqrt2).abs() < 1e-14);
        }
        // Sign convention: leading component positive.
        assert!(spec.basis.get(0, 0) > 0.0 || spec.basis.get(1, 0) > 0.0);
    }

    #[test]
    fn eigh_reconstructs_random_matrices() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let dim = rng.gen_range(1..=6);
            let a = random_sym(&mut rng, dim, 5.0);
            let spec = eigh_sym(&a).unwrap();
            let back = reconstruct(&spec);
            let mut err = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    err += (back.get(i, j) - a.get(i, j)).powi(2);
                }
            }
            assert!(
                err.sqrt() <= 1e-10 * (1.0 + a.frobenius_norm()),
                "reconstruction error {} for dim {}",
                err.sqrt(),
                dim
            );
            // Orthogonality of the basis.
            let bt_b = spec.basis.transpose().matmul(&spec.basis);
            let mut ortho = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    let target = if i == j { 1.0 } else { 0.0 };
                    ortho += (bt_b.get(i, j) - target).powi(2);
                }
            }
            assert!(ortho.sqrt() <= 1e-12, "orthogonality defect {}", ortho.sqrt());
            // Descending order.
            for w in spec.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn eigh_is_deterministic() {
        let a = SymMatrix::new(3, vec![1.0, 0.3, -0.2, 0.3, 2.0, 0.5, -0.2, 0.5, -1.0]).unwrap();
        let s1 = eigh_sym(&a).unwrap();
        let s2 = eigh_sym(&a).unwrap();
        assert_eq!(s1.eigenvalues, s2.eigenvalues);
        assert_eq!(s1.basis, s2.basis);
    }

    #[test]
    fn eigh_rejects_non_finite() {
        assert!(SymMatrix::new(2, vec![f64::NAN, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn inverse_identity_and_diagonal() {
        let id = SquareMatrix::identity(3);
        assert_eq!(mat_inverse(&id).unwrap(), id);

        let d = SquareMatrix::new(2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let inv = mat_inverse(&d).unwrap();
        assert_eq!(inv.get(0, 0), 0.5);
        assert_eq!(inv.get(1, 1), 0.25);
    }

    #[test]
    fn inverse_random_matrices_multiply_to_identity() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            // Diagonally dominated so the condition number stays moderate.
            let mut a = SquareMatrix::zero(4);
            for i in 0..4 {
                for j in 0..4 {
                    let base = if i == j { 5.0 } else { 0.0 };
                    a.set(i, j, base + rng.gen_range(-1.0..1.0));
                }
            }
            let inv = mat_inverse(&a).unwrap();
            let prod = a.matmul(&inv);
            for i in 0..4 {
                for j in 0..4 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((prod.get(i, j) - target).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inverse_reports_singularity_with_pivot() {
        let a = SquareMatrix::new(2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        match mat_inverse(&a) {
            Err(Error::Singular { pivot, threshold }) => {
                assert!(pivot < threshold);
            }
            other => panic!("expected singularity error, got {other:?}"),
        }
    }

    #[test]
    fn psd_sqrt_diagonal() {
        let a = SymMatrix::diag(&[4.0, 9.0]);
        let root = psd_sqrt(&a).unwrap();
        assert!((root.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((root.get(1, 1) - 3.0).abs() < 1e-12);
        assert_eq!(psd_sqrt(&SymMatrix::identity(3)).unwrap(), SymMatrix::identity(3));
    }

    #[test]
    fn psd_sqrt_squares_back_to_input() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..100 {
            let dim = rng.gen_range(1..=6);
            let b = random_sym(&mut rng, dim, 2.0);
            // b^T b = b.b is PSD for symmetric b.
            let bsq = SymMatrix::symmetrize(&b.as_square().matmul(&b.as_square()));
            let root = psd_sqrt(&bsq).unwrap();
            let back = SymMatrix::symmetrize(&root.as_square().matmul(&root.as_square()));
            let mut err = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    err += (back.get(i, j) - bsq.get(i, j)).powi(2);
                }
            }
            assert!(err.sqrt() <= 1e-10 * (1.0 + bsq.frobenius_norm()));
        }
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let a = SymMatrix::diag(&[1.0, -0.5]);
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn quad_form_known_values() {
        let id = SymMatrix::identity(2);
        assert_eq!(quad_form(&id, &[3.0, 4.0]).unwrap(), 25.0);
        let h = SymMatrix::diag(&[1.0, 0.0]);
        assert_eq!(quad_form(&h, &[2.0, 5.0]).unwrap(), 4.0);
    }

    #[test]
    fn quad_form_matches_naive_sum_and_rejects_mismatch() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..50 {
            let dim = rng.gen_range(1..=6);
            let h = random_sym(&mut rng, dim, 3.0);
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut naive = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    naive += v[i] * h.get(i, j) * v[j];
                }
            }
            assert_eq!(quad_form(&h, &v).unwrap(), naive);
        }
        assert!(quad_form(&SymMatrix::identity(2), &[1.0]).is_err());
    }

    #[test]
    fn quad_form_nonnegative_on_psd() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..50 {
            let dim = rng.gen_range(1..=5);
            let b = random_sym(&mut rng, dim, 2.0);
            let psd = SymMatrix::symmetrize(&b.as_square().matmul(&b.as_square()));
            let spec = eigh_sym(&psd).unwrap();
            assert!(spec.min_eigenvalue() >= -1e-10);
            for _ in 0..5 {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
                assert!(quad_form(&psd, &v).unwrap() >= -1e-9);
            }
        }
    }

    #[test]
    fn sym_matrix_rejects_asymmetry() {
        match SymMatrix::new(2, vec![1.0, 0.5, 0.25, 1.0]) {
            Err(Error::Asymmetric { i: 0, j: 1, aij, aji }) => {
                assert_eq!(aij, 0.5);
                assert_eq!(aji, 0.25);
            }
            other => panic!("expected asymmetry error, got {other:?}"),
        }
    }
}
