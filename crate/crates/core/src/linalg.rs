//! Dense kernels for the small symmetric matrices the miner works with.
//!
//! Eigen-decomposition uses cyclic Jacobi rotations in row-major order over
//! the strict upper triangle. Matrices here are principal submatrices of a
//! correlation matrix (rarely larger than a dozen rows), where Jacobi is both
//! accurate and fast enough to sit in the inner loops of subset enumeration.

use crate::error::{Error, Result};

/// Largest dimension accepted by the dense solvers.
pub const MAX_DIM: usize = 64;

const SYMMETRY_TOL: f64 = 1e-9;
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;
const ORIENTATION_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-12;

/// Square matrix stored row-major. Symmetry is checked by the solvers rather
/// than enforced on construction so asymmetric input can be reported.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix(
                "rows must form a square matrix".into(),
            ));
        }
        Ok(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Unit diagonal with every off-diagonal entry equal to `r`.
    pub fn equicorrelated(dim: usize, r: f64) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { r })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn principal(&self, indices: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    /// Principal submatrix with row/column `skip` deleted.
    pub fn without(&self, skip: usize) -> SymMatrix {
        let keep: Vec<usize> = (0..self.dim).filter(|&i| i != skip).collect();
        self.principal(&keep)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

/// Eigen-decomposition with eigenvalues ascending; `vectors[i]` pairs with
/// `values[i]` and has unit norm.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Smallest eigenpair, with the eigenvector canonically oriented so that its
/// first component of magnitude above 1e-10 is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub lambda_min: f64,
    pub vector: Vec<f64>,
    /// Gap to the second smallest eigenvalue (infinite for 1x1 input).
    pub gap: f64,
}

fn check_input(a: &SymMatrix) -> Result<()> {
    if a.dim() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if a.dim() > MAX_DIM {
        return Err(Error::TooLarge(a.dim()));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Runs cyclic Jacobi in place on a symmetrized copy. Returns the diagonal and
/// optionally the accumulated rotations (columns are eigenvectors).
fn jacobi(a: &SymMatrix, want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = a.dim();
    let mut m = SymMatrix::from_fn(n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i))).data;
    let mut v = want_vectors.then(|| SymMatrix::identity(n).data);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if (2.0 * off).sqrt() <= OFF_DIAGONAL_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[r * n + p];
                    let arq = m[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    m[r * n + p] = new_rp;
                    m[p * n + r] = new_rp;
                    m[r * n + q] = new_rq;
                    m[q * n + r] = new_rq;
                }
                if let Some(v) = v.as_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }
    let diag = (0..n).map(|i| m[i * n + i]).collect();
    (diag, v)
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

fn orient(vector: &mut [f64]) {
    if let Some(first) = vector.iter().find(|x| x.abs() > ORIENTATION_TOL) {
        if *first < 0.0 {
            vector.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn normalize(vector: &mut [f64]) {
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        vector.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Full eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn eigen_symmetric(a: &SymMatrix) -> Result<Eigen> {
    check_input(a)?;
    let n = a.dim();
    let (diag, v) = jacobi(a, true);
    let v = v.expect("vectors requested");
    let order = ascending_order(&diag);
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|r| v[r * n + col]).collect();
            normalize(&mut vec);
            vec
        })
        .collect();
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending. Skips accumulating rotations.
pub fn eigenvalues(a: &SymMatrix) -> Result<Vec<f64>> {
    check_input(a)?;
    let (mut diag, _) = jacobi(a, false);
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}

pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?[0])
}

pub fn min_eigenpair(a: &SymMatrix) -> Result<EigenResult> {
    let eig = eigen_symmetric(a)?;
    let mut vector = eig.vectors.into_iter().next().expect("non-empty");
    orient(&mut vector);
    let gap = eig
        .values
        .get(1)
        .map_or(f64::INFINITY, |second| second - eig.values[0]);
    Ok(EigenResult {
        lambda_min: eig.values[0],
        vector,
        gap,
    })
}

/// True iff the smallest eigenvalue is at least `-tol`. Input that the solver
/// rejects is reported as not PSD.
pub fn is_psd(a: &SymMatrix, tol: f64) -> bool {
    min_eigenvalue(a).is_ok_and(|l| l >= -tol)
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// Computes `L · z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|j| self.get(i, j) * z[j]).sum())
            .collect()
    }

    /// Reconstructs `L · Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_fn(self.dim, |i, j| {
            (0..=i.min(j))
                .map(|k| self.get(i, k) * self.get(j, k))
                .sum()
        })
    }
}

pub fn cholesky(a: &SymMatrix) -> Result<Cholesky> {
    check_input(a)?;
    let n = a.dim();
    let mut lower = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= lower[j * n + k] * lower[j * n + k];
        }
        if pivot <= PIVOT_TOL {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        lower[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= lower[i * n + k] * lower[j * n + k];
            }
            lower[i * n + j] = sum / diag;
        }
    }
    Ok(Cholesky { dim: n, lower })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn residual(a: &SymMatrix, value: f64, vector: &[f64]) -> f64 {
        a.mul_vec(vector)
            .iter()
            .zip(vector)
            .map(|(av, v)| (av - value * v).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = eigen_symmetric(&SymMatrix::identity(3)).unwrap();
        for v in eig.values {
            assert_close(v, 1.0, 1e-15);
        }
    }

    #[test]
    fn rank_one_pair() {
        let a = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let eig = eigen_symmetric(&a).unwrap();
        assert_close(eig.values[0], 0.0, 1e-12);
        assert_close(eig.values[1], 2.0, 1e-12);

        let min = min_eigenpair(&a).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_close(min.lambda_min, 0.0, 1e-12);
        assert_close(min.vector[0], h, 1e-12);
        assert_close(min.vector[1], h, 1e-12);
    }

    #[test]
    fn equicorrelated_closed_form() {
        // 1 + (k-1) r once, 1 - r with multiplicity k-1
        let eig = eigen_symmetric(&SymMatrix::equicorrelated(3, -0.4)).unwrap();
        assert_close(eig.values[0], 0.2, 1e-12);
        assert_close(eig.values[1], 1.4, 1e-12);
        assert_close(eig.values[2], 1.4, 1e-12);

        let min = min_eigenpair(&SymMatrix::equicorrelated(3, -0.5)).unwrap();
        assert_close(min.lambda_min, 0.0, 1e-12);
        assert_close(
            min_eigenpair(&SymMatrix::identity(4)).unwrap().lambda_min,
            1.0,
            1e-15,
        );
    }

    #[test]
    fn rejects_asymmetric_and_oversized() {
        let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(matches!(eigen_symmetric(&a), Err(Error::NotSymmetric(_))));
        let big = SymMatrix::identity(MAX_DIM + 1);
        assert!(matches!(eigen_symmetric(&big), Err(Error::TooLarge(_))));
    }

    #[test]
    fn residual_and_reconstruction() {
        let a = SymMatrix::from_rows(&[
            vec![1.0, 0.3, -0.2, 0.5],
            vec![0.3, 1.0, 0.1, -0.4],
            vec![-0.2, 0.1, 1.0, 0.25],
            vec![0.5, -0.4, 0.25, 1.0],
        ])
        .unwrap();
        let eig = eigen_symmetric(&a).unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        for (value, vector) in eig.values.iter().zip(&eig.vectors) {
            assert!(residual(&a, *value, vector) <= 1e-9);
        }
        for i in 0..4 {
            for j in 0..4 {
                let r: f64 = (0..4)
                    .map(|k| eig.values[k] * eig.vectors[k][i] * eig.vectors[k][j])
                    .sum();
                assert_close(r, a.get(i, j), 1e-9);
            }
        }
        assert_close(eig.values.iter().sum::<f64>(), a.trace(), 1e-12);
    }

    #[test]
    fn min_eigenpair_orientation() {
        let a = SymMatrix::from_rows(&[
            vec![1.0, 0.6, -0.7],
            vec![0.6, 1.0, -0.2],
            vec![-0.7, -0.2, 1.0],
        ])
        .unwrap();
        let r = min_eigenpair(&a).unwrap();
        let first = r.vector.iter().find(|x| x.abs() > 1e-10).unwrap();
        assert!(*first > 0.0);
        let norm: f64 = r.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_close(norm, 1.0, 1e-12);
        assert!(residual(&a, r.lambda_min, &r.vector) <= 1e-9);
    }

    #[test]
    fn cholesky_closed_forms() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l.reconstruct(), SymMatrix::identity(3));

        let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_close(l.get(0, 0), 1.0, 1e-15);
        assert_close(l.get(0, 1), 0.0, 0.0);
        assert_close(l.get(1, 0), 0.5, 1e-15);
        assert_close(l.get(1, 1), 0.75f64.sqrt(), 1e-15);

        match cholesky(&SymMatrix::equicorrelated(3, -0.5)) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&SymMatrix::identity(3), 1e-10));
        assert!(!is_psd(&SymMatrix::equicorrelated(3, -0.9), 1e-10));
        assert!(is_psd(&SymMatrix::equicorrelated(3, -0.5), 1e-10));
    }
}
