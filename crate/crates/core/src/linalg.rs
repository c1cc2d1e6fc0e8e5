//! Small dense symmetric-matrix numerics.
//!
//! Everything here is sized for the handful of parameters an MCMC summary
//! usually carries (p up to a few dozen). Matrices are stored packed, so a
//! [`SymMatrix`] can never be asymmetric.

use crate::error::{Error, Result};

/// Smallest value fed to `ln` when accumulating log-determinants.
const LOG_FLOOR: f64 = 1e-300;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Real symmetric matrix in packed lower-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1, "matrix order must be at least 1");
        SymMatrix {
            order,
            packed: vec![0.0; order * (order + 1) / 2],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::from_diag(&vec![1.0; order])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut a = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            a.set(i, i, d);
        }
        a
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_diag(&[value])
    }

    /// Builds a matrix from `f(i, j)` evaluated on the lower triangle.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = Self::zeros(order);
        for i in 0..order {
            for j in 0..=i {
                a.packed[packed_index(i, j)] = f(i, j);
            }
        }
        a
    }

    /// Builds from a row-major dense matrix, averaging the two triangles.
    pub fn from_dense(order: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != order * order {
            return Err(Error::DimensionMismatch {
                expected: order * order,
                found: dense.len(),
            });
        }
        Ok(Self::from_fn(order, |i, j| {
            0.5 * (dense[i * order + j] + dense[j * order + i])
        }))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] = value;
    }

    pub(crate) fn add_at(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] += value;
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.order;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let p = self.order;
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            order: self.order,
            packed: self.packed.iter().map(|v| v * c).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SymMatrix, beta: f64) -> Result<Self> {
        check_same_order(self, other)?;
        Ok(SymMatrix {
            order: self.order,
            packed: self
                .packed
                .iter()
                .zip(&other.packed)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    /// `A · self · Aᵀ` for a row-major `q × p` matrix `A`.
    pub fn congruence(&self, a: &[f64], rows: usize) -> Result<Self> {
        let p = self.order;
        if a.len() != rows * p {
            return Err(Error::DimensionMismatch {
                expected: rows * p,
                found: a.len(),
            });
        }
        let s = self.to_dense();
        // AS (rows × p)
        let mut as_ = vec![0.0; rows * p];
        for i in 0..rows {
            for k in 0..p {
                let aik = a[i * p + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..p {
                    as_[i * p + j] += aik * s[k * p + j];
                }
            }
        }
        Ok(SymMatrix::from_fn(rows, |i, j| {
            (0..p).map(|k| as_[i * p + k] * a[j * p + k]).sum()
        }))
    }

    /// Extracts the 1×1 value of an order-one matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.order == 1).then(|| self.packed[0])
    }
}

fn check_same_order(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.order != b.order {
        return Err(Error::DimensionMismatch {
            expected: a.order,
            found: b.order,
        });
    }
    Ok(())
}

/// Relative size below which a Cholesky pivot is treated as zero.
const PIVOT_TOLERANCE: f64 = 64.0 * f64::EPSILON;

/// Lower-triangular Cholesky factor, row-major dense.
#[derive(Debug, Clone)]
pub struct Cholesky {
    order: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let p = a.order;
        let mut l = vec![0.0; p * p];
        for j in 0..p {
            let ajj = a.get(j, j);
            let mut d = ajj;
            for k in 0..j {
                d -= l[j * p + k] * l[j * p + k];
            }
            // Pivots lost to cancellation mean numerically singular.
            if !(d > PIVOT_TOLERANCE * ajj) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[j * p + j] = djj;
            for i in (j + 1)..p {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = s / djj;
            }
        }
        Ok(Cholesky { order: p, lower: l })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        let p = self.order;
        2.0 * (0..p)
            .map(|i| self.lower[i * p + i].max(LOG_FLOOR).ln())
            .sum::<f64>()
    }

    /// Solves `L x = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let p = self.order;
        for i in 0..p {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * p + k] * b[k];
            }
            b[i] = s / self.lower[i * p + i];
        }
    }

    /// `L z` for a vector `z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let p = self.order;
        (0..p)
            .map(|i| (0..=i).map(|k| self.lower[i * p + k] * z[k]).sum())
            .collect()
    }

    /// `L⁻¹ B L⁻ᵀ`, symmetric with the spectrum of `S⁻¹ B`.
    pub fn whiten(&self, b: &SymMatrix) -> Result<SymMatrix> {
        check_order(self.order, b)?;
        let p = self.order;
        // X = L⁻¹ B, column by column; stored row-major.
        let mut x = vec![0.0; p * p];
        let mut col = vec![0.0; p];
        for j in 0..p {
            for i in 0..p {
                col[i] = b.get(i, j);
            }
            self.forward_solve(&mut col);
            for i in 0..p {
                x[i * p + j] = col[i];
            }
        }
        // C = L⁻¹ Xᵀ = (X L⁻ᵀ)ᵀ, symmetric.
        let mut c = vec![0.0; p * p];
        for j in 0..p {
            for i in 0..p {
                col[i] = x[j * p + i];
            }
            self.forward_solve(&mut col);
            for i in 0..p {
                c[i * p + j] = col[i];
            }
        }
        SymMatrix::from_dense(p, &c)
    }
}

fn check_order(p: usize, b: &SymMatrix) -> Result<()> {
    if b.order != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: b.order,
        });
    }
    Ok(())
}

/// `ln det A` for positive definite `A`, via Cholesky.
pub fn log_det(a: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::factor(a)?.log_det())
}

/// Sign and log-magnitude of a determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogDet {
    /// -1, 0 or +1.
    pub sign: f64,
    pub log_abs: f64,
}

/// Determinant of an arbitrary symmetric matrix by LU with partial pivoting.
///
/// Used only to describe indefinite estimates; positive definite inputs
/// should go through [`log_det`].
pub fn signed_log_det(a: &SymMatrix) -> SignedLogDet {
    let p = a.order;
    let mut m = a.to_dense();
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| m[i * p + col].abs().total_cmp(&m[j * p + col].abs()))
            .unwrap();
        let pv = m[pivot * p + col];
        if pv == 0.0 {
            return SignedLogDet {
                sign: 0.0,
                log_abs: f64::NEG_INFINITY,
            };
        }
        if pivot != col {
            for k in 0..p {
                m.swap(pivot * p + k, col * p + k);
            }
            sign = -sign;
        }
        if pv < 0.0 {
            sign = -sign;
        }
        log_abs += pv.abs().max(LOG_FLOOR).ln();
        for i in (col + 1)..p {
            let f = m[i * p + col] / pv;
            if f != 0.0 {
                for k in col..p {
                    m[i * p + k] -= f * m[col * p + k];
                }
            }
        }
    }
    SignedLogDet { sign, log_abs }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Row-major `p × p`; column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        let p = self.values.len();
        (0..p).map(|i| self.vectors[i * p + k]).collect()
    }

    /// `V · diag(values) · Vᵀ` with the supplied values.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymMatrix {
        let p = self.values.len();
        let v = &self.vectors;
        SymMatrix::from_fn(p, |i, j| {
            (0..p)
                .map(|k| v[i * p + k] * values[k] * v[j * p + k])
                .sum()
        })
    }
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eigen(a: &SymMatrix) -> Result<SymEigen> {
    if !a.is_finite() {
        return Err(Error::InvalidParameter(
            "eigendecomposition of a non-finite matrix".into(),
        ));
    }
    let p = a.order;
    let mut m = a.to_dense();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let scale = a.frobenius_norm();
    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                s += m[i * p + j] * m[i * p + j];
            }
        }
        s.sqrt()
    };

    let tol = f64::EPSILON * scale;
    let mut converged = scale == 0.0 || p == 1;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        for r in 0..p {
            for c in (r + 1)..p {
                let arc = m[r * p + c];
                if arc.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[c * p + c] - m[r * p + r]) / (2.0 * arc);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..p {
                    let mkr = m[k * p + r];
                    let mkc = m[k * p + c];
                    m[k * p + r] = cs * mkr - sn * mkc;
                    m[k * p + c] = sn * mkr + cs * mkc;
                }
                for k in 0..p {
                    let mrk = m[r * p + k];
                    let mck = m[c * p + k];
                    m[r * p + k] = cs * mrk - sn * mck;
                    m[c * p + k] = sn * mrk + cs * mck;
                }
                m[r * p + c] = 0.0;
                m[c * p + r] = 0.0;
                for k in 0..p {
                    let vkr = v[k * p + r];
                    let vkc = v[k * p + c];
                    v[k * p + r] = cs * vkr - sn * vkc;
                    v[k * p + c] = sn * vkr + cs * vkc;
                }
            }
        }
        converged = off_norm(&m) <= tol;
    }
    if !converged {
        return Err(Error::NoConvergence {
            residual: off_norm(&m),
        });
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[i * p + i].total_cmp(&m[j * p + j]));
    let values = order.iter().map(|&k| m[k * p + k]).collect();
    let mut vectors = vec![0.0; p * p];
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..p {
            vectors[i * p + new_k] = v[i * p + old_k];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of `S⁻¹ B` (ascending), via the symmetric form `L⁻¹ B L⁻ᵀ`.
pub fn gen_eigenvalues(s: &SymMatrix, b: &SymMatrix) -> Result<Vec<f64>> {
    let chol = Cholesky::factor(s)?;
    Ok(sym_eigen(&chol.whiten(b)?)?.values)
}

/// Largest eigenvalue of `S⁻¹ B`.
pub fn max_gen_eig(s: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    let values = gen_eigenvalues(s, b)?;
    Ok(*values.last().expect("order >= 1"))
}

/// Lifts eigenvalues below `rel_floor · trace(A)` up to that floor.
///
/// Returns the (possibly) repaired matrix and whether anything changed.
pub fn repair_psd(a: &SymMatrix, rel_floor: f64) -> Result<(SymMatrix, bool)> {
    let trace = a.trace();
    if !(trace > 0.0) {
        return Err(Error::Unrepairable);
    }
    let floor = rel_floor * trace;
    if a.order == 1 {
        return Ok((a.clone(), false));
    }
    let eig = sym_eigen(a)?;
    if eig.values.iter().all(|&l| l >= floor) {
        return Ok((a.clone(), false));
    }
    let lifted: Vec<f64> = eig.values.iter().map(|&l| l.max(floor)).collect();
    Ok((eig.reconstruct_with(&lifted), true))
}
