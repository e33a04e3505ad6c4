//! Small dense complex matrices and a Hermitian Jacobi eigensolver.

use crate::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn from_real(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> Self {
        let (a, b) = (self.n, other.n);
        let mut m = Self::zeros(a * b);
        for i in 0..a {
            for j in 0..a {
                let s = self[(i, j)];
                if s == ZERO {
                    continue;
                }
                for k in 0..b {
                    for l in 0..b {
                        m[(i * b + k, j * b + l)] = s * other[(k, l)];
                    }
                }
            }
        }
        m
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        &(u * self) * &u.adjoint()
    }

    /// Relative anti-Hermitian residual ‖A − A†‖ / ‖A‖.
    pub fn hermiticity_residual(&self) -> f64 {
        let norm = self.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (self - &self.adjoint()).norm() / norm
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        m
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector belonging to `values[k]`.
    pub vectors: Vec<Vec<C64>>,
}

impl EigenDecomposition {
    /// Rebuilds `V Λ V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut m = CMatrix::zeros(n);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += v[i] * v[j].conj() * *lambda;
                }
            }
        }
        m
    }
}

/// Cyclic Jacobi diagonalisation of a complex Hermitian matrix.
pub fn eigh(h: &CMatrix) -> Result<EigenDecomposition> {
    let residual = h.hermiticity_residual();
    if residual > 1e-12 {
        return Err(Error::NotHermitian(residual));
    }
    let n = h.dim();
    let scale = h.norm();
    let mut a = h.clone();
    let mut v = CMatrix::identity(n);
    if scale == 0.0 {
        return Ok(sorted(&a, &v));
    }
    let tol = 1e-13 * scale;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            return Ok(sorted(&a, &v));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    Err(Error::Numerical("Jacobi iteration did not converge".into()))
}

/// Annihilates `a[(p, q)]` with a unitary acting on rows/columns p and q.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag < f64::MIN_POSITIVE {
        return;
    }
    let phase = apq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
    let (s, c) = theta.sin_cos();
    // Columns of the rotation: e_p -> c e_p - s conj(phase) e_q, e_q -> s phase e_p + c e_q.
    let up = (C64::new(c, 0.0), -phase.conj() * s);
    let uq = (phase * s, C64::new(c, 0.0));
    let n = a.dim();
    // A <- A U
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * up.0 + aiq * up.1;
        a[(i, q)] = aip * uq.0 + aiq * uq.1;
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * up.0 + viq * up.1;
        v[(i, q)] = vip * uq.0 + viq * uq.1;
    }
    // A <- U† A
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = up.0.conj() * apj + up.1.conj() * aqj;
        a[(q, j)] = uq.0.conj() * apj + uq.1.conj() * aqj;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

fn sorted(a: &CMatrix, v: &CMatrix) -> EigenDecomposition {
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    EigenDecomposition {
        values: order.iter().map(|&k| a[(k, k)].re).collect(),
        vectors: order.iter().map(|&k| (0..n).map(|i| v[(i, k)]).collect()).collect(),
    }
}

/// Solves `M x = b` for a small real system by Gauss-Jordan elimination with
/// partial pivoting. Returns the inverse when `b` is the identity.
pub fn invert_real(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(n: usize, vals: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(n);
        let mut k = 0;
        for i in 0..n {
            m[(i, i)] = c(vals[k], 0.0);
            k += 1;
            for j in i + 1..n {
                let z = c(vals[k], vals[k + 1]);
                k += 2;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn diagonal_input_is_returned() {
        let h = CMatrix::diag(&[c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]);
        let e = eigh(&h).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let h = CMatrix::from_real(&[&[0.0, 1.5], &[1.5, 0.0]]);
        let e = eigh(&h).unwrap();
        assert!((e.values[0] + 1.5).abs() < 1e-14);
        assert!((e.values[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn complex_off_diagonal() {
        let h = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 2.0)], vec![c(0.0, -2.0), c(1.0, 0.0)]]);
        let e = eigh(&h).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-13);
        assert!((e.values[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = CMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(eigh(&h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn kron_dimensions_and_values() {
        let a = CMatrix::from_real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = CMatrix::identity(2);
        let k = a.kron(&b);
        assert_eq!(k.dim(), 4);
        assert_eq!(k[(0, 2)], c(2.0, 0.0));
        assert_eq!(k[(3, 1)], c(3.0, 0.0));
        assert_eq!(k[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn inverse_of_small_system() {
        let m = vec![vec![4.0, 7.0], vec![2.0, 6.0]];
        let inv = invert_real(&m).unwrap();
        assert!((inv[0][0] - 0.6).abs() < 1e-14);
        assert!((inv[0][1] + 0.7).abs() < 1e-14);
        assert!(invert_real(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }

    proptest! {
        #[test]
        fn random_hermitian_reconstructs(vals in prop::collection::vec(-5.0f64..5.0, 144)) {
            let h = random_hermitian(12, &vals);
            let e = eigh(&h).unwrap();
            let scale = h.norm();
            prop_assert!((&e.reconstruct() - &h).norm() <= 1e-9 * scale);
            let trace: f64 = e.values.iter().sum();
            prop_assert!((trace - h.trace().re).abs() <= 1e-9 * scale);
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for i in 0..12 {
                let hv = h.apply(&e.vectors[i]);
                let res: f64 = hv.iter().zip(&e.vectors[i]).map(|(a, b)| (a - b * e.values[i]).norm_sqr()).sum::<f64>().sqrt();
                prop_assert!(res <= 1e-9 * scale);
                for j in 0..i {
                    let dot: C64 = e.vectors[i].iter().zip(&e.vectors[j]).map(|(a, b)| a.conj() * b).sum();
                    prop_assert!(dot.norm() <= 1e-9);
                }
            }
        }
    }
}
