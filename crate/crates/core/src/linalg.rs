//! Dense complex linear algebra for small (n ≤ 16) matrices.
//!
//! Symmetric here always means transpose-symmetric: `A[i][j] == A[j][i]`.
//! The fundamental tensor `g_ij` at a complex fibre point is symmetric but
//! not Hermitian, so nothing in this module conjugates implicitly.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut, Index, IndexMut};

#[allow(unused_imports)]
use num_traits::{Float, Zero};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A complex n-vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVector(pub Vec<C64>);

impl CVector {
    pub fn zeros(n: usize) -> Self {
        CVector(vec![C64::zero(); n])
    }

    pub fn from_real(xs: &[f64]) -> Self {
        CVector(xs.iter().map(|&x| re(x)).collect())
    }

    pub fn conj(&self) -> Self {
        CVector(self.0.iter().map(|x| x.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        CVector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        CVector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn add(&self, other: &CVector) -> Self {
        debug_assert_eq!(self.len(), other.len());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CVector) -> Self {
        debug_assert_eq!(self.len(), other.len());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Euclidean norm `sqrt(Σ|v_i|²)`.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }
}

impl Deref for CVector {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for CVector {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

impl From<Vec<C64>> for CVector {
    fn from(v: Vec<C64>) -> Self {
        CVector(v)
    }
}

/// Unconjugated bilinear pairing `Σ v_i w_i`.
pub fn contract(v: &[C64], w: &[C64]) -> Result<C64> {
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: w.len(),
        });
    }
    Ok(v.iter().zip(w).map(|(a, b)| a * b).sum())
}

/// Hermitian inner product `Σ conj(v_i) w_i`.
pub fn inner(v: &[C64], w: &[C64]) -> C64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    General,
}

/// Row-major n×n complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
    symmetry: Symmetry,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![C64::zero(); n * n],
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = re(1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix {
            n,
            data,
            symmetry: Symmetry::General,
        }
    }

    /// Wraps row-major entries without touching them.
    pub fn general(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(CMatrix {
            n,
            data,
            symmetry: Symmetry::General,
        })
    }

    /// Stores `(R + Rᵀ)/2`. The result is exactly symmetric.
    pub fn symmetrized(raw: &CMatrix) -> Self {
        let n = raw.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = (raw[(i, j)] + raw[(j, i)]) / 2.0;
            }
        }
        m.symmetry = Symmetry::Symmetric;
        m
    }

    /// Stores `(R + Rᴴ)/2`.
    pub fn hermitianized(raw: &CMatrix) -> Self {
        let n = raw.n;
        let mut m = CMatrix::from_fn(n, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) / 2.0);
        // diagonal of a Hermitian matrix is real
        for i in 0..n {
            m.data[i * n + i].im = 0.0;
        }
        m
    }

    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        debug_assert_eq!(u.len(), v.len());
        let mut m = CMatrix::from_fn(u.len(), |i, j| u[i] * v[j]);
        if core::ptr::eq(u, v) || u == v {
            m.symmetry = Symmetry::Symmetric;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_exactly_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut m = CMatrix::from_fn(self.n, |i, j| self[(j, i)]);
        m.symmetry = self.symmetry;
        m
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x.conj()).collect(),
            symmetry: self.symmetry,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
            symmetry: self.symmetry,
        }
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(C64, C64) -> C64) -> Self {
        debug_assert_eq!(self.n, other.n);
        let symmetry = if self.symmetry == Symmetry::Symmetric && other.symmetry == Symmetry::Symmetric {
            Symmetry::Symmetric
        } else {
            Symmetry::General
        };
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            symmetry,
        }
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &CMatrix) -> Self {
        let n = self.n;
        debug_assert_eq!(n, other.n);
        CMatrix::from_fn(n, |i, j| (0..n).map(|k| self[(i, k)] * other[(k, j)]).sum())
    }

    pub fn mul_vec(&self, v: &[C64]) -> CVector {
        debug_assert_eq!(self.n, v.len());
        CVector((0..self.n).map(|i| contract_unchecked(self.row(i), v)).collect())
    }

    /// Max row sum of moduli.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max |A·B − I|` entrywise.
    pub fn identity_residual(&self, other: &CMatrix) -> f64 {
        let p = self.mul(other);
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { re(1.0) } else { C64::zero() };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Marks the matrix symmetric after forcing exact symmetry from the
    /// upper triangle.
    pub fn into_symmetric(mut self) -> Self {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[i * n + j] = self.data[j * n + i];
            }
        }
        self.symmetry = Symmetry::Symmetric;
        self
    }
}

fn contract_unchecked(v: &[C64], w: &[C64]) -> C64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        self.symmetry = Symmetry::General;
        &mut self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LuResult {
    pub determinant: C64,
    pub inverse: CMatrix,
    /// `‖A‖∞ · ‖A⁻¹‖∞`.
    pub condition_estimate: f64,
}

/// Determinant and inverse via LU with partial pivoting.
pub fn lu_invert(a: &CMatrix) -> Result<LuResult> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let norm = a.norm_inf();
    let threshold = PIVOT_THRESHOLD * norm;
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut det = re(1.0);

    for k in 0..n {
        let (p, pivot_mod) = (k..n)
            .map(|r| (r, lu[r * n + k].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_mod <= threshold || pivot_mod == 0.0 {
            return Err(Error::SingularMatrix {
                pivot: pivot_mod,
                threshold,
            });
        }
        if p != k {
            for col in 0..n {
                lu.swap(k * n + col, p * n + col);
            }
            perm.swap(k, p);
            det = -det;
        }
        let pivot = lu[k * n + k];
        det *= pivot;
        for r in k + 1..n {
            let factor = lu[r * n + k] / pivot;
            lu[r * n + k] = factor;
            for col in k + 1..n {
                let u = lu[k * n + col];
                lu[r * n + col] -= factor * u;
            }
        }
    }

    // Solve LU x = P e_j for each column j.
    let mut inv = vec![C64::zero(); n * n];
    let mut col = vec![C64::zero(); n];
    for j in 0..n {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = if perm[i] == j { re(1.0) } else { C64::zero() };
        }
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= lu[i * n + k] * col[k];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= lu[i * n + k] * col[k];
            }
            col[i] = s / lu[i * n + i];
        }
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    let mut inverse = CMatrix::general(n, inv)?;
    if a.symmetry() == Symmetry::Symmetric {
        inverse = CMatrix::symmetrized(&inverse);
    }
    let condition_estimate = norm * inverse.norm_inf();
    Ok(LuResult {
        determinant: det,
        inverse,
        condition_estimate,
    })
}

/// Relative distance between two complex numbers, `|a − b| / max(|b|, tiny)`.
pub fn crel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `max |A − B| / max(‖B‖max, tiny)`.
pub fn mat_rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}
