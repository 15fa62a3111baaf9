//! Dense LU factorization with partial pivoting, real or complex.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
{
    const ZERO: Self;
    const ONE: Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).fold(T::ZERO, |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).modulus() <= tol))
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Elimination broke down on `row` (a row index of the original matrix).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub row: usize,
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    swaps: usize,
    /// Ratio of the largest to the smallest pivot magnitude.
    pub condition: f64,
}

/// Factors `m` in place. Fails when a pivot is exactly zero or when the pivot
/// ratio exceeds `cond_limit`.
pub fn lu_factor<T: Scalar>(mut m: DenseMatrix<T>, cond_limit: Option<f64>) -> Result<LuFactors<T>, Singular> {
    let n = m.n;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    let mut pmin_row = 0;
    for k in 0..n {
        let (mut best, mut best_mag) = (k, m[(k, k)].modulus());
        for i in k + 1..n {
            let mag = m[(i, k)].modulus();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 || !best_mag.is_finite() {
            return Err(Singular {
                row: perm[k],
                condition: f64::INFINITY,
            });
        }
        if best != k {
            for j in 0..n {
                m.data.swap(k * n + j, best * n + j);
            }
            perm.swap(k, best);
            swaps += 1;
        }
        pmax = pmax.max(best_mag);
        if best_mag < pmin {
            pmin = best_mag;
            pmin_row = perm[k];
        }
        let pivot = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / pivot;
            if f == T::ZERO {
                continue;
            }
            m[(i, k)] = f;
            for j in k + 1..n {
                let u = m[(k, j)];
                m[(i, j)] -= f * u;
            }
        }
    }
    let condition = if n == 0 { 1.0 } else { pmax / pmin };
    if let Some(limit) = cond_limit {
        if condition > limit {
            return Err(Singular {
                row: pmin_row,
                condition,
            });
        }
    }
    Ok(LuFactors {
        lu: m,
        perm,
        swaps,
        condition,
    })
}

impl<T: Scalar> LuFactors<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

impl LuFactors<f64> {
    /// Sign of the determinant of the factored matrix.
    pub fn det_sign(&self) -> f64 {
        let mut sign = if self.swaps.is_multiple_of(2) { 1.0 } else { -1.0 };
        for i in 0..self.lu.n {
            if self.lu[(i, i)] < 0.0 {
                sign = -sign;
            }
        }
        sign
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_real_system() {
        let mut a = DenseMatrix::<f64>::zeros(3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 4.0]];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let lu = lu_factor(a, Some(1e12)).unwrap();
        for (x, t) in lu.solve(&b).iter().zip(x_true) {
            assert!((x - t).abs() < 1e-14);
        }
    }

    #[test]
    fn solves_complex_system() {
        let j = Complex64::i();
        let mut a = DenseMatrix::zeros(2);
        a[(0, 0)] = 1.0 + j;
        a[(0, 1)] = Complex64::new(2.0, 0.0);
        a[(1, 0)] = -j;
        a[(1, 1)] = 3.0 - 2.0 * j;
        let x_true = vec![Complex64::new(0.3, -1.0), Complex64::new(-2.0, 0.25)];
        let b = a.mul_vec(&x_true);
        let x = lu_factor(a, None).unwrap().solve(&b);
        for (x, t) in x.iter().zip(&x_true) {
            assert!((x - t).norm() < 1e-14);
        }
    }

    #[test]
    fn determinant_sign() {
        let mut a = DenseMatrix::<f64>::zeros(2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        assert_eq!(lu_factor(a.clone(), None).unwrap().det_sign(), -1.0);
        a[(0, 0)] = 3.0;
        a[(1, 1)] = 2.0;
        assert_eq!(lu_factor(a, None).unwrap().det_sign(), 1.0);
    }

    #[test]
    fn reports_singular_row() {
        let mut a = DenseMatrix::<f64>::zeros(3);
        a[(0, 0)] = 1.0;
        a[(2, 2)] = 1.0;
        let err = lu_factor(a, Some(1e12)).unwrap_err();
        assert_eq!(err.row, 1);
        let mut b = DenseMatrix::<f64>::identity(2);
        b[(1, 1)] = 1e-14;
        assert!(lu_factor(b.clone(), Some(1e12)).is_err());
        assert!(lu_factor(b, None).is_ok());
    }
}
