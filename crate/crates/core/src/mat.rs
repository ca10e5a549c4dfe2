//! Small dense matrices with a fixed, platform-independent evaluation order.
//!
//! Graph adjacencies and layer weights at this scale (V = 25 joints) never
//! justify a BLAS dependency; a naive row-major multiply keeps results
//! byte-reproducible across platforms.

use std::ops::{Index, IndexMut};

use crate::numfmt::format_exact;
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy> Mat<E> {
    pub fn filled(rows: usize, cols: usize, value: E) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from a flat row-major buffer. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match dims");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[E] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Apply `f` to every element, yielding a new matrix.
    pub fn map<F, U>(&self, f: F) -> Mat<U>
    where
        F: Fn(E) -> U,
        U: Copy,
    {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&e| f(e)).collect(),
        }
    }
}

impl<E> Index<(usize, usize)> for Mat<E> {
    type Output = E;

    fn index(&self, (r, c): (usize, usize)) -> &E {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<E> IndexMut<(usize, usize)> for Mat<E> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut E {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mat<u8> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    /// Widen a binary matrix into the compute scalar type.
    pub fn to_real<T: Scalar>(&self) -> Mat<T> {
        self.map(|e| T::from_u8(e).expect("u8 fits any float"))
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&e| e != 0).count()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl<T: Scalar> Mat<T> {
    pub fn zeros_real(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    /// `self * rhs`, accumulated row by row in index order.
    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "matmul dim mismatch");
        let mut out = Mat::zeros_real(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, rhs: &Mat<T>) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += *b;
        }
    }

    /// Largest absolute elementwise difference; matrices must share dims.
    pub fn max_abs_diff(&self, rhs: &Mat<T>) -> T {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Render a square matrix as the plain-text dump format: first line the
/// dimension `V`, then `V` rows of `V` space-separated numbers.
pub fn dump_square<T: Scalar>(m: &Mat<T>) -> String {
    assert!(m.is_square(), "dump_square wants a square matrix");
    let mut out = String::new();
    out.push_str(&m.rows().to_string());
    out.push('\n');
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|&v| format_exact(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parse the [`dump_square`] format back into a matrix.
pub fn parse_square<T: Scalar>(text: &str) -> Option<Mat<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let n: usize = lines.next()?.trim().parse().ok()?;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n {
        let line = lines.next()?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            data.push(tok.parse::<T>().ok()?);
            count += 1;
        }
        if count != n {
            return None;
        }
    }
    Some(Mat::from_vec(n, n, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_hand_case() {
        let a = Mat::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn square_dump_roundtrip() {
        let m = Mat::from_vec(2, 2, vec![0.5f32, 1.0, -2.25, 0.0]);
        let text = dump_square(&m);
        assert_eq!(text, "2\n0.5 1\n-2.25 0\n");
        let back: Mat<f32> = parse_square(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn identity_is_symmetric() {
        assert!(Mat::identity(4).is_symmetric());
        let mut m = Mat::zeros(3, 3);
        m[(0, 2)] = 1;
        assert!(!m.is_symmetric());
    }
}
