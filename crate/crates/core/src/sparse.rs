//! Symmetric sparse matrices in compressed-row form.
//!
//! Only the upper triangle is accumulated; the lower triangle is a mirror, so
//! symmetry holds bit for bit.

use std::collections::BTreeMap;
use std::io::{self, Write};

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Accumulates symmetric contributions in a deterministic order.
#[derive(Debug, Clone)]
pub struct SymBuilder {
    n: usize,
    upper: BTreeMap<(usize, usize), f64>,
}

impl SymBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            upper: BTreeMap::new(),
        }
    }

    /// Adds `value` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.n && j < self.n, "entry ({i}, {j}) outside {0}x{0}", self.n);
        let key = if i <= j { (i, j) } else { (j, i) };
        *self.upper.entry(key).or_insert(0.0) += value;
    }

    /// Registers a structural entry without changing its value.
    pub fn touch(&mut self, i: usize, j: usize) {
        self.add(i, j, 0.0);
    }

    pub fn build(self) -> SymMatrix {
        let n = self.n;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &v) in &self.upper {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SymMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// A square symmetric matrix in CSR form (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymBuilder::new(n).build()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// True if every stored value is zero.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True if every nonzero entry of `self` is a stored entry of `other`.
    pub fn pattern_within(&self, other: &SymMatrix) -> bool {
        self.n == other.n
            && (0..self.n).all(|i| {
                self.row(i).all(|(j, v)| {
                    v == 0.0 || {
                        let r = other.row_ptr[i]..other.row_ptr[i + 1];
                        other.col_idx[r].binary_search(&j).is_ok()
                    }
                })
            })
    }

    /// Same dimension and the same nonzero pattern.
    pub fn same_pattern(&self, other: &SymMatrix) -> bool {
        self.pattern_within(other) && other.pattern_within(self)
    }

    /// Largest `|self_ij - other_ij|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut max: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                max = max.max((v - other.get(i, j)).abs());
            }
            for (j, v) in other.row(i) {
                max = max.max((v - self.get(i, j)).abs());
            }
        }
        max
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += alpha A x`.
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `alpha A + beta B` on the union pattern.
    pub fn lin_comb(alpha: f64, a: &SymMatrix, beta: f64, b: &SymMatrix) -> SymMatrix {
        assert_eq!(a.n, b.n);
        let mut builder = SymBuilder::new(a.n);
        for (m, s) in [(a, alpha), (b, beta)] {
            for i in 0..m.n {
                for (j, v) in m.row(i).filter(|&(j, _)| j >= i) {
                    builder.add(i, j, s * v);
                }
            }
        }
        builder.build()
    }

    /// Symmetric permutation: entry `(i, j)` moves to `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        assert_eq!(perm.len(), self.n);
        let mut builder = SymBuilder::new(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i).filter(|&(j, _)| j >= i) {
                builder.add(perm[i], perm[j], v);
            }
        }
        builder.build()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let triplets: Vec<_> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .expect("valid sparse pattern")
    }

    /// MatrixMarket coordinate format, symmetric storage (lower triangle).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        let lower: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v)))
            .collect();
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SymMatrix {
        let mut b = SymBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add(i + 1, i, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn builder_mirrors_exactly() {
        let mut b = SymBuilder::new(3);
        b.add(0, 1, 0.1);
        b.add(1, 0, 0.2);
        b.add(2, 2, 1.0);
        let m = b.build();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert_eq!(m.get(0, 1), 0.1 + 0.2);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let m = tridiag(4);
        let x = [1.0, -2.0, 0.5, 3.0];
        let d = m.to_dense();
        let y = m.mul_vec(&x);
        for i in 0..4 {
            let yd: f64 = (0..4).map(|j| d[(i, j)] * x[j]).sum();
            assert_eq!(y[i], yd);
        }
        let q: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert_eq!(m.quad_form(&x), q);
    }

    #[test]
    fn lin_comb_and_pattern() {
        let a = tridiag(3);
        let z = SymMatrix::zeros(3);
        assert!(z.is_zero());
        assert!(z.pattern_within(&a));
        let c = SymMatrix::lin_comb(2.0, &a, 1.0, &z);
        assert_eq!(c.get(1, 1), 4.0);
        assert!(c.pattern_within(&a) && a.pattern_within(&c));
    }

    #[test]
    fn permutation_round_trip() {
        let mut b = SymBuilder::new(3);
        b.add(0, 0, 1.0);
        b.add(0, 2, 5.0);
        b.add(1, 1, 2.0);
        let m = b.build();
        let p = m.permuted(&[2, 0, 1]);
        assert_eq!(p.get(2, 1), 5.0);
        assert_eq!(p.get(0, 0), 2.0);
        assert_eq!(p.permuted(&[1, 2, 0]), m);
    }

    #[test]
    fn matrix_market_lists_lower_triangle() {
        let mut out = Vec::new();
        tridiag(2).write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], "2 2 3");
        assert_eq!(lines.len(), 5);
    }
}
