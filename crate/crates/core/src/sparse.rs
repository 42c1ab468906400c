//! Compressed sparse row storage for complex square matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex matrix in CSR form with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable sort: duplicates are summed in insertion order, so element-wise
        // symmetric contributions produce bitwise symmetric matrices.
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Largest `|A_ij - A_ji|` over the stored pattern.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).norm());
            }
        }
        worst
    }

    /// Replaces rows and columns flagged in `mask` by identity rows/columns.
    pub fn eliminate(&mut self, mask: &[bool]) {
        for i in 0..self.n {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            for k in r {
                let j = self.col_idx[k];
                if mask[i] || mask[j] {
                    self.values[k] = if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
            }
        }
    }

    /// Dense copy, row-major. Meant for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Symmetrised adjacency (without the diagonal) of the sparsity pattern.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for &j in self.row(i).0 {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

/// Euclidean norm of a complex vector.
pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖b − A x‖ / ‖b‖`.
pub fn relative_residual(a: &CsrMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = a.mul(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (q - p).norm_sqr()).sum::<f64>().sqrt();
    let nb = norm(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// `‖x − y‖ / ‖y‖`.
pub fn relative_difference(x: &[Complex64], y: &[Complex64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} vs {}", x.len(), y.len())));
    }
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(d / norm(y).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, c(1.0, 0.0));
        b.add(1, 0, c(0.0, 2.0));
        b.add(0, 0, c(2.0, 1.0));
        b.add(0, 1, c(0.0, 2.0));
        let m = b.build();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), c(3.0, 1.0));
        assert_eq!(m.get(1, 1), c(0.0, 0.0));
        assert_eq!(m.symmetry_defect(), 0.0);
        assert_eq!(m.mul(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(3.0, 3.0), c(0.0, 2.0)]);
    }

    #[test]
    fn elimination_keeps_symmetry() {
        let mut b = TripletBuilder::new(3);
        for i in 0..3 {
            for j in 0..3 {
                b.add(i, j, c((i + j) as f64, 1.0));
            }
        }
        let mut m = b.build();
        m.eliminate(&[false, true, false]);
        assert_eq!(m.get(1, 1), c(1.0, 0.0));
        assert_eq!(m.get(0, 1), c(0.0, 0.0));
        assert_eq!(m.get(1, 2), c(0.0, 0.0));
        assert_eq!(m.symmetry_defect(), 0.0);
    }
}
