//! Sparse direct solver: reverse Cuthill-McKee reordering followed by a
//! banded LU factorisation with partial pivoting.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[old] = new`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let bfs_levels = |start: usize, seen: &[bool]| -> (Vec<usize>, usize) {
        // Returns (last level nodes, depth) within the component of `start`.
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        level[start] = 0;
        q.push_back(start);
        let mut depth = 0;
        while let Some(v) = q.pop_front() {
            depth = depth.max(level[v]);
            for &w in &adj[v] {
                if level[w] == usize::MAX && !seen[w] {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        let last = (0..n).filter(|&v| level[v] == depth).collect();
        (last, depth)
    };

    while order.len() < n {
        let seed = (0..n).find(|&v| !visited[v]).unwrap();
        // Pseudo-peripheral start node.
        let mut start = seed;
        let (mut last, mut depth) = bfs_levels(start, &visited);
        loop {
            let cand = *last.iter().min_by_key(|&&v| adj[v].len()).unwrap();
            let (l2, d2) = bfs_levels(cand, &visited);
            if d2 > depth {
                start = cand;
                last = l2;
                depth = d2;
            } else {
                break;
            }
        }
        let first = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = first;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    let mut perm = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    perm
}

/// Banded LU with partial pivoting (row interchanges recorded per step, the
/// same scheme as LAPACK `gbtrf`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Factors `a` (already ordered) using its actual bandwidth.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..n {
            for &j in a.row(i).0 {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![Complex64::new(0.0, 0.0); n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = lu.idx(i, j);
                lu.band[k] = v;
            }
        }
        let scale = lu.band.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.band[lu.idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = lu.band[lu.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best <= f64::EPSILON * 1e-6 * scale {
                return Err(Error::Singular(format!("zero pivot at step {k}")));
            }
            lu.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a1, a2) = (lu.idx(k, j), lu.idx(p, j));
                    lu.band.swap(a1, a2);
                }
            }
            let pivot = lu.band[lu.idx(k, k)];
            let inv = 1.0 / pivot;
            for i in k + 1..=last_row {
                let ik = lu.idx(i, k);
                let l = lu.band[ik] * inv;
                lu.band[ik] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row_k = lu.idx(k, k + 1);
                let row_i = lu.idx(i, k + 1);
                let len = last_col - k;
                // Row i is stored after row k, and the two windows never overlap.
                let (lo, hi) = lu.band.split_at_mut(row_i);
                let src = &lo[row_k..row_k + len];
                for (d, s) in hi[..len].iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                b[i] -= self.band[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last = (k + self.kl + self.ku).min(n - 1);
            let base = self.idx(k, k);
            let mut s = b[k];
            for (off, j) in (k + 1..=last).enumerate() {
                s -= self.band[base + 1 + off] * b[j];
            }
            b[k] = s / self.band[base];
        }
    }
}

/// RCM-ordered banded LU of a sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseLu {
    perm: Vec<usize>,
    lu: BandedLu,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(&a.adjacency());
        let mut b = crate::sparse::TripletBuilder::with_capacity(a.dim(), a.nnz());
        for i in 0..a.dim() {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                b.add(perm[i], perm[j], v);
            }
        }
        let lu = BandedLu::factor(&b.build())?;
        Ok(Self { perm, lu })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        self.lu.bandwidth()
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); rhs.len()];
        for (i, &v) in rhs.iter().enumerate() {
            y[self.perm[i]] = v;
        }
        self.lu.solve_in_place(&mut y);
        self.perm.iter().map(|&p| y[p]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{relative_residual, TripletBuilder};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_path_bandwidth() {
        // A path graph labelled in a scrambled order.
        let labels = [5, 2, 7, 0, 3, 6, 1, 4];
        let mut adj = vec![Vec::new(); 8];
        for w in labels.windows(2) {
            adj[w[0]].push(w[1]);
            adj[w[1]].push(w[0]);
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        for w in labels.windows(2) {
            assert_eq!(perm[w[0]].abs_diff(perm[w[1]]), 1);
        }
    }

    #[test]
    fn needs_pivoting() {
        // Zero leading diagonal forces a row interchange.
        let mut b = TripletBuilder::new(3);
        b.add(0, 1, c(1.0, 0.0));
        b.add(1, 0, c(1.0, 0.0));
        b.add(1, 1, c(2.0, 1.0));
        b.add(1, 2, c(0.5, 0.0));
        b.add(2, 1, c(0.5, 0.0));
        b.add(2, 2, c(0.0, 3.0));
        let a = b.build();
        let lu = SparseLu::factor(&a).unwrap();
        let rhs = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0)];
        let x = lu.solve(&rhs);
        assert!(relative_residual(&a, &x, &rhs) < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, c(1.0, 0.0));
        b.add(0, 1, c(1.0, 0.0));
        b.add(1, 0, c(1.0, 0.0));
        b.add(1, 1, c(1.0, 0.0));
        assert!(matches!(SparseLu::factor(&b.build()), Err(Error::Singular(_))));
    }
}
