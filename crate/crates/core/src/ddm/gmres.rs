use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::{norm, CsrMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub maxiter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            restart: 200,
            maxiter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Relative residual history, starting at iteration 0.
    pub residuals: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn residual(a: &CsrMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let ax = a.mul(x);
    b.iter().zip(ax).map(|(p, q)| p - q).collect()
}

/// Right-preconditioned restarted GMRES. Converged iterates are checked
/// against the true residual, which must be within `10·tol`.
pub fn gmres<P>(a: &CsrMatrix, b: &[Complex64], precond: P, opts: &GmresOptions) -> Result<GmresOutcome>
where
    P: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Dimension(format!("rhs {} vs system {n}", b.len())));
    }
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            residuals: vec![0.0],
        });
    }
    let m = opts.restart.max(1);
    let mut total = 0;
    let mut history = Vec::new();
    loop {
        let r = residual(a, &x, b);
        let beta = norm(&r);
        let rel = beta / bnorm;
        if history.is_empty() {
            history.push(rel);
        }
        if rel <= opts.tol {
            return Ok(GmresOutcome {
                x,
                iterations: total,
                residuals: history,
            });
        }
        if total >= opts.maxiter {
            return Err(Error::NonConvergence {
                iterations: total,
                residual: rel,
                trace: history,
            });
        }

        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut zs: Vec<Vec<Complex64>> = Vec::new();
        let mut h: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut est = rel;
        for k in 0..m {
            let z = precond(&v[k]);
            let mut w = a.mul(&z);
            zs.push(z);
            let mut col = vec![ZERO; k + 2];
            // Modified Gram-Schmidt with one reorthogonalisation pass.
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(vi, &w);
                    col[i] += hij;
                    for (wl, vl) in w.iter_mut().zip(vi) {
                        *wl -= hij * vl;
                    }
                }
            }
            let hn = norm(&w);
            col[k + 1] = Complex64::new(hn, 0.0);
            for i in 0..k {
                let (p, q) = (col[i], col[i + 1]);
                col[i] = cs[i] * p + sn[i] * q;
                col[i + 1] = -sn[i].conj() * p + cs[i] * q;
            }
            let (p, q) = (col[k], col[k + 1]);
            let d = (p.norm_sqr() + q.norm_sqr()).sqrt();
            let (c, s) = if p.norm() == 0.0 {
                (0.0, q.conj() / q.norm())
            } else {
                (p.norm() / d, (p / p.norm()) * q.conj() / d)
            };
            col[k] = c * p + s * q;
            col[k + 1] = ZERO;
            cs.push(c);
            sn.push(s);
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s.conj() * gk);
            h.push(col);
            total += 1;
            est = g[k + 1].norm() / bnorm;
            history.push(est);
            if hn == 0.0 || est <= opts.tol || total >= opts.maxiter {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        // Back substitution on the triangular least-squares system.
        let kk = h.len();
        let mut y = vec![ZERO; kk];
        for i in (0..kk).rev() {
            let mut s = g[i];
            for j in i + 1..kk {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (zj, yj) in zs.iter().zip(&y) {
            for (xl, zl) in x.iter_mut().zip(zj) {
                *xl += yj * zl;
            }
        }
        if est <= opts.tol {
            let true_rel = norm(&residual(a, &x, b)) / bnorm;
            if true_rel <= 10.0 * opts.tol {
                return Ok(GmresOutcome {
                    x,
                    iterations: total,
                    residuals: history,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    #[test]
    fn identity_converges_in_one_step() {
        let a = CsrMatrix::identity(5);
        let b: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let out = gmres(&a, &b, |r| r.to_vec(), &GmresOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.residuals.last().unwrap() <= &1e-10);
    }

    #[test]
    fn maxiter_reports_trace() {
        let n = 30;
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, Complex64::new(2.0, 0.1));
            if i + 1 < n {
                t.add(i, i + 1, Complex64::new(-1.0, 0.0));
                t.add(i + 1, i, Complex64::new(-1.0, 0.0));
            }
        }
        let a = t.build();
        let b = vec![Complex64::new(1.0, 0.0); n];
        let opts = GmresOptions {
            tol: 1e-12,
            restart: 3,
            maxiter: 4,
        };
        match gmres(&a, &b, |r| r.to_vec(), &opts) {
            Err(Error::NonConvergence { iterations, trace, .. }) => {
                assert_eq!(iterations, 4);
                assert!(trace.len() >= 4);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
