//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Objective value and gradient at one point, plus the two cost terms for
/// the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub fit: f64,
    pub reg: f64,
}

pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluated>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<Evaluated>,
{
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluated> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Stop once the fit term drops below this fraction of its initial value.
    pub fit_reduction: Option<f64>,
    /// Largest component of the very first step; later steps start at 1.
    pub initial_step: Option<f64>,
    /// Stop when the gradient norm reaches this value.
    pub gradient_tol: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_evals: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 60,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            fit_reduction: Some(1e-2),
            initial_step: None,
            gradient_tol: 0.0,
            max_line_evals: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub value: f64,
    pub fit: f64,
    pub reg: f64,
    pub grad_norm: f64,
    /// Euclidean length of the accepted step.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    FitReduced,
    GradientTolerance,
    LineSearchFailed,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxIterations => "max-iterations",
            StopReason::FitReduced => "fit-reduced",
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::LineSearchFailed => "line-search-failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    /// State before the first step (iteration 0).
    pub initial: TraceRow,
    /// One row per accepted step.
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    alpha: f64,
    x: Vec<f64>,
    eval: Evaluated,
    slope: f64,
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, or the
/// midpoint when that is unusable.
fn cubic_step(a: &Point, b: &Point) -> f64 {
    let (fa, fb) = (a.eval.value, b.eval.value);
    let d1 = a.slope + b.slope - 3.0 * (fa - fb) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    let mid = 0.5 * (a.alpha + b.alpha);
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    let (lo, hi) = (a.alpha.min(b.alpha), a.alpha.max(b.alpha));
    let guard = 1e-3 * (hi - lo);
    if t.is_finite() && t > lo + guard && t < hi - guard {
        t
    } else {
        mid
    }
}

struct LineSearch<'a, O: Objective> {
    obj: &'a mut O,
    x0: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    d0: f64,
    opts: &'a LbfgsOptions,
    project: &'a dyn Fn(&mut [f64]),
    evals: usize,
    /// Lowest point satisfying sufficient decrease, kept as a fallback.
    best: Option<Point>,
}

impl<O: Objective> LineSearch<'_, O> {
    fn eval(&mut self, alpha: f64) -> Result<Point> {
        let mut x: Vec<f64> = self.x0.iter().zip(self.dir).map(|(a, d)| a + alpha * d).collect();
        (self.project)(&mut x);
        let eval = self.obj.evaluate(&x)?;
        self.evals += 1;
        let slope = dot(&eval.gradient, self.dir);
        let p = Point { alpha, x, eval, slope };
        if self.armijo(&p) && self.best.as_ref().is_none_or(|b| p.eval.value < b.eval.value) {
            self.best = Some(Point {
                alpha: p.alpha,
                x: p.x.clone(),
                eval: p.eval.clone(),
                slope: p.slope,
            });
        }
        Ok(p)
    }

    fn armijo(&self, p: &Point) -> bool {
        p.eval.value.is_finite() && p.eval.value <= self.f0 + self.opts.c1 * p.alpha * self.d0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.opts.c2 * self.d0
    }

    fn budget_left(&self) -> bool {
        self.evals < self.opts.max_line_evals
    }

    /// Nocedal and Wright, algorithms 3.5 and 3.6.
    fn run(&mut self, alpha1: f64) -> Result<Option<Point>> {
        let mut prev = Point {
            alpha: 0.0,
            x: self.x0.to_vec(),
            eval: Evaluated {
                value: self.f0,
                gradient: Vec::new(),
                fit: 0.0,
                reg: 0.0,
            },
            slope: self.d0,
        };
        let mut alpha = alpha1;
        let mut first = true;
        while self.budget_left() {
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || (!first && cur.eval.value >= prev.eval.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            alpha = 2.0 * cur.alpha;
            prev = cur;
        }
        Ok(self.best.take())
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Option<Point>> {
        while self.budget_left() {
            let alpha = cubic_step(&lo, &hi);
            if (alpha - lo.alpha).abs() <= 1e-14 * alpha.abs().max(1e-300) {
                break;
            }
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || cur.eval.value >= lo.eval.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(Some(cur));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(self.best.take())
    }
}

/// Minimizes `obj` from `x0`. `project` is applied to every trial point.
pub fn lbfgs<O: Objective>(
    obj: &mut O,
    x0: &[f64],
    opts: &LbfgsOptions,
    project: &dyn Fn(&mut [f64]),
) -> Result<LbfgsResult> {
    if opts.memory == 0 {
        return Err(Error::InvalidArgument("L-BFGS memory must be positive".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x);
    let mut cur = obj.evaluate(&x)?;
    let mut evaluations = 1;
    if !cur.value.is_finite() {
        return Err(Error::Optimization("objective is not finite at the start point".into()));
    }
    let initial = TraceRow {
        iteration: 0,
        value: cur.value,
        fit: cur.fit,
        reg: cur.reg,
        grad_norm: norm(&cur.gradient),
        step: 0.0,
    };
    let fit0 = cur.fit;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIterations;

    for it in 1..=opts.max_iters {
        let gnorm = norm(&cur.gradient);
        if gnorm <= opts.gradient_tol || gnorm == 0.0 {
            stop = StopReason::GradientTolerance;
            break;
        }
        // Two-loop recursion.
        let mut q = cur.gradient.clone();
        let mut coef = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            coef.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(coef.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut d0 = dot(&cur.gradient, &dir);
        if !(d0 < 0.0) {
            pairs.clear();
            dir = cur.gradient.iter().map(|v| -v).collect();
            d0 = -gnorm * gnorm;
        }
        let alpha1 = if pairs.is_empty() {
            match opts.initial_step {
                Some(m) => m / dir.iter().fold(0.0f64, |a, v| a.max(v.abs())),
                None => 1.0 / gnorm,
            }
        } else {
            1.0
        };

        let mut ls = LineSearch {
            obj: &mut *obj,
            x0: &x,
            dir: &dir,
            f0: cur.value,
            d0,
            opts,
            project,
            evals: 0,
            best: None,
        };
        let found = ls.run(alpha1)?;
        evaluations += ls.evals;
        let Some(next) = found else {
            if trace.is_empty() {
                return Err(Error::Optimization(format!(
                    "line search failed before the first step (J = {:.6e}, |g| = {gnorm:.3e}, directional derivative {d0:.3e}, {} evaluations)",
                    cur.value, evaluations
                )));
            }
            stop = StopReason::LineSearchFailed;
            break;
        };

        let s: Vec<f64> = next.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next
            .eval
            .gradient
            .iter()
            .zip(&cur.gradient)
            .map(|(a, b)| a - b)
            .collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        x = next.x;
        cur = next.eval;
        trace.push(TraceRow {
            iteration: it,
            value: cur.value,
            fit: cur.fit,
            reg: cur.reg,
            grad_norm: norm(&cur.gradient),
            step: norm(&s),
        });
        log::info!(
            "iteration {it}: J = {:.6e}, fit = {:.6e}, R = {:.6e}",
            cur.value,
            cur.fit,
            cur.reg
        );
        if let Some(f) = opts.fit_reduction {
            if cur.fit <= f * fit0 {
                stop = StopReason::FitReduced;
                break;
            }
        }
    }
    Ok(LbfgsResult {
        x,
        initial,
        trace,
        stop,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(h: Vec<Vec<f64>>, b: Vec<f64>) -> impl FnMut(&[f64]) -> Result<Evaluated> {
        move |x: &[f64]| {
            let hx: Vec<f64> = h.iter().map(|row| dot(row, x)).collect();
            let value = 0.5 * dot(x, &hx) - dot(&b, x);
            let gradient: Vec<f64> = hx.iter().zip(&b).map(|(a, c)| a - c).collect();
            Ok(Evaluated {
                value,
                gradient,
                fit: value,
                reg: 0.0,
            })
        }
    }

    #[test]
    fn quadratic_terminates_within_dimension_steps() {
        // SPD matrix with distinct eigenvalues.
        let n = 6;
        let h: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            2.0 + i as f64
                        } else {
                            0.3 / (1.0 + (i + j) as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..n).map(|i| 1.0 - 0.2 * i as f64).collect();
        let mut f = quadratic(h, b);
        let opts = LbfgsOptions {
            c2: 1e-9,
            fit_reduction: None,
            gradient_tol: 1e-9,
            max_line_evals: 60,
            ..Default::default()
        };
        let res = lbfgs(&mut f, &vec![0.0; n], &opts, &|_| {}).unwrap();
        assert_eq!(res.stop, StopReason::GradientTolerance);
        assert!(res.trace.len() <= n, "{} iterations", res.trace.len());
    }

    #[test]
    fn values_never_increase() {
        let mut rosen = |x: &[f64]| -> Result<Evaluated> {
            let (a, b) = (x[0], x[1]);
            let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let gradient = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok(Evaluated {
                value,
                gradient,
                fit: value,
                reg: 0.0,
            })
        };
        let opts = LbfgsOptions {
            max_iters: 200,
            fit_reduction: None,
            gradient_tol: 1e-10,
            ..Default::default()
        };
        let res = lbfgs(&mut rosen, &[-1.2, 1.0], &opts, &|_| {}).unwrap();
        let mut last = res.initial.value;
        for row in &res.trace {
            assert!(row.value <= last);
            last = row.value;
        }
        assert!((res.x[0] - 1.0).abs() < 1e-6 && (res.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn failure_before_first_step_is_an_error() {
        // A "gradient" pointing the wrong way makes every step an ascent.
        let mut bad = |x: &[f64]| -> Result<Evaluated> {
            Ok(Evaluated {
                value: x[0],
                gradient: vec![-1.0],
                fit: x[0],
                reg: 0.0,
            })
        };
        let err = lbfgs(&mut bad, &[0.0], &LbfgsOptions::default(), &|_| {}).unwrap_err();
        assert!(matches!(err, Error::Optimization(_)));
    }
}
