//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The objective may return a non-finite value to signal that a trial point
//! is unusable (for instance a flow that blew up); the line search then
//! shrinks the step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `max |g_i| <= grad_tol`.
    pub grad_tol: f64,
    /// Stop when the relative decrease of one step falls below this.
    pub rel_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_evals: usize,
    /// Upper bound on `max |x_new - x|` for one iteration.
    pub max_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 200,
            grad_tol: 1e-6,
            rel_tol: 1e-12,
            c1: 1e-4,
            c2: 0.9,
            max_line_evals: 30,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    GradientTolerance,
    SmallDecrease,
    MaxIterations,
    LineSearchFailed,
}

impl Status {
    pub fn converged(self) -> bool {
        matches!(self, Status::GradientTolerance | Status::SmallDecrease)
    }
}

/// One accepted iterate. Entry 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub status: Status,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
}

impl LbfgsResult {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

struct Point {
    a: f64,
    f: f64,
    d: f64,
    g: Vec<f64>,
}

/// Outcome of a line search: the accepted point, or the best
/// sufficient-decrease point found if the curvature condition never held.
enum Search {
    Wolfe(Point),
    Partial(Point),
    Failed,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    d0: f64,
    c1: f64,
    c2: f64,
    evals: usize,
    budget: usize,
    a_max: f64,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> LineSearch<'_, F> {
    fn eval(&mut self, a: f64) -> Point {
        self.evals += 1;
        let (f, g) = (self.f)(&axpy(self.x, a, self.dir));
        if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            let d = dot(&g, self.dir);
            Point { a, f, d, g }
        } else {
            Point {
                a,
                f: f64::INFINITY,
                d: f64::NAN,
                g,
            }
        }
    }

    fn armijo(&self, p: &Point) -> bool {
        p.f <= self.f0 + self.c1 * p.a * self.d0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.d.abs() <= -self.c2 * self.d0
    }

    fn run(&mut self, a_init: f64) -> Search {
        let mut prev = Point {
            a: 0.0,
            f: self.f0,
            d: self.d0,
            g: vec![],
        };
        let mut a = a_init;
        let mut first = true;
        while self.evals < self.budget {
            let p = self.eval(a);
            if !self.armijo(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Search::Wolfe(p);
            }
            if p.d >= 0.0 {
                return self.zoom(p, prev);
            }
            if a >= self.a_max {
                return Search::Partial(p);
            }
            a = (2.0 * a).min(self.a_max);
            prev = p;
            first = false;
        }
        if prev.a > 0.0 {
            Search::Partial(prev)
        } else {
            Search::Failed
        }
    }

    /// `lo` satisfies sufficient decrease and has the lower value; the
    /// minimiser lies between `lo.a` and `hi.a`.
    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Search {
        while self.evals < self.budget {
            let a = trial_step(&lo, &hi);
            let p = self.eval(a);
            if !self.armijo(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Search::Wolfe(p);
                }
                if p.d * (hi.a - lo.a) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
            if (hi.a - lo.a).abs() <= 1e-16 * lo.a.abs().max(1.0) {
                break;
            }
        }
        if lo.a > 0.0 {
            Search::Partial(lo)
        } else {
            Search::Failed
        }
    }
}

/// Cubic interpolation between two bracket ends, safeguarded to the inner
/// 80% of the bracket; bisection when `hi` is unusable.
fn trial_step(lo: &Point, hi: &Point) -> f64 {
    let (a0, a1) = (lo.a.min(hi.a), lo.a.max(hi.a));
    let mid = 0.5 * (lo.a + hi.a);
    if !hi.f.is_finite() || !hi.d.is_finite() {
        return mid;
    }
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
    let disc = d1 * d1 - lo.d * hi.d;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (hi.a - lo.a).signum() * disc.sqrt();
    let a = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    let margin = 0.1 * (a1 - a0);
    if a.is_finite() && a > a0 + margin && a < a1 - margin {
        a
    } else {
        mid
    }
}

/// Minimise `f` from `x0`. `f` returns the value and gradient.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if opts.memory == 0 || !(0.0 < opts.c1 && opts.c1 < opts.c2 && opts.c2 < 1.0) || !(opts.max_step > 0.0) {
        return Err(Error::InvalidArgument(
            "need memory >= 1, 0 < c1 < c2 < 1 and max_step > 0".into(),
        ));
    }
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "objective is not finite at the starting point".into(),
        ));
    }
    if g.len() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "gradient has length {}, expected {}",
            g.len(),
            x.len()
        )));
    }
    let mut evaluations = 1;
    let mut trace = vec![TraceEntry {
        iter: 0,
        energy: fx,
        grad_norm: inf_norm(&g),
        step: 0.0,
        evaluations,
    }];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = Status::MaxIterations;

    for iter in 1..=opts.max_iter {
        if inf_norm(&g) <= opts.grad_tol {
            status = Status::GradientTolerance;
            break;
        }
        // two-loop recursion
        let mut q: Vec<f64> = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q = axpy(&q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q = axpy(&q, a - b, s);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut d0 = dot(&g, &dir);
        if !(d0 < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            d0 = -dot(&g, &g);
        }
        let a_max = opts.max_step / inf_norm(&dir);
        let a_init = if hist.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        }
        .min(a_max);

        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            dir: &dir,
            f0: fx,
            d0,
            c1: opts.c1,
            c2: opts.c2,
            evals: 0,
            budget: opts.max_line_evals,
            a_max,
        };
        let found = ls.run(a_init);
        evaluations += ls.evals;
        let p = match found {
            Search::Wolfe(p) | Search::Partial(p) => p,
            Search::Failed => {
                status = Status::LineSearchFailed;
                break;
            }
        };

        let x_new = axpy(&x, p.a, &dir);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - p.f;
        let scale = fx.abs().max(p.f.abs()).max(f64::MIN_POSITIVE);
        x = x_new;
        fx = p.f;
        g = p.g;
        trace.push(TraceEntry {
            iter,
            energy: fx,
            grad_norm: inf_norm(&g),
            step: p.a,
            evaluations,
        });
        if inf_norm(&g) <= opts.grad_tol {
            status = Status::GradientTolerance;
            break;
        }
        if decrease / scale < opts.rel_tol {
            status = Status::SmallDecrease;
            break;
        }
    }
    Ok(LbfgsResult {
        x,
        f: fx,
        g,
        status,
        trace,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges_quickly() {
        let a = [3.0, -1.0, 0.5, 2.0];
        let r = lbfgs_minimize(
            |x| {
                let d: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
                (0.5 * dot(&d, &d), d)
            },
            &[0.0; 4],
            &LbfgsOptions::default(),
        )
        .unwrap();
        assert!(r.iterations() <= 3, "{}", r.iterations());
        let err: f64 = r.x.iter().zip(&a).map(|(x, a)| (x - a).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-8);
        assert_eq!(r.status, Status::GradientTolerance);
    }

    #[test]
    fn rosenbrock() {
        let opts = LbfgsOptions {
            grad_tol: 1e-10,
            ..Default::default()
        };
        let r = lbfgs_minimize(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                (f, g)
            },
            &[-1.2, 1.0],
            &opts,
        )
        .unwrap();
        assert!(r.f < 1e-10, "f = {}", r.f);
        for w in r.trace.windows(2) {
            assert!(w[1].energy < w[0].energy);
        }
    }

    #[test]
    fn non_finite_trial_points_are_backed_off() {
        // finite only on |x| < 2; minimum at 1.5
        let r = lbfgs_minimize(
            |x| {
                if x[0].abs() >= 2.0 {
                    (f64::INFINITY, vec![0.0])
                } else {
                    (0.5 * (x[0] - 1.5).powi(2), vec![x[0] - 1.5])
                }
            },
            &[-1.9],
            &LbfgsOptions::default(),
        )
        .unwrap();
        assert!((r.x[0] - 1.5).abs() < 1e-6);
    }

    #[test]
    fn bad_start_is_an_error() {
        assert!(lbfgs_minimize(|_| (f64::NAN, vec![0.0]), &[0.0], &LbfgsOptions::default()).is_err());
    }

    #[test]
    fn start_at_minimum() {
        let r = lbfgs_minimize(|x| (x[0] * x[0], vec![2.0 * x[0]]), &[0.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.status, Status::GradientTolerance);
    }
}
