//! Dense BFGS with an analytic-Hessian seed and a steepest-descent fallback.
//!
//! Objectives report infeasible points by returning `None` from [`Objective::value`];
//! the line search treats them as `+inf` and backtracks. This is how order-preserving
//! gap coordinates keep ions from crossing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub(crate) trait Objective {
    fn value(&self, x: &DVector<f64>) -> Option<f64>;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Convergence measure compared against the tolerance; defaults to the gradient norm.
    fn stationarity(&self, _x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        g.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct MinimizeOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Inverse of the Hessian with eigenvalues clamped positive.
fn seed_inverse(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if let Some(ch) = h.clone().cholesky() {
        return ch.inverse();
    }
    let eig = SymmetricEigen::new(h.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (top * 1e-6).max(f64::MIN_POSITIVE);
    let inv = eig.eigenvalues.map(|l| 1.0 / l.abs().max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

fn line_search(
    obj: &dyn Objective,
    x: &DVector<f64>,
    f: f64,
    g: &DVector<f64>,
    p: &DVector<f64>,
    alpha0: f64,
) -> Option<(f64, DVector<f64>, f64)> {
    let slope = g.dot(p);
    if !(slope < 0.0) {
        return None;
    }
    // Slack for rounding: near the minimum the decrease falls below f's resolution.
    let slack = 16.0 * f64::EPSILON * f.abs().max(f64::MIN_POSITIVE);
    let mut alpha = alpha0;
    for _ in 0..80 {
        let xn = x + p * alpha;
        if let Some(fn_) = obj.value(&xn) {
            if fn_.is_finite() && fn_ <= f + 1e-4 * alpha * slope + slack {
                return Some((alpha, xn, fn_));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Newton step judged by stationarity instead of energy. Close to a minimum with a
/// soft direction the energy change drops below rounding and the line search cannot
/// tell better from worse; the gradient still can.
fn newton_polish(obj: &dyn Objective, x: &DVector<f64>, g: &DVector<f64>, stat: f64) -> Option<(f64, DVector<f64>, f64)> {
    let p = -(seed_inverse(&obj.hessian(x)) * g);
    let mut alpha = 1.0;
    for _ in 0..30 {
        let xn = x + &p * alpha;
        if let Some(fn_) = obj.value(&xn).filter(|v| v.is_finite()) {
            let gn = obj.gradient(&xn);
            if obj.stationarity(&xn, &gn) < stat {
                return Some((alpha, xn, fn_));
            }
        }
        alpha *= 0.5;
    }
    None
}

pub(crate) fn minimize(obj: &dyn Objective, x0: DVector<f64>, opts: &MinimizeOptions) -> Minimum {
    let n = x0.len();
    let mut x = x0;
    let mut f = match obj.value(&x) {
        Some(v) if v.is_finite() => v,
        _ => {
            return Minimum {
                x,
                iterations: 0,
                converged: false,
            }
        }
    };
    if n == 0 {
        return Minimum { x, iterations: 0, converged: true };
    }
    let mut g = obj.gradient(&x);
    let mut stat = obj.stationarity(&x, &g);
    let mut hinv = seed_inverse(&obj.hessian(&x));
    let mut stalls = 0;

    for it in 0..opts.max_iterations {
        if stat <= opts.tolerance {
            return Minimum { x, iterations: it, converged: true };
        }
        let mut p = -(&hinv * &g);
        if g.dot(&p) >= 0.0 {
            hinv = seed_inverse(&obj.hessian(&x));
            p = -(&hinv * &g);
        }
        let step = line_search(obj, &x, f, &g, &p, 1.0).or_else(|| {
            // Fresh curvature, then plain steepest descent.
            hinv = seed_inverse(&obj.hessian(&x));
            let pn = -(&hinv * &g);
            line_search(obj, &x, f, &g, &pn, 1.0).or_else(|| {
                let sd = -&g;
                let a0 = 0.1 * x.norm().max(1.0) / g.norm();
                line_search(obj, &x, f, &g, &sd, a0)
            })
        });
        // A step inside the rounding slack must at least improve stationarity.
        let step = match step {
            Some(s) if s.2 >= f && obj.stationarity(&s.1, &obj.gradient(&s.1)) >= stat => {
                newton_polish(obj, &x, &g, stat).or(Some(s))
            }
            None => newton_polish(obj, &x, &g, stat),
            s => s,
        };
        let Some((_, xn, fn_)) = step else {
            stalls += 1;
            if stalls > 2 {
                break;
            }
            continue;
        };
        let gn = obj.gradient(&xn);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 && sy.is_finite() {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy' + hy s') + (rho^2 yHy + rho) s s'
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        x = xn;
        f = fn_;
        g = gn;
        stat = obj.stationarity(&x, &g);
        stalls = 0;
    }
    Minimum {
        x,
        iterations: opts.max_iterations,
        converged: stat <= opts.tolerance,
    }
}
