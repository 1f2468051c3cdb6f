//! Independent oracles shared by the integration tests. Nothing here calls the library's
//! optimizers: energies are re-derived from the pair formula and minima are found by
//! exhaustive grids plus a derivative-free compass search.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

pub const E_CHARGE: f64 = 1.602_176_634e-19;
pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const KB: f64 = 1.380_649e-23;

/// `V = -e sum(Ex x + Ey y) + sum_{i<j} e^2 / (4 pi eps0 d |sin((ti - tj)/2)|)` with
/// `(x, y) = (d/2)(sin t, cos t)`.
pub fn pair_energy(theta: &[f64], d: f64, ex: f64, ey: f64) -> f64 {
    let k = E_CHARGE * E_CHARGE / (4.0 * PI * EPS0 * d);
    let mut v = 0.0;
    for (i, a) in theta.iter().enumerate() {
        v -= E_CHARGE * 0.5 * d * (ex * a.sin() + ey * a.cos());
        for b in &theta[i + 1..] {
            v += k / ((a - b) / 2.0).sin().abs();
        }
    }
    v
}

/// Compass search from `x0`; halves the step until it drops below `min_step`.
pub fn compass_search(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, min_step: f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut h = step;
    while h > min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for s in [h, -h] {
                let mut y = x.clone();
                y[i] += s;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Angles from a start angle and successive gaps.
pub fn from_gaps(start: f64, gaps: &[f64]) -> Vec<f64> {
    let mut out = vec![start];
    let mut t = start;
    for g in gaps {
        t += g;
        out.push(t);
    }
    out
}

/// Global minimum of the N = 2 or 3 ring energy: full grid over the start angle and
/// the gaps, then compass refinement of the best few cells. Returns `(angles, energy)`.
pub fn brute_force_equilibrium(n: usize, d: f64, ex: f64, ey: f64, step: f64) -> (Vec<f64>, f64) {
    assert!(n == 2 || n == 3);
    let m = (TAU / step).round() as usize;
    let h = TAU / m as f64;
    let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
    for a in 0..m {
        let t0 = a as f64 * h;
        if n == 2 {
            for b in 1..m {
                let x = vec![t0, b as f64 * h];
                cells.push((pair_energy(&from_gaps(x[0], &x[1..]), d, ex, ey), x));
            }
        } else {
            for b in 1..m {
                for c in 1..m - b {
                    let x = vec![t0, b as f64 * h, c as f64 * h];
                    let e = pair_energy(&from_gaps(x[0], &x[1..]), d, ex, ey);
                    if cells.len() < 16 || e < cells[cells.len() - 1].0 {
                        keep_best(&mut cells, e, x);
                    }
                }
            }
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells.truncate(16);
    refine_best(&cells, h, &|x: &[f64]| pair_energy(&from_gaps(x[0], &x[1..]), d, ex, ey))
}

fn keep_best(cells: &mut Vec<(f64, Vec<f64>)>, e: f64, x: Vec<f64>) {
    let pos = cells.partition_point(|c| c.0 < e);
    cells.insert(pos, (e, x));
    cells.truncate(16);
}

fn refine_best(cells: &[(f64, Vec<f64>)], h: f64, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    for (_, x) in cells {
        let guarded = |y: &[f64]| {
            if y[1..].iter().any(|g| *g <= 0.0) || y[1..].iter().sum::<f64>() >= TAU {
                f64::INFINITY
            } else {
                f(y)
            }
        };
        let (y, fy) = compass_search(&guarded, x, h, 1e-12);
        if fy < best.1 {
            best = (y, fy);
        }
    }
    (from_gaps(best.0[0], &best.0[1..]), best.1)
}

/// N = 3 oracle: grid over `(theta2, theta3)` with `theta1 = 0`, then compass refinement
/// of the best cells in all three angles. Returns `(angles, energy)`.
pub fn brute_force_three(d: f64, ex: f64, ey: f64, step: f64) -> (Vec<f64>, f64) {
    let m = (TAU / step).round() as usize;
    let h = TAU / m as f64;
    let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
    for b in 1..m {
        for c in 1..m - b {
            let x = vec![0.0, b as f64 * h, c as f64 * h];
            let e = pair_energy(&from_gaps(0.0, &x[1..]), d, ex, ey);
            if cells.len() < 16 || e < cells[cells.len() - 1].0 {
                keep_best(&mut cells, e, x);
            }
        }
    }
    refine_best(&cells, h, &|x: &[f64]| pair_energy(&from_gaps(x[0], &x[1..]), d, ex, ey))
}

/// Minimum over the other two ions of an N = 3 ring with the probe held at `probe`.
pub fn brute_force_constrained3(probe: f64, d: f64, ex: f64, ey: f64, step: f64) -> f64 {
    let m = (TAU / step).round() as usize;
    let h = TAU / m as f64;
    let f = |g: &[f64]| {
        if g.iter().any(|x| *x <= 0.0) || g[0] + g[1] >= TAU {
            return f64::INFINITY;
        }
        pair_energy(&[probe, probe + g[0], probe + g[0] + g[1]], d, ex, ey)
    };
    let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
    for b in 1..m {
        for c in 1..m - b {
            let x = vec![b as f64 * h, c as f64 * h];
            let e = f(&x);
            if cells.len() < 8 || e < cells[cells.len() - 1].0 {
                let pos = cells.partition_point(|c| c.0 < e);
                cells.insert(pos, (e, x));
                cells.truncate(8);
            }
        }
    }
    cells
        .iter()
        .map(|(_, x)| compass_search(&f, x, h, 1e-12).1)
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector function (rows: outputs).
pub fn fd_jacobian(g: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; g(x).len()];
    for j in 0..n {
        let (mut a, mut b) = (x.to_vec(), x.to_vec());
        a[j] += h;
        b[j] -= h;
        let (ga, gb) = (g(&a), g(&b));
        for i in 0..out.len() {
            out[i][j] = (ga[i] - gb[i]) / (2.0 * h);
        }
    }
    out
}

/// Largest componentwise difference relative to the largest reference component.
pub fn max_rel_error(got: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    got.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Random angles with every pair at least `min_sep` apart.
pub fn random_angles(rng: &mut impl rand::Rng, n: usize, min_sep: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let d = (v[i] - v[j]).rem_euclid(TAU);
                d.min(TAU - d) > min_sep
            })
        });
        if ok {
            return v;
        }
    }
}
