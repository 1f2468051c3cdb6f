//! Carlson symmetric elliptic integrals and the Legendre forms built on them.
//! Parameters use the `m = k^2` convention.

use std::f64::consts::FRAC_PI_2;

const STOP: f64 = 0.0025;
// Each step shrinks the spread fourfold; this only trips on NaN or two zero arguments.
const MAX_STEPS: usize = 200;

pub(crate) fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    for _ in 0..MAX_STEPS {
        let a = (x + y + z) / 3.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < STOP {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let l = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + l);
        y = 0.25 * (y + l);
        z = 0.25 * (z + l);
    }
    f64::NAN
}

pub(crate) fn carlson_rd(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    let mut sum = 0.0;
    let mut fac = 1.0;
    for _ in 0..MAX_STEPS {
        let a = (x + y + 3.0 * z) / 5.0;
        let dx = (a - x) / a;
        let dy = (a - y) / a;
        let dz = (a - z) / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < STOP {
            let zz = -(dx + dy) / 3.0;
            let xy = dx * dy;
            let e2 = xy - 6.0 * zz * zz;
            let e3 = (3.0 * xy - 8.0 * zz * zz) * zz;
            let e4 = 3.0 * (xy - zz * zz) * zz * zz;
            let e5 = xy * zz * zz * zz;
            let series = 1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0 - 3.0 * e4 / 22.0 - 9.0 * e2 * e3 / 52.0
                + 3.0 * e5 / 26.0;
            return 3.0 * sum + fac * series / (a * a.sqrt());
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let l = sx * sy + sy * sz + sz * sx;
        sum += fac / (sz * (z + l));
        fac *= 0.25;
        x = 0.25 * (x + l);
        y = 0.25 * (y + l);
        z = 0.25 * (z + l);
    }
    f64::NAN
}

/// Complete integrals `(K(m), E(m))` from the complementary parameter `mc = 1 - m`,
/// which keeps precision as `m` approaches one.
pub(crate) fn complete(mc: f64) -> (f64, f64) {
    let k = carlson_rf(0.0, mc, 1.0);
    (k, k - (1.0 - mc) / 3.0 * carlson_rd(0.0, mc, 1.0))
}

/// Incomplete integrals `(F(phi | m), E(phi | m))` for `0 <= phi <= pi/2`.
pub(crate) fn incomplete(phi: f64, m: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    let (x, y) = (c * c, 1.0 - m * s * s);
    let f = s * carlson_rf(x, y, 1.0);
    (f, f - m / 3.0 * s * s * s * carlson_rd(x, y, 1.0))
}

/// Heuman's lambda `Lambda_0(phi | m)`, given `mc = 1 - m`.
pub(crate) fn heuman_lambda(phi: f64, mc: f64) -> f64 {
    if phi >= FRAC_PI_2 {
        return 1.0;
    }
    let (k, e) = complete(mc);
    let (f1, e1) = incomplete(phi, mc);
    2.0 / std::f64::consts::PI * (e * f1 + k * e1 - k * f1)
}
