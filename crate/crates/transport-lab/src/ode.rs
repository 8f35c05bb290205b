//! Small adaptive integrator used by the transport-property tests: tracks a
//! point along a time-dependent velocity field.

use crate::geometry::Point;

fn rk4_step(f: &dyn Fn(f64, &[f64]) -> Point, t: f64, x: &[f64], h: f64) -> Point {
    let d = x.len();
    let k1 = f(t, x);
    let x2: Point = (0..d).map(|l| x[l] + 0.5 * h * k1[l]).collect();
    let k2 = f(t + 0.5 * h, &x2);
    let x3: Point = (0..d).map(|l| x[l] + 0.5 * h * k2[l]).collect();
    let k3 = f(t + 0.5 * h, &x3);
    let x4: Point = (0..d).map(|l| x[l] + h * k3[l]).collect();
    let k4 = f(t + h, &x4);
    (0..d).map(|l| x[l] + h / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l])).collect()
}

/// Integrate `dx/dt = v(t, x)` from `t0` to `t1` with step-doubling error
/// control at absolute tolerance `tol` per step.
pub fn advect(
    field: &dyn Fn(f64, &[f64]) -> Point,
    x0: &[f64],
    t0: f64,
    t1: f64,
    tol: f64,
) -> Point {
    let mut t = t0;
    let mut x: Point = x0.iter().copied().collect();
    let mut h = (t1 - t0) / 64.0;
    let h_min = (t1 - t0) * 1e-12;
    while t < t1 {
        h = h.min(t1 - t);
        let full = rk4_step(field, t, &x, h);
        let half = rk4_step(field, t, &x, 0.5 * h);
        let two = rk4_step(field, t + 0.5 * h, &half, 0.5 * h);
        let err = full
            .iter()
            .zip(&two)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if err <= tol || h <= h_min {
            t += h;
            x = two;
            if err < tol / 32.0 {
                h *= 2.0;
            }
        } else {
            h *= 0.5;
        }
    }
    x
}
