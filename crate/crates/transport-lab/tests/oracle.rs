//! Independent naive recursive implementations of both constructions,
//! cross-checked against the iterative accumulated-affine evaluators.
//!
//! The oracles follow the defining formulas literally: full sums over every
//! dyadic cell, recursion by function call, checkpoint formulas evaluated
//! from scratch. They share only the building-block primitives, so they
//! exercise exactly the recursion bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transport_lab::blocks::{self, BlockParams};
use transport_lab::geometry::Point;
use transport_lab::l1::{L1Field, L1Params};
use transport_lab::lr::{LrField, LrParams};

const D: usize = 2;
const BETA: f64 = 0.8;
const NU: f64 = 2.3;
const ETA: u32 = 2;

fn l1_tau(i: u64) -> f64 {
    1.0 - (2.0f64).powf(-BETA * (i - 1) as f64)
}

fn l1_interval(t: f64) -> u64 {
    let mut i = 1;
    while l1_tau(i + 1) <= t {
        i += 1;
    }
    i
}

fn centers(gen: u32, d: usize) -> Vec<Point> {
    (1..=transport_lab::geometry::cell_count(gen, d))
        .map(|k| transport_lab::geometry::center_of_index(gen, k, d).unwrap())
        .collect()
}

/// Literal velocity map iterate: sums over all cells, recursion by call.
fn naive_l1_velocity(t: f64, x: &[f64], n: u32) -> Point {
    let mut out: Point = smallvec::smallvec![0.0; D];
    if n == 0 || t >= 1.0 {
        return out;
    }
    let i = l1_interval(t);
    let (t1, t2) = (l1_tau(i), l1_tau(i + 1));
    let mid = 0.5 * (t1 + t2);
    let zoom = ((1.0 + NU) * i as f64).exp2();
    if t < mid {
        let s = (mid - t) / (mid - t1);
        for c in centers(i as u32, D) {
            let y: Point = x.iter().zip(&c).map(|(xl, cl)| zoom * (xl - cl)).collect();
            let v = naive_l1_velocity(s, &y, n - 1);
            for l in 0..D {
                out[l] += -1.0 / (zoom * (mid - t1)) * v[l];
            }
        }
    } else {
        let s = (t - mid) / (t2 - mid);
        let zs = (i as f64).exp2();
        let bp = BlockParams {
            eta: 1,
            a: (-NU * i as f64).exp2(),
            s: (-NU * (i + 1) as f64).exp2(),
        };
        for c in centers(i as u32, D) {
            let y: Point = x.iter().zip(&c).map(|(xl, cl)| zs * (xl - cl)).collect();
            let (v, _) = blocks::block_velocity(s, &y, &bp, D);
            for l in 0..D {
                out[l] += 1.0 / (zs * (t2 - mid)) * v[l];
            }
        }
    }
    out
}

/// Literal density map iterate with the freeze base.
fn naive_l1_density(t: f64, x: &[f64], n: u32) -> f64 {
    if t >= 1.0 {
        return if x.iter().all(|v| v.abs() <= 0.5) { 1.0 } else { 0.0 };
    }
    let i = l1_interval(t);
    let (t1, t2) = (l1_tau(i), l1_tau(i + 1));
    let mid = 0.5 * (t1 + t2);
    let zoom = ((1.0 + NU) * i as f64).exp2();
    let gain = (NU * D as f64 * i as f64).exp2();
    if t < mid {
        let s = (mid - t) / (mid - t1);
        let mut out = 0.0;
        for c in centers(i as u32, D) {
            let y: Point = x.iter().zip(&c).map(|(xl, cl)| zoom * (xl - cl)).collect();
            if n == 0 {
                // frozen entering cube
                if y.iter().all(|v| v.abs() <= 0.5) {
                    out += gain;
                }
            } else {
                out += gain * naive_l1_density(s, &y, n - 1);
            }
        }
        out
    } else {
        let s = (t - mid) / (t2 - mid);
        let zs = (i as f64).exp2();
        let bp = BlockParams {
            eta: 1,
            a: (-NU * i as f64).exp2(),
            s: (-NU * (i + 1) as f64).exp2(),
        };
        let gain = (NU * D as f64 * (i + 1) as f64).exp2();
        let mut out = 0.0;
        for c in centers(i as u32, D) {
            let y: Point = x.iter().zip(&c).map(|(xl, cl)| zs * (xl - cl)).collect();
            out += gain * blocks::block_density(s, &y, &bp, D);
        }
        out
    }
}

fn lr_checkpoints(k: u64) -> (f64, f64, f64, f64) {
    let cells = transport_lab::geometry::cell_count(ETA, D) as f64;
    let t1 = (k - 1) as f64 / cells;
    let tinf = k as f64 / cells;
    let t2 = (k as f64 - (2.0f64).powf(-BETA)) / cells;
    (t1, 0.5 * (t1 + t2), t2, tinf)
}

fn lr_slot(t: f64) -> u64 {
    let cells = transport_lab::geometry::cell_count(ETA, D);
    ((t * cells as f64).floor() as u64 + 1).min(cells)
}

/// Literal asynchronous density map with backgrounds, freeze base.
fn naive_lr_density(i: usize, t: f64, x: &[f64], n: u32) -> f64 {
    if t >= 1.0 {
        return if x.iter().all(|v| v.abs() <= 0.5) { 1.0 } else { 0.0 };
    }
    let k = lr_slot(t);
    let (t1, mid, t2, tinf) = lr_checkpoints(k);
    let conc_side = |j: usize| (-(ETA as f64 + NU * j as f64)).exp2();
    let conc_value = |j: usize| (NU * D as f64 * j as f64).exp2();
    let mut out = 0.0;
    for (idx, c) in centers(ETA, D).iter().enumerate() {
        let kp = idx as u64 + 1;
        let y: Point = x.iter().zip(c).map(|(xl, cl)| xl - cl).collect();
        if kp < k {
            // final configuration: unit density on the whole cell (half-open)
            let ze = (ETA as f64).exp2();
            if y.iter().all(|v| (ze * v).abs() <= 0.5) {
                out += 1.0;
            }
        } else if kp > k {
            if y.iter().all(|v| v.abs() <= 0.5 * conc_side(i)) {
                out += conc_value(i);
            }
        } else {
            // active cell
            let ze = (ETA as f64).exp2();
            if t < mid {
                let s = (mid - t) / (mid - t1);
                let zoom = (ETA as f64 + NU * i as f64).exp2();
                let yz: Point = y.iter().map(|v| zoom * v).collect();
                if n == 0 {
                    if y.iter().all(|v| v.abs() <= 0.5 * conc_side(i)) {
                        out += conc_value(i);
                    }
                } else {
                    out += conc_value(i) * naive_lr_density(1, s, &yz, n - 1);
                }
            } else if t < t2 {
                let s = (t - mid) / (t2 - mid);
                let bp = BlockParams {
                    eta: ETA,
                    a: (-NU * i as f64).exp2(),
                    s: (-NU * (i + 1) as f64).exp2(),
                };
                let yz: Point = y.iter().map(|v| ze * v).collect();
                out += conc_value(i + 1) * blocks::block_density(s, &yz, &bp, D);
            } else {
                let s = (t - t2) / (tinf - t2);
                let yz: Point = y.iter().map(|v| ze * v).collect();
                if n == 0 {
                    // frozen entering state: the next component's initial density
                    for cs in centers(ETA, D) {
                        let z: Point = yz.iter().zip(&cs).map(|(a, b)| a - b).collect();
                        if z.iter().all(|v| v.abs() <= 0.5 * conc_side(i + 1)) {
                            out += conc_value(i + 1);
                        }
                    }
                } else {
                    out += naive_lr_density(i + 1, s, &yz, n - 1);
                }
            }
        }
    }
    out
}

/// Literal asynchronous velocity map.
fn naive_lr_velocity(i: usize, t: f64, x: &[f64], n: u32) -> Point {
    let mut out: Point = smallvec::smallvec![0.0; D];
    if n == 0 || t >= 1.0 {
        return out;
    }
    let k = lr_slot(t);
    let (t1, mid, t2, tinf) = lr_checkpoints(k);
    let c = transport_lab::geometry::center_of_index(ETA, k, D).unwrap();
    let y: Point = x.iter().zip(&c).map(|(xl, cl)| xl - cl).collect();
    let ze = (ETA as f64).exp2();
    if t < mid {
        let s = (mid - t) / (mid - t1);
        let zoom = (ETA as f64 + NU * i as f64).exp2();
        let yz: Point = y.iter().map(|v| zoom * v).collect();
        let v = naive_lr_velocity(1, s, &yz, n - 1);
        for l in 0..D {
            out[l] = -1.0 / (zoom * (mid - t1)) * v[l];
        }
    } else if t < t2 {
        let s = (t - mid) / (t2 - mid);
        let bp = BlockParams {
            eta: ETA,
            a: (-NU * i as f64).exp2(),
            s: (-NU * (i + 1) as f64).exp2(),
        };
        let yz: Point = y.iter().map(|v| ze * v).collect();
        let (v, _) = blocks::block_velocity(s, &yz, &bp, D);
        for l in 0..D {
            out[l] = 1.0 / (ze * (t2 - mid)) * v[l];
        }
    } else {
        let s = (t - t2) / (tinf - t2);
        let yz: Point = y.iter().map(|v| ze * v).collect();
        let v = naive_lr_velocity(i + 1, s, &yz, n - 1);
        for l in 0..D {
            out[l] = 1.0 / (ze * (tinf - t2)) * v[l];
        }
    }
    // outside the unit cube the components vanish by the support constraint
    if x.iter().any(|v| !(-0.5..0.5).contains(v)) {
        return smallvec::smallvec![0.0; D];
    }
    out
}

#[test]
fn iterative_l1_velocity_matches_naive_recursion() {
    let field = L1Field::new(L1Params::paper_defaults()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for _ in 0..400 {
        let t = rng.gen_range(0.0..0.85);
        let x = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
        for depth in [1u32, 2, 4] {
            let (v, _) = field.velocity_at_depth(t, &x, depth).unwrap();
            let want = naive_l1_velocity(t, &x, depth);
            for l in 0..D {
                assert!(
                    (v[l] - want[l]).abs() <= 1e-12 * (1.0 + want[l].abs()),
                    "t={t} x={x:?} depth={depth}: {} vs {}",
                    v[l],
                    want[l]
                );
            }
        }
    }
}

#[test]
fn iterative_l1_density_matches_naive_recursion() {
    let field = L1Field::new(L1Params::paper_defaults()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    for _ in 0..400 {
        let t = rng.gen_range(0.0..0.85);
        let x = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
        for depth in [0u32, 1, 3] {
            let v = field.density_at_depth(t, &x, depth).unwrap();
            let want = naive_l1_density(t, &x, depth);
            assert!(
                (v - want).abs() <= 1e-11 * (1.0 + want.abs()),
                "t={t} x={x:?} depth={depth}: {v} vs {want}"
            );
        }
    }
}

#[test]
fn iterative_lr_density_matches_naive_recursion() {
    let field = LrField::new(LrParams::paper_defaults()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(79);
    for _ in 0..400 {
        let i = rng.gen_range(1..=3usize);
        let t = rng.gen_range(0.0..0.999);
        let x = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
        for depth in [0u32, 1, 4] {
            let v = field.density_at_depth(i, t, &x, depth).unwrap();
            let want = naive_lr_density(i, t, &x, depth);
            assert!(
                (v - want).abs() <= 1e-11 * (1.0 + want.abs()),
                "i={i} t={t} x={x:?} depth={depth}: {v} vs {want}"
            );
        }
    }
}

#[test]
fn iterative_lr_velocity_matches_naive_recursion() {
    let field = LrField::new(LrParams::paper_defaults()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    for _ in 0..400 {
        let i = rng.gen_range(1..=3usize);
        let t = rng.gen_range(0.0..0.999);
        let x = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
        for depth in [1u32, 2, 5] {
            let (v, _) = field.velocity_at_depth(i, t, &x, depth).unwrap();
            let want = naive_lr_velocity(i, t, &x, depth);
            for l in 0..D {
                assert!(
                    (v[l] - want[l]).abs() <= 1e-12 * (1.0 + want[l].abs()),
                    "i={i} t={t} x={x:?} depth={depth}: {} vs {}",
                    v[l],
                    want[l]
                );
            }
        }
    }
}
