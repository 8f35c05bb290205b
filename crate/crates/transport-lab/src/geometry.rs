//! Axis-aligned cubes and the dyadic-center indexing used by both
//! constructions.
//!
//! The unit cube `[-1/2, 1/2]^d` is tiled by `2^{eta*d}` cells of side
//! `2^-eta`. Cell centers are indexed by `k` in `1..=2^{eta*d}` through the
//! base-`2^eta` digit expansion of `k - 1`; `index_of_point` is the inverse
//! point-location with half-open cells so the tiling is a true partition.

use crate::error::{Error, Result};
use smallvec::SmallVec;

/// Point or vector in R^d; inline storage up to d = 4.
pub type Point = SmallVec<[f64; 4]>;

/// Dense d x d Jacobian, row-major: `a[row * d + col] = d v_row / d x_col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub d: usize,
    pub a: SmallVec<[f64; 16]>,
}

impl Jacobian {
    pub fn zeros(d: usize) -> Self {
        Jacobian { d, a: smallvec::smallvec![0.0; d * d] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.a[row * self.d + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.a[row * self.d + col] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.a[i * self.d + i]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for x in self.a.iter_mut() {
            *x *= c;
        }
    }

    pub fn add_assign(&mut self, other: &Jacobian) {
        for (x, y) in self.a.iter_mut().zip(other.a.iter()) {
            *x += y;
        }
    }
}

pub fn zero_vector(d: usize) -> Point {
    smallvec::smallvec![0.0; d]
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn linf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Axis-aligned cube given by center and side length; membership is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Point, side: f64) -> Self {
        debug_assert!(side > 0.0);
        Cube { center, side }
    }

    /// Unit cube `[-1/2, 1/2]^d`.
    pub fn unit(d: usize) -> Self {
        Cube { center: zero_vector(d), side: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    /// Closed-box membership: `|x_l - center_l| <= side/2` for every axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.side;
        self.center.iter().zip(x).all(|(c, xl)| (xl - c).abs() <= h)
    }
}

/// Closed-box membership test (free-function form of `Cube::contains`).
pub fn cube_contains(c: &Cube, x: &[f64]) -> bool {
    c.contains(x)
}

/// Index of a generation-`eta` dyadic cell: `k` together with its digit tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicIndex {
    pub eta: u32,
    pub k: u64,
    pub digits: SmallVec<[u32; 4]>,
}

/// Number of generation-`eta` cells in dimension `d`.
pub fn cell_count(eta: u32, d: usize) -> u64 {
    1u64 << (eta as u64 * d as u64)
}

/// Digit tuple `(j_1, .., j_d)` of `k`, each digit in `0..2^eta`, with
/// `sum_l 2^{eta(l-1)} j_l = k - 1`.
pub fn dyadic_digits(eta: u32, k: u64, d: usize) -> Result<SmallVec<[u32; 4]>> {
    let max = cell_count(eta, d);
    if k < 1 || k > max {
        return Err(Error::IndexOutOfRange { eta, d, k, max });
    }
    let base = 1u64 << eta;
    let mut rem = k - 1;
    let mut digits = SmallVec::new();
    for _ in 0..d {
        digits.push((rem % base) as u32);
        rem /= base;
    }
    Ok(digits)
}

/// Center of the k-th generation-`eta` dyadic cell of `[-1/2, 1/2]^d`.
///
/// Coordinate `l` is `(j_l - (2^eta - 1)/2) / 2^eta`; all centers are
/// pairwise at least `2^-eta` apart in the sup norm.
pub fn center_of_index(eta: u32, k: u64, d: usize) -> Result<Point> {
    let digits = dyadic_digits(eta, k, d)?;
    let scale = (2.0f64).powi(-(eta as i32));
    let half = ((1u64 << eta) - 1) as f64 / 2.0;
    Ok(digits.iter().map(|&j| (j as f64 - half) * scale).collect())
}

/// Locate the generation-`eta` cell containing `x`, or `None` when `x` lies
/// outside `[-1/2, 1/2)^d`. Cells are half-open toward increasing
/// coordinates, so shared faces resolve deterministically.
pub fn index_of_point(eta: u32, x: &[f64], d: usize) -> Option<u64> {
    debug_assert_eq!(x.len(), d);
    let base = 1u64 << eta;
    let mut k = 0u64;
    let mut stride = 1u64;
    for xl in x.iter().take(d) {
        let u = xl + 0.5;
        if !(0.0..1.0).contains(&u) {
            return None;
        }
        let j = (u * base as f64).floor() as u64;
        if j >= base {
            return None;
        }
        k += stride * j;
        stride *= base;
    }
    Some(k + 1)
}

/// Deterministic completion of a unit vector to an orthonormal frame.
///
/// Row 0 is `xi`; the remaining rows come from Gram-Schmidt against the
/// standard basis, seeded with the axes least aligned with `xi`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub d: usize,
    rows: SmallVec<[Point; 4]>,
}

impl Frame {
    pub fn complete(xi: &[f64]) -> Frame {
        let d = xi.len();
        let mut rows: SmallVec<[Point; 4]> = SmallVec::new();
        rows.push(xi.iter().copied().collect());
        let mut axes: SmallVec<[usize; 8]> = (0..d).collect();
        axes.sort_by(|&a, &b| xi[a].abs().partial_cmp(&xi[b].abs()).unwrap().then(a.cmp(&b)));
        for &axis in axes.iter() {
            if rows.len() == d {
                break;
            }
            let mut v = zero_vector(d);
            v[axis] = 1.0;
            for row in rows.iter() {
                let c = dot(&v, row);
                for (vl, rl) in v.iter_mut().zip(row.iter()) {
                    *vl -= c * rl;
                }
            }
            let n = norm2(&v);
            if n > 1e-8 {
                for vl in v.iter_mut() {
                    *vl /= n;
                }
                rows.push(v);
            }
        }
        debug_assert_eq!(rows.len(), d);
        Frame { d, rows }
    }

    pub fn row(&self, i: usize) -> &Point {
        &self.rows[i]
    }

    /// Frame coordinates of `x`: `y_i = x . row_i`.
    pub fn to_frame(&self, x: &[f64]) -> Point {
        self.rows.iter().map(|r| dot(r, x)).collect()
    }

    /// Conjugate a frame-coordinate Jacobian back to standard coordinates:
    /// `J_x = R^T J_y R`.
    pub fn pull_back_jacobian(&self, jy: &Jacobian) -> Jacobian {
        let d = self.d;
        let mut out = Jacobian::zeros(d);
        for m in 0..d {
            for n in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    let jl = &jy.a[l * d..(l + 1) * d];
                    let mut inner = 0.0;
                    for (lp, &jv) in jl.iter().enumerate() {
                        inner += jv * self.rows[lp][n];
                    }
                    s += self.rows[l][m] * inner;
                }
                out.set(m, n, s);
            }
        }
        out
    }
}
