//! The spreading building block: smooth cutoffs, a divergence-free carrier
//! field with a plateau, the rigid-translation flow, and the assembled field
//! that spreads `2^{eta d}` small cubes from a concentrated grid to the full
//! dyadic grid in unit time.
//!
//! All velocity evaluators return the analytic spatial Jacobian alongside the
//! value; Jacobians of the planar stream-function core have exactly opposite
//! diagonal entries, so the returned trace is a bitwise zero.

use crate::ensemble::{CubeEnsemble, Patch};
use crate::error::{Error, Result};
use crate::geometry::{self, Cube, Frame, Jacobian, Point};
use smallvec::SmallVec;

/// `exp(-1/u)` transition with first and second derivatives; identically
/// zero for `u <= 0`, identically one for `u >= 1`.
fn transition(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let psi = |v: f64| (-1.0 / v).exp();
    let psi_d1 = |v: f64| psi(v) / (v * v);
    let psi_d2 = |v: f64| psi(v) * (1.0 - 2.0 * v) / (v * v * v * v);
    let (p, q) = (psi(u), psi(1.0 - u));
    let (pd, qd) = (psi_d1(u), psi_d1(1.0 - u));
    let den = p + q;
    let h = p / den;
    // d/du psi(1-u) = -qd
    let n = pd * q + p * qd;
    let h1 = n / (den * den);
    let np = psi_d2(u) * q - p * psi_d2(1.0 - u);
    let dend = pd - qd;
    let h2 = np / (den * den) - 2.0 * h1 * dend / den;
    (h, h1, h2)
}

/// Monotone time ramp: 0 on `(-inf, 1/3]`, 1 on `[2/3, inf)`, smooth.
pub fn time_ramp(t: f64) -> f64 {
    transition(3.0 * t - 1.0).0
}

pub fn time_ramp_d1(t: f64) -> f64 {
    3.0 * transition(3.0 * t - 1.0).1
}

pub fn time_ramp_d2(t: f64) -> f64 {
    9.0 * transition(3.0 * t - 1.0).2
}

/// Width of the cutoff transition band. The plateau must cover `[-1, 1]` and
/// the support must stay inside `[-5/4, 5/4]`; keeping the transition narrow
/// keeps the assembled field's support measure at the advertised `2^d s^d`
/// up to a thin boundary band.
pub const CUTOFF_BAND: f64 = 1.0 / 256.0;

/// Largest |x| with `space_cutoff(x) != 0`.
pub const CUTOFF_SUPPORT: f64 = 1.0 + CUTOFF_BAND;

/// Plateau cutoff: 1 on `[-1, 1]`, 0 outside `(-CUTOFF_SUPPORT, CUTOFF_SUPPORT)`,
/// smooth, even.
pub fn space_cutoff(x: f64) -> f64 {
    transition((CUTOFF_SUPPORT - x.abs()) / CUTOFF_BAND).0
}

pub fn space_cutoff_d1(x: f64) -> f64 {
    -x.signum() / CUTOFF_BAND * transition((CUTOFF_SUPPORT - x.abs()) / CUTOFF_BAND).1
}

pub fn space_cutoff_d2(x: f64) -> f64 {
    transition((CUTOFF_SUPPORT - x.abs()) / CUTOFF_BAND).2 / (CUTOFF_BAND * CUTOFF_BAND)
}

/// Planar stream-function core at `(y0, y1)` for an in-plane unit direction.
/// Returns the velocity components and the 2x2 Jacobian entries
/// `(j00, j01, j10, j11)`; `j11` is the bitwise negation of `j00`.
fn planar_core(y0: f64, y1: f64, xi: (f64, f64)) -> ([f64; 2], [f64; 4]) {
    let (p0, p0d, p0dd) = {
        let v = space_cutoff(y0);
        (v, space_cutoff_d1(y0), space_cutoff_d2(y0))
    };
    let (p1, p1d, p1dd) = {
        let v = space_cutoff(y1);
        (v, space_cutoff_d1(y1), space_cutoff_d2(y1))
    };
    let (a, b) = xi;
    // stream function g = (b*y0 - a*y1) p(y0) p(y1)
    let u = b * y0 - a * y1;
    let v0 = a * p0 * p1 - u * p0 * p1d;
    let v1 = b * p0 * p1 + u * p0d * p1;
    let g11 = 2.0 * b * p0d * p1 + u * p0dd * p1;
    let g22 = -2.0 * a * p0 * p1d + u * p0 * p1dd;
    let g12 = b * p0 * p1d - a * p0d * p1 + u * p0d * p1d;
    ([v0, v1], [-g12, -g22, g11, g12])
}

/// Divergence-free carrier field equal to `xi` on the plateau region and
/// compactly supported in the frame-aligned box of half-width 5/4.
///
/// In two dimensions the formula acts in standard coordinates; for `d >= 3`
/// the direction is completed to a deterministic orthonormal frame and the
/// planar core acts in the leading two frame coordinates, cut off along the
/// remaining ones.
pub fn plateau_field(x: &[f64], xi: &[f64], d: usize) -> Result<(Point, Jacobian)> {
    let n = geometry::norm2(xi);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitDirection(n));
    }
    if d < 2 || x.len() != d || xi.len() != d {
        return Err(Error::InvalidParameter(format!("plateau field needs d >= 2, got d = {d}")));
    }
    if d == 2 {
        let (v, j) = planar_core(x[0], x[1], (xi[0], xi[1]));
        let mut jac = Jacobian::zeros(2);
        jac.a.copy_from_slice(&j);
        return Ok((v.iter().copied().collect(), jac));
    }

    let frame = Frame::complete(xi);
    let y = frame.to_frame(x);
    let ([u0, u1], jb) = planar_core(y[0], y[1], (1.0, 0.0));

    // product of cutoffs along the transverse frame axes
    let mut phis: SmallVec<[(f64, f64); 4]> = SmallVec::new();
    let mut envelope = 1.0;
    for yl in y.iter().skip(2) {
        let p = space_cutoff(*yl);
        phis.push((p, space_cutoff_d1(*yl)));
        envelope *= p;
    }

    let mut jy = Jacobian::zeros(d);
    jy.set(0, 0, jb[0] * envelope);
    jy.set(0, 1, jb[1] * envelope);
    jy.set(1, 0, jb[2] * envelope);
    jy.set(1, 1, jb[3] * envelope);
    for (idx, (p, pd)) in phis.iter().enumerate() {
        let l = idx + 2;
        // derivative of the envelope along axis l
        let mut rest = 1.0;
        for (jdx, (pj, _)) in phis.iter().enumerate() {
            if jdx != idx {
                rest *= pj;
            }
        }
        let _ = p;
        jy.set(0, l, u0 * pd * rest);
        jy.set(1, l, u1 * pd * rest);
    }

    let mut v = geometry::zero_vector(d);
    for m in 0..d {
        v[m] = envelope * (u0 * frame.row(0)[m] + u1 * frame.row(1)[m]);
    }
    Ok((v, frame.pull_back_jacobian(&jy)))
}

/// Endpoints and cube side of a rigid translation.
#[derive(Debug, Clone)]
pub struct TranslationSpec {
    pub start: Point,
    pub end: Point,
    pub side: f64,
}

impl TranslationSpec {
    pub fn new(start: Point, end: Point, side: f64) -> Self {
        debug_assert!(side > 0.0);
        TranslationSpec { start, end, side }
    }

    /// Cube center at time `t`.
    pub fn center_at(&self, t: f64) -> Point {
        let z = time_ramp(t);
        self.start.iter().zip(&self.end).map(|(a, b)| a * (1.0 - z) + b * z).collect()
    }
}

/// Velocity of the rigid-translation flow: on the moving cube it equals the
/// translation velocity `(end - start) * ramp'(t)`; zero outside a scaled
/// neighborhood and for `t` outside `[1/3, 2/3]`.
pub fn translation_velocity(t: f64, x: &[f64], spec: &TranslationSpec) -> (Point, Jacobian) {
    let d = spec.start.len();
    let delta = geometry::sub(&spec.end, &spec.start);
    let dist = geometry::norm2(&delta);
    let rate = time_ramp_d1(t);
    if dist == 0.0 || rate == 0.0 {
        return (geometry::zero_vector(d), Jacobian::zeros(d));
    }
    let dir: Point = delta.iter().map(|v| v / dist).collect();
    let center = spec.center_at(t);
    let y: Point = x.iter().zip(&center).map(|(xl, cl)| (xl - cl) / spec.side).collect();
    let speed = dist * rate;
    let (mut v, mut jac) = plateau_field(&y, &dir, d).expect("dir is unit by construction");
    for vl in v.iter_mut() {
        *vl *= speed;
    }
    jac.scale(speed / spec.side);
    (v, jac)
}

/// Indicator of the moving cube.
pub fn translation_density(t: f64, x: &[f64], spec: &TranslationSpec) -> f64 {
    let center = spec.center_at(t);
    let h = 0.5 * spec.side;
    let inside = center.iter().zip(x).all(|(c, xl)| (xl - c).abs() <= h);
    if inside {
        1.0
    } else {
        0.0
    }
}

/// Parameters of the assembled spreading block: grid generation `eta` and the
/// concentration/size parameters `0 < 2s < a < 1`.
#[derive(Debug, Clone, Copy)]
pub struct BlockParams {
    pub eta: u32,
    pub a: f64,
    pub s: f64,
}

impl BlockParams {
    pub fn new(eta: u32, a: f64, s: f64) -> Result<Self> {
        if !(0.0 < s && 2.0 * s < a && a < 1.0) {
            return Err(Error::BlockParams { a, s });
        }
        if eta == 0 {
            return Err(Error::InvalidParameter("eta must be positive".into()));
        }
        Ok(BlockParams { eta, a, s })
    }

    /// Side of each transported cube.
    pub fn cube_side(&self) -> f64 {
        self.s * (-(self.eta as f64)).exp2()
    }

    /// All cube centers scale with a common factor `a + ramp(t)(1 - a)`.
    pub fn center_factor(&self, t: f64) -> f64 {
        self.a + time_ramp(t) * (1.0 - self.a)
    }
}

/// Iterate candidate cells whose center `m * c_k` lies within `radius` of `x`
/// per axis; the callback receives the cell center `c_k`.
fn for_candidate_cells(
    eta: u32,
    d: usize,
    x: &[f64],
    m: f64,
    radius: f64,
    visit: &mut dyn FnMut(&Point),
) {
    let base = 1i64 << eta;
    let half = (base - 1) as f64 / 2.0;
    let scale = (2.0f64).powi(-(eta as i32));
    let mut lo: SmallVec<[i64; 4]> = SmallVec::new();
    let mut hi: SmallVec<[i64; 4]> = SmallVec::new();
    for xl in x.iter().take(d) {
        // m * (j - half) * scale within radius of x_l
        let jc_lo = ((xl - radius) / m / scale + half).floor() as i64;
        let jc_hi = ((xl + radius) / m / scale + half).ceil() as i64;
        let l = jc_lo.max(0);
        let h = jc_hi.min(base - 1);
        if l > h {
            return;
        }
        lo.push(l);
        hi.push(h);
    }
    let mut j = lo.clone();
    loop {
        let c: Point = j.iter().map(|&jl| (jl as f64 - half) * scale).collect();
        visit(&c);
        let mut l = 0;
        loop {
            if l == d {
                return;
            }
            j[l] += 1;
            if j[l] <= hi[l] {
                break;
            }
            j[l] = lo[l];
            l += 1;
        }
    }
}

/// Assembled spreading velocity: the sum of `2^{eta d}` translation fields
/// with pairwise disjoint supports. Candidate summands are located through
/// the interpolated grid instead of summing all of them.
pub fn block_velocity(t: f64, x: &[f64], p: &BlockParams, d: usize) -> (Point, Jacobian) {
    let mut v = geometry::zero_vector(d);
    let mut jac = Jacobian::zeros(d);
    if time_ramp_d1(t) == 0.0 {
        return (v, jac);
    }
    let m = p.center_factor(t);
    let lam = p.cube_side();
    let radius = CUTOFF_SUPPORT * lam * (d as f64).sqrt();
    for_candidate_cells(p.eta, d, x, m, radius, &mut |c| {
        let spec = TranslationSpec::new(c.iter().map(|v| v * p.a).collect(), c.clone(), lam);
        let (vk, jk) = translation_velocity(t, x, &spec);
        for (a, b) in v.iter_mut().zip(&vk) {
            *a += b;
        }
        jac.add_assign(&jk);
    });
    (v, jac)
}

/// Indicator of the union of the moving cubes; 0/1 valued with level-set
/// measure `s^d` at every time.
pub fn block_density(t: f64, x: &[f64], p: &BlockParams, d: usize) -> f64 {
    let m = p.center_factor(t);
    let lam = p.cube_side();
    let mut hit = 0.0;
    for_candidate_cells(p.eta, d, x, m, 0.5 * lam * 1.0001 + 1e-12, &mut |c| {
        let inside = c.iter().zip(x).all(|(cl, xl)| (xl - m * cl).abs() <= 0.5 * lam);
        if inside {
            hit = 1.0;
        }
    });
    hit
}

/// Exact symbolic form of `block_density`: the `2^{eta d}` moving cubes.
pub fn block_cubes(t: f64, p: &BlockParams, d: usize) -> CubeEnsemble {
    let m = p.center_factor(t);
    let lam = p.cube_side();
    let cells = geometry::cell_count(p.eta, d);
    let mut patches = Vec::with_capacity(cells as usize);
    for k in 1..=cells {
        let c = geometry::center_of_index(p.eta, k, d).expect("k in range");
        let center: Point = c.iter().map(|v| v * m).collect();
        patches.push(Patch::plain(Cube::new(center, lam), 1.0));
    }
    CubeEnsemble::new(patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linf;

    #[test]
    fn ramp_and_cutoff_plateaus() {
        assert_eq!(time_ramp(0.0), 0.0);
        assert_eq!(time_ramp(1.0 / 3.0), 0.0);
        assert_eq!(time_ramp(2.0 / 3.0), 1.0);
        assert_eq!(time_ramp(1.0), 1.0);
        assert_eq!(space_cutoff(0.0), 1.0);
        assert_eq!(space_cutoff(1.0), 1.0);
        assert_eq!(space_cutoff(-1.0), 1.0);
        assert_eq!(space_cutoff(1.25), 0.0);
        assert_eq!(space_cutoff(-2.0), 0.0);
        // monotone ramp
        let mut prev = 0.0;
        for i in 0..=300 {
            let v = time_ramp(i as f64 / 300.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn ramp_derivatives_match_finite_differences() {
        let h = 1e-6;
        for &t in &[0.35, 0.42, 0.5, 0.61, 0.655] {
            let fd = (time_ramp(t + h) - time_ramp(t - h)) / (2.0 * h);
            assert!((fd - time_ramp_d1(t)).abs() < 1e-5 * (1.0 + time_ramp_d1(t).abs()));
            let fd2 = (time_ramp_d1(t + h) - time_ramp_d1(t - h)) / (2.0 * h);
            assert!((fd2 - time_ramp_d2(t)).abs() < 1e-4 * (1.0 + time_ramp_d2(t).abs()));
        }
        let h = 1e-8;
        for &x in &[1.0005, 1.001, 1.002, -1.0025, 0.3] {
            let fd = (space_cutoff(x + h) - space_cutoff(x - h)) / (2.0 * h);
            assert!(
                (fd - space_cutoff_d1(x)).abs() < 1e-4 * (1.0 + space_cutoff_d1(x).abs()),
                "cutoff derivative at {x}"
            );
        }
    }

    #[test]
    fn plateau_field_examples() {
        let (v, _) = plateau_field(&[0.3, 0.2], &[1.0, 0.0], 2).unwrap();
        assert_eq!(&v[..], &[1.0, 0.0]);
        let (v, _) = plateau_field(&[3.0, 3.0], &[0.6, 0.8], 2).unwrap();
        assert_eq!(&v[..], &[0.0, 0.0]);
        assert!(plateau_field(&[0.0, 0.0], &[1.0, 1.0], 2).is_err());
    }

    #[test]
    fn plateau_field_trace_is_exactly_zero_planar() {
        let mut rng = crate::test_rng(7);
        for _ in 0..10_000 {
            let x = [crate::runif(&mut rng, -1.5, 1.5), crate::runif(&mut rng, -1.5, 1.5)];
            let th = crate::runif(&mut rng, 0.0, std::f64::consts::TAU);
            let (_, j) = plateau_field(&x, &[th.cos(), th.sin()], 2).unwrap();
            assert_eq!(j.trace(), 0.0);
        }
    }

    #[test]
    fn plateau_field_three_dims() {
        // axis-aligned direction: plateau on [-1,1]^3, trace tiny
        let (v, j) = plateau_field(&[0.4, -0.9, 0.2], &[0.0, 1.0, 0.0], 3).unwrap();
        assert!((v[1] - 1.0).abs() < 1e-14 && v[0].abs() < 1e-14 && v[2].abs() < 1e-14);
        assert!(j.trace().abs() < 1e-12);
        // generic direction: divergence-free within rounding of the rotation
        let xi = [2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
        let mut rng = crate::test_rng(8);
        for _ in 0..2000 {
            let x = [
                crate::runif(&mut rng, -1.2, 1.2),
                crate::runif(&mut rng, -1.2, 1.2),
                crate::runif(&mut rng, -1.2, 1.2),
            ];
            let (_, j) = plateau_field(&x, &xi, 3).unwrap();
            assert!(j.trace().abs() < 1e-12 * (1.0 + j.frobenius()));
        }
    }

    #[test]
    fn plateau_jacobian_matches_finite_differences() {
        // fourth-order central stencil at h = 1e-6; the cutoff's transition
        // band has third derivatives ~ band^-3, beyond a second-order stencil
        let mut rng = crate::test_rng(11);
        let xi = [0.6, 0.8];
        let h = 1e-6;
        for _ in 0..1000 {
            let x = [crate::runif(&mut rng, -1.4, 1.4), crate::runif(&mut rng, -1.4, 1.4)];
            let (_, j) = plateau_field(&x, &xi, 2).unwrap();
            let mut max_rel = 0.0f64;
            for col in 0..2 {
                let at = |s: f64| {
                    let mut y = x;
                    y[col] += s;
                    plateau_field(&y, &xi, 2).unwrap().0
                };
                let (v2p, vp, vm, v2m) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
                for row in 0..2 {
                    let fd =
                        (-v2p[row] + 8.0 * vp[row] - 8.0 * vm[row] + v2m[row]) / (12.0 * h);
                    let scale = j.frobenius().max(1.0);
                    max_rel = max_rel.max((fd - j.get(row, col)).abs() / scale);
                }
            }
            assert!(max_rel < 1e-5, "fd mismatch {max_rel}");
        }
    }

    #[test]
    fn translation_examples() {
        let spec = TranslationSpec::new(
            smallvec::smallvec![-0.2, -0.2],
            smallvec::smallvec![-0.2, -0.2],
            0.1,
        );
        let (v, _) = translation_velocity(0.5, &[-0.2, -0.2], &spec);
        assert_eq!(&v[..], &[0.0, 0.0]);

        let spec = TranslationSpec::new(
            smallvec::smallvec![-0.2, -0.1],
            smallvec::smallvec![0.25, 0.3],
            0.08,
        );
        // zero before the ramp starts
        let (v, _) = translation_velocity(0.1, &[-0.2, -0.1], &spec);
        assert_eq!(&v[..], &[0.0, 0.0]);
        // rigid translation on the cube at t = 1/2
        let c = spec.center_at(0.5);
        let (v, _) = translation_velocity(0.5, &c, &spec);
        let h = 1e-6;
        let cp = spec.center_at(0.5 + h);
        let cm = spec.center_at(0.5 - h);
        for l in 0..2 {
            let fd = (cp[l] - cm[l]) / (2.0 * h);
            assert!((v[l] - fd).abs() < 1e-5, "rigid translation velocity");
        }
    }

    #[test]
    fn translation_density_endpoints() {
        let a0: Point = smallvec::smallvec![-0.25, -0.25];
        let a1: Point = smallvec::smallvec![0.25, 0.25];
        let spec = TranslationSpec::new(a0.clone(), a1.clone(), 0.1);
        assert_eq!(translation_density(0.0, &a0, &spec), 1.0);
        assert_eq!(translation_density(1.0, &a0, &spec), 0.0);
        assert_eq!(translation_density(1.0, &a1, &spec), 1.0);
    }

    #[test]
    fn block_cubes_track_density() {
        let p = BlockParams::new(1, 0.45, 0.2).unwrap();
        let mut rng = crate::test_rng(3);
        for &t in &[0.0, 0.2, 0.41, 0.5, 0.62, 0.9, 1.0] {
            let ens = block_cubes(t, &p, 2);
            assert_eq!(ens.len(), 4);
            for _ in 0..500 {
                let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
                assert_eq!(ens.value_at(&x), block_density(t, &x, &p, 2));
            }
        }
    }

    #[test]
    fn block_cube_centers_stay_separated() {
        let p = BlockParams::new(2, 0.4, 0.1).unwrap();
        let sep = p.a * (2.0f64).powi(-(p.eta as i32));
        for &t in &[0.0, 0.3, 0.5, 0.7, 1.0] {
            let ens = block_cubes(t, &p, 2);
            for i in 0..ens.len() {
                for j in (i + 1)..ens.len() {
                    let gap = linf(&geometry::sub(
                        &ens.patches[i].cube.center,
                        &ens.patches[j].cube.center,
                    ));
                    assert!(gap >= sep - 1e-12);
                    assert!(gap > 2.0 * p.s * (2.0f64).powi(-(p.eta as i32)) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn block_velocity_time_support() {
        let p = BlockParams::new(1, 0.5, 0.2).unwrap();
        let mut rng = crate::test_rng(4);
        for &t in &[0.0, 0.1, 0.33, 0.67, 0.9, 1.0] {
            for _ in 0..200 {
                let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
                let (v, _) = block_velocity(t, &x, &p, 2);
                assert_eq!(linf(&v), 0.0, "field must vanish outside (1/3, 2/3)");
            }
        }
    }

    #[test]
    fn block_params_invariant() {
        assert!(BlockParams::new(1, 0.5, 0.3).is_err());
        assert!(BlockParams::new(1, 1.2, 0.2).is_err());
        assert!(BlockParams::new(1, 0.5, 0.2).is_ok());
    }
}
