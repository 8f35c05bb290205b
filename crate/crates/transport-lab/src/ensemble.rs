//! Exact piecewise-constant density representations.
//!
//! Every map in either construction sends finite disjoint unions of
//! constant-value cubes to finite disjoint unions of constant-value cubes, so
//! the density at any time is representable exactly. Two forms coexist:
//!
//! * [`CubeEnsemble`] — a flat list of `(cube, value)` patches;
//! * [`DensityRep`] — a hierarchical form in which a level holds one shared
//!   sub-representation per dyadic cell. Masses, `L^r` integrals, and point
//!   values are computed recursively without materializing the (potentially
//!   astronomically large) flat list.
//!
//! Values and cube sides produced by the constructions are powers
//! `2^(a + nu*b)` with integer `a`, `b`; per-cube masses always cancel the
//! irrational part, so total mass is evaluated in exact integer-exponent
//! arithmetic.

use crate::geometry::{self, Cube, Point};

/// Exponent of a power `2^(plain + nu_coef * nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DyadicPow {
    pub plain: i64,
    pub nu_coef: i64,
}

impl DyadicPow {
    pub const ONE: DyadicPow = DyadicPow { plain: 0, nu_coef: 0 };

    pub fn new(plain: i64, nu_coef: i64) -> Self {
        DyadicPow { plain, nu_coef }
    }

    pub fn add(self, o: DyadicPow) -> Self {
        DyadicPow { plain: self.plain + o.plain, nu_coef: self.nu_coef + o.nu_coef }
    }

    pub fn mul_int(self, m: i64) -> Self {
        DyadicPow { plain: self.plain * m, nu_coef: self.nu_coef * m }
    }

    pub fn exponent(self, nu: f64) -> f64 {
        self.plain as f64 + nu * self.nu_coef as f64
    }

    pub fn value(self, nu: f64) -> f64 {
        self.exponent(nu).exp2()
    }
}

/// One constant-value cube. When the value and side are dyadic powers the
/// exponents ride along and enable exact mass arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub cube: Cube,
    pub value: f64,
    pub dyadic: Option<PatchExp>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchExp {
    pub value_exp: DyadicPow,
    pub side_exp: DyadicPow,
}

impl Patch {
    pub fn plain(cube: Cube, value: f64) -> Self {
        Patch { cube, value, dyadic: None }
    }

    pub fn mass(&self, nu: f64) -> f64 {
        let d = self.cube.dim() as i64;
        match self.dyadic {
            Some(e) => {
                let total = e.value_exp.add(e.side_exp.mul_int(d));
                total.value(nu)
            }
            None => self.value * self.cube.volume(),
        }
    }
}

/// Finite list of disjoint constant-value cubes.
#[derive(Debug, Clone, Default)]
pub struct CubeEnsemble {
    pub patches: Vec<Patch>,
}

impl CubeEnsemble {
    pub fn new(patches: Vec<Patch>) -> Self {
        CubeEnsemble { patches }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Total mass, exact for dyadic patches.
    pub fn mass(&self, nu: f64) -> f64 {
        self.patches.iter().map(|p| p.mass(nu)).sum()
    }

    /// Pointwise value; the patches are disjoint so the first hit wins.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        for p in &self.patches {
            if p.cube.contains(x) {
                return p.value;
            }
        }
        0.0
    }
}

/// Hierarchical exact density form. Coordinates are local to the node; the
/// root frame is the unit cube `[-1/2, 1/2]^d`.
#[derive(Debug, Clone)]
pub enum DensityRep {
    /// Explicit disjoint patches.
    Patches(Vec<Patch>),
    /// `x -> value * inner(zoom * x)`.
    Scaled { zoom: f64, zoom_exp: DyadicPow, value: f64, value_exp: DyadicPow, inner: Box<DensityRep> },
    /// One translated copy of `inner` per generation-`gen` cell:
    /// on cell k the value is `inner(x - c_k)`.
    Tiled { gen: u32, inner: Box<DensityRep> },
    /// Asynchronous split at generation `eta`: cells before `active_k` carry
    /// value 1 on the whole cell, cells after it carry one concentrated cube
    /// (side `frozen_side`, value `frozen_value`) at the cell center, and the
    /// active cell carries `inner` translated to its center.
    Cells {
        eta: u32,
        active_k: u64,
        frozen_value: f64,
        frozen_value_exp: DyadicPow,
        frozen_side: f64,
        frozen_side_exp: DyadicPow,
        inner: Box<DensityRep>,
    },
}

impl DensityRep {
    pub fn empty() -> Self {
        DensityRep::Patches(Vec::new())
    }

    /// Total mass with the multiplicative prefactor `2^acc`; exact whenever
    /// every leaf is dyadic.
    pub fn mass(&self, d: usize, nu: f64, acc: DyadicPow) -> f64 {
        match self {
            DensityRep::Patches(ps) => ps
                .iter()
                .map(|p| match p.dyadic {
                    Some(e) => acc.add(e.value_exp).add(e.side_exp.mul_int(d as i64)).value(nu),
                    None => acc.value(nu) * p.value * p.cube.volume(),
                })
                .sum(),
            DensityRep::Scaled { zoom_exp, value_exp, inner, .. } => {
                inner.mass(d, nu, acc.add(*value_exp).add(zoom_exp.mul_int(-(d as i64))))
            }
            DensityRep::Tiled { gen, inner } => {
                inner.mass(d, nu, acc.add(DyadicPow::new((*gen as i64) * d as i64, 0)))
            }
            DensityRep::Cells {
                eta,
                active_k,
                frozen_value_exp,
                frozen_side_exp,
                inner,
                ..
            } => {
                let cells = geometry::cell_count(*eta, d);
                let cell_exp = DyadicPow::new(-((*eta as i64) * d as i64), 0);
                let done = (*active_k - 1) as f64 * acc.add(cell_exp).value(nu);
                let frozen_exp = acc.add(*frozen_value_exp).add(frozen_side_exp.mul_int(d as i64));
                let pending = (cells - *active_k) as f64 * frozen_exp.value(nu);
                done + pending + inner.mass(d, nu, acc)
            }
        }
    }

    /// `integral of rho^r` with the prefactor `2^acc_log2` applied to rho.
    pub fn power_integral(&self, r: f64, d: usize, nu: f64, acc_log2: f64) -> f64 {
        match self {
            DensityRep::Patches(ps) => ps
                .iter()
                .map(|p| {
                    let (lv, ls) = match p.dyadic {
                        Some(e) => (e.value_exp.exponent(nu), e.side_exp.exponent(nu)),
                        None => (p.value.log2(), p.cube.side.log2()),
                    };
                    (r * (acc_log2 + lv) + d as f64 * ls).exp2()
                })
                .sum(),
            DensityRep::Scaled { zoom_exp, value_exp, inner, .. } => {
                // change of variables: value^r pulls into the prefactor, the
                // zoom contributes the Jacobian factor zoom^-d
                (-(zoom_exp.exponent(nu)) * d as f64).exp2()
                    * inner.power_integral(r, d, nu, acc_log2 + value_exp.exponent(nu))
            }
            DensityRep::Tiled { gen, inner } => {
                ((*gen as f64) * d as f64).exp2() * inner.power_integral(r, d, nu, acc_log2)
            }
            DensityRep::Cells {
                eta,
                active_k,
                frozen_value_exp,
                frozen_side_exp,
                inner,
                ..
            } => {
                let cells = geometry::cell_count(*eta, d);
                let cell_area = (-((*eta as f64) * d as f64)).exp2();
                let done = (*active_k - 1) as f64 * (r * acc_log2).exp2() * cell_area;
                let pend_one = (r * (acc_log2 + frozen_value_exp.exponent(nu))
                    + d as f64 * frozen_side_exp.exponent(nu))
                .exp2();
                let pending = (cells - *active_k) as f64 * pend_one;
                done + pending + inner.power_integral(r, d, nu, acc_log2)
            }
        }
    }

    /// `L^r` norm of the represented density.
    pub fn norm_lr(&self, r: f64, d: usize, nu: f64) -> f64 {
        self.power_integral(r, d, nu, 0.0).powf(1.0 / r)
    }

    /// Pointwise value; mirrors the recursive evaluators bit for bit.
    pub fn value_at(&self, x: &[f64], d: usize, nu: f64, acc: DyadicPow) -> f64 {
        match self {
            DensityRep::Patches(ps) => {
                for p in ps {
                    if p.cube.contains(x) {
                        return match p.dyadic {
                            Some(e) => acc.add(e.value_exp).value(nu),
                            None => acc.value(nu) * p.value,
                        };
                    }
                }
                0.0
            }
            DensityRep::Scaled { zoom, value_exp, inner, .. } => {
                let y: Point = x.iter().map(|v| v * zoom).collect();
                inner.value_at(&y, d, nu, acc.add(*value_exp))
            }
            DensityRep::Tiled { gen, inner } => match geometry::index_of_point(*gen, x, d) {
                None => 0.0,
                Some(k) => {
                    let c = geometry::center_of_index(*gen, k, d).expect("k from index_of_point");
                    let y: Point = x.iter().zip(&c).map(|(v, cl)| v - cl).collect();
                    inner.value_at(&y, d, nu, acc)
                }
            },
            DensityRep::Cells {
                eta,
                active_k,
                frozen_value_exp,
                frozen_side,
                inner,
                ..
            } => match geometry::index_of_point(*eta, x, d) {
                None => 0.0,
                Some(k) => {
                    let c = geometry::center_of_index(*eta, k, d).expect("k from index_of_point");
                    if k < *active_k {
                        acc.value(nu)
                    } else if k > *active_k {
                        let y: Point = x.iter().zip(&c).map(|(v, cl)| v - cl).collect();
                        if geometry::linf(&y) <= 0.5 * frozen_side {
                            acc.add(*frozen_value_exp).value(nu)
                        } else {
                            0.0
                        }
                    } else {
                        let y: Point = x.iter().zip(&c).map(|(v, cl)| v - cl).collect();
                        inner.value_at(&y, d, nu, acc)
                    }
                }
            },
        }
    }

    /// Number of flat cubes the representation expands to, saturating at `cap`.
    pub fn leaf_count(&self, d: usize, cap: u64) -> u64 {
        match self {
            DensityRep::Patches(ps) => (ps.len() as u64).min(cap),
            DensityRep::Scaled { inner, .. } => inner.leaf_count(d, cap),
            DensityRep::Tiled { gen, inner } => {
                let cells = geometry::cell_count(*gen, d);
                inner.leaf_count(d, cap).saturating_mul(cells).min(cap)
            }
            DensityRep::Cells { eta, inner, .. } => {
                let cells = geometry::cell_count(*eta, d);
                (cells - 1).saturating_add(inner.leaf_count(d, cap)).min(cap)
            }
        }
    }

    /// `integral of rho * f` by per-cube tensor Gauss quadrature; `h` bounds
    /// the panel size so large cubes are subdivided.
    pub fn integrate(&self, d: usize, nu: f64, f: &dyn Fn(&[f64]) -> f64, h: f64) -> f64 {
        let offset = geometry::zero_vector(d);
        self.integrate_rec(d, nu, f, h, 1.0, &offset, 0.0)
    }

    fn integrate_rec(
        &self,
        d: usize,
        nu: f64,
        f: &dyn Fn(&[f64]) -> f64,
        h: f64,
        scale: f64,
        offset: &Point,
        acc_log2: f64,
    ) -> f64 {
        match self {
            DensityRep::Patches(ps) => ps
                .iter()
                .map(|p| {
                    let lv = match p.dyadic {
                        Some(e) => e.value_exp.exponent(nu),
                        None => p.value.log2(),
                    };
                    let value = (acc_log2 + lv).exp2();
                    let center: Point =
                        offset.iter().zip(&p.cube.center).map(|(o, c)| o + c / scale).collect();
                    let side = p.cube.side / scale;
                    value * gauss_cube(f, &center, side, d, h)
                })
                .sum(),
            DensityRep::Scaled { zoom, value_exp, inner, .. } => inner.integrate_rec(
                d,
                nu,
                f,
                h,
                scale * zoom,
                offset,
                acc_log2 + value_exp.exponent(nu),
            ),
            DensityRep::Tiled { gen, inner } => {
                let cells = geometry::cell_count(*gen, d);
                let mut total = 0.0;
                for k in 1..=cells {
                    let c = geometry::center_of_index(*gen, k, d).expect("valid k");
                    let o: Point = offset.iter().zip(&c).map(|(ol, cl)| ol + cl / scale).collect();
                    total += inner.integrate_rec(d, nu, f, h, scale, &o, acc_log2);
                }
                total
            }
            DensityRep::Cells {
                eta,
                active_k,
                frozen_value_exp,
                frozen_side,
                frozen_side_exp,
                inner,
                ..
            } => {
                let cells = geometry::cell_count(*eta, d);
                let cell_side = (-(*eta as f64)).exp2();
                let mut total = 0.0;
                for k in 1..=cells {
                    let c = geometry::center_of_index(*eta, k, d).expect("valid k");
                    let o: Point = offset.iter().zip(&c).map(|(ol, cl)| ol + cl / scale).collect();
                    if k < *active_k {
                        total += acc_log2.exp2() * gauss_cube(f, &o, cell_side / scale, d, h);
                    } else if k > *active_k {
                        let _ = frozen_side_exp;
                        let v = (acc_log2 + frozen_value_exp.exponent(nu)).exp2();
                        total += v * gauss_cube(f, &o, frozen_side / scale, d, h);
                    } else {
                        total += inner.integrate_rec(d, nu, f, h, scale, &o, acc_log2);
                    }
                }
                total
            }
        }
    }

    /// Materialize the flat ensemble in root coordinates, failing when it
    /// would exceed `limit` patches.
    pub fn flatten(&self, d: usize, nu: f64, limit: usize) -> Option<CubeEnsemble> {
        let mut out = Vec::new();
        let offset = geometry::zero_vector(d);
        if self.flatten_rec(d, nu, 1.0, &offset, DyadicPow::ONE, DyadicPow::ONE, &mut out, limit) {
            Some(CubeEnsemble::new(out))
        } else {
            None
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn flatten_rec(
        &self,
        d: usize,
        nu: f64,
        scale: f64,
        offset: &Point,
        acc_value: DyadicPow,
        acc_zoom: DyadicPow,
        out: &mut Vec<Patch>,
        limit: usize,
    ) -> bool {
        match self {
            DensityRep::Patches(ps) => {
                for p in ps {
                    if out.len() >= limit {
                        return false;
                    }
                    let center: Point =
                        offset.iter().zip(&p.cube.center).map(|(o, c)| o + c / scale).collect();
                    let side = p.cube.side / scale;
                    let (value, dyadic) = match p.dyadic {
                        Some(e) => {
                            let ve = acc_value.add(e.value_exp);
                            let se = e.side_exp.add(acc_zoom.mul_int(-1));
                            (ve.value(nu), Some(PatchExp { value_exp: ve, side_exp: se }))
                        }
                        None => (acc_value.value(nu) * p.value, None),
                    };
                    out.push(Patch { cube: Cube::new(center, side), value, dyadic });
                }
                true
            }
            DensityRep::Scaled { zoom, zoom_exp, value_exp, inner, .. } => inner.flatten_rec(
                d,
                nu,
                scale * zoom,
                offset,
                acc_value.add(*value_exp),
                acc_zoom.add(*zoom_exp),
                out,
                limit,
            ),
            DensityRep::Tiled { gen, inner } => {
                for k in 1..=geometry::cell_count(*gen, d) {
                    let c = geometry::center_of_index(*gen, k, d).expect("valid k");
                    let o: Point = offset.iter().zip(&c).map(|(ol, cl)| ol + cl / scale).collect();
                    if !inner.flatten_rec(d, nu, scale, &o, acc_value, acc_zoom, out, limit) {
                        return false;
                    }
                }
                true
            }
            DensityRep::Cells {
                eta,
                active_k,
                frozen_value_exp,
                frozen_side,
                frozen_side_exp,
                inner,
                ..
            } => {
                let cell_side = (-(*eta as f64)).exp2();
                let cell_exp = DyadicPow::new(-(*eta as i64), 0);
                for k in 1..=geometry::cell_count(*eta, d) {
                    if out.len() >= limit {
                        return false;
                    }
                    let c = geometry::center_of_index(*eta, k, d).expect("valid k");
                    let o: Point = offset.iter().zip(&c).map(|(ol, cl)| ol + cl / scale).collect();
                    if k < *active_k {
                        let ve = acc_value;
                        let se = cell_exp.add(acc_zoom.mul_int(-1));
                        out.push(Patch {
                            cube: Cube::new(o, cell_side / scale),
                            value: ve.value(nu),
                            dyadic: Some(PatchExp { value_exp: ve, side_exp: se }),
                        });
                    } else if k > *active_k {
                        let ve = acc_value.add(*frozen_value_exp);
                        let se = frozen_side_exp.add(acc_zoom.mul_int(-1));
                        out.push(Patch {
                            cube: Cube::new(o, frozen_side / scale),
                            value: ve.value(nu),
                            dyadic: Some(PatchExp { value_exp: ve, side_exp: se }),
                        });
                    } else if !inner.flatten_rec(d, nu, scale, &o, acc_value, acc_zoom, out, limit)
                    {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// Tensor-product Gauss-Legendre quadrature of `f` over a cube, subdividing
/// into panels no wider than `32 h` per axis.
pub fn gauss_cube(f: &dyn Fn(&[f64]) -> f64, center: &[f64], side: f64, d: usize, h: f64) -> f64 {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let panels = ((side / (32.0 * h)).ceil() as usize).clamp(1, 64);
    let pw = side / panels as f64;
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0f64; d];
    // odometer over panel grid x node grid per axis
    let mut panel_idx = vec![0usize; d];
    loop {
        // integrate one panel
        loop {
            let mut w = 1.0;
            for l in 0..d {
                let lo = center[l] - 0.5 * side + panel_idx[l] as f64 * pw;
                x[l] = lo + 0.5 * pw * (1.0 + NODES[idx[l]]);
                w *= 0.5 * pw * WEIGHTS[idx[l]];
            }
            total += w * f(&x);
            let mut l = 0;
            loop {
                if l == d {
                    break;
                }
                idx[l] += 1;
                if idx[l] < NODES.len() {
                    break;
                }
                idx[l] = 0;
                l += 1;
            }
            if l == d {
                break;
            }
        }
        let mut l = 0;
        loop {
            if l == d {
                break;
            }
            panel_idx[l] += 1;
            if panel_idx[l] < panels {
                break;
            }
            panel_idx[l] = 0;
            l += 1;
        }
        if l == d {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cube;

    #[test]
    fn ensemble_mass_and_point_values() {
        let out = CubeEnsemble::new(vec![Patch {
            cube: Cube::unit(2),
            value: 1.0,
            dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp: DyadicPow::ONE }),
        }]);
        assert_eq!(out.mass(2.3), 1.0);
        assert_eq!(out.value_at(&[0.0, 0.0]), 1.0);
        assert_eq!(out.value_at(&[0.6, 0.0]), 0.0);
        assert_eq!(CubeEnsemble::default().mass(2.3), 0.0);
    }

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        let c = [0.1, -0.2];
        let v = gauss_cube(&|x: &[f64]| x[0] * x[0] * x[1], &c, 0.4, 2, 1.0 / 64.0);
        // integral of x^2 y over [0.1 +- 0.2] x [-0.2 +- 0.2]
        let ix = ((0.3f64).powi(3) - (-0.1f64).powi(3)) / 3.0;
        let iy = ((0.0f64).powi(2) - (-0.4f64).powi(2)) / 2.0;
        assert!((v - ix * iy).abs() < 1e-14);
    }

    #[test]
    fn scaled_tiled_mass_is_exact() {
        // 4 cells, each holding a value-4 cube of side 2^-3 zoomed by 2:
        // rho|cell = 4 * 1_{side 1/8}(2(x - c_k)) -> per-cell mass 4/256, total 1/16.
        let inner = DensityRep::Patches(vec![Patch {
            cube: Cube::new(geometry::zero_vector(2), 0.125),
            value: 4.0,
            dyadic: Some(PatchExp {
                value_exp: DyadicPow::new(2, 0),
                side_exp: DyadicPow::new(-3, 0),
            }),
        }]);
        let rep = DensityRep::Tiled {
            gen: 1,
            inner: Box::new(DensityRep::Scaled {
                zoom: 2.0,
                zoom_exp: DyadicPow::new(1, 0),
                value: 1.0,
                value_exp: DyadicPow::ONE,
                inner: Box::new(inner),
            }),
        };
        assert_eq!(rep.mass(2, 2.3, DyadicPow::ONE), 1.0 / 16.0);
        let flat = rep.flatten(2, 2.3, 64).unwrap();
        assert_eq!(flat.len(), 4);
        assert!((flat.mass(2.3) - rep.mass(2, 2.3, DyadicPow::ONE)).abs() < 1e-18);
    }
}
