//! The synchronous construction: depth-capped recursive evaluators for the
//! velocity/density pair whose density stays merely integrable.
//!
//! On every "break" interval the pair is a reversed, rescaled copy of itself
//! inside each dyadic cell of the current generation; on every "spread"
//! interval it is an explicit rescaled building block. Evaluation unrolls the
//! recursion iteratively, carrying an accumulated amplitude and spatial zoom,
//! so a point query costs O(depth).

use crate::blocks::{self, BlockParams};
use crate::ensemble::{CubeEnsemble, DensityRep, DyadicPow, Patch, PatchExp};
use crate::error::{Error, Result};
use crate::geometry::{self, Cube, Jacobian, Point};
use crate::schedule::{L1Schedule, Located, Phase, SchedulePoint};
use serde::Serialize;

/// Truncation semantics for the density recursion: `Drop` realizes the
/// literal depth-N iterate from zero, `Freeze` retains the unresolved
/// region's entering cube and so preserves mass exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityBase {
    Drop,
    Freeze,
}

/// One step of the recursive descent, for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub component: usize,
    pub interval: u64,
    pub phase: String,
}

#[derive(Debug, Clone)]
pub struct L1Params {
    pub d: usize,
    pub beta: f64,
    pub nu: f64,
    /// Target space-time Holder exponent (reporting only).
    pub alpha: f64,
    /// Velocity Sobolev exponent.
    pub p: f64,
    /// Time-integrability exponent of the density contraction space
    /// (reporting only, does not affect evaluation).
    pub s_time: f64,
    /// Negative-Sobolev exponent for the Lipschitz-in-time estimates.
    pub q: f64,
    pub depth: u32,
    pub base: DensityBase,
}

impl L1Params {
    pub fn new(d: usize, beta: f64, nu: f64, depth: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("d = {d} must be >= 2")));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} not in (0, 1)")));
        }
        if nu <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "nu = {nu} must exceed 1 (block cubes must fit inside their cells)"
            )));
        }
        Ok(L1Params {
            d,
            beta,
            nu,
            alpha: 0.05,
            p: 1.2,
            s_time: 2.0,
            q: 1.02,
            depth,
            base: DensityBase::Freeze,
        })
    }

    /// Parameters behind the published norm-versus-time figure.
    pub fn paper_defaults() -> Self {
        L1Params::new(2, 0.8, 2.3, 8).expect("valid defaults")
    }

    /// Threshold on `nu` from the velocity contraction.
    pub fn nu0(&self) -> f64 {
        1.0 - (self.beta.exp2() - 1.0).log2()
    }

    /// Threshold on `nu` printed for the asynchronous construction; the
    /// stricter of the two gates the default feasibility verdict.
    pub fn nu0_strict(&self) -> f64 {
        1.0 + self.beta - (self.beta.exp2() - 1.0).log2()
    }

    /// Feasibility conditions of the two contraction propositions.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nu <= self.nu0_strict() {
            out.push(format!("nu = {} <= nu0 = {}", self.nu, self.nu0_strict()));
        }
        if self.p >= self.nu * self.d as f64 / (self.nu + self.beta) {
            out.push(format!("p = {} >= nu d/(nu + beta)", self.p));
        }
        if self.alpha >= (1.0 - self.beta) / (1.0 + self.nu) {
            out.push(format!("alpha = {} >= (1 - beta)/(1 + nu)", self.alpha));
        }
        if self.nu < 2.0 {
            out.push(format!("nu = {} < 2 (density map hypothesis)", self.nu));
        }
        if self.nu * self.d as f64 / (1.0 - self.beta) >= self.q / (self.q - 1.0) {
            out.push(format!("q = {} fails nu d/(1 - beta) < q'", self.q));
        }
        out
    }
}

/// Spatial zoom of a break descent at generation `i`.
fn break_zoom(nu: f64, i: u64) -> f64 {
    ((1.0 + nu) * i as f64).exp2()
}

/// Block parameters of the spread phase at generation `i`.
fn spread_block(nu: f64, i: u64) -> BlockParams {
    BlockParams {
        eta: 1,
        a: (-nu * i as f64).exp2(),
        s: (-nu * (i + 1) as f64).exp2(),
    }
}

/// The synchronous velocity/density pair with its cached schedule.
#[derive(Debug, Clone)]
pub struct L1Field {
    pub params: L1Params,
    schedule: L1Schedule,
}

/// Generations beyond this leave no representable time in f64; the fields
/// are indistinguishable from their terminal values there.
const MAX_GENERATION_BITS: u64 = 58;

impl L1Field {
    pub fn new(params: L1Params) -> Result<Self> {
        let schedule = L1Schedule::new(params.beta)?;
        Ok(L1Field { params, schedule })
    }

    pub fn schedule(&self) -> &L1Schedule {
        &self.schedule
    }

    /// Initial density: `2^d` concentrated cubes on the generation-1 centers.
    pub fn boundary_in(&self) -> CubeEnsemble {
        let d = self.params.d;
        let nu = self.params.nu;
        let side = (-(1.0 + nu)).exp2();
        let value = (nu * d as f64).exp2();
        let patches = (1..=geometry::cell_count(1, d))
            .map(|k| {
                let c = geometry::center_of_index(1, k, d).expect("k in range");
                Patch {
                    cube: Cube::new(c, side),
                    value,
                    dyadic: Some(PatchExp {
                        value_exp: DyadicPow::new(0, d as i64),
                        side_exp: DyadicPow::new(-1, -1),
                    }),
                }
            })
            .collect();
        CubeEnsemble::new(patches)
    }

    /// Final density: the unit-cube indicator.
    pub fn boundary_out(&self) -> CubeEnsemble {
        CubeEnsemble::new(vec![Patch {
            cube: Cube::unit(self.params.d),
            value: 1.0,
            dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp: DyadicPow::ONE }),
        }])
    }

    pub fn velocity(&self, t: f64, x: &[f64]) -> Result<(Point, Jacobian)> {
        self.velocity_at_depth(t, x, self.params.depth)
    }

    pub fn velocity_at_depth(&self, t: f64, x: &[f64], depth: u32) -> Result<(Point, Jacobian)> {
        self.velocity_walk(t, x, depth, None)
    }

    pub fn velocity_traced(
        &self,
        t: f64,
        x: &[f64],
        depth: u32,
    ) -> Result<((Point, Jacobian), Vec<TraceStep>)> {
        let mut trace = Vec::new();
        let vj = self.velocity_walk(t, x, depth, Some(&mut trace))?;
        Ok((vj, trace))
    }

    fn velocity_walk(
        &self,
        t: f64,
        x: &[f64],
        depth: u32,
        mut trace: Option<&mut Vec<TraceStep>>,
    ) -> Result<(Point, Jacobian)> {
        let d = self.params.d;
        let nu = self.params.nu;
        let zero = (geometry::zero_vector(d), Jacobian::zeros(d));
        let mut t = t;
        let mut x: Point = x.iter().copied().collect();
        let mut amp = 1.0f64;
        let mut zoom_total = 1.0f64;
        let mut budget = depth;
        loop {
            let point = match self.schedule.locate(t)? {
                Located::Terminal => return Ok(zero),
                Located::At(p) => p,
            };
            let i = point.index;
            if i * d as u64 > MAX_GENERATION_BITS {
                return Ok(zero);
            }
            let Some(k) = geometry::index_of_point(i as u32, &x, d) else {
                return Ok(zero);
            };
            let c = geometry::center_of_index(i as u32, k, d).expect("located cell");
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(TraceStep {
                    component: 1,
                    interval: i,
                    phase: trace_phase_name(point.phase).into(),
                });
            }
            match point.phase {
                Phase::Break => {
                    if budget == 0 {
                        return Ok(zero);
                    }
                    let zoom = break_zoom(nu, i);
                    amp *= -point.scale / zoom;
                    for (xl, cl) in x.iter_mut().zip(&c) {
                        *xl = (*xl - cl) * zoom;
                    }
                    zoom_total *= zoom;
                    t = point.local;
                    budget -= 1;
                }
                Phase::Spread => {
                    let zoom = (i as f64).exp2();
                    let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
                    let bp = spread_block(nu, i);
                    let (mut v, mut jac) = blocks::block_velocity(point.local, &y, &bp, d);
                    let pref = amp * point.scale / zoom;
                    for vl in v.iter_mut() {
                        *vl *= pref;
                    }
                    jac.scale(pref * zoom * zoom_total);
                    return Ok((v, jac));
                }
                Phase::Handoff => unreachable!("synchronous schedule has no handoff"),
            }
        }
    }

    pub fn density(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.density_at_depth(t, x, self.params.depth)
    }

    pub fn density_at_depth(&self, t: f64, x: &[f64], depth: u32) -> Result<f64> {
        let d = self.params.d;
        let nu = self.params.nu;
        let mut t = t;
        let mut x: Point = x.iter().copied().collect();
        let mut acc = DyadicPow::ONE;
        let mut budget = depth;
        loop {
            let point = match self.schedule.locate(t)? {
                Located::Terminal => {
                    return Ok(if geometry::linf(&x) <= 0.5 { acc.value(nu) } else { 0.0 });
                }
                Located::At(p) => p,
            };
            let i = point.index;
            if i * d as u64 > MAX_GENERATION_BITS {
                return Ok(0.0);
            }
            let Some(k) = geometry::index_of_point(i as u32, &x, d) else {
                return Ok(0.0);
            };
            let c = geometry::center_of_index(i as u32, k, d).expect("located cell");
            match point.phase {
                Phase::Break => {
                    let zoom = break_zoom(nu, i);
                    let gain = DyadicPow::new(0, (d as u64 * i) as i64);
                    if budget == 0 {
                        return Ok(match self.params.base {
                            DensityBase::Drop => 0.0,
                            DensityBase::Freeze => {
                                // entering configuration: the generation-i cube
                                let y: Point =
                                    x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
                                if geometry::linf(&y) <= 0.5 {
                                    acc.add(gain).value(nu)
                                } else {
                                    0.0
                                }
                            }
                        });
                    }
                    acc = acc.add(gain);
                    for (xl, cl) in x.iter_mut().zip(&c) {
                        *xl = (*xl - cl) * zoom;
                    }
                    t = point.local;
                    budget -= 1;
                }
                Phase::Spread => {
                    let zoom = (i as f64).exp2();
                    let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
                    let bp = spread_block(nu, i);
                    let hit = blocks::block_density(point.local, &y, &bp, d);
                    return Ok(if hit > 0.0 {
                        acc.add(DyadicPow::new(0, (d as u64 * (i + 1)) as i64)).value(nu)
                    } else {
                        0.0
                    });
                }
                Phase::Handoff => unreachable!(),
            }
        }
    }

    /// Exact hierarchical density representation at time `t`.
    pub fn density_rep(&self, t: f64) -> Result<DensityRep> {
        self.density_rep_at_depth(t, self.params.depth)
    }

    pub fn density_rep_at_depth(&self, t: f64, depth: u32) -> Result<DensityRep> {
        let point = match self.schedule.locate(t)? {
            Located::Terminal => return Ok(unit_patches(self.params.d)),
            Located::At(p) => p,
        };
        Ok(self.rep_walk(point, depth))
    }

    fn rep_walk(&self, point: SchedulePoint, budget: u32) -> DensityRep {
        let d = self.params.d;
        let nu = self.params.nu;
        let i = point.index;
        if i * d as u64 > MAX_GENERATION_BITS {
            return DensityRep::empty();
        }
        match point.phase {
            Phase::Break => {
                let zoom = break_zoom(nu, i);
                let zoom_exp = DyadicPow::new(i as i64, i as i64);
                let value_exp = DyadicPow::new(0, (d as u64 * i) as i64);
                let inner = if budget == 0 {
                    match self.params.base {
                        DensityBase::Drop => return DensityRep::empty(),
                        DensityBase::Freeze => unit_patches(d),
                    }
                } else {
                    match self.schedule.locate(point.local).expect("local time in range") {
                        Located::Terminal => unit_patches(d),
                        Located::At(p) => self.rep_walk(p, budget - 1),
                    }
                };
                DensityRep::Tiled {
                    gen: i as u32,
                    inner: Box::new(DensityRep::Scaled {
                        zoom,
                        zoom_exp,
                        value: value_exp.value(nu),
                        value_exp,
                        inner: Box::new(inner),
                    }),
                }
            }
            Phase::Spread => {
                let bp = spread_block(nu, i);
                let value_exp = DyadicPow::new(0, (d as u64 * (i + 1)) as i64);
                DensityRep::Tiled {
                    gen: i as u32,
                    inner: Box::new(DensityRep::Scaled {
                        zoom: (i as f64).exp2(),
                        zoom_exp: DyadicPow::new(i as i64, 0),
                        value: value_exp.value(nu),
                        value_exp,
                        inner: Box::new(block_patches(point.local, &bp, d, i)),
                    }),
                }
            }
            Phase::Handoff => unreachable!(),
        }
    }

    /// Flat exact ensemble; fails when the time requires more than `limit`
    /// cubes (late times tile exponentially many cells).
    pub fn density_cubes(&self, t: f64, limit: usize) -> Result<Option<CubeEnsemble>> {
        let rep = self.density_rep(t)?;
        Ok(rep.flatten(self.params.d, self.params.nu, limit))
    }
}

pub(crate) fn trace_phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Break => "break",
        Phase::Spread => "spread",
        Phase::Handoff => "handoff",
    }
}

fn unit_patches(d: usize) -> DensityRep {
    DensityRep::Patches(vec![Patch {
        cube: Cube::unit(d),
        value: 1.0,
        dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp: DyadicPow::ONE }),
    }])
}

/// Moving block cubes as dyadic patches (generation index `i` fixes the
/// exponent bookkeeping of the side `2^{-nu (i+1) - eta}`).
fn block_patches(t_local: f64, bp: &BlockParams, d: usize, i: u64) -> DensityRep {
    let ens = blocks::block_cubes(t_local, bp, d);
    let side_exp = DyadicPow::new(-(bp.eta as i64), -((i + 1) as i64));
    let patches = ens
        .patches
        .into_iter()
        .map(|p| Patch {
            cube: p.cube,
            value: 1.0,
            dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp }),
        })
        .collect();
    DensityRep::Patches(patches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> L1Field {
        L1Field::new(L1Params::paper_defaults()).unwrap()
    }

    #[test]
    fn velocity_vanishes_at_time_zero_and_one() {
        let f = field();
        let mut rng = crate::test_rng(21);
        for _ in 0..100 {
            let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
            let (v, _) = f.velocity(0.0, &x).unwrap();
            assert_eq!(geometry::linf(&v), 0.0);
            let (v, _) = f.velocity(1.0, &x).unwrap();
            assert_eq!(geometry::linf(&v), 0.0);
        }
    }

    #[test]
    fn velocity_vanishes_outside_unit_cube() {
        let f = field();
        let (v, _) = f.velocity(0.3, &[0.7, 0.1]).unwrap();
        assert_eq!(geometry::linf(&v), 0.0);
    }

    #[test]
    fn density_boundary_values() {
        let f = field();
        // initial cubes carry the concentrated value
        let want = (f.params.nu * 2.0).exp2();
        assert_eq!(f.density(0.0, &[-0.25, -0.25]).unwrap(), want);
        assert_eq!(f.density(0.0, &[0.25, 0.25]).unwrap(), want);
        assert_eq!(f.density(0.0, &[0.0, 0.0]).unwrap(), 0.0);
        // final density is the unit indicator
        assert_eq!(f.density(1.0, &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(f.density(1.0, &[0.51, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn density_matches_boundary_ensembles() {
        let f = field();
        let rho_in = f.boundary_in();
        let mut rng = crate::test_rng(5);
        for _ in 0..2000 {
            let x = [crate::runif(&mut rng, -0.55, 0.55), crate::runif(&mut rng, -0.55, 0.55)];
            assert_eq!(f.density(0.0, &x).unwrap(), rho_in.value_at(&x));
        }
        assert!((rho_in.mass(f.params.nu) - 1.0).abs() == 0.0, "initial mass exactly 1");
    }

    #[test]
    fn velocity_self_similarity_on_break_intervals() {
        let f = field();
        let nu = f.params.nu;
        let mut rng = crate::test_rng(9);
        for _ in 0..200 {
            let t = crate::runif(&mut rng, 0.01, 0.2); // inside E_1 = [0, ~0.21)
            let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
            let p = f.schedule.locate(t).unwrap().point().unwrap();
            if p.phase != Phase::Break || p.index != 1 {
                continue;
            }
            let (v, _) = f.velocity_at_depth(t, &x, 6).unwrap();
            let k = geometry::index_of_point(1, &x, 2).unwrap();
            let c = geometry::center_of_index(1, k, 2).unwrap();
            let zoom = break_zoom(nu, 1);
            let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
            let (vin, _) = f.velocity_at_depth(p.local, &y, 5).unwrap();
            for l in 0..2 {
                let want = -(p.scale / zoom) * vin[l];
                assert!((v[l] - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn density_values_live_on_the_dyadic_lattice() {
        let f = field();
        let nu = f.params.nu;
        let mut rng = crate::test_rng(13);
        let mut allowed = vec![0.0];
        for i in 1..=(f.params.depth as i32 + 2) {
            allowed.push((nu * 2.0 * i as f64).exp2());
        }
        for _ in 0..5000 {
            let t = crate::runif(&mut rng, 0.0, 0.999);
            let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
            let v = f.density(t, &x).unwrap();
            assert!(
                allowed.iter().any(|a| (a - v).abs() <= 1e-9 * (1.0 + a)),
                "value {v} off the lattice at t={t}"
            );
        }
    }

    #[test]
    fn rep_mass_is_exactly_one_in_freeze_mode() {
        let f = field();
        for j in 0..50 {
            let t = j as f64 / 50.0;
            let rep = f.density_rep(t).unwrap();
            assert_eq!(rep.mass(2, f.params.nu, DyadicPow::ONE), 1.0, "mass at t = {t}");
        }
    }

    #[test]
    fn rep_agrees_pointwise_with_evaluator() {
        let f = field();
        let mut rng = crate::test_rng(17);
        for _ in 0..300 {
            let t = crate::runif(&mut rng, 0.0, 0.95);
            let rep = f.density_rep_at_depth(t, 5).unwrap();
            for _ in 0..30 {
                let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
                let a = f.density_at_depth(t, &x, 5).unwrap();
                let b = rep.value_at(&x, 2, f.params.nu, DyadicPow::ONE);
                assert_eq!(a, b, "t={t} x={x:?}");
            }
        }
    }

    #[test]
    fn density_cubes_at_time_zero_is_the_initial_ensemble() {
        let f = field();
        let ens = f.density_cubes(0.0, 1 << 20).unwrap().unwrap();
        assert_eq!(ens.len(), 4);
        let reference = f.boundary_in();
        let mut rng = crate::test_rng(23);
        for _ in 0..1000 {
            let x = [crate::runif(&mut rng, -0.5, 0.5), crate::runif(&mut rng, -0.5, 0.5)];
            assert_eq!(ens.value_at(&x), reference.value_at(&x));
        }
    }

    #[test]
    fn drop_mode_mass_deficit_shrinks_with_depth() {
        let mut params = L1Params::paper_defaults();
        params.base = DensityBase::Drop;
        let f = L1Field::new(params).unwrap();
        for j in 1..10 {
            let t = j as f64 / 10.0;
            let mut last = f64::INFINITY;
            for depth in (2..=8).step_by(2) {
                let rep = f.density_rep_at_depth(t, depth).unwrap();
                let deficit = 1.0 - rep.mass(2, f.params.nu, DyadicPow::ONE);
                assert!(deficit <= last + 1e-15, "deficit not monotone at t={t}");
                last = deficit;
            }
        }
    }
}
