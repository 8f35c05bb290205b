//! The asynchronous construction: sequence-indexed evaluators for the fixed
//! points of the velocity and density self-maps whose density stays in `L^r`
//! throughout.
//!
//! Component `i` concentrates on `2^{eta d}` cubes of side `2^-(eta + nu i)`.
//! During the k-th time slot only the k-th cell evolves: a reversed rescaled
//! copy of component 1 breaks its cube, an explicit building block spreads
//! the pieces, and component `i+1` finishes the job; all other cells sit
//! frozen in their initial or final configuration.

use crate::blocks::{self, BlockParams};
use crate::ensemble::{CubeEnsemble, DensityRep, DyadicPow, Patch, PatchExp};
use crate::error::{Error, Result};
use crate::geometry::{self, Cube, Jacobian, Point};
use crate::l1::{DensityBase, TraceStep};
use crate::schedule::{Located, LrSchedule, Phase, SchedulePoint};

#[derive(Debug, Clone)]
pub struct LrParams {
    pub d: usize,
    pub beta: f64,
    pub nu: f64,
    pub eta: u32,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    /// Sequence weights of the three contraction spaces; `None` selects the
    /// closed-form defaults.
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub gamma3: Option<f64>,
    pub depth: u32,
    pub base: DensityBase,
    /// Sign of the reversed-copy prefactor. The printed map carries `+1`;
    /// the weak-form residual vanishes with `-1`, which is the default.
    pub break_sign: f64,
}

impl LrParams {
    pub fn new(d: usize, beta: f64, nu: f64, eta: u32, depth: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("d = {d} must be >= 2")));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} not in (0, 1)")));
        }
        if nu <= 1.0 {
            return Err(Error::InvalidParameter(format!("nu = {nu} must exceed 1")));
        }
        if eta == 0 || eta as usize * d > 40 {
            return Err(Error::InvalidParameter(format!("eta = {eta} out of range")));
        }
        let q_max = Self::q_upper(d, nu, eta, beta);
        Ok(LrParams {
            d,
            beta,
            nu,
            eta,
            p: 1.2,
            r: 1.5,
            q: 0.5 * (1.0 + q_max),
            gamma1: None,
            gamma2: None,
            gamma3: None,
            depth,
            base: DensityBase::Freeze,
            break_sign: -1.0,
        })
    }

    /// Parameters behind the published norm-versus-time figure.
    pub fn paper_defaults() -> Self {
        LrParams::new(2, 0.8, 2.3, 2, 8).expect("valid defaults")
    }

    pub fn q_upper(d: usize, nu: f64, eta: u32, beta: f64) -> f64 {
        let ed = eta as f64;
        let dd = d as f64;
        (ed * dd + nu * dd) / (ed * dd + nu * dd + beta - ed)
    }

    /// `nu0 = 1 + beta - log2(2^beta - 1)`.
    pub fn nu0(&self) -> f64 {
        1.0 + self.beta - (self.beta.exp2() - 1.0).log2()
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1.unwrap_or(self.nu * (1.0 - self.d as f64 / self.p))
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2.unwrap_or(self.nu * self.d as f64 * (1.0 - 1.0 / self.r))
    }

    pub fn gamma3(&self) -> f64 {
        self.gamma3.unwrap_or(self.nu * self.d as f64 * (1.0 - 1.0 / self.q))
    }

    /// Feasibility conditions of the two contraction propositions.
    pub fn violations(&self) -> Vec<String> {
        let (d, nu, eta, beta) = (self.d as f64, self.nu, self.eta as f64, self.beta);
        let mut out = Vec::new();
        if self.nu <= self.nu0() {
            out.push(format!("nu = {} <= nu0 = {}", self.nu, self.nu0()));
        }
        let p_max = (eta + nu) * d / (eta * d + nu + beta);
        if self.p >= p_max {
            out.push(format!("p = {} >= {p_max}", self.p));
        }
        let r_max = (eta + nu) / nu;
        if self.r >= r_max {
            out.push(format!("r = {} >= {r_max}", self.r));
        }
        let q_max = Self::q_upper(self.d, nu, self.eta, beta);
        if !(1.0 < self.q && self.q < q_max) {
            out.push(format!("q = {} outside (1, {q_max})", self.q));
        }
        out
    }
}

/// Side of the concentrated cube of component `i`: `2^-(eta + nu i)`.
fn concentrated_side(eta: u32, nu: f64, i: usize) -> f64 {
    (-(eta as f64 + nu * i as f64)).exp2()
}

/// Spatial zoom of a break descent from component `i`.
fn break_zoom(eta: u32, nu: f64, i: usize) -> f64 {
    (eta as f64 + nu * i as f64).exp2()
}

fn spread_block(eta: u32, nu: f64, i: usize) -> BlockParams {
    BlockParams {
        eta,
        a: (-nu * i as f64).exp2(),
        s: (-nu * (i + 1) as f64).exp2(),
    }
}

/// The asynchronous velocity/density sequence with its cached schedule.
#[derive(Debug, Clone)]
pub struct LrField {
    pub params: LrParams,
    schedule: LrSchedule,
}

impl LrField {
    pub fn new(params: LrParams) -> Result<Self> {
        let schedule = LrSchedule::new(params.beta, params.eta, params.d)?;
        Ok(LrField { params, schedule })
    }

    pub fn schedule(&self) -> &LrSchedule {
        &self.schedule
    }

    /// Concentrated single cube of component `i` (at the origin).
    pub fn concentrated(&self, i: usize) -> CubeEnsemble {
        let d = self.params.d;
        let side = concentrated_side(self.params.eta, self.params.nu, i);
        let value_exp = DyadicPow::new(0, (d * i) as i64);
        CubeEnsemble::new(vec![Patch {
            cube: Cube::new(geometry::zero_vector(d), side),
            value: value_exp.value(self.params.nu),
            dyadic: Some(PatchExp {
                value_exp,
                side_exp: DyadicPow::new(-(self.params.eta as i64), -(i as i64)),
            }),
        }])
    }

    /// Initial density of component `i`: one concentrated cube per cell.
    pub fn boundary_in(&self, i: usize) -> CubeEnsemble {
        let d = self.params.d;
        let eta = self.params.eta;
        let side = concentrated_side(eta, self.params.nu, i);
        let value_exp = DyadicPow::new(0, (d * i) as i64);
        let value = value_exp.value(self.params.nu);
        let patches = (1..=geometry::cell_count(eta, d))
            .map(|k| {
                let c = geometry::center_of_index(eta, k, d).expect("k in range");
                Patch {
                    cube: Cube::new(c, side),
                    value,
                    dyadic: Some(PatchExp {
                        value_exp,
                        side_exp: DyadicPow::new(-(eta as i64), -(i as i64)),
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

    pub fn velocity(&self, i: usize, t: f64, x: &[f64]) -> Result<(Point, Jacobian)> {
        self.velocity_at_depth(i, t, x, self.params.depth)
    }

    pub fn velocity_at_depth(
        &self,
        i: usize,
        t: f64,
        x: &[f64],
        depth: u32,
    ) -> Result<(Point, Jacobian)> {
        self.velocity_walk(i, t, x, depth, None)
    }

    pub fn velocity_traced(
        &self,
        i: usize,
        t: f64,
        x: &[f64],
        depth: u32,
    ) -> Result<((Point, Jacobian), Vec<TraceStep>)> {
        let mut tr = Vec::new();
        let vj = self.velocity_walk(i, t, x, depth, Some(&mut tr))?;
        Ok((vj, tr))
    }

    fn velocity_walk(
        &self,
        i: usize,
        t: f64,
        x: &[f64],
        depth: u32,
        mut trace: Option<&mut Vec<TraceStep>>,
    ) -> Result<(Point, Jacobian)> {
        if i < 1 {
            return Err(Error::SequenceIndex(i));
        }
        let d = self.params.d;
        let nu = self.params.nu;
        let eta = self.params.eta;
        let zero = (geometry::zero_vector(d), Jacobian::zeros(d));
        let mut comp = i;
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
            let k = point.index;
            let Some(cell) = geometry::index_of_point(eta, &x, d) else {
                return Ok(zero);
            };
            if cell != k {
                // only the active cell moves
                return Ok(zero);
            }
            let c = geometry::center_of_index(eta, k, d).expect("located cell");
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(TraceStep {
                    component: comp,
                    interval: k,
                    phase: crate::l1::trace_phase_name(point.phase).into(),
                });
            }
            match point.phase {
                Phase::Break => {
                    if budget == 0 {
                        return Ok(zero);
                    }
                    let zoom = break_zoom(eta, nu, comp);
                    amp *= self.params.break_sign * point.scale / zoom;
                    for (xl, cl) in x.iter_mut().zip(&c) {
                        *xl = (*xl - cl) * zoom;
                    }
                    zoom_total *= zoom;
                    t = point.local;
                    comp = 1;
                    budget -= 1;
                }
                Phase::Spread => {
                    let zoom = (eta as f64).exp2();
                    let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
                    let bp = spread_block(eta, nu, comp);
                    let (mut v, mut jac) = blocks::block_velocity(point.local, &y, &bp, d);
                    let pref = amp * point.scale / zoom;
                    for vl in v.iter_mut() {
                        *vl *= pref;
                    }
                    jac.scale(pref * zoom * zoom_total);
                    return Ok((v, jac));
                }
                Phase::Handoff => {
                    if budget == 0 {
                        return Ok(zero);
                    }
                    let zoom = (eta as f64).exp2();
                    amp *= point.scale / zoom;
                    for (xl, cl) in x.iter_mut().zip(&c) {
                        *xl = (*xl - cl) * zoom;
                    }
                    zoom_total *= zoom;
                    t = point.local;
                    comp += 1;
                    budget -= 1;
                }
            }
        }
    }

    pub fn density(&self, i: usize, t: f64, x: &[f64]) -> Result<f64> {
        self.density_at_depth(i, t, x, self.params.depth)
    }

    pub fn density_at_depth(&self, i: usize, t: f64, x: &[f64], depth: u32) -> Result<f64> {
        if i < 1 {
            return Err(Error::SequenceIndex(i));
        }
        let d = self.params.d;
        let nu = self.params.nu;
        let eta = self.params.eta;
        let mut comp = i;
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
            let k = point.index;
            let Some(cell) = geometry::index_of_point(eta, &x, d) else {
                return Ok(0.0);
            };
            let c = geometry::center_of_index(eta, cell, d).expect("located cell");
            if cell < k {
                // finished cell: unit Lebesgue density
                return Ok(acc.value(nu));
            }
            if cell > k {
                // untouched cell: still the concentrated cube of this component
                let y: Point = x.iter().zip(&c).map(|(xl, cl)| xl - cl).collect();
                let side = concentrated_side(eta, nu, comp);
                return Ok(if geometry::linf(&y) <= 0.5 * side {
                    acc.add(DyadicPow::new(0, (d * comp) as i64)).value(nu)
                } else {
                    0.0
                });
            }
            match point.phase {
                Phase::Break => {
                    let gain = DyadicPow::new(0, (d * comp) as i64);
                    if budget == 0 {
                        return Ok(match self.params.base {
                            DensityBase::Drop => 0.0,
                            DensityBase::Freeze => {
                                // entering state: the concentrated cube itself
                                let y: Point = x.iter().zip(&c).map(|(xl, cl)| xl - cl).collect();
                                let side = concentrated_side(eta, nu, comp);
                                if geometry::linf(&y) <= 0.5 * side {
                                    acc.add(gain).value(nu)
                                } else {
                                    0.0
                                }
                            }
                        });
                    }
                    let zoom = break_zoom(eta, nu, comp);
                    acc = acc.add(gain);
                    for (xl, cl) in x.iter_mut().zip(&c) {
                        *xl = (*xl - cl) * zoom;
                    }
                    t = point.local;
                    comp = 1;
                    budget -= 1;
                }
                Phase::Spread => {
                    let zoom = (eta as f64).exp2();
                    let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
                    let bp = spread_block(eta, nu, comp);
                    let hit = blocks::block_density(point.local, &y, &bp, d);
                    return Ok(if hit > 0.0 {
                        acc.add(DyadicPow::new(0, (d * (comp + 1)) as i64)).value(nu)
                    } else {
                        0.0
                    });
                }
                Phase::Handoff => {
                    if budget == 0 {
                        return Ok(match self.params.base {
                            DensityBase::Drop => 0.0,
                            DensityBase::Freeze => {
                                // entering state: the next component's initial density
                                let zoom = (eta as f64).exp2();
                                let y: Point =
                                    x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
                                let side = concentrated_side(eta, nu, comp + 1);
                                match geometry::index_of_point(eta, &y, d) {
                                    None => 0.0,
                                    Some(sub) => {
                                        let cs = geometry::center_of_index(eta, sub, d)
                                            .expect("sub in range");
                                        let z: Point =
                                            y.iter().zip(&cs).map(|(yl, cl)| yl - cl).collect();
                                        if geometry::linf(&z) <= 0.5 * side {
                                            acc.add(DyadicPow::new(0, (d * (comp + 1)) as i64))
                                                .value(nu)
                                        } else {
                                            0.0
                                        }
                                    }
                                }
                            }
                        });
                    }
                    let zoom = (eta as f64).exp2();
                    for (xl, cl) in x.iter_mut().zip(&c) {
                        *xl = (*xl - cl) * zoom;
                    }
                    t = point.local;
                    comp += 1;
                    budget -= 1;
                }
            }
        }
    }

    /// Exact hierarchical density representation of component `i` at `t`.
    pub fn density_rep(&self, i: usize, t: f64) -> Result<DensityRep> {
        self.density_rep_at_depth(i, t, self.params.depth)
    }

    pub fn density_rep_at_depth(&self, i: usize, t: f64, depth: u32) -> Result<DensityRep> {
        if i < 1 {
            return Err(Error::SequenceIndex(i));
        }
        let point = match self.schedule.locate(t)? {
            Located::Terminal => return Ok(self.unit_rep()),
            Located::At(p) => p,
        };
        Ok(self.rep_walk(i, point, depth))
    }

    fn unit_rep(&self) -> DensityRep {
        DensityRep::Patches(vec![Patch {
            cube: Cube::unit(self.params.d),
            value: 1.0,
            dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp: DyadicPow::ONE }),
        }])
    }

    /// Concentrated-cube patch of component `i` in cell-local coordinates.
    fn concentrated_patch(&self, i: usize) -> Patch {
        let d = self.params.d;
        let side = concentrated_side(self.params.eta, self.params.nu, i);
        let value_exp = DyadicPow::new(0, (d * i) as i64);
        Patch {
            cube: Cube::new(geometry::zero_vector(d), side),
            value: value_exp.value(self.params.nu),
            dyadic: Some(PatchExp {
                value_exp,
                side_exp: DyadicPow::new(-(self.params.eta as i64), -(i as i64)),
            }),
        }
    }

    fn rep_walk(&self, comp: usize, point: SchedulePoint, budget: u32) -> DensityRep {
        let d = self.params.d;
        let nu = self.params.nu;
        let eta = self.params.eta;
        let k = point.index;
        let frozen = self.concentrated_patch(comp);

        let active: DensityRep = match point.phase {
            Phase::Break => {
                let gain = DyadicPow::new(0, (d * comp) as i64);
                if budget == 0 {
                    match self.params.base {
                        DensityBase::Drop => DensityRep::empty(),
                        DensityBase::Freeze => DensityRep::Patches(vec![frozen.clone()]),
                    }
                } else {
                    let zoom = break_zoom(eta, nu, comp);
                    let inner = match self.schedule.locate(point.local).expect("local in range") {
                        Located::Terminal => self.unit_rep(),
                        Located::At(p) => self.rep_walk(1, p, budget - 1),
                    };
                    DensityRep::Scaled {
                        zoom,
                        zoom_exp: DyadicPow::new(eta as i64, comp as i64),
                        value: gain.value(nu),
                        value_exp: gain,
                        inner: Box::new(inner),
                    }
                }
            }
            Phase::Spread => {
                let bp = spread_block(eta, nu, comp);
                let ens = blocks::block_cubes(point.local, &bp, d);
                let side_exp = DyadicPow::new(-(eta as i64), -((comp + 1) as i64));
                let patches = ens
                    .patches
                    .into_iter()
                    .map(|p| Patch {
                        cube: p.cube,
                        value: 1.0,
                        dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp }),
                    })
                    .collect();
                let gain = DyadicPow::new(0, (d * (comp + 1)) as i64);
                DensityRep::Scaled {
                    zoom: (eta as f64).exp2(),
                    zoom_exp: DyadicPow::new(eta as i64, 0),
                    value: gain.value(nu),
                    value_exp: gain,
                    inner: Box::new(DensityRep::Patches(patches)),
                }
            }
            Phase::Handoff => {
                if budget == 0 {
                    match self.params.base {
                        DensityBase::Drop => DensityRep::empty(),
                        DensityBase::Freeze => {
                            // next component's initial configuration
                            let next = self.concentrated_patch(comp + 1);
                            DensityRep::Scaled {
                                zoom: (eta as f64).exp2(),
                                zoom_exp: DyadicPow::new(eta as i64, 0),
                                value: 1.0,
                                value_exp: DyadicPow::ONE,
                                inner: Box::new(DensityRep::Cells {
                                    eta,
                                    active_k: 1,
                                    frozen_value: next.value,
                                    frozen_value_exp: next.dyadic.unwrap().value_exp,
                                    frozen_side: next.cube.side,
                                    frozen_side_exp: next.dyadic.unwrap().side_exp,
                                    inner: Box::new(DensityRep::Patches(vec![next.clone()])),
                                }),
                            }
                        }
                    }
                } else {
                    let inner = match self.schedule.locate(point.local).expect("local in range") {
                        Located::Terminal => self.unit_rep(),
                        Located::At(p) => self.rep_walk(comp + 1, p, budget - 1),
                    };
                    DensityRep::Scaled {
                        zoom: (eta as f64).exp2(),
                        zoom_exp: DyadicPow::new(eta as i64, 0),
                        value: 1.0,
                        value_exp: DyadicPow::ONE,
                        inner: Box::new(inner),
                    }
                }
            }
        };

        DensityRep::Cells {
            eta,
            active_k: k,
            frozen_value: frozen.value,
            frozen_value_exp: frozen.dyadic.unwrap().value_exp,
            frozen_side: frozen.cube.side,
            frozen_side_exp: frozen.dyadic.unwrap().side_exp,
            inner: Box::new(active),
        }
    }

    /// Flat exact ensemble; fails when it would exceed `limit` cubes.
    pub fn density_cubes(&self, i: usize, t: f64, limit: usize) -> Result<Option<CubeEnsemble>> {
        let rep = self.density_rep(i, t)?;
        Ok(rep.flatten(self.params.d, self.params.nu, limit))
    }
}
