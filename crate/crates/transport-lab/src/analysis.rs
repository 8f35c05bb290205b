//! Norm engines, weak-form PDE residual, contraction-constant calculators,
//! feasibility gates, and the parameter-selection procedure.
//!
//! Exact `L^r` norms integrate cube ensembles in closed form; grid norms are
//! midpoint-rule quadratures and serve as the independent oracle. Sup-type
//! norms (Holder, negative Sobolev) are sampled lower estimates only.

use crate::ensemble::{CubeEnsemble, DensityRep};
use crate::error::{Error, Result};
use crate::geometry::{Cube, Jacobian, Point};
use crate::l1::L1Params;
use crate::lr::LrParams;
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Exact `L^r` norm of a disjoint cube ensemble.
pub fn lr_norm_exact(ens: &CubeEnsemble, r: f64) -> Result<f64> {
    if r < 1.0 {
        return Err(Error::NormExponent(r));
    }
    let total: f64 = ens.patches.iter().map(|p| p.value.abs().powf(r) * p.cube.volume()).sum();
    Ok(total.powf(1.0 / r))
}

/// Total mass of an ensemble; exact for dyadic patches.
pub fn mass(ens: &CubeEnsemble, nu: f64) -> f64 {
    ens.mass(nu)
}

/// Midpoint-rule `L^r` norm of a pointwise evaluator over a cube domain.
pub fn lr_norm_grid(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    r: f64,
    resolution: usize,
    domain: &Cube,
) -> f64 {
    let d = domain.dim();
    let h = domain.side / resolution as f64;
    let cell = h.powi(d as i32);
    let rows = par::map_range(resolution, |j0| {
        let mut x: Point = domain.center.iter().map(|c| c - 0.5 * domain.side).collect();
        x[0] += (j0 as f64 + 0.5) * h;
        let mut sum = 0.0;
        let mut idx = vec![0usize; d - 1];
        loop {
            for (l, jl) in idx.iter().enumerate() {
                x[l + 1] =
                    domain.center[l + 1] - 0.5 * domain.side + (*jl as f64 + 0.5) * h;
            }
            sum += f(&x).abs().powf(r);
            let mut l = 0;
            loop {
                if l + 1 >= d {
                    return sum;
                }
                idx[l] += 1;
                if idx[l] < resolution {
                    break;
                }
                idx[l] = 0;
                l += 1;
            }
        }
    });
    (rows.iter().sum::<f64>() * cell).powf(1.0 / r)
}

/// First-order bound on the grid-versus-exact `L^r` error: each cube
/// misclassifies at most a boundary band of width one cell.
pub fn lr_norm_grid_error_bound(ens: &CubeEnsemble, r: f64, resolution: usize, domain: &Cube) -> f64 {
    let d = domain.dim() as i32;
    let h = domain.side / resolution as f64;
    ens.patches
        .iter()
        .map(|p| 2.0 * d as f64 * p.cube.side.powi(d - 1) * h * p.value.abs().powf(r))
        .sum()
}

/// Midpoint-rule homogeneous `W^{1,p}` seminorm (Frobenius magnitude of the
/// Jacobian) over a cube domain.
pub fn w1p_seminorm_grid(
    jac: &(dyn Fn(&[f64]) -> Jacobian + Sync),
    p: f64,
    resolution: usize,
    domain: &Cube,
) -> f64 {
    let d = domain.dim();
    let h = domain.side / resolution as f64;
    let cell = h.powi(d as i32);
    let rows = par::map_range(resolution, |j0| {
        let mut x: Point = domain.center.iter().map(|c| c - 0.5 * domain.side).collect();
        x[0] += (j0 as f64 + 0.5) * h;
        let mut sum = 0.0;
        let mut idx = vec![0usize; d - 1];
        loop {
            for (l, jl) in idx.iter().enumerate() {
                x[l + 1] =
                    domain.center[l + 1] - 0.5 * domain.side + (*jl as f64 + 0.5) * h;
            }
            sum += jac(&x).frobenius().powf(p);
            let mut l = 0;
            loop {
                if l + 1 >= d {
                    return sum;
                }
                idx[l] += 1;
                if idx[l] < resolution {
                    break;
                }
                idx[l] = 0;
                l += 1;
            }
        }
    });
    (rows.iter().sum::<f64>() * cell).powf(1.0 / p)
}

/// Sampled lower estimate of the space-time Holder seminorm over dyadic-scale
/// point pairs. Deterministic in the seed; monotone in `samples`.
pub fn holder_estimate(
    f: &(dyn Fn(f64, &[f64]) -> Point + Sync),
    d: usize,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let t: f64 = rng.gen_range(0.0..1.0);
        let x: Point = (0..d).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let scale = (2.0f64).powi(-rng.gen_range(0..20));
        // random space-time direction
        let mut dir: Point = (0..=d).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
        let n = crate::geometry::norm2(&dir);
        if n < 1e-9 {
            dir[0] = 1.0;
        } else {
            for v in dir.iter_mut() {
                *v /= n;
            }
        }
        pairs.push((t, x, scale, dir));
    }
    let quotients = par::map_collect(&pairs, |(t, x, scale, dir)| {
        let t2 = (t + scale * dir[0]).clamp(0.0, 1.0);
        let x2: Point = x.iter().zip(dir.iter().skip(1)).map(|(xl, dl)| xl + scale * dl).collect();
        let dt = t2 - t;
        let mut dist2 = dt * dt;
        for (a, b) in x.iter().zip(&x2) {
            dist2 += (a - b) * (a - b);
        }
        let dist = dist2.sqrt();
        if dist < 1e-14 {
            return 0.0;
        }
        let va = f(*t, x);
        let vb = f(t2, &x2);
        let diff = crate::geometry::norm2(&crate::geometry::sub(&va, &vb));
        diff / dist.powf(alpha)
    });
    quotients.into_iter().fold(0.0, f64::max)
}

/// Maximum of the analytic Jacobian trace over random space-time samples.
pub fn divergence_max(
    field: &(dyn Fn(f64, &[f64]) -> (Point, Jacobian) + Sync),
    d: usize,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, Point)> = (0..samples)
        .map(|_| {
            let t = rng.gen_range(0.0..1.0);
            let x: Point = (0..d).map(|_| rng.gen_range(-0.55..0.55)).collect();
            (t, x)
        })
        .collect();
    let traces = par::map_collect(&pts, |(t, x)| field(*t, x).1.trace().abs());
    traces.into_iter().fold(0.0, f64::max)
}

/// Maximum over random samples of the central-difference divergence relative
/// to the largest Jacobian magnitude on the stencil.
pub fn divergence_fd_max(
    field: &(dyn Fn(f64, &[f64]) -> (Point, Jacobian) + Sync),
    d: usize,
    samples: usize,
    h: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, Point)> = (0..samples)
        .map(|_| {
            let t = rng.gen_range(0.0..1.0);
            let x: Point = (0..d).map(|_| rng.gen_range(-0.55..0.55)).collect();
            (t, x)
        })
        .collect();
    let ratios = par::map_collect(&pts, |(t, x)| {
        let mut div = 0.0;
        let mut scale = field(*t, x).1.frobenius();
        for l in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[l] += h;
            xm[l] -= h;
            let (vp, jp) = field(*t, &xp);
            let (vm, jm) = field(*t, &xm);
            div += (vp[l] - vm[l]) / (2.0 * h);
            scale = scale.max(jp.frobenius()).max(jm.frobenius());
        }
        div.abs() / scale.max(1e-12)
    });
    ratios.into_iter().fold(0.0, f64::max)
}

/// Closed-form contraction factors of all self-maps; each is below 1 exactly
/// when the corresponding printed inequality holds.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionConstants {
    /// `2^(gamma1 + eta d - eta d/p + beta)`
    pub velocity_async: f64,
    /// `2^(-eta d/r + nu d (1 - 1/r))`
    pub density_mass_async: f64,
    /// `2^(gamma3 - eta (1 + d/q) + beta + eta d)`
    pub density_lip_async: f64,
    /// synchronous velocity factor at generation 1
    pub velocity_sync: f64,
    /// `2^(-1/s)` from the time-integrated mass contraction
    pub density_mass_sync: f64,
    /// synchronous Lipschitz factor at generation 1
    pub density_lip_sync: f64,
}

pub fn contraction_constants(lr: &LrParams, l1: &L1Params) -> ContractionConstants {
    let d = lr.d as f64;
    let eta = lr.eta as f64;
    let velocity_async = (lr.gamma1() + eta * d - eta * d / lr.p + lr.beta).exp2();
    let density_mass_async = (-eta * d / lr.r + lr.nu * d * (1.0 - 1.0 / lr.r)).exp2();
    let density_lip_async =
        (lr.gamma3() - eta * (1.0 + d / lr.q) + lr.beta + eta * d).exp2();

    let dl = l1.d as f64;
    let gen1 = (l1.beta + 1.0).exp2() / (l1.beta.exp2() - 1.0);
    let velocity_sync = gen1 * (-l1.nu * dl / l1.p).exp2();
    let density_mass_sync = (-1.0 / l1.s_time).exp2();
    let qp = l1.q / (l1.q - 1.0);
    let density_lip_sync = gen1 * (-(1.0 + l1.nu) * (1.0 - dl / qp)).exp2();
    ContractionConstants {
        velocity_async,
        density_mass_async,
        density_lip_async,
        velocity_sync,
        density_mass_sync,
        density_lip_sync,
    }
}

/// Inequality verdicts for one parameter tuple.
#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    /// `1/p + (d-1)/(dr) > 1`
    pub sharp_range: bool,
    pub p_range: bool,
    pub r_range: bool,
    pub q_range: bool,
    pub nu_range: bool,
}

/// Concrete parameter choice produced by the selection recipe.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibleChoice {
    pub beta: f64,
    pub p_bar: f64,
    pub r_bar: f64,
    pub eta_tilde: f64,
    pub nu_tilde: f64,
    pub eta: u32,
    pub nu: f64,
    pub q: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub nu0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub d: usize,
    pub p: f64,
    pub r: f64,
    /// `1/p + (d-1)/(dr) - 1`
    pub margin: f64,
    pub feasible: bool,
    pub verdicts: Verdicts,
    pub derived: Option<FeasibleChoice>,
}

/// Execute the parameter-selection recipe: given target exponents inside the
/// sharp range, pick `beta = 1/2`, slide `(1/p, 1/r)` toward the critical
/// surface until the auxiliary smallness condition holds, solve for the
/// fractional grid parameters, and round.
pub fn feasibility(d: usize, p: f64, r: f64) -> FeasibilityReport {
    let dd = d as f64;
    let margin = 1.0 / p + (dd - 1.0) / (dd * r) - 1.0;
    if margin <= 0.0 || d < 2 || p < 1.0 || r < 1.0 {
        return FeasibilityReport {
            d,
            p,
            r,
            margin,
            feasible: false,
            verdicts: Verdicts {
                sharp_range: false,
                p_range: false,
                r_range: false,
                q_range: false,
                nu_range: false,
            },
            derived: None,
        };
    }
    let beta = 0.5;
    // shrink both reciprocals by a common factor c in (1/(1+margin), 1);
    // bisect toward the critical surface until 3 r_bar m_bar < beta/d
    let lo = 1.0 / (1.0 + margin);
    let mut c = 0.0;
    let mut accepted = false;
    for j in 1..=60 {
        c = lo + (1.0 - lo) / (2.0f64).powi(j);
        let m_bar = c * (1.0 + margin) - 1.0;
        let r_bar = r / c;
        if 3.0 * r_bar * m_bar < beta / dd {
            accepted = true;
            break;
        }
    }
    if !accepted {
        // unreachable for margin > 0, kept as a safe exit
        return FeasibilityReport {
            d,
            p,
            r,
            margin,
            feasible: false,
            verdicts: Verdicts {
                sharp_range: true,
                p_range: false,
                r_range: false,
                q_range: false,
                nu_range: false,
            },
            derived: None,
        };
    }
    let m_bar = c * (1.0 + margin) - 1.0;
    let p_bar = p / c;
    let r_bar = r / c;
    let nu_tilde = beta / (dd * r_bar * m_bar);
    let eta_tilde = nu_tilde * (r_bar - 1.0);
    let eta = eta_tilde.ceil() as u32;
    let nu = eta as f64 / (r_bar - 1.0);
    let nu0 = 1.0 + beta - (beta.exp2() - 1.0).log2();
    let q_max = LrParams::q_upper(d, nu, eta, beta);
    let q = 0.5 * (1.0 + q_max);
    let gamma1 = nu * (1.0 - dd / p_bar);
    let gamma2 = nu * dd * (1.0 - 1.0 / r_bar);
    let gamma3 = nu * dd * (1.0 - 1.0 / q);

    let p_max = (eta as f64 + nu) * dd / (eta as f64 * dd + nu + beta);
    let r_max = (eta as f64 + nu) / nu;
    let verdicts = Verdicts {
        sharp_range: true,
        p_range: p < p_max,
        r_range: r < r_max,
        q_range: 1.0 < q && q < q_max,
        nu_range: nu > nu0,
    };
    let feasible = verdicts.sharp_range
        && verdicts.p_range
        && verdicts.r_range
        && verdicts.q_range
        && verdicts.nu_range;
    FeasibilityReport {
        d,
        p,
        r,
        margin,
        feasible,
        verdicts,
        derived: Some(FeasibleChoice {
            beta,
            p_bar,
            r_bar,
            eta_tilde,
            nu_tilde,
            eta,
            nu,
            q,
            gamma1,
            gamma2,
            gamma3,
            nu0,
        }),
    }
}

/// Closed form of the geometric density-norm series; infinite when the
/// ratio reaches 1.
pub fn heuristic_density_bound(p: &LrParams) -> f64 {
    let x = heuristic_density_factor(p);
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let dd = p.d as f64;
    (p.eta as f64 * dd).exp2() * x / (1.0 - x)
}

/// Per-generation ratio of the density series terms.
pub fn heuristic_density_factor(p: &LrParams) -> f64 {
    let dd = p.d as f64;
    (p.nu * dd - (p.eta as f64 + p.nu) * dd / p.r).exp2()
}

/// Per-generation velocity bound `2^{i beta} 2^{i(eta d + nu)} 2^{-i(eta+nu)d/p}`.
pub fn heuristic_velocity_bound(p: &LrParams, i: u32) -> f64 {
    (i as f64 * heuristic_velocity_exponent(p)).exp2()
}

pub fn heuristic_velocity_exponent(p: &LrParams) -> f64 {
    let dd = p.d as f64;
    let eta = p.eta as f64;
    p.beta + eta * dd + p.nu - (eta + p.nu) * dd / p.p
}

/// Compactly supported test function with analytic gradient.
pub struct TestFunction {
    pub name: String,
    pub f: Box<dyn Fn(&[f64]) -> f64 + Sync>,
    pub grad: Box<dyn Fn(&[f64]) -> Point + Sync>,
    /// sup of |grad| over the unit cube (sampled once).
    pub sup_grad: f64,
}

/// Polynomial-times-bump and trigonometric-times-bump dictionary. The bump
/// plateau covers the unit cube, so gradients there reduce to the smooth
/// factor's.
pub fn test_dictionary(d: usize, count: usize) -> Vec<TestFunction> {
    use crate::blocks::{space_cutoff, space_cutoff_d1};
    #[derive(Clone, Copy)]
    enum Core {
        Poly([i32; 2]),
        Trig(f64, f64),
    }
    let cores: Vec<(String, Core)> = vec![
        ("x0".into(), Core::Poly([1, 0])),
        ("x1".into(), Core::Poly([0, 1])),
        ("x0*x1".into(), Core::Poly([1, 1])),
        ("x0^2".into(), Core::Poly([2, 0])),
        ("x1^2".into(), Core::Poly([0, 2])),
        ("x0^2*x1".into(), Core::Poly([2, 1])),
        ("x0*x1^2".into(), Core::Poly([1, 2])),
        ("x0^3".into(), Core::Poly([3, 0])),
        ("sin(2pi x0)cos(2pi x1)".into(), Core::Trig(2.0, 2.0)),
        ("cos(pi x0)sin(pi x1)".into(), Core::Trig(1.0, 1.0)),
        ("x1^3".into(), Core::Poly([0, 3])),
        ("sin(pi x0)".into(), Core::Trig(1.0, 0.0)),
    ];
    let eval_core = move |c: Core, x: &[f64]| -> (f64, [f64; 2]) {
        match c {
            Core::Poly([a, b]) => {
                let v = x[0].powi(a) * x[1].powi(b);
                let g0 = if a == 0 { 0.0 } else { a as f64 * x[0].powi(a - 1) * x[1].powi(b) };
                let g1 = if b == 0 { 0.0 } else { b as f64 * x[0].powi(a) * x[1].powi(b - 1) };
                (v, [g0, g1])
            }
            Core::Trig(fa, fb) => {
                let (wa, wb) = (fa * std::f64::consts::PI, fb * std::f64::consts::PI);
                if fb == 0.0 {
                    ((wa * x[0]).sin(), [wa * (wa * x[0]).cos(), 0.0])
                } else if fa == fb && fa == 2.0 {
                    let v = (wa * x[0]).sin() * (wb * x[1]).cos();
                    (
                        v,
                        [
                            wa * (wa * x[0]).cos() * (wb * x[1]).cos(),
                            -wb * (wa * x[0]).sin() * (wb * x[1]).sin(),
                        ],
                    )
                } else {
                    let v = (wa * x[0]).cos() * (wb * x[1]).sin();
                    (
                        v,
                        [
                            -wa * (wa * x[0]).sin() * (wb * x[1]).sin(),
                            wa * (wa * x[0]).cos() * (wb * x[1]).cos(),
                        ],
                    )
                }
            }
        }
    };
    let bump = move |x: &[f64]| -> f64 { x.iter().map(|v| space_cutoff(*v)).product() };
    let mut out = Vec::new();
    for (name, core) in cores.into_iter().take(count) {
        let f = {
            move |x: &[f64]| -> f64 {
                let (v, _) = eval_core(core, x);
                v * bump(x)
            }
        };
        let grad = {
            move |x: &[f64]| -> Point {
                let (v, g) = eval_core(core, x);
                let b = bump(x);
                let mut out: Point = (0..x.len())
                    .map(|l| if l < 2 { g[l] * b } else { 0.0 })
                    .collect();
                // product-rule term from the bump (vanishes on the plateau)
                for l in 0..x.len() {
                    let mut rest = 1.0;
                    for (m, xm) in x.iter().enumerate() {
                        if m != l {
                            rest *= space_cutoff(*xm);
                        }
                    }
                    out[l] += v * space_cutoff_d1(x[l]) * rest;
                }
                out
            }
        };
        // sampled sup of |grad| over the unit cube
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ out.len() as u64);
        let mut sup = 0.0f64;
        for _ in 0..4096 {
            let x: Point = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            sup = sup.max(crate::geometry::norm2(&grad(&x)));
        }
        out.push(TestFunction { name, f: Box::new(f), grad: Box::new(grad), sup_grad: sup });
    }
    out
}

/// A density/velocity pair under test: exact density representations, a
/// pointwise velocity, and a guard telling whether a time window stays
/// inside one schedule phase.
pub struct PdePair<'a> {
    pub d: usize,
    pub nu: f64,
    pub density_rep: Box<dyn Fn(f64) -> Result<DensityRep> + Sync + 'a>,
    pub velocity: Box<dyn Fn(f64, &[f64]) -> Point + Sync + 'a>,
    pub window_ok: Box<dyn Fn(f64, f64) -> bool + Sync + 'a>,
}

/// Normalized weak-form residual
/// `|d/dt int rho phi - int rho v . grad phi| / (mass sup|v| sup|grad phi|)`
/// with the time derivative replaced by a central difference.
pub fn weak_residual(
    pair: &PdePair,
    phi: &TestFunction,
    t: f64,
    dt: f64,
    resolution: usize,
) -> Result<f64> {
    if !(pair.window_ok)(t - dt, t + dt) {
        return Err(Error::WindowAcrossCheckpoint(t - dt, t + dt));
    }
    let h = 1.0 / resolution as f64;
    let ep = (pair.density_rep)(t + dt)?.integrate(pair.d, pair.nu, &*phi.f, h);
    let em = (pair.density_rep)(t - dt)?.integrate(pair.d, pair.nu, &*phi.f, h);
    let rep = (pair.density_rep)(t)?;
    let sup_v = std::cell::Cell::new(0.0f64);
    let integrand = |x: &[f64]| -> f64 {
        let v = (pair.velocity)(t, x);
        let n = crate::geometry::norm2(&v);
        if n > sup_v.get() {
            sup_v.set(n);
        }
        let g = (phi.grad)(x);
        crate::geometry::dot(&v, &g)
    };
    let transport = rep.integrate(pair.d, pair.nu, &integrand, h);
    let mass = rep.mass(pair.d, pair.nu, crate::ensemble::DyadicPow::ONE);
    let numer = ((ep - em) / (2.0 * dt) - transport).abs();
    let denom = mass * sup_v.get() * phi.sup_grad;
    if denom <= f64::MIN_POSITIVE {
        return Ok(if numer == 0.0 { 0.0 } else { numer });
    }
    Ok(numer / denom)
}

/// Sampled lower estimate of the Lipschitz-in-time negative-Sobolev seminorm
/// over a finite dictionary of normalized test functions.
pub fn wminus1q_lipschitz_estimate(
    rep_at: &dyn Fn(f64) -> Result<DensityRep>,
    dict: &[TestFunction],
    times: &[f64],
    q: f64,
    d: usize,
    nu: f64,
    resolution: usize,
) -> Result<f64> {
    let qp = q / (q - 1.0);
    let h = 1.0 / resolution as f64;
    let support = Cube::new(crate::geometry::zero_vector(d), 2.6);
    let mut best = 0.0f64;
    for phi in dict {
        let grad_mag = |x: &[f64]| crate::geometry::norm2(&(phi.grad)(x));
        let gnorm = lr_norm_grid(&grad_mag, qp, resolution.max(64), &support);
        if gnorm <= 0.0 {
            continue;
        }
        let mut vals = Vec::with_capacity(times.len());
        for &t in times {
            vals.push(rep_at(t)?.integrate(d, nu, &*phi.f, h));
        }
        for (ts, vs) in times.windows(2).zip(vals.windows(2)) {
            let dt = ts[1] - ts[0];
            if dt > 0.0 {
                best = best.max((vs[1] - vs[0]).abs() / dt / gnorm);
            }
        }
    }
    Ok(best)
}

/// One row of a norm-versus-time series.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub t: f64,
    pub norm_exact: f64,
    pub norm_grid: f64,
    pub mass: f64,
    pub w1p: f64,
    pub resolution: usize,
    pub depth: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{DyadicPow, Patch, PatchExp};
    use crate::geometry::zero_vector;

    #[test]
    fn exact_norm_examples() {
        // unit indicator has unit norm for every r
        let unit = CubeEnsemble::new(vec![Patch {
            cube: Cube::unit(2),
            value: 1.0,
            dyadic: Some(PatchExp { value_exp: DyadicPow::ONE, side_exp: DyadicPow::ONE }),
        }]);
        assert!((lr_norm_exact(&unit, 1.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(lr_norm_exact(&unit, 0.8).is_err());
    }

    #[test]
    fn grid_norm_examples() {
        let unit = Cube::unit(2);
        let one = |_: &[f64]| 1.0;
        assert!((lr_norm_grid(&one, 1.5, 64, &unit) - 1.0).abs() < 1e-12);
        // indicator of the left half, r = 2 -> 2^{-1/2}
        let half = |x: &[f64]| if x[0] < 0.0 { 1.0 } else { 0.0 };
        let got = lr_norm_grid(&half, 2.0, 256, &unit);
        assert!((got - 0.5f64.sqrt()).abs() < 1e-2);
    }

    #[test]
    fn grid_matches_exact_within_first_order_bound() {
        let f = crate::lr::LrField::new(crate::lr::LrParams::paper_defaults()).unwrap();
        let ens = f.boundary_in(1);
        let exact = lr_norm_exact(&ens, 1.5).unwrap();
        let dom = Cube::unit(2);
        let eval = |x: &[f64]| ens.value_at(x);
        let mut errs = Vec::new();
        for res in [256usize, 512, 1024] {
            let grid = lr_norm_grid(&eval, 1.5, res, &dom);
            let err = (grid.powf(1.5) - exact.powf(1.5)).abs();
            let bound = lr_norm_grid_error_bound(&ens, 1.5, res, &dom);
            assert!(err <= bound, "res={res} err={err} bound={bound}");
            errs.push(err);
        }
        assert!(errs[2] < errs[0], "error must shrink under refinement");
        let grid = lr_norm_grid(&eval, 1.5, 1024, &dom);
        assert!((grid - exact).abs() / exact < 0.01);
    }

    #[test]
    fn w1p_zero_field() {
        let z = |_: &[f64]| Jacobian::zeros(2);
        assert_eq!(w1p_seminorm_grid(&z, 1.2, 32, &Cube::unit(2)), 0.0);
    }

    #[test]
    fn holder_estimate_basics() {
        let constant = |_: f64, _: &[f64]| -> Point { smallvec::smallvec![1.0, 1.0] };
        assert_eq!(holder_estimate(&constant, 2, 0.5, 500, 1), 0.0);
        let linear = |_: f64, x: &[f64]| -> Point { smallvec::smallvec![x[0], 0.0] };
        let est = holder_estimate(&linear, 2, 1.0, 4000, 2);
        assert!(est > 0.99 && est <= 1.0 + 1e-9, "linear slope, got {est}");
        // monotone in sample count by prefix construction
        let e1 = holder_estimate(&linear, 2, 1.0, 500, 3);
        let e2 = holder_estimate(&linear, 2, 1.0, 2000, 3);
        assert!(e2 >= e1);
    }

    #[test]
    fn contraction_constants_match_printed_inequalities() {
        let mut rng = crate::test_rng(101);
        for _ in 0..200 {
            let d = if rng.gen_bool(0.5) { 2 } else { 3 };
            let beta = rng.gen_range(0.05..0.95);
            let nu = rng.gen_range(1.01..6.0);
            let eta = rng.gen_range(1..4u32);
            let mut lr = LrParams::new(d, beta, nu, eta, 4).unwrap();
            lr.p = rng.gen_range(1.0..2.5);
            lr.r = rng.gen_range(1.0..3.0);
            lr.q = rng.gen_range(1.001..1.5);
            let l1 = L1Params::paper_defaults();
            let c = contraction_constants(&lr, &l1);
            let dd = d as f64;
            let ed = eta as f64;
            let p_ok = lr.p < (ed + nu) * dd / (ed * dd + nu + beta);
            let r_ok = lr.r < (ed + nu) / nu;
            let q_ok = lr.q < LrParams::q_upper(d, nu, eta, beta);
            assert_eq!(c.velocity_async < 1.0, p_ok, "p verdict");
            assert_eq!(c.density_mass_async < 1.0, r_ok, "r verdict");
            assert_eq!(c.density_lip_async < 1.0, q_ok, "q verdict");
        }
    }

    #[test]
    fn contraction_thresholds_at_paper_defaults() {
        // p threshold 8.6/7.1, r threshold 4.3/2.3
        let lr = LrParams::paper_defaults();
        let p_max = (lr.eta as f64 + lr.nu) * 2.0 / (lr.eta as f64 * 2.0 + lr.nu + lr.beta);
        assert!((p_max - 8.6 / 7.1).abs() < 1e-12);
        let r_max = (lr.eta as f64 + lr.nu) / lr.nu;
        assert!((r_max - 4.3 / 2.3).abs() < 1e-12);
        let c = contraction_constants(&lr, &L1Params::paper_defaults());
        assert!(c.velocity_async < 1.0 && c.density_mass_async < 1.0 && c.density_lip_async < 1.0);
        assert!(c.velocity_sync < 1.0 && c.density_mass_sync < 1.0 && c.density_lip_sync < 1.0);
    }

    #[test]
    fn feasibility_examples() {
        let rep = feasibility(2, 1.2, 1.5);
        assert!(rep.feasible);
        assert!((rep.margin - 1.0 / 6.0).abs() < 1e-12);
        let ch = rep.derived.unwrap();
        assert!(ch.nu_tilde > 3.0, "recipe guarantees nu_tilde > 3");
        assert!(ch.nu >= ch.nu_tilde - 1e-12);
        assert!(ch.nu > ch.nu0);

        let rep = feasibility(2, 2.0, 2.0);
        assert!(!rep.feasible);
        assert!(rep.margin < 0.0);
    }

    #[test]
    fn feasibility_margin_monotone() {
        let mut last = f64::INFINITY;
        for j in 0..10 {
            let p = 1.05 + 0.1 * j as f64;
            let m = feasibility(2, p, 1.4).margin;
            assert!(m < last);
            last = m;
        }
        let mut last = f64::INFINITY;
        for j in 0..10 {
            let r = 1.05 + 0.2 * j as f64;
            let m = feasibility(2, 1.3, r).margin;
            assert!(m < last);
            last = m;
        }
    }

    #[test]
    fn heuristic_bound_value() {
        let p = LrParams::paper_defaults();
        let b = heuristic_density_bound(&p);
        assert!((b - 13.405).abs() < 0.01, "closed-form series value, got {b}");
        let mut p2 = p.clone();
        p2.r = 2.0; // beyond (eta + nu)/nu ~ 1.8696
        assert!(heuristic_density_bound(&p2).is_infinite());
    }

    #[test]
    fn dictionary_gradients_match_finite_differences() {
        let dict = test_dictionary(2, 10);
        assert_eq!(dict.len(), 10);
        let h = 1e-6;
        for phi in &dict {
            for &x in &[[0.2, -0.3], [0.45, 0.1], [1.1, 0.2]] {
                let g = (phi.grad)(&x);
                for l in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[l] += h;
                    xm[l] -= h;
                    let fd = ((phi.f)(&xp) - (phi.f)(&xm)) / (2.0 * h);
                    assert!(
                        (fd - g[l]).abs() < 1e-4 * (1.0 + g[l].abs()),
                        "{} grad mismatch at {x:?}",
                        phi.name
                    );
                }
            }
        }
    }

    #[test]
    fn weak_residual_frozen_pair_is_zero() {
        let d = 2;
        let rep = crate::lr::LrField::new(LrParams::paper_defaults())
            .unwrap()
            .boundary_in(1)
            .patches;
        let pair = PdePair {
            d,
            nu: 2.3,
            density_rep: Box::new(move |_| Ok(DensityRep::Patches(rep.clone()))),
            velocity: Box::new(|_, x| zero_vector(x.len())),
            window_ok: Box::new(|_, _| true),
        };
        let dict = test_dictionary(2, 3);
        for phi in &dict {
            assert_eq!(weak_residual(&pair, phi, 0.4, 1e-3, 128).unwrap(), 0.0);
        }
    }
}
