//! Command surface: run experiments, verify invariant suites, and emit
//! CSV/JSON/PGM artifacts.
//!
//! Everything here is a thin orchestration layer over the construction and
//! analysis modules; the binary in `main.rs` only parses flags and forwards.

use crate::analysis::{self, NormReport, PdePair, TestFunction};
use crate::blocks::{self, BlockParams};
use crate::ensemble::DyadicPow;
use crate::error::{Error, Result};
use crate::geometry::{self, Cube, Point};
use crate::l1::{DensityBase, L1Field, L1Params, TraceStep};
use crate::lr::{LrField, LrParams};
use crate::par;
use crate::schedule::{Located, Phase};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    L1,
    Lr,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Csv,
    Json,
    Pgm,
}

/// Full configuration of one run; invalid parameter combinations are
/// rejected before any computation starts.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub d: usize,
    pub beta: f64,
    pub nu: f64,
    pub eta: u32,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub depth: u32,
    pub grid: usize,
    pub times: usize,
    pub seed: u64,
    pub base: DensityBase,
    /// Reproduce the printed reversed-copy sign instead of the validated one.
    pub paper_sign: bool,
    /// Sequence component for the asynchronous construction.
    pub component: usize,
    /// Offset from checkpoints, as a fraction of the phase length.
    pub checkpoint_offset: f64,
    /// Spreading-block parameters for `mode = block`.
    pub block_a: f64,
    pub block_s: f64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Lr,
            d: 2,
            beta: 0.8,
            nu: 2.3,
            eta: 2,
            p: 1.2,
            r: 1.5,
            q: 1.08,
            depth: 8,
            grid: 256,
            times: 200,
            seed: 7,
            base: DensityBase::Freeze,
            paper_sign: false,
            component: 1,
            checkpoint_offset: 1e-6,
            block_a: 0.45,
            block_s: 0.2,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    pub fn l1_params(&self) -> Result<L1Params> {
        let mut p = L1Params::new(self.d, self.beta, self.nu, self.depth)?;
        p.p = self.p;
        p.q = self.q.min(1.04); // negative-Sobolev exponent stays in the synchronous range
        p.base = self.base;
        Ok(p)
    }

    pub fn lr_params(&self) -> Result<LrParams> {
        let mut p = LrParams::new(self.d, self.beta, self.nu, self.eta, self.depth)?;
        p.p = self.p;
        p.r = self.r;
        p.q = self.q;
        p.base = self.base;
        if self.paper_sign {
            p.break_sign = 1.0;
        }
        Ok(p)
    }

    pub fn block_params(&self) -> Result<BlockParams> {
        BlockParams::new(self.eta, self.block_a, self.block_s)
    }
}

/// Uniform time samples nudged off schedule checkpoints.
pub fn sample_times(cfg: &RunConfig) -> Result<Vec<f64>> {
    let n = cfg.times.max(2);
    let raw: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
    let off = cfg.checkpoint_offset;
    match cfg.mode {
        Mode::Block => Ok(raw),
        Mode::L1 => {
            let field = L1Field::new(cfg.l1_params()?)?;
            Ok(raw.into_iter().map(|t| nudge_l1(&field, t, off)).collect())
        }
        Mode::Lr => {
            let field = LrField::new(cfg.lr_params()?)?;
            Ok(raw.into_iter().map(|t| nudge_lr(&field, t, off)).collect())
        }
    }
}

fn nudge_l1(field: &L1Field, t: f64, off: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return t;
    }
    match field.schedule().locate(t) {
        Ok(Located::At(p)) => {
            let len = 1.0 / p.scale;
            if p.local > 1.0 - off {
                field.schedule().reconstruct(&crate::schedule::SchedulePoint {
                    local: 1.0 - off,
                    ..p
                })
            } else if p.local < off {
                field
                    .schedule()
                    .reconstruct(&crate::schedule::SchedulePoint { local: off, ..p })
            } else {
                let _ = len;
                t
            }
        }
        _ => t,
    }
}

fn nudge_lr(field: &LrField, t: f64, off: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return t;
    }
    match field.schedule().locate(t) {
        Ok(Located::At(p)) => {
            if p.local > 1.0 - off {
                field.schedule().reconstruct(&crate::schedule::SchedulePoint {
                    local: 1.0 - off,
                    ..p
                })
            } else if p.local < off {
                field
                    .schedule()
                    .reconstruct(&crate::schedule::SchedulePoint { local: off, ..p })
            } else {
                t
            }
        }
        _ => t,
    }
}

/// Norm-versus-time series for the configured construction.
pub fn norm_series(cfg: &RunConfig) -> Result<Vec<NormReport>> {
    let ts = sample_times(cfg)?;
    let res = cfg.grid;
    let domain = Cube::unit(cfg.d);
    match cfg.mode {
        Mode::L1 => {
            let field = L1Field::new(cfg.l1_params()?)?;
            let r = cfg.r;
            let rows = par::map_collect(&ts, |&t| -> Result<NormReport> {
                let rep = field.density_rep(t)?;
                let norm_exact = rep.norm_lr(r, cfg.d, cfg.nu);
                let massv = rep.mass(cfg.d, cfg.nu, DyadicPow::ONE);
                let dens = |x: &[f64]| field.density(t, x).unwrap_or(0.0);
                let norm_grid = analysis::lr_norm_grid(&dens, r, res, &domain);
                let jac = |x: &[f64]| field.velocity(t, x).map(|vj| vj.1).unwrap_or_else(|_| crate::geometry::Jacobian::zeros(cfg.d));
                let w1p = analysis::w1p_seminorm_grid(&jac, cfg.p, res / 2, &domain);
                Ok(NormReport { t, norm_exact, norm_grid, mass: massv, w1p, resolution: res, depth: cfg.depth })
            });
            rows.into_iter().collect()
        }
        Mode::Lr => {
            let field = LrField::new(cfg.lr_params()?)?;
            let i = cfg.component;
            let r = cfg.r;
            let rows = par::map_collect(&ts, |&t| -> Result<NormReport> {
                let rep = field.density_rep(i, t)?;
                let norm_exact = rep.norm_lr(r, cfg.d, cfg.nu);
                let massv = rep.mass(cfg.d, cfg.nu, DyadicPow::ONE);
                let dens = |x: &[f64]| field.density(i, t, x).unwrap_or(0.0);
                let norm_grid = analysis::lr_norm_grid(&dens, r, res, &domain);
                let jac = |x: &[f64]| field.velocity(i, t, x).map(|vj| vj.1).unwrap_or_else(|_| crate::geometry::Jacobian::zeros(cfg.d));
                let w1p = analysis::w1p_seminorm_grid(&jac, cfg.p, res / 2, &domain);
                Ok(NormReport { t, norm_exact, norm_grid, mass: massv, w1p, resolution: res, depth: cfg.depth })
            });
            rows.into_iter().collect()
        }
        Mode::Block => {
            let bp = cfg.block_params()?;
            let r = cfg.r;
            let rows = par::map_collect(&ts, |&t| -> Result<NormReport> {
                let ens = blocks::block_cubes(t, &bp, cfg.d);
                let norm_exact = analysis::lr_norm_exact(&ens, r)?;
                let massv = ens.mass(cfg.nu);
                let dens = |x: &[f64]| blocks::block_density(t, x, &bp, cfg.d);
                let norm_grid = analysis::lr_norm_grid(&dens, r, res, &domain);
                let jac = |x: &[f64]| blocks::block_velocity(t, x, &bp, cfg.d).1;
                let w1p = analysis::w1p_seminorm_grid(&jac, cfg.p, res / 2, &domain);
                Ok(NormReport { t, norm_exact, norm_grid, mass: massv, w1p, resolution: res, depth: cfg.depth })
            });
            rows.into_iter().collect()
        }
    }
}

/// Run the norm series and write it in the configured format.
pub fn cmd_norm_series(cfg: &RunConfig) -> Result<Vec<NormReport>> {
    let rows = norm_series(cfg)?;
    if let Some(path) = &cfg.out {
        match cfg.format {
            OutputFormat::Csv => write_series_csv(path, &rows)?,
            OutputFormat::Json => write_json(path, &SeriesDoc { config: cfg.clone(), records: rows.clone() })?,
            OutputFormat::Pgm => {
                return Err(Error::InvalidParameter("norm-series has no PGM form".into()))
            }
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct SeriesDoc {
    config: RunConfig,
    records: Vec<NormReport>,
}

fn write_series_csv(path: &Path, rows: &[NormReport]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,norm_exact,norm_grid,mass,w1p,depth")?;
    for r in rows {
        writeln!(
            f,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            r.t, r.norm_exact, r.norm_grid, r.mass, r.w1p, r.depth
        )?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, doc)?;
    writeln!(f)?;
    Ok(())
}

/// Density raster at time `t`.
pub fn snapshot(cfg: &RunConfig, t: f64) -> Result<Vec<f64>> {
    let n = cfg.grid;
    let d = cfg.d;
    if d != 2 {
        return Err(Error::RasterDimension(d));
    }
    let h = 1.0 / n as f64;
    let value_at: Box<dyn Fn(&[f64]) -> f64 + Sync> = match cfg.mode {
        Mode::L1 => {
            let field = L1Field::new(cfg.l1_params()?)?;
            Box::new(move |x: &[f64]| field.density(t, x).unwrap_or(0.0))
        }
        Mode::Lr => {
            let field = LrField::new(cfg.lr_params()?)?;
            let i = cfg.component;
            Box::new(move |x: &[f64]| field.density(i, t, x).unwrap_or(0.0))
        }
        Mode::Block => {
            let bp = cfg.block_params()?;
            Box::new(move |x: &[f64]| blocks::block_density(t, x, &bp, 2))
        }
    };
    let rows = par::map_range(n, |row| {
        // image rows run top-down
        let y = 0.5 - (row as f64 + 0.5) * h;
        let mut out = Vec::with_capacity(n);
        for col in 0..n {
            let x = -0.5 + (col as f64 + 0.5) * h;
            out.push(value_at(&[x, y]));
        }
        out
    });
    Ok(rows.into_iter().flatten().collect())
}

pub fn cmd_snapshot(cfg: &RunConfig, t: f64) -> Result<()> {
    let raster = snapshot(cfg, t)?;
    let n = cfg.grid;
    let Some(path) = &cfg.out else {
        return Err(Error::InvalidParameter("snapshot requires --out".into()));
    };
    match cfg.format {
        OutputFormat::Pgm => write_pgm(path, &raster, n)?,
        OutputFormat::Csv => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            for row in 0..n {
                let line: Vec<String> =
                    (0..n).map(|c| format!("{:.17e}", raster[row * n + c])).collect();
                writeln!(f, "{}", line.join(","))?;
            }
        }
        OutputFormat::Json => write_json(path, &raster)?,
    }
    Ok(())
}

/// 8-bit binary PGM with log-scaled intensity: densities span dyadic
/// decades, so the scale is `255 log2(v + 1) / log2(vmax + 1)`.
fn write_pgm(path: &Path, raster: &[f64], n: usize) -> Result<()> {
    let vmax = raster.iter().copied().fold(0.0f64, f64::max);
    let denom = (vmax + 1.0).log2().max(f64::MIN_POSITIVE);
    let mut bytes = Vec::with_capacity(raster.len());
    for v in raster {
        let g = (255.0 * (v + 1.0).log2() / denom).clamp(0.0, 255.0);
        bytes.push(g as u8);
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", n, n)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Feasibility wrapper; exit-code mapping happens in the binary.
pub fn cmd_feasibility(d: usize, p: f64, r: f64, out: Option<&Path>) -> Result<analysis::FeasibilityReport> {
    let rep = analysis::feasibility(d, p, r);
    if let Some(path) = out {
        write_json(path, &rep)?;
    }
    Ok(rep)
}

/// Point evaluation with the descent trace, for debugging.
#[derive(Serialize)]
pub struct EvalReport {
    pub velocity: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub density: f64,
    pub trace: Vec<TraceStep>,
}

pub fn cmd_eval(cfg: &RunConfig, t: f64, x: &[f64]) -> Result<EvalReport> {
    if x.len() != cfg.d {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, d = {}",
            x.len(),
            cfg.d
        )));
    }
    match cfg.mode {
        Mode::L1 => {
            let field = L1Field::new(cfg.l1_params()?)?;
            let ((v, j), trace) = field.velocity_traced(t, x, cfg.depth)?;
            let density = field.density(t, x)?;
            Ok(EvalReport { velocity: v.to_vec(), jacobian: j.a.to_vec(), density, trace })
        }
        Mode::Lr => {
            let field = LrField::new(cfg.lr_params()?)?;
            let ((v, j), trace) = field.velocity_traced(cfg.component, t, x, cfg.depth)?;
            let density = field.density(cfg.component, t, x)?;
            Ok(EvalReport { velocity: v.to_vec(), jacobian: j.a.to_vec(), density, trace })
        }
        Mode::Block => {
            let bp = cfg.block_params()?;
            let (v, j) = blocks::block_velocity(t, x, &bp, cfg.d);
            let density = blocks::block_density(t, x, &bp, cfg.d);
            Ok(EvalReport { velocity: v.to_vec(), jacobian: j.a.to_vec(), density, trace: vec![] })
        }
    }
}

/// One verification check with its measured value and threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn upper(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.pass);
        VerifyReport { suite: suite.into(), checks, passed }
    }

    pub fn print(&self) {
        for c in &self.checks {
            println!(
                "[{}] {}: value={:.3e} threshold={:.3e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            );
        }
        println!("suite {}: {}", self.suite, if self.passed { "PASS" } else { "FAIL" });
    }
}

/// The synchronous pair as a weak-form test subject.
pub fn l1_pair(field: &L1Field) -> PdePair<'_> {
    PdePair {
        d: field.params.d,
        nu: field.params.nu,
        density_rep: Box::new(move |t| field.density_rep(t)),
        velocity: Box::new(move |t, x| field.velocity(t, x).map(|vj| vj.0).unwrap_or_else(|_| geometry::zero_vector(x.len()))),
        window_ok: Box::new(move |a, b| same_phase_l1(field, a, b)),
    }
}

/// The asynchronous pair (component `i`) as a weak-form test subject.
pub fn lr_pair(field: &LrField, i: usize) -> PdePair<'_> {
    PdePair {
        d: field.params.d,
        nu: field.params.nu,
        density_rep: Box::new(move |t| field.density_rep(i, t)),
        velocity: Box::new(move |t, x| {
            field.velocity(i, t, x).map(|vj| vj.0).unwrap_or_else(|_| geometry::zero_vector(x.len()))
        }),
        window_ok: Box::new(move |a, b| same_phase_lr(field, a, b)),
    }
}

/// The time-reversed pair: `u(t) = -w(1-t)` transports the reversed density
/// from the spread-out state back to the concentrated one.
pub fn reversed_l1_pair(field: &L1Field) -> PdePair<'_> {
    PdePair {
        d: field.params.d,
        nu: field.params.nu,
        density_rep: Box::new(move |t| field.density_rep(1.0 - t)),
        velocity: Box::new(move |t, x| {
            let v = field.velocity(1.0 - t, x).map(|vj| vj.0);
            match v {
                Ok(mut v) => {
                    for vl in v.iter_mut() {
                        *vl = -*vl;
                    }
                    v
                }
                Err(_) => geometry::zero_vector(x.len()),
            }
        }),
        window_ok: Box::new(move |a, b| same_phase_l1(field, 1.0 - b, 1.0 - a)),
    }
}

/// The spreading block as a weak-form test subject.
pub fn block_pair(bp: BlockParams, d: usize, nu: f64) -> PdePair<'static> {
    PdePair {
        d,
        nu,
        density_rep: Box::new(move |t| {
            Ok(crate::ensemble::DensityRep::Patches(blocks::block_cubes(t, &bp, d).patches))
        }),
        velocity: Box::new(move |t, x| blocks::block_velocity(t, x, &bp, d).0),
        window_ok: Box::new(|a, b| 0.0 <= a && b <= 1.0),
    }
}

pub fn same_phase_l1(field: &L1Field, a: f64, b: f64) -> bool {
    match (field.schedule().locate(a), field.schedule().locate(b)) {
        (Ok(Located::At(pa)), Ok(Located::At(pb))) => {
            pa.index == pb.index && pa.phase == pb.phase
        }
        _ => false,
    }
}

pub fn same_phase_lr(field: &LrField, a: f64, b: f64) -> bool {
    match (field.schedule().locate(a), field.schedule().locate(b)) {
        (Ok(Located::At(pa)), Ok(Located::At(pb))) => {
            pa.index == pb.index && pa.phase == pb.phase
        }
        _ => false,
    }
}

/// Phase-interior times for residual tests: uniform draws rejected until the
/// `dt`-window clears every checkpoint.
pub fn residual_times(
    window_ok: &dyn Fn(f64, f64) -> bool,
    n: usize,
    dt: f64,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut guard = 0;
    while out.len() < n && guard < 100_000 {
        guard += 1;
        let t = rng.gen_range(lo..hi);
        if window_ok(t - dt, t + dt) {
            out.push(t);
        }
    }
    out
}

pub fn cmd_verify(suite: &str, cfg: &RunConfig) -> Result<VerifyReport> {
    match suite {
        "divergence" => verify_divergence(cfg),
        "mass" => verify_mass(cfg),
        "weakform" => verify_weakform(cfg),
        "scaling" => verify_scaling(cfg),
        "selfsimilar" => verify_selfsimilar(cfg),
        "contraction" => verify_contraction(cfg),
        "bounds" => verify_bounds(cfg),
        other => Err(Error::UnknownSuite(other.into())),
    }
}

fn verify_divergence(cfg: &RunConfig) -> Result<VerifyReport> {
    let d = cfg.d;
    let mut checks = Vec::new();
    let bp = cfg.block_params()?;
    let block = move |t: f64, x: &[f64]| blocks::block_velocity(t, x, &bp, d);
    checks.push(Check::upper(
        "block analytic trace",
        analysis::divergence_max(&block, d, 2000, cfg.seed),
        1e-10,
    ));
    checks.push(Check::upper(
        "block central-difference ratio",
        analysis::divergence_fd_max(&block, d, 500, 1e-5, cfg.seed + 1),
        1e-4,
    ));
    let l1 = L1Field::new(cfg.l1_params()?)?;
    let fl1 = move |t: f64, x: &[f64]| l1.velocity(t, x).unwrap();
    checks.push(Check::upper(
        "synchronous analytic trace",
        analysis::divergence_max(&fl1, d, 2000, cfg.seed + 2),
        1e-10,
    ));
    let lr = LrField::new(cfg.lr_params()?)?;
    for i in 1..=2usize {
        let lr = &lr;
        let flr = move |t: f64, x: &[f64]| lr.velocity(i, t, x).unwrap();
        checks.push(Check::upper(
            format!("asynchronous analytic trace (component {i})"),
            analysis::divergence_max(&flr, d, 2000, cfg.seed + 3 + i as u64),
            1e-10,
        ));
    }
    Ok(VerifyReport::new("divergence", checks))
}

fn verify_mass(cfg: &RunConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let l1 = L1Field::new(cfg.l1_params()?)?;
    let mut worst = 0.0f64;
    for j in 0..25 {
        let t = j as f64 / 25.0;
        let m = l1.density_rep(t)?.mass(cfg.d, cfg.nu, DyadicPow::ONE);
        worst = worst.max((m - 1.0).abs());
    }
    checks.push(Check::upper("synchronous freeze mass deviation", worst, 0.0));
    let lr = LrField::new(cfg.lr_params()?)?;
    let mut worst = 0.0f64;
    for i in 1..=2usize {
        for j in 0..25 {
            let t = j as f64 / 25.0;
            let m = lr.density_rep(i, t)?.mass(cfg.d, cfg.nu, DyadicPow::ONE);
            worst = worst.max((m - 1.0).abs());
        }
    }
    checks.push(Check::upper("asynchronous freeze mass deviation", worst, 0.0));
    Ok(VerifyReport::new("mass", checks))
}

fn residual_stats(
    pair: &PdePair,
    dict: &[TestFunction],
    times: &[f64],
    dt: f64,
    res: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for phi in dict {
        for &t in times {
            let r = analysis::weak_residual(pair, phi, t, dt, res)?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

fn verify_weakform(cfg: &RunConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let dict = analysis::test_dictionary(cfg.d, 3);
    let dt = 1e-4;
    let res = cfg.grid.min(512);

    let bp = cfg.block_params()?;
    let pair = block_pair(bp, cfg.d, cfg.nu);
    let times = [0.41, 0.5, 0.55];
    checks.push(Check::upper(
        "block pair residual",
        residual_stats(&pair, &dict, &times, 1e-3, res)?,
        1e-3,
    ));

    let l1 = L1Field::new(cfg.l1_params()?)?;
    let pair = l1_pair(&l1);
    let times = residual_times(&pair.window_ok, 5, dt, 0.02, 0.78, cfg.seed);
    checks.push(Check::upper(
        "synchronous pair residual",
        residual_stats(&pair, &dict, &times, dt, res)?,
        0.05,
    ));

    let lr = LrField::new(cfg.lr_params()?)?;
    let pair = lr_pair(&lr, 1);
    let times = residual_times(&pair.window_ok, 5, dt, 0.02, 0.95, cfg.seed + 1);
    checks.push(Check::upper(
        "asynchronous pair residual",
        residual_stats(&pair, &dict, &times, dt, res)?,
        0.05,
    ));

    let pair = reversed_l1_pair(&l1);
    let times = residual_times(&pair.window_ok, 5, dt, 0.22, 0.98, cfg.seed + 2);
    checks.push(Check::upper(
        "time-reversed pair residual",
        residual_stats(&pair, &dict, &times, dt, res)?,
        0.05,
    ));
    Ok(VerifyReport::new("weakform", checks))
}

fn verify_scaling(cfg: &RunConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let bp = cfg.block_params()?;
    let d = cfg.d;
    let t = 0.5;
    let base_dom = Cube::unit(d);
    let jac = |x: &[f64]| blocks::block_velocity(t, x, &bp, d).1;
    let base = analysis::w1p_seminorm_grid(&jac, cfg.p, 512, &base_dom);
    for m in 1..=3i32 {
        let zoom = (2.0f64).powi(m);
        let jac_m = |x: &[f64]| {
            let y: Point = x.iter().map(|v| v * zoom).collect();
            let mut j = blocks::block_velocity(t, &y, &bp, d).1;
            j.scale(zoom);
            j
        };
        let dom = Cube::new(geometry::zero_vector(d), 1.0 / zoom);
        let got = analysis::w1p_seminorm_grid(&jac_m, cfg.p, 512, &dom);
        let want = (m as f64 * (1.0 - d as f64 / cfg.p)).exp2() * base;
        checks.push(Check::upper(
            format!("rescaling factor deviation (m = {m})"),
            (got / want - 1.0).abs(),
            0.02,
        ));
    }
    Ok(VerifyReport::new("scaling", checks))
}

fn verify_selfsimilar(cfg: &RunConfig) -> Result<VerifyReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let l1 = L1Field::new(cfg.l1_params()?)?;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let t = rng.gen_range(0.01..0.2);
        let x: Point = (0..cfg.d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let Located::At(p) = l1.schedule().locate(t)? else { continue };
        if p.phase != Phase::Break {
            continue;
        }
        let (v, _) = l1.velocity_at_depth(t, &x, cfg.depth)?;
        let k = geometry::index_of_point(p.index as u32, &x, cfg.d).unwrap();
        let c = geometry::center_of_index(p.index as u32, k, cfg.d).unwrap();
        let zoom = ((1.0 + cfg.nu) * p.index as f64).exp2();
        let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
        let (vin, _) = l1.velocity_at_depth(p.local, &y, cfg.depth - 1)?;
        for l in 0..cfg.d {
            let want = -(p.scale / zoom) * vin[l];
            worst = worst.max((v[l] - want).abs() / (1.0 + want.abs()));
        }
    }
    checks.push(Check::upper("synchronous break self-similarity", worst, 1e-12));

    let lr = LrField::new(cfg.lr_params()?)?;
    let (_, _, t2, tinf) = lr.schedule().checkpoints(1)?;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let t = rng.gen_range(t2..tinf);
        let x: Point = (0..cfg.d).map(|_| rng.gen_range(-0.5..-0.26)).collect();
        let (v, _) = lr.velocity_at_depth(1, t, &x, cfg.depth)?;
        let c = geometry::center_of_index(cfg.eta, 1, cfg.d).unwrap();
        let zoom = (cfg.eta as f64).exp2();
        let y: Point = x.iter().zip(&c).map(|(xl, cl)| (xl - cl) * zoom).collect();
        let s = (t - t2) / (tinf - t2);
        let (vin, _) = lr.velocity_at_depth(2, s, &y, cfg.depth - 1)?;
        for l in 0..cfg.d {
            let want = vin[l] / (zoom * (tinf - t2));
            worst = worst.max((v[l] - want).abs() / (1.0 + want.abs()));
        }
    }
    checks.push(Check::upper("asynchronous handoff self-similarity", worst, 1e-12));
    Ok(VerifyReport::new("selfsimilar", checks))
}

fn verify_contraction(cfg: &RunConfig) -> Result<VerifyReport> {
    let lr = cfg.lr_params()?;
    let l1 = cfg.l1_params()?;
    let c = analysis::contraction_constants(&lr, &l1);
    let checks = vec![
        Check::upper("asynchronous velocity factor", c.velocity_async, 1.0 - 1e-12),
        Check::upper("asynchronous density mass factor", c.density_mass_async, 1.0 - 1e-12),
        Check::upper("asynchronous density Lipschitz factor", c.density_lip_async, 1.0 - 1e-12),
        Check::upper("synchronous velocity factor", c.velocity_sync, 1.0 - 1e-12),
        Check::upper("synchronous density mass factor", c.density_mass_sync, 1.0 - 1e-12),
        Check::upper("synchronous density Lipschitz factor", c.density_lip_sync, 1.0 - 1e-12),
    ];
    Ok(VerifyReport::new("contraction", checks))
}

fn verify_bounds(cfg: &RunConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let params = cfg.lr_params()?;
    let bound = analysis::heuristic_density_bound(&params);
    let field = LrField::new(params)?;
    let mut worst = 0.0f64;
    for j in 0..20 {
        let t = j as f64 / 20.0;
        let n = field.density_rep(1, t)?.norm_lr(cfg.r, cfg.d, cfg.nu);
        worst = worst.max(n);
    }
    checks.push(Check::upper("max sampled norm vs series bound", worst, bound));
    Ok(VerifyReport::new("bounds", checks))
}
