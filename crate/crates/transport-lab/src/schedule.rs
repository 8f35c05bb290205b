//! Dyadic time partitions for both constructions, with point-location of a
//! time and the affine local-time maps.
//!
//! The synchronous schedule splits `[0, 1)` into intervals `[tau_i, tau_{i+1})`
//! with `tau_i = 1 - 2^{-beta(i-1)}` accumulating at 1; each interval has a
//! reversed "break" half and a forward "spread" half. The asynchronous
//! schedule gives each of the `2^{eta d}` cells one slot `[(k-1), k) / 2^{eta d}`
//! split at `tau_mid` and `tau_2` into break / spread / handoff phases.
//!
//! Boundary convention: every phase is half-open `[start, end)`, so a
//! checkpoint resolves to the later phase and the explicit (spread) formulas
//! win; the constructions are norm-continuous across checkpoints, so only
//! determinism is at stake.

use crate::error::{Error, Result};

/// Phase of a located time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Reversed rescaled copy of the construction itself (interval `E_i` / `T^k_(1)`).
    Break,
    /// Explicit building-block spreading (interval `O_i` / `T^k_(2)`).
    Spread,
    /// Forward handoff to the next sequence component (`T^k_(3)`, asynchronous only).
    Handoff,
}

/// Result of locating `t` in a partition: interval identity, phase, local
/// time in [0, 1], the reciprocal interval length, and orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    /// Interval id: `i` for the synchronous schedule, `k` for the asynchronous one.
    pub index: u64,
    pub phase: Phase,
    /// Affine local time, `s` in [0, 1].
    pub local: f64,
    /// Reciprocal of the phase interval length.
    pub scale: f64,
    /// True exactly in `Break` phases, where local time runs backwards.
    pub reversed: bool,
}

/// `t = 1` is a terminal marker, everything else carries a `SchedulePoint`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Located {
    Terminal,
    At(SchedulePoint),
}

impl Located {
    pub fn point(self) -> Option<SchedulePoint> {
        match self {
            Located::Terminal => None,
            Located::At(p) => Some(p),
        }
    }
}

/// Synchronous partition: checkpoints `tau_i = 1 - 2^{-beta(i-1)}`.
#[derive(Debug, Clone)]
pub struct L1Schedule {
    pub beta: f64,
    /// Cached checkpoints `tau_1, tau_2, ...` up to the first index whose
    /// floating value reaches 1.
    taus: Vec<f64>,
}

impl L1Schedule {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} not in (0, 1)")));
        }
        let mut taus = vec![0.0f64];
        for i in 2..=4096u32 {
            let tau = 1.0 - (2.0f64).powf(-beta * (i - 1) as f64);
            if tau >= 1.0 {
                break;
            }
            taus.push(tau);
            if 1.0 - tau < 1e-16 {
                break;
            }
        }
        Ok(L1Schedule { beta, taus })
    }

    /// `(tau_i, tau_i^mid, tau_{i+1})` for `i >= 1`.
    pub fn checkpoints(&self, i: u64) -> (f64, f64, f64) {
        let tau = |j: u64| -> f64 {
            if j as usize <= self.taus.len() {
                self.taus[j as usize - 1]
            } else {
                1.0 - (2.0f64).powf(-self.beta * (j - 1) as f64)
            }
        };
        let a = tau(i);
        let b = tau(i + 1);
        (a, 0.5 * (a + b), b)
    }

    /// Largest `i` with `tau_i <= t`.
    fn interval_of(&self, t: f64) -> u64 {
        let n = self.taus.partition_point(|&tau| tau <= t);
        n.max(1) as u64
    }

    pub fn locate(&self, t: f64) -> Result<Located> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        if t >= 1.0 {
            return Ok(Located::Terminal);
        }
        let i = self.interval_of(t);
        let (t1, mid, t2) = self.checkpoints(i);
        Ok(Located::At(if t < mid {
            SchedulePoint {
                index: i,
                phase: Phase::Break,
                local: (mid - t) / (mid - t1),
                scale: 1.0 / (mid - t1),
                reversed: true,
            }
        } else {
            SchedulePoint {
                index: i,
                phase: Phase::Spread,
                local: (t - mid) / (t2 - mid),
                scale: 1.0 / (t2 - mid),
                reversed: false,
            }
        }))
    }

    /// Invert the affine map recorded in a `SchedulePoint`.
    pub fn reconstruct(&self, p: &SchedulePoint) -> f64 {
        let (t1, mid, t2) = self.checkpoints(p.index);
        match p.phase {
            Phase::Break => mid - p.local * (mid - t1),
            Phase::Spread => mid + p.local * (t2 - mid),
            Phase::Handoff => unreachable!("synchronous schedule has no handoff phase"),
        }
    }
}

/// Asynchronous partition: one slot per generation-`eta` cell.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    pub beta: f64,
    pub eta: u32,
    pub d: usize,
    pub cells: u64,
    cell_width: f64,
    /// `2^-beta / 2^{eta d}`, the length of the handoff phase.
    tail: f64,
}

impl LrSchedule {
    pub fn new(beta: f64, eta: u32, d: usize) -> Result<Self> {
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} not in (0, 1)")));
        }
        if eta == 0 || eta as usize * d > 50 {
            return Err(Error::InvalidParameter(format!("eta = {eta} out of range for d = {d}")));
        }
        let cells = crate::geometry::cell_count(eta, d);
        let cell_width = 1.0 / cells as f64;
        Ok(LrSchedule { beta, eta, d, cells, cell_width, tail: (2.0f64).powf(-beta) * cell_width })
    }

    /// `(tau^k_1, tau^k_mid, tau^k_2, tau^k_inf)` for `k` in `1..=2^{eta d}`.
    pub fn checkpoints(&self, k: u64) -> Result<(f64, f64, f64, f64)> {
        if k < 1 || k > self.cells {
            return Err(Error::IndexOutOfRange { eta: self.eta, d: self.d, k, max: self.cells });
        }
        let t1 = (k - 1) as f64 * self.cell_width;
        let tinf = k as f64 * self.cell_width;
        let t2 = tinf - self.tail;
        Ok((t1, 0.5 * (t1 + t2), t2, tinf))
    }

    pub fn locate(&self, t: f64) -> Result<Located> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        if t >= 1.0 {
            return Ok(Located::Terminal);
        }
        let k = ((t / self.cell_width).floor() as u64 + 1).min(self.cells);
        let (t1, mid, t2, tinf) = self.checkpoints(k).expect("k in range by construction");
        Ok(Located::At(if t < mid {
            SchedulePoint {
                index: k,
                phase: Phase::Break,
                local: (mid - t) / (mid - t1),
                scale: 1.0 / (mid - t1),
                reversed: true,
            }
        } else if t < t2 {
            SchedulePoint {
                index: k,
                phase: Phase::Spread,
                local: (t - mid) / (t2 - mid),
                scale: 1.0 / (t2 - mid),
                reversed: false,
            }
        } else {
            SchedulePoint {
                index: k,
                phase: Phase::Handoff,
                local: (t - t2) / (tinf - t2),
                scale: 1.0 / (tinf - t2),
                reversed: false,
            }
        }))
    }

    /// Invert the affine map recorded in a `SchedulePoint`.
    pub fn reconstruct(&self, p: &SchedulePoint) -> f64 {
        let (t1, mid, t2, tinf) = self.checkpoints(p.index).expect("index from locate");
        match p.phase {
            Phase::Break => mid - p.local * (mid - t1),
            Phase::Spread => mid + p.local * (t2 - mid),
            Phase::Handoff => t2 + p.local * (tinf - t2),
        }
    }
}
