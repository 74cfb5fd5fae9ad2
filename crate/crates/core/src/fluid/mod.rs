//! Limiting normalized queue trajectories.
//!
//! For one environment interval the trajectory of each station follows a
//! closed form `a + b·s + c·e^{-d·s}` until a station classified
//! absolutely non-bottleneck drains to zero and freezes there; the
//! recursion then restarts on the survivors. Across environment jumps the
//! terminal shares carry over as the next interval's initial condition and
//! frozen stations re-enter the active set.
//!
//! Three solver modes are provided because the closed-form recursion
//! admits two published coefficient conventions that disagree for nonzero
//! initial shares, and direct integration of the reflected dynamics gives
//! a third trajectory:
//!
//! * [`SolveMode::Scheme`]  — the integral term carries the initial idle
//!   fraction as a factor,
//! * [`SolveMode::Example`] — the integral term is unscaled (this variant
//!   reproduces the published worked numbers and is the default),
//! * [`SolveMode::Ode`]     — fixed-step RK4 on the reflected ODE, used as
//!   the reference for simulation convergence.
//!
//! All three coincide when every station starts empty.

mod constant;
mod ode;
mod roots;
mod shares;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constant::{solve_constant_env, ConstantEnvOutcome};
pub use roots::{closed_form_value, level_crossings, zero_hit_time};
pub use shares::{
    aggregate_bottleneck_share, group_relaxation, group_share, station_queue_share,
    station_queue_share_quadrature, GroupShare,
};

use crate::model::{EnvironmentPath, EnvironmentSpec, NetworkSpec};

/// Tolerance for treating a carried share as already drained.
pub(crate) const ZERO_SHARE_EPS: f64 = 1e-12;
/// Zero hits closer than this freeze together.
pub(crate) const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Scheme,
    Example,
    Ode,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("grid is not strictly increasing")]
    GridNotIncreasing,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("environment path has no intervals")]
    EmptyPath,
}

/// Coefficients of `a + b·s + c·e^{-d·s}` with `s` measured from the
/// segment start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ClosedForm {
    pub fn value(&self, s: f64) -> f64 {
        closed_form_value(self.a, self.b, self.c, self.d, s)
    }

    /// Earliest `s` in `[0, window]` where the form reaches zero.
    pub fn zero_hit(&self, window: f64) -> Option<f64> {
        zero_hit_time(self.a, self.b, self.c, self.d, window)
    }
}

/// Per-station content of a closed-form segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationForm {
    /// Drained to zero earlier in the environment interval.
    Frozen,
    Closed(ClosedForm),
}

/// Segment payload: closed forms, or a dense sample grid for ODE output.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentBody {
    Closed(Vec<StationForm>),
    Sampled {
        /// Absolute sample times, strictly increasing.
        times: Vec<f64>,
        /// Row-major `[sample][station]` values.
        values: Vec<f64>,
        /// Per-sample bitmask of stations held at zero.
        frozen: Vec<u64>,
    },
}

/// One trajectory piece on `[t_start, t_end]` under a fixed environment
/// state and a fixed active-station set.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub env_state: usize,
    pub body: SegmentBody,
}

impl FluidSegment {
    pub fn station_count(&self) -> usize {
        match &self.body {
            SegmentBody::Closed(forms) => forms.len(),
            SegmentBody::Sampled { times, values, .. } => {
                if times.is_empty() { 0 } else { values.len() / times.len() }
            }
        }
    }

    /// Queue shares at absolute time `t` (clamped into the segment).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.t_start, self.t_end);
        match &self.body {
            SegmentBody::Closed(forms) => {
                let s = t - self.t_start;
                forms
                    .iter()
                    .map(|f| match f {
                        StationForm::Frozen => 0.0,
                        StationForm::Closed(cf) => cf.value(s).max(0.0),
                    })
                    .collect()
            }
            SegmentBody::Sampled { times, values, .. } => {
                let k = self.station_count();
                let idx = times.partition_point(|x| *x <= t);
                let hi = idx.min(times.len() - 1);
                let lo = hi.saturating_sub(1);
                if hi == lo || times[hi] <= times[lo] {
                    return values[lo * k..(lo + 1) * k].iter().map(|v| v.max(0.0)).collect();
                }
                let w = ((t - times[lo]) / (times[hi] - times[lo])).clamp(0.0, 1.0);
                (0..k)
                    .map(|j| {
                        let a = values[lo * k + j];
                        let b = values[hi * k + j];
                        (a + w * (b - a)).max(0.0)
                    })
                    .collect()
            }
        }
    }

    /// Bitmask of stations frozen at absolute time `t`.
    pub fn frozen_mask(&self, t: f64) -> u64 {
        match &self.body {
            SegmentBody::Closed(forms) => forms
                .iter()
                .enumerate()
                .filter(|(_, f)| matches!(f, StationForm::Frozen))
                .fold(0u64, |m, (j, _)| m | (1 << j)),
            SegmentBody::Sampled { times, frozen, .. } => {
                let t = t.clamp(self.t_start, self.t_end);
                let idx = times.partition_point(|x| *x <= t);
                frozen[idx.saturating_sub(1)]
            }
        }
    }
}

/// A zero-hit record: the station and the absolute time it froze.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroHit {
    pub time: f64,
    pub station: usize,
}

/// Piecewise trajectory of normalized queue shares on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidTrajectory {
    pub k: usize,
    pub horizon: f64,
    pub mode: SolveMode,
    pub segments: Vec<FluidSegment>,
    pub zero_hits: Vec<ZeroHit>,
    /// Environment jump times inside `(0, horizon)`.
    pub env_jumps: Vec<f64>,
}

impl FluidTrajectory {
    pub fn segment_at(&self, t: f64) -> &FluidSegment {
        let t = t.clamp(0.0, self.horizon);
        let idx = self.segments.partition_point(|s| s.t_start <= t);
        &self.segments[idx.saturating_sub(1)]
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.segment_at(t).eval(t)
    }

    pub fn eval_station(&self, station: usize, t: f64) -> f64 {
        self.eval(t)[station]
    }

    pub fn frozen_mask(&self, t: f64) -> u64 {
        self.segment_at(t).frozen_mask(t)
    }

    pub fn env_state_at(&self, t: f64) -> usize {
        self.segment_at(t).env_state
    }

    /// Checks segment tiling, boundary continuity and value bounds on a
    /// uniform grid. Used by tests.
    pub fn check_invariants(&self, grid_step: f64) -> Result<(), String> {
        for pair in self.segments.windows(2) {
            if (pair[0].t_end - pair[1].t_start).abs() > 1e-9 {
                return Err(format!(
                    "gap between segments at {} vs {}",
                    pair[0].t_end, pair[1].t_start
                ));
            }
            let a = pair[0].eval(pair[0].t_end);
            let b = pair[1].eval(pair[1].t_start);
            for (x, y) in a.iter().zip(&b) {
                if (x - y).abs() > 1e-9 {
                    return Err(format!("discontinuity {x} vs {y} at t = {}", pair[0].t_end));
                }
            }
        }
        let mut t = 0.0;
        while t <= self.horizon {
            let q = self.eval(t);
            let total: f64 = q.iter().sum();
            if q.iter().any(|v| *v < 0.0 || *v > 1.0 + 1e-9) || total > 1.0 + 1e-9 {
                return Err(format!("bounds violated at t = {t}: {q:?}"));
            }
            t += grid_step;
        }
        for pair in self.zero_hits.windows(2) {
            if pair[1].time < pair[0].time - 1e-12 {
                return Err("zero hits out of order".into());
            }
        }
        Ok(())
    }
}

/// Bottleneck classification of every station at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// Idle fraction `1 - sum(q)` at the server station.
    pub idle_fraction: f64,
    /// Relative arrival rates `lambda_j * idle_fraction`.
    pub relative_rate: Vec<f64>,
    /// Loads `relative_rate / mu`.
    pub rho: Vec<f64>,
    /// Load at or above one.
    pub locally_bottleneck: Vec<bool>,
    /// Individual rate at or above the departure rate, regardless of the
    /// current queue state.
    pub absolutely_bottleneck: Vec<bool>,
}

/// Classifies stations given per-station individual rates, departure rates
/// and current queue shares.
pub fn classify(station_rates: &[f64], mu: &[f64], queues: &[f64]) -> Classification {
    debug_assert_eq!(station_rates.len(), mu.len());
    debug_assert_eq!(station_rates.len(), queues.len());
    let idle_fraction = 1.0 - queues.iter().sum::<f64>();
    let relative_rate: Vec<f64> = station_rates.iter().map(|l| l * idle_fraction).collect();
    let rho: Vec<f64> = relative_rate.iter().zip(mu).map(|(l, m)| l / m).collect();
    Classification {
        idle_fraction,
        locally_bottleneck: rho.iter().map(|r| *r >= 1.0).collect(),
        absolutely_bottleneck: station_rates.iter().zip(mu).map(|(l, m)| *l >= *m).collect(),
        relative_rate,
        rho,
    }
}

/// Normal reflection at zero of a sampled path with `X(0) = 0`:
/// `Φ_t(X) = X(t) - inf_{s<=t} X(s)`, computed with a running infimum.
pub fn skorokhod_reflect(grid: &[f64], x: &[f64]) -> Result<Vec<f64>, FluidError> {
    if grid.len() != x.len() {
        return Err(FluidError::DimensionMismatch(format!(
            "{} grid points vs {} samples",
            grid.len(),
            x.len()
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FluidError::GridNotIncreasing);
    }
    let mut inf = 0.0f64;
    Ok(x.iter()
        .map(|&v| {
            inf = inf.min(v);
            v - inf
        })
        .collect())
}

/// Solves the limiting trajectory interval by interval along an
/// environment path, carrying terminal shares across jumps. Frozen
/// stations re-enter the active set at each jump and are re-classified
/// with the new state's rates.
pub fn solve_semi_markov(
    env: &EnvironmentSpec,
    path: &EnvironmentPath,
    net: &NetworkSpec,
    mode: SolveMode,
) -> Result<FluidTrajectory, FluidError> {
    if net.beta.len() != net.k || net.mu.len() != net.k {
        return Err(FluidError::DimensionMismatch(format!(
            "network vectors must have length k = {}",
            net.k
        )));
    }
    let intervals = path.intervals();
    if intervals.is_empty() {
        return Err(FluidError::EmptyPath);
    }
    let mut x = net.beta.clone();
    let mut segments = Vec::new();
    let mut zero_hits = Vec::new();
    for &(start, end, state) in &intervals {
        let rates = env.station_rates(state);
        if rates.len() != net.k {
            return Err(FluidError::DimensionMismatch(format!(
                "routing width {} vs k = {}",
                rates.len(),
                net.k
            )));
        }
        let out = solve_constant_env(&rates, &net.mu, &x, end - start, mode, start, state)?;
        segments.extend(out.segments);
        zero_hits.extend(out.zero_hits);
        x = out.terminal;
    }
    Ok(FluidTrajectory {
        k: net.k,
        horizon: path.horizon,
        mode,
        segments,
        zero_hits,
        env_jumps: path.jumps.iter().copied().filter(|j| *j > 0.0 && *j < path.horizon).collect(),
    })
}
