//! Trajectory comparison, level-exceedance measures, strategy costs and
//! simulation-convergence reporting.

use serde::Serialize;
use thiserror::Error;

use crate::des::{self, DepartureRecording, SimConfig};
use crate::fluid::{
    self, level_crossings, FluidError, FluidTrajectory, SegmentBody, SolveMode, StationForm,
};
use crate::model::{EnvironmentPath, EnvironmentSpec, NetworkSpec};
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Des(#[from] des::DesError),
}

/// Largest pointwise station gap between two trajectories over a grid.
pub fn sup_distance(
    a: &FluidTrajectory,
    b: &FluidTrajectory,
    grid: &[f64],
) -> Result<f64, AnalysisError> {
    if a.k != b.k {
        return Err(AnalysisError::GridMismatch(format!(
            "station counts differ: {} vs {}",
            a.k, b.k
        )));
    }
    if grid.is_empty() {
        return Err(AnalysisError::GridMismatch("empty grid".into()));
    }
    if grid.iter().any(|t| *t < 0.0 || *t > a.horizon || *t > b.horizon) {
        return Err(AnalysisError::GridMismatch("grid point outside both horizons".into()));
    }
    let mut worst = 0.0f64;
    for &t in grid {
        let qa = a.eval(t);
        let qb = b.eval(t);
        for j in 0..a.k {
            worst = worst.max((qa[j] - qb[j]).abs());
        }
    }
    Ok(worst)
}

/// Lebesgue measure of `{ t in [0, horizon] : sum_{j in stations} q_j(t) > level }`.
///
/// Closed-form segments are solved exactly for their level crossings;
/// sampled segments fall back to trapezoid-level interpolation between
/// grid points.
pub fn exceedance_time(
    traj: &FluidTrajectory,
    level: f64,
    stations: &[usize],
    horizon: f64,
) -> f64 {
    let horizon = horizon.min(traj.horizon);
    let mut measure = 0.0;
    for seg in &traj.segments {
        if seg.t_start >= horizon {
            break;
        }
        let end = seg.t_end.min(horizon);
        let len = end - seg.t_start;
        if len <= 0.0 {
            continue;
        }
        match &seg.body {
            SegmentBody::Closed(forms) => {
                // All active stations in one segment share the decay rate,
                // so the subset sum is itself a closed form.
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for &j in stations {
                    if let StationForm::Closed(cf) = forms[j] {
                        a += cf.a;
                        b += cf.b;
                        c += cf.c;
                        d = cf.d;
                    }
                }
                let mut cuts = vec![0.0];
                cuts.extend(level_crossings(a - level, b, c, d, len));
                if *cuts.last().unwrap() < len {
                    cuts.push(len);
                }
                for pair in cuts.windows(2) {
                    let mid = 0.5 * (pair[0] + pair[1]);
                    let value = fluid::closed_form_value(a, b, c, d, mid);
                    if value > level {
                        measure += pair[1] - pair[0];
                    }
                }
            }
            SegmentBody::Sampled { times, values, .. } => {
                let k = seg.station_count();
                let total = |i: usize| -> f64 {
                    stations.iter().map(|&j| values[i * k + j]).sum()
                };
                for i in 0..times.len().saturating_sub(1) {
                    let (t0, t1) = (times[i], times[i + 1].min(horizon));
                    if t1 <= t0 {
                        break;
                    }
                    let (v0, v1) = (total(i), total(i + 1));
                    let above0 = v0 > level;
                    let above1 = v1 > level;
                    if above0 && above1 {
                        measure += t1 - t0;
                    } else if above0 != above1 {
                        let w = (level - v0) / (v1 - v0);
                        let cross = t0 + w * (t1 - t0);
                        measure += if above0 { cross - t0 } else { t1 - cross };
                    }
                }
            }
        }
    }
    measure
}

/// One repair strategy: a solvable scenario plus its costs and the queue
/// level whose exceedance time is billed.
#[derive(Debug, Clone)]
pub struct StrategyScenario {
    pub env: EnvironmentSpec,
    pub net: NetworkSpec,
    pub path: EnvironmentPath,
    /// One-off initialization cost.
    pub setup_cost: f64,
    /// Cost per unit of time spent above the level.
    pub unit_rate_cost: f64,
    /// Normalized queue threshold.
    pub level: f64,
    /// Stations whose shares are summed against the level.
    pub stations: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    A,
    B,
    Equivalent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyComparison {
    /// Exceedance time of strategy A.
    pub x: f64,
    /// Exceedance time of strategy B.
    pub y: f64,
    pub total_a: f64,
    pub total_b: f64,
    pub preferred: Preference,
}

/// Compares total expenses `setup + rate * exceedance` of two strategies,
/// with the exceedance times computed on fluid trajectories in `mode`.
pub fn compare_strategies(
    a: &StrategyScenario,
    b: &StrategyScenario,
    mode: SolveMode,
) -> Result<StrategyComparison, AnalysisError> {
    let x = strategy_exceedance(a, mode)?;
    let y = strategy_exceedance(b, mode)?;
    let total_a = a.setup_cost + a.unit_rate_cost * x;
    let total_b = b.setup_cost + b.unit_rate_cost * y;
    let preferred = if (total_a - total_b).abs() <= 1e-12 {
        Preference::Equivalent
    } else if total_a < total_b {
        Preference::A
    } else {
        Preference::B
    };
    Ok(StrategyComparison { x, y, total_a, total_b, preferred })
}

fn strategy_exceedance(s: &StrategyScenario, mode: SolveMode) -> Result<f64, AnalysisError> {
    let traj = fluid::solve_semi_markov(&s.env, &s.path, &s.net, mode)?;
    Ok(exceedance_time(&traj, s.level, &s.stations, s.path.horizon))
}

/// Per-unit-count row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

/// Sup distance of each replication's sampled path to a fluid trajectory
/// over the simulation grid.
pub fn sup_distances_to_fluid(
    result: &des::SimulationResult,
    fluid_traj: &FluidTrajectory,
) -> Vec<f64> {
    let reference: Vec<Vec<f64>> = result.grid.iter().map(|t| fluid_traj.eval(*t)).collect();
    result
        .replications
        .iter()
        .map(|rep| {
            let mut worst = 0.0f64;
            for (g, q_ref) in reference.iter().enumerate() {
                for j in 0..result.k {
                    let q = rep.queues[g * result.k + j] as f64 / result.n as f64;
                    worst = worst.max((q - q_ref[j]).abs());
                }
            }
            worst
        })
        .collect()
}

/// Runs the simulation at each unit count and reports the median and
/// interquartile range of the sup distance to the ODE-mode trajectory.
pub fn convergence_report(
    env: &EnvironmentSpec,
    net: &NetworkSpec,
    path: &EnvironmentPath,
    ns: &[usize],
    replications: usize,
    seed: u64,
    grid_step: f64,
) -> Result<ConvergenceReport, AnalysisError> {
    let fluid_traj = fluid::solve_semi_markov(env, path, net, SolveMode::Ode)?;
    let steps = (path.horizon / grid_step).round().max(1.0);
    let grid: Vec<f64> =
        (0..=steps as usize).map(|i| path.horizon * i as f64 / steps).collect();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let cfg = SimConfig {
            n,
            seed: derive_seed(seed, n as u64),
            sample_grid: grid.clone(),
            replications,
            departure_recording: DepartureRecording::None,
        };
        let result = des::simulate(env, path, net, &cfg)?;
        let mut dists = sup_distances_to_fluid(&result, &fluid_traj);
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(ConvergenceRow {
            n,
            median: quantile_sorted(&dists, 0.5),
            q1: quantile_sorted(&dists, 0.25),
            q3: quantile_sorted(&dists, 0.75),
        });
    }
    Ok(ConvergenceReport { rows })
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}
