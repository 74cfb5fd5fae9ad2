//! Discrete-event simulation of the pre-limit `N`-unit network.
//!
//! Each unit at the server station carries an exponential clock with the
//! current environment state's rate; on expiry the unit routes to a client
//! station. Client station `j` is driven by an autonomous renewal process
//! with mean gap `1/(mu_j N)`: every point emits one unit back to the
//! server if the queue is nonempty, and is lost (but still recorded)
//! otherwise. At an environment jump all outstanding server clocks are
//! regenerated with the new rate.
//!
//! Replications run in parallel on independently derived seed streams and
//! results are indexed by replication number, so aggregation is
//! order-independent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{DepartureFamily, EnvironmentPath, EnvironmentSpec, NetworkSpec};
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesError {
    #[error("station {station} has no departure point at or before t = {t}")]
    NoDeparturesBefore { station: usize, t: f64 },
    #[error("station index {station} out of range")]
    StationOutOfRange { station: usize },
    #[error("idle estimates were not recorded for t = {t}")]
    IdleQueryNotRecorded { t: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// What to keep about the departure point processes.
#[derive(Debug, Clone, PartialEq)]
pub enum DepartureRecording {
    /// Nothing beyond event counts.
    None,
    /// For each listed time, the last point at or before it and the queue
    /// value right after that point. Constant memory per replication.
    LastBefore(Vec<f64>),
    /// Every point with the post-point queue value.
    Full,
}

/// Simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Units in the network.
    pub n: usize,
    pub seed: u64,
    /// Times at which queue lengths are recorded.
    pub sample_grid: Vec<f64>,
    pub replications: usize,
    pub departure_recording: DepartureRecording,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64, sample_grid: Vec<f64>, replications: usize) -> Self {
        SimConfig { n, seed, sample_grid, replications, departure_recording: DepartureRecording::Full }
    }
}

/// A recorded point of a departure process: its time and the queue value
/// right after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeparturePoint {
    pub time: f64,
    pub queue_after: u32,
}

/// One replication's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// Row-major `[grid_point][station]` queue lengths.
    pub queues: Vec<u32>,
    /// Per-station recorded departure points (empty unless `Full`).
    pub departure_points: Vec<Vec<DeparturePoint>>,
    /// Per-station, per query time: the last point at or before the query
    /// (empty unless `LastBefore`).
    pub last_point_before: Vec<Vec<Option<DeparturePoint>>>,
    pub server_completions: u64,
    pub departure_events: u64,
    pub lost_departure_points: u64,
    /// Events at which unit conservation failed (always zero).
    pub conservation_violations: u64,
}

/// Event-sampled paths plus departure bookkeeping for all replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub idle_query_times: Vec<f64>,
    pub replications: Vec<ReplicationResult>,
}

impl SimulationResult {
    /// Queue length of `station` at grid index `g` in replication `rep`.
    pub fn queue_at(&self, rep: usize, g: usize, station: usize) -> u32 {
        self.replications[rep].queues[g * self.k + station]
    }
}

/// Renewal point-process generator with i.i.d. gaps of mean `1/rate`.
pub struct DepartureProcess {
    family: DepartureFamily,
    rate: f64,
    rng: ChaCha12Rng,
    count: u64,
    last: f64,
}

impl DepartureProcess {
    pub fn next_point(&mut self) -> f64 {
        match self.family {
            DepartureFamily::Deterministic => {
                self.count += 1;
                self.count as f64 / self.rate
            }
            DepartureFamily::Exponential => {
                let u: f64 = self.rng.gen();
                self.last += -(1.0 - u).ln() / self.rate;
                self.last
            }
            DepartureFamily::Erlang { shape } => {
                let stage_rate = self.rate * shape as f64;
                let gap: f64 = (0..shape)
                    .map(|_| {
                        let u: f64 = self.rng.gen();
                        -(1.0 - u).ln() / stage_rate
                    })
                    .sum();
                self.last += gap;
                self.last
            }
        }
    }
}

/// Builds the departure point-process generator for one station: family
/// gaps with mean `1/rate`. The deterministic family puts point `i` at
/// exactly `i/rate`.
pub fn make_departure_process(family: DepartureFamily, rate: f64, seed: u64) -> DepartureProcess {
    assert!(rate > 0.0, "departure rate must be positive");
    DepartureProcess { family, rate, rng: ChaCha12Rng::seed_from_u64(seed), count: 0, last: 0.0 }
}

/// Min-heap entry for server clocks; times are nonnegative and finite or
/// +inf, so total order is safe.
#[derive(PartialEq)]
struct Clock(f64);

impl Eq for Clock {}

impl Ord for Clock {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other.0.total_cmp(&self.0)
    }
}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs the event loop for every replication. The environment path is
/// shared; randomness derives entirely from `cfg.seed`.
pub fn simulate(
    env: &EnvironmentSpec,
    path: &EnvironmentPath,
    net: &NetworkSpec,
    cfg: &SimConfig,
) -> Result<SimulationResult, DesError> {
    if cfg.n == 0 {
        return Err(DesError::InvalidConfig("n must be at least 1".into()));
    }
    if cfg.sample_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(DesError::InvalidConfig("sample grid must be nondecreasing".into()));
    }
    if cfg.sample_grid.iter().any(|t| *t < 0.0 || *t > path.horizon) {
        return Err(DesError::InvalidConfig("sample grid outside the horizon".into()));
    }
    let idle_query_times = match &cfg.departure_recording {
        DepartureRecording::LastBefore(ts) => ts.clone(),
        _ => Vec::new(),
    };
    let replications: Vec<ReplicationResult> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(env, path, net, cfg, derive_seed(cfg.seed, 1 + rep as u64)))
        .collect();
    Ok(SimulationResult {
        n: cfg.n,
        k: net.k,
        seed: cfg.seed,
        grid: cfg.sample_grid.clone(),
        idle_query_times,
        replications,
    })
}

fn run_replication(
    env: &EnvironmentSpec,
    path: &EnvironmentPath,
    net: &NetworkSpec,
    cfg: &SimConfig,
    rep_seed: u64,
) -> ReplicationResult {
    let n = cfg.n;
    let k = net.k;
    let horizon = path.horizon;

    // Pre-generate departure points per station from dedicated streams.
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let rate = net.mu[j] * n as f64;
        let mut gen = make_departure_process(
            net.departure_family,
            rate,
            derive_seed(rep_seed, 0x0D00 + j as u64),
        );
        let mut station_points = Vec::with_capacity((rate * horizon) as usize + 16);
        loop {
            let p = gen.next_point();
            if p > horizon {
                break;
            }
            station_points.push(p);
        }
        points.push(station_points);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(rep_seed, 0xEE));

    // Initial queues: floor(beta_j N), remainder at the server.
    let mut queues: Vec<u32> = net.beta.iter().map(|b| (b * n as f64).floor() as u32).collect();
    let mut at_server = n as u64 - queues.iter().map(|q| *q as u64).sum::<u64>();

    let mut state = path.states[0];
    let mut lambda = env.lambda[state];
    let mut routing_cdf = cumulative(&env.routing[state]);

    let mut clocks: BinaryHeap<Clock> = BinaryHeap::with_capacity(at_server as usize);
    for _ in 0..at_server {
        clocks.push(Clock(sample_clock(&mut rng, 0.0, lambda)));
    }

    let mut next_point_idx = vec![0usize; k];
    let mut env_cursor = 1usize; // path.jumps[0] == 0 is the start
    let mut grid_cursor = 0usize;

    let record_full = matches!(cfg.departure_recording, DepartureRecording::Full);
    let mut departure_points: Vec<Vec<DeparturePoint>> = vec![Vec::new(); k];
    let mut last_point_before: Vec<Vec<Option<DeparturePoint>>> = Vec::new();
    let idle_queries: Vec<f64> = match &cfg.departure_recording {
        DepartureRecording::LastBefore(ts) => {
            last_point_before = vec![vec![None; ts.len()]; k];
            ts.clone()
        }
        _ => Vec::new(),
    };

    let mut samples: Vec<u32> = Vec::with_capacity(cfg.sample_grid.len() * k);
    let mut server_completions = 0u64;
    let mut departure_events = 0u64;
    let mut lost_points = 0u64;
    let mut violations = 0u64;

    // Event kinds in tie order: environment jump, departure, arrival.
    const EV_ENV: u8 = 0;
    const EV_DEPART: u8 = 1;
    const EV_ARRIVE: u8 = 2;

    loop {
        let mut ev_time = f64::INFINITY;
        let mut ev_kind = u8::MAX;
        let mut ev_station = usize::MAX;

        if env_cursor < path.jumps.len() {
            ev_time = path.jumps[env_cursor];
            ev_kind = EV_ENV;
        }
        for j in 0..k {
            if let Some(&p) = points[j].get(next_point_idx[j]) {
                if p < ev_time {
                    ev_time = p;
                    ev_kind = EV_DEPART;
                    ev_station = j;
                }
            }
        }
        if let Some(Clock(c)) = clocks.peek() {
            if *c < ev_time {
                ev_time = *c;
                ev_kind = EV_ARRIVE;
                ev_station = usize::MAX;
            }
        }

        let done = ev_kind == u8::MAX || ev_time > horizon;
        let flush_until = if done { f64::INFINITY } else { ev_time };
        while grid_cursor < cfg.sample_grid.len() && cfg.sample_grid[grid_cursor] < flush_until {
            samples.extend_from_slice(&queues);
            grid_cursor += 1;
        }
        if done {
            break;
        }

        match ev_kind {
            EV_ENV => {
                state = path.states[env_cursor];
                env_cursor += 1;
                lambda = env.lambda[state];
                routing_cdf = cumulative(&env.routing[state]);
                // Regenerate every outstanding server clock at the new rate.
                let outstanding = clocks.len();
                clocks.clear();
                for _ in 0..outstanding {
                    clocks.push(Clock(sample_clock(&mut rng, ev_time, lambda)));
                }
            }
            EV_DEPART => {
                let j = ev_station;
                next_point_idx[j] += 1;
                if queues[j] > 0 {
                    queues[j] -= 1;
                    at_server += 1;
                    clocks.push(Clock(sample_clock(&mut rng, ev_time, lambda)));
                    departure_events += 1;
                } else {
                    lost_points += 1;
                }
                if record_full {
                    departure_points[j]
                        .push(DeparturePoint { time: ev_time, queue_after: queues[j] });
                }
                for (qi, qt) in idle_queries.iter().enumerate() {
                    if ev_time <= *qt {
                        last_point_before[j][qi] =
                            Some(DeparturePoint { time: ev_time, queue_after: queues[j] });
                    }
                }
            }
            EV_ARRIVE => {
                clocks.pop();
                at_server -= 1;
                server_completions += 1;
                let u: f64 = rng.gen();
                let j = pick_from_cdf(&routing_cdf, u);
                queues[j] += 1;
            }
            _ => unreachable!(),
        }

        if at_server + queues.iter().map(|q| *q as u64).sum::<u64>() != n as u64 {
            violations += 1;
        }
    }

    ReplicationResult {
        queues: samples,
        departure_points,
        last_point_before,
        server_completions,
        departure_events,
        lost_departure_points: lost_points,
        conservation_violations: violations,
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn pick_from_cdf(cdf: &[f64], u: f64) -> usize {
    for (i, c) in cdf.iter().enumerate() {
        if u < *c {
            return i;
        }
    }
    cdf.len() - 1
}

fn sample_clock(rng: &mut ChaCha12Rng, now: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    let u: f64 = rng.gen();
    now + -(1.0 - u).ln() / lambda
}

/// Normalized sampled paths `Q_j(t) / N`, per replication, row-major
/// `[grid_point][station]`.
pub fn normalized_paths(result: &SimulationResult) -> Vec<Vec<f64>> {
    let n = result.n as f64;
    result
        .replications
        .iter()
        .map(|rep| rep.queues.iter().map(|q| *q as f64 / n).collect())
        .collect()
}

/// Idle-probability estimate at the last departure point before `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdleEstimate {
    /// Empirical frequency of an empty queue at that point.
    pub estimate: f64,
    /// Binomial standard error.
    pub std_error: f64,
    pub replications: usize,
}

/// Estimates the probability that the queue at `station` is empty at the
/// last departure-process point at or before `t`, across replications.
pub fn estimate_idle_probability(
    result: &SimulationResult,
    station: usize,
    t: f64,
) -> Result<IdleEstimate, DesError> {
    if station >= result.k {
        return Err(DesError::StationOutOfRange { station });
    }
    let mut empty = 0u64;
    for rep in &result.replications {
        let point = if !rep.last_point_before.is_empty() {
            let qi = result
                .idle_query_times
                .iter()
                .position(|qt| *qt == t)
                .ok_or(DesError::IdleQueryNotRecorded { t })?;
            rep.last_point_before[station][qi]
        } else {
            let pts = &rep.departure_points[station];
            let idx = pts.partition_point(|p| p.time <= t);
            if idx == 0 { None } else { Some(pts[idx - 1]) }
        };
        let point = point.ok_or(DesError::NoDeparturesBefore { station, t })?;
        if point.queue_after == 0 {
            empty += 1;
        }
    }
    let reps = result.replications.len();
    let p = empty as f64 / reps as f64;
    Ok(IdleEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / reps as f64).sqrt(),
        replications: reps,
    })
}
