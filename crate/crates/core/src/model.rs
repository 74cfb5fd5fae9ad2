//! Network and environment specifications, environment-path sampling, and
//! the monotone-environment checks.
//!
//! A network couples one infinite-server station with `k` single-server
//! client stations. The environment is a piecewise-constant jump process:
//! an embedded chain over a finite state list plus per-state holding-time
//! laws. Per state, the spec carries the individual service rate at the
//! server station and the routing vector over client stations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::derive_seed;

/// Row-sum tolerance for stochastic vectors and matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Transition law of the environment's state sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransitionLaw {
    /// Embedded jump chain: row-stochastic matrix over states.
    Embedded(Vec<Vec<f64>>),
    /// Generator-style rates `z[l][m]` (diagonal ignored). Holding times
    /// default to exponential with the row-sum rate; a zero row is an
    /// absorbing state.
    Rates(Vec<Vec<f64>>),
}

impl TransitionLaw {
    pub fn len(&self) -> usize {
        match self {
            TransitionLaw::Embedded(m) | TransitionLaw::Rates(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Embedded jump probabilities out of `state`. For a zero rate row the
    /// state is absorbing and the row is a self-loop.
    pub fn jump_row(&self, state: usize) -> Vec<f64> {
        match self {
            TransitionLaw::Embedded(m) => m[state].clone(),
            TransitionLaw::Rates(z) => {
                let row = &z[state];
                let total: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| *m != state)
                    .map(|(_, v)| v)
                    .sum();
                if total <= 0.0 {
                    let mut out = vec![0.0; row.len()];
                    out[state] = 1.0;
                    return out;
                }
                row.iter()
                    .enumerate()
                    .map(|(m, v)| if m == state { 0.0 } else { v / total })
                    .collect()
            }
        }
    }

    /// Whether `state` can never be left.
    pub fn is_absorbing(&self, state: usize) -> bool {
        match self {
            TransitionLaw::Embedded(m) => m[state][state] >= 1.0 - STOCHASTIC_TOL,
            TransitionLaw::Rates(z) => z[state]
                .iter()
                .enumerate()
                .all(|(m, v)| m == state || *v <= 0.0),
        }
    }
}

/// Holding-time law for one environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HoldingLaw {
    /// Constant holding time.
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Weibull { shape: f64, scale: f64 },
    /// Replays a fixed list of durations, one per visit to the state.
    /// Turns a published sample path into an exact test vector.
    Replay { values: Vec<f64> },
}

impl HoldingLaw {
    fn sample(&self, rng: &mut ChaCha12Rng, cursor: &mut usize) -> Result<f64, ModelError> {
        match self {
            HoldingLaw::Deterministic { value } => Ok(*value),
            HoldingLaw::Exponential { rate } => Ok(sample_exp(rng, *rate)),
            HoldingLaw::Erlang { shape, rate } => {
                Ok((0..*shape).map(|_| sample_exp(rng, *rate)).sum())
            }
            HoldingLaw::Weibull { shape, scale } => {
                let u: f64 = rng.gen();
                Ok(scale * (-(1.0 - u).ln()).powf(1.0 / shape))
            }
            HoldingLaw::Replay { values } => {
                let v = values.get(*cursor).copied().ok_or(ModelError::ReplayExhausted)?;
                *cursor += 1;
                Ok(v)
            }
        }
    }
}

fn sample_exp(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Environment specification: state list, transition law, holding laws,
/// per-state individual service rate and routing vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// State labels, in order.
    pub states: Vec<String>,
    pub transition: TransitionLaw,
    /// Per-state holding law. `None` entries fall back to the exponential
    /// law implied by a `Rates` transition.
    pub holding: Vec<Option<HoldingLaw>>,
    /// Individual service rate at the server station, per state.
    pub lambda: Vec<f64>,
    /// Routing probabilities over the `k` client stations, per state.
    pub routing: Vec<Vec<f64>>,
    pub initial_state: usize,
}

impl EnvironmentSpec {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Number of client stations implied by the routing vectors.
    pub fn station_count(&self) -> usize {
        self.routing.first().map_or(0, Vec::len)
    }

    /// Per-station individual arrival rates in `state`:
    /// the server rate times the routing probability.
    pub fn station_rates(&self, state: usize) -> Vec<f64> {
        self.routing[state]
            .iter()
            .map(|p| self.lambda[state] * p)
            .collect()
    }

    fn effective_holding(&self, state: usize) -> Result<HoldingLaw, ModelError> {
        if let Some(h) = &self.holding.get(state).cloned().flatten() {
            return Ok(h.clone());
        }
        match &self.transition {
            TransitionLaw::Rates(z) => {
                let total: f64 = z[state]
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| *m != state)
                    .map(|(_, v)| v)
                    .sum();
                // Absorbing states never draw a holding time.
                Ok(HoldingLaw::Exponential { rate: total.max(f64::MIN_POSITIVE) })
            }
            TransitionLaw::Embedded(_) => Err(ModelError::MissingHolding { state }),
        }
    }
}

/// Network specification: station count, departure rates, initial shares
/// and the inter-departure law family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub k: usize,
    /// Per-station departure rate; the expected inter-departure time in the
    /// `N`-unit network is `1 / (mu_j N)`.
    pub mu: Vec<f64>,
    /// Initial normalized queue shares, summing to at most 1.
    pub beta: Vec<f64>,
    pub departure_family: DepartureFamily,
}

/// Inter-departure law family for the client stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DepartureFamily {
    Deterministic,
    Exponential,
    Erlang { shape: u32 },
}

/// One realization of the environment: jump times with the state occupied
/// on each interval. `jumps[0] == 0` and interval `l` is
/// `[jumps[l], jumps[l+1])`, the last one ending at `horizon`. The state at
/// a jump time is the post-jump state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentPath {
    pub jumps: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl EnvironmentPath {
    /// State index at time `t` (right-continuous at jumps).
    pub fn state_at(&self, t: f64) -> Result<usize, ModelError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(ModelError::TimeOutOfRange { t, horizon: self.horizon });
        }
        let idx = match self.jumps.binary_search_by(|j| j.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Ok(self.states[idx])
    }

    /// Interval boundaries clipped to the horizon:
    /// `0 = b_0 < b_1 < ... < b_n = horizon` with the state on each piece.
    pub fn intervals(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        for (l, (&start, &state)) in self.jumps.iter().zip(&self.states).enumerate() {
            if start >= self.horizon {
                break;
            }
            let end = self.jumps.get(l + 1).copied().unwrap_or(self.horizon).min(self.horizon);
            if end > start {
                out.push((start, end, state));
            }
        }
        out
    }
}

/// Validation errors for a scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("state set is empty")]
    EmptyStateSet,
    #[error("routing row for state {state} is not a probability vector (sum {sum})")]
    RoutingNotStochastic { state: usize, sum: f64 },
    #[error("transition row for state {state} does not sum to 1 (sum {sum})")]
    TransitionNotStochastic { state: usize, sum: f64 },
    #[error("nonpositive rate: {what} for index {index}")]
    NonpositiveRate { what: &'static str, index: usize },
    #[error("initial queue shares sum to {sum} > 1")]
    BetaOverflow { sum: f64 },
    #[error("dimension mismatch: {what}")]
    ShapeMismatch { what: String },
}

/// Non-fatal validation findings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ValidationWarning {
    /// No environment state routes anything to this station; it stays
    /// isolated but the dynamics remain well defined.
    Completeness { station: usize },
}

/// A spec pair that passed validation, with any warnings attached.
#[derive(Debug, Clone)]
pub struct ValidatedSpec {
    pub env: EnvironmentSpec,
    pub net: NetworkSpec,
    pub warnings: Vec<ValidationWarning>,
}

/// Runtime errors from model operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("replay holding-time list exhausted")]
    ReplayExhausted,
    #[error("state {state} has no holding law and the transition law implies none")]
    MissingHolding { state: usize },
    #[error("environment fails the monotonicity check required for ordering comparisons")]
    MonotonicityPrecondition,
}

/// Validates an environment/network pair. Returns the complete list of
/// violations on failure; completeness findings are warnings on the result.
pub fn validate_spec(
    env: &EnvironmentSpec,
    net: &NetworkSpec,
) -> Result<ValidatedSpec, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let m = env.states.len();
    if m == 0 {
        errors.push(ValidationError::EmptyStateSet);
        return Err(errors);
    }

    if env.transition.len() != m {
        errors.push(ValidationError::ShapeMismatch {
            what: format!("transition has {} rows for {m} states", env.transition.len()),
        });
    } else {
        match &env.transition {
            TransitionLaw::Embedded(p) => {
                for (l, row) in p.iter().enumerate() {
                    if row.len() != m {
                        errors.push(ValidationError::ShapeMismatch {
                            what: format!("transition row {l} has {} entries", row.len()),
                        });
                        continue;
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|v| *v < 0.0) {
                        errors.push(ValidationError::TransitionNotStochastic { state: l, sum });
                    }
                }
            }
            TransitionLaw::Rates(z) => {
                for (l, row) in z.iter().enumerate() {
                    if row.len() != m {
                        errors.push(ValidationError::ShapeMismatch {
                            what: format!("rates row {l} has {} entries", row.len()),
                        });
                        continue;
                    }
                    if row.iter().enumerate().any(|(c, v)| c != l && *v < 0.0) {
                        errors.push(ValidationError::NonpositiveRate { what: "transition rate", index: l });
                    }
                }
            }
        }
    }

    if env.lambda.len() != m {
        errors.push(ValidationError::ShapeMismatch {
            what: format!("lambda has {} entries for {m} states", env.lambda.len()),
        });
    }
    for (i, l) in env.lambda.iter().enumerate() {
        if *l <= 0.0 {
            errors.push(ValidationError::NonpositiveRate { what: "lambda", index: i });
        }
    }

    if env.routing.len() != m {
        errors.push(ValidationError::ShapeMismatch {
            what: format!("routing has {} rows for {m} states", env.routing.len()),
        });
    }
    for (i, row) in env.routing.iter().enumerate() {
        if row.len() != net.k {
            errors.push(ValidationError::ShapeMismatch {
                what: format!("routing row {i} has {} entries for k = {}", row.len(), net.k),
            });
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|v| *v < 0.0) {
            errors.push(ValidationError::RoutingNotStochastic { state: i, sum });
        }
    }

    if env.initial_state >= m {
        errors.push(ValidationError::ShapeMismatch {
            what: format!("initial state {} out of range for {m} states", env.initial_state),
        });
    }

    if net.mu.len() != net.k {
        errors.push(ValidationError::ShapeMismatch {
            what: format!("mu has {} entries for k = {}", net.mu.len(), net.k),
        });
    }
    for (j, mu) in net.mu.iter().enumerate() {
        if *mu <= 0.0 {
            errors.push(ValidationError::NonpositiveRate { what: "mu", index: j });
        }
    }
    if net.beta.len() != net.k {
        errors.push(ValidationError::ShapeMismatch {
            what: format!("beta has {} entries for k = {}", net.beta.len(), net.k),
        });
    } else {
        let sum: f64 = net.beta.iter().sum();
        if sum > 1.0 + STOCHASTIC_TOL {
            errors.push(ValidationError::BetaOverflow { sum });
        }
        if net.beta.iter().any(|b| *b < 0.0) {
            errors.push(ValidationError::ShapeMismatch { what: "negative beta entry".into() });
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let mut warnings = Vec::new();
    for j in 0..net.k {
        if env.routing.iter().all(|row| row[j] <= 0.0) {
            warnings.push(ValidationWarning::Completeness { station: j });
        }
    }
    Ok(ValidatedSpec { env: env.clone(), net: net.clone(), warnings })
}

/// Samples an environment path on `[0, horizon]`. Deterministic given
/// `(spec, seed, horizon)`; sampling stops once an absorbing state is
/// entered.
pub fn sample_environment_path(
    env: &EnvironmentSpec,
    seed: u64,
    horizon: f64,
) -> Result<EnvironmentPath, ModelError> {
    sample_path_from(env, env.initial_state, seed, horizon)
}

/// As [`sample_environment_path`] but starting from an explicit state.
pub fn sample_path_from(
    env: &EnvironmentSpec,
    initial: usize,
    seed: u64,
    horizon: f64,
) -> Result<EnvironmentPath, ModelError> {
    assert!(horizon > 0.0, "horizon must be positive");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut cursors = vec![0usize; env.state_count()];
    let mut jumps = vec![0.0];
    let mut states = vec![initial];
    let mut t = 0.0;
    let mut state = initial;
    while !env.transition.is_absorbing(state) {
        let law = env.effective_holding(state)?;
        let hold = law.sample(&mut rng, &mut cursors[state])?;
        t += hold;
        if t > horizon {
            break;
        }
        let row = env.transition.jump_row(state);
        let u: f64 = rng.gen();
        state = pick_index(&row, u);
        jumps.push(t);
        states.push(state);
    }
    Ok(EnvironmentPath { jumps, states, horizon })
}

fn pick_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// State of `path` at time `t`; right-continuous at jump times.
pub fn state_at(path: &EnvironmentPath, t: f64) -> Result<usize, ModelError> {
    path.state_at(t)
}

/// Status of one monotonicity property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropertyStatus {
    Holds,
    Violated,
    /// Property needs explicit transition rates and the spec carries none.
    NotApplicable,
}

/// Result of the pairwise monotone-environment checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    /// `z[l][m] >= z[m][l]` for all `l <= m` (rate form only).
    pub property1: PropertyStatus,
    /// Per-station rates nondecreasing in the state index.
    pub property2: PropertyStatus,
    /// Offending `(l, m)` pairs for property 1.
    pub rate_violations: Vec<(usize, usize)>,
    /// Offending `(l, m, station)` triples for property 2.
    pub lambda_violations: Vec<(usize, usize, usize)>,
}

impl MonotonicityReport {
    pub fn passes(&self) -> bool {
        self.property1 != PropertyStatus::Violated && self.property2 != PropertyStatus::Violated
    }
}

/// Checks the two monotone-environment properties: upward-biased transition
/// rates and per-station rates nondecreasing in the state index.
pub fn check_monotone(env: &EnvironmentSpec) -> MonotonicityReport {
    let m = env.state_count();
    let mut rate_violations = Vec::new();
    let property1 = match &env.transition {
        TransitionLaw::Rates(z) => {
            for l in 0..m {
                for mm in l..m {
                    if z[l][mm] < z[mm][l] {
                        rate_violations.push((l, mm));
                    }
                }
            }
            if rate_violations.is_empty() { PropertyStatus::Holds } else { PropertyStatus::Violated }
        }
        TransitionLaw::Embedded(_) => PropertyStatus::NotApplicable,
    };

    let mut lambda_violations = Vec::new();
    for l in 0..m {
        for mm in (l + 1)..m {
            let low = env.station_rates(l);
            let high = env.station_rates(mm);
            for j in 0..low.len() {
                if low[j] > high[j] + STOCHASTIC_TOL {
                    lambda_violations.push((l, mm, j));
                }
            }
        }
    }
    let property2 =
        if lambda_violations.is_empty() { PropertyStatus::Holds } else { PropertyStatus::Violated };

    MonotonicityReport { property1, property2, rate_violations, lambda_violations }
}

/// Empirical comparison of the environment state at time `t` started from
/// two initial states.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    pub t: f64,
    pub replications: usize,
    /// Empirical CDF of the state index started from the lower state.
    pub cdf_low: Vec<f64>,
    /// Empirical CDF started from the higher state.
    pub cdf_high: Vec<f64>,
    /// Largest amount by which `cdf_high` exceeds `cdf_low` anywhere.
    pub max_gap: f64,
    /// Noise allowance used by the dominance flag (3 standard errors of a
    /// difference of proportions).
    pub slack: f64,
    /// Sample evidence that the low start is stochastically below the high
    /// start: `cdf_low >= cdf_high - slack` at every state.
    pub dominance: bool,
}

/// Samples `reps` paths from each initial state and compares the empirical
/// CDFs of the state index at time `t`.
pub fn empirical_state_ordering(
    env: &EnvironmentSpec,
    t: f64,
    init_low: usize,
    init_high: usize,
    reps: usize,
    seed: u64,
) -> Result<OrderingReport, ModelError> {
    if !check_monotone(env).passes() {
        return Err(ModelError::MonotonicityPrecondition);
    }
    let horizon = t.max(f64::MIN_POSITIVE);
    let m = env.state_count();
    let mut counts = [vec![0u64; m], vec![0u64; m]];
    for (group, &init) in [init_low, init_high].iter().enumerate() {
        let group_seed = derive_seed(seed, group as u64 + 1);
        for rep in 0..reps {
            let path = sample_path_from(env, init, derive_seed(group_seed, rep as u64), horizon)?;
            let s = path.state_at(t)?;
            counts[group][s] += 1;
        }
    }
    let to_cdf = |c: &[u64]| {
        let mut acc = 0u64;
        c.iter()
            .map(|v| {
                acc += v;
                acc as f64 / reps as f64
            })
            .collect::<Vec<f64>>()
    };
    let cdf_low = to_cdf(&counts[0]);
    let cdf_high = to_cdf(&counts[1]);
    let max_gap = cdf_low
        .iter()
        .zip(&cdf_high)
        .map(|(a, b)| b - a)
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = 3.0 * (0.5 / reps as f64).sqrt();
    Ok(OrderingReport {
        t,
        replications: reps,
        cdf_low,
        cdf_high,
        max_gap,
        slack,
        dominance: max_gap <= slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Staged ramp chain used throughout: states advance 1 -> 2 -> 3 -> 4
    /// at rate 1, state 4 absorbing; two symmetric stations whose
    /// per-station rates ramp (1, 2, 3, 3).
    pub(crate) fn ramp_env() -> EnvironmentSpec {
        EnvironmentSpec {
            states: vec!["E1".into(), "E2".into(), "E3".into(), "E4".into()],
            transition: TransitionLaw::Rates(vec![
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 0.0],
            ]),
            holding: vec![None, None, None, None],
            lambda: vec![2.0, 4.0, 6.0, 6.0],
            routing: vec![vec![0.5, 0.5]; 4],
            initial_state: 0,
        }
    }

    pub(crate) fn ramp_env_replayed() -> EnvironmentSpec {
        let mut env = ramp_env();
        env.holding = vec![
            Some(HoldingLaw::Replay { values: vec![0.5488] }),
            Some(HoldingLaw::Replay { values: vec![1.0892] }),
            Some(HoldingLaw::Replay { values: vec![1.8734] }),
            None,
        ];
        env
    }

    pub(crate) fn ramp_net() -> NetworkSpec {
        NetworkSpec {
            k: 2,
            mu: vec![2.0, 2.0],
            beta: vec![0.1, 0.1],
            departure_family: DepartureFamily::Exponential,
        }
    }

    #[test]
    fn ramp_spec_validates_cleanly() {
        let v = validate_spec(&ramp_env(), &ramp_net()).expect("valid");
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn bad_routing_row_is_flagged() {
        let mut env = ramp_env();
        env.routing[1] = vec![0.5, 0.4];
        let errs = validate_spec(&env, &ramp_net()).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::RoutingNotStochastic { state: 1, .. })));
    }

    #[test]
    fn unroutable_station_is_a_warning_not_an_error() {
        let mut env = ramp_env();
        for row in &mut env.routing {
            *row = vec![1.0, 0.0];
        }
        let v = validate_spec(&env, &ramp_net()).expect("still valid");
        assert_eq!(v.warnings, vec![ValidationWarning::Completeness { station: 1 }]);
    }

    #[test]
    fn beta_overflow_and_empty_states_are_errors() {
        let mut net = ramp_net();
        net.beta = vec![0.7, 0.4];
        let errs = validate_spec(&ramp_env(), &net).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ValidationError::BetaOverflow { .. })));

        let empty = EnvironmentSpec {
            states: vec![],
            transition: TransitionLaw::Embedded(vec![]),
            holding: vec![],
            lambda: vec![],
            routing: vec![],
            initial_state: 0,
        };
        let errs = validate_spec(&empty, &ramp_net()).unwrap_err();
        assert_eq!(errs, vec![ValidationError::EmptyStateSet]);
    }

    #[test]
    fn replayed_path_reproduces_published_jumps() {
        let env = ramp_env_replayed();
        let path = sample_environment_path(&env, 7, 4.0).unwrap();
        let expected = [0.5488, 0.5488 + 1.0892, 0.5488 + 1.0892 + 1.8734];
        assert_eq!(path.jumps.len(), 4);
        for (got, want) in path.jumps[1..].iter().zip(expected) {
            assert_eq!(*got, want, "jump times are exact partial sums");
        }
        assert_eq!(path.states, vec![0, 1, 2, 3]);
        // (0.5488, 1.6380, 3.5114) to display precision
        assert!((path.jumps[2] - 1.6380).abs() < 1e-12);
        assert!((path.jumps[3] - 3.5114).abs() < 1e-12);
    }

    #[test]
    fn absorbing_start_gives_single_segment() {
        let mut env = ramp_env();
        env.initial_state = 3;
        let path = sample_environment_path(&env, 1, 5.0).unwrap();
        assert_eq!(path.jumps, vec![0.0]);
        assert_eq!(path.states, vec![3]);
    }

    #[test]
    fn exponential_holding_has_unit_mean_first_jump() {
        let env = ramp_env();
        let n = 100_000;
        let mut sum = 0.0;
        for seed in 0..n {
            let path = sample_environment_path(&env, seed, 1e9).unwrap();
            sum += path.jumps[1];
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "sample mean {mean}");
    }

    #[test]
    fn state_lookup_is_right_continuous() {
        let env = ramp_env_replayed();
        let path = sample_environment_path(&env, 7, 4.0).unwrap();
        assert_eq!(path.state_at(0.0).unwrap(), 0);
        assert_eq!(path.state_at(1.0).unwrap(), 1);
        assert_eq!(path.state_at(0.5488).unwrap(), 1, "jump time belongs to the new state");
        assert_eq!(path.state_at(4.0).unwrap(), 3);
        assert!(path.state_at(4.5).is_err());
        assert!(path.state_at(-0.1).is_err());
    }

    #[test]
    fn state_at_jump_matches_interval_state() {
        let env = ramp_env_replayed();
        let path = sample_environment_path(&env, 7, 4.0).unwrap();
        for (l, &jump) in path.jumps.iter().enumerate() {
            assert_eq!(path.state_at(jump).unwrap(), path.states[l]);
        }
    }

    #[test]
    fn ramp_chain_is_monotone() {
        let report = check_monotone(&ramp_env());
        assert_eq!(report.property1, PropertyStatus::Holds);
        assert_eq!(report.property2, PropertyStatus::Holds);
        assert!(report.passes());
    }

    #[test]
    fn decreasing_rates_violate_property2() {
        let mut env = ramp_env();
        env.lambda = vec![6.0, 4.0, 2.0, 2.0];
        let report = check_monotone(&env);
        assert_eq!(report.property2, PropertyStatus::Violated);
        assert!(report.lambda_violations.contains(&(0, 1, 0)));
    }

    #[test]
    fn symmetric_rates_hold_with_equality() {
        let mut env = ramp_env();
        env.transition = TransitionLaw::Rates(vec![
            vec![0.0, 0.5, 0.5, 0.5],
            vec![0.5, 0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.5, 0.0],
        ]);
        let report = check_monotone(&env);
        assert_eq!(report.property1, PropertyStatus::Holds);
        assert!(report.rate_violations.is_empty());
    }

    #[test]
    fn embedded_law_makes_property1_not_applicable() {
        let mut env = ramp_env();
        env.transition = TransitionLaw::Embedded(vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        env.holding = vec![Some(HoldingLaw::Exponential { rate: 1.0 }); 4];
        let report = check_monotone(&env);
        assert_eq!(report.property1, PropertyStatus::NotApplicable);
    }

    #[test]
    fn ordering_dominance_holds_on_ramp_chain() {
        let report = empirical_state_ordering(&ramp_env(), 1.0, 0, 1, 10_000, 99).unwrap();
        assert!(report.dominance, "max gap {} slack {}", report.max_gap, report.slack);
        // Started higher, the chain can only be further along.
        assert!(report.cdf_low[0] > report.cdf_high[0]);
    }

    #[test]
    fn ordering_identical_starts_agree_within_noise() {
        let report = empirical_state_ordering(&ramp_env(), 1.0, 1, 1, 10_000, 3).unwrap();
        assert!(report.dominance);
        assert!(report.max_gap.abs() <= report.slack);
    }

    #[test]
    fn ordering_single_state_is_degenerate() {
        let env = EnvironmentSpec {
            states: vec!["only".into()],
            transition: TransitionLaw::Rates(vec![vec![0.0]]),
            holding: vec![None],
            lambda: vec![1.0],
            routing: vec![vec![1.0]],
            initial_state: 0,
        };
        let report = empirical_state_ordering(&env, 0.5, 0, 0, 100, 1).unwrap();
        assert!(report.dominance);
        assert_eq!(report.cdf_low, vec![1.0]);
        assert_eq!(report.cdf_high, vec![1.0]);
    }

    #[test]
    fn ordering_requires_monotone_environment() {
        let mut env = ramp_env();
        env.lambda = vec![6.0, 4.0, 2.0, 2.0];
        let err = empirical_state_ordering(&env, 1.0, 0, 1, 10, 1).unwrap_err();
        assert_eq!(err, ModelError::MonotonicityPrecondition);
    }

    #[test]
    fn sampling_is_reproducible() {
        let env = ramp_env();
        let a = sample_environment_path(&env, 1234, 10.0).unwrap();
        let b = sample_environment_path(&env, 1234, 10.0).unwrap();
        assert_eq!(a, b);
        let c = sample_environment_path(&env, 1235, 10.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn replay_exhaustion_is_reported() {
        let env = EnvironmentSpec {
            states: vec!["a".into(), "b".into()],
            transition: TransitionLaw::Embedded(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            holding: vec![Some(HoldingLaw::Replay { values: vec![0.5] }), Some(HoldingLaw::Replay { values: vec![0.5] })],
            lambda: vec![1.0, 1.0],
            routing: vec![vec![1.0], vec![1.0]],
            initial_state: 0,
        };
        let err = sample_environment_path(&env, 0, 100.0).unwrap_err();
        assert_eq!(err, ModelError::ReplayExhausted);
    }
}
