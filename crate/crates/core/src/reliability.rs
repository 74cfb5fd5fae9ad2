//! Reliability analysis of a symmetric network with failing client
//! stations.
//!
//! All `k` client stations are identical and fail independently with
//! lifetime law `G`. While at least two stations survive every station is
//! non-bottleneck and the cumulated share stays at zero; once only one
//! station remains its share grows along a known closed form. The network
//! is "at risk" when the cumulated share exceeds `alpha`, and the goal is
//! a horizon offset past the last-but-one failure that keeps the risk
//! below `1 - P`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{adaptive_simpson, bisect};

/// Survival values below this truncate quadrature tails.
const TAIL_EPS: f64 = 1e-12;
/// Absolute tolerance for the confidence-ratio quadratures.
const QUAD_TOL: f64 = 1e-10;

/// Lifetime distribution of one client station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Lifetime {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl Lifetime {
    /// Distribution function, zero for negative arguments.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Lifetime::Exponential { rate } => 1.0 - (-rate * x).exp(),
            Lifetime::Erlang { shape, rate } => {
                let rx = rate * x;
                let mut term = 1.0;
                let mut sum = 1.0;
                for m in 1..*shape {
                    term *= rx / m as f64;
                    sum += term;
                }
                1.0 - (-rx).exp() * sum
            }
            Lifetime::Weibull { shape, scale } => 1.0 - (-(x / scale).powf(*shape)).exp(),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p));
        match self {
            Lifetime::Exponential { rate } => -(1.0 - p).ln() / rate,
            Lifetime::Weibull { shape, scale } => scale * (-(1.0 - p).ln()).powf(1.0 / shape),
            Lifetime::Erlang { .. } => {
                let mut hi = 1.0;
                while self.cdf(hi) < p {
                    hi *= 2.0;
                    assert!(hi.is_finite());
                }
                bisect(&|x| self.cdf(x) - p, 0.0, hi, 1e-13)
            }
        }
    }

    fn sample(&self, u: f64, extra: impl FnMut() -> f64) -> f64 {
        let mut extra = extra;
        match self {
            Lifetime::Exponential { rate } => -(1.0 - u).ln() / rate,
            Lifetime::Weibull { shape, scale } => scale * (-(1.0 - u).ln()).powf(1.0 / shape),
            Lifetime::Erlang { shape, rate } => {
                let mut sum = -(1.0 - u).ln() / rate;
                for _ in 1..*shape {
                    sum += -(1.0 - extra()).ln() / rate;
                }
                sum
            }
        }
    }

    /// Draws one lifetime from a uniform stream.
    pub fn sample_with<R: FnMut() -> f64>(&self, mut uniforms: R) -> f64 {
        let u = uniforms();
        self.sample(u, uniforms)
    }
}

/// Parameters of the failing-stations analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySpec {
    /// Individual service rate at the server station.
    pub lambda: f64,
    /// Common client departure rate.
    pub mu: f64,
    /// Number of client stations.
    pub k: usize,
    /// Risk threshold on the cumulated share.
    pub alpha: f64,
    /// Confidence level.
    pub p: f64,
    /// Lifetime law of one station.
    pub g: Lifetime,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReliabilityError {
    #[error("station is not bottleneck after the last-but-one failure (lambda <= mu)")]
    NotBottleneck,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("only the single-surviving-bottleneck case is supported (l0 = {l0})")]
    UnsupportedL0 { l0: usize },
    #[error("confidence ratio never reaches P = {p} (range {lo}..{hi})")]
    InfeasibleConfidence { p: f64, lo: f64, hi: f64 },
    #[error("confidence ratio is not monotone in the horizon offset")]
    NonMonotoneRatio,
}

/// Which branch fixed the confidence offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaBranch {
    /// `gamma <= alpha`: the offset is the solved horizon itself.
    GammaWithinAlpha,
    /// `gamma > alpha`: the offset shrinks to where the share reaches
    /// `alpha`.
    AlphaCapped,
}

/// Confidence solution: the interval past the last-but-one failure is
/// `[0, theta_offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceResult {
    pub t_gamma: f64,
    /// Share level reached at `t_gamma`.
    pub gamma: f64,
    pub branch: ThetaBranch,
    pub theta_offset: f64,
    /// Residual of the ratio equation at the solution.
    pub residual: f64,
}

impl ReliabilitySpec {
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        if self.k < 2 {
            return Err(ReliabilityError::InvalidSpec("k must be at least 2".into()));
        }
        if self.lambda <= 0.0 || self.mu <= 0.0 {
            return Err(ReliabilityError::InvalidSpec("rates must be positive".into()));
        }
        if self.lambda / (self.k as f64 * self.mu) >= 1.0 {
            return Err(ReliabilityError::InvalidSpec(
                "stations must start non-bottleneck: lambda / (k mu) < 1".into(),
            ));
        }
        if self.lambda / self.mu <= 1.0 {
            return Err(ReliabilityError::InvalidSpec(
                "a lone station must be bottleneck: lambda / mu > 1".into(),
            ));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(ReliabilityError::InvalidSpec("alpha must be in (0, 1)".into()));
        }
        if !(0.0 < self.p && self.p < 1.0) {
            return Err(ReliabilityError::InvalidSpec("P must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Largest surviving-station count at which every survivor is bottleneck:
/// `max { l >= 1 : lambda / (l mu) > 1 }`, or 0 when none is.
pub fn max_bottleneck_count(lambda: f64, mu: f64) -> usize {
    assert!(lambda > 0.0 && mu > 0.0);
    let mut l0 = 0;
    let mut l = 1;
    while lambda > l as f64 * mu {
        l0 = l;
        l += 1;
    }
    l0
}

/// Cumulated share `t` time units after the last-but-one failure:
/// the exact antiderivative `(1 - mu/lambda)(1 - e^{-lambda t})`, capped
/// at one.
pub fn post_failure_share(lambda: f64, mu: f64, t: f64) -> Result<f64, ReliabilityError> {
    if lambda <= mu {
        return Err(ReliabilityError::NotBottleneck);
    }
    Ok(((1.0 - mu / lambda) * (1.0 - (-lambda * t).exp())).min(1.0))
}

/// Inverse of [`post_failure_share`]: the elapsed time at which the share
/// reaches `level`, or `None` when the level is never reached.
pub fn post_failure_share_inverse(
    lambda: f64,
    mu: f64,
    level: f64,
) -> Result<Option<f64>, ReliabilityError> {
    if lambda <= mu {
        return Err(ReliabilityError::NotBottleneck);
    }
    let cap = 1.0 - mu / lambda;
    if level >= cap {
        return Ok(None);
    }
    Ok(Some(-(1.0 - level / cap).ln() / lambda))
}

/// The two risk probabilities at absolute time `t` since start:
/// `P{q(t) = 0}` and `P{q(t) <= gamma}`, from binomial sums over the
/// lifetime law (survivals clamp to one for negative arguments).
pub fn risk_probabilities(
    spec: &ReliabilitySpec,
    t: f64,
    gamma: f64,
) -> Result<(f64, f64), ReliabilityError> {
    spec.validate()?;
    let t_gamma = post_failure_share_inverse(spec.lambda, spec.mu, gamma)?
        .ok_or_else(|| ReliabilityError::InvalidSpec("gamma is never reached".into()))?;
    let k = spec.k;
    let g_t = spec.g.cdf(t);
    let s_t = 1.0 - g_t;
    let g_lag = spec.g.cdf(t - t_gamma);
    let s_lag = 1.0 - g_lag;

    // P{q(t) = 0}: at least two stations alive at t.
    let mut p_zero = 0.0;
    for i in 2..=k {
        p_zero += binomial(k, i) * s_t.powi(i as i32) * g_t.powi((k - i) as i32);
    }

    // P{q(t) <= gamma}: one distinguished survivor at t and the last of
    // the other k-1 stations failing within t_gamma of t.
    let mut inner = 0.0;
    for i in 1..=(k - 1) {
        inner += binomial(k - 1, i) * s_lag.powi(i as i32) * g_lag.powi((k - 1 - i) as i32);
    }
    Ok((p_zero, s_t * inner))
}

fn binomial(n: usize, r: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..r {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Confidence ratio at horizon offset `t_gamma`, integrating both sides
/// over the elapsed time `u >= 0` past the offset:
///
/// ```text
///   int [1 - G(u + t_gamma)] sum_{i=1}^{k-1} C(k-1,i) [1-G(u)]^i G(u)^{k-1-i} du
///   -----------------------------------------------------------------------------
///   int sum_{i=2}^{k} C(k,i) [1-G(u)]^i G(u)^{k-i} du
/// ```
///
/// For exponential lifetimes and `k = 2` this reduces to `e^{-r t_gamma}`.
pub fn confidence_ratio(spec: &ReliabilitySpec, t_gamma: f64) -> f64 {
    let k = spec.k;
    let g = spec.g;
    let upper = {
        let mut hi = 1.0;
        while g.survival(hi) > TAIL_EPS {
            hi *= 2.0;
        }
        hi
    };
    let numerator = adaptive_simpson(
        &|u: f64| {
            let s_lagged = g.survival(u + t_gamma);
            if s_lagged == 0.0 {
                return 0.0;
            }
            let s = g.survival(u);
            let c = g.cdf(u);
            let mut inner = 0.0;
            for i in 1..=(k - 1) {
                inner += binomial(k - 1, i) * s.powi(i as i32) * c.powi((k - 1 - i) as i32);
            }
            s_lagged * inner
        },
        0.0,
        upper,
        QUAD_TOL,
    );
    let denominator = adaptive_simpson(
        &|u: f64| {
            let s = g.survival(u);
            let c = g.cdf(u);
            let mut sum = 0.0;
            for i in 2..=k {
                sum += binomial(k, i) * s.powi(i as i32) * c.powi((k - i) as i32);
            }
            sum
        },
        0.0,
        upper,
        QUAD_TOL,
    );
    numerator / denominator
}

/// Solves the confidence problem: finds the offset `t_gamma` at which the
/// confidence ratio equals `P`, evaluates the share level `gamma` there,
/// and applies the branch rule against `alpha`.
pub fn solve_confidence(spec: &ReliabilitySpec) -> Result<ConfidenceResult, ReliabilityError> {
    spec.validate()?;
    let l0 = max_bottleneck_count(spec.lambda, spec.mu);
    if l0 != 1 {
        return Err(ReliabilityError::UnsupportedL0 { l0 });
    }

    let hi = spec.g.quantile(1.0 - 1e-9);
    // The ratio must decrease in the offset for bisection to be sound.
    let probes = [0.0, 0.25 * hi, 0.5 * hi, 0.75 * hi, hi];
    let values: Vec<f64> = probes.iter().map(|t| confidence_ratio(spec, *t)).collect();
    if values.windows(2).any(|w| w[1] > w[0] + 1e-9) {
        return Err(ReliabilityError::NonMonotoneRatio);
    }
    let (ratio_lo, ratio_hi) = (values[values.len() - 1], values[0]);
    if spec.p > ratio_hi + 1e-6 || spec.p < ratio_lo - 1e-6 {
        return Err(ReliabilityError::InfeasibleConfidence {
            p: spec.p,
            lo: ratio_lo,
            hi: ratio_hi,
        });
    }

    let t_gamma = if spec.p >= ratio_hi {
        0.0
    } else {
        bisect(&|t| confidence_ratio(spec, t) - spec.p, 0.0, hi, 1e-12).max(0.0)
    };
    let residual = confidence_ratio(spec, t_gamma) - spec.p;
    let gamma = post_failure_share(spec.lambda, spec.mu, t_gamma)?;

    let (branch, theta_offset) = if gamma <= spec.alpha {
        (ThetaBranch::GammaWithinAlpha, t_gamma)
    } else {
        let t_alpha = post_failure_share_inverse(spec.lambda, spec.mu, spec.alpha)?
            .expect("gamma > alpha implies alpha below the share cap");
        (ThetaBranch::AlphaCapped, t_alpha)
    };

    Ok(ConfidenceResult { t_gamma, gamma, branch, theta_offset, residual })
}
