//! Closed forms for the cumulated share of a bottleneck group and the
//! per-station split of that share.

use crate::numeric::adaptive_simpson;

/// Exponential-relaxation share `base + amp * (1 - e^{-rate t})`.
///
/// Covers the single-bottleneck, bottleneck-group and affine-wrapped
/// nonzero-start forms; the integral is available in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupShare {
    pub base: f64,
    pub amp: f64,
    pub rate: f64,
}

impl GroupShare {
    pub fn value(&self, t: f64) -> f64 {
        self.base + self.amp * (1.0 - (-self.rate * t).exp())
    }

    /// Integral of the share over `[0, t]`.
    pub fn integral(&self, t: f64) -> f64 {
        self.base * t + self.amp * (t - (1.0 - (-self.rate * t).exp()) / self.rate)
    }

    /// Long-run level of the share.
    pub fn limit(&self) -> f64 {
        self.base + self.amp
    }
}

/// Relaxation part of a bottleneck group's share from an empty start:
/// `(1 - sum(mu)/sum(lambda)) * (1 - e^{-t sum(lambda)})`.
pub fn group_relaxation(lambdas: &[f64], mus: &[f64]) -> GroupShare {
    assert!(!lambdas.is_empty(), "bottleneck group must be nonempty");
    let total_lam: f64 = lambdas.iter().sum();
    let total_mu: f64 = mus.iter().sum();
    GroupShare { base: 0.0, amp: (total_lam - total_mu) / total_lam, rate: total_lam }
}

/// Cumulated share of a bottleneck group with total initial share
/// `beta_total`: the affine wrap `B + (1 - B) r(t)` of the relaxation.
pub fn group_share(lambdas: &[f64], mus: &[f64], beta_total: f64) -> GroupShare {
    let r = group_relaxation(lambdas, mus);
    GroupShare { base: beta_total, amp: (1.0 - beta_total) * r.amp, rate: r.rate }
}

/// Evaluates the cumulated bottleneck-group share at time `t`.
pub fn aggregate_bottleneck_share(lambdas: &[f64], mus: &[f64], beta_total: f64, t: f64) -> f64 {
    group_share(lambdas, mus, beta_total).value(t)
}

/// Share of one station inside a bottleneck group:
/// `beta_v + (1 - beta_total) * [ (lambda_v - mu_v) t - lambda_v * int_0^t q(s) ds ]`
/// with the group share integrated in closed form.
pub fn station_queue_share(
    lambda_v: f64,
    mu_v: f64,
    group: &GroupShare,
    beta_v: f64,
    beta_total: f64,
    t: f64,
) -> f64 {
    beta_v + (1.0 - beta_total) * ((lambda_v - mu_v) * t - lambda_v * group.integral(t))
}

/// As [`station_queue_share`] for an arbitrary group-share function,
/// integrated by adaptive quadrature to absolute tolerance `tol`.
pub fn station_queue_share_quadrature<F: Fn(f64) -> f64>(
    lambda_v: f64,
    mu_v: f64,
    group: F,
    beta_v: f64,
    beta_total: f64,
    t: f64,
    tol: f64,
) -> f64 {
    let integral = adaptive_simpson(&group, 0.0, t, tol);
    beta_v + (1.0 - beta_total) * ((lambda_v - mu_v) * t - lambda_v * integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_station_limit_is_half_at_double_load() {
        // rho = 2, mu = 1: the limiting share is 1 - 1/rho = 0.5.
        let q = group_share(&[2.0], &[1.0], 0.0);
        assert!((q.limit() - 0.5).abs() < 1e-12);
        assert!((aggregate_bottleneck_share(&[2.0], &[1.0], 0.0, 50.0) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pair_group_closed_form() {
        let q = group_share(&[2.0, 2.0], &[1.0, 1.0], 0.0);
        for t in [0.1f64, 0.5, 2.0] {
            let expect = (1.0 - 2.0 / 4.0) * (1.0 - (-4.0 * t).exp());
            assert!((q.value(t) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_load_group_stays_empty() {
        let q = group_share(&[1.0, 1.0], &[1.0, 1.0], 0.0);
        for t in [0.0, 1.0, 10.0] {
            assert_eq!(q.value(t), 0.0);
        }
    }

    #[test]
    fn affine_wrap_reduces_to_relaxation_at_zero_start() {
        let r = group_relaxation(&[3.0, 2.0], &[1.0, 1.5]);
        let q = group_share(&[3.0, 2.0], &[1.0, 1.5], 0.0);
        for t in [0.2, 1.7] {
            assert_eq!(r.value(t), q.value(t));
        }
        let wrapped = group_share(&[3.0, 2.0], &[1.0, 1.5], 0.3);
        for t in [0.2, 1.7] {
            assert!((wrapped.value(t) - (0.3 + 0.7 * r.value(t))).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_pair_splits_the_group_limit() {
        // Two identical bottleneck stations split the group limit evenly.
        let group = group_share(&[2.0, 2.0], &[1.0, 1.0], 0.0);
        let v = station_queue_share(2.0, 1.0, &group, 0.0, 0.0, 60.0);
        assert!((v - 0.25).abs() < 1e-10);
    }

    #[test]
    fn lone_station_share_matches_reported_value() {
        // lambda 4, mu 3, its own group, evaluated at 0.025647.
        let group = group_share(&[4.0], &[3.0], 0.0);
        let v = station_queue_share(4.0, 3.0, &group, 0.0, 0.0, 0.025647);
        assert!((v - 0.024375).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn closed_form_integral_agrees_with_quadrature() {
        let group = group_share(&[2.0, 2.0], &[1.0, 1.0], 0.0);
        let closed = station_queue_share(2.0, 1.0, &group, 0.0, 0.0, 1.0);
        let quad = station_queue_share_quadrature(
            2.0,
            1.0,
            |s| group.value(s),
            0.0,
            0.0,
            1.0,
            1e-10,
        );
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
    }
}
