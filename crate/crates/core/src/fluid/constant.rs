//! Closed-form recursion for one environment interval.
//!
//! With initial shares `x0` and per-station individual rates fixed over
//! the interval, every active station's share follows
//! `a + b·s + c·e^{-d·s}` where `d` is the sum of the active relative
//! rates. When an absolutely non-bottleneck station reaches zero it
//! freezes for the rest of the interval, the relative rates are
//! recomputed from the surviving shares, and the recursion restarts on
//! the remaining stations.

use super::ode;
use super::{
    ClosedForm, FluidError, FluidSegment, SegmentBody, SolveMode, StationForm, ZeroHit, TIE_EPS,
    ZERO_SHARE_EPS,
};

/// Relative-rate sums below this use the pure-drain limit of the
/// aggregate form.
const DEGENERATE_RATE_EPS: f64 = 1e-14;

/// Output of one constant-environment solve: segments in absolute time,
/// zero hits, and terminal shares to carry into the next interval.
#[derive(Debug, Clone)]
pub struct ConstantEnvOutcome {
    pub segments: Vec<FluidSegment>,
    pub zero_hits: Vec<ZeroHit>,
    pub terminal: Vec<f64>,
}

/// Solves one interval of fixed environment state.
///
/// `lambda_individual` are the per-station individual arrival rates in the
/// current state, `x0` the entering shares, and `t_offset` the absolute
/// start time used for segment and zero-hit bookkeeping.
pub fn solve_constant_env(
    lambda_individual: &[f64],
    mu: &[f64],
    x0: &[f64],
    duration: f64,
    mode: SolveMode,
    t_offset: f64,
    env_state: usize,
) -> Result<ConstantEnvOutcome, FluidError> {
    let k = lambda_individual.len();
    if mu.len() != k || x0.len() != k {
        return Err(FluidError::DimensionMismatch(format!(
            "lambda/mu/x0 lengths {k}/{}/{}",
            mu.len(),
            x0.len()
        )));
    }
    assert!(duration > 0.0, "interval duration must be positive");

    if mode == SolveMode::Ode {
        return Ok(ode::integrate_constant_env(
            lambda_individual,
            mu,
            x0,
            duration,
            t_offset,
            env_state,
        ));
    }

    let non_bottleneck: Vec<bool> =
        lambda_individual.iter().zip(mu).map(|(l, m)| l < m).collect();

    let mut x = x0.to_vec();
    let mut active = vec![true; k];
    let mut s0 = 0.0f64;
    let mut segments = Vec::new();
    let mut zero_hits = Vec::new();

    loop {
        // Absolutely non-bottleneck stations with nothing queued drain
        // immediately: their drift is negative at every idle fraction.
        for j in 0..k {
            if active[j] && non_bottleneck[j] && x[j] <= ZERO_SHARE_EPS {
                active[j] = false;
                x[j] = 0.0;
                zero_hits.push(ZeroHit { time: t_offset + s0, station: j });
            }
        }

        let remaining = duration - s0;
        if !active.iter().any(|a| *a) {
            segments.push(FluidSegment {
                t_start: t_offset + s0,
                t_end: t_offset + duration,
                env_state,
                body: SegmentBody::Closed(vec![StationForm::Frozen; k]),
            });
            break;
        }

        let forms = build_forms(lambda_individual, mu, &x, &active, mode);

        // Earliest zero hit among freeze candidates.
        let mut tau: Option<f64> = None;
        let mut hit_at = vec![None; k];
        for j in 0..k {
            if !active[j] || !non_bottleneck[j] {
                continue;
            }
            if let StationForm::Closed(cf) = forms[j] {
                if let Some(h) = cf.zero_hit(remaining) {
                    hit_at[j] = Some(h);
                    tau = Some(tau.map_or(h, |t: f64| t.min(h)));
                }
            }
        }

        match tau {
            Some(tau) if tau < remaining - 1e-12 => {
                segments.push(FluidSegment {
                    t_start: t_offset + s0,
                    t_end: t_offset + s0 + tau,
                    env_state,
                    body: SegmentBody::Closed(forms.clone()),
                });
                for j in 0..k {
                    if !active[j] {
                        continue;
                    }
                    if let Some(h) = hit_at[j] {
                        if h <= tau + TIE_EPS {
                            active[j] = false;
                            x[j] = 0.0;
                            zero_hits.push(ZeroHit { time: t_offset + s0 + tau, station: j });
                            continue;
                        }
                    }
                    if let StationForm::Closed(cf) = forms[j] {
                        x[j] = cf.value(tau);
                    }
                }
                s0 += tau;
            }
            _ => {
                segments.push(FluidSegment {
                    t_start: t_offset + s0,
                    t_end: t_offset + duration,
                    env_state,
                    body: SegmentBody::Closed(forms.clone()),
                });
                for j in 0..k {
                    if let StationForm::Closed(cf) = forms[j] {
                        x[j] = cf.value(remaining).max(0.0);
                    }
                }
                break;
            }
        }
    }

    Ok(ConstantEnvOutcome { segments, zero_hits, terminal: x })
}

/// Assembles the per-station closed forms for the current active set.
///
/// With `B` the total queued share, `lam_j = lambda_j * (1 - B)` the
/// relative rates, `L = sum(lam)`, `M = sum(mu)` over the active set and
/// `zbar = (L - M) / L`, the aggregate relaxation is
/// `z(s) = zbar * (1 - e^{-L s})` and
///
/// ```text
/// scheme:  x_j(s) = x_j + (1-B) * [ (lam_j - mu_j) s - lam_j * int z ]
/// example: x_j(s) = x_j + (1-B) * (lam_j - mu_j) s - lam_j * int z
/// ```
///
/// both expanded here into `a + b s + c e^{-d s}`. A vanishing `L`
/// degenerates to the pure-drain limit `x_j - (1-B) mu_j s`.
fn build_forms(
    lambda_individual: &[f64],
    mu: &[f64],
    x: &[f64],
    active: &[bool],
    mode: SolveMode,
) -> Vec<StationForm> {
    let k = lambda_individual.len();
    let queued: f64 = x.iter().sum();
    let idle = 1.0 - queued;
    let mut total_lam = 0.0;
    let mut total_mu = 0.0;
    let mut lam_rel = vec![0.0; k];
    for j in 0..k {
        if active[j] {
            lam_rel[j] = lambda_individual[j] * idle;
            total_lam += lam_rel[j];
            total_mu += mu[j];
        }
    }

    (0..k)
        .map(|j| {
            if !active[j] {
                return StationForm::Frozen;
            }
            if total_lam <= DEGENERATE_RATE_EPS {
                return StationForm::Closed(ClosedForm {
                    a: x[j],
                    b: -idle * mu[j],
                    c: 0.0,
                    d: 0.0,
                });
            }
            let zbar = (total_lam - total_mu) / total_lam;
            let pump = lam_rel[j] * zbar / total_lam;
            let form = match mode {
                SolveMode::Scheme => ClosedForm {
                    a: x[j] + idle * pump,
                    b: idle * (lam_rel[j] * total_mu / total_lam - mu[j]),
                    c: -idle * pump,
                    d: total_lam,
                },
                SolveMode::Example => ClosedForm {
                    a: x[j] + pump,
                    b: idle * (lam_rel[j] - mu[j]) - lam_rel[j] * zbar,
                    c: -pump,
                    d: total_lam,
                },
                SolveMode::Ode => unreachable!("ode mode does not use closed forms"),
            };
            StationForm::Closed(form)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed(form: &StationForm) -> ClosedForm {
        match form {
            StationForm::Closed(cf) => *cf,
            StationForm::Frozen => panic!("expected a closed form"),
        }
    }

    /// Ramp first interval: rates (1,1), departures (2,2), shares (0.1,0.1).
    const RAMP_LAMBDA: [f64; 2] = [1.0, 1.0];
    const RAMP_MU: [f64; 2] = [2.0, 2.0];
    const RAMP_X0: [f64; 2] = [0.1, 0.1];

    #[test]
    fn example_mode_reproduces_published_coefficients() {
        let out =
            solve_constant_env(&RAMP_LAMBDA, &RAMP_MU, &RAMP_X0, 0.5488, SolveMode::Example, 0.0, 0)
                .unwrap();
        let cf = closed(&match &out.segments[0].body {
            SegmentBody::Closed(forms) => forms[0],
            _ => unreachable!(),
        });
        // x_j(t) = -0.65 + 0.24 t + 0.75 e^{-1.6 t}
        assert!((cf.a - -0.65).abs() < 1e-12);
        assert!((cf.b - 0.24).abs() < 1e-12);
        assert!((cf.c - 0.75).abs() < 1e-12);
        assert!((cf.d - 1.6).abs() < 1e-12);

        // Extrapolated past the freeze, the form matches the reported
        // endpoint value.
        assert!((cf.value(0.5488) - -0.2066).abs() < 5e-4);

        // Both stations freeze together near 0.117.
        assert_eq!(out.zero_hits.len(), 2);
        for hit in &out.zero_hits {
            assert!((hit.time - 0.117).abs() < 2e-3);
        }
        assert_eq!(out.terminal, vec![0.0, 0.0]);
    }

    #[test]
    fn scheme_mode_direct_formula_identity() {
        // Independent evaluation of the recursion's first step:
        // x_j(t) = x0 + (1-B) [ (lam - mu) t - lam * Int z ], with
        // z(t) = zbar (1 - e^{-L t}) integrated in closed form.
        let out =
            solve_constant_env(&RAMP_LAMBDA, &RAMP_MU, &RAMP_X0, 0.5488, SolveMode::Scheme, 0.0, 0)
                .unwrap();
        let cf = closed(&match &out.segments[0].body {
            SegmentBody::Closed(forms) => forms[0],
            _ => unreachable!(),
        });
        let idle = 0.8;
        let lam = 1.0 * idle;
        let mu = 2.0;
        let total_lam = 2.0 * lam;
        let total_mu = 4.0;
        let zbar = (total_lam - total_mu) / total_lam;
        let t_end = out.segments[0].t_end;
        let mut s = 0.0;
        while s <= t_end {
            let int_z = zbar * (s - (1.0 - (-total_lam * s).exp()) / total_lam);
            let direct = 0.1 + idle * ((lam - mu) * s - lam * int_z);
            assert!((cf.value(s) - direct).abs() < 1e-12, "mismatch at s = {s}");
            s += 0.01;
        }
        // Scheme-mode freeze time: ln(1.2) / 1.6.
        let expected = 1.2f64.ln() / 1.6;
        assert!((out.zero_hits[0].time - expected).abs() < 1e-9);
    }

    #[test]
    fn empty_start_single_bottleneck_matches_group_form() {
        // One absolutely non-bottleneck station (freezes at time zero) and
        // one bottleneck station following (1 - 1/rho)(1 - e^{-rho mu t}).
        let lambda = [1.0, 3.0];
        let mu = [2.0, 2.0];
        let x0 = [0.0, 0.0];
        for mode in [SolveMode::Scheme, SolveMode::Example] {
            let out = solve_constant_env(&lambda, &mu, &x0, 2.0, mode, 0.0, 0).unwrap();
            assert_eq!(out.zero_hits.len(), 1);
            assert_eq!(out.zero_hits[0].station, 0);
            assert_eq!(out.zero_hits[0].time, 0.0);
            let rho: f64 = 1.5;
            let seg = &out.segments[0];
            let mut t = 0.0f64;
            while t <= 2.0 {
                let expect = (1.0 - 1.0 / rho) * (1.0 - (-rho * 2.0 * t).exp());
                let got = seg.eval(t)[1];
                assert!((got - expect).abs() < 1e-12, "t = {t}: {got} vs {expect}");
                assert_eq!(seg.eval(t)[0], 0.0);
                t += 0.05;
            }
        }
    }

    #[test]
    fn equal_rates_stay_at_zero() {
        // Ramp middle interval: rates equal departures, empty start.
        let out = solve_constant_env(&[2.0, 2.0], &[2.0, 2.0], &[0.0, 0.0], 1.0, SolveMode::Example, 0.0, 1)
            .unwrap();
        assert!(out.zero_hits.is_empty(), "boundary stations never freeze");
        let seg = &out.segments[0];
        for t in [0.0, 0.3, 0.9] {
            assert_eq!(seg.eval(t), vec![0.0, 0.0]);
        }
        assert_eq!(out.terminal, vec![0.0, 0.0]);
    }

    #[test]
    fn ramp_final_interval_growth() {
        // Rates (3,3), departures (2,2), empty start:
        // q_j(t) = (1/6)(1 - e^{-6t}).
        for mode in [SolveMode::Scheme, SolveMode::Example] {
            let out =
                solve_constant_env(&[3.0, 3.0], &[2.0, 2.0], &[0.0, 0.0], 1.362, mode, 0.0, 2)
                    .unwrap();
            let seg = &out.segments[0];
            let mut t = 0.0f64;
            while t <= 1.362 {
                let expect = (1.0 - (-6.0 * t).exp()) / 6.0;
                assert!((seg.eval(t)[0] - expect).abs() < 1e-12);
                t += 0.01;
            }
            assert!((out.terminal[0] - (1.0 - (-6.0f64 * 1.362).exp()) / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rates_drain_linearly() {
        let out = solve_constant_env(&[0.0, 0.0], &[1.0, 2.0], &[0.2, 0.0], 1.0, SolveMode::Scheme, 0.0, 0)
            .unwrap();
        // Station 1 has nothing and freezes at once; station 0 drains at
        // rate (1 - B) * mu = 0.8 and empties at 0.25.
        assert!(out.zero_hits.iter().any(|h| h.station == 1 && h.time == 0.0));
        let hit0 = out.zero_hits.iter().find(|h| h.station == 0).unwrap();
        assert!((hit0.time - 0.25).abs() < 1e-9);
        assert_eq!(out.terminal, vec![0.0, 0.0]);
    }

    #[test]
    fn successive_freezes_reduce_the_system() {
        // Two non-bottleneck stations with different loads and shares, one
        // bottleneck station. Zero hits must be ordered and both
        // non-bottleneck stations end frozen.
        let lambda = [0.4, 1.0, 3.0];
        let mu = [2.0, 1.5, 2.0];
        let x0 = [0.05, 0.12, 0.0];
        for mode in [SolveMode::Scheme, SolveMode::Example] {
            let out = solve_constant_env(&lambda, &mu, &x0, 3.0, mode, 0.0, 0).unwrap();
            let hits: Vec<usize> = out.zero_hits.iter().map(|h| h.station).collect();
            assert!(hits.contains(&0) && hits.contains(&1));
            assert!(!hits.contains(&2), "bottleneck station never freezes");
            for pair in out.zero_hits.windows(2) {
                assert!(pair[0].time <= pair[1].time + 1e-12);
            }
            assert_eq!(out.terminal[0], 0.0);
            assert_eq!(out.terminal[1], 0.0);
            assert!(out.terminal[2] > 0.0);
            // Segment count: one per active-set change plus the tail.
            assert_eq!(out.segments.len(), out.zero_hits.iter().filter(|h| h.time > 0.0).count() + 1);
        }
    }
}
