//! Reference reflected-ODE integration of the limiting dynamics.
//!
//! Fixed-step RK4 on `dq_j/dt = lambda_j (1 - sum q) - mu_j` with the
//! reflection handled by clamping at zero and gating the drift while a
//! station sits at zero with negative drift.

use super::{ConstantEnvOutcome, FluidSegment, SegmentBody, ZeroHit, ZERO_SHARE_EPS};

/// Step-size ceiling; intervals shorter than one unit of time split into
/// ten thousand steps instead.
const MAX_STEP: f64 = 1e-4;

pub fn integrate_constant_env(
    lambda_individual: &[f64],
    mu: &[f64],
    x0: &[f64],
    duration: f64,
    t_offset: f64,
    env_state: usize,
) -> ConstantEnvOutcome {
    let k = lambda_individual.len();
    let non_bottleneck: Vec<bool> =
        lambda_individual.iter().zip(mu).map(|(l, m)| l < m).collect();

    let step_target = MAX_STEP.min(duration / 1e4);
    let n = (duration / step_target).round().max(1.0) as usize;
    let h = duration / n as f64;

    let mut q: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    let mut gated = vec![false; k];
    let mut hit_recorded = vec![false; k];
    let mut zero_hits = Vec::new();

    let drift = |q: &[f64], gated: &[bool]| -> Vec<f64> {
        let idle = 1.0 - q.iter().sum::<f64>();
        (0..k)
            .map(|j| if gated[j] { 0.0 } else { lambda_individual[j] * idle - mu[j] })
            .collect()
    };

    // Entry gating: stations already at zero with negative drift stay put.
    {
        let free = vec![false; k];
        let d0 = drift(&q, &free);
        for j in 0..k {
            if q[j] <= ZERO_SHARE_EPS {
                q[j] = 0.0;
                if d0[j] < 0.0 {
                    gated[j] = true;
                    if non_bottleneck[j] && !hit_recorded[j] {
                        hit_recorded[j] = true;
                        zero_hits.push(ZeroHit { time: t_offset, station: j });
                    }
                }
            }
        }
    }

    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity((n + 1) * k);
    let mut frozen = Vec::with_capacity(n + 1);
    let mask_bits = |g: &[bool]| g.iter().enumerate().fold(0u64, |m, (j, &on)| if on { m | (1 << j) } else { m });
    times.push(t_offset);
    values.extend_from_slice(&q);
    frozen.push(mask_bits(&gated));

    for i in 1..=n {
        let t = t_offset + (i - 1) as f64 * h;
        let k1 = drift(&q, &gated);
        let q2: Vec<f64> = (0..k).map(|j| q[j] + 0.5 * h * k1[j]).collect();
        let k2 = drift(&q2, &gated);
        let q3: Vec<f64> = (0..k).map(|j| q[j] + 0.5 * h * k2[j]).collect();
        let k3 = drift(&q3, &gated);
        let q4: Vec<f64> = (0..k).map(|j| q[j] + h * k3[j]).collect();
        let k4 = drift(&q4, &gated);
        let mut q_new: Vec<f64> = (0..k)
            .map(|j| q[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();

        // Clamp stations that crossed below zero during the step.
        for j in 0..k {
            if !gated[j] && q_new[j] < 0.0 {
                let crossing =
                    if q[j] > 0.0 { t + h * q[j] / (q[j] - q_new[j]) } else { t };
                q_new[j] = 0.0;
                gated[j] = true;
                if non_bottleneck[j] && !hit_recorded[j] {
                    hit_recorded[j] = true;
                    zero_hits.push(ZeroHit { time: crossing, station: j });
                }
            }
        }

        // Gate stations parked exactly at zero against downward drift;
        // lift gated stations whose drift turned positive.
        let idle = 1.0 - q_new.iter().sum::<f64>();
        for j in 0..k {
            let d = lambda_individual[j] * idle - mu[j];
            if gated[j] {
                if d > 0.0 {
                    gated[j] = false;
                }
            } else if q_new[j] == 0.0 && d < 0.0 {
                gated[j] = true;
                if non_bottleneck[j] && !hit_recorded[j] {
                    hit_recorded[j] = true;
                    zero_hits.push(ZeroHit { time: t + h, station: j });
                }
            }
        }

        q = q_new;
        times.push(t_offset + i as f64 * h);
        values.extend_from_slice(&q);
        frozen.push(mask_bits(&gated));
    }

    zero_hits.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let terminal = q;
    ConstantEnvOutcome {
        segments: vec![FluidSegment {
            t_start: t_offset,
            t_end: t_offset + duration,
            env_state,
            body: SegmentBody::Sampled { times, values, frozen },
        }],
        zero_hits,
        terminal,
    }
}
