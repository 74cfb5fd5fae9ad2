//! First zero-hit times of segment closed forms `a + b·s + c·e^{-d·s}`.

/// Bisection width for hit times.
const HIT_TOL: f64 = 1e-10;

/// Evaluates `a + b*s + c*exp(-d*s)`.
pub fn closed_form_value(a: f64, b: f64, c: f64, d: f64, s: f64) -> f64 {
    a + b * s + c * (-d * s).exp()
}

/// Earliest `s` in `[0, window]` with `a + b*s + c*e^{-d*s} <= 0`, if any.
///
/// The derivative `b - c*d*e^{-d*s}` is monotone in `s`, so the curve has
/// at most two monotone pieces and at most two roots. Each piece with a
/// sign change is bisected to 1e-10; stepping-based scans can skip a root
/// that enters and leaves the negative side inside one step.
pub fn zero_hit_time(a: f64, b: f64, c: f64, d: f64, window: f64) -> Option<f64> {
    if window < 0.0 {
        return None;
    }
    let f = |s: f64| closed_form_value(a, b, c, d, s);
    if f(0.0) <= 0.0 {
        return Some(0.0);
    }
    // Quick reject: all three contributions nonnegative.
    if a >= 0.0 && b >= 0.0 && c >= 0.0 {
        return None;
    }

    // Interior stationary point of f, when one exists.
    let mut knots = vec![0.0];
    if c != 0.0 && d > 0.0 {
        let ratio = b / (c * d);
        if ratio > 0.0 && ratio <= 1.0 {
            let s_star = -(ratio.ln()) / d;
            if s_star > 0.0 && s_star < window {
                knots.push(s_star);
            }
        }
    }
    knots.push(window);

    for pair in knots.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if f(lo) <= 0.0 {
            return Some(lo);
        }
        if f(hi) <= 0.0 {
            // Monotone on [lo, hi] with a sign change.
            let mut lo = lo;
            let mut hi = hi;
            while hi - lo > HIT_TOL {
                let mid = 0.5 * (lo + hi);
                if f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
    }
    None
}

/// All roots of `a + b*s + c*e^{-d*s} = 0` in `[0, window]`, in increasing
/// order. The curve has at most two monotone pieces, so at most two roots;
/// endpoint roots are included once.
pub fn level_crossings(a: f64, b: f64, c: f64, d: f64, window: f64) -> Vec<f64> {
    let f = |s: f64| closed_form_value(a, b, c, d, s);
    let mut knots = vec![0.0];
    if c != 0.0 && d > 0.0 {
        let ratio = b / (c * d);
        if ratio > 0.0 && ratio <= 1.0 {
            let s_star = -(ratio.ln()) / d;
            if s_star > 0.0 && s_star < window {
                knots.push(s_star);
            }
        }
    }
    knots.push(window);

    let mut roots = Vec::new();
    for pair in knots.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            if roots.last() != Some(&lo) {
                roots.push(lo);
            }
            continue;
        }
        if flo * fhi > 0.0 {
            continue;
        }
        while hi - lo > HIT_TOL {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        if roots.last().map_or(true, |r| (root - r).abs() > HIT_TOL) {
            roots.push(root);
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_interval_coefficients_hit_near_reported_time() {
        // x(t) = -0.65 + 0.24 t + 0.75 e^{-1.6 t}
        let hit = zero_hit_time(-0.65, 0.24, 0.75, 1.6, 0.5488).expect("hits zero");
        assert!((hit - 0.117).abs() < 2e-3, "hit {hit}");
        assert!(closed_form_value(-0.65, 0.24, 0.75, 1.6, hit).abs() < 1e-9);
    }

    #[test]
    fn single_station_drain_matches_grid_scan() {
        // Draining station: share 0.1, arrival rate 0.9 relative, departure
        // rate 2. First-empty time has the closed form ln(1.1)/0.9.
        let (a, b, c, d) = (-1.0, 0.0, 1.1, 0.9);
        let analytic = (1.1f64).ln() / 0.9;
        let hit = zero_hit_time(a, b, c, d, 1.0).expect("hits zero");
        assert!((hit - analytic).abs() < 1e-9);

        // Independent oracle: scan the curve on a 1e-6 grid.
        let mut scan = None;
        let mut s = 0.0;
        while s <= 1.0 {
            if closed_form_value(a, b, c, d, s) <= 0.0 {
                scan = Some(s);
                break;
            }
            s += 1e-6;
        }
        let scan = scan.expect("grid scan finds the crossing");
        assert!((hit - scan).abs() < 1e-6);
        assert!((analytic - 0.1059).abs() < 1e-4);
    }

    #[test]
    fn nonnegative_drift_from_positive_start_never_hits() {
        assert_eq!(zero_hit_time(0.2, 0.1, 0.3, 2.0, 100.0), None);
        assert_eq!(zero_hit_time(0.2, 0.0, 0.0, 0.0, 100.0), None);
    }

    #[test]
    fn nonpositive_start_hits_immediately() {
        assert_eq!(zero_hit_time(-0.5, 1.0, 0.4, 1.0, 10.0), Some(0.0));
    }

    #[test]
    fn dip_inside_window_is_found_despite_recovery() {
        // Strong early decay with positive slope: goes negative then
        // recovers; the first crossing must be found, not the recovered tail.
        let (a, b, c, d) = (-1.0, 0.3, 1.05, 4.0);
        let hit = zero_hit_time(a, b, c, d, 20.0).expect("dips below zero");
        assert!(closed_form_value(a, b, c, d, hit).abs() < 1e-8);
        assert!(closed_form_value(a, b, c, d, hit + 1e-4) < 0.0, "entering the dip");
        // Well past the dip the line term dominates and the value is positive.
        assert!(closed_form_value(a, b, c, d, 20.0) > 0.0);
    }

    #[test]
    fn affine_fallbacks() {
        // c = 0: pure line.
        assert!((zero_hit_time(1.0, -2.0, 0.0, 0.0, 10.0).unwrap() - 0.5).abs() < 1e-9);
        // d = 0: constant offset folds into the line.
        assert!((zero_hit_time(0.5, -1.0, 0.5, 0.0, 10.0).unwrap() - 1.0).abs() < 1e-9);
        // Root beyond the window.
        assert_eq!(zero_hit_time(1.0, -2.0, 0.0, 0.0, 0.4), None);
    }
}
