use std::f64::consts::{FRAC_PI_2, PI};

/// Closed-form mechanics results used as ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticCase {
    /// Period `2π√(L/g)`.
    SmallAnglePendulum { length: f64, gravity: f64 },
    /// Period `4√(L/g) K(sin(θ₀/2))` for release at rest from `amplitude`.
    LargeAnglePendulum { length: f64, gravity: f64, amplitude: f64 },
    /// Angular frequency `√(k/m)`.
    Harmonic { stiffness: f64, mass: f64 },
    /// Body-frame precession rate `(I₃ − I₁)/I₁ · ω₃` of a torque-free
    /// symmetric body.
    SymmetricTop { transverse: f64, axial: f64, spin: f64 },
    /// Height `z₀ + v₀t − ½gt²`.
    FreeFall { height: f64, velocity: f64, gravity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    pub measured: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub tolerance: f64,
}

impl AnalyticCase {
    /// Closed-form value of the measured quantity: a period (s) for the
    /// pendulums, an angular frequency (rad/s) for the oscillator and the
    /// top, the final height (m) for free fall at `t = 1`.
    pub fn expected(&self) -> f64 {
        match *self {
            AnalyticCase::SmallAnglePendulum { length, gravity } => 2.0 * PI * (length / gravity).sqrt(),
            AnalyticCase::LargeAnglePendulum {
                length,
                gravity,
                amplitude,
            } => 4.0 * (length / gravity).sqrt() * complete_elliptic_k((0.5 * amplitude).sin()),
            AnalyticCase::Harmonic { stiffness, mass } => (stiffness / mass).sqrt(),
            AnalyticCase::SymmetricTop {
                transverse,
                axial,
                spin,
            } => ((axial - transverse) / transverse * spin).abs(),
            AnalyticCase::FreeFall {
                height,
                velocity,
                gravity,
            } => height + velocity - 0.5 * gravity,
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            AnalyticCase::SymmetricTop { .. } => 5e-3,
            AnalyticCase::FreeFall { .. } => 1e-9,
            _ => 1e-3,
        }
    }
}

/// Compare a sampled signal with the closed form. Oscillatory cases measure
/// the mean period between upward mid-line crossings; free fall compares the
/// whole height history.
pub fn analytic_check(case: &AnalyticCase, times: &[f64], signal: &[f64]) -> CheckOutcome {
    let expected_value = case.expected();
    let measured = match *case {
        AnalyticCase::SmallAnglePendulum { .. } | AnalyticCase::LargeAnglePendulum { .. } => mean_period(times, signal),
        AnalyticCase::Harmonic { .. } | AnalyticCase::SymmetricTop { .. } => {
            mean_period(times, signal).map(|p| 2.0 * PI / p)
        }
        AnalyticCase::FreeFall {
            height,
            velocity,
            gravity,
        } => {
            let exact = |t: f64| height + velocity * t - 0.5 * gravity * t * t;
            let scale = times.iter().map(|t| exact(*t).abs()).fold(0.0, f64::max).max(1.0);
            let err = times
                .iter()
                .zip(signal)
                .map(|(t, z)| (z - exact(*t)).abs())
                .fold(0.0, f64::max);
            let outcome = CheckOutcome {
                passed: !times.is_empty() && err / scale <= case.tolerance(),
                measured: signal.last().copied().unwrap_or(f64::NAN),
                expected: times.last().map_or(f64::NAN, |t| exact(*t)),
                relative_error: err / scale,
                tolerance: case.tolerance(),
            };
            return outcome;
        }
    };
    let measured = measured.unwrap_or(f64::NAN);
    let relative_error = ((measured - expected_value) / expected_value).abs();
    CheckOutcome {
        passed: relative_error <= case.tolerance(),
        measured,
        expected: expected_value,
        relative_error,
        tolerance: case.tolerance(),
    }
}

/// Mean spacing of upward crossings of `(max + min)/2`, located by linear
/// interpolation. `None` with fewer than two crossings.
fn mean_period(times: &[f64], signal: &[f64]) -> Option<f64> {
    let n = times.len().min(signal.len());
    if n < 3 {
        return None;
    }
    let (lo, hi) = signal[..n]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let mid = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for k in 1..n {
        let (a, b) = (signal[k - 1] - mid, signal[k] - mid);
        if a < 0.0 && b >= 0.0 {
            crossings.push(times[k - 1] + (times[k] - times[k - 1]) * a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

/// `K(k) = ∫₀^{π/2} dφ / √(1 − k² sin²φ)` by adaptive Simpson quadrature.
pub fn complete_elliptic_k(k: f64) -> f64 {
    let f = |phi: f64| 1.0 / (1.0 - k * k * phi.sin().powi(2)).sqrt();
    let (a, b) = (0.0, FRAC_PI_2);
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, 1e-14, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    let left = (m - a) / 6.0 * (fa + 4.0 * lm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * rm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol.max(4.0 * f64::EPSILON * whole.abs()) {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, lm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, rm, fb, right, 0.5 * tol, depth - 1)
}
