//! Phase wrapping helpers.

use std::f64::consts::PI;

/// Wraps an angle into (−π, π].
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Removes 2π jumps so that consecutive values differ by at most π.
pub fn unwrap_in_place(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let step = phases[i] - phases[i - 1];
        phases[i] -= 2.0 * PI * (step / (2.0 * PI)).round();
    }
}
