//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use damped_kg::data::random_field;
use damped_kg::groups::{GroupKind, GroupSpec};
use damped_kg::{ModeSet, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Dormand-Prince 5(4) tableau; the node row is not needed for an autonomous system.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of `y'' + b y' + k2 y = 0` from
/// `(y, y')(0) = y0` to `t_end`. Local errors are controlled relative to
/// `|y| + |y'|`, so zeros of either component do not stall the step size.
pub fn damped_oscillator(b: f64, k2: f64, y0: [f64; 2], t_end: f64, rtol: f64) -> [f64; 2] {
    let f = |y: [f64; 2]| [y[1], -b * y[1] - k2 * y[0]];
    let mut y = y0;
    let mut t = 0.0;
    let mut h = (t_end / 100.0).clamp(1e-6, 0.01);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k = [[0.0; 2]; 7];
        k[0] = f(y);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = f(ys);
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5[0] += h * B5[s] * k[s][0];
            y5[1] += h * B5[s] * k[s][1];
            y4[0] += h * B4[s] * k[s][0];
            y4[1] += h * B4[s] * k[s][1];
        }
        let scale = rtol * (y[0].abs() + y[1].abs()).max(y5[0].abs() + y5[1].abs()) + f64::MIN_POSITIVE;
        let err = ((y5[0] - y4[0]).abs() + (y5[1] - y4[1]).abs()) / scale;
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

pub fn modes(kind: GroupKind, k: u32) -> Arc<ModeSet> {
    Arc::new(ModeSet::new(GroupSpec::new(kind), k))
}

/// `count` random real fields, alternating decay exponents 1 and 2.
pub fn random_fields(modes: &Arc<ModeSet>, count: usize, seed: u64) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| random_field(modes, if i % 2 == 0 { 1.0 } else { 2.0 }, &mut rng))
        .collect()
}

/// Midpoint-rule mean of `f` over `[0, 2 pi)` with `n` nodes.
pub fn dense_mean(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..n)
        .map(|j| f(2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64))
        .sum::<f64>()
        / n as f64
}
