use proptest::prelude::*;
use rail_core::penalty::{binary_penalty, in_undesired_set, penalty, smooth_penalty, PenaltyConfig};
use rail_core::seeded_rng;
use rail_core::sim::SafetyReadout;
use rand::Rng;

fn ro(d_c: f64, d_road: f64, accel: f64) -> SafetyReadout {
    SafetyReadout { d_c, d_road, accel }
}

const D_C: [f64; 3] = [0.0, 0.01, 5.0];
const D_ROAD: [f64; 6] = [-0.2, -0.1, 0.0, 0.2, 0.5, 2.0];
const ACCEL: [f64; 5] = [-4.0, -3.0, -2.5, -2.0, 0.0];

// Event table: collision only at d_c = 0, off-road for the first two
// d_road values, hard brake for the first two accelerations.
const COLLIDES: [bool; 3] = [true, false, false];
const OFFROAD: [bool; 6] = [true, true, false, false, false, false];
const BRAKES: [bool; 5] = [true, true, false, false, false];

#[test]
fn binary_grid() {
    let c = PenaltyConfig::binary();
    assert_eq!(c.magnitude, 2000.0);
    for (i, d_c) in D_C.iter().enumerate() {
        for (j, d_road) in D_ROAD.iter().enumerate() {
            for (k, a) in ACCEL.iter().enumerate() {
                let expected = if COLLIDES[i] || OFFROAD[j] {
                    2000.0
                } else if BRAKES[k] {
                    1000.0
                } else {
                    0.0
                };
                let r = ro(*d_c, *d_road, *a);
                assert_eq!(binary_penalty(&r, &c), expected, "{d_c} {d_road} {a}");
                assert_eq!(in_undesired_set(&r, &c), expected > 0.0);
            }
        }
    }
}

/// Piecewise-linear interpolation through `knots`, constant outside.
fn interp(x: f64, knots: &[(f64, f64)]) -> f64 {
    if x <= knots[0].0 {
        return knots[0].1;
    }
    for w in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    knots[knots.len() - 1].1
}

fn smooth_oracle(r: &SafetyReadout) -> f64 {
    let big = 1000.0;
    let coll = if r.d_c <= 0.0 { big } else { 0.0 };
    let off = interp(r.d_road, &[(-0.1, big), (0.5, 0.0)]);
    let brake = interp(r.accel, &[(-3.0, big / 2.0), (-2.0, 0.0)]);
    coll.max(off).max(brake)
}

#[test]
fn smooth_matches_oracle() {
    let c = PenaltyConfig::smooth();
    let mut rng = seeded_rng(11);
    for _ in 0..100_000 {
        let d_c = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..3.0) };
        let r = ro(d_c, rng.random_range(-1.0..1.5), rng.random_range(-5.0..1.0));
        let got = smooth_penalty(&r, &c);
        assert!((got - smooth_oracle(&r)).abs() <= 1e-12, "{r:?}");
    }
}

#[test]
fn smooth_is_continuous_on_a_grid() {
    let c = PenaltyConfig::smooth();
    let step = 1e-3;
    // Off-road slope R / 0.6, brake slope (R / 2) / 1.
    let lip = 1000.0 / 0.6;
    for i in 0..2000 {
        let x = -1.0 + i as f64 * step;
        let a = smooth_penalty(&ro(5.0, x, 0.0), &c);
        let b = smooth_penalty(&ro(5.0, x + step, 0.0), &c);
        assert!((a - b).abs() <= lip * step + 1e-9);
        let a = smooth_penalty(&ro(5.0, 2.0, -5.0 + x), &c);
        let b = smooth_penalty(&ro(5.0, 2.0, -5.0 + x + step), &c);
        assert!((a - b).abs() <= 500.0 * step + 1e-9);
    }
}

proptest! {
    #[test]
    fn binary_takes_three_values(d_c in 0.0..2.0f64, d_road in -1.0..2.0f64, a in -5.0..1.0f64) {
        let v = binary_penalty(&ro(d_c, d_road, a), &PenaltyConfig::binary());
        prop_assert!(v == 0.0 || v == 1000.0 || v == 2000.0);
    }

    #[test]
    fn penalties_are_monotone(d_c in 0.0..2.0f64, d_road in -1.0..2.0f64, a in -5.0..1.0f64, eps in 0.0..0.5f64) {
        for c in [PenaltyConfig::binary(), PenaltyConfig::smooth()] {
            let base = penalty(&ro(d_c, d_road, a), &c);
            prop_assert!(penalty(&ro(d_c, d_road + eps, a), &c) <= base);
            prop_assert!(penalty(&ro(d_c, d_road, a + eps), &c) <= base);
            prop_assert!(penalty(&ro(d_c + eps, d_road, a), &c) <= base);
            prop_assert!(base >= 0.0 && base <= c.magnitude);
        }
    }

    #[test]
    fn undesired_iff_binary_positive(d_c in 0.0..0.3f64, d_road in -0.5..0.5f64, a in -4.0..-2.0f64) {
        let r = ro(if d_c < 0.1 { 0.0 } else { d_c }, d_road, a);
        let c = PenaltyConfig::binary();
        prop_assert_eq!(in_undesired_set(&r, &c), binary_penalty(&r, &c) > 0.0);
        prop_assert_eq!(in_undesired_set(&r, &PenaltyConfig::smooth()), binary_penalty(&r, &c) > 0.0);
    }
}
