#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(dead_code)]

use std::path::PathBuf;

use mott_osc::analytic;
use mott_osc::MemristorParams;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn reference() -> MemristorParams {
    MemristorParams::new(0.95, 0.65, 40e3, 10e3, 0.85, 0.35).unwrap()
}

/// Random device that oscillates somewhere, and a bias in the middle 80 % of
/// its oscillation window.
pub fn random_oscillator<R: Rng>(rng: &mut R) -> (MemristorParams, f64) {
    loop {
        let v_hl = rng.random_range(0.3..0.8);
        let v_th = v_hl + rng.random_range(0.1..0.5);
        let r_i = rng.random_range(10e3..100e3);
        let r_m = rng.random_range(1e3..0.5 * r_i);
        let v_oi = v_th - rng.random_range(0.02..0.3);
        let v_om = rng.random_range(0.1..v_hl - 0.05);
        let Ok(p) = MemristorParams::new(v_th, v_hl, r_i, r_m, v_oi, v_om) else {
            continue;
        };
        let Some((lo, hi)) = analytic::oscillation_window(&p) else {
            continue;
        };
        let i = lo + rng.random_range(0.1..0.9) * (hi - lo);
        if analytic::period(&p, i, 70e-12).is_ok() {
            return (p, i);
        }
    }
}

pub fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}
