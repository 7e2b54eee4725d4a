#![allow(dead_code)]

pub mod invariants;
pub mod oracle;

use afweight::{NullStore, PValueMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A tiny problem: observed p x K rows plus B pooled null blocks.
pub struct Tiny {
    pub obs: Vec<Vec<f64>>,
    pub null: Vec<Vec<Vec<f64>>>,
}

impl Tiny {
    /// Null rows in pooled order (b-major).
    pub fn pooled(&self) -> Vec<Vec<f64>> {
        self.null.iter().flatten().cloned().collect()
    }

    pub fn matrix(&self) -> PValueMatrix {
        PValueMatrix::from_rows(&self.obs, None).unwrap()
    }

    pub fn store(&self) -> NullStore {
        NullStore::from_rows(&self.null, 0).unwrap()
    }
}

/// Uniform p-values, with an occasional very small one so several weights
/// clear the whole pool and the tie-break is exercised.
fn draw_p(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.15) {
        10f64.powf(-rng.random_range(4.0..12.0))
    } else {
        rng.random_range(1e-9..1.0)
    }
}

pub fn tiny(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=5);
    let k = rng.random_range(1..=4);
    // B p >= 2 so the pooled null has a spread
    let b = rng.random_range(2..=10);
    let row = |rng: &mut ChaCha8Rng| (0..k).map(|_| draw_p(rng)).collect::<Vec<f64>>();
    let obs = (0..p).map(|_| row(&mut rng)).collect();
    let null = (0..b).map(|_| (0..p).map(|_| row(&mut rng)).collect()).collect();
    Tiny { obs, null }
}

/// Runs all four methods on `t` and compares them with the reference:
/// statistics to 1e-12 (relative once above 1, where a z of several hundred
/// has an ulp near 1e-13), counts and weights exactly.
pub fn check_against_oracle(t: &Tiny) -> Result<(), String> {
    use afweight::combine::{afp, afz, fisher_perm, minp_perm};
    let (pm, store, pooled) = (t.matrix(), t.store(), t.pooled());
    let runs = [
        ("AFp", afp(&pm, &store), oracle::afp(&t.obs, &pooled)),
        ("AFz", afz(&pm, &store), oracle::afz(&t.obs, &pooled)),
        ("Fisher", fisher_perm(&pm, &store), oracle::fisher(&t.obs, &pooled)),
        ("minP", minp_perm(&pm, &store), oracle::minp(&t.obs, &pooled)),
    ];
    for (name, got, want) in runs {
        let got = got.map_err(|e| format!("{name}: {e}"))?;
        for (j, test) in got.tests.iter().enumerate() {
            if !close(test.statistic, want.statistic[j]) {
                return Err(format!("{name} gene {j}: statistic {} vs {}", test.statistic, want.statistic[j]));
            }
            if test.p_raw != want.p_raw[j] {
                return Err(format!("{name} gene {j}: p {} vs {}", test.p_raw, want.p_raw[j]));
            }
            if test.weight.map(|w| w.mask()) != want.mask[j] {
                return Err(format!("{name} gene {j}: weight {:?} vs {:?}", test.weight.map(|w| w.mask()), want.mask[j]));
            }
        }
        for (i, (a, b)) in got.null_statistics.iter().zip(&want.null_statistic).enumerate() {
            if !close(*a, *b) {
                return Err(format!("{name} null row {i}: {a} vs {b}"));
            }
        }
    }
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}
