//! Property and calibration checks shared by the integration tests and the
//! acceptance runner. Each returns a readable message on failure.

use afweight::categorize::{merge_modules, tight_cluster};
use afweight::combine::{afp, afp_with_masks, afz, fisher_perm, minp_perm};
use afweight::simbench::{simulate, Setting, SimConfig};
use afweight::stability::{comembership, variability_index, SignedWeightTensor};
use afweight::{build_null, Method, NullStore, PValueMatrix, WeightVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 64;

fn check<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn p_value() -> impl Strategy<Value = f64> {
    prop_oneof![4 => 1e-9..1.0f64, 1 => (4.0..14.0f64).prop_map(|e| 10f64.powf(-e))]
}

type Instance = (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>);

/// (observed rows, null rows[b][j]) with shared p and K.
fn instance(max_k: usize) -> impl Strategy<Value = Instance> {
    (1..=6usize, 1..=max_k, 2..=6usize).prop_flat_map(|(p, k, b)| {
        (prop::collection::vec(prop::collection::vec(p_value(), k), p), prop::collection::vec(prop::collection::vec(prop::collection::vec(p_value(), k), p), b))
    })
}

/// Fixing the weight at all ones turns AFp into Fisher's test.
pub fn fisher_equivalence(cases: u32) -> Result<(), String> {
    check(cases, instance(4), |(obs, null)| {
        let pm = PValueMatrix::from_rows(&obs, None).unwrap();
        let store = NullStore::from_rows(&null, 0).unwrap();
        let fixed = afp_with_masks(&pm, &store, &[WeightVector::all(pm.n_phenotypes())]).unwrap();
        prop_assert_eq!(fixed.p_values(), fisher_perm(&pm, &store).unwrap().p_values());
        Ok(())
    })
}

/// With one phenotype every method ranks the same single column.
pub fn singleton_equivalence(cases: u32) -> Result<(), String> {
    check(cases, instance(4), |(obs, null)| {
        let first: Vec<Vec<f64>> = obs.iter().map(|r| vec![r[0]]).collect();
        let first_null: Vec<Vec<Vec<f64>>> = null.iter().map(|b| b.iter().map(|r| vec![r[0]]).collect()).collect();
        let pm = PValueMatrix::from_rows(&first, None).unwrap();
        let store = NullStore::from_rows(&first_null, 0).unwrap();
        let a = afp(&pm, &store).unwrap().p_values();
        prop_assert_eq!(&a, &fisher_perm(&pm, &store).unwrap().p_values());
        prop_assert_eq!(&a, &minp_perm(&pm, &store).unwrap().p_values());
        // AFz needs a null with spread; a constant column is a legitimate refusal
        if let Ok(z) = afz(&pm, &store) {
            prop_assert_eq!(&a, &z.p_values());
        }
        Ok(())
    })
}

/// Every pooled null value counts itself, so null AFp statistics sit at or
/// above 1/(B p), and p_floored never reaches 0.
pub fn null_resolution(cases: u32) -> Result<(), String> {
    check(cases, instance(4), |(obs, null)| {
        let pm = PValueMatrix::from_rows(&obs, None).unwrap();
        let store = NullStore::from_rows(&null, 0).unwrap();
        let out = afp(&pm, &store).unwrap();
        let floor = 1.0 / out.pooled as f64;
        prop_assert!(out.null_statistics.iter().all(|&t| t >= floor));
        prop_assert!(out.tests.iter().all(|t| t.p_floored >= 1.0 / (out.pooled as f64 + 1.0)));
        prop_assert!(out.tests.iter().all(|t| t.p_raw >= 0.0 && t.p_raw <= 1.0));
        Ok(())
    })
}

/// Lowering a gene's observed p-values can only lower its AFp and Fisher
/// p-values.
pub fn monotone_in_evidence(cases: u32) -> Result<(), String> {
    check(cases, (instance(3), 0.01..1.0f64), |((obs, null), shrink)| {
        let store = NullStore::from_rows(&null, 0).unwrap();
        let pm = PValueMatrix::from_rows(&obs, None).unwrap();
        let mut stronger = obs.clone();
        stronger[0].iter_mut().for_each(|p| *p *= shrink);
        let pm2 = PValueMatrix::from_rows(&stronger, None).unwrap();
        prop_assert!(afp(&pm2, &store).unwrap().tests[0].p_raw <= afp(&pm, &store).unwrap().tests[0].p_raw);
        prop_assert!(fisher_perm(&pm2, &store).unwrap().tests[0].p_raw <= fisher_perm(&pm, &store).unwrap().tests[0].p_raw);
        Ok(())
    })
}

// ---------------------------------------------------------------- null KS

/// Kolmogorov distance between the sample and Uniform(0, 1).
pub fn ks_uniform(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs())).fold(0.0, f64::max)
}

fn column(null: &NullStore, k: usize) -> Vec<f64> {
    let (b, p, _) = null.shape();
    (0..b).flat_map(|bi| (0..p).map(move |j| (bi, j))).map(|(bi, j)| null.get(bi, j, k)).collect()
}

pub const KS_LIMIT: f64 = 0.05;

fn ks_ok(what: &str, d: f64) -> Result<f64, String> {
    if d < KS_LIMIT {
        Ok(d)
    } else {
        Err(format!("{what}: D = {d:.4}"))
    }
}

/// Largest per-phenotype KS distance of Gaussian null p-values.
pub fn gaussian_null_ks() -> Result<f64, String> {
    let (ds, _) = simulate(&SimConfig::new(Setting::IA, 0.0, 11)).map_err(|e| e.to_string())?;
    let null = build_null(&ds, 50, 3, false).map_err(|e| e.to_string())?;
    let worst = (0..ds.n_phenotypes()).map(|k| ks_uniform(column(&null, k))).fold(0.0, f64::max);
    ks_ok("gaussian", worst)
}

/// Count phenotypes at rate exp(0) = 1, so there is no latent
/// overdispersion. One dataset fixes each count column for all B p null
/// values, so the check pools independent datasets.
pub fn poisson_null_ks() -> Result<f64, String> {
    let mut pooled = Vec::new();
    for seed in 0..8 {
        let (ds, _) = simulate(&SimConfig::new(Setting::IIIA, 0.0, 100 + seed)).map_err(|e| e.to_string())?;
        let null = build_null(&ds, 10, seed, false).map_err(|e| e.to_string())?;
        for k in 0..4 {
            pooled.extend(column(&null, k));
        }
    }
    ks_ok("poisson", ks_uniform(pooled))
}

/// Confounded setting, with and without covariates in the permuted model.
pub fn covariate_null_ks() -> Result<f64, String> {
    let (ds, _) = simulate(&SimConfig::new(Setting::IIA, 0.0, 13)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for include in [false, true] {
        let null = build_null(&ds, 50, 5, include).map_err(|e| e.to_string())?;
        worst = worst.max(ks_ok(&format!("covariates={include}"), ks_uniform(column(&null, 0)))?);
    }
    Ok(worst)
}

// --------------------------------------------------------------- stability

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn tensor(values: &[Vec<Vec<i8>>]) -> SignedWeightTensor {
    let (p, k) = (values[0].len(), values[0][0].len());
    SignedWeightTensor::from_values(Method::AFp, names("g", p), names("Y", k), values).unwrap()
}

fn signed_tensor() -> impl Strategy<Value = Vec<Vec<Vec<i8>>>> {
    (2..=8usize, 1..=7usize, 1..=4usize).prop_flat_map(|(l, p, k)| prop::collection::vec(prop::collection::vec(prop::collection::vec(-1i8..=1, k), p), l))
}

/// Variability equals 4 q (1 - q) for the selection frequency q, inside [0, 1].
pub fn variability_bounds(cases: u32) -> Result<(), String> {
    check(cases, signed_tensor(), |values| {
        let t = tensor(&values);
        let v = variability_index(&t).unwrap();
        let l = values.len() as f64;
        for j in 0..t.n_genes() {
            for k in 0..t.n_phenotypes() {
                let q = values.iter().filter(|r| r[j][k] != 0).count() as f64 / l;
                let got = v.row(j)[k];
                prop_assert!((0.0..=1.0).contains(&got));
                prop_assert!((got - 4.0 * q * (1.0 - q)).abs() < 1e-12);
            }
        }
        Ok(())
    })
}

/// Unit diagonal, symmetric, inside [0, 1], and relabelling genes permutes
/// the matrix and nothing else.
pub fn comembership_similarity(cases: u32) -> Result<(), String> {
    check(cases, (signed_tensor(), 0usize..7), |(values, rot)| {
        let t = tensor(&values);
        let c = comembership(&t);
        let p = t.n_genes();
        for i in 0..p {
            prop_assert_eq!(c.get(i, i), 1.0);
            for j in 0..p {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                prop_assert!((0.0..=1.0).contains(&c.get(i, j)));
            }
        }
        let order: Vec<usize> = (0..p).map(|i| (i + rot) % p).collect();
        let shuffled: Vec<Vec<Vec<i8>>> = values.iter().map(|r| order.iter().map(|&j| r[j].clone()).collect()).collect();
        let c2 = comembership(&tensor(&shuffled));
        for a in 0..p {
            for b in 0..p {
                prop_assert_eq!(c2.get(a, b), c.get(order[a], order[b]));
            }
        }
        Ok(())
    })
}

/// Three gene blocks, each with its own signed pattern, observed through L
/// noisy replicates. A 2% flip rate keeps a pair identical about 87% of the
/// time, clear of alpha = 0.7. Scattered genes redraw their pattern every time.
fn planted(seed: u64, block: usize, noise: usize, l: usize, flip: f64) -> (Vec<Vec<Vec<i8>>>, Vec<Option<usize>>) {
    let patterns: [[i8; 5]; 3] = [[1, 1, 0, 0, 0], [0, 0, -1, 1, 0], [1, 0, 0, 0, -1]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Vec::new();
    for b in 0..3 {
        truth.extend(std::iter::repeat_n(Some(b), block));
    }
    truth.extend(std::iter::repeat_n(None, noise));
    let values = (0..l)
        .map(|_| {
            truth
                .iter()
                .map(|t| match t {
                    Some(b) => patterns[*b].iter().map(|&v| if rng.random_bool(flip) { rng.random_range(-1..=1) } else { v }).collect(),
                    None => (0..5).map(|_| rng.random_range(-1..=1)).collect(),
                })
                .collect()
        })
        .collect();
    (values, truth)
}

pub fn planted_block_recovery(seeds: u64) -> Result<(), String> {
    for seed in 0..seeds {
        let (values, truth) = planted(seed, 12, 8, 40, 0.02);
        let v = comembership(&tensor(&values));
        let assign = tight_cluster(&v, 5, 0.7, 10).map_err(|e| e.to_string())?;
        if assign.modules.len() != 3 {
            return Err(format!("seed {seed}: {} modules", assign.modules.len()));
        }
        let labels = assign.labels();
        for b in 0..3 {
            let members: Vec<usize> = (0..truth.len()).filter(|&g| truth[g] == Some(b)).collect();
            let found = labels[members[0]].ok_or(format!("seed {seed}: block {b} gene left scattered"))?;
            if !members.iter().all(|&g| labels[g] == Some(found)) {
                return Err(format!("seed {seed}: block {b} split"));
            }
        }
        if !(0..truth.len()).filter(|&g| truth[g].is_none()).all(|g| labels[g].is_none()) {
            return Err(format!("seed {seed}: noise gene kept"));
        }
        // blocks share little, so the merge pass has nothing to join
        let merged = merge_modules(&assign, &v, 0.5).modules.len();
        if merged != 3 {
            return Err(format!("seed {seed}: merge left {merged} modules"));
        }
    }
    Ok(())
}
