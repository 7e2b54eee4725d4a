//! Random-effect simulations with a known gene-phenotype association
//! structure, and the benchmark that scores the combination methods on
//! them (rejection rate, weight sensitivity and specificity, block-mean
//! weights).

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{run_method, Method};
use crate::data::{Dataset, DatasetParts, PhenotypeKind};
use crate::error::{Error, Result};
use crate::glm::assoc_pvalues;
use crate::perm::build_null;
use crate::rng::{keyed_rng, sub_seed, Stream};
use crate::tsv::fmt_f64;

pub const SIM_GENES: usize = 150;
pub const SIM_PHENOTYPES: usize = 10;
pub const GENE_BLOCKS: usize = 3;
const BLOCK: usize = 50;
const REPLICATE_RETRIES: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    IA,
    IB,
    IIA,
    IIB,
    IIIA,
    IIIB,
}

impl Setting {
    pub const ALL: [Setting; 6] = [Setting::IA, Setting::IB, Setting::IIA, Setting::IIB, Setting::IIIA, Setting::IIIB];

    /// Residual sd of each phenotype. Entries 1-4 are unused in the
    /// count-phenotype settings and reported as NaN.
    pub fn sigma_k(self) -> [f64; SIM_PHENOTYPES] {
        let mut s = [2.0; SIM_PHENOTYPES];
        s[9] = 1.0;
        match self {
            Setting::IA | Setting::IIA => {}
            Setting::IB | Setting::IIB => {
                s[0] = 0.05;
                s[4] = 0.05;
            }
            Setting::IIIA => s[..4].fill(f64::NAN),
            Setting::IIIB => {
                s[..4].fill(f64::NAN);
                s[4] = 0.01;
            }
        }
        s
    }

    pub fn has_confounder(self) -> bool {
        matches!(self, Setting::IIA | Setting::IIB)
    }

    pub fn has_counts(self) -> bool {
        matches!(self, Setting::IIIA | Setting::IIIB)
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Setting> {
        Setting::ALL
            .into_iter()
            .find(|x| x.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Precondition(format!("unknown setting {s:?}; expected IA, IB, IIA, IIB, IIIA or IIIB")))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Rate of the count phenotypes in the mixed-type settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonRate {
    /// exp(u)
    #[default]
    Exp,
    /// max(u, 0.01)
    Identity,
}

impl FromStr for PoissonRate {
    type Err = Error;
    fn from_str(s: &str) -> Result<PoissonRate> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp" => Ok(PoissonRate::Exp),
            "identity" => Ok(PoissonRate::Identity),
            other => Err(Error::Precondition(format!("unknown poisson rate {other:?}"))),
        }
    }
}

impl fmt::Display for PoissonRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoissonRate::Exp => "exp",
            PoissonRate::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub setting: Setting,
    pub sigma_mu: f64,
    pub n: usize,
    pub sigma_x: f64,
    pub sigma_c: f64,
    pub poisson_rate: PoissonRate,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(setting: Setting, sigma_mu: f64, seed: u64) -> SimConfig {
        SimConfig { setting, sigma_mu, n: 100, sigma_x: 0.5, sigma_c: 0.5, poisson_rate: PoissonRate::Exp, seed }
    }

    fn check(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.sigma_mu) && self.sigma_x > 0.0 && finite_nonneg(self.sigma_c)) {
            return Err(Error::Precondition("sigma_mu, sigma_c must be >= 0 and sigma_x > 0".into()));
        }
        if self.n < 4 {
            return Err(Error::Precondition("need at least 4 samples".into()));
        }
        Ok(())
    }
}

/// True 0/1 weights, 150 genes x 10 phenotypes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthWeights {
    values: Vec<u8>,
}

impl TruthWeights {
    pub fn get(&self, j: usize, k: usize) -> u8 {
        self.values[j * SIM_PHENOTYPES + k]
    }
    pub fn row(&self, j: usize) -> &[u8] {
        &self.values[j * SIM_PHENOTYPES..(j + 1) * SIM_PHENOTYPES]
    }
    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0)
    }
}

/// Block 1 (genes 1-50) loads on phenotypes 1-9, block 2 on 5-9 and block
/// 3 on phenotype 10; nothing when sigma_mu is 0. The structure is the
/// same in every setting.
pub fn truth_weights(sigma_mu: f64) -> TruthWeights {
    let mut values = vec![0u8; SIM_GENES * SIM_PHENOTYPES];
    if sigma_mu > 0.0 {
        for j in 0..SIM_GENES {
            let ks = match j / BLOCK {
                0 => 0..9,
                1 => 4..9,
                _ => 9..10,
            };
            for k in ks {
                values[j * SIM_PHENOTYPES + k] = 1;
            }
        }
    }
    TruthWeights { values }
}

/// Simulated data with its latent random effects.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub dataset: Dataset,
    pub truth: TruthWeights,
    pub u: [Vec<f64>; 3],
    pub z: Option<Vec<f64>>,
}

pub fn simulate(cfg: &SimConfig) -> Result<(Dataset, TruthWeights)> {
    simulate_latent(cfg).map(|s| (s.dataset, s.truth))
}

pub fn simulate_latent(cfg: &SimConfig) -> Result<Simulated> {
    cfg.check()?;
    let n = cfg.n;
    let mut rng = keyed_rng(cfg.seed, Stream::Simulation, 0);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let draw = |sd: f64, rng: &mut rand_chacha::ChaCha8Rng| -> f64 { sd * std_normal.sample(rng) };

    let mut u: [Vec<f64>; 3] = Default::default();
    for ui in u.iter_mut() {
        *ui = (0..n).map(|_| draw(cfg.sigma_mu, &mut rng)).collect();
    }
    let z: Option<Vec<f64>> = cfg.setting.has_confounder().then(|| (0..n).map(|_| draw(cfg.sigma_c, &mut rng)).collect());
    let zi = |i: usize| z.as_ref().map_or(0.0, |z| z[i]);

    let sigma = cfg.setting.sigma_k();
    let mut phenotypes = Vec::with_capacity(SIM_PHENOTYPES);
    let mut kinds = Vec::with_capacity(SIM_PHENOTYPES);
    for k in 0..SIM_PHENOTYPES {
        let col: Vec<f64> = if k < 4 && cfg.setting.has_counts() {
            kinds.push(PhenotypeKind::Count);
            (0..n)
                .map(|i| {
                    let rate = match cfg.poisson_rate {
                        PoissonRate::Exp => u[0][i].exp(),
                        PoissonRate::Identity => u[0][i].max(0.01),
                    };
                    Poisson::new(rate).expect("positive finite rate").sample(&mut rng)
                })
                .collect()
        } else {
            kinds.push(PhenotypeKind::Continuous);
            (0..n)
                .map(|i| {
                    let mean = match k {
                        0..=3 => u[0][i] + zi(i),
                        4..=8 => u[0][i] + u[1][i] + zi(i),
                        _ => u[2][i],
                    };
                    mean + draw(sigma[k], &mut rng)
                })
                .collect()
        };
        phenotypes.push(col);
    }
    let expression: Vec<Vec<f64>> = (0..SIM_GENES)
        .map(|j| {
            let block = j / BLOCK;
            (0..n)
                .map(|i| {
                    let mean = if block == 0 { u[0][i] + zi(i) } else { u[block][i] };
                    mean + draw(cfg.sigma_x, &mut rng)
                })
                .collect()
        })
        .collect();
    let dataset = Dataset::new(DatasetParts {
        gene_ids: (1..=SIM_GENES).map(|j| format!("X{j}")).collect(),
        sample_ids: (1..=n).map(|i| format!("S{i}")).collect(),
        expression,
        phenotype_names: (1..=SIM_PHENOTYPES).map(|k| format!("Y{k}")).collect(),
        phenotypes,
        kinds,
        covariate_names: z.iter().map(|_| "z".to_string()).collect(),
        covariates: z.iter().cloned().collect(),
    })?;
    Ok(Simulated { dataset, truth: truth_weights(cfg.sigma_mu), u, z })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub setting: Setting,
    pub sigma_mu: f64,
    pub reps: usize,
    pub perms: usize,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub seed: u64,
    pub n: usize,
    pub sigma_x: f64,
    pub sigma_c: f64,
    pub poisson_rate: PoissonRate,
    pub include_covariates_in_null: bool,
}

impl BenchConfig {
    pub fn new(setting: Setting, sigma_mu: f64, reps: usize, seed: u64) -> BenchConfig {
        BenchConfig {
            setting,
            sigma_mu,
            reps,
            perms: 100,
            methods: Method::ALL.to_vec(),
            alpha: 0.05,
            seed,
            n: 100,
            sigma_x: 0.5,
            sigma_c: 0.5,
            poisson_rate: PoissonRate::Exp,
            include_covariates_in_null: false,
        }
    }

    fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            setting: self.setting,
            sigma_mu: self.sigma_mu,
            n: self.n,
            sigma_x: self.sigma_x,
            sigma_c: self.sigma_c,
            poisson_rate: self.poisson_rate,
            seed,
        }
    }
}

/// Integer tallies of one method on one replicate.
#[derive(Debug, Clone, Default)]
struct Tally {
    rejections: usize,
    true_pos: usize,
    true_neg: usize,
    weight_sums: [[usize; SIM_PHENOTYPES]; GENE_BLOCKS],
}

fn run_replicate(cfg: &BenchConfig, s: usize) -> Result<Vec<Tally>> {
    let mut last_err = None;
    for attempt in 0..REPLICATE_RETRIES {
        let index = (s as u64) << 8 | attempt;
        let sim = cfg.sim_config(sub_seed(cfg.seed, Stream::Benchmark, index));
        let run = || -> Result<Vec<Tally>> {
            let (ds, truth) = simulate(&sim)?;
            let pm = assoc_pvalues(&ds)?;
            let null_seed = sub_seed(cfg.seed, Stream::Permutation, index);
            let null = build_null(&ds, cfg.perms, null_seed, cfg.include_covariates_in_null)?;
            cfg.methods
                .iter()
                .map(|&m| {
                    let out = run_method(m, &pm, &null)?;
                    let mut t = Tally::default();
                    for (j, test) in out.tests.iter().enumerate() {
                        if test.p_raw < cfg.alpha {
                            t.rejections += 1;
                        }
                        if let Some(w) = test.weight {
                            for k in 0..SIM_PHENOTYPES {
                                let est = w.is_set(k);
                                match (truth.get(j, k) == 1, est) {
                                    (true, true) => t.true_pos += 1,
                                    (false, false) => t.true_neg += 1,
                                    _ => {}
                                }
                                t.weight_sums[j / BLOCK][k] += usize::from(est);
                            }
                        }
                    }
                    Ok(t)
                })
                .collect()
        };
        match run() {
            Ok(t) => return Ok(t),
            Err(e) => {
                log::warn!("replicate {s} attempt {} failed ({e}); rerunning with a fresh seed", attempt + 1);
                last_err = Some(e);
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub rejection_rate: f64,
    /// Per-replicate rejection fractions.
    pub replicate_rates: Vec<f64>,
    /// Adaptive methods with a non-empty truth only.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// Mean selected weight per gene block and phenotype.
    pub mean_weights: Option<[[f64; SIM_PHENOTYPES]; GENE_BLOCKS]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkMetrics {
    pub setting: Setting,
    pub sigma_mu: f64,
    pub reps: usize,
    pub perms: usize,
    pub alpha: f64,
    pub methods: Vec<MethodMetrics>,
}

impl BenchmarkMetrics {
    pub fn method(&self, m: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|x| x.method == m)
    }

    /// `setting, sigma_mu, method, rejection_rate, sensitivity, specificity, reps, perms`.
    pub fn table_tsv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str(BENCH_HEADER);
            out.push('\n');
        }
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), fmt_f64);
        for m in &self.methods {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                self.setting,
                fmt_f64(self.sigma_mu),
                m.method,
                fmt_f64(m.rejection_rate),
                opt(m.sensitivity),
                opt(m.specificity),
                self.reps,
                self.perms
            ));
        }
        out
    }

    /// `setting, sigma_mu, method, genes, Y1..Y10` for the adaptive methods.
    pub fn weights_tsv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str(WEIGHTS_HEADER);
            out.push('\n');
        }
        for m in &self.methods {
            let Some(table) = &m.mean_weights else { continue };
            for (b, row) in table.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{}\tX{}-X{}", self.setting, fmt_f64(self.sigma_mu), m.method, b * BLOCK + 1, (b + 1) * BLOCK));
                for v in row {
                    out.push('\t');
                    out.push_str(&fmt_f64(*v));
                }
                out.push('\n');
            }
        }
        out
    }
}

pub const BENCH_HEADER: &str = "setting\tsigma_mu\tmethod\trejection_rate\tsensitivity\tspecificity\treps\tperms";
pub const WEIGHTS_HEADER: &str = "setting\tsigma_mu\tmethod\tgenes\tY1\tY2\tY3\tY4\tY5\tY6\tY7\tY8\tY9\tY10";

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchmarkMetrics> {
    if cfg.reps == 0 {
        return Err(Error::Precondition("need at least one replicate".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Precondition("no methods requested".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha {} outside (0, 1)", cfg.alpha)));
    }
    let tallies = (1..=cfg.reps).into_par_iter().map(|s| run_replicate(cfg, s)).collect::<Result<Vec<_>>>()?;
    let truth = truth_weights(cfg.sigma_mu);
    let positives: usize = (0..SIM_GENES).map(|j| truth.row(j).iter().filter(|v| **v == 1).count()).sum();
    let negatives = SIM_GENES * SIM_PHENOTYPES - positives;
    let s = cfg.reps as f64;
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let per: Vec<&Tally> = tallies.iter().map(|t| &t[mi]).collect();
            let rejections: usize = per.iter().map(|t| t.rejections).sum();
            let adaptive = method.is_adaptive();
            let ratio = |num: usize, den: usize| (adaptive && den > 0).then(|| num as f64 / (den as f64 * s));
            let mean_weights = adaptive.then(|| {
                let mut table = [[0.0; SIM_PHENOTYPES]; GENE_BLOCKS];
                for (b, row) in table.iter_mut().enumerate() {
                    for (k, cell) in row.iter_mut().enumerate() {
                        let total: usize = per.iter().map(|t| t.weight_sums[b][k]).sum();
                        *cell = total as f64 / (BLOCK as f64 * s);
                    }
                }
                table
            });
            MethodMetrics {
                method,
                rejection_rate: rejections as f64 / (SIM_GENES as f64 * s),
                replicate_rates: per.iter().map(|t| t.rejections as f64 / SIM_GENES as f64).collect(),
                sensitivity: ratio(per.iter().map(|t| t.true_pos).sum(), positives),
                specificity: ratio(per.iter().map(|t| t.true_neg).sum(), negatives),
                mean_weights,
            }
        })
        .collect();
    Ok(BenchmarkMetrics { setting: cfg.setting, sigma_mu: cfg.sigma_mu, reps: cfg.reps, perms: cfg.perms, alpha: cfg.alpha, methods })
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
