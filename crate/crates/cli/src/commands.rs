use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use afweight::categorize::{enrich, enrichment_tsv, merge_modules, read_gmt, tight_cluster};
use afweight::combine::{parse_methods, read_results, run_method};
use afweight::data::{format_kinds, parse_kinds, write_dataset};
use afweight::simbench::{run_benchmark, simulate, BenchConfig, PoissonRate, SimConfig};
use afweight::stability::{bootstrap_weights, comembership, variability_index, BootstrapConfig, SignedWeightTensor};
use afweight::tsv::write_file;
use afweight::{bonferroni_select, build_null, glm, load_dataset, Dataset, Method, NullStore, PValueMatrix};
use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{need, resolve, write_snapshot};
use crate::CliError;

pub const MANIFEST_FILE: &str = "dataset.json";

/// Fails with a validation error naming the artifact when `path` is absent.
pub fn existing<'a>(path: &'a Path, what: &'static str) -> Result<&'a Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { what, path: path.to_path_buf() }.into())
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn invalid(e: afweight::Error) -> anyhow::Error {
    CliError::Invalid(e.to_string()).into()
}

/// Where the three dataset tables live and how to read the phenotypes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub expression: PathBuf,
    pub phenotypes: PathBuf,
    pub covariates: Option<PathBuf>,
    pub kinds: String,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    /// Dataset manifest (as written by `simulate`); explicit file flags win.
    #[arg(long, env = "AFW_DATASET")]
    pub dataset: Option<PathBuf>,
    /// Expression TSV: gene_id, then one column per sample.
    #[arg(long, env = "AFW_EXPRESSION")]
    pub expression: Option<PathBuf>,
    /// Phenotype TSV: sample_id, then one column per phenotype.
    #[arg(long, env = "AFW_PHENOTYPES")]
    pub phenotypes: Option<PathBuf>,
    /// Covariate TSV, same layout as the phenotypes.
    #[arg(long, env = "AFW_COVARIATES")]
    pub covariates: Option<PathBuf>,
    /// Phenotype kinds in column order, e.g. `count,continuous`.
    #[arg(long, env = "AFW_KINDS")]
    pub kinds: Option<String>,
}

fn dataset_defaults(map: &mut Map<String, Value>) {
    for key in ["dataset", "expression", "phenotypes", "covariates", "kinds"] {
        map.insert(key.into(), Value::Null);
    }
}

impl DatasetArgs {
    pub fn load(&self) -> Result<Dataset> {
        let manifest_path = match &self.dataset {
            Some(p) => Some(existing(p, "dataset manifest")?.to_path_buf()),
            None if self.expression.is_none() && Path::new(MANIFEST_FILE).exists() => Some(PathBuf::from(MANIFEST_FILE)),
            None => None,
        };
        let manifest: Option<Manifest> = match &manifest_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let mut m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                m.expression = base.join(&m.expression);
                m.phenotypes = base.join(&m.phenotypes);
                m.covariates = m.covariates.map(|c| base.join(c));
                Some(m)
            }
            None => None,
        };
        let expression = self.expression.clone().or(manifest.as_ref().map(|m| m.expression.clone()));
        let phenotypes = self.phenotypes.clone().or(manifest.as_ref().map(|m| m.phenotypes.clone()));
        let covariates = self.covariates.clone().or(manifest.as_ref().and_then(|m| m.covariates.clone()));
        let kinds = self.kinds.clone().or(manifest.as_ref().map(|m| m.kinds.clone()));
        let expression = need(&expression, "expression")?;
        let phenotypes = need(&phenotypes, "phenotypes")?;
        let kinds = parse_kinds(need(&kinds, "kinds")?).map_err(invalid)?;
        existing(expression, "expression table")?;
        existing(phenotypes, "phenotype table")?;
        if let Some(c) = &covariates {
            existing(c, "covariate table")?;
        }
        let started = Instant::now();
        let ds = load_dataset(expression, phenotypes, covariates.as_deref(), &kinds)?;
        for w in afweight::data::validate(&ds, None) {
            log::warn!("{w}");
        }
        log::info!(
            "loaded p={} genes, n={} samples, K={} phenotypes, M={} covariates in {:.1?}",
            ds.n_genes(),
            ds.n_samples(),
            ds.n_phenotypes(),
            ds.n_covariates(),
            started.elapsed()
        );
        Ok(ds)
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// IA, IB, IIA, IIB, IIIA or IIIB.
    #[arg(long, env = "AFW_SETTING")]
    pub setting: Option<String>,
    #[arg(long, env = "AFW_SIGMA_MU")]
    pub sigma_mu: Option<f64>,
    #[arg(long, env = "AFW_SEED")]
    pub seed: Option<u64>,
    /// Sample size.
    #[arg(long, env = "AFW_N")]
    pub n: Option<usize>,
    #[arg(long, env = "AFW_SIGMA_X")]
    pub sigma_x: Option<f64>,
    /// Confounder scale (settings II).
    #[arg(long, env = "AFW_SIGMA_C")]
    pub sigma_c: Option<f64>,
    /// Count rate in settings III: `exp` or `identity`.
    #[arg(long, env = "AFW_POISSON_RATE")]
    pub poisson_rate: Option<String>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

fn sim_config(setting: &str, sigma_mu: f64, seed: u64, n: usize, sigma_x: f64, sigma_c: f64, rate: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::new(setting.parse().map_err(invalid)?, sigma_mu, seed);
    cfg.n = n;
    cfg.sigma_x = sigma_x;
    cfg.sigma_c = sigma_c;
    cfg.poisson_rate = rate.parse::<PoissonRate>().map_err(invalid)?;
    Ok(cfg)
}

pub fn simulate_cmd(flags: &SimulateArgs, file: &Map<String, Value>) -> Result<()> {
    let a: SimulateArgs = resolve(
        "simulate",
        json!({"setting": null, "sigma_mu": null, "seed": 1, "n": 100, "sigma_x": 0.5, "sigma_c": 0.5, "poisson_rate": "exp", "out": "."}),
        file,
        flags,
    )?;
    let cfg = sim_config(
        need(&a.setting, "setting")?,
        *need(&a.sigma_mu, "sigma-mu")?,
        a.seed.unwrap_or_default(),
        a.n.unwrap_or_default(),
        a.sigma_x.unwrap_or_default(),
        a.sigma_c.unwrap_or_default(),
        a.poisson_rate.as_deref().unwrap_or("exp"),
    )?;
    let out = out_dir(&a.out)?;
    let (ds, truth) = simulate(&cfg)?;
    let covariates = (ds.n_covariates() > 0).then(|| PathBuf::from("covariates.tsv"));
    write_dataset(&ds, &out.join("expression.tsv"), &out.join("phenotypes.tsv"), covariates.as_ref().map(|c| out.join(c)).as_deref())?;
    let manifest = Manifest { expression: "expression.tsv".into(), phenotypes: "phenotypes.tsv".into(), covariates, kinds: format_kinds(ds.kinds()) };
    write_file(&out.join(MANIFEST_FILE), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    let mut t = String::from("gene_id");
    for name in ds.phenotype_names() {
        t.push('\t');
        t.push_str(name);
    }
    t.push('\n');
    for (j, id) in ds.gene_ids().iter().enumerate() {
        t.push_str(id);
        for v in truth.row(j) {
            t.push_str(&format!("\t{v}"));
        }
        t.push('\n');
    }
    write_file(&out.join("truth_weights.tsv"), &t)?;
    write_snapshot(&out, "simulate", &a)?;
    log::info!("simulated {} (sigma_mu={}) into {}", cfg.setting, cfg.sigma_mu, out.display());
    Ok(())
}

// ------------------------------------------------------------------- assoc

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct AssocArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

pub fn assoc_cmd(flags: &AssocArgs, file: &Map<String, Value>) -> Result<()> {
    let mut defaults = Map::new();
    dataset_defaults(&mut defaults);
    defaults.insert("out".into(), json!("."));
    let a: AssocArgs = resolve("assoc", Value::Object(defaults), file, flags)?;
    let ds = a.data.load()?;
    let out = out_dir(&a.out)?;
    let started = Instant::now();
    let pm = glm::assoc_pvalues(&ds)?;
    let flagged = pm.flags.iter().filter(|f| **f != afweight::CellFlag::Ok).count();
    if flagged > 0 {
        log::warn!("{flagged} association cells carry a substituted p-value (degenerate or non-converged fits)");
    }
    write_file(&out.join("pvalues.tsv"), &pm.to_tsv())?;
    write_file(&out.join("signs.tsv"), &pm.signs_tsv())?;
    write_snapshot(&out, "assoc", &a)?;
    log::info!("association p-values for {} genes in {:.1?}", pm.n_genes(), started.elapsed());
    Ok(())
}

// -------------------------------------------------------------------- null

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct NullArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Number of permutations B.
    #[arg(long, env = "AFW_PERMS")]
    pub perms: Option<usize>,
    #[arg(long, env = "AFW_SEED")]
    pub seed: Option<u64>,
    /// Keep the covariates in the permuted-model regression.
    #[arg(long, env = "AFW_NULL_COVARIATES", num_args = 0..=1, default_missing_value = "true")]
    pub null_covariates: Option<bool>,
    /// Also write the null p-values as TSV (large).
    #[arg(long, env = "AFW_TSV", num_args = 0..=1, default_missing_value = "true")]
    pub tsv: Option<bool>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

pub fn null_cmd(flags: &NullArgs, file: &Map<String, Value>) -> Result<()> {
    let mut defaults = Map::new();
    dataset_defaults(&mut defaults);
    for (k, v) in [("perms", json!(100)), ("seed", json!(1)), ("null_covariates", json!(false)), ("tsv", json!(false)), ("out", json!("."))] {
        defaults.insert(k.into(), v);
    }
    let a: NullArgs = resolve("null", Value::Object(defaults), file, flags)?;
    let ds = a.data.load()?;
    let out = out_dir(&a.out)?;
    let perms = a.perms.unwrap_or_default();
    let started = Instant::now();
    let null = build_null(&ds, perms, a.seed.unwrap_or_default(), a.null_covariates.unwrap_or_default())?;
    null.write(&out.join("null.bin"))?;
    if a.tsv.unwrap_or_default() {
        null.write_tsv(&out.join("null.tsv"), ds.gene_ids(), ds.phenotype_names())?;
    }
    write_snapshot(&out, "null", &a)?;
    log::info!("null store B={perms} x p={} x K={} in {:.1?}", ds.n_genes(), ds.n_phenotypes(), started.elapsed());
    Ok(())
}

// ----------------------------------------------------------------- combine

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CombineArgs {
    /// Observed p-values from `assoc`.
    #[arg(long, env = "AFW_PVALUES")]
    pub pvalues: Option<PathBuf>,
    /// Null store from `null`.
    #[arg(long = "null", env = "AFW_NULL")]
    pub null_store: Option<PathBuf>,
    /// Comma list of afp, afz, fisher, minp.
    #[arg(long = "method", alias = "methods", env = "AFW_METHOD")]
    pub method: Option<String>,
    /// Family-wise level for the Bonferroni summary.
    #[arg(long, env = "AFW_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

pub fn combine_cmd(flags: &CombineArgs, file: &Map<String, Value>) -> Result<()> {
    let a: CombineArgs = resolve(
        "combine",
        json!({"pvalues": "pvalues.tsv", "null_store": "null.bin", "method": "afp,afz,fisher,minp", "alpha": 0.05, "out": "."}),
        file,
        flags,
    )?;
    let methods = parse_methods(need(&a.method, "method")?).map_err(invalid)?;
    let pm = PValueMatrix::read_tsv(existing(need(&a.pvalues, "pvalues")?, "association p-values (run `assoc`)")?)?;
    let null = NullStore::read(existing(need(&a.null_store, "null")?, "null store (run `null`)")?)?;
    let alpha = a.alpha.unwrap_or(0.05);
    let out = out_dir(&a.out)?;
    let mut text = String::new();
    for (i, &m) in methods.iter().enumerate() {
        let started = Instant::now();
        let res = run_method(m, &pm, &null)?;
        let sel = bonferroni_select(&res.p_floored(), alpha, null.n_perms()).map_err(invalid)?;
        if let Some(w) = &sel.warning {
            log::warn!("{m}: {w}");
        }
        log::info!("{m}: {} of {} genes below {:e} ({:.1?})", sel.genes.len(), pm.n_genes(), sel.threshold, started.elapsed());
        text.push_str(&res.to_tsv(&pm, i == 0));
    }
    write_file(&out.join("results.tsv"), &text)?;
    write_snapshot(&out, "combine", &a)?;
    Ok(())
}

// --------------------------------------------------------------- bootstrap

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BootstrapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Results from `combine`; genes passing Bonferroni for `--method` are resampled.
    #[arg(long, env = "AFW_RESULTS")]
    pub results: Option<PathBuf>,
    /// afp or afz.
    #[arg(long, env = "AFW_METHOD")]
    pub method: Option<String>,
    #[arg(long, env = "AFW_ALPHA")]
    pub alpha: Option<f64>,
    /// Bootstrap replicates L.
    #[arg(long, env = "AFW_BOOTS")]
    pub boots: Option<usize>,
    /// Permutations B inside each replicate.
    #[arg(long, env = "AFW_BOOT_PERMS")]
    pub boot_perms: Option<usize>,
    #[arg(long, env = "AFW_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "AFW_NULL_COVARIATES", num_args = 0..=1, default_missing_value = "true")]
    pub null_covariates: Option<bool>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

fn adaptive(method: &str) -> Result<Method> {
    let m: Method = method.parse().map_err(invalid)?;
    if !m.is_adaptive() {
        return Err(CliError::Invalid(format!("{m} selects no weights; use afp or afz")).into());
    }
    Ok(m)
}

/// Genes passing Bonferroni for `method` in a results table, in table order.
pub fn significant_genes(results: &Path, method: Method, alpha: f64, perms: usize) -> Result<Vec<String>> {
    let rows: Vec<_> = read_results(results)?.into_iter().filter(|r| r.method == method).collect();
    if rows.is_empty() {
        return Err(CliError::Invalid(format!("{} has no {method} rows", results.display())).into());
    }
    let p: Vec<f64> = rows.iter().map(|r| r.p_floored).collect();
    let sel = bonferroni_select(&p, alpha, perms).map_err(invalid)?;
    if let Some(w) = &sel.warning {
        log::warn!("{w}");
    }
    Ok(sel.genes.iter().map(|&j| rows[j].gene_id.clone()).collect())
}

pub fn bootstrap_cmd(flags: &BootstrapArgs, file: &Map<String, Value>) -> Result<()> {
    let mut defaults = Map::new();
    dataset_defaults(&mut defaults);
    for (k, v) in [
        ("results", json!("results.tsv")),
        ("method", json!("afp")),
        ("alpha", json!(0.05)),
        ("boots", json!(50)),
        ("boot_perms", json!(100)),
        ("seed", json!(1)),
        ("null_covariates", json!(false)),
        ("out", json!(".")),
    ] {
        defaults.insert(k.into(), v);
    }
    let a: BootstrapArgs = resolve("bootstrap", Value::Object(defaults), file, flags)?;
    let method = adaptive(need(&a.method, "method")?)?;
    let perms = a.boot_perms.unwrap_or(100);
    let results = existing(need(&a.results, "results")?, "combined results (run `combine`)")?;
    let genes = significant_genes(results, method, a.alpha.unwrap_or(0.05), perms)?;
    if genes.is_empty() {
        return Err(CliError::Invalid(format!("no gene passes Bonferroni for {method}; nothing to resample")).into());
    }
    let ds = a.data.load()?;
    let index: HashMap<&str, usize> = ds.gene_ids().iter().enumerate().map(|(j, g)| (g.as_str(), j)).collect();
    let selected = genes
        .iter()
        .map(|g| index.get(g.as_str()).copied().ok_or_else(|| CliError::Invalid(format!("gene {g} from the results is not in the dataset"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let out = out_dir(&a.out)?;
    let cfg = BootstrapConfig {
        replicates: a.boots.unwrap_or(50),
        permutations: perms,
        method,
        seed: a.seed.unwrap_or_default(),
        include_covariates_in_null: a.null_covariates.unwrap_or_default(),
    };
    let started = Instant::now();
    let tensor = bootstrap_weights(&ds, &cfg, &selected)?;
    let var = variability_index(&tensor).map_err(invalid)?;
    write_file(&out.join("weights_tensor.tsv"), &tensor.to_tsv())?;
    write_file(&out.join("variability.tsv"), &var.to_tsv())?;
    write_snapshot(&out, "bootstrap", &a)?;
    log::info!("{} replicates over {} genes in {:.1?}", cfg.replicates, selected.len(), started.elapsed());
    Ok(())
}

// -------------------------------------------------------------- categorize

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CategorizeArgs {
    /// Signed weight tensor from `bootstrap`.
    #[arg(long, env = "AFW_TENSOR")]
    pub tensor: Option<PathBuf>,
    #[arg(long, env = "AFW_METHOD")]
    pub method: Option<String>,
    /// Smallest module kept.
    #[arg(long, env = "AFW_MIN_SIZE")]
    pub min_size: Option<usize>,
    /// Co-membership every merge inside a module must reach.
    #[arg(long, env = "AFW_ALPHA_TIGHT")]
    pub alpha_tight: Option<f64>,
    /// Modules whose mean cross co-membership reaches this are merged.
    #[arg(long, env = "AFW_MERGE_TAU")]
    pub merge_tau: Option<f64>,
    #[arg(long, env = "AFW_MAX_MODULES")]
    pub max_modules: Option<usize>,
    /// Gene sets (GMT) to test each module against.
    #[arg(long, env = "AFW_GMT")]
    pub gmt: Option<PathBuf>,
    /// Tested genes, taken from this p-value table's gene_id column.
    #[arg(long, env = "AFW_UNIVERSE")]
    pub universe: Option<PathBuf>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

pub fn categorize_cmd(flags: &CategorizeArgs, file: &Map<String, Value>) -> Result<()> {
    let a: CategorizeArgs = resolve(
        "categorize",
        json!({
            "tensor": "weights_tensor.tsv",
            "method": "afp",
            "min_size": afweight::categorize::DEFAULT_MIN_SIZE,
            "alpha_tight": afweight::categorize::DEFAULT_ALPHA_TIGHT,
            "merge_tau": afweight::categorize::DEFAULT_MERGE_TAU,
            "max_modules": 10,
            "gmt": null,
            "universe": "pvalues.tsv",
            "out": "."
        }),
        file,
        flags,
    )?;
    let method = adaptive(need(&a.method, "method")?)?;
    let tensor = SignedWeightTensor::read_tsv(existing(need(&a.tensor, "tensor")?, "weight tensor (run `bootstrap`)")?, method)?;
    let out = out_dir(&a.out)?;
    let v = comembership(&tensor);
    let assign = tight_cluster(&v, a.min_size.unwrap_or_default(), a.alpha_tight.unwrap_or_default(), a.max_modules.unwrap_or_default()).map_err(invalid)?;
    let merged = merge_modules(&assign, &v, a.merge_tau.unwrap_or_default());
    if merged.is_empty_result() {
        log::warn!("no module reached size {} at alpha {}; every gene is scattered", a.min_size.unwrap_or_default(), a.alpha_tight.unwrap_or_default());
    }
    write_file(&out.join("comembership.tsv"), &v.to_tsv())?;
    write_file(&out.join("clusters.tsv"), &merged.to_tsv())?;
    if let Some(gmt) = &a.gmt {
        let sets = read_gmt(existing(gmt, "gene-set file")?)?;
        let universe = PValueMatrix::read_tsv(existing(need(&a.universe, "universe")?, "gene universe (p-value table)")?)?.gene_ids;
        let mut tables = Vec::new();
        for (m, genes) in merged.modules.iter().enumerate() {
            let ids: Vec<String> = genes.iter().map(|&g| merged.gene_ids[g].clone()).collect();
            tables.push((format!("M{}", m + 1), enrich(&ids, &sets, &universe).map_err(invalid)?));
        }
        write_file(&out.join("enrichment.tsv"), &enrichment_tsv(&tables))?;
    }
    write_snapshot(&out, "categorize", &a)?;
    log::info!("{} modules, {} scattered genes", merged.modules.len(), merged.scattered.len());
    Ok(())
}

// --------------------------------------------------------------- benchmark

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    #[arg(long, env = "AFW_SETTING")]
    pub setting: Option<String>,
    #[arg(long, env = "AFW_SIGMA_MU")]
    pub sigma_mu: Option<f64>,
    /// Simulated datasets S.
    #[arg(long, env = "AFW_REPS")]
    pub reps: Option<usize>,
    #[arg(long, env = "AFW_PERMS")]
    pub perms: Option<usize>,
    #[arg(long = "method", alias = "methods", env = "AFW_METHOD")]
    pub method: Option<String>,
    #[arg(long, env = "AFW_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "AFW_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "AFW_N")]
    pub n: Option<usize>,
    #[arg(long, env = "AFW_SIGMA_X")]
    pub sigma_x: Option<f64>,
    #[arg(long, env = "AFW_SIGMA_C")]
    pub sigma_c: Option<f64>,
    #[arg(long, env = "AFW_POISSON_RATE")]
    pub poisson_rate: Option<String>,
    #[arg(long, env = "AFW_NULL_COVARIATES", num_args = 0..=1, default_missing_value = "true")]
    pub null_covariates: Option<bool>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

pub fn benchmark_cmd(flags: &BenchmarkArgs, file: &Map<String, Value>) -> Result<()> {
    let a: BenchmarkArgs = resolve(
        "benchmark",
        json!({
            "setting": null, "sigma_mu": null, "reps": 100, "perms": 100, "method": "afp,afz,fisher,minp",
            "alpha": 0.05, "seed": 1, "n": 100, "sigma_x": 0.5, "sigma_c": 0.5, "poisson_rate": "exp",
            "null_covariates": false, "out": "."
        }),
        file,
        flags,
    )?;
    let sim = sim_config(
        need(&a.setting, "setting")?,
        *need(&a.sigma_mu, "sigma-mu")?,
        0,
        a.n.unwrap_or_default(),
        a.sigma_x.unwrap_or_default(),
        a.sigma_c.unwrap_or_default(),
        a.poisson_rate.as_deref().unwrap_or("exp"),
    )?;
    let mut cfg = BenchConfig::new(sim.setting, sim.sigma_mu, a.reps.unwrap_or_default(), a.seed.unwrap_or_default());
    cfg.perms = a.perms.unwrap_or_default();
    cfg.methods = parse_methods(need(&a.method, "method")?).map_err(invalid)?;
    cfg.alpha = a.alpha.unwrap_or_default();
    cfg.n = sim.n;
    cfg.sigma_x = sim.sigma_x;
    cfg.sigma_c = sim.sigma_c;
    cfg.poisson_rate = sim.poisson_rate;
    cfg.include_covariates_in_null = a.null_covariates.unwrap_or_default();
    let out = out_dir(&a.out)?;
    let started = Instant::now();
    let metrics = run_benchmark(&cfg)?;
    write_file(&out.join("benchmark.tsv"), &metrics.table_tsv(true))?;
    write_file(&out.join("mean_weights.tsv"), &metrics.weights_tsv(true))?;
    write_snapshot(&out, "benchmark", &a)?;
    log::info!("{} replicates of {} in {:.1?}", cfg.reps, cfg.setting, started.elapsed());
    Ok(())
}
