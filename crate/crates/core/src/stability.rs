//! Bootstrap stability of the adaptive weights: the signed-weight tensor,
//! the variability index and the co-membership matrix.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::combine::{afp, afz, Method};
use crate::data::{Dataset, ZERO_VARIANCE};
use crate::error::{Error, Result};
use crate::glm::assoc_pvalues;
use crate::perm::build_null;
use crate::rng::{keyed_rng, sub_seed, Stream};
use crate::tsv::{fmt_f64, Table};

/// Draws allowed per replicate before giving up on a degenerate resample.
pub const BOOTSTRAP_RETRIES: usize = 10;

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub permutations: usize,
    pub method: Method,
    pub seed: u64,
    pub include_covariates_in_null: bool,
}

/// Signed weights v = w * sign(theta), L x p' x K, entries in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedWeightTensor {
    pub method: Method,
    pub gene_ids: Vec<String>,
    pub phenotype_names: Vec<String>,
    replicates: usize,
    values: Vec<i8>,
}

impl SignedWeightTensor {
    /// `values[l][j][k]`.
    pub fn from_values(method: Method, gene_ids: Vec<String>, phenotype_names: Vec<String>, values: &[Vec<Vec<i8>>]) -> Result<Self> {
        let (p, k) = (gene_ids.len(), phenotype_names.len());
        if values.is_empty() {
            return Err(Error::Shape("tensor needs at least one replicate".into()));
        }
        if values.iter().any(|l| l.len() != p || l.iter().any(|r| r.len() != k)) {
            return Err(Error::Shape(format!("every replicate must be {p} x {k}")));
        }
        let flat: Vec<i8> = values.iter().flatten().flatten().copied().collect();
        if flat.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::Precondition("signed weights must be -1, 0 or 1".into()));
        }
        Ok(SignedWeightTensor { method, gene_ids, phenotype_names, replicates: values.len(), values: flat })
    }

    pub fn n_replicates(&self) -> usize {
        self.replicates
    }
    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }
    pub fn n_phenotypes(&self) -> usize {
        self.phenotype_names.len()
    }
    pub fn row(&self, l: usize, j: usize) -> &[i8] {
        let k = self.n_phenotypes();
        let start = (l * self.n_genes() + j) * k;
        &self.values[start..start + k]
    }

    /// `l, gene_id, k, v` with 1-based l and k.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("l\tgene_id\tk\tv\n");
        for l in 0..self.replicates {
            for (j, id) in self.gene_ids.iter().enumerate() {
                for (c, v) in self.row(l, j).iter().enumerate() {
                    out.push_str(&format!("{}\t{id}\t{}\t{v}\n", l + 1, c + 1));
                }
            }
        }
        out
    }

    pub fn read_tsv(path: &Path, method: Method) -> Result<SignedWeightTensor> {
        let table = Table::read(path)?;
        if table.header != ["l", "gene_id", "k", "v"] {
            return Err(Error::Format { file: table.file.clone(), line: 1, message: "expected header l, gene_id, k, v".into() });
        }
        let mut genes: Vec<String> = Vec::new();
        let mut gene_index: HashMap<String, usize> = HashMap::new();
        let mut cells = Vec::with_capacity(table.rows.len());
        let (mut max_l, mut max_k) = (0usize, 0usize);
        for (line, row) in &table.rows {
            let int = |col: usize, name: &str| -> Result<i64> {
                row[col].trim().parse::<i64>().map_err(|_| Error::NonNumericCell {
                    file: table.file.clone(),
                    line: *line,
                    column: name.into(),
                    value: row[col].clone(),
                })
            };
            let (l, k, v) = (int(0, "l")?, int(2, "k")?, int(3, "v")?);
            if l < 1 || k < 1 || !(-1..=1).contains(&v) {
                return Err(Error::Format { file: table.file.clone(), line: *line, message: "l and k are 1-based, v is -1, 0 or 1".into() });
            }
            let next = genes.len();
            let j = *gene_index.entry(row[1].clone()).or_insert_with(|| {
                genes.push(row[1].clone());
                next
            });
            max_l = max_l.max(l as usize);
            max_k = max_k.max(k as usize);
            cells.push((*line, l as usize - 1, j, k as usize - 1, v as i8));
        }
        let p = genes.len();
        let mut values = vec![vec![vec![0i8; max_k]; p]; max_l];
        let mut seen = vec![false; max_l * p * max_k];
        for (line, l, j, k, v) in cells {
            let idx = (l * p + j) * max_k + k;
            if seen[idx] {
                return Err(Error::Format { file: table.file.clone(), line, message: "duplicate (l, gene_id, k) entry".into() });
            }
            seen[idx] = true;
            values[l][j][k] = v;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format { file: table.file.clone(), line: 0, message: "tensor is missing (l, gene_id, k) entries".into() });
        }
        let names = (1..=max_k).map(|k| format!("Y{k}")).collect();
        SignedWeightTensor::from_values(method, genes, names, &values)
    }
}

fn has_constant_covariate(ds: &Dataset) -> bool {
    let n = ds.n_samples() as f64;
    (0..ds.n_covariates()).any(|m| {
        let z = ds.covariate(m);
        let mean = z.iter().sum::<f64>() / n;
        z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n < ZERO_VARIANCE
    })
}

/// One bootstrap replicate: signed weight rows for `genes`.
fn replicate(ds: &Dataset, cfg: &BootstrapConfig, l: usize, genes: &[usize]) -> Result<Vec<Vec<i8>>> {
    let n = ds.n_samples();
    for attempt in 0..BOOTSTRAP_RETRIES {
        let mut rng = keyed_rng(cfg.seed, Stream::Bootstrap, ((l as u64) << 8) | attempt as u64);
        let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let rs = ds.resample(&indices);
        if has_constant_covariate(&rs) {
            log::info!("bootstrap {l}: constant covariate on draw {}, redrawing", attempt + 1);
            continue;
        }
        let pm = match assoc_pvalues(&rs) {
            Err(Error::RankDeficient(msg)) => {
                log::info!("bootstrap {l}: {msg}, redrawing");
                continue;
            }
            other => other?,
        };
        let null_seed = sub_seed(cfg.seed, Stream::BootstrapNull, l as u64);
        let null = match build_null(&rs, cfg.permutations, null_seed, cfg.include_covariates_in_null) {
            Err(Error::RankDeficient(_)) => continue,
            other => other?,
        };
        let out = match cfg.method {
            Method::AFp => afp(&pm, &null)?,
            Method::AFz => afz(&pm, &null)?,
            other => return Err(Error::Precondition(format!("bootstrap weights need an adaptive method, not {other}"))),
        };
        return Ok(genes
            .iter()
            .map(|&j| {
                let w = out.tests[j].weight.expect("adaptive methods select a weight");
                pm.sign_row(j).iter().enumerate().map(|(c, &s)| if w.is_set(c) { s } else { 0 }).collect()
            })
            .collect());
    }
    Err(Error::DegenerateBootstrap { replicate: l, attempts: BOOTSTRAP_RETRIES })
}

/// Reruns association, null and the adaptive test on L sample-level
/// resamples and records the signed weights of `genes`.
pub fn bootstrap_weights(ds: &Dataset, cfg: &BootstrapConfig, genes: &[usize]) -> Result<SignedWeightTensor> {
    if cfg.replicates < 2 {
        return Err(Error::Precondition("need at least 2 bootstrap replicates".into()));
    }
    if genes.is_empty() {
        return Err(Error::Precondition("empty gene subset".into()));
    }
    if let Some(&j) = genes.iter().find(|&&j| j >= ds.n_genes()) {
        return Err(Error::Precondition(format!("gene index {j} out of range")));
    }
    if !cfg.method.is_adaptive() {
        return Err(Error::Precondition(format!("bootstrap weights need an adaptive method, not {}", cfg.method)));
    }
    let values = (1..=cfg.replicates).into_par_iter().map(|l| replicate(ds, cfg, l, genes)).collect::<Result<Vec<_>>>()?;
    SignedWeightTensor::from_values(cfg.method, genes.iter().map(|&j| ds.gene_ids()[j].clone()).collect(), ds.phenotype_names().to_vec(), &values)
}

/// 4 * population variance over replicates of |v|, p' x K.
#[derive(Debug, Clone, PartialEq)]
pub struct VariabilityMatrix {
    pub gene_ids: Vec<String>,
    pub phenotype_names: Vec<String>,
    pub values: Vec<f64>,
}

impl VariabilityMatrix {
    pub fn row(&self, j: usize) -> &[f64] {
        let k = self.phenotype_names.len();
        &self.values[j * k..(j + 1) * k]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene_id");
        for name in &self.phenotype_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (j, id) in self.gene_ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(j) {
                out.push('\t');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn variability_index(t: &SignedWeightTensor) -> Result<VariabilityMatrix> {
    let l = t.n_replicates();
    if l < 2 {
        return Err(Error::Precondition("variability needs at least 2 replicates".into()));
    }
    let (p, k) = (t.n_genes(), t.n_phenotypes());
    let mut values = vec![0.0; p * k];
    for j in 0..p {
        for c in 0..k {
            // For 0/1 data the population variance is q (1 - q).
            let ones = (0..l).filter(|&r| t.row(r, j)[c] != 0).count();
            let q = ones as f64 / l as f64;
            values[j * k + c] = 4.0 * q * (1.0 - q);
        }
    }
    Ok(VariabilityMatrix { gene_ids: t.gene_ids.clone(), phenotype_names: t.phenotype_names.clone(), values })
}

/// Fraction of replicates in which two genes carry identical signed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CoMembershipMatrix {
    pub gene_ids: Vec<String>,
    values: Vec<f64>,
}

impl CoMembershipMatrix {
    pub fn from_values(gene_ids: Vec<String>, values: Vec<f64>) -> Result<CoMembershipMatrix> {
        let p = gene_ids.len();
        if values.len() != p * p {
            return Err(Error::Shape(format!("co-membership matrix must be {p} x {p}")));
        }
        for i in 0..p {
            if values[i * p + i] != 1.0 {
                return Err(Error::Precondition(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let v = values[i * p + j];
                if v != values[j * p + i] || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Precondition(format!("entry ({i}, {j}) breaks symmetry or [0, 1]")));
                }
            }
        }
        Ok(CoMembershipMatrix { gene_ids, values })
    }

    pub fn len(&self) -> usize {
        self.gene_ids.len()
    }
    pub fn is_empty(&self) -> bool {
        self.gene_ids.is_empty()
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows and columns reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> CoMembershipMatrix {
        let p = order.len();
        let mut values = vec![0.0; p * p];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                values[a * p + b] = self.get(i, j);
            }
        }
        CoMembershipMatrix { gene_ids: order.iter().map(|&i| self.gene_ids[i].clone()).collect(), values }
    }

    /// Dense TSV with a `gene_id` header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene_id");
        for id in &self.gene_ids {
            out.push('\t');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.gene_ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.len() {
                out.push('\t');
                out.push_str(&fmt_f64(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn read_tsv(path: &Path) -> Result<CoMembershipMatrix> {
        let table = Table::read(path)?;
        table.expect_header_prefix("gene_id")?;
        let ids: Vec<String> = table.header[1..].to_vec();
        if table.rows.len() != ids.len() {
            return Err(Error::Format { file: table.file.clone(), line: 1, message: format!("{} columns but {} rows", ids.len(), table.rows.len()) });
        }
        let mut values = Vec::with_capacity(ids.len() * ids.len());
        for (i, (line, row)) in table.rows.iter().enumerate() {
            if row[0] != ids[i] {
                return Err(Error::Format {
                    file: table.file.clone(),
                    line: *line,
                    message: format!("row {} is {} but column {} is {}", i + 1, row[0], i + 1, ids[i]),
                });
            }
            for (c, cell) in row[1..].iter().enumerate() {
                values.push(table.number(*line, c + 1, cell)?);
            }
        }
        CoMembershipMatrix::from_values(ids, values)
    }
}

pub fn comembership(t: &SignedWeightTensor) -> CoMembershipMatrix {
    let (l, p) = (t.n_replicates(), t.n_genes());
    // Two bits per phenotype turn a signed row into one comparable key.
    let keys: Vec<Vec<u32>> = (0..l).map(|r| (0..p).map(|j| t.row(r, j).iter().fold(0u32, |acc, &v| acc << 2 | (v + 1) as u32)).collect()).collect();
    let mut counts = vec![0u32; p * p];
    for row_keys in &keys {
        for i in 0..p {
            for j in 0..i {
                if row_keys[i] == row_keys[j] {
                    counts[i * p + j] += 1;
                }
            }
        }
    }
    let mut values = vec![1.0; p * p];
    for i in 0..p {
        for j in 0..i {
            let v = counts[i * p + j] as f64 / l as f64;
            values[i * p + j] = v;
            values[j * p + i] = v;
        }
    }
    CoMembershipMatrix { gene_ids: t.gene_ids.clone(), values }
}
