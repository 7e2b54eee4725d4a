//! Typed containers for the expression / phenotype / covariate triple and
//! the per-cell association p-values derived from it.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsv::{fmt_f64, write_file, Table};

/// Hard cap on the number of phenotypes; keeps the 2^K - 1 weight space below 32,768.
pub const MAX_PHENOTYPES: usize = 15;
/// Above this many phenotypes the exhaustive weight search gets expensive.
pub const RECOMMENDED_MAX_PHENOTYPES: usize = 10;
/// Rows with variance below this are reported as zero-variance genes.
pub const ZERO_VARIANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhenotypeKind {
    Continuous,
    Count,
}

impl FromStr for PhenotypeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" | "gaussian" => Ok(PhenotypeKind::Continuous),
            "count" | "poisson" => Ok(PhenotypeKind::Count),
            other => Err(Error::Precondition(format!("unknown phenotype kind {other:?} (expected continuous or count)"))),
        }
    }
}

impl fmt::Display for PhenotypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhenotypeKind::Continuous => f.write_str("continuous"),
            PhenotypeKind::Count => f.write_str("count"),
        }
    }
}

/// Parses a comma list such as `count,continuous,continuous`.
pub fn parse_kinds(list: &str) -> Result<Vec<PhenotypeKind>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

pub fn format_kinds(kinds: &[PhenotypeKind]) -> String {
    kinds.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Expression (p x n), phenotypes (n x K) and covariates (n x M) over one
/// shared, ordered set of samples.
///
/// Storage is flat: a gene's n values are contiguous, as are a phenotype's
/// and a covariate's, which is the access pattern of every per-cell fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    expression: Vec<f64>,
    phenotypes: Vec<f64>,
    covariates: Vec<f64>,
    kinds: Vec<PhenotypeKind>,
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    phenotype_names: Vec<String>,
    covariate_names: Vec<String>,
}

/// Column-oriented constructor input for [`Dataset::new`].
#[derive(Debug, Clone, Default)]
pub struct DatasetParts {
    pub gene_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    /// One vector of n values per gene.
    pub expression: Vec<Vec<f64>>,
    pub phenotype_names: Vec<String>,
    /// One vector of n values per phenotype.
    pub phenotypes: Vec<Vec<f64>>,
    pub kinds: Vec<PhenotypeKind>,
    pub covariate_names: Vec<String>,
    /// One vector of n values per covariate.
    pub covariates: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(parts: DatasetParts) -> Result<Dataset> {
        let n = parts.sample_ids.len();
        let p = parts.gene_ids.len();
        let k = parts.phenotype_names.len();
        let m = parts.covariate_names.len();
        if k > MAX_PHENOTYPES {
            return Err(Error::TooManyPhenotypes(k));
        }
        if k == 0 {
            return Err(Error::InvalidDataset("at least one phenotype is required".into()));
        }
        if p < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 genes, found {p}")));
        }
        if n < m + 3 {
            return Err(Error::InvalidDataset(format!("need at least M + 3 = {} samples, found {n}", m + 3)));
        }
        if parts.kinds.len() != k {
            return Err(Error::InvalidDataset(format!("{} phenotype kinds given for {k} phenotypes", parts.kinds.len())));
        }
        if parts.expression.len() != p || parts.phenotypes.len() != k || parts.covariates.len() != m {
            return Err(Error::Shape("column count does not match the id lists".into()));
        }
        let columns = parts.expression.iter().chain(&parts.phenotypes).chain(&parts.covariates);
        for col in columns {
            if col.len() != n {
                return Err(Error::Shape(format!("column of length {} for {n} samples", col.len())));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite value".into()));
            }
        }
        for ((name, col), kind) in parts.phenotype_names.iter().zip(&parts.phenotypes).zip(&parts.kinds) {
            if *kind == PhenotypeKind::Count {
                if let Some(&bad) = col.iter().find(|v| **v < 0.0 || v.fract() != 0.0) {
                    return Err(Error::KindViolation { phenotype: name.clone(), value: bad });
                }
            }
        }
        Ok(Dataset {
            expression: parts.expression.concat(),
            phenotypes: parts.phenotypes.concat(),
            covariates: parts.covariates.concat(),
            kinds: parts.kinds,
            gene_ids: parts.gene_ids,
            sample_ids: parts.sample_ids,
            phenotype_names: parts.phenotype_names,
            covariate_names: parts.covariate_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }
    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }
    pub fn n_phenotypes(&self) -> usize {
        self.phenotype_names.len()
    }
    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn gene(&self, j: usize) -> &[f64] {
        let n = self.n_samples();
        &self.expression[j * n..(j + 1) * n]
    }
    pub fn phenotype(&self, k: usize) -> &[f64] {
        let n = self.n_samples();
        &self.phenotypes[k * n..(k + 1) * n]
    }
    pub fn covariate(&self, m: usize) -> &[f64] {
        let n = self.n_samples();
        &self.covariates[m * n..(m + 1) * n]
    }
    pub fn covariate_columns(&self) -> Vec<&[f64]> {
        (0..self.n_covariates()).map(|m| self.covariate(m)).collect()
    }

    pub fn kinds(&self) -> &[PhenotypeKind] {
        &self.kinds
    }
    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }
    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }
    pub fn phenotype_names(&self) -> &[String] {
        &self.phenotype_names
    }
    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Sample-level resample (rows may repeat) applied jointly to X, Y and Z.
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        let pick = |col: &[f64]| indices.iter().map(|&i| col[i]).collect::<Vec<_>>();
        let n = self.n_samples();
        let regather = |flat: &[f64]| -> Vec<f64> { flat.chunks(n).flat_map(&pick).collect() };
        Dataset {
            expression: regather(&self.expression),
            phenotypes: regather(&self.phenotypes),
            covariates: regather(&self.covariates),
            kinds: self.kinds.clone(),
            gene_ids: self.gene_ids.clone(),
            sample_ids: indices.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            phenotype_names: self.phenotype_names.clone(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Copy of the dataset restricted to (and ordered by) `genes`.
    pub fn select_genes(&self, genes: &[usize]) -> Dataset {
        Dataset {
            expression: genes.iter().flat_map(|&j| self.gene(j).to_vec()).collect(),
            gene_ids: genes.iter().map(|&j| self.gene_ids[j].clone()).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetWarning {
    ZeroVarianceGene { gene_id: String, variance: f64 },
    ManyPhenotypes { k: usize },
    Resolution { alpha: f64, permutations: usize },
}

impl fmt::Display for DatasetWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetWarning::ZeroVarianceGene { gene_id, variance } => {
                write!(f, "zero-variance gene {gene_id} (variance {variance:e})")
            }
            DatasetWarning::ManyPhenotypes { k } => write!(
                f,
                "{k} phenotypes: the number of phenotypes is recommended to be below \
                 {RECOMMENDED_MAX_PHENOTYPES}; the weight search visits 2^K - 1 subsets"
            ),
            DatasetWarning::Resolution { alpha, permutations } => write!(
                f,
                "Bonferroni threshold alpha/p with alpha = {alpha} is below the permutation \
                 resolution 1/(B*p) for B = {permutations}; use at least {} permutations",
                (1.0 / alpha).ceil()
            ),
        }
    }
}

/// Significance target checked against the permutation resolution.
#[derive(Debug, Clone, Copy)]
pub struct SignificanceTarget {
    pub alpha: f64,
    pub permutations: usize,
}

/// Non-fatal data checks.
pub fn validate(dataset: &Dataset, target: Option<SignificanceTarget>) -> Vec<DatasetWarning> {
    let mut warnings = Vec::new();
    let n = dataset.n_samples() as f64;
    for (j, id) in dataset.gene_ids().iter().enumerate() {
        let x = dataset.gene(j);
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var < ZERO_VARIANCE {
            warnings.push(DatasetWarning::ZeroVarianceGene { gene_id: id.clone(), variance: var });
        }
    }
    let k = dataset.n_phenotypes();
    if k > RECOMMENDED_MAX_PHENOTYPES {
        warnings.push(DatasetWarning::ManyPhenotypes { k });
    }
    if let Some(t) = target {
        // alpha / p < 1 / (B p)  <=>  alpha * B < 1
        if t.alpha * (t.permutations as f64) < 1.0 {
            warnings.push(DatasetWarning::Resolution { alpha: t.alpha, permutations: t.permutations });
        }
    }
    warnings
}

struct SampleTable {
    names: Vec<String>,
    /// sample id -> row values
    rows: HashMap<String, (usize, Vec<f64>)>,
    order: Vec<String>,
}

fn read_sample_table(path: &Path) -> Result<SampleTable> {
    let table = Table::read(path)?;
    table.expect_header_prefix("sample_id")?;
    let names = table.header[1..].to_vec();
    let mut rows = HashMap::new();
    let mut order = Vec::new();
    for (line, cells) in &table.rows {
        let id = cells[0].clone();
        let values = cells[1..].iter().enumerate().map(|(c, cell)| table.number(*line, c + 1, cell)).collect::<Result<Vec<_>>>()?;
        if rows.insert(id.clone(), (*line, values)).is_some() {
            return Err(Error::Format { file: table.file.clone(), line: *line, message: format!("duplicate sample id {id:?}") });
        }
        order.push(id);
    }
    Ok(SampleTable { names, rows, order })
}

fn align(table: SampleTable, samples: &[String], file: &Path, expression_file: &Path) -> Result<Vec<Vec<f64>>> {
    let in_expr: HashSet<&String> = samples.iter().collect();
    if let Some(extra) = table.order.iter().find(|s| !in_expr.contains(s)) {
        return Err(Error::MissingSample { sample: extra.clone(), present_in: file.display().to_string(), absent_from: expression_file.display().to_string() });
    }
    let mut columns = vec![Vec::with_capacity(samples.len()); table.names.len()];
    for s in samples {
        let (_, values) = table.rows.get(s).ok_or_else(|| Error::MissingSample {
            sample: s.clone(),
            present_in: expression_file.display().to_string(),
            absent_from: file.display().to_string(),
        })?;
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(*v);
        }
    }
    Ok(columns)
}

/// Reads the expression, phenotype and (optional) covariate TSVs, re-ordering
/// phenotype and covariate rows to the expression header's sample order.
pub fn load_dataset(expression_path: &Path, phenotype_path: &Path, covariate_path: Option<&Path>, kinds: &[PhenotypeKind]) -> Result<Dataset> {
    let expr = Table::read(expression_path)?;
    expr.expect_header_prefix("gene_id")?;
    let sample_ids = expr.header[1..].to_vec();
    let mut seen = HashSet::new();
    for s in &sample_ids {
        if !seen.insert(s) {
            return Err(Error::Format { file: expr.file.clone(), line: 1, message: format!("duplicate sample id {s:?}") });
        }
    }
    let mut gene_ids = Vec::with_capacity(expr.rows.len());
    let mut expression = Vec::with_capacity(expr.rows.len());
    for (line, cells) in &expr.rows {
        gene_ids.push(cells[0].clone());
        let row = cells[1..].iter().enumerate().map(|(c, cell)| expr.number(*line, c + 1, cell)).collect::<Result<Vec<_>>>()?;
        expression.push(row);
    }

    let pheno = read_sample_table(phenotype_path)?;
    if pheno.names.len() > MAX_PHENOTYPES {
        return Err(Error::TooManyPhenotypes(pheno.names.len()));
    }
    if pheno.names.len() != kinds.len() {
        return Err(Error::InvalidDataset(format!("{} phenotype kinds given for {} phenotype columns", kinds.len(), pheno.names.len())));
    }
    let phenotype_names = pheno.names.clone();
    let phenotypes = align(pheno, &sample_ids, phenotype_path, expression_path)?;

    let (covariate_names, covariates) = match covariate_path {
        Some(path) => {
            let cov = read_sample_table(path)?;
            let names = cov.names.clone();
            (names, align(cov, &sample_ids, path, expression_path)?)
        }
        None => (Vec::new(), Vec::new()),
    };

    Dataset::new(DatasetParts { gene_ids, sample_ids, expression, phenotype_names, phenotypes, kinds: kinds.to_vec(), covariate_names, covariates })
}

pub fn expression_tsv(ds: &Dataset) -> String {
    let mut out = String::from("gene_id");
    for s in ds.sample_ids() {
        out.push('\t');
        out.push_str(s);
    }
    out.push('\n');
    for (j, id) in ds.gene_ids().iter().enumerate() {
        out.push_str(id);
        for v in ds.gene(j) {
            out.push('\t');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

fn sample_tsv(ds: &Dataset, names: &[String], column: impl Fn(usize) -> Vec<f64>) -> String {
    let mut out = String::from("sample_id");
    for name in names {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    let cols: Vec<Vec<f64>> = (0..names.len()).map(column).collect();
    for (i, s) in ds.sample_ids().iter().enumerate() {
        out.push_str(s);
        for col in &cols {
            out.push('\t');
            out.push_str(&fmt_f64(col[i]));
        }
        out.push('\n');
    }
    out
}

pub fn phenotype_tsv(ds: &Dataset) -> String {
    sample_tsv(ds, ds.phenotype_names(), |k| ds.phenotype(k).to_vec())
}

pub fn covariate_tsv(ds: &Dataset) -> String {
    sample_tsv(ds, ds.covariate_names(), |m| ds.covariate(m).to_vec())
}

/// Writes the dataset in the same three-file layout `load_dataset` reads.
/// The covariate file is only written when M > 0.
pub fn write_dataset(ds: &Dataset, expression_path: &Path, phenotype_path: &Path, covariate_path: Option<&Path>) -> Result<()> {
    write_file(expression_path, &expression_tsv(ds))?;
    write_file(phenotype_path, &phenotype_tsv(ds))?;
    if let Some(path) = covariate_path {
        if ds.n_covariates() > 0 {
            write_file(path, &covariate_tsv(ds))?;
        }
    }
    Ok(())
}

/// Why a cell of the association matrix carries a substituted value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellFlag {
    #[default]
    Ok,
    /// Perfect fit; p reported at the floor.
    DegenerateResidual,
    /// |theta| beyond the separation bound; p reported at the floor.
    Separation,
    /// IRLS hit the iteration cap; best iterate reported.
    NotConverged,
    /// Response has zero variance; p = 1 and sign 0.
    ConstantResponse,
    /// The fit failed; p = 1 and sign 0.
    Failed,
}

/// Observed association p-values p_jk with the sign of each fitted
/// coefficient. Row-major p x K.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueMatrix {
    pub gene_ids: Vec<String>,
    pub phenotype_names: Vec<String>,
    pub values: Vec<f64>,
    pub signs: Vec<i8>,
    pub flags: Vec<CellFlag>,
}

impl PValueMatrix {
    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }
    pub fn n_phenotypes(&self) -> usize {
        self.phenotype_names.len()
    }
    pub fn row(&self, j: usize) -> &[f64] {
        let k = self.n_phenotypes();
        &self.values[j * k..(j + 1) * k]
    }
    pub fn sign_row(&self, j: usize) -> &[i8] {
        let k = self.n_phenotypes();
        &self.signs[j * k..(j + 1) * k]
    }

    /// Builds a matrix from raw rows (no flags); used for hand-made inputs.
    pub fn from_rows(rows: &[Vec<f64>], signs: Option<&[Vec<i8>]>) -> Result<PValueMatrix> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("ragged or empty p-value rows".into()));
        }
        if rows.iter().flatten().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return Err(Error::Precondition("p-values must lie in (0, 1]".into()));
        }
        let signs = match signs {
            Some(s) => s.concat(),
            None => vec![1; rows.len() * k],
        };
        Ok(PValueMatrix {
            gene_ids: (1..=rows.len()).map(|j| format!("g{j}")).collect(),
            phenotype_names: (1..=k).map(|c| format!("Y{c}")).collect(),
            values: rows.concat(),
            signs,
            flags: vec![CellFlag::Ok; rows.len() * k],
        })
    }

    /// `gene_id`, K p-value columns, then K sign columns.
    pub fn to_tsv(&self) -> String {
        let k = self.n_phenotypes();
        let mut out = String::from("gene_id");
        for name in &self.phenotype_names {
            out.push_str(&format!("\tp_{name}"));
        }
        for name in &self.phenotype_names {
            out.push_str(&format!("\tsign_{name}"));
        }
        out.push('\n');
        for (j, id) in self.gene_ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(j) {
                out.push('\t');
                out.push_str(&fmt_f64(*v));
            }
            for s in &self.signs[j * k..(j + 1) * k] {
                out.push_str(&format!("\t{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn signs_tsv(&self) -> String {
        let mut out = String::from("gene_id");
        for name in &self.phenotype_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (j, id) in self.gene_ids.iter().enumerate() {
            out.push_str(id);
            for s in self.sign_row(j) {
                out.push_str(&format!("\t{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn read_tsv(path: &Path) -> Result<PValueMatrix> {
        let table = Table::read(path)?;
        table.expect_header_prefix("gene_id")?;
        let width = table.header.len() - 1;
        let bad_header = || Error::Format { file: table.file.clone(), line: 1, message: "expected gene_id, p_<name>..., sign_<name>... columns".into() };
        if width == 0 || width % 2 != 0 {
            return Err(bad_header());
        }
        let k = width / 2;
        let mut phenotype_names = Vec::with_capacity(k);
        for c in 0..k {
            let name = table.header[1 + c].strip_prefix("p_").ok_or_else(bad_header)?;
            if table.header[1 + k + c].strip_prefix("sign_") != Some(name) {
                return Err(bad_header());
            }
            phenotype_names.push(name.to_string());
        }
        let mut gene_ids = Vec::new();
        let mut values = Vec::new();
        let mut signs = Vec::new();
        for (line, cells) in &table.rows {
            gene_ids.push(cells[0].clone());
            for c in 0..k {
                let v = table.number(*line, 1 + c, &cells[1 + c])?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::Format { file: table.file.clone(), line: *line, message: format!("p-value {v} outside (0, 1]") });
                }
                values.push(v);
            }
            for c in 0..k {
                let s = table.number(*line, 1 + k + c, &cells[1 + k + c])?;
                if ![-1.0, 0.0, 1.0].contains(&s) {
                    return Err(Error::Format { file: table.file.clone(), line: *line, message: format!("sign {s} not in {{-1, 0, 1}}") });
                }
                signs.push(s as i8);
            }
        }
        let cells = values.len();
        Ok(PValueMatrix { gene_ids, phenotype_names, values, signs, flags: vec![CellFlag::Ok; cells] })
    }
}
