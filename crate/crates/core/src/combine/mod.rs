//! Adaptive weighted combination of per-phenotype p-values (AFp and AFz)
//! against a pooled permutation null, the Fisher and minP baselines on the
//! same null, and Bonferroni gene selection.
//!
//! Weighted statistics are accumulated in fixed point (see [`score_of`]) so
//! that walking the weight space in Gray-code order, one phenotype at a
//! time, gives bit-identical values to summing every mask from scratch.
//! That exactness is what lets the mask sequence be split across workers
//! without changing any result.

mod weights;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use weights::{enumerate_weights, weighted_stat, WeightVector};

use crate::data::PValueMatrix;
use crate::error::{Error, Result};
use crate::glm::P_FLOOR;
use crate::perm::NullStore;
use crate::tsv::{fmt_f64, Table};

/// Fixed-point scale for -ln p. With p floored at 1e-300 a single term is
/// below 691 * 2^48 and a 15-term sum stays inside i64.
const SCORE_SCALE: f64 = (1u64 << 48) as f64;

/// -ln p in fixed point.
pub fn score_of(p: f64) -> i64 {
    let p = p.clamp(P_FLOOR, 1.0);
    (-p.ln() * SCORE_SCALE).round() as i64
}

pub fn score_to_f64(s: i64) -> f64 {
    s as f64 / SCORE_SCALE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "afp")]
    AFp,
    #[serde(rename = "afz")]
    AFz,
    #[serde(rename = "fisher")]
    Fisher,
    #[serde(rename = "minp")]
    MinP,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AFp, Method::AFz, Method::Fisher, Method::MinP];

    pub fn is_adaptive(self) -> bool {
        matches!(self, Method::AFp | Method::AFz)
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "afp" => Ok(Method::AFp),
            "afz" => Ok(Method::AFz),
            "fisher" => Ok(Method::Fisher),
            "minp" => Ok(Method::MinP),
            other => Err(Error::Precondition(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::AFp => "AFp",
            Method::AFz => "AFz",
            Method::Fisher => "Fisher",
            Method::MinP => "minP",
        })
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Per-gene outcome of one combination method.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneTest {
    /// AFp: min_w p_U; AFz: max_w u'; Fisher: -2 sum ln p; minP: min_k p.
    pub statistic: f64,
    /// Permutation p-value exactly as counted; may be 0.
    pub p_raw: f64,
    /// `p_raw`, with 0 replaced by 1 / (B p + 1).
    pub p_floored: f64,
    pub floor_flag: bool,
    /// Selected weight (adaptive methods only).
    pub weight: Option<WeightVector>,
    /// Observed U at the selected weight (adaptive methods only).
    pub u_at_weight: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CombineOutput {
    pub method: Method,
    pub gene_ids: Vec<String>,
    pub tests: Vec<GeneTest>,
    /// Statistic of every pooled null row, b-major (index b * p + j).
    pub null_statistics: Vec<f64>,
    /// B * p.
    pub pooled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionWarning {
    pub threshold: f64,
    pub resolution: f64,
}

impl fmt::Display for ResolutionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "significance threshold {:e} is below the permutation resolution 1/(B*p) = {:e}", self.threshold, self.resolution)
    }
}

impl CombineOutput {
    pub fn p_values(&self) -> Vec<f64> {
        self.tests.iter().map(|t| t.p_raw).collect()
    }

    pub fn p_floored(&self) -> Vec<f64> {
        self.tests.iter().map(|t| t.p_floored).collect()
    }

    pub fn resolution_warning(&self, threshold: f64) -> Option<ResolutionWarning> {
        let resolution = 1.0 / self.pooled as f64;
        (threshold < resolution).then_some(ResolutionWarning { threshold, resolution })
    }

    /// `gene_id, method, statistic, p_raw, p_floored, weight_mask, weight_bits, signs`
    /// (with header when `header`); `signs` are the signed weights
    /// w_k * sign(theta_k) written as `+`, `-`, `0`.
    pub fn to_tsv(&self, signs: &PValueMatrix, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str(RESULTS_HEADER);
            out.push('\n');
        }
        for (j, (id, t)) in self.gene_ids.iter().zip(&self.tests).enumerate() {
            let (mask, bits, signed) = match t.weight {
                Some(w) => {
                    let s: String = signs
                        .sign_row(j)
                        .iter()
                        .enumerate()
                        .map(|(k, &s)| match (w.is_set(k), s) {
                            (true, 1) => '+',
                            (true, -1) => '-',
                            _ => '0',
                        })
                        .collect();
                    (w.mask().to_string(), w.to_string(), s)
                }
                None => ("NA".into(), "NA".into(), "NA".into()),
            };
            out.push_str(&format!(
                "{id}\t{}\t{}\t{}\t{}\t{mask}\t{bits}\t{signed}\n",
                self.method,
                fmt_f64(t.statistic),
                fmt_f64(t.p_raw),
                fmt_f64(t.p_floored),
            ));
        }
        out
    }
}

pub const RESULTS_HEADER: &str = "gene_id\tmethod\tstatistic\tp_raw\tp_floored\tweight_mask\tweight_bits\tsigns";

/// One parsed row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub gene_id: String,
    pub method: Method,
    pub statistic: f64,
    pub p_raw: f64,
    pub p_floored: f64,
    pub weight: Option<WeightVector>,
}

/// Reads a table written by [`CombineOutput::to_tsv`]; rows of several
/// methods may be mixed.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let table = Table::read(path)?;
    let expected: Vec<&str> = RESULTS_HEADER.split('\t').collect();
    if table.header != expected {
        return Err(Error::Format { file: table.file.clone(), line: 1, message: format!("expected header {}", RESULTS_HEADER.replace('\t', ", ")) });
    }
    let bad = |line: usize, message: String| Error::Format { file: table.file.clone(), line, message };
    table
        .rows
        .iter()
        .map(|(line, cells)| {
            let method: Method = cells[1].parse().map_err(|_| bad(*line, format!("unknown method {:?}", cells[1])))?;
            let weight = match cells[6].as_str() {
                "NA" => None,
                bits => {
                    let bits: Vec<u8> = bits
                        .chars()
                        .map(|c| c.to_digit(2).map(|d| d as u8))
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad(*line, format!("weight bits {bits:?} are not 0/1")))?;
                    Some(WeightVector::from_bits(&bits).map_err(|e| bad(*line, e.to_string()))?)
                }
            };
            Ok(ResultRow {
                gene_id: cells[0].clone(),
                method,
                statistic: table.number(*line, 2, &cells[2])?,
                p_raw: table.number(*line, 3, &cells[3])?,
                p_floored: table.number(*line, 4, &cells[4])?,
                weight,
            })
        })
        .collect()
}

/// Column-major fixed-point -ln p for the observed genes and the pooled null.
struct Scores {
    k: usize,
    obs: Vec<Vec<i64>>,
    null: Vec<Vec<i64>>,
}

impl Scores {
    fn new(pm: &PValueMatrix, null: &NullStore) -> Result<Scores> {
        let k = pm.n_phenotypes();
        if null.n_phenotypes() != k {
            return Err(Error::Shape(format!("{k} observed phenotypes but {} in the null store", null.n_phenotypes())));
        }
        if null.pooled_len() < 2 {
            return Err(Error::Precondition("pooled null needs B * p >= 2".into()));
        }
        let obs = (0..k).map(|c| (0..pm.n_genes()).map(|j| score_of(pm.row(j)[c])).collect()).collect();
        let nulls = (0..k).map(|c| (0..null.pooled_len()).map(|r| score_of(null.pooled_row(r)[c])).collect()).collect();
        Ok(Scores { k, obs, null: nulls })
    }

    fn n_obs(&self) -> usize {
        self.obs[0].len()
    }
    fn n_null(&self) -> usize {
        self.null[0].len()
    }
}

/// U for every observed and null row at the current mask, updated by
/// adding or removing one phenotype column at a time.
struct Walker {
    mask: u32,
    obs: Vec<i64>,
    null: Vec<i64>,
}

impl Walker {
    fn new(scores: &Scores) -> Walker {
        Walker { mask: 0, obs: vec![0; scores.n_obs()], null: vec![0; scores.n_null()] }
    }

    fn move_to(&mut self, target: u32, scores: &Scores) {
        let diff = self.mask ^ target;
        for c in 0..scores.k {
            if diff >> c & 1 == 0 {
                continue;
            }
            let adding = target >> c & 1 == 1;
            for (u, s) in self.obs.iter_mut().zip(&scores.obs[c]) {
                *u = if adding { *u + s } else { *u - s };
            }
            for (u, s) in self.null.iter_mut().zip(&scores.null[c]) {
                *u = if adding { *u + s } else { *u - s };
            }
        }
        self.mask = target;
    }
}

fn split_masks(masks: &[WeightVector]) -> Vec<&[WeightVector]> {
    let workers = rayon::current_num_threads().max(1);
    let chunk = masks.len().div_ceil(4 * workers).max(16);
    masks.chunks(chunk).collect()
}

const RADIX_BITS: u32 = 11;
const RADIX_PASSES: usize = 6;

/// LSD radix sort of (non-negative key, index) pairs; `scratch` is reused.
fn radix_sort(items: &mut Vec<(i64, u32)>, scratch: &mut Vec<(i64, u32)>) {
    let n = items.len();
    let buckets = 1usize << RADIX_BITS;
    let digit = |key: i64, pass: usize| ((key as u64) >> (pass as u32 * RADIX_BITS)) as usize & (buckets - 1);
    let mut counts = vec![0usize; buckets * RADIX_PASSES];
    for &(key, _) in items.iter() {
        for pass in 0..RADIX_PASSES {
            counts[pass * buckets + digit(key, pass)] += 1;
        }
    }
    scratch.resize(n, (0, 0));
    for pass in 0..RADIX_PASSES {
        let hist = &mut counts[pass * buckets..(pass + 1) * buckets];
        if hist.contains(&n) {
            continue;
        }
        let mut offset = 0;
        for c in hist.iter_mut() {
            let here = *c;
            *c = offset;
            offset += here;
        }
        for &item in items.iter() {
            let d = digit(item.0, pass);
            scratch[hist[d]] = item;
            hist[d] += 1;
        }
        std::mem::swap(items, scratch);
    }
}

/// Number of sorted values >= v.
fn count_ge(sorted: &[i64], v: i64) -> u32 {
    (sorted.len() - sorted.partition_point(|x| *x < v)) as u32
}

#[derive(Debug, Clone, Copy)]
struct AfpPick {
    count: u32,
    /// ln P(Gamma(|w|, 1) >= U), the tail U would have if the weighted
    /// p-values were independent uniforms. Orders weights whose counts tie,
    /// which is routine once U clears the whole pool.
    tail: f64,
    u: i64,
    mask: u32,
}

impl AfpPick {
    /// Smaller p_U, then smaller analytic tail, then larger U, then smaller mask.
    fn better_than(&self, other: &AfpPick) -> bool {
        use std::cmp::Ordering::*;
        match self.count.cmp(&other.count) {
            Less => return true,
            Greater => return false,
            Equal => {}
        }
        match self.tail.total_cmp(&other.tail) {
            Less => return true,
            Greater => return false,
            Equal => {}
        }
        (std::cmp::Reverse(self.u), self.mask) < (std::cmp::Reverse(other.u), other.mask)
    }
}

/// Log of the regularized upper incomplete gamma function, stable far into
/// the tail where Q itself underflows.
fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        return statrs::function::gamma::gamma_ur(a, x).ln();
    }
    // Lentz evaluation of the continued fraction for Q.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < 1e-15 {
            break;
        }
    }
    -x + a * x.ln() - statrs::function::gamma::ln_gamma(a) + h.ln()
}

#[derive(Debug, Clone, Copy)]
struct AfzPick {
    z: f64,
    u: i64,
    mask: u32,
}

impl AfzPick {
    /// Larger u', then larger U, then smaller mask.
    fn better_than(&self, other: &AfzPick) -> bool {
        match self.z.total_cmp(&other.z) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => (std::cmp::Reverse(self.u), self.mask) < (std::cmp::Reverse(other.u), other.mask),
        }
    }
}

fn finish(
    method: Method,
    pm: &PValueMatrix,
    pooled: usize,
    stats: Vec<f64>,
    counts: Vec<usize>,
    picks: Vec<Option<(WeightVector, f64)>>,
    null_statistics: Vec<f64>,
) -> CombineOutput {
    let n = pooled as f64;
    let tests = stats
        .into_iter()
        .zip(counts)
        .zip(picks)
        .map(|((statistic, count), pick)| GeneTest {
            statistic,
            p_raw: count as f64 / n,
            p_floored: if count == 0 { 1.0 / (n + 1.0) } else { count as f64 / n },
            floor_flag: count == 0,
            weight: pick.map(|(w, _)| w),
            u_at_weight: pick.map(|(_, u)| u),
        })
        .collect();
    CombineOutput { method, gene_ids: pm.gene_ids.clone(), tests, null_statistics, pooled }
}

/// AFp over every weight in the 2^K - 1 space.
pub fn afp(pm: &PValueMatrix, null: &NullStore) -> Result<CombineOutput> {
    let masks = enumerate_weights(pm.n_phenotypes())?;
    afp_with_masks(pm, null, &masks)
}

/// AFp restricted to `masks` (the full space in [`afp`]).
pub fn afp_with_masks(pm: &PValueMatrix, null: &NullStore, masks: &[WeightVector]) -> Result<CombineOutput> {
    let scores = Scores::new(pm, null)?;
    check_masks(masks, scores.k)?;
    let n_null = scores.n_null();
    let partials: Vec<(Vec<u32>, Vec<AfpPick>)> = split_masks(masks)
        .into_par_iter()
        .map(|chunk| {
            let mut walker = Walker::new(&scores);
            let mut sorted = vec![0i64; n_null];
            let mut order: Vec<(i64, u32)> = Vec::with_capacity(n_null);
            let mut scratch: Vec<(i64, u32)> = Vec::with_capacity(n_null);
            let mut null_best = vec![u32::MAX; n_null];
            let mut picks: Vec<AfpPick> = vec![AfpPick { count: u32::MAX, tail: f64::INFINITY, u: i64::MIN, mask: u32::MAX }; scores.n_obs()];
            for w in chunk {
                walker.move_to(w.mask(), &scores);
                order.clear();
                order.extend(walker.null.iter().enumerate().map(|(i, &u)| (u, i as u32)));
                radix_sort(&mut order, &mut scratch);
                // One sweep over equal-value runs gives every null value's count.
                let mut start = 0;
                while start < n_null {
                    let value = order[start].0;
                    let mut end = start;
                    while end < n_null && order[end].0 == value {
                        end += 1;
                    }
                    let count = (n_null - start) as u32;
                    for pos in start..end {
                        let (u, i) = order[pos];
                        sorted[pos] = u;
                        let best = &mut null_best[i as usize];
                        *best = (*best).min(count);
                    }
                    start = end;
                }
                let shape = w.count() as f64;
                for (pick, &u) in picks.iter_mut().zip(&walker.obs) {
                    let cand = AfpPick { count: count_ge(&sorted, u), tail: ln_gamma_q(shape, score_to_f64(u)), u, mask: w.mask() };
                    if cand.better_than(pick) {
                        *pick = cand;
                    }
                }
            }
            (null_best, picks)
        })
        .collect();
    let mut null_best = vec![u32::MAX; n_null];
    let mut picks: Option<Vec<AfpPick>> = None;
    for (nb, pk) in partials {
        null_best.iter_mut().zip(&nb).for_each(|(a, b)| *a = (*a).min(*b));
        picks = Some(match picks {
            None => pk,
            Some(mut cur) => {
                for (c, p) in cur.iter_mut().zip(pk) {
                    if p.better_than(c) {
                        *c = p;
                    }
                }
                cur
            }
        });
    }
    let picks = picks.unwrap_or_default();
    let mut sorted_null = null_best.clone();
    sorted_null.sort_unstable();
    let n = n_null as f64;
    let k = scores.k;
    let counts: Vec<usize> = picks.iter().map(|p| sorted_null.partition_point(|c| *c <= p.count)).collect();
    let stats = picks.iter().map(|p| p.count as f64 / n).collect();
    let chosen = picks.iter().map(|p| Some((WeightVector::new(p.mask, k).expect("mask from the weight space"), score_to_f64(p.u)))).collect();
    let null_stats = null_best.iter().map(|c| *c as f64 / n).collect();
    Ok(finish(Method::AFp, pm, n_null, stats, counts, chosen, null_stats))
}

fn check_masks(masks: &[WeightVector], k: usize) -> Result<()> {
    if masks.is_empty() {
        return Err(Error::Precondition("empty weight space".into()));
    }
    if masks.iter().any(|w| w.k() != k) {
        return Err(Error::Shape(format!("weights must span {k} phenotypes")));
    }
    Ok(())
}

/// Population mean and standard deviation of the pooled null at one mask.
fn null_moments(null_u: &[i64]) -> (f64, f64) {
    let n = null_u.len() as f64;
    let total: i128 = null_u.iter().map(|&u| u as i128).sum();
    let mean = total as f64 / SCORE_SCALE / n;
    let var = null_u.iter().map(|&u| (score_to_f64(u) - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// AFz over every weight in the 2^K - 1 space.
pub fn afz(pm: &PValueMatrix, null: &NullStore) -> Result<CombineOutput> {
    let masks = enumerate_weights(pm.n_phenotypes())?;
    afz_with_masks(pm, null, &masks)
}

pub fn afz_with_masks(pm: &PValueMatrix, null: &NullStore, masks: &[WeightVector]) -> Result<CombineOutput> {
    let scores = Scores::new(pm, null)?;
    check_masks(masks, scores.k)?;
    let n_null = scores.n_null();
    let partials: Vec<Result<(Vec<f64>, Vec<AfzPick>)>> = split_masks(masks)
        .into_par_iter()
        .map(|chunk| {
            let mut walker = Walker::new(&scores);
            let mut null_best = vec![f64::NEG_INFINITY; n_null];
            let mut picks = vec![AfzPick { z: f64::NEG_INFINITY, u: i64::MIN, mask: u32::MAX }; scores.n_obs()];
            for w in chunk {
                walker.move_to(w.mask(), &scores);
                let (mean, sd) = null_moments(&walker.null);
                if !(sd > 0.0) {
                    return Err(Error::DegenerateNull { mask: w.mask() });
                }
                for (best, &u) in null_best.iter_mut().zip(&walker.null) {
                    let z = (score_to_f64(u) - mean) / sd;
                    if z > *best {
                        *best = z;
                    }
                }
                for (pick, &u) in picks.iter_mut().zip(&walker.obs) {
                    let cand = AfzPick { z: (score_to_f64(u) - mean) / sd, u, mask: w.mask() };
                    if cand.better_than(pick) {
                        *pick = cand;
                    }
                }
            }
            Ok((null_best, picks))
        })
        .collect();
    let mut null_best = vec![f64::NEG_INFINITY; n_null];
    let mut picks: Option<Vec<AfzPick>> = None;
    for partial in partials {
        let (nb, pk) = partial?;
        null_best.iter_mut().zip(&nb).for_each(|(a, b)| *a = a.max(*b));
        picks = Some(match picks {
            None => pk,
            Some(mut cur) => {
                for (c, p) in cur.iter_mut().zip(pk) {
                    if p.better_than(c) {
                        *c = p;
                    }
                }
                cur
            }
        });
    }
    let picks = picks.unwrap_or_default();
    let mut sorted_null = null_best.clone();
    sorted_null.sort_unstable_by(f64::total_cmp);
    let k = scores.k;
    let counts = picks.iter().map(|p| n_null - sorted_null.partition_point(|t| *t < p.z)).collect();
    let stats = picks.iter().map(|p| p.z).collect();
    let chosen = picks.iter().map(|p| Some((WeightVector::new(p.mask, k).expect("mask from the weight space"), score_to_f64(p.u)))).collect();
    Ok(finish(Method::AFz, pm, n_null, stats, counts, chosen, null_best))
}

/// Fisher's -2 sum ln p against the pooled null of the same statistic.
pub fn fisher_perm(pm: &PValueMatrix, null: &NullStore) -> Result<CombineOutput> {
    let scores = Scores::new(pm, null)?;
    let mut walker = Walker::new(&scores);
    walker.move_to(WeightVector::all(scores.k).mask(), &scores);
    let mut sorted = walker.null.clone();
    sorted.sort_unstable();
    let counts = walker.obs.iter().map(|&u| count_ge(&sorted, u) as usize).collect();
    let stats = walker.obs.iter().map(|&u| 2.0 * score_to_f64(u)).collect();
    let null_stats = walker.null.iter().map(|&u| 2.0 * score_to_f64(u)).collect();
    let picks = vec![None; scores.n_obs()];
    Ok(finish(Method::Fisher, pm, scores.n_null(), stats, counts, picks, null_stats))
}

/// min_k p against the pooled null minima.
pub fn minp_perm(pm: &PValueMatrix, null: &NullStore) -> Result<CombineOutput> {
    // validates shapes
    Scores::new(pm, null)?;
    let row_min = |row: &[f64]| row.iter().copied().fold(f64::INFINITY, f64::min);
    let null_stats: Vec<f64> = (0..null.pooled_len()).map(|r| row_min(null.pooled_row(r))).collect();
    let mut sorted = null_stats.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let stats: Vec<f64> = (0..pm.n_genes()).map(|j| row_min(pm.row(j))).collect();
    let counts = stats.iter().map(|s| sorted.partition_point(|t| t <= s)).collect();
    let picks = vec![None; pm.n_genes()];
    Ok(finish(Method::MinP, pm, null.pooled_len(), stats, counts, picks, null_stats))
}

pub fn run_method(method: Method, pm: &PValueMatrix, null: &NullStore) -> Result<CombineOutput> {
    match method {
        Method::AFp => afp(pm, null),
        Method::AFz => afz(pm, null),
        Method::Fisher => fisher_perm(pm, null),
        Method::MinP => minp_perm(pm, null),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Indices of the selected genes, ascending.
    pub genes: Vec<usize>,
    pub threshold: f64,
    pub warning: Option<ResolutionWarning>,
}

/// Genes with p < alpha / p. Warns when alpha / p is finer than the
/// permutation resolution 1 / (B p), i.e. when alpha * B < 1.
pub fn bonferroni_select(p_values: &[f64], alpha: f64, permutations: usize) -> Result<Selection> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha {alpha} outside (0, 1)")));
    }
    let p = p_values.len();
    if p == 0 {
        return Err(Error::Precondition("no p-values to select from".into()));
    }
    let threshold = alpha / p as f64;
    let warning = (alpha * (permutations as f64) < 1.0).then(|| ResolutionWarning { threshold, resolution: 1.0 / (permutations as f64 * p as f64) });
    let genes = p_values.iter().enumerate().filter(|(_, v)| **v < threshold).map(|(j, _)| j).collect();
    Ok(Selection { genes, threshold, warning })
}
