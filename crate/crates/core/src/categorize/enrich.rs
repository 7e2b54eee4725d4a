use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::tsv::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneSet {
    pub id: String,
    pub description: String,
    pub genes: Vec<String>,
}

/// GMT: one set per line, `id<TAB>description<TAB>gene...`.
pub fn read_gmt(path: &Path) -> Result<Vec<GeneSet>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields[0].is_empty() {
            return Err(Error::Format { file: file.clone(), line: i + 1, message: "expected set id, description and member genes".into() });
        }
        sets.push(GeneSet {
            id: fields[0].to_string(),
            description: fields[1].to_string(),
            genes: fields[2..].iter().filter(|g| !g.is_empty()).map(|g| g.to_string()).collect(),
        });
    }
    Ok(sets)
}

/// P(X >= x) for X ~ Hypergeometric(population, successes, draws).
pub fn hypergeometric_upper(population: u64, successes: u64, draws: u64, x: u64) -> f64 {
    let hi = successes.min(draws);
    let lo = draws.saturating_sub(population - successes);
    if x <= lo {
        return 1.0;
    }
    if x > hi {
        return 0.0;
    }
    let denom = ln_binomial(population, draws);
    let terms: Vec<f64> = (x..=hi).map(|i| ln_binomial(successes, i) + ln_binomial(population - successes, draws - i) - denom).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    (top + sum.ln()).exp().min(1.0)
}

/// Benjamini-Hochberg adjusted values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        q[i] = running;
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentRow {
    pub set_id: String,
    /// Set members inside the universe.
    pub set_size: usize,
    pub overlap: usize,
    pub p_value: f64,
    pub q_value: f64,
}

/// One-sided hypergeometric test of each set against the module, sorted by
/// p. Sets with no member in the universe are skipped with a warning.
pub fn enrich(module: &[String], sets: &[GeneSet], universe: &[String]) -> Result<Vec<EnrichmentRow>> {
    if module.is_empty() {
        return Err(Error::Precondition("empty module".into()));
    }
    if sets.is_empty() {
        return Err(Error::Precondition("no gene sets".into()));
    }
    let universe: HashSet<&str> = universe.iter().map(String::as_str).collect();
    let module: HashSet<&str> = module.iter().map(String::as_str).collect();
    if let Some(g) = module.iter().find(|g| !universe.contains(*g)) {
        return Err(Error::Precondition(format!("module gene {g} is not in the universe")));
    }
    let (n_universe, n_module) = (universe.len() as u64, module.len() as u64);
    let tested: Vec<(String, usize, usize, f64)> = sets
        .par_iter()
        .filter_map(|set| {
            let members: HashSet<&str> = set.genes.iter().map(String::as_str).filter(|g| universe.contains(g)).collect();
            if members.is_empty() {
                log::warn!("gene set {} has no member in the universe; skipped", set.id);
                return None;
            }
            let overlap = members.iter().filter(|g| module.contains(*g)).count();
            let p = hypergeometric_upper(n_universe, members.len() as u64, n_module, overlap as u64);
            Some((set.id.clone(), members.len(), overlap, p))
        })
        .collect();
    let q = benjamini_hochberg(&tested.iter().map(|t| t.3).collect::<Vec<_>>());
    let mut rows: Vec<EnrichmentRow> = tested
        .into_iter()
        .zip(q)
        .map(|((set_id, set_size, overlap, p_value), q_value)| EnrichmentRow { set_id, set_size, overlap, p_value, q_value })
        .collect();
    rows.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.set_id.cmp(&b.set_id)));
    Ok(rows)
}

/// `module, set_id, set_size, overlap, p_value, q_value`.
pub fn enrichment_tsv(tables: &[(String, Vec<EnrichmentRow>)]) -> String {
    let mut out = String::from("module\tset_id\tset_size\toverlap\tp_value\tq_value\n");
    for (module, rows) in tables {
        for r in rows {
            out.push_str(&format!("{module}\t{}\t{}\t{}\t{}\t{}\n", r.set_id, r.set_size, r.overlap, fmt_f64(r.p_value), fmt_f64(r.q_value)));
        }
    }
    out
}
