//! Gene modules from the co-membership matrix: average-linkage clustering
//! on 1 - V, tightness and size filters, then a greedy merge pass.

mod enrich;

pub use enrich::{benjamini_hochberg, enrich, enrichment_tsv, hypergeometric_upper, read_gmt, EnrichmentRow, GeneSet};

use crate::error::{Error, Result};
use crate::stability::CoMembershipMatrix;
use crate::tsv::fmt_f64;

pub const DEFAULT_MIN_SIZE: usize = 20;
pub const DEFAULT_ALPHA_TIGHT: f64 = 0.7;
pub const DEFAULT_MERGE_TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub gene_ids: Vec<String>,
    /// Gene indices per module, ascending; modules ordered by tightness.
    pub modules: Vec<Vec<usize>>,
    /// Mean off-diagonal co-membership within each module.
    pub tightness: Vec<f64>,
    pub scattered: Vec<usize>,
}

impl ClusterAssignment {
    /// True when no cluster met the thresholds and every gene is scattered.
    pub fn is_empty_result(&self) -> bool {
        self.modules.is_empty()
    }

    /// Module number (1-based) of every gene, `None` when scattered.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.gene_ids.len()];
        for (m, genes) in self.modules.iter().enumerate() {
            for &g in genes {
                out[g] = Some(m + 1);
            }
        }
        out
    }

    /// `gene_id, module, scattered, tightness` in input gene order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene_id\tmodule\tscattered\ttightness\n");
        for (id, label) in self.gene_ids.iter().zip(self.labels()) {
            match label {
                Some(m) => out.push_str(&format!("{id}\t{m}\t0\t{}\n", fmt_f64(self.tightness[m - 1]))),
                None => out.push_str(&format!("{id}\tNA\t1\tNA\n")),
            }
        }
        out
    }

    fn sort_modules(&mut self) {
        let mut order: Vec<usize> = (0..self.modules.len()).collect();
        order.sort_by(|&a, &b| {
            self.tightness[b]
                .total_cmp(&self.tightness[a])
                .then(self.modules[b].len().cmp(&self.modules[a].len()))
                .then(self.modules[a][0].cmp(&self.modules[b][0]))
        });
        self.modules = order.iter().map(|&i| std::mem::take(&mut self.modules[i])).collect();
        self.tightness = order.iter().map(|&i| self.tightness[i]).collect();
    }
}

/// Mean co-membership over the distinct pairs of `genes`.
pub fn tightness(v: &CoMembershipMatrix, genes: &[usize]) -> f64 {
    let s = genes.len();
    if s < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for (a, &i) in genes.iter().enumerate() {
        for &j in &genes[..a] {
            sum += v.get(i, j);
        }
    }
    sum / (s * (s - 1) / 2) as f64
}

fn between_mean(v: &CoMembershipMatrix, a: &[usize], b: &[usize]) -> f64 {
    let sum: f64 = a.iter().map(|&i| b.iter().map(|&j| v.get(i, j)).sum::<f64>()).sum();
    sum / (a.len() * b.len()) as f64
}

/// Average-linkage tree on D = 1 - V. A node is tight when every merge
/// inside it joined clusters whose mean co-membership is at least
/// `alpha_tight`, which bounds its overall tightness by the same value.
/// Maximal tight nodes become candidate modules; candidates smaller than
/// `min_size` are scattered. At most `max_modules` modules are kept,
/// tightest first; the rest are scattered.
///
/// Genes are clustered in gene-id order, so the result does not depend on
/// the order of the input rows.
pub fn tight_cluster(v: &CoMembershipMatrix, min_size: usize, alpha_tight: f64, max_modules: usize) -> Result<ClusterAssignment> {
    if min_size < 2 {
        return Err(Error::Precondition("min_size must be at least 2".into()));
    }
    if !(alpha_tight > 0.5 && alpha_tight <= 1.0) {
        return Err(Error::Precondition(format!("alpha_tight {alpha_tight} outside (0.5, 1]")));
    }
    let p = v.len();
    let mut canon: Vec<usize> = (0..p).collect();
    canon.sort_by(|&a, &b| v.gene_ids[a].cmp(&v.gene_ids[b]));

    let mut modules = Vec::new();
    if p >= 2 {
        let mut condensed = Vec::with_capacity(p * (p - 1) / 2);
        for a in 0..p {
            for b in a + 1..p {
                condensed.push(1.0 - v.get(canon[a], canon[b]));
            }
        }
        let dendrogram = kodama::linkage(&mut condensed, p, kodama::Method::Average);
        // Node members (original indices) and within-pair sums, bottom-up.
        let mut members: Vec<Vec<usize>> = canon.iter().map(|&g| vec![g]).collect();
        let mut within: Vec<f64> = vec![0.0; p];
        let mut tight: Vec<bool> = vec![true; p];
        let mut children: Vec<Option<(usize, usize)>> = vec![None; p];
        for step in dendrogram.steps() {
            let (a, b) = (step.cluster1, step.cluster2);
            let cross: f64 = members[a].iter().map(|&i| members[b].iter().map(|&j| v.get(i, j)).sum::<f64>()).sum();
            within.push(within[a] + within[b] + cross);
            let cross_mean = cross / (members[a].len() * members[b].len()) as f64;
            tight.push(tight[a] && tight[b] && cross_mean >= alpha_tight);
            let mut joined = members[a].clone();
            joined.extend_from_slice(&members[b]);
            members.push(joined);
            children.push(Some((a, b)));
        }
        let root = members.len() - 1;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            let size = members[node].len();
            if size < min_size {
                continue;
            }
            if tight[node] {
                let mut genes = members[node].clone();
                genes.sort_unstable();
                modules.push((genes, within[node] / (size * (size - 1) / 2) as f64));
            } else if let Some((a, b)) = children[node] {
                stack.push(b);
                stack.push(a);
            }
        }
    }
    let mut out = ClusterAssignment {
        gene_ids: v.gene_ids.clone(),
        tightness: modules.iter().map(|m| m.1).collect(),
        modules: modules.into_iter().map(|m| m.0).collect(),
        scattered: Vec::new(),
    };
    out.sort_modules();
    out.modules.truncate(max_modules);
    out.tightness.truncate(max_modules);
    let labels = out.labels();
    out.scattered = (0..p).filter(|&g| labels[g].is_none()).collect();
    Ok(out)
}

/// Repeatedly merges the module pair with the highest mean between-module
/// co-membership while that mean is at least `merge_tau`.
pub fn merge_modules(assign: &ClusterAssignment, v: &CoMembershipMatrix, merge_tau: f64) -> ClusterAssignment {
    let mut out = assign.clone();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..out.modules.len() {
            for b in a + 1..out.modules.len() {
                let m = between_mean(v, &out.modules[a], &out.modules[b]);
                if best.is_none_or(|(bm, _, _)| m > bm) {
                    best = Some((m, a, b));
                }
            }
        }
        match best {
            Some((m, a, b)) if m >= merge_tau => {
                let absorbed = out.modules.remove(b);
                out.tightness.remove(b);
                out.modules[a].extend(absorbed);
                out.modules[a].sort_unstable();
                out.tightness[a] = tightness(v, &out.modules[a]);
            }
            _ => break,
        }
    }
    out.sort_modules();
    out
}
