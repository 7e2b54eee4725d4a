//! Residual-permutation null: covariate-adjusted gene residuals are permuted
//! and every phenotype is refit on them, giving a B x p x K tensor of null
//! p-values that is pooled across genes downstream.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{Dataset, PhenotypeKind};
use crate::error::{Error, Result};
use crate::glm::{centered_ss, fit_gaussian, fit_poisson, NullGaussian};
use crate::linalg::{dot, Projector};
use crate::rng::{keyed_rng, Stream};
use crate::tsv::{fmt_f64, write_file};

pub const NULL_MAGIC: &[u8; 8] = b"AFWNULL1";
pub const NULL_HEADER_LEN: usize = 32;
pub const SCHEME: &str = "residual-permutation";

/// Permutation `b` (1-based) of `0..n`, a pure function of (seed, b, n).
pub fn permutation_order(seed: u64, b: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut keyed_rng(seed, Stream::Permutation, b as u64));
    order
}

/// Null p-values indexed (b, j, k), b-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NullStore {
    pvals: Vec<f64>,
    perms: usize,
    genes: usize,
    phenotypes: usize,
    pub seed: u64,
    /// Whether the permuted-residual regressions also included the covariates.
    pub covariates_in_null: bool,
}

impl NullStore {
    pub fn from_parts(pvals: Vec<f64>, perms: usize, genes: usize, phenotypes: usize, seed: u64, covariates_in_null: bool) -> Result<NullStore> {
        if pvals.len() != perms * genes * phenotypes {
            return Err(Error::Shape(format!("{} null values for shape ({perms}, {genes}, {phenotypes})", pvals.len())));
        }
        if pvals.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::Precondition("null p-values must lie in (0, 1]".into()));
        }
        Ok(NullStore { pvals, perms, genes, phenotypes, seed, covariates_in_null })
    }

    /// Builds a store from explicit rows `rows[b][j]` (each K long).
    pub fn from_rows(rows: &[Vec<Vec<f64>>], seed: u64) -> Result<NullStore> {
        let perms = rows.len();
        let genes = rows.first().map_or(0, Vec::len);
        let k = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != genes || r.iter().any(|c| c.len() != k)) {
            return Err(Error::Shape("ragged null rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().flatten().copied().collect();
        NullStore::from_parts(flat, perms, genes, k, seed, false)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.perms, self.genes, self.phenotypes)
    }
    pub fn n_perms(&self) -> usize {
        self.perms
    }
    pub fn n_genes(&self) -> usize {
        self.genes
    }
    pub fn n_phenotypes(&self) -> usize {
        self.phenotypes
    }
    /// Number of pooled null rows, B * p.
    pub fn pooled_len(&self) -> usize {
        self.perms * self.genes
    }
    pub fn get(&self, b: usize, j: usize, k: usize) -> f64 {
        self.pvals[(b * self.genes + j) * self.phenotypes + k]
    }
    /// K null p-values of pooled row `b * p + j`.
    pub fn pooled_row(&self, row: usize) -> &[f64] {
        &self.pvals[row * self.phenotypes..(row + 1) * self.phenotypes]
    }
    pub fn values(&self) -> &[f64] {
        &self.pvals
    }
    pub fn scheme(&self) -> &'static str {
        SCHEME
    }

    /// Little-endian: 8-byte magic, u32 B, u32 p, u32 K, u32 flags, u64 seed,
    /// then B * p * K f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(NULL_HEADER_LEN + 8 * self.pvals.len());
        out.extend_from_slice(NULL_MAGIC);
        out.extend_from_slice(&(self.perms as u32).to_le_bytes());
        out.extend_from_slice(&(self.genes as u32).to_le_bytes());
        out.extend_from_slice(&(self.phenotypes as u32).to_le_bytes());
        out.extend_from_slice(&u32::from(self.covariates_in_null).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.pvals {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NullStore> {
        let bad = |m: &str| Error::Format { file: "null store".into(), line: 0, message: m.to_string() };
        if bytes.len() < NULL_HEADER_LEN || &bytes[..8] != NULL_MAGIC {
            return Err(bad("not a null store (bad magic)"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (perms, genes, k, flags) = (u32_at(8), u32_at(12), u32_at(16), u32_at(20));
        let seed = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
        let body = &bytes[NULL_HEADER_LEN..];
        if body.len() != 8 * perms * genes * k {
            return Err(bad("payload length does not match header"));
        }
        let pvals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        NullStore::from_parts(pvals, perms, genes, k, seed, flags & 1 == 1)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<NullStore> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        NullStore::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format { file: path.display().to_string(), line: 0, message },
            other => other,
        })
    }

    /// Debug export: `b, gene_id, <phenotype columns>`; b is 1-based.
    pub fn write_tsv(&self, path: &Path, gene_ids: &[String], phenotype_names: &[String]) -> Result<()> {
        let mut out = String::from("b\tgene_id");
        for name in phenotype_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for b in 0..self.perms {
            for (j, id) in gene_ids.iter().enumerate().take(self.genes) {
                out.push_str(&format!("{}\t{id}", b + 1));
                for k in 0..self.phenotypes {
                    out.push('\t');
                    out.push_str(&fmt_f64(self.get(b, j, k)));
                }
                out.push('\n');
            }
        }
        write_file(path, &out)
    }
}

/// Permutes each gene's covariate residual with one shared order per b and
/// refits every phenotype on it. With `include_covariates_in_null` the refit
/// also carries Z; by default it is phenotype ~ 1 + permuted residual.
pub fn build_null(ds: &Dataset, perms: usize, seed: u64, include_covariates_in_null: bool) -> Result<NullStore> {
    if perms == 0 {
        return Err(Error::Precondition("need at least one permutation".into()));
    }
    let n = ds.n_samples();
    let p = ds.n_genes();
    let k = ds.n_phenotypes();
    let covs = ds.covariate_columns();
    let proj = Projector::new(&covs, n)?;
    let residuals: Vec<Option<Vec<f64>>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let x = ds.gene(j);
            let e = proj.residual(x);
            let xx = dot(x, x);
            (dot(&e, &e) > 1e-20 * xx && xx > 0.0).then_some(e)
        })
        .collect();
    let gaussian: Vec<Option<NullGaussian>> = (0..k)
        .map(|c| match ds.kinds()[c] {
            PhenotypeKind::Continuous => Some(NullGaussian::new(ds.phenotype(c))),
            PhenotypeKind::Count => None,
        })
        .collect();

    let mut pvals = vec![1.0; perms * p * k];
    pvals.par_chunks_mut(p * k).enumerate().for_each(|(b, slab)| {
        let order = permutation_order(seed, b + 1, n);
        let mut permuted = vec![0.0; n];
        for (j, cell) in slab.chunks_mut(k).enumerate() {
            let Some(e) = &residuals[j] else {
                continue;
            };
            permuted.iter_mut().zip(&order).for_each(|(dst, &src)| *dst = e[src]);
            let sxx = centered_ss(&permuted);
            for (c, out) in cell.iter_mut().enumerate() {
                let y = ds.phenotype(c);
                *out = if include_covariates_in_null {
                    let fit = match ds.kinds()[c] {
                        PhenotypeKind::Continuous => fit_gaussian(y, &permuted, &covs, true),
                        PhenotypeKind::Count => fit_poisson(y, &permuted, &covs, true),
                    };
                    fit.map_or(1.0, |f| f.wald_p)
                } else {
                    match &gaussian[c] {
                        Some(g) => g.pvalue(&permuted, sxx).0,
                        None => fit_poisson(y, &permuted, &[], false).map_or(1.0, |f| f.wald_p),
                    }
                };
            }
        }
    });
    NullStore::from_parts(pvals, perms, p, k, seed, include_covariates_in_null)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetParts;
    use crate::glm::residualize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Poisson};
    use std::collections::HashMap;

    fn random_dataset(seed: u64, p: usize, n: usize, with_cov: bool, with_count: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let z: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let expression = (0..p).map(|_| (0..n).map(|i| normal.sample(&mut rng) + if with_cov { z[i] } else { 0.0 }).collect()).collect();
        let mut phenotypes: Vec<Vec<f64>> = vec![(0..n).map(|i| normal.sample(&mut rng) + z[i]).collect()];
        let mut kinds = vec![PhenotypeKind::Continuous];
        if with_count {
            phenotypes.push((0..n).map(|_| Poisson::new(2.0).unwrap().sample(&mut rng)).collect());
            kinds.push(PhenotypeKind::Count);
        }
        Dataset::new(DatasetParts {
            gene_ids: (0..p).map(|j| format!("g{j}")).collect(),
            sample_ids: (0..n).map(|i| format!("s{i}")).collect(),
            expression,
            phenotype_names: (0..phenotypes.len()).map(|k| format!("y{k}")).collect(),
            phenotypes,
            kinds,
            covariate_names: if with_cov { vec!["z".into()] } else { vec![] },
            covariates: if with_cov { vec![z] } else { vec![] },
        })
        .unwrap()
    }

    #[test]
    fn single_sample_permutation_is_identity() {
        assert_eq!(permutation_order(7, 1, 1), vec![0]);
    }

    #[test]
    fn permutation_is_deterministic() {
        assert_eq!(permutation_order(7, 1, 20), permutation_order(7, 1, 20));
        assert_ne!(permutation_order(7, 1, 20), permutation_order(7, 2, 20));
        let mut sorted = permutation_order(7, 3, 20);
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn permutations_are_uniform() {
        let draws = 10_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for b in 1..=draws {
            *counts.entry(permutation_order(7, b, 4)).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = draws as f64 / 24.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square with 23 df: 0.999 quantile is 49.7
        assert!(chi2 < 49.7, "chi2 {chi2}");
        for &c in counts.values() {
            assert!((c as f64 / draws as f64 - 1.0 / 24.0).abs() < 0.01);
        }
    }

    #[test]
    fn null_shape_and_determinism() {
        let ds = random_dataset(1, 3, 12, false, true);
        let a = build_null(&ds, 2, 5, false).unwrap();
        assert_eq!(a.shape(), (2, 3, 2));
        let b = build_null(&ds, 2, 5, false).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert!(a.values().iter().all(|p| *p > 0.0 && *p <= 1.0));
    }

    #[test]
    fn null_cells_equal_direct_fits_on_permuted_residuals() {
        let ds = random_dataset(2, 4, 15, true, true);
        let store = build_null(&ds, 3, 11, false).unwrap();
        let covs = ds.covariate_columns();
        for b in 0..3 {
            let order = permutation_order(11, b + 1, 15);
            for j in 0..4 {
                let e = residualize(ds.gene(j), &covs).unwrap();
                let permuted: Vec<f64> = order.iter().map(|&i| e[i]).collect();
                let g = fit_gaussian(ds.phenotype(0), &permuted, &[], false).unwrap().wald_p;
                let c = fit_poisson(ds.phenotype(1), &permuted, &[], false).unwrap().wald_p;
                assert!((store.get(b, j, 0) - g).abs() < 1e-10 * g.max(1e-12));
                assert_eq!(store.get(b, j, 1), c);
            }
        }
        let with = build_null(&ds, 2, 11, true).unwrap();
        assert!(with.covariates_in_null);
        let order = permutation_order(11, 1, 15);
        let e = residualize(ds.gene(0), &covs).unwrap();
        let permuted: Vec<f64> = order.iter().map(|&i| e[i]).collect();
        let g = fit_gaussian(ds.phenotype(0), &permuted, &covs, true).unwrap().wald_p;
        assert_eq!(with.get(0, 0, 0), g);
    }

    #[test]
    fn permuted_residuals_stay_uncorrelated_with_covariates() {
        let ds = random_dataset(3, 5, 40, true, false);
        let z = ds.covariate(0);
        let zc: Vec<f64> = {
            let m = z.iter().sum::<f64>() / z.len() as f64;
            z.iter().map(|v| v - m).collect()
        };
        for j in 0..5 {
            let e = residualize(ds.gene(j), &[z]).unwrap();
            assert!(dot(&e, &zc).abs() < 1e-10);
        }
    }

    #[test]
    fn invariant_to_gene_reordering() {
        let ds = random_dataset(4, 5, 20, true, true);
        let order = [3usize, 0, 4, 2, 1];
        let shuffled = ds.select_genes(&order);
        let a = build_null(&ds, 4, 9, false).unwrap();
        let b = build_null(&shuffled, 4, 9, false).unwrap();
        for bb in 0..4 {
            for (new_j, &old_j) in order.iter().enumerate() {
                for k in 0..2 {
                    assert_eq!(a.get(bb, old_j, k), b.get(bb, new_j, k));
                }
            }
        }
    }

    #[test]
    fn binary_round_trip_and_header() {
        let ds = random_dataset(5, 3, 10, false, false);
        let store = build_null(&ds, 2, 0xDEAD_BEEF, false).unwrap();
        let bytes = store.to_bytes();
        assert_eq!(bytes.len(), 32 + 8 * 2 * 3);
        assert_eq!(&bytes[..8], NULL_MAGIC);
        assert_eq!(NullStore::from_bytes(&bytes).unwrap(), store);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("null.bin");
        store.write(&path).unwrap();
        assert_eq!(NullStore::read(&path).unwrap(), store);
        assert!(NullStore::from_bytes(&bytes[..40]).is_err());
        assert!(NullStore::from_bytes(b"garbage garbage garbage garbage!").is_err());
    }

    #[test]
    fn zero_permutations_rejected() {
        let ds = random_dataset(6, 2, 10, false, false);
        assert!(matches!(build_null(&ds, 0, 1, false), Err(Error::Precondition(_))));
    }
}
