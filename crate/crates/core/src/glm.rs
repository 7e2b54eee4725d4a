//! Per-cell regression of a phenotype on one gene (plus covariates): Gaussian
//! least squares with a t-based Wald test, Poisson log-link IRLS with a
//! normal Wald test, and covariate residualisation of gene vectors.

use rayon::prelude::*;
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::data::{CellFlag, Dataset, PValueMatrix, PhenotypeKind};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, Projector};

/// Smallest reported p-value, so that -ln p stays finite.
pub const P_FLOOR: f64 = 1e-300;
/// IRLS stops when the absolute deviance change falls below this.
pub const IRLS_TOL: f64 = 1e-8;
pub const IRLS_MAX_ITER: usize = 25;
/// |theta| above this is treated as separation.
pub const SEPARATION_BOUND: f64 = 30.0;

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub theta: f64,
    pub se: f64,
    pub wald_p: f64,
    pub sign: i8,
    /// Covariate coefficients (intercept excluded); empty when covariates
    /// were not part of the model.
    pub alpha_coefs: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub flag: CellFlag,
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(P_FLOOR, 1.0)
    }
}

/// Two-sided t-test p-value for t^2 = theta^2 / se^2 with `df` degrees of
/// freedom, via the regularised incomplete beta function (accurate in the tail).
pub fn t_two_sided(theta: f64, se: f64, df: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let s2 = se * se;
    let x = df * s2 / (df * s2 + theta * theta);
    if x <= 0.0 {
        return P_FLOOR;
    }
    clamp_p(beta_reg(df / 2.0, 0.5, x))
}

/// Two-sided standard normal p-value for z.
pub fn normal_two_sided(z: f64) -> f64 {
    clamp_p(erfc(z.abs() / std::f64::consts::SQRT_2))
}

/// Residual of `gene` after projecting out the intercept and `covariates`.
pub fn residualize(gene: &[f64], covariates: &[&[f64]]) -> Result<Vec<f64>> {
    let n = gene.len();
    if n <= covariates.len() + 1 {
        return Err(Error::Precondition(format!("residualize needs n > M + 1 (n = {n}, M = {})", covariates.len())));
    }
    Ok(Projector::new(covariates, n)?.residual(gene))
}

/// A response already projected onto the orthogonal complement of the
/// nuisance design; shared across all genes in [`assoc_pvalues`].
pub(crate) struct GaussianResponse {
    resid: Vec<f64>,
    rss0: f64,
    coefs: Vec<f64>,
}

impl GaussianResponse {
    pub(crate) fn new(proj: &Projector, y: &[f64]) -> Self {
        let resid = proj.residual(y);
        let rss0 = dot(&resid, &resid);
        GaussianResponse { rss0, coefs: proj.coefficients(y), resid }
    }
}

/// Least squares of y on [1, x, nuisance] via Frisch-Waugh-Lovell.
pub(crate) fn gaussian_fit(proj: &Projector, resp: &GaussianResponse, x: &[f64]) -> Result<GlmFit> {
    let n = proj.n();
    let df = n as f64 - proj.rank() as f64 - 1.0;
    if df < 1.0 {
        return Err(Error::Precondition(format!("no residual degrees of freedom (n = {n})")));
    }
    let ex = proj.residual(x);
    let sxx = dot(&ex, &ex);
    let xx = dot(x, x);
    if !(sxx > 1e-20 * xx) || xx == 0.0 {
        return Err(Error::RankDeficient("gene vector lies in the span of the intercept and covariates".into()));
    }
    let alpha_of = |theta: f64| -> Vec<f64> {
        let cx = proj.coefficients(x);
        resp.coefs.iter().zip(&cx).skip(1).map(|(cy, cx)| cy - theta * cx).collect()
    };
    if resp.rss0 == 0.0 {
        return Ok(GlmFit {
            theta: 0.0,
            se: 0.0,
            wald_p: 1.0,
            sign: 0,
            alpha_coefs: alpha_of(0.0),
            converged: true,
            iterations: 1,
            flag: CellFlag::ConstantResponse,
        });
    }
    let sxy = dot(&ex, &resp.resid);
    let theta = sxy / sxx;
    let rss: f64 = ex.iter().zip(&resp.resid).map(|(e, r)| (r - theta * e).powi(2)).sum();
    let se = (rss / df / sxx).sqrt();
    let (wald_p, flag) = if rss <= 1e-24 * resp.rss0 { (P_FLOOR, CellFlag::DegenerateResidual) } else { (t_two_sided(theta, se, df), CellFlag::Ok) };
    Ok(GlmFit { theta, se, wald_p, sign: sign_of(theta), alpha_coefs: alpha_of(theta), converged: true, iterations: 1, flag })
}

fn check_lengths(y: &[f64], x: &[f64], covariates: &[&[f64]]) -> Result<()> {
    let n = y.len();
    if x.len() != n || covariates.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("response, gene and covariate lengths differ".into()));
    }
    Ok(())
}

/// Ordinary least squares of `y` on `[1, x]` (plus `covariates` when
/// `include_covariates`), with a two-sided t-test on the gene coefficient.
pub fn fit_gaussian(y: &[f64], x: &[f64], covariates: &[&[f64]], include_covariates: bool) -> Result<GlmFit> {
    check_lengths(y, x, covariates)?;
    let used: &[&[f64]] = if include_covariates { covariates } else { &[] };
    let n = y.len();
    if n <= used.len() + 2 {
        return Err(Error::Precondition(format!("Gaussian fit needs n > M + 2 (n = {n}, M = {})", used.len())));
    }
    let proj = Projector::new(used, n)?;
    let resp = GaussianResponse::new(&proj, y);
    gaussian_fit(&proj, &resp, x)
}

/// Regression of a phenotype on `[1, e]` where `e` is a permuted residual
/// vector; the hot loop of the permutation null.
pub(crate) struct NullGaussian {
    centered: Vec<f64>,
    syy: f64,
}

impl NullGaussian {
    pub(crate) fn new(y: &[f64]) -> Self {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let syy = dot(&centered, &centered);
        NullGaussian { centered, syy }
    }

    /// `sxx` is the centred sum of squares of `e`.
    pub(crate) fn pvalue(&self, e: &[f64], sxx: f64) -> (f64, CellFlag) {
        let n = e.len() as f64;
        if self.syy == 0.0 {
            return (1.0, CellFlag::ConstantResponse);
        }
        if !(sxx > 0.0) {
            return (1.0, CellFlag::Failed);
        }
        let sxy = dot(e, &self.centered);
        let theta = sxy / sxx;
        let rss = (self.syy - theta * sxy).max(0.0);
        if rss <= 1e-24 * self.syy {
            return (P_FLOOR, CellFlag::DegenerateResidual);
        }
        let df = n - 2.0;
        let se = (rss / df / sxx).sqrt();
        (t_two_sided(theta, se, df), CellFlag::Ok)
    }
}

pub(crate) fn centered_ss(e: &[f64]) -> f64 {
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    e.iter().map(|v| (v - mean).powi(2)).sum()
}

fn poisson_deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let term = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
            term - (y - m)
        })
        .sum::<f64>()
}

struct Irls {
    beta: Vec<f64>,
    se_gene: f64,
    deviance_path: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn linear_predictor(cols: &[&[f64]], beta: &[f64], n: usize) -> Vec<f64> {
    let mut eta = vec![beta[0]; n];
    for (c, b) in cols.iter().zip(&beta[1..]) {
        eta.iter_mut().zip(c.iter()).for_each(|(e, v)| *e += b * v);
    }
    eta.iter_mut().for_each(|e| *e = e.min(700.0));
    eta
}

/// Weighted normal equations X^T W X (row-major) and X^T W z for design [1, cols].
fn normal_equations(cols: &[&[f64]], w: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = cols.len() + 1;
    let col = |c: usize, i: usize| if c == 0 { 1.0 } else { cols[c - 1][i] };
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for i in 0..w.len() {
        let wi = w[i];
        for r in 0..d {
            let xr = col(r, i) * wi;
            b[r] += xr * z[i];
            for c in 0..=r {
                a[r * d + c] += xr * col(c, i);
            }
        }
    }
    for r in 0..d {
        for c in r + 1..d {
            a[r * d + c] = a[c * d + r];
        }
    }
    (a, b)
}

/// Poisson log-link IRLS on [1, cols] with step halving so the deviance
/// never increases; starts from the intercept-only fit.
fn irls_poisson(y: &[f64], cols: &[&[f64]]) -> Result<Irls> {
    let n = y.len();
    let d = cols.len() + 1;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut beta = vec![0.0; d];
    beta[0] = ybar.ln();
    let mu_of = |beta: &[f64]| -> Vec<f64> { linear_predictor(cols, beta, n).iter().map(|e| e.exp()).collect() };
    let mut mu = mu_of(&beta);
    let mut dev = poisson_deviance(y, &mu);
    let mut path = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < IRLS_MAX_ITER {
        iterations += 1;
        let eta: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]).collect();
        let (mut a, mut b) = normal_equations(cols, &mu, &z);
        cholesky(&mut a, d).ok_or_else(|| Error::RankDeficient("weighted normal equations are singular".into()))?;
        cholesky_solve(&a, d, &mut b);
        let mut candidate = b;
        let mut mu_new = mu_of(&candidate);
        let mut dev_new = poisson_deviance(y, &mu_new);
        let mut halvings = 0;
        while !(dev_new <= dev) && halvings < MAX_HALVINGS {
            candidate.iter_mut().zip(&beta).for_each(|(c, b)| *c = 0.5 * (*c + b));
            mu_new = mu_of(&candidate);
            dev_new = poisson_deviance(y, &mu_new);
            halvings += 1;
        }
        if !(dev_new <= dev) {
            // no descent direction left: current iterate is as good as it gets
            path.push(dev);
            converged = true;
            break;
        }
        let change = (dev - dev_new).abs();
        beta = candidate;
        mu = mu_new;
        dev = dev_new;
        path.push(dev);
        if change < IRLS_TOL {
            converged = true;
            break;
        }
    }
    let (mut a, _) = normal_equations(cols, &mu, &vec![0.0; n]);
    cholesky(&mut a, d).ok_or_else(|| Error::RankDeficient("information matrix is singular".into()))?;
    let mut e1 = vec![0.0; d];
    e1[1] = 1.0;
    cholesky_solve(&a, d, &mut e1);
    Ok(Irls { beta, se_gene: e1[1].max(0.0).sqrt(), deviance_path: path, iterations, converged })
}

/// Poisson regression (log link) of count `y` on `[1, x]` (plus covariates),
/// with the deviance recorded after every IRLS iteration.
pub fn fit_poisson_traced(y: &[f64], x: &[f64], covariates: &[&[f64]], include_covariates: bool) -> Result<(GlmFit, Vec<f64>)> {
    check_lengths(y, x, covariates)?;
    let used: &[&[f64]] = if include_covariates { covariates } else { &[] };
    let n = y.len();
    if n <= used.len() + 2 {
        return Err(Error::Precondition(format!("Poisson fit needs n > M + 2 (n = {n}, M = {})", used.len())));
    }
    if let Some(bad) = y.iter().find(|v| **v < 0.0 || v.fract() != 0.0 || !v.is_finite()) {
        return Err(Error::Precondition(format!("count response holds {bad}")));
    }
    if !y.iter().any(|v| *v > 0.0) {
        return Err(Error::Precondition("count response is identically zero".into()));
    }
    let mut cols: Vec<&[f64]> = Vec::with_capacity(used.len() + 1);
    cols.push(x);
    cols.extend_from_slice(used);
    // rank check on the unweighted design
    Projector::new(&cols, n)?;
    let fit = irls_poisson(y, &cols)?;
    let theta = fit.beta[1];
    let mut flag = if fit.converged { CellFlag::Ok } else { CellFlag::NotConverged };
    let wald_p = if theta.abs() > SEPARATION_BOUND {
        flag = CellFlag::Separation;
        P_FLOOR
    } else if fit.se_gene > 0.0 {
        normal_two_sided(theta / fit.se_gene)
    } else {
        1.0
    };
    Ok((
        GlmFit {
            theta,
            se: fit.se_gene,
            wald_p,
            sign: sign_of(theta),
            alpha_coefs: fit.beta[2..].to_vec(),
            converged: fit.converged,
            iterations: fit.iterations,
            flag,
        },
        fit.deviance_path,
    ))
}

pub fn fit_poisson(y: &[f64], x: &[f64], covariates: &[&[f64]], include_covariates: bool) -> Result<GlmFit> {
    fit_poisson_traced(y, x, covariates, include_covariates).map(|(fit, _)| fit)
}

fn failed_cell() -> (f64, i8, CellFlag) {
    (1.0, 0, CellFlag::Failed)
}

/// Observed p-value matrix: phenotype k regressed on gene j with all
/// covariates, Gaussian or Poisson according to the phenotype kind.
/// Failed cells are reported as p = 1, sign 0 and flagged.
pub fn assoc_pvalues(ds: &Dataset) -> Result<PValueMatrix> {
    let covs = ds.covariate_columns();
    let proj = Projector::new(&covs, ds.n_samples())?;
    let k = ds.n_phenotypes();
    let responses: Vec<Option<GaussianResponse>> = (0..k)
        .map(|c| match ds.kinds()[c] {
            PhenotypeKind::Continuous => Some(GaussianResponse::new(&proj, ds.phenotype(c))),
            PhenotypeKind::Count => None,
        })
        .collect();
    let rows: Vec<Vec<(f64, i8, CellFlag)>> = (0..ds.n_genes())
        .into_par_iter()
        .map(|j| {
            let x = ds.gene(j);
            (0..k)
                .map(|c| {
                    let fit = match &responses[c] {
                        Some(resp) => gaussian_fit(&proj, resp, x),
                        None => fit_poisson(ds.phenotype(c), x, &covs, true),
                    };
                    match fit {
                        Ok(f) if matches!(f.flag, CellFlag::ConstantResponse) => (1.0, 0, f.flag),
                        Ok(f) => (f.wald_p, f.sign, f.flag),
                        Err(_) => failed_cell(),
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(ds.n_genes() * k);
    let mut signs = Vec::with_capacity(ds.n_genes() * k);
    let mut flags = Vec::with_capacity(ds.n_genes() * k);
    for (p, s, f) in rows.into_iter().flatten() {
        values.push(p);
        signs.push(s);
        flags.push(f);
    }
    Ok(PValueMatrix { gene_ids: ds.gene_ids().to_vec(), phenotype_names: ds.phenotype_names().to_vec(), values, signs, flags })
}
