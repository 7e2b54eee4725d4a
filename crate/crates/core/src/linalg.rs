//! Small dense helpers: an orthogonal projector onto span{1, Z} and a
//! Cholesky solver for the (M + 2)-dimensional normal equations of IRLS.

use crate::error::{Error, Result};

/// Relative norm below which a column is considered linearly dependent on
/// the preceding ones.
const RANK_TOL: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin QR factorisation of the design `[1, columns...]` by modified
/// Gram-Schmidt with one re-orthogonalisation pass.
#[derive(Debug, Clone)]
pub struct Projector {
    n: usize,
    q: Vec<Vec<f64>>,
    /// Upper triangular, r[i][c] for c >= i.
    r: Vec<Vec<f64>>,
}

impl Projector {
    /// Projector onto span{1, columns}.
    pub fn new(columns: &[&[f64]], n: usize) -> Result<Projector> {
        let ones = vec![1.0; n];
        let all: Vec<&[f64]> = std::iter::once(ones.as_slice()).chain(columns.iter().copied()).collect();
        let d = all.len();
        if n < d {
            return Err(Error::RankDeficient(format!("{d} design columns for {n} samples")));
        }
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut r = vec![vec![0.0; d]; d];
        for (c, col) in all.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Shape(format!("design column of length {} for {n} samples", col.len())));
            }
            let mut v = col.to_vec();
            let norm0 = dot(&v, &v).sqrt();
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let d = dot(qi, &v);
                    r[i][c] += d;
                    v.iter_mut().zip(qi).for_each(|(vv, qq)| *vv -= d * qq);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(norm > RANK_TOL * norm0) || norm0 == 0.0 {
                return Err(Error::RankDeficient(format!("design column {c} is (numerically) a combination of the intercept and earlier columns")));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            r[c][c] = norm;
            q.push(v);
        }
        Ok(Projector { n, q, r })
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// x minus its orthogonal projection onto the design span.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for _ in 0..2 {
            for qi in &self.q {
                let d = dot(qi, &v);
                v.iter_mut().zip(qi).for_each(|(vv, qq)| *vv -= d * qq);
            }
        }
        v
    }

    /// Least-squares coefficients of x on `[1, columns...]`.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        let d = self.q.len();
        let c: Vec<f64> = self.q.iter().map(|qi| dot(qi, x)).collect();
        let mut beta = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| self.r[i][j] * beta[j]).sum();
            beta[i] = (c[i] - s) / self.r[i][i];
        }
        beta
    }
}

/// In-place Cholesky factorisation of a symmetric positive definite d x d
/// matrix stored row-major; the lower triangle receives L.
pub fn cholesky(a: &mut [f64], d: usize) -> Option<()> {
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= a[j * d + k] * a[j * d + k];
        }
        if !(s > 0.0) {
            return None;
        }
        let ljj = s.sqrt();
        a[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / ljj;
        }
    }
    Some(())
}

/// Solves L L^T x = b given the factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}
