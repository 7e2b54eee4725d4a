//! Naive reference for the four combination methods: plain f64 sums, every
//! weight in natural order, every count by a full scan.

use statrs::function::gamma::gamma_ur;

pub struct Reference {
    pub statistic: Vec<f64>,
    pub p_raw: Vec<f64>,
    /// Selected mask per observed gene (adaptive methods only).
    pub mask: Vec<Option<u32>>,
    pub null_statistic: Vec<f64>,
}

fn u_of(row: &[f64], mask: u32) -> f64 {
    row.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, p)| -p.ln()).sum()
}

fn masks(k: usize) -> impl Iterator<Item = u32> {
    1..(1u32 << k)
}

/// `obs` is p x K, `null` is (B p) x K in pooled order.
pub fn afp(obs: &[Vec<f64>], null: &[Vec<f64>]) -> Reference {
    let k = obs[0].len();
    let n = null.len() as f64;
    let p_u = |u: f64, mask: u32| null.iter().filter(|r| u_of(r, mask) >= u).count() as f64 / n;
    // (p_U, tail, -U, mask), compared lexicographically
    let best = |row: &[f64]| {
        masks(k)
            .map(|m| {
                let u = u_of(row, m);
                (p_u(u, m), gamma_ur(m.count_ones() as f64, u).ln(), -u, m)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)))
            .unwrap()
    };
    let null_statistic: Vec<f64> = null.iter().map(|r| masks(k).map(|m| p_u(u_of(r, m), m)).fold(f64::INFINITY, f64::min)).collect();
    let picks: Vec<_> = obs.iter().map(|r| best(r)).collect();
    let statistic: Vec<f64> = picks.iter().map(|p| p.0).collect();
    Reference {
        p_raw: statistic.iter().map(|t| null_statistic.iter().filter(|s| **s <= *t).count() as f64 / n).collect(),
        mask: picks.iter().map(|p| Some(p.3)).collect(),
        statistic,
        null_statistic,
    }
}

pub fn afz(obs: &[Vec<f64>], null: &[Vec<f64>]) -> Reference {
    let k = obs[0].len();
    let n = null.len() as f64;
    let moments: Vec<(f64, f64)> = masks(k)
        .map(|m| {
            let us: Vec<f64> = null.iter().map(|r| u_of(r, m)).collect();
            let mean = us.iter().sum::<f64>() / n;
            let var = us.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect();
    let z = |row: &[f64], m: u32| {
        let (mean, sd) = moments[m as usize - 1];
        (u_of(row, m) - mean) / sd
    };
    let best =
        |row: &[f64]| masks(k).map(|m| (z(row, m), u_of(row, m), m)).max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(b.2.cmp(&a.2))).unwrap();
    let null_statistic: Vec<f64> = null.iter().map(|r| best(r).0).collect();
    let picks: Vec<_> = obs.iter().map(|r| best(r)).collect();
    let statistic: Vec<f64> = picks.iter().map(|p| p.0).collect();
    Reference {
        p_raw: statistic.iter().map(|t| null_statistic.iter().filter(|s| **s >= *t).count() as f64 / n).collect(),
        mask: picks.iter().map(|p| Some(p.2)).collect(),
        statistic,
        null_statistic,
    }
}

pub fn fisher(obs: &[Vec<f64>], null: &[Vec<f64>]) -> Reference {
    let all = (1u32 << obs[0].len()) - 1;
    let n = null.len() as f64;
    let null_statistic: Vec<f64> = null.iter().map(|r| 2.0 * u_of(r, all)).collect();
    let statistic: Vec<f64> = obs.iter().map(|r| 2.0 * u_of(r, all)).collect();
    Reference {
        p_raw: statistic.iter().map(|t| null_statistic.iter().filter(|s| **s >= *t).count() as f64 / n).collect(),
        mask: vec![None; obs.len()],
        statistic,
        null_statistic,
    }
}

pub fn minp(obs: &[Vec<f64>], null: &[Vec<f64>]) -> Reference {
    let n = null.len() as f64;
    let row_min = |r: &Vec<f64>| r.iter().copied().fold(f64::INFINITY, f64::min);
    let null_statistic: Vec<f64> = null.iter().map(row_min).collect();
    let statistic: Vec<f64> = obs.iter().map(row_min).collect();
    Reference {
        p_raw: statistic.iter().map(|t| null_statistic.iter().filter(|s| **s <= *t).count() as f64 / n).collect(),
        mask: vec![None; obs.len()],
        statistic,
        null_statistic,
    }
}
