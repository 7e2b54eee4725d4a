//! CSV tables behind the figures, plus bare-bones SVG renderings of them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use afweight::stability::CoMembershipMatrix;
use afweight::tsv::Table;
use afweight::PValueMatrix;
use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::commands::{existing, significant_genes};
use crate::config::{need, resolve, write_snapshot};
use crate::CliError;

/// Signed -log10 p is clipped to this magnitude so a few extreme genes do
/// not wash out the colour scale.
pub const SIGNED_LOGP_CAP: f64 = 10.0;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PlotArgs {
    #[arg(long, env = "AFW_PVALUES")]
    pub pvalues: Option<PathBuf>,
    #[arg(long, env = "AFW_RESULTS")]
    pub results: Option<PathBuf>,
    /// Method whose Bonferroni-significant genes are plotted.
    #[arg(long, env = "AFW_METHOD")]
    pub method: Option<String>,
    #[arg(long, env = "AFW_ALPHA")]
    pub alpha: Option<f64>,
    /// B used for the resolution warning.
    #[arg(long, env = "AFW_PERMS")]
    pub perms: Option<usize>,
    /// clusters.tsv from `categorize`; orders rows by module.
    #[arg(long, env = "AFW_CLUSTERS")]
    pub clusters: Option<PathBuf>,
    #[arg(long, env = "AFW_COMEMBERSHIP")]
    pub comembership: Option<PathBuf>,
    #[arg(long, env = "AFW_VARIABILITY")]
    pub variability: Option<PathBuf>,
    /// Write SVG renderings next to the CSVs.
    #[arg(long, env = "AFW_SVG", num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
    #[arg(long, env = "AFW_OUT")]
    pub out: Option<PathBuf>,
}

/// -log10 p times the sign, clipped to +-[`SIGNED_LOGP_CAP`].
pub fn signed_logp(p: f64, sign: i8) -> f64 {
    (-p.log10() * sign as f64).clamp(-SIGNED_LOGP_CAP, SIGNED_LOGP_CAP)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Module label per gene from clusters.tsv; scattered genes map to None.
fn read_clusters(path: &Path) -> Result<HashMap<String, Option<usize>>> {
    let table = Table::read(path)?;
    table.expect_header_prefix("gene_id")?;
    table
        .rows
        .iter()
        .map(|(line, cells)| {
            let module = match cells.get(1).map(String::as_str) {
                Some("NA") => None,
                Some(m) => Some(m.parse::<usize>().map_err(|_| CliError::Invalid(format!("{}:{line}: bad module {m:?}", table.file)))?),
                None => return Err(CliError::Invalid(format!("{}:{line}: missing module column", table.file)).into()),
            };
            Ok((cells[0].clone(), module))
        })
        .collect()
}

/// Column names and rows keyed by gene_id.
type Matrix = (Vec<String>, HashMap<String, Vec<f64>>);

fn read_matrix(path: &Path) -> Result<Matrix> {
    let table = Table::read(path)?;
    table.expect_header_prefix("gene_id")?;
    let mut rows = HashMap::new();
    for (line, cells) in &table.rows {
        let values = cells[1..].iter().enumerate().map(|(c, v)| table.number(*line, c + 1, v)).collect::<afweight::Result<Vec<_>>>()?;
        rows.insert(cells[0].clone(), values);
    }
    Ok((table.header[1..].to_vec(), rows))
}

fn module_label(m: Option<usize>) -> String {
    m.map_or("scattered".into(), |m| format!("M{m}"))
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    afweight::tsv::fmt_f64(v)
}

pub fn plot_cmd(flags: &PlotArgs, file: &Map<String, Value>) -> Result<()> {
    let a: PlotArgs = resolve(
        "plot-data",
        json!({
            "pvalues": "pvalues.tsv", "results": "results.tsv", "method": "afp", "alpha": 0.05, "perms": 100,
            "clusters": null, "comembership": null, "variability": null, "svg": true, "out": "."
        }),
        file,
        flags,
    )?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let svg = a.svg.unwrap_or(true);
    let method = need(&a.method, "method")?.parse().map_err(|e: afweight::Error| CliError::Invalid(e.to_string()))?;
    let pm = PValueMatrix::read_tsv(existing(need(&a.pvalues, "pvalues")?, "association p-values (run `assoc`)")?)?;
    let results = existing(need(&a.results, "results")?, "combined results (run `combine`)")?;
    let significant = significant_genes(results, method, a.alpha.unwrap_or(0.05), a.perms.unwrap_or(100))?;
    let index: HashMap<&str, usize> = pm.gene_ids.iter().enumerate().map(|(j, g)| (g.as_str(), j)).collect();

    let modules = match &a.clusters {
        Some(p) => Some(read_clusters(existing(p, "cluster table (run `categorize`)")?)?),
        None => None,
    };
    // Rows follow module order (scattered last) when clusters are known.
    let mut genes: Vec<String> = significant.clone();
    if let Some(m) = &modules {
        genes.sort_by_key(|g| m.get(g).copied().flatten().unwrap_or(usize::MAX));
    }
    let module_of = |g: &str| modules.as_ref().map(|m| module_label(m.get(g).copied().flatten()));
    let rows: Vec<usize> = genes
        .iter()
        .map(|g| index.get(g.as_str()).copied().ok_or_else(|| CliError::Invalid(format!("gene {g} from the results is missing from the p-values"))))
        .collect::<std::result::Result<_, _>>()?;

    // boxplot.csv: long format, one line per (phenotype, significant gene)
    let names = &pm.phenotype_names;
    let mut long = Vec::new();
    let mut per_pheno: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (&j, g) in rows.iter().zip(&genes) {
        for (k, &p) in pm.row(j).iter().enumerate() {
            let v = -p.log10();
            per_pheno[k].push(v);
            long.push(vec![names[k].clone(), g.clone(), num(v)]);
        }
    }
    write_csv(&out.join("boxplot.csv"), &["phenotype".into(), "gene_id".into(), "neg_log10_p".into()], long)?;
    if svg {
        std::fs::write(out.join("boxplot.svg"), boxplot_svg(names, &per_pheno))?;
    }

    // signed_logp.csv
    let mut header = vec!["gene_id".to_string()];
    if modules.is_some() {
        header.push("module".into());
    }
    header.extend(names.iter().cloned());
    let mut grid = Vec::new();
    let mut csv_rows = Vec::new();
    for (&j, g) in rows.iter().zip(&genes) {
        let vals: Vec<f64> = pm.row(j).iter().zip(pm.sign_row(j)).map(|(&p, &s)| signed_logp(p, s)).collect();
        let mut r = vec![g.clone()];
        r.extend(module_of(g));
        r.extend(vals.iter().map(|v| num(*v)));
        csv_rows.push(r);
        grid.push(vals);
    }
    write_csv(&out.join("signed_logp.csv"), &header, csv_rows)?;
    if svg {
        std::fs::write(out.join("signed_logp.svg"), heatmap_svg(&genes, names, &grid, -SIGNED_LOGP_CAP, SIGNED_LOGP_CAP))?;
    }

    if let Some(path) = &a.comembership {
        let v = CoMembershipMatrix::read_tsv(existing(path, "co-membership matrix (run `categorize`)")?)?;
        let mut order: Vec<usize> = (0..v.len()).collect();
        if let Some(m) = &modules {
            order.sort_by_key(|&i| m.get(&v.gene_ids[i]).copied().flatten().unwrap_or(usize::MAX));
        }
        let ids: Vec<String> = order.iter().map(|&i| v.gene_ids[i].clone()).collect();
        let grid: Vec<Vec<f64>> = order.iter().map(|&i| order.iter().map(|&j| v.get(i, j)).collect()).collect();
        let mut header = vec!["gene_id".to_string()];
        header.extend(ids.iter().cloned());
        write_csv(
            &out.join("heatmap_comembership.csv"),
            &header,
            ids.iter().zip(&grid).map(|(g, r)| std::iter::once(g.clone()).chain(r.iter().map(|v| num(*v))).collect()),
        )?;
        if svg {
            std::fs::write(out.join("heatmap_comembership.svg"), heatmap_svg(&ids, &ids, &grid, 0.0, 1.0))?;
        }
    }

    if let Some(path) = &a.variability {
        let (cols, table) = read_matrix(existing(path, "variability matrix (run `bootstrap`)")?)?;
        let mut ids: Vec<String> = table.keys().cloned().collect();
        ids.sort();
        if let Some(m) = &modules {
            ids.sort_by_key(|g| m.get(g).copied().flatten().unwrap_or(usize::MAX));
        }
        let mut header = vec!["gene_id".to_string()];
        if modules.is_some() {
            header.push("module".into());
        }
        header.extend(cols.iter().cloned());
        let grid: Vec<Vec<f64>> = ids.iter().map(|g| table[g].clone()).collect();
        write_csv(
            &out.join("variability.csv"),
            &header,
            ids.iter().zip(&grid).map(|(g, r)| {
                let mut row = vec![g.clone()];
                row.extend(module_of(g));
                row.extend(r.iter().map(|v| num(*v)));
                row
            }),
        )?;
        if svg {
            std::fs::write(out.join("variability.svg"), heatmap_svg(&ids, &cols, &grid, 0.0, 1.0))?;
        }
    }
    write_snapshot(&out, "plot-data", &a)?;
    log::info!("plot data for {} significant genes in {}", genes.len(), out.display());
    Ok(())
}

const CELL: usize = 12;
const MARGIN: usize = 120;

/// Diverging blue-white-red when the range spans 0, white-to-blue otherwise.
fn colour(v: f64, lo: f64, hi: f64) -> String {
    let (r, g, b) = if lo < 0.0 {
        let t = (v / hi.max(-lo)).clamp(-1.0, 1.0);
        if t >= 0.0 {
            (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
        } else {
            (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
        }
    } else {
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        (255.0 * (1.0 - t), 255.0 * (1.0 - 0.6 * t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

pub fn heatmap_svg(rows: &[String], cols: &[String], values: &[Vec<f64>], lo: f64, hi: f64) -> String {
    let (w, h) = (MARGIN + cols.len() * CELL, MARGIN + rows.len() * CELL);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"9\">\n");
    let labels = rows.len() <= 80;
    for (c, name) in cols.iter().enumerate() {
        let x = MARGIN + c * CELL + CELL / 2;
        let _ = writeln!(s, "<text transform=\"translate({x},{}) rotate(-60)\">{}</text>", MARGIN - 4, escape(name));
    }
    for (r, row) in values.iter().enumerate() {
        let y = MARGIN + r * CELL;
        if labels {
            let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", MARGIN - 4, y + CELL - 3, escape(&rows[r]));
        }
        for (c, &v) in row.iter().enumerate() {
            let _ = writeln!(s, "<rect x=\"{}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\"/>", MARGIN + c * CELL, colour(v, lo, hi));
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn boxplot_svg(names: &[String], groups: &[Vec<f64>]) -> String {
    const H: f64 = 240.0;
    const SLOT: usize = 50;
    let top = groups.iter().flatten().copied().fold(1.0f64, f64::max);
    let y = |v: f64| 20.0 + H * (1.0 - v / top);
    let width = 60 + names.len() * SLOT;
    let mut s =
        format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"10\">\n", H as usize + 60);
    let _ = writeln!(s, "<text x=\"4\" y=\"14\">-log10 p (max {:.1})</text>", top);
    for (k, (name, g)) in names.iter().zip(groups).enumerate() {
        let cx = 60 + k * SLOT + SLOT / 2;
        let _ = writeln!(s, "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\">{}</text>", H as usize + 40, escape(name));
        if g.is_empty() {
            continue;
        }
        let mut v = g.clone();
        v.sort_by(f64::total_cmp);
        let [lo, q1, med, q3, hi] = [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| y(quantile(&v, q)));
        let (x0, x1) = (cx - 12, cx + 12);
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{lo:.1}\" x2=\"{cx}\" y2=\"{hi:.1}\" stroke=\"black\"/>");
        let _ = writeln!(s, "<rect x=\"{x0}\" y=\"{q3:.1}\" width=\"24\" height=\"{:.1}\" fill=\"#9ecae1\" stroke=\"black\"/>", (q1 - q3).max(0.5));
        let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{med:.1}\" x2=\"{x1}\" y2=\"{med:.1}\" stroke=\"black\" stroke-width=\"2\"/>");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
