use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use fsim_core::locfit::local_quad_estimate;

use crate::fit::FitArtifact;
use crate::svg::{chart, Mode, Series};
use crate::truth::TruthFile;
use crate::{create_dir, read_json, write_file, CliError, CliResult};

pub const GRID_POINTS: usize = 1000;
const BETA_POINTS: usize = 101;

#[derive(Args)]
pub struct PlotArgs {
    /// `fit.json` written by `fsim fit`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
}

/// Column-oriented table; `None` cells are written empty.
struct Table {
    header: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); header.len()],
        }
    }

    fn push(&mut self, row: &[Option<f64>]) {
        for (col, v) in self.columns.iter_mut().zip(row) {
            col.push(*v);
        }
    }

    fn to_csv(&self, meta: &str) -> String {
        let mut out = format!("# {meta}\n{}\n", self.header.join(","));
        for i in 0..self.columns[0].len() {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| c[i].map(|v| v.to_string()).unwrap_or_default())
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    fn series(&self, x: usize, y: usize, color: &'static str, mode: Mode) -> Series {
        Series {
            name: self.header[y].clone(),
            color,
            mode,
            points: self.columns[x]
                .iter()
                .zip(&self.columns[y])
                .filter_map(|(x, y)| x.map(|x| (x, *y)))
                .collect(),
        }
    }
}

/// `m` equally spaced points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            if k + 1 == m {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (m - 1) as f64
            }
        })
        .collect()
}

fn estimate(fit: &FitArtifact, u: f64, h: f64, k: usize) -> Option<f64> {
    local_quad_estimate(&fit.index, &fit.y, u, h).ok().map(|e| e[k])
}

fn emit(out: &Path, name: &str, meta: &str, table: &Table, svg: Option<String>) -> CliResult<()> {
    write_file(&out.join(format!("{name}.csv")), table.to_csv(meta))?;
    if let Some(svg) = svg {
        write_file(&out.join(format!("{name}.svg")), svg)?;
    }
    Ok(())
}

pub fn cmd_plot(args: PlotArgs) -> CliResult<()> {
    let fit: FitArtifact = read_json(&args.fit)?;
    let truth: Option<TruthFile> = args.truth.as_deref().map(read_json).transpose()?;
    if fit.index.is_empty() || fit.index.len() != fit.y.len() {
        return Err(CliError::Data("fit artifact has no usable index values".into()));
    }
    if let Some(t) = &truth {
        if t.index.len() != fit.index.len() {
            return Err(CliError::Data("truth file does not match the fit".into()));
        }
    }
    let mut meta = format!(
        "seed={} strategy={} method={} h={} scaled_h={} curvature_h={}",
        fit.seed,
        fit.strategy,
        fit.method.label(),
        fit.chosen_h,
        fit.scaled_h,
        fit.curvature_h
    );
    if let Some(t) = &truth {
        let _ = write!(meta, " noise_sd={} link={}", t.noise_sd, t.link.label());
    }
    create_dir(&args.out)?;

    let lo = fit.index.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fit.index.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let us = grid(lo, hi, GRID_POINTS);
    let link = truth.as_ref().map(|t| t.link);

    for (name, k, h, label) in [("g", 0, fit.scaled_h, "g"), ("g2", 2, fit.curvature_h, "g''")] {
        let hat = format!("{name}_hat");
        let tru = format!("{name}_true");
        let mut header = vec!["u", hat.as_str()];
        if link.is_some() {
            header.push(tru.as_str());
        }
        let mut table = Table::new(&header);
        for &u in &us {
            let mut row = vec![Some(u), estimate(&fit, u, h, k)];
            if let Some(l) = link {
                row.push(Some(l.derivative(u, k)));
            }
            table.push(&row);
        }
        let svg = args.svg.then(|| {
            let mut s = Vec::new();
            if link.is_some() {
                s.push(table.series(0, 2, "black", Mode::Line));
            }
            s.push(table.series(0, 1, "red", Mode::Line));
            chart(&format!("estimated {label}"), "index", label, &s)
        });
        emit(&args.out, name, &meta, &table, svg)?;
    }

    let ts = grid(0.0, 1.0, BETA_POINTS);
    let blocks = fit.spec.beta_blocks.len();
    let names: Vec<String> = (1..=blocks)
        .map(|b| format!("beta{b}_hat"))
        .chain(truth.iter().flat_map(|_| (1..=blocks).map(|b| format!("beta{b}_true"))))
        .collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    let mut table = Table::new(&header);
    for &t in &ts {
        let mut row = vec![Some(t)];
        for b in &fit.spec.beta_blocks {
            row.push(b.evaluate(t).ok());
        }
        if let Some(tr) = &truth {
            for b in &tr.beta_blocks {
                row.push(b.evaluate(t).ok());
            }
        }
        table.push(&row);
    }
    let svg = args.svg.then(|| {
        const COLORS: [&str; 4] = ["red", "blue", "black", "gray"];
        let s: Vec<Series> = (1..header.len())
            .map(|c| table.series(0, c, COLORS[(c - 1) % COLORS.len()], Mode::Line))
            .collect();
        chart("coefficient functions", "t", "beta(t)", &s)
    });
    emit(&args.out, "beta", &meta, &table, svg)?;

    if let Some(tr) = &truth {
        let mut scatter = Table::new(&["true_index", "estimated_index"]);
        let mut curvature = Table::new(&["true_index", "g2_hat", "g2_true"]);
        for (i, (&z0, &z)) in tr.index.iter().zip(&fit.index).enumerate() {
            scatter.push(&[Some(z0), Some(z)]);
            curvature.push(&[Some(z0), estimate(&fit, fit.index[i], fit.curvature_h, 2), Some(tr.link.derivative(z0, 2))]);
        }
        let svg = args.svg.then(|| {
            let (a, b) = tr.index.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let diagonal = Series {
                name: "y = x".into(),
                color: "red",
                mode: Mode::Line,
                points: vec![(a, Some(a)), (b, Some(b))],
            };
            chart(
                "estimated vs true index",
                "true index",
                "estimated index",
                &[scatter.series(0, 1, "black", Mode::Points), diagonal],
            )
        });
        emit(&args.out, "index_scatter", &meta, &scatter, svg)?;
        let mut sorted = Table::new(&["true_index", "g2_hat", "g2_true"]);
        let mut order: Vec<usize> = (0..tr.index.len()).collect();
        order.sort_by(|&a, &b| tr.index[a].total_cmp(&tr.index[b]));
        for &i in &order {
            sorted.push(&[curvature.columns[0][i], curvature.columns[1][i], curvature.columns[2][i]]);
        }
        let svg = args.svg.then(|| {
            chart(
                "g'' at estimated index vs true index",
                "true index",
                "g''",
                &[
                    sorted.series(0, 2, "black", Mode::Line),
                    sorted.series(0, 1, "red", Mode::Points),
                ],
            )
        });
        emit(&args.out, "curvature_scatter", &meta, &curvature, svg)?;
    }
    Ok(())
}
