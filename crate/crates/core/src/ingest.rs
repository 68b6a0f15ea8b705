//! Ecology CSV ingestion and a synthetic generator in the same format.
//!
//! Each row holds the log plant area at two census times, a competition
//! covariate `W`, and 37 aggregated precipitation (`p.00`…`p.36`) and
//! temperature (`t.00`…`t.36`) readings. Bin `j` sits at `t = j/36`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{project_samples, BasisExpansion, FourierBasis};
use crate::error::{Error, Result};
use crate::model::{compute_index, Dataset, IndexModelSpec};
use crate::seed;
use crate::simulate::Link;

pub const BINS: usize = 37;
pub const DEFAULT_BASIS_DIM: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcologyRecord {
    pub logarea_t1: f64,
    pub logarea_t0: f64,
    pub w: f64,
    pub p: Vec<f64>,
    pub temp: Vec<f64>,
}

impl EcologyRecord {
    pub fn response(&self) -> f64 {
        self.logarea_t1 - self.logarea_t0
    }
}

/// Header in file order.
pub fn column_names() -> Vec<String> {
    let mut cols = vec!["logarea.t1".to_string(), "logarea.t0".into(), "W".into()];
    cols.extend((0..BINS).map(|j| format!("p.{j:02}")));
    cols.extend((0..BINS).map(|j| format!("t.{j:02}")));
    cols
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<EcologyRecord>> {
    read_csv(std::fs::File::open(path)?)
}

/// Parse records; columns are located by name, extra columns are ignored.
pub fn read_csv(reader: impl Read) -> Result<Vec<EcologyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name}")))
    };
    let names = column_names();
    let positions: Vec<usize> = names.iter().map(|c| locate(c)).collect::<Result<_>>()?;
    let functional_in_header = header
        .iter()
        .filter(|h| is_functional_column(h, "p.") || is_functional_column(h, "t."))
        .count();
    if functional_in_header != 2 * BINS {
        return Err(Error::Schema(format!(
            "expected {} functional columns, found {functional_in_header}",
            2 * BINS
        )));
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let mut values = Vec::with_capacity(names.len());
        for (name, &pos) in names.iter().zip(&positions) {
            let cell = row.get(pos).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::ParseCell {
                row: line,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseCell {
                    row: line,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        records.push(EcologyRecord {
            logarea_t1: values[0],
            logarea_t0: values[1],
            w: values[2],
            p: values[3..3 + BINS].to_vec(),
            temp: values[3 + BINS..].to_vec(),
        });
    }
    Ok(records)
}

fn is_functional_column(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| rest.len() == 2 && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Write records with the exact header; floats use the shortest text that
/// parses back to the same value.
pub fn write_csv(records: &[EcologyRecord], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(column_names())?;
    for r in records {
        if r.p.len() != BINS || r.temp.len() != BINS {
            return Err(Error::DimensionMismatch {
                expected: BINS,
                found: if r.p.len() != BINS { r.p.len() } else { r.temp.len() },
            });
        }
        let mut row = vec![r.logarea_t1.to_string(), r.logarea_t0.to_string(), r.w.to_string()];
        row.extend(r.p.iter().chain(&r.temp).map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(records: &[EcologyRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(records, std::io::BufWriter::new(file))
}

/// Project both curves of every record onto `basis` (which should include
/// the constant), carry `W` as the scalar covariate, and use
/// `logarea.t1 − logarea.t0` as the response.
pub fn to_dataset(records: &[EcologyRecord], basis: &FourierBasis) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records".into()));
    }
    let projected: Vec<(BasisExpansion, BasisExpansion)> = records
        .par_iter()
        .map(|r| Ok((project_samples(&r.p, basis)?, project_samples(&r.temp, basis)?)))
        .collect::<Result<_>>()?;
    let (p, t): (Vec<_>, Vec<_>) = projected.into_iter().unzip();
    Dataset::new(
        vec![p, t],
        Some(records.iter().map(|r| r.w).collect()),
        records.iter().map(EcologyRecord::response).collect(),
    )
}

/// Write a single-block dataset as `y, x.00, …` with the covariate
/// coefficients on their basis (constant first).
pub fn write_functional_csv(data: &Dataset, writer: impl Write) -> Result<()> {
    if data.blocks().len() != 1 || data.w().is_some() {
        return Err(Error::InvalidInput(
            "functional dump holds exactly one block and no scalar covariate".into(),
        ));
    }
    let block = &data.blocks()[0];
    let dim = block[0].basis().dim();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((0..dim).map(|j| format!("x.{j:02}")));
    wtr.write_record(&header)?;
    for (y, x) in data.y().iter().zip(block) {
        let mut row = vec![y.to_string()];
        row.extend(x.coeffs().iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read the `y, x.00, …` dump; the covariate basis has a constant term and
/// one coefficient per `x.` column.
pub fn read_functional_csv(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let y_pos = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::Schema("missing column y".into()))?;
    let mut x_cols = Vec::new();
    for j in 0.. {
        match header.iter().position(|h| h == format!("x.{j:02}")) {
            Some(pos) => x_cols.push((format!("x.{j:02}"), pos)),
            None => break,
        }
    }
    let listed = header.iter().filter(|h| h.starts_with("x.")).count();
    if x_cols.is_empty() || listed != x_cols.len() {
        return Err(Error::Schema(format!(
            "covariate columns must be x.00 … x.{:02} without gaps",
            listed.max(1) - 1
        )));
    }
    let basis = FourierBasis::new(x_cols.len(), true)?;
    let (mut y, mut xs) = (Vec::new(), Vec::new());
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let cell = |name: &str, pos: usize| -> Result<f64> {
            let text = row.get(pos).unwrap_or("");
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseCell {
                    row: i + 1,
                    column: name.to_string(),
                    value: text.to_string(),
                })
        };
        y.push(cell("y", y_pos)?);
        let coeffs = x_cols.iter().map(|(name, pos)| cell(name, *pos)).collect::<Result<_>>()?;
        xs.push(basis.expansion(coeffs)?);
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("no data rows".into()));
    }
    Dataset::new(vec![xs], None, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEcologyConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_basis_dim")]
    pub basis_dim: usize,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_link")]
    pub link: Link,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Precipitation coefficient on the constant-free basis; scaled jointly
    /// with `beta_temp` to unit norm.
    #[serde(default = "default_beta_p")]
    pub beta_p: Vec<f64>,
    #[serde(default = "default_beta_temp")]
    pub beta_temp: Vec<f64>,
    /// Standard deviation of each random curve coefficient.
    #[serde(default = "default_curve_sd")]
    pub curve_sd: f64,
}

fn default_basis_dim() -> usize {
    DEFAULT_BASIS_DIM
}
fn default_noise() -> f64 {
    0.05
}
fn default_link() -> Link {
    Link::G2
}
fn default_alpha() -> f64 {
    0.3
}
fn default_beta_p() -> Vec<f64> {
    vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0]
}
fn default_beta_temp() -> Vec<f64> {
    vec![0.0, 0.0, -0.5, 0.8, 0.0, 0.0]
}
fn default_curve_sd() -> f64 {
    0.6
}

impl SynthEcologyConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            basis_dim: DEFAULT_BASIS_DIM,
            noise_sd: default_noise(),
            link: default_link(),
            alpha: default_alpha(),
            beta_p: default_beta_p(),
            beta_temp: default_beta_temp(),
            curve_sd: default_curve_sd(),
        }
    }
}

/// Known truth behind a synthetic ecology file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcologyTruth {
    pub beta_blocks: Vec<BasisExpansion>,
    pub alpha: f64,
    pub link: Link,
    pub noise_sd: f64,
    /// Noise-free index of every record.
    pub index: Vec<f64>,
}

impl EcologyTruth {
    pub fn spec(&self, bandwidth: f64) -> IndexModelSpec {
        IndexModelSpec {
            beta_blocks: self.beta_blocks.clone(),
            alpha: Some(self.alpha),
            bandwidth,
        }
    }
}

/// Random curves built from the basis, responses `g(index) + σ·N(0,1)`.
pub fn synth_ecology(cfg: &SynthEcologyConfig) -> Result<(Vec<EcologyRecord>, EcologyTruth)> {
    if cfg.n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let basis = FourierBasis::new(cfg.basis_dim, true)?;
    if basis.dim() > BINS {
        return Err(Error::Underdetermined {
            samples: BINS,
            dim: basis.dim(),
        });
    }
    let coef_basis = basis.coefficient_basis()?;
    for b in [&cfg.beta_p, &cfg.beta_temp] {
        if b.len() != coef_basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: coef_basis.dim(),
                found: b.len(),
            });
        }
    }
    let norm = cfg
        .beta_p
        .iter()
        .chain(&cfg.beta_temp)
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt();
    if !(norm > 0.0) {
        return Err(Error::Normalization);
    }
    let beta_blocks = vec![
        coef_basis.expansion(cfg.beta_p.iter().map(|c| c / norm).collect())?,
        coef_basis.expansion(cfg.beta_temp.iter().map(|c| c / norm).collect())?,
    ];

    let mut rng = seed::rng(cfg.seed);
    let curve = |level: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Result<Vec<f64>> {
        let mut coeffs: Vec<f64> = (0..basis.dim())
            .map(|_| cfg.curve_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        coeffs[0] += level;
        let x = basis.expansion(coeffs)?;
        (0..BINS).map(|j| x.evaluate(j as f64 / (BINS - 1) as f64)).collect()
    };
    let mut records = Vec::with_capacity(cfg.n);
    let mut noise = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let p = curve(2.0, &mut rng)?;
        let temp = curve(1.0, &mut rng)?;
        let w: f64 = rng.sample(StandardNormal);
        let t0 = 3.0 + 0.5 * rng.sample::<f64, _>(StandardNormal);
        noise.push(cfg.noise_sd * rng.sample::<f64, _>(StandardNormal));
        records.push(EcologyRecord {
            logarea_t1: t0,
            logarea_t0: t0,
            w,
            p,
            temp,
        });
    }

    let truth_spec = IndexModelSpec {
        beta_blocks: beta_blocks.clone(),
        alpha: Some(cfg.alpha),
        bandwidth: 1.0,
    };
    let index = compute_index(&to_dataset(&records, &basis)?, &truth_spec)?;
    for ((r, z), e) in records.iter_mut().zip(&index).zip(noise) {
        r.logarea_t1 = r.logarea_t0 + cfg.link.value(*z) + e;
    }
    Ok((
        records,
        EcologyTruth {
            beta_blocks,
            alpha: cfg.alpha,
            link: cfg.link,
            noise_sd: cfg.noise_sd,
            index,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(level: f64) -> EcologyRecord {
        EcologyRecord {
            logarea_t1: 2.5,
            logarea_t0: 1.25,
            w: -0.5,
            p: vec![level; BINS],
            temp: (0..BINS).map(|j| j as f64 * 0.1).collect(),
        }
    }

    fn to_text(records: &[EcologyRecord]) -> String {
        let mut buf = Vec::new();
        write_csv(records, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn header_shape() {
        let cols = column_names();
        assert_eq!(cols.len(), 3 + 2 * BINS);
        assert_eq!(cols[3], "p.00");
        assert_eq!(cols[3 + 36], "p.36");
        assert_eq!(cols.last().unwrap(), "t.36");
    }

    #[test]
    fn two_rows_with_responses() {
        let mut b = record(1.0);
        b.logarea_t1 = 0.0;
        let parsed = read_csv(to_text(&[record(1.0), b]).as_bytes()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].response(), 1.25);
        assert_eq!(parsed[1].response(), -1.25);
    }

    #[test]
    fn missing_column_is_named() {
        let text = to_text(&[record(1.0)]).replacen("t.17", "t_17", 1);
        match read_csv(text.as_bytes()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("t.17"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_has_coordinates() {
        let text = to_text(&[record(1.0), record(2.0)]);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replacen("-0.5", "abc", 1);
        match read_csv(lines.join("\n").as_bytes()) {
            Err(Error::ParseCell { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "W", "abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extra_functional_column_rejected() {
        let text = to_text(&[record(1.0)]);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[0].push_str(",p.37");
        lines[1].push_str(",0");
        assert!(matches!(read_csv(lines.join("\n").as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn constant_curve_projects_to_constant_term() {
        let basis = FourierBasis::new(7, true).unwrap();
        let data = to_dataset(&[record(3.0), record(-1.0)], &basis).unwrap();
        assert_eq!(data.n(), 2);
        assert_eq!(data.blocks().len(), 2);
        assert_eq!(data.w(), Some(&[-0.5, -0.5][..]));
        let c = data.blocks()[0][0].coeffs();
        assert!((c[0] - 3.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn basis_larger_than_bins() {
        let basis = FourierBasis::new(39, true).unwrap();
        assert!(matches!(
            to_dataset(&[record(1.0)], &basis),
            Err(Error::Underdetermined { samples: 37, dim: 39 })
        ));
    }

    #[test]
    fn functional_dump_round_trip() {
        let sim = crate::simulate::generate(&crate::simulate::SimScenario::new(6, Link::G1, 2)).unwrap();
        let mut buf = Vec::new();
        write_functional_csv(&sim.data, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("y,x.00,x.01,"));
        assert_eq!(read_functional_csv(text.as_bytes()).unwrap(), sim.data);
        let gap = text.replacen("x.03", "x.3", 1);
        assert!(matches!(read_functional_csv(gap.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SynthEcologyConfig::new(20, 4);
        let (a, ta) = synth_ecology(&cfg).unwrap();
        let (b, tb) = synth_ecology(&cfg).unwrap();
        assert_eq!(to_text(&a), to_text(&b));
        assert_eq!(ta, tb);
        let n2: f64 = ta.beta_blocks.iter().map(|b| b.norm().powi(2)).sum();
        assert!((n2 - 1.0).abs() < 1e-12);
    }
}
