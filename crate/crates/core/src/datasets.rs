//! Synthetic benchmark series, ground-truth labels and CSV I/O.
//!
//! All three generators produce 10 segments of 2000 timestamps (so
//! `T = 20000` and change points at 2000, 4000, ..., 18000):
//!
//! 1. AR(2) `x1(t) = 0.6 x1(t-1) - 0.5 x1(t-2) + e1(t)` with `e1 ~ N(mu_N, 1)`,
//!    `mu_1 = 0`, `mu_N = mu_{N-1} + 0.5 N`; plus an uninformative second
//!    component `x2 ~ N(0, 5)`.
//! 2. The same AR(2) with `e1 ~ N(0, sigma_N)`, `sigma_1 = 1`,
//!    `sigma_N = 1 + 0.25 N`; same second component.
//! 3. `x(t) = sin(omega_N t) + e(t)`, `e ~ N(0.5, 1)`, `omega_1 = 1`,
//!    `omega_N = ln(e + 0.5 N)`.
//!
//! The AR recursion starts from zeros, runs a 200-step burn-in with the
//! first segment's parameters, and then continues across segment borders.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::error::{CpdError, Result};
use crate::rng::rng_from_seed;
use crate::timeseries::{Rows, TimeSeries};

pub const SEGMENTS: usize = 10;
pub const SEGMENT_LENGTH: usize = 2000;
const BURN_IN: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum DatasetId {
    #[serde(rename = "1")]
    MeanShift,
    #[serde(rename = "2")]
    VarianceShift,
    #[serde(rename = "3")]
    FrequencyShift,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [
        DatasetId::MeanShift,
        DatasetId::VarianceShift,
        DatasetId::FrequencyShift,
    ];

    pub fn number(self) -> u8 {
        match self {
            DatasetId::MeanShift => 1,
            DatasetId::VarianceShift => 2,
            DatasetId::FrequencyShift => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(DatasetId::MeanShift),
            2 => Ok(DatasetId::VarianceShift),
            3 => Ok(DatasetId::FrequencyShift),
            _ => Err(CpdError::invalid(format!("unknown dataset {n}; expected 1, 2 or 3"))),
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for DatasetId {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| CpdError::invalid(format!("unknown dataset '{s}'; expected 1, 2 or 3")))?;
        Self::from_number(n)
    }
}

/// Parameters of a synthetic benchmark instance.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub dataset: DatasetId,
    pub segments: usize,
    pub segment_length: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(dataset: DatasetId, seed: u64) -> Self {
        Self {
            dataset,
            segments: SEGMENTS,
            segment_length: SEGMENT_LENGTH,
            seed,
        }
    }

    pub fn generate(&self) -> LabeledSeries {
        match self.dataset {
            DatasetId::MeanShift => ar_dataset(self, &mean_schedule(self.segments), &vec![1.0; self.segments]),
            DatasetId::VarianceShift => ar_dataset(self, &vec![0.0; self.segments], &sd_schedule(self.segments)),
            DatasetId::FrequencyShift => periodic_dataset(self),
        }
    }

    pub fn change_points(&self) -> Vec<usize> {
        (1..self.segments).map(|i| i * self.segment_length).collect()
    }
}

/// A series with its ground-truth change points.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    pub series: TimeSeries,
    pub change_points: Vec<usize>,
}

impl LabeledSeries {
    pub fn labels(&self, n: usize) -> Result<Vec<u8>> {
        label_series(self.series.len(), &self.change_points, n)
    }
}

/// `mu_1 = 0`, `mu_N = mu_{N-1} + 0.5 N`.
pub fn mean_schedule(segments: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(segments);
    let mut mu = 0.0;
    for seg in 1..=segments {
        if seg > 1 {
            mu += 0.5 * seg as f64;
        }
        out.push(mu);
    }
    out
}

/// `sigma_1 = 1`, `sigma_N = 1 + 0.25 N`.
pub fn sd_schedule(segments: usize) -> Vec<f64> {
    (1..=segments)
        .map(|seg| if seg == 1 { 1.0 } else { 1.0 + 0.25 * seg as f64 })
        .collect()
}

/// `omega_1 = 1`, `omega_N = ln(e + 0.5 N)`.
pub fn frequency_schedule(segments: usize) -> Vec<f64> {
    (1..=segments)
        .map(|seg| {
            if seg == 1 {
                1.0
            } else {
                (std::f64::consts::E + 0.5 * seg as f64).ln()
            }
        })
        .collect()
}

fn ar_dataset(spec: &SyntheticSpec, means: &[f64], sds: &[f64]) -> LabeledSeries {
    let mut rng = rng_from_seed(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise2 = Normal::new(0.0, 5.0).expect("valid normal");
    let len = spec.segments * spec.segment_length;
    let (mut x1, mut x2) = (0.0f64, 0.0f64);
    let mut step = |mean: f64, sd: f64, rng: &mut crate::rng::CpdRng| {
        let e = mean + sd * std_normal.sample(rng);
        let next = 0.6 * x1 - 0.5 * x2 + e;
        x2 = x1;
        x1 = next;
        next
    };
    for _ in 0..BURN_IN {
        step(means[0], sds[0], &mut rng);
    }
    let mut data = Vec::with_capacity(2 * len);
    for t in 0..len {
        let seg = t / spec.segment_length;
        let v = step(means[seg], sds[seg], &mut rng);
        data.push(v);
        data.push(noise2.sample(&mut rng));
    }
    LabeledSeries {
        series: TimeSeries::new(Rows::new(data, 2).expect("width 2")).expect("finite"),
        change_points: spec.change_points(),
    }
}

fn periodic_dataset(spec: &SyntheticSpec) -> LabeledSeries {
    let mut rng = rng_from_seed(spec.seed);
    let noise = Normal::new(0.5, 1.0).expect("valid normal");
    let omegas = frequency_schedule(spec.segments);
    let len = spec.segments * spec.segment_length;
    let data: Vec<f64> = (0..len)
        .map(|t| (omegas[t / spec.segment_length] * t as f64).sin() + noise.sample(&mut rng))
        .collect();
    LabeledSeries {
        series: TimeSeries::univariate(&data).expect("finite"),
        change_points: spec.change_points(),
    }
}

pub fn gen_dataset1(seed: u64) -> LabeledSeries {
    SyntheticSpec::new(DatasetId::MeanShift, seed).generate()
}

pub fn gen_dataset2(seed: u64) -> LabeledSeries {
    SyntheticSpec::new(DatasetId::VarianceShift, seed).generate()
}

pub fn gen_dataset3(seed: u64) -> LabeledSeries {
    SyntheticSpec::new(DatasetId::FrequencyShift, seed).generate()
}

/// 1 on every `[t*, t* + 2n)` (clipped to the series), 0 elsewhere.
pub fn label_series(len: usize, change_points: &[usize], n: usize) -> Result<Vec<u8>> {
    if change_points.windows(2).any(|w| w[1] < w[0]) {
        return Err(CpdError::invalid("change points must be sorted"));
    }
    if let Some(&cp) = change_points.iter().find(|&&c| c >= len) {
        return Err(CpdError::invalid(format!(
            "change point {cp} outside series of length {len}"
        )));
    }
    let mut labels = vec![0u8; len];
    for &cp in change_points {
        let end = (cp + 2 * n).min(len);
        labels[cp..end].iter_mut().for_each(|l| *l = 1);
    }
    Ok(labels)
}

/// Reads a comma-separated series, one timestamp per row. With
/// `has_header`, the first line is skipped.
pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 1;
        let record = record.map_err(|e| {
            let line = e.position().map_or(line, |p| p.line());
            CpdError::parse(line, e.to_string())
        })?;
        if has_header && i == 0 {
            continue;
        }
        let line = record.position().map_or(line, |p| p.line());
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CpdError::parse(
                    line,
                    format!("expected {w} columns, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| CpdError::parse(line, format!("non-numeric cell '{cell}'")))?;
            if !v.is_finite() {
                return Err(CpdError::parse(line, format!("non-finite cell '{cell}'")));
            }
            data.push(v);
        }
    }
    let width = width
        .filter(|_| !data.is_empty())
        .ok_or_else(|| CpdError::parse(1, "file contains no data rows"))?;
    let rows = Rows::new(data, width).map_err(|e| CpdError::parse(1, e.to_string()))?;
    TimeSeries::new(rows)
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<TimeSeries> {
    read_csv(File::open(path)?, has_header)
}

/// Writes one row per timestamp using the shortest round-trip decimal form.
pub fn write_csv<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for row in series.values().iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    write_csv(series, File::create(path)?)
}

/// One non-negative integer change point per line; blank lines ignored.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let cp: usize = s
            .parse()
            .map_err(|_| CpdError::parse(i as u64 + 1, format!("'{s}' is not a change point index")))?;
        if out.last().is_some_and(|&prev| cp <= prev) {
            return Err(CpdError::parse(
                i as u64 + 1,
                "change points must be strictly increasing",
            ));
        }
        out.push(cp);
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    read_labels(File::open(path)?)
}

pub fn write_labels<W: Write>(change_points: &[usize], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for cp in change_points {
        writeln!(w, "{cp}")?;
    }
    w.flush()?;
    Ok(())
}
