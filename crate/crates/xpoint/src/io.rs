//! Reading and writing the on-disk formats.
//!
//! Page and output indices are 1-based in every file; the model is 0-based.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use xpoint_core::experiments::{Aggregate, ReportHeader, Stats, SweepReport, SweepRow};
use xpoint_core::{circuit, CitationMatrix, EigenSystem, Matrix, OpAmpParams, RankResult, SimConfig, Trace};

use crate::error::{Error, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(Error::io(path))
}

/// Numeric rows of a headerless CSV file with their 1-based line numbers.
/// Blank lines and `#` comments are skipped.
fn numeric_rows(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                let field = field.trim();
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::format(path, idx + 1, format!("column {}: '{field}' is not a finite number", col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((idx + 1, values));
    }
    Ok(rows)
}

/// Square matrix from a headerless CSV file, one row per line.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let rows = numeric_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::format(path, 1, "empty matrix file"));
    };
    let n = first.len();
    for (line, row) in &rows {
        if row.len() != n {
            return Err(Error::format(path, *line, format!("expected {n} columns, found {}", row.len())));
        }
    }
    if rows.len() != n {
        return Err(Error::format(
            path,
            rows.last().map_or(1, |r| r.0),
            format!("matrix must be square: {} rows of {n} columns", rows.len()),
        ));
    }
    let data = rows.into_iter().flat_map(|(_, r)| r).collect();
    Ok(Matrix::new(n, n, data)?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for i in 0..m.rows() {
        w.serialize(m.row(i)).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// A vector stored as a single CSV line.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let rows = numeric_rows(path)?;
    match rows.as_slice() {
        [(_, v)] => Ok(v.clone()),
        [] => Err(Error::format(path, 1, "empty vector file")),
        [_, (line, _), ..] => Err(Error::format(path, *line, "vector file must hold a single line")),
    }
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.serialize(v).map_err(Error::csv(path))?;
    w.flush().map_err(Error::io(path))
}

/// Citation graph from a "from to" edge list.
pub fn load_edge_list(path: &Path) -> Result<CitationMatrix> {
    let text = read_to_string(path)?;
    xpoint_core::pagerank::parse_edge_list(&text).map_err(|e| match e {
        xpoint_core::Error::Parse { line, message } => Error::format(path, line, message),
        other => other.into(),
    })
}

/// Circuit description: coefficients, mismatch and amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(rename = "L0")]
    pub l0: f64,
    pub omega0: f64,
    pub v_supp: f64,
}

impl SystemFile {
    pub fn from_system(sys: &EigenSystem) -> Self {
        let a = sys.coefficients();
        let params = sys.params();
        Self {
            a: (0..a.rows()).map(|i| a.row(i).to_vec()).collect(),
            delta: sys.delta(),
            lambdas: sys.delta().is_none().then(|| sys.lambdas().to_vec()),
            l0: params.l0,
            omega0: params.omega0,
            v_supp: params.v_supp,
        }
    }

    pub fn to_system(&self) -> xpoint_core::Result<EigenSystem> {
        let a = Matrix::from_rows(&self.a)?;
        let params = OpAmpParams::new(self.l0, self.omega0, self.v_supp)?;
        match (&self.delta, &self.lambdas) {
            (Some(delta), None) => EigenSystem::from_matrix(a, *delta, params),
            (None, Some(lambdas)) => {
                let lambda_max = circuit::dominant(&a)?.value;
                EigenSystem::with_lambdas(a, lambda_max, lambdas.clone(), params)
            }
            _ => Err(xpoint_core::Error::InvalidArgument(
                "system file needs exactly one of delta or lambdas",
            )),
        }
    }
}

pub fn read_system(path: &Path) -> Result<EigenSystem> {
    let file: SystemFile = serde_json::from_str(&read_to_string(path)?).map_err(Error::json(path))?;
    Ok(file.to_system()?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::json(path))?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_to_string(path)?).map_err(Error::json(path))
}

/// Trace as CSV: `time_s,x_1,...,x_N`.
pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<String> = std::iter::once("time_s".to_string())
        .chain((1..=trace.n).map(|k| format!("x_{k}")))
        .collect();
    w.write_record(&header).map_err(Error::csv(path))?;
    for k in 0..trace.times.len() {
        let record: Vec<f64> = std::iter::once(trace.times[k]).chain(trace.x(k).iter().copied()).collect();
        w.serialize(record).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Times and output rows of a trace CSV.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let header = r.headers().map_err(Error::csv(path))?.clone();
    if header.get(0) != Some("time_s") {
        return Err(Error::format(path, 1, "trace header must start with time_s"));
    }
    let (mut times, mut xs) = (Vec::new(), Vec::new());
    for record in r.deserialize::<Vec<f64>>() {
        let mut row = record.map_err(Error::csv(path))?;
        times.push(row.remove(0));
        xs.push(row);
    }
    Ok((times, xs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub computing_time_s: Option<f64>,
    pub epsilon: f64,
    pub lambda_h: f64,
    /// 1-based.
    pub saturated_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFile {
    pub scores: Vec<f64>,
    /// 1-based pages by descending score.
    pub order: Vec<usize>,
    pub computing_time_s: Option<f64>,
    pub epsilon: f64,
}

impl From<&RankResult> for RankFile {
    fn from(r: &RankResult) -> Self {
        Self {
            scores: r.scores.to_vec(),
            order: r.order.iter().map(|p| p + 1).collect(),
            computing_time_s: r.computing_time,
            epsilon: r.epsilon,
        }
    }
}

/// Ranking as CSV: `rank,page,score`, best first.
pub fn write_rank_csv(path: &Path, r: &RankResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["rank", "page", "score"]).map_err(Error::csv(path))?;
    for (rank, &page) in r.order.iter().enumerate() {
        w.serialize((rank + 1, page + 1, r.scores[page])).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub n: usize,
    pub delta: f64,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub varied: bool,
    pub computing_time_s: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda_h: Option<f64>,
    pub saturated_index: Option<usize>,
    pub error: Option<String>,
}

impl From<&SweepRow> for RowRecord {
    fn from(r: &SweepRow) -> Self {
        Self {
            n: r.n,
            delta: r.delta,
            trial: r.trial,
            seed: r.seed,
            varied: r.varied,
            computing_time_s: r.computing_time,
            epsilon: r.epsilon,
            lambda_h: r.lambda_h,
            saturated_index: r.saturated_index.map(|k| k + 1),
            error: r.error.clone(),
        }
    }
}

impl From<RowRecord> for SweepRow {
    fn from(r: RowRecord) -> Self {
        Self {
            n: r.n,
            delta: r.delta,
            trial: r.trial,
            seed: r.seed,
            varied: r.varied,
            computing_time: r.computing_time_s,
            epsilon: r.epsilon,
            lambda_h: r.lambda_h,
            saturated_index: r.saturated_index.map(|k| k - 1),
            error: r.error,
        }
    }
}

/// Appends rows to a sweep CSV as they complete.
pub struct RowWriter {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl RowWriter {
    /// Opens `path` for appending, writing the header if the file is new or empty.
    pub fn append(path: &Path) -> Result<Self> {
        let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(Error::io(path))?;
        let inner = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn push(&mut self, row: &SweepRow) -> Result<()> {
        self.inner
            .serialize(RowRecord::from(row))
            .map_err(Error::csv(&self.path))?;
        self.inner.flush().map_err(Error::io(&self.path))
    }
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(RowRecord::from(row)).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Rows of a sweep CSV. A torn final line from an interrupted run is dropped.
pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let text = read_to_string(path)?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut r = csv::Reader::from_reader(complete.as_bytes());
    r.deserialize::<RowRecord>()
        .map(|rec| rec.map(SweepRow::from).map_err(Error::csv(path)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub alpha: f64,
    pub x0: f64,
    pub t_max: f64,
    pub conv_tol: f64,
    pub record_stride: Option<usize>,
    pub settle_factor: f64,
}

impl From<&SimConfig> for ConfigRecord {
    fn from(c: &SimConfig) -> Self {
        Self {
            alpha: c.alpha,
            x0: c.x0,
            t_max: c.t_max,
            conv_tol: c.conv_tol,
            record_stride: c.record_stride,
            settle_factor: c.settle_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    #[serde(rename = "L0")]
    pub l0: f64,
    pub omega0: f64,
    pub gbw_hz: f64,
    pub v_supp: f64,
}

impl From<&OpAmpParams> for ParamsRecord {
    fn from(p: &OpAmpParams) -> Self {
        Self {
            l0: p.l0,
            omega0: p.omega0,
            gbw_hz: p.gbw_hz(),
            v_supp: p.v_supp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderRecord {
    pub mode: String,
    pub cfg: ConfigRecord,
    pub params: ParamsRecord,
    pub base_seed: Option<u64>,
    pub thresholds: ThresholdsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsRecord {
    pub time_cv_max: f64,
    pub time_spread_max: f64,
    pub variation_band: f64,
}

impl From<&ReportHeader> for HeaderRecord {
    fn from(h: &ReportHeader) -> Self {
        Self {
            mode: h.mode.as_str().to_string(),
            cfg: (&h.cfg).into(),
            params: (&h.params).into(),
            base_seed: h.base_seed,
            thresholds: ThresholdsRecord {
                time_cv_max: h.thresholds.time_cv_max,
                time_spread_max: h.thresholds.time_spread_max,
                variation_band: h.thresholds.variation_band,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub count: usize,
    pub mean: f64,
    pub stdev: f64,
    pub min: f64,
    pub max: f64,
}

impl From<&Stats> for StatsRecord {
    fn from(s: &Stats) -> Self {
        Self {
            count: s.count,
            mean: s.mean,
            stdev: s.stdev,
            min: s.min,
            max: s.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub n: usize,
    pub delta: f64,
    pub varied: bool,
    pub rows: usize,
    pub failures: usize,
    pub computing_time_s: Option<StatsRecord>,
    pub epsilon: Option<StatsRecord>,
    pub lambda_h: Option<StatsRecord>,
}

impl From<&Aggregate> for AggregateRecord {
    fn from(a: &Aggregate) -> Self {
        Self {
            n: a.n,
            delta: a.delta,
            varied: a.varied,
            rows: a.rows,
            failures: a.failures,
            computing_time_s: a.computing_time.as_ref().map(Into::into),
            epsilon: a.epsilon.as_ref().map(Into::into),
            lambda_h: a.lambda_h.as_ref().map(Into::into),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub header: HeaderRecord,
    pub aggregates: Vec<AggregateRecord>,
}

impl From<&SweepReport> for ReportFile {
    fn from(r: &SweepReport) -> Self {
        Self {
            header: (&r.header).into(),
            aggregates: r.aggregates.iter().map(Into::into).collect(),
        }
    }
}

/// Writes `<stem>.csv` (rows) and `<stem>.json` (header and aggregates) into `dir`.
pub fn write_report(dir: &Path, stem: &str, report: &SweepReport) -> Result<()> {
    write_rows(&dir.join(format!("{stem}.csv")), &report.rows)?;
    write_json(&dir.join(format!("{stem}.json")), &ReportFile::from(report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "1,2\n# note\n3,x\n").unwrap();
        let err = read_matrix(&path).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        fs::write(&path, "1,2\n3\n").unwrap();
        let err = read_matrix(&path).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("expected 2 columns"), "{err}");
        fs::write(&path, "1,2\n3,4\n5,6\n").unwrap();
        assert!(read_matrix(&path).unwrap_err().to_string().contains("square"));
    }

    #[test]
    fn torn_row_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let row = SweepRow {
            n: 3,
            delta: 0.01,
            trial: Some(2),
            seed: Some(99),
            varied: false,
            computing_time: Some(1.5e-5),
            epsilon: Some(0.01),
            lambda_h: Some(0.0025),
            saturated_index: Some(1),
            error: None,
        };
        write_rows(&path, std::slice::from_ref(&row)).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("3,0.02,3,1");
        fs::write(&path, text).unwrap();
        assert_eq!(read_rows(&path).unwrap(), vec![row]);
    }
}
