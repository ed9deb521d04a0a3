//! CSV input.
//!
//! A grouped file has the header `group,m_1_1,m_1_2,m_2_2,...`: a label
//! followed by the `p(p+1)/2` upper-triangle entries of each matrix, column
//! by column, as raw values. A regression file replaces the label with
//! predictor columns `x_1,...,x_k`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use spd_manova::estimation::{Group, GroupedSample};
use spd_manova::geometry::{matrix_dim, SpdMatrix};

use crate::CliError;

/// Upper-triangle column names in column-major order.
pub fn matrix_columns(p: usize) -> Vec<String> {
    (1..=p)
        .flat_map(|j| (1..=j).map(move |i| format!("m_{i}_{j}")))
        .collect()
}

struct Layout {
    p: usize,
    /// Number of leading non-matrix columns.
    lead: usize,
}

fn parse_header(headers: &csv::StringRecord, lead_names: &dyn Fn(usize) -> Vec<String>) -> Result<Layout, String> {
    let first_m = headers
        .iter()
        .position(|h| h.trim() == "m_1_1")
        .ok_or("header has no m_1_1 column")?;
    let d = headers.len() - first_m;
    let p = matrix_dim(d).ok_or_else(|| format!("{d} matrix columns is not p(p+1)/2 for any p"))?;
    let expected: Vec<String> = lead_names(first_m).into_iter().chain(matrix_columns(p)).collect();
    for (k, (got, want)) in headers.iter().zip(&expected).enumerate() {
        if got.trim() != want {
            return Err(format!("column {} is '{}', expected '{want}'", k + 1, got.trim()));
        }
    }
    Ok(Layout { p, lead: first_m })
}

fn parse_matrix(fields: &[&str], p: usize, first_col: usize) -> Result<SpdMatrix, String> {
    let mut m = DMatrix::zeros(p, p);
    let mut k = 0;
    for j in 0..p {
        for i in 0..=j {
            let v = parse_number(fields[k], first_col + k)?;
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
    }
    SpdMatrix::new(m).map_err(|e| e.to_string())
}

fn parse_number(field: &str, col: usize) -> Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("column {col}: '{}' is not a number", field.trim()))?;
    if !v.is_finite() {
        return Err(format!("column {col}: non-finite value"));
    }
    Ok(v)
}

type Row = (u64, Vec<String>);

fn read_rows(
    reader: impl Read,
    source: &str,
    lead_names: &dyn Fn(usize) -> Vec<String>,
) -> Result<(Layout, Vec<Row>), CliError> {
    let parse_err = |line: Option<u64>, cause: String| CliError::Parse {
        input: source.to_string(),
        line,
        cause,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(Some(1), e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(parse_err(None, "empty input".into()));
    }
    let layout = parse_header(&headers, lead_names).map_err(|c| parse_err(Some(1), c))?;
    let width = headers.len();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(Some(line), format!("expected {width} fields, found {}", rec.len())));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(parse_err(None, "no data rows".into()));
    }
    Ok((layout, rows))
}

fn group_lead(n: usize) -> Vec<String> {
    let mut v = vec!["group".to_string()];
    v.extend((1..n).map(|k| format!("x_{k}")));
    v
}

fn predictor_lead(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x_{k}")).collect()
}

/// Parses a grouped file. Groups keep the order in which labels first
/// appear; rows keep file order within a group.
pub fn read_grouped(reader: impl Read, source: &str) -> Result<GroupedSample, CliError> {
    let (layout, rows) = read_rows(reader, source, &group_lead)?;
    if layout.lead != 1 {
        return Err(CliError::Parse {
            input: source.to_string(),
            line: Some(1),
            cause: "expected exactly one label column 'group' before the matrix columns".into(),
        });
    }
    let mut groups: Vec<Group> = Vec::new();
    for (line, fields) in &rows {
        let fields: Vec<&str> = fields.iter().map(String::as_str).collect();
        let c = parse_matrix(&fields[1..], layout.p, 2).map_err(|cause| CliError::Parse {
            input: source.to_string(),
            line: Some(*line),
            cause,
        })?;
        let label = fields[0].trim();
        match groups.iter_mut().find(|g| g.label == label) {
            Some(g) => g.observations.push(c),
            None => groups.push(Group {
                label: label.to_string(),
                observations: vec![c],
            }),
        }
    }
    Ok(GroupedSample::new(groups)?)
}

/// Predictor rows and responses of a regression file.
pub struct RegressionData {
    pub xs: Vec<Vec<f64>>,
    pub cs: Vec<SpdMatrix>,
}

pub fn read_regression(reader: impl Read, source: &str) -> Result<RegressionData, CliError> {
    let (layout, rows) = read_rows(reader, source, &predictor_lead)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut cs = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        let fields: Vec<&str> = fields.iter().map(String::as_str).collect();
        let parsed = (|| {
            let x = fields[..layout.lead]
                .iter()
                .enumerate()
                .map(|(k, f)| parse_number(f, k + 1))
                .collect::<Result<Vec<f64>, String>>()?;
            Ok::<_, String>((x, parse_matrix(&fields[layout.lead..], layout.p, layout.lead + 1)?))
        })();
        let (x, c) = parsed.map_err(|cause| CliError::Parse {
            input: source.to_string(),
            line: Some(*line),
            cause,
        })?;
        xs.push(x);
        cs.push(c);
    }
    Ok(RegressionData { xs, cs })
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::Parse {
        input: path.display().to_string(),
        line: None,
        cause: e.to_string(),
    })
}

pub fn parse_dataset(path: &Path) -> Result<GroupedSample, CliError> {
    read_grouped(open(path)?, &path.display().to_string())
}

pub fn parse_regression(path: &Path) -> Result<RegressionData, CliError> {
    read_regression(open(path)?, &path.display().to_string())
}

/// Writes `sample` in the grouped format. Values use the shortest decimal
/// that reads back to the same `f64`, so parsing the output reproduces the
/// sample exactly.
pub fn write_dataset(sample: &GroupedSample, out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string()];
    header.extend(matrix_columns(sample.p()));
    w.write_record(&header)?;
    for g in sample.groups() {
        for c in &g.observations {
            let m = c.matrix();
            let mut rec = vec![g.label.clone()];
            for j in 0..m.ncols() {
                for i in 0..=j {
                    rec.push(format!("{}", m[(i, j)]));
                }
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()
}
