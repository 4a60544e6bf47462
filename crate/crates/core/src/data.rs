//! Training datasets and their CSV representations.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Simulator runs at one fidelity level: `n x d` inputs on the unit
/// hypercube and `n` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(with = "matrix_rows")]
    pub inputs: DMatrix<f64>,
    pub outputs: Vec<f64>,
    /// 1-based fidelity level.
    pub fidelity: usize,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, outputs: Vec<f64>, fidelity: usize) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(Error::LengthMismatch(inputs.nrows(), outputs.len()));
        }
        Ok(Dataset {
            inputs,
            outputs,
            fidelity,
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inputs)
    }

    /// Appends one run.
    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let n = self.len();
        let mut grown = self.inputs.clone().insert_row(n, 0.0);
        for (j, v) in x.iter().enumerate() {
            grown[(n, j)] = *v;
        }
        self.inputs = grown;
        self.outputs.push(y);
        Ok(())
    }

    /// True if `x` matches an existing input after rounding to 1e-12.
    pub fn contains(&self, x: &[f64]) -> bool {
        let key = round_key(x);
        self.rows().iter().any(|r| round_key(r) == key)
    }

    /// Rejects coordinates outside `[0, 1]` and duplicated rows.
    pub fn validate(&self) -> Result<()> {
        let rows = self.rows();
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::OutsideUnitCube { row: i });
            }
        }
        if let Some((first, row)) = first_duplicate(&rows) {
            return Err(Error::DuplicatePoints { first, row });
        }
        if self.outputs.iter().any(|y| !y.is_finite()) {
            return Err(Error::Invalid("non-finite output value".into()));
        }
        Ok(())
    }

    /// SHA-256 over dimensions, inputs and outputs (little-endian bytes).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        h.update((self.fidelity as u64).to_le_bytes());
        for r in self.rows() {
            for v in r {
                h.update(v.to_le_bytes());
            }
        }
        for y in &self.outputs {
            h.update(y.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn round_key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v * 1e12).round() as i64).collect()
}

/// First index pair `(first, duplicate)` of rows equal after rounding to 1e-12.
pub fn first_duplicate(rows: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut seen = std::collections::HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        if let Some(&first) = seen.get(&round_key(r)) {
            return Some((first, i));
        }
        seen.insert(round_key(r), i);
    }
    None
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}

/// Serde helper storing a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Rows {
        cols: usize,
        rows: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Rows {
            cols: m.ncols(),
            rows: super::rows_of(m),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let r = Rows::deserialize(d)?;
        if r.rows.iter().any(|row| row.len() != r.cols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(super::matrix_from_rows(&r.rows, r.cols))
    }
}

fn parse_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::MalformedCsv(format!(
                "data row {i} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::MalformedCsv(format!("data row {i}: `{s}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Shortest text that parses back to `v`, in exponent form for very
/// small or large magnitudes.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Reads a `x1..xd,y` table.
pub fn read_dataset_csv<R: Read>(reader: R, fidelity: usize) -> Result<Dataset> {
    let (header, rows) = parse_table(reader)?;
    if header.len() < 2 {
        return Err(Error::MalformedCsv("expected columns x1..xd,y".into()));
    }
    let d = header.len() - 1;
    let inputs: Vec<Vec<f64>> = rows.iter().map(|r| r[..d].to_vec()).collect();
    let outputs = rows.iter().map(|r| r[d]).collect();
    Dataset::new(matrix_from_rows(&inputs, d), outputs, fidelity)
}

/// Reads a `x1..xd` query table. An empty file yields zero rows and
/// dimension `None`.
pub fn read_points_csv<R: Read>(mut reader: R) -> Result<(Option<usize>, DMatrix<f64>)> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Ok((None, DMatrix::zeros(0, 0)));
    }
    let (header, rows) = parse_table(text.as_bytes())?;
    let d = header.len();
    Ok((Some(d), matrix_from_rows(&rows, d)))
}

/// Writes a design as `x1..xd,fidelity`, one row per point.
pub fn write_design_csv<W: Write>(writer: W, levels: &[(&DMatrix<f64>, usize)]) -> Result<()> {
    let d = levels.first().map(|(m, _)| m.ncols()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("fidelity".into());
    w.write_record(&header)?;
    for (m, level) in levels {
        for row in rows_of(m) {
            let mut rec: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            rec.push(level.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `x1..xd,fidelity` design, returning the input rows grouped by
/// fidelity in ascending order.
pub fn read_design_csv<R: Read>(reader: R) -> Result<Vec<(usize, DMatrix<f64>)>> {
    let (header, rows) = parse_table(reader)?;
    if header.last().map(String::as_str) != Some("fidelity") {
        return Err(Error::MalformedCsv("last column must be `fidelity`".into()));
    }
    let d = header.len() - 1;
    let mut grouped: std::collections::BTreeMap<usize, Vec<Vec<f64>>> = Default::default();
    for r in rows {
        let level = r[d];
        if level < 1.0 || level.fract() != 0.0 {
            return Err(Error::MalformedCsv(format!("invalid fidelity `{level}`")));
        }
        grouped.entry(level as usize).or_default().push(r[..d].to_vec());
    }
    Ok(grouped
        .into_iter()
        .map(|(l, rows)| (l, matrix_from_rows(&rows, d)))
        .collect())
}
