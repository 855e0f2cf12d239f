//! Binary sample matrices with optional model outputs.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::subset::MAX_DIM;

/// `n` observations of a `d`-dimensional binary vector, stored as configuration
/// masks, with optional real outputs `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    d: usize,
    rows: Vec<usize>,
    outputs: Option<Vec<f64>>,
}

impl SampleSet {
    pub fn new(d: usize, rows: Vec<usize>) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidDimension(d));
        }
        if let Some(&bad) = rows.iter().find(|&&x| x >> d != 0) {
            return Err(Error::Parse(format!(
                "row mask {bad} has bits beyond d = {d}"
            )));
        }
        Ok(SampleSet {
            d,
            rows,
            outputs: None,
        })
    }

    /// Builds from explicit 0/1 vectors.
    pub fn from_bits(d: usize, bits: &[Vec<u8>]) -> Result<Self> {
        let rows = bits
            .iter()
            .map(|row| {
                if row.len() != d {
                    return Err(Error::ArityMismatch {
                        expected: d,
                        got: row.len(),
                    });
                }
                bits_to_config(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, rows)
    }

    pub fn with_outputs(mut self, outputs: Vec<f64>) -> Result<Self> {
        if outputs.len() != self.rows.len() {
            return Err(Error::Parse(format!(
                "{} outputs for {} rows",
                outputs.len(),
                self.rows.len()
            )));
        }
        self.outputs = Some(outputs);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn outputs(&self) -> Option<&[f64]> {
        self.outputs.as_deref()
    }

    /// Appends another sample set of the same dimension. Outputs are kept only
    /// if both sides carry them.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if other.d != self.d {
            return Err(Error::ArityMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let rows = self.rows.iter().chain(&other.rows).copied().collect();
        let outputs = match (&self.outputs, &other.outputs) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(SampleSet {
            d: self.d,
            rows,
            outputs,
        })
    }

    /// Writes `x1..xd[,y]` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.d).map(|i| format!("x{i}")).collect();
        if self.outputs.is_some() {
            header.push("y".into());
        }
        w.write_record(&header)?;
        for (k, &x) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = (0..self.d).map(|i| ((x >> i) & 1).to_string()).collect();
            if let Some(y) = &self.outputs {
                rec.push(format!("{}", y[k]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a sample CSV. With a header, a column named `y` holds outputs and
    /// every other column is a binary input. Without a header, all columns are
    /// inputs unless `d` is given and one extra trailing column is present.
    pub fn read_csv<R: Read>(reader: R, d: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut records = rdr.records();
        let first = match records.next() {
            Some(r) => r?,
            None => return Err(Error::InsufficientSamples { n: 0, required: 1 }),
        };
        let has_header = first.iter().any(|f| f.trim().parse::<f64>().is_err());
        let (y_col, width, mut pending) = if has_header {
            let y_col = first.iter().position(|f| f.trim() == "y");
            (y_col, first.len(), None)
        } else {
            let width = first.len();
            let y_col = match d {
                Some(d) if width == d + 1 => Some(d),
                Some(d) if width != d => {
                    return Err(Error::ArityMismatch {
                        expected: d,
                        got: width,
                    })
                }
                _ => None,
            };
            (y_col, width, Some(first))
        };
        let d_found = width - usize::from(y_col.is_some());
        if let Some(d) = d {
            if d != d_found {
                return Err(Error::ArityMismatch {
                    expected: d,
                    got: d_found,
                });
            }
        }
        let mut rows = Vec::new();
        let mut outputs = Vec::new();
        let mut line = usize::from(has_header);
        loop {
            let rec = match pending.take() {
                Some(r) => r,
                None => match records.next() {
                    Some(r) => r?,
                    None => break,
                },
            };
            line += 1;
            if rec.len() != width {
                return Err(Error::Parse(format!(
                    "line {line}: expected {width} fields"
                )));
            }
            let mut x = 0usize;
            let mut bit = 0;
            for (c, field) in rec.iter().enumerate() {
                let field = field.trim();
                if Some(c) == y_col {
                    outputs.push(field.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {line}: output {field:?} is not a number"))
                    })?);
                    continue;
                }
                match field {
                    "0" => {}
                    "1" => x |= 1 << bit,
                    other => {
                        return Err(Error::Parse(format!(
                            "line {line}: {other:?} is not a binary value"
                        )))
                    }
                }
                bit += 1;
            }
            rows.push(x);
        }
        let set = SampleSet::new(d_found, rows)?;
        if y_col.is_some() {
            set.with_outputs(outputs)
        } else {
            Ok(set)
        }
    }

    pub fn read_csv_path(path: impl AsRef<Path>, d: Option<usize>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, d)
    }
}

/// Packs a 0/1 vector into a configuration mask (element 0 is `x_1`).
pub fn bits_to_config(bits: &[u8]) -> Result<usize> {
    if bits.len() > MAX_DIM {
        return Err(Error::InvalidDimension(bits.len()));
    }
    bits.iter()
        .enumerate()
        .try_fold(0usize, |acc, (i, &b)| match b {
            0 => Ok(acc),
            1 => Ok(acc | 1 << i),
            _ => Err(Error::Parse(format!(
                "entry {b} at position {} is not binary",
                i + 1
            ))),
        })
}

/// Unpacks a configuration mask into a 0/1 vector of length `d`.
pub fn config_to_bits(x: usize, d: usize) -> Vec<u8> {
    (0..d).map(|i| ((x >> i) & 1) as u8).collect()
}
