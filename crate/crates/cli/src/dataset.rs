//! Long-format CSV datasets: one row per observation with columns
//! `sample_id,t,value[,label]`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use fae_core::FunctionalSample;

use crate::error::{CliError, Result};

/// Curves keyed by their external identifiers, in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub samples: Vec<FunctionalSample>,
}

struct Pending {
    rows: Vec<(f64, f64, u64)>,
    label: Option<Option<u32>>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

impl Dataset {
    pub fn new(ids: Vec<String>, samples: Vec<FunctionalSample>) -> Self {
        Dataset { ids, samples }
    }

    /// Numbered identifiers `0..n`.
    pub fn numbered(samples: Vec<FunctionalSample>) -> Self {
        Dataset {
            ids: (0..samples.len()).map(|i| i.to_string()).collect(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::from_reader(file, path)
    }

    /// Parses a long-format CSV; `origin` only labels error messages.
    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| CliError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let (Some(id_col), Some(t_col), Some(v_col)) =
            (column(&headers, "sample_id"), column(&headers, "t"), column(&headers, "value"))
        else {
            return Err(parse_err(1, "header must contain sample_id, t and value".into()));
        };
        let label_col = column(&headers, "label");

        let mut order: Vec<String> = Vec::new();
        let mut pending: HashMap<String, Pending> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |c: usize| rec.get(c).unwrap_or("");
            let id = field(id_col);
            if id.is_empty() {
                return Err(parse_err(line, "empty sample_id".into()));
            }
            let number = |c: usize, what: &str| -> Result<f64> {
                let raw = field(c);
                match raw.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(parse_err(line, format!("{what} `{raw}` is not a finite number"))),
                }
            };
            let t = number(t_col, "t")?;
            let v = number(v_col, "value")?;
            let label = match label_col.map(field) {
                None | Some("") => None,
                Some(raw) => Some(
                    raw.parse::<u32>()
                        .map_err(|_| parse_err(line, format!("label `{raw}` is not a non-negative integer")))?,
                ),
            };
            let entry = pending.entry(id.to_string()).or_insert_with(|| {
                order.push(id.to_string());
                Pending { rows: Vec::new(), label: None }
            });
            match entry.label {
                None => entry.label = Some(label),
                Some(prev) if prev != label => {
                    return Err(parse_err(line, format!("sample `{id}` has conflicting labels")));
                }
                Some(_) => {}
            }
            entry.rows.push((t, v, line));
        }
        if order.is_empty() {
            return Err(CliError::format(origin, "dataset has no rows"));
        }

        let mut samples = Vec::with_capacity(order.len());
        for id in &order {
            let mut p = pending.remove(id).expect("every id has pending rows");
            p.rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(w) = p.rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(parse_err(w[1].2, format!("sample `{id}` repeats time {}", w[1].0)));
            }
            let (times, values) = p.rows.iter().map(|&(t, v, _)| (t, v)).unzip();
            let first_line = p.rows[0].2;
            let sample = FunctionalSample::new(times, values, p.label.flatten())
                .map_err(|e| parse_err(first_line, format!("sample `{id}`: {e}")))?;
            samples.push(sample);
        }
        Ok(Dataset { ids: order, samples })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::artifacts::ensure_parent(path)?;
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        self.to_writer(file).map_err(|e| CliError::io(path, e))
    }

    /// Floats use the shortest representation that parses back to the same bits.
    pub fn to_writer<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sample_id", "t", "value", "label"])?;
        for (id, s) in self.ids.iter().zip(&self.samples) {
            let label = s.label().map(|l| l.to_string()).unwrap_or_default();
            for (t, v) in s.times().iter().zip(s.values()) {
                w.write_record([id.as_str(), &format!("{t:?}"), &format!("{v:?}"), &label])?;
            }
        }
        w.flush()
    }

    /// Labels of every sample, or `None` if any sample is unlabeled.
    pub fn labels(&self) -> Option<Vec<u32>> {
        self.samples.iter().map(FunctionalSample::label).collect()
    }
}

/// Writes `sample_id,t,value` rows for curves evaluated at per-sample times.
pub fn write_curves(path: &Path, ids: &[&str], times: &[&[f64]], values: &[Vec<f64>]) -> Result<()> {
    crate::artifacts::ensure_parent(path)?;
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let run = || -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["sample_id", "t", "value"])?;
        for ((id, ts), vs) in ids.iter().zip(times).zip(values) {
            for (t, v) in ts.iter().zip(vs) {
                w.write_record([*id, &format!("{t:?}"), &format!("{v:?}")])?;
            }
        }
        w.flush()
    };
    run().map_err(|e| CliError::io(path, e))
}
