use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed leading columns of the trace CSV.
pub const CSV_HEADER: &str = "k,f_value,gap,grad_norm,alpha,beta,dist_to_opt";

/// One iterate. Record 0 is the starting point and carries `alpha = beta = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub k: usize,
    pub x: Option<DVector<f64>>,
    pub f_value: f64,
    /// `f(x_k) − f(x*)` when the minimizer is known.
    pub gap: Option<f64>,
    pub grad_norm: f64,
    /// Step size used to reach this iterate.
    pub alpha: f64,
    /// Momentum coefficient used to reach this iterate.
    pub beta: f64,
    pub xi: Option<DVector<f64>>,
    pub dist_to_opt: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Seed-independent description of the run configuration.
    pub config: String,
    pub seeds: Vec<u64>,
}

/// Why a run stopped before `max_iters`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub k: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<Record>,
    pub meta: TraceMeta,
    pub abort: Option<Abort>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    FValue,
    Gap,
    GradNorm,
    Alpha,
    Beta,
    DistToOpt,
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "f_value" => Column::FValue,
            "gap" => Column::Gap,
            "grad_norm" => Column::GradNorm,
            "alpha" => Column::Alpha,
            "beta" => Column::Beta,
            "dist_to_opt" => Column::DistToOpt,
            other => return Err(Error::Csv { row: 0, message: format!("unknown column `{other}`") }),
        })
    }
}

impl Record {
    pub fn get(&self, column: Column) -> Option<f64> {
        match column {
            Column::FValue => Some(self.f_value),
            Column::Gap => self.gap,
            Column::GradNorm => Some(self.grad_norm),
            Column::Alpha => Some(self.alpha),
            Column::Beta => Some(self.beta),
            Column::DistToOpt => self.dist_to_opt,
        }
    }

    fn is_finite(&self) -> bool {
        self.f_value.is_finite() && self.x.as_ref().is_none_or(|x| x.iter().all(|c| c.is_finite()))
    }
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Trace { records: Vec::new(), meta, abort: None }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Number of steps taken (index of the last record).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    /// Appends `record`; marks the trace aborted if it holds a NaN or infinity.
    pub fn push(&mut self, record: Record) -> bool {
        let ok = record.is_finite();
        if !ok && self.abort.is_none() {
            self.abort = Some(Abort { k: record.k, reason: "non-finite iterate or objective value".into() });
        }
        self.records.push(record);
        ok
    }

    /// `(k, value)` pairs for one column, skipping records where it is unset.
    pub fn series(&self, column: Column) -> Vec<(usize, f64)> {
        self.records.iter().filter_map(|r| r.get(column).map(|v| (r.k, v))).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, with_coords: bool) -> Result<()> {
        out.write_all(self.to_csv(with_coords).as_bytes())?;
        Ok(())
    }

    pub fn to_csv(&self, with_coords: bool) -> String {
        let n = if with_coords {
            self.records.iter().filter_map(|r| r.x.as_ref().map(|x| x.len())).max().unwrap_or(0)
        } else {
            0
        };
        let mut s = String::with_capacity(64 + self.records.len() * (8 + 24 * (6 + n)));
        s.push_str(CSV_HEADER);
        for i in 0..n {
            let _ = write!(s, ",x_{i}");
        }
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{}", r.k);
            for v in [Some(r.f_value), r.gap, Some(r.grad_norm), Some(r.alpha), Some(r.beta), r.dist_to_opt] {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&format_value(v));
                }
            }
            for i in 0..n {
                s.push(',');
                if let Some(c) = r.x.as_ref().and_then(|x| x.get(i)) {
                    s.push_str(&format_value(*c));
                }
            }
            s.push('\n');
        }
        s
    }

    /// Parses a trace CSV. Rows are numbered from 1 for the header.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Trace> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::Csv { row: 1, message: "missing header".into() }),
        };
        let columns: Vec<&str> = header.split(',').collect();
        let fixed: Vec<&str> = CSV_HEADER.split(',').collect();
        if columns.len() < fixed.len() || columns[..fixed.len()] != fixed[..] {
            return Err(Error::Csv { row: 1, message: format!("expected header starting with `{CSV_HEADER}`") });
        }
        let n_coords = columns.len() - fixed.len();
        for (i, name) in columns[fixed.len()..].iter().enumerate() {
            if *name != format!("x_{i}") {
                return Err(Error::Csv { row: 1, message: format!("unexpected column `{name}`") });
            }
        }

        let mut trace = Trace::default();
        for (idx, line) in lines.enumerate() {
            let row = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(Error::Csv {
                    row,
                    message: format!("expected {} fields, found {}", columns.len(), fields.len()),
                });
            }
            let k = fields[0]
                .parse::<usize>()
                .map_err(|_| Error::Csv { row, message: format!("bad iteration index `{}`", fields[0]) })?;
            if let Some(prev) = trace.records.last() {
                if k <= prev.k {
                    return Err(Error::Csv { row, message: "iteration index must increase".into() });
                }
            }
            let opt = |i: usize| parse_optional(fields[i], row);
            let req = |i: usize, name: &str| {
                opt(i)?.ok_or_else(|| Error::Csv { row, message: format!("missing {name}") })
            };
            let x = if n_coords > 0 {
                let coords: Vec<Option<f64>> =
                    (0..n_coords).map(|i| opt(fixed.len() + i)).collect::<Result<_>>()?;
                coords.into_iter().collect::<Option<Vec<f64>>>().map(DVector::from_vec)
            } else {
                None
            };
            trace.records.push(Record {
                k,
                x,
                f_value: req(1, "f_value")?,
                gap: opt(2)?,
                grad_norm: req(3, "grad_norm")?,
                alpha: req(4, "alpha")?,
                beta: req(5, "beta")?,
                xi: None,
                dist_to_opt: opt(6)?,
            });
        }
        Ok(trace)
    }
}

/// Seventeen significant digits in base-10 scientific notation; round-trips
/// every finite `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_optional(field: &str, row: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Csv { row, message: format!("bad number `{field}`") })
}
