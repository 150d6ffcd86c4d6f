//! CSV ingestion of two-group datasets.
//!
//! The file must have a header row. One column carries the group label, one
//! the response; every other column (minus any explicitly dropped) is a
//! numeric covariate, kept in header order. Numbers use `.` as the decimal
//! separator regardless of locale.

use std::io::Read;
use std::path::Path;

use crate::data::{AncovaData, Group};
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// How the columns of a dataset file map to model roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRoles {
    pub group: String,
    pub response: String,
    /// Explicit covariate list; `None` takes every remaining column.
    pub covariates: Option<Vec<String>>,
    /// Columns ignored entirely (identifiers and the like).
    pub drop: Vec<String>,
    /// Label of the group treated as group 1. Defaults to the first label seen.
    pub control: Option<String>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        ColumnRoles {
            group: "group".into(),
            response: "y".into(),
            covariates: None,
            drop: Vec::new(),
            control: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: AncovaData,
    /// Original labels of group 1 and group 2.
    pub group_labels: [String; 2],
    pub response_name: String,
    pub covariate_names: Vec<String>,
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

pub fn read_dataset_file(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_dataset(file, roles)
}

pub fn read_dataset<R: Read>(reader: R, roles: &ColumnRoles) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            parse_error(
                1,
                format!("missing column `{name}` (header: {})", headers.join(",")),
            )
        })
    };
    let group_col = find(&roles.group)?;
    let response_col = find(&roles.response)?;
    for d in &roles.drop {
        find(d)?;
    }
    let covariate_cols: Vec<usize> = match &roles.covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| c != group_col && c != response_col && !roles.drop.contains(&headers[c]))
            .collect(),
    };

    let mut labels: Vec<String> = Vec::new();
    let mut group_of_row = Vec::new();
    let mut y = Vec::new();
    let mut cov = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| -> Result<&str> {
            match rec.get(c) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(parse_error(
                    line,
                    format!("missing value in column `{}`", headers[c]),
                )),
            }
        };
        let number = |c: usize| -> Result<f64> {
            let s = field(c)?;
            let v: f64 = s.parse().map_err(|_| {
                parse_error(
                    line,
                    format!("`{s}` in column `{}` is not a number", headers[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    line,
                    format!("non-finite value in column `{}`", headers[c]),
                ));
            }
            Ok(v)
        };
        let label = field(group_col)?.to_owned();
        let idx = match labels.iter().position(|l| *l == label) {
            Some(i) => i,
            None => {
                if labels.len() == 2 {
                    return Err(parse_error(
                        line,
                        format!("third group label `{label}`; exactly two groups are supported"),
                    ));
                }
                labels.push(label);
                labels.len() - 1
            }
        };
        group_of_row.push(idx);
        y.push(number(response_col)?);
        for &c in &covariate_cols {
            cov.push(number(c)?);
        }
    }
    if labels.len() != 2 {
        return Err(parse_error(
            0,
            format!("expected two groups, found {}", labels.len()),
        ));
    }
    let first = match &roles.control {
        Some(c) => labels
            .iter()
            .position(|l| l == c)
            .ok_or_else(|| Error::InvalidInput(format!("control label `{c}` does not occur")))?,
        None => 0,
    };
    let groups: Vec<Group> = group_of_row
        .iter()
        .map(|&g| {
            if g == first {
                Group::First
            } else {
                Group::Second
            }
        })
        .collect();
    let n = y.len();
    let l = covariate_cols.len();
    let m = RealMatrix::from_row_slice(n, l, &cov);
    let data = AncovaData::canonicalize(y, &groups, m)?;
    Ok(LabeledDataset {
        data,
        group_labels: [labels[first].clone(), labels[1 - first].clone()],
        response_name: headers[response_col].clone(),
        covariate_names: covariate_cols.iter().map(|&c| headers[c].clone()).collect(),
    })
}
