//! Averaging of expert rating tables (rows = methods, columns = experts).

use std::io::Read;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HumanEvalError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row} ({method}): score {value:?} is not a number")]
    BadScore { row: usize, method: String, value: String },
    #[error("row {row} ({method}) has no scores")]
    NoScores { row: usize, method: String },
    #[error("rating table has no rows")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodScore {
    pub method: String,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// 1 is best; equal means share a rank.
    pub rank: usize,
}

impl MethodScore {
    /// Mean at the two decimals rating tables are usually printed with.
    pub fn mean_display(&self) -> String {
        format!("{:.2}", self.mean)
    }
}

/// Reads a headed CSV whose first column names the method and whose other
/// columns hold one expert's score each.
pub fn read_ratings<R: Read>(reader: R) -> Result<Vec<MethodScore>, HumanEvalError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let method = record.get(0).unwrap_or_default().to_string();
        let scores = record
            .iter()
            .skip(1)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| HumanEvalError::BadScore {
                    row,
                    method: method.clone(),
                    value: v.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if scores.is_empty() {
            return Err(HumanEvalError::NoScores { row, method });
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        rows.push(MethodScore { method, scores, mean, rank: 0 });
    }
    if rows.is_empty() {
        return Err(HumanEvalError::Empty);
    }
    rank(&mut rows);
    Ok(rows)
}

fn rank(rows: &mut [MethodScore]) {
    const TIE: f64 = 1e-9;
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    for r in rows.iter_mut() {
        r.rank = 1 + means.iter().filter(|&&m| m > r.mean + TIE).count();
    }
}
