//! Loader for the standard Titanic passenger table (`train.csv` layout).
//!
//! Only `Survived, Pclass, Sex, Age, SibSp, Parch, Fare, Embarked` are read;
//! other columns (including the quoted `Name`) are ignored. Rows missing any
//! of those fields are dropped, which leaves 712 of the 891 passengers in
//! the usual file.
//!
//! Design matrix columns, in order: intercept, `Pclass == 2`, `Pclass == 3`,
//! `Sex == male`, `Age`, `SibSp`, `Parch`, `Fare`, `Embarked == Q`,
//! `Embarked == S` (first class, female and Cherbourg are the baselines).

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::samplers::targets::LogisticModel;

pub const COLUMNS: [&str; 8] = [
    "Survived", "Pclass", "Sex", "Age", "SibSp", "Parch", "Fare", "Embarked",
];

pub const COEFFICIENT_NAMES: [&str; 10] = [
    "(Intercept)",
    "Pclass2",
    "Pclass3",
    "Sexmale",
    "Age",
    "SibSp",
    "Parch",
    "Fare",
    "EmbarkedQ",
    "EmbarkedS",
];

/// Encoded passenger data.
#[derive(Debug, Clone, PartialEq)]
pub struct TitanicData {
    /// Row-major `rows × 10`.
    pub design: Vec<f64>,
    pub survived: Vec<f64>,
    /// Rows dropped for missing values.
    pub dropped: usize,
}

impl TitanicData {
    pub fn rows(&self) -> usize {
        self.survived.len()
    }

    pub fn into_model(self, prior_var: f64) -> Result<LogisticModel> {
        LogisticModel::new(
            self.design,
            COEFFICIENT_NAMES.len(),
            self.survived,
            prior_var,
        )
    }
}

pub fn load_titanic(path: impl AsRef<Path>) -> Result<TitanicData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_titanic(file).map_err(|e| e.in_file(path))
}

pub fn parse_titanic(reader: impl Read) -> Result<TitanicData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let mut index = [0usize; 8];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| Error::Data(format!("missing column {name}")))?;
    }

    let mut design = Vec::new();
    let mut survived = Vec::new();
    let mut dropped = 0;
    for (line, record) in rdr.records().enumerate() {
        let row = line + 2;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let field = |k: usize| record.get(index[k]).unwrap_or("").trim();
        if (0..8).any(|k| field(k).is_empty()) {
            dropped += 1;
            continue;
        }
        let number = |k: usize| -> Result<f64> {
            let v: f64 = field(k).parse().map_err(|_| Error::NotANumber {
                row,
                column: index[k] + 1,
                cell: field(k).to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: index[k] + 1,
                    cell: field(k).to_string(),
                });
            }
            Ok(v)
        };
        let bad = |k: usize| {
            Error::Data(format!(
                "row {row}: unexpected {} value {:?}",
                COLUMNS[k],
                field(k)
            ))
        };

        let y = match field(0) {
            "0" => 0.0,
            "1" => 1.0,
            _ => return Err(bad(0)),
        };
        let (class2, class3) = match field(1) {
            "1" => (0.0, 0.0),
            "2" => (1.0, 0.0),
            "3" => (0.0, 1.0),
            _ => return Err(bad(1)),
        };
        let male = match field(2) {
            "male" => 1.0,
            "female" => 0.0,
            _ => return Err(bad(2)),
        };
        let (port_q, port_s) = match field(7) {
            "C" => (0.0, 0.0),
            "Q" => (1.0, 0.0),
            "S" => (0.0, 1.0),
            _ => return Err(bad(7)),
        };
        design.extend_from_slice(&[
            1.0,
            class2,
            class3,
            male,
            number(3)?,
            number(4)?,
            number(5)?,
            number(6)?,
            port_q,
            port_s,
        ]);
        survived.push(y);
    }
    if survived.is_empty() {
        return Err(Error::Data("no complete passenger rows".into()));
    }
    Ok(TitanicData {
        design,
        survived,
        dropped,
    })
}
