//! CSV input and output.

use std::path::Path;

use lssboost::{Column, Dataset};

use crate::config::Interaction;
use crate::error::{CliError, CliResult};

/// Cells treated as missing; any of them is a hard error.
const MISSING: [&str; 6] = ["", "NA", "NaN", "nan", "null", "."];

/// What to read from a data file.
#[derive(Debug, Clone, Default)]
pub struct Schema<'a> {
    pub columns: &'a [String],
    pub categorical: &'a [String],
    pub response: Option<&'a str>,
    pub interactions: &'a [Interaction],
}

/// Reads the listed columns of a headed CSV file; other columns are ignored.
pub fn read_dataset(path: &Path, schema: &Schema) -> CliResult<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| -> CliResult<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::data(format!("missing column '{name}' in {}", path.display())))
    };
    let mut wanted: Vec<(String, usize)> = Vec::new();
    for c in schema.columns {
        if Some(c.as_str()) != schema.response {
            wanted.push((c.clone(), index_of(c)?));
        }
    }
    let response_idx = schema.response.map(index_of).transpose()?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); wanted.len()];
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |idx: usize, name: &str| -> CliResult<&str> {
            let v = record.get(idx).map(str::trim).unwrap_or("");
            if MISSING.contains(&v) {
                return Err(CliError::data(format!(
                    "missing value in column '{name}' at data row {}",
                    row + 1
                )));
            }
            Ok(v)
        };
        for (slot, (name, idx)) in cells.iter_mut().zip(&wanted) {
            slot.push(cell(*idx, name)?.to_string());
        }
        if let (Some(idx), Some(name)) = (response_idx, schema.response) {
            y.push(parse_number(cell(idx, name)?, name, row)?);
        }
    }

    let mut data = Dataset::new();
    for ((name, _), raw) in wanted.iter().zip(cells) {
        let column = if schema.categorical.contains(name) {
            Column::categorical_from_labels(&raw)
        } else {
            let v = raw
                .iter()
                .enumerate()
                .map(|(row, s)| parse_number(s, name, row))
                .collect::<CliResult<Vec<f64>>>()?;
            Column::Numeric(v)
        };
        data.push(name.clone(), column)?;
    }
    for inter in schema.interactions {
        let column = interaction_column(&data, inter)?;
        data.push(inter.name(), column)?;
    }
    if response_idx.is_some() {
        data.set_response(y)?;
    }
    Ok(data)
}

fn parse_number(s: &str, column: &str, row: usize) -> CliResult<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            CliError::data(format!(
                "column '{column}' at data row {}: '{s}' is not a finite number \
                 (declare the column categorical if it holds labels)",
                row + 1
            ))
        })
}

/// Numeric product of two 0/1 columns, or the crossed levels when either
/// side is categorical.
pub fn interaction_column(data: &Dataset, inter: &Interaction) -> CliResult<Column> {
    let [a, b] = [&inter.columns[0], &inter.columns[1]].map(|c| data.column(c));
    let (a, b) = (a?, b?);
    if let (Column::Numeric(x), Column::Numeric(z)) = (a, b) {
        check_binary(x, &inter.columns[0])?;
        check_binary(z, &inter.columns[1])?;
        return Ok(Column::Numeric(x.iter().zip(z).map(|(p, q)| p * q).collect()));
    }
    let la = labels(a, &inter.columns[0])?;
    let lb = labels(b, &inter.columns[1])?;
    let crossed: Vec<String> = la.iter().zip(&lb).map(|(p, q)| format!("{p}:{q}")).collect();
    Ok(Column::categorical_from_labels(&crossed))
}

fn check_binary(v: &[f64], name: &str) -> CliResult<()> {
    if v.iter().all(|&x| x == 0.0 || x == 1.0) {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "interaction column '{name}' must be binary (0/1) or categorical"
        )))
    }
}

fn labels(c: &Column, name: &str) -> CliResult<Vec<String>> {
    match c {
        Column::Numeric(v) => {
            check_binary(v, name)?;
            Ok(v.iter().map(|x| format!("{x}")).collect())
        }
        Column::Categorical { .. } => Ok((0..c.len()).map(|i| c.label(i).unwrap().to_string()).collect()),
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes a headed CSV file.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dataset, response last under `response`.
pub fn write_dataset(path: &Path, data: &Dataset, response: &str) -> CliResult<()> {
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    header.push(response);
    let y = data.response()?;
    let columns = data
        .names()
        .iter()
        .map(|n| data.column(n))
        .collect::<lssboost::Result<Vec<_>>>()?;
    let rows = (0..data.n()).map(|i| {
        let mut row: Vec<String> = columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => num(v[i]),
                Column::Categorical { .. } => c.label(i).unwrap().to_string(),
            })
            .collect();
        row.push(num(y[i]));
        row
    });
    write_csv(path, &header, rows)
}
