//! In-memory tabular data: named numeric and categorical columns.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    /// Level codes index into `levels`.
    Categorical { codes: Vec<usize>, levels: Vec<String> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a categorical column from labels; levels are sorted.
    pub fn categorical_from_labels<S: AsRef<str>>(labels: &[S]) -> Column {
        let mut levels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        levels.sort();
        levels.dedup();
        let codes = labels
            .iter()
            .map(|s| levels.binary_search_by(|l| l.as_str().cmp(s.as_ref())).unwrap())
            .collect();
        Column::Categorical { codes, levels }
    }

    /// Label of row `i` (categorical columns only).
    pub fn label(&self, i: usize) -> Option<&str> {
        match self {
            Column::Categorical { codes, levels } => Some(levels[codes[i]].as_str()),
            Column::Numeric(_) => None,
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical { codes, levels } => Column::Categorical {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
            },
        }
    }
}

/// Named covariate columns plus an optional response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    response: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_response(mut self, y: Vec<f64>) -> Result<Self> {
        self.set_response(y)?;
        Ok(self)
    }

    pub fn set_response(&mut self, y: Vec<f64>) -> Result<()> {
        if let Some(c) = self.columns.first() {
            if c.len() != y.len() {
                return Err(Error::Data(format!(
                    "response has {} rows, covariates have {}",
                    y.len(),
                    c.len()
                )));
            }
        }
        self.response = Some(y);
        Ok(())
    }

    pub fn push(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        let n = self.n();
        if (!self.columns.is_empty() || self.response.is_some()) && column.len() != n {
            return Err(Error::Data(format!(
                "column '{name}' has {} rows, expected {n}",
                column.len()
            )));
        }
        if self.names.contains(&name) {
            return Err(Error::Data(format!("duplicate column '{name}'")));
        }
        self.names.push(name);
        self.columns.push(column);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.columns
            .first()
            .map(Column::len)
            .or_else(|| self.response.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::Data(format!("missing column '{name}'")))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Categorical { .. } => {
                Err(Error::Data(format!("column '{name}' is categorical, expected numeric")))
            }
        }
    }

    pub fn response(&self) -> Result<&[f64]> {
        self.response
            .as_deref()
            .ok_or_else(|| Error::Data("dataset has no response".into()))
    }

    /// Row subset, preserving categorical level sets.
    pub fn take(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            response: self
                .response
                .as_ref()
                .map(|y| rows.iter().map(|&i| y[i]).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_levels_are_sorted() {
        let c = Column::categorical_from_labels(&["b", "a", "c", "a"]);
        match &c {
            Column::Categorical { codes, levels } => {
                assert_eq!(levels, &["a", "b", "c"]);
                assert_eq!(codes, &[1, 0, 2, 0]);
            }
            _ => panic!(),
        }
        assert_eq!(c.label(2), Some("c"));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut d = Dataset::new();
        d.push("x", Column::Numeric(vec![1.0, 2.0])).unwrap();
        assert!(d.push("z", Column::Numeric(vec![1.0])).is_err());
        assert!(d.clone().with_response(vec![1.0]).is_err());
        assert!(d.numeric("nope").is_err());
    }

    #[test]
    fn take_keeps_levels() {
        let mut d = Dataset::new();
        d.push("g", Column::categorical_from_labels(&["x", "y", "z"]))
            .unwrap();
        let sub = d.take(&[2]);
        match sub.column("g").unwrap() {
            Column::Categorical { codes, levels } => {
                assert_eq!(codes, &[2]);
                assert_eq!(levels.len(), 3);
            }
            _ => panic!(),
        }
    }
}
