//! CSV files with a `#schema=<name>/<version>` first line.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! rerun with the same inputs reproduces files byte for byte.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

pub struct Table {
    schema: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        Table {
            schema: schema.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.schema);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = format!("#schema={}\n{}\n", self.schema, self.columns.join(","));
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path, name: &str) -> std::io::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.render())?;
        Ok(path)
    }
}

/// Formats a cell; `None` becomes an empty field.
pub fn cell<T: Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($v.to_string()),*] };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_line_then_header() {
        let mut t = Table::new("demo/v1", &["a", "b"]);
        t.push(row![1, 0.1]);
        t.push(vec![cell::<f64>(None), cell(Some(2.5))]);
        assert_eq!(t.render(), "#schema=demo/v1\na,b\n1,0.1\n,2.5\n");
    }
}
