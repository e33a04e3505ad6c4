//! CSV tables, JSON summaries and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl Cell {
    // Rust float formatting is locale independent and round-trips exactly.
    fn render(&self, out: &mut String) {
        match self {
            Cell::F(v) if v.is_nan() => out.push_str("nan"),
            Cell::F(v) if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) => write!(out, "{v:e}").unwrap(),
            Cell::F(v) => write!(out, "{v}").unwrap(),
            Cell::I(v) => write!(out, "{v}").unwrap(),
            Cell::S(s) if s.contains([',', '"', '\n']) => write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap(),
            Cell::S(s) => out.push_str(s),
        }
    }
}

/// One CSV file with a single header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                c.render(&mut s);
            }
            s.push('\n');
        }
        s
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

/// Writes `contents` to `dir/name` and returns the file name.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<String> {
    let path: PathBuf = dir.join(name);
    fs::write(&path, contents)?;
    Ok(name.to_string())
}

/// Reads the first two selected numeric columns of a CSV file.
pub fn read_columns(text: &str, x_col: usize, y_col: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| fields.get(c).and_then(|f| f.parse::<f64>().ok());
        match (get(x_col), get(y_col)) {
            (Some(x), Some(y)) => {
                xs.push(x);
                ys.push(y);
                seen_data = true;
            }
            // a leading non-numeric line is the header
            _ if !seen_data && xs.is_empty() => seen_data = true,
            _ => return Err(format!("line {}: expected numbers in columns {x_col} and {y_col}", i + 1)),
        }
    }
    if xs.is_empty() {
        return Err("input has no data rows".into());
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_header_and_dot_decimals() {
        let mut t = Table::new("t", &["a", "b", "c"]);
        t.push(row![0.5, 3usize, "x,y"]);
        t.push(row![1e-9, -2, true]);
        assert_eq!(t.to_csv(), "a,b,c\n0.5,3,\"x,y\"\n1e-9,-2,1\n");
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let v = [0.1 + 0.2, 2062.368123456789, 1.0 / 3.0, -7.25e-12];
        let mut t = Table::new("t", &["v"]);
        for x in v {
            t.push(row![x]);
        }
        let back: Vec<f64> = t.to_csv().lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, v);
    }

    #[test]
    fn reads_headers_and_comments() {
        let (x, y) = read_columns("# note\nt,y\n0,1\n0.5, 2\n\n1,3\n", 0, 1).unwrap();
        assert_eq!(x, [0.0, 0.5, 1.0]);
        assert_eq!(y, [1.0, 2.0, 3.0]);
        let e = read_columns("t,y\n0,1\n0,oops\n", 0, 1).unwrap_err();
        assert!(e.contains("line 3"), "{e}");
        assert!(read_columns("t,y\n", 0, 1).is_err());
    }
}
