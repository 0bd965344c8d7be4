//! CSV emission: comma separated, LF line endings, header always present,
//! reals written with 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Plain decimal with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn real(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new leading digit (9.99.. -> 10.0..)
    if decimals > 0 && count_significant(&s) > SIGNIFICANT_DIGITS {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn count_significant(s: &str) -> usize {
    s.trim_start_matches('-')
        .trim_start_matches(['0', '.'])
        .chars()
        .filter(char::is_ascii_digit)
        .count()
}

pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Default)]
pub struct Table {
    body: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Self::default();
        t.row(header.iter().map(|h| h.to_string()));
        t
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let line: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.body, "{}", line.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.body
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
        let path = dir.join(name);
        fs::write(&path, &self.body).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(real(1.25), "1.25000000000");
        assert_eq!(real(11.25), "11.2500000000");
        assert_eq!(real(0.00012345), "0.000123450000000");
        assert_eq!(real(-3.0), "-3.00000000000");
        assert_eq!(real(0.0), "0");
        assert_eq!(real(123456789012345.0), "123456789012345");
        assert_eq!(real(9.9999999999999), "10.0000000000");
    }

    #[test]
    fn quoting() {
        assert_eq!(field("ok"), "ok");
        assert_eq!(field("error: a, b"), "\"error: a, b\"");
    }

    #[test]
    fn header_and_lf() {
        let mut t = Table::new(&["a", "b"]);
        t.row(["1".to_string(), "2".to_string()]);
        assert_eq!(t.as_str(), "a,b\n1,2\n");
    }
}
