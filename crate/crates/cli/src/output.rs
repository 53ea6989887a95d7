//! CSV writing: `#`-prefixed `key=value` header lines, then one header row and
//! comma-separated data rows. Floats carry 17 significant digits.

use std::io::{self, Write};

/// 17 significant digits in scientific notation; parses back to the same bits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "none".to_string())
}

pub struct CsvWriter<W: Write> {
    inner: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn meta(&mut self, key: &str, value: impl AsRef<str>) -> io::Result<()> {
        writeln!(self.inner, "# {key}={}", value.as_ref())
    }

    pub fn comment(&mut self, text: &str) -> io::Result<()> {
        writeln!(self.inner, "# {text}")
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> io::Result<()> {
        let mut first = true;
        for c in cells {
            if !first {
                self.inner.write_all(b",")?;
            }
            self.inner.write_all(c.as_ref().as_bytes())?;
            first = false;
        }
        self.inner.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
