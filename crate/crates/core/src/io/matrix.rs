//! Text matrix files: a `rows cols` header, then one line per row holding
//! `re im` pairs at 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;

fn format_error(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

pub fn format_matrix(a: &CMat) -> String {
    let mut out = format!("{} {}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let z = a[(i, j)];
            let _ = write!(out, "{:.16e} {:.16e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<CMat> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| format_error(1, "empty file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_error(1, format!("bad dimension '{t}'"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match dims.as_slice() {
        &[r, c] => (r, c),
        _ => return Err(format_error(1, "header must be 'rows cols'")),
    };
    let mut a = CMat::zeros(rows, cols);
    for i in 0..rows {
        let (line, row) = lines
            .next()
            .ok_or_else(|| format_error(i + 2, format!("missing row {i} of {rows}")))?;
        let values: Vec<f64> = row
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format_error(line, format!("bad number '{t}'"))))
            .collect::<Result<_>>()?;
        if values.len() != 2 * cols {
            return Err(format_error(
                line,
                format!("expected {} numbers, found {}", 2 * cols, values.len()),
            ));
        }
        for j in 0..cols {
            a[(i, j)] = Complex64::new(values[2 * j], values[2 * j + 1]);
        }
    }
    if let Some((line, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(format_error(line, "trailing data after the last row"));
    }
    Ok(a)
}

pub fn write_matrix(path: &Path, a: &CMat) -> Result<()> {
    std::fs::write(path, format_matrix(a))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    parse_matrix(&std::fs::read_to_string(path)?)
}
