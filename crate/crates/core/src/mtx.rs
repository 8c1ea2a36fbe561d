//! Matrix Market reader and writer.
//!
//! The reader accepts `coordinate` and `array` layouts with `real`,
//! `integer` or `complex` fields and `general`, `symmetric`, `hermitian` or
//! `skew-symmetric` symmetry. Real data is promoted to complex. The writer
//! always emits `coordinate complex general` with shortest round-trip float
//! formatting, so a written file reads back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c, zeros, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
    Skew,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(perr(1, "missing %%MatrixMarket matrix header"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(perr(1, format!("unsupported layout {other}"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(perr(1, format!("unsupported field {other}"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(perr(1, format!("unsupported symmetry {other}"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or_else(|| perr(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| perr(size_line, format!("bad size token {t}"))))
        .collect::<Result<_>>()?;
    let expected = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(perr(size_line, "wrong number of size fields"));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(perr(size_line, "symmetric storage requires a square matrix"));
    }
    let mut m = zeros(rows, cols);
    let per_value = if field == Field::Complex { 2 } else { 1 };

    let number = |line: usize, t: &str| -> Result<f64> {
        let v = t.parse::<f64>().map_err(|_| perr(line, format!("bad number {t}")))?;
        if !v.is_finite() {
            return Err(perr(line, "non-finite value"));
        }
        Ok(v)
    };

    let mut place = |i: usize, j: usize, re: f64, im: f64| {
        let z = c(re, im);
        m[(i, j)] = z;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] = z,
                Symmetry::Hermitian => m[(j, i)] = z.conj(),
                Symmetry::Skew => m[(j, i)] = -z,
            }
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            for _ in 0..nnz {
                let (ln, l) = data.next().ok_or_else(|| perr(0, "fewer entries than declared"))?;
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 2 + per_value {
                    return Err(perr(ln, "wrong number of fields in entry"));
                }
                let i: usize = t[0].parse().map_err(|_| perr(ln, "bad row index"))?;
                let j: usize = t[1].parse().map_err(|_| perr(ln, "bad column index"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(perr(ln, format!("index ({i}, {j}) out of range")));
                }
                let re = number(ln, t[2])?;
                let im = if per_value == 2 { number(ln, t[3])? } else { 0.0 };
                place(i - 1, j - 1, re, im);
            }
        }
        Layout::Array => {
            // column-major; symmetric variants list the lower triangle only
            let mut cells = Vec::new();
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Skew => j + 1,
                    _ => j,
                };
                for i in start..rows {
                    cells.push((i, j));
                }
            }
            let mut values = Vec::new();
            let mut last = size_line;
            while values.len() < cells.len() * per_value {
                let (ln, l) = data.next().ok_or_else(|| perr(last + 1, "fewer values than declared"))?;
                last = ln;
                for t in l.split_whitespace() {
                    values.push(number(ln, t)?);
                }
            }
            if values.len() != cells.len() * per_value {
                return Err(perr(last, "value count does not match the declared size"));
            }
            for (k, &(i, j)) in cells.iter().enumerate() {
                let re = values[k * per_value];
                let im = if per_value == 2 { values[k * per_value + 1] } else { 0.0 };
                place(i, j, re, im);
            }
        }
    }
    if let Some((ln, _)) = data.next() {
        return Err(perr(ln, "trailing data after the declared entries"));
    }
    Ok(m)
}

pub fn to_string(m: &Matrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate complex general\n");
    let mut entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 || z.re.is_sign_negative() || z.im.is_sign_negative() {
                entries.push((i, j, z));
            }
        }
    }
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), entries.len());
    for (i, j, z) in entries {
        let _ = writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, z.re, z.im);
    }
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<Matrix> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    std::fs::write(path, to_string(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_real_coordinate() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 3 2\n1 1 1.5\n2 3 -2\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(0, 0)], c(1.5, 0.0));
        assert_eq!(m[(1, 2)], c(-2.0, 0.0));
    }

    #[test]
    fn reads_complex_array_and_hermitian() {
        let m = parse("%%MatrixMarket matrix array complex general\n2 1\n1 2\n3 4\n").unwrap();
        assert_eq!(m[(1, 0)], c(3.0, 4.0));
        let h = parse("%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 1 0\n2 1 0 1\n").unwrap();
        assert_eq!(h[(0, 1)], c(0.0, -1.0));
        let s = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(s[(0, 1)], c(2.0, 0.0));
        assert_eq!(s[(1, 1)], c(3.0, 0.0));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse("").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate pattern general\n1 1 0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 nan\n").is_err());
        assert!(parse("%%MatrixMarket matrix array real general\n1 1\n1\n2\n").is_err());
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = Matrix::from_fn(3, 2, |i, j| c(1.0 / (i + j + 1) as f64, -(0.1 * i as f64) + 1e-300));
        let back = parse(&to_string(&m)).unwrap();
        assert_eq!(back, m);
    }
}
