//! Plain-text matrix format: a `rows cols` header line followed by `rows`
//! lines of whitespace-separated decimals. Values are written with 17
//! significant digits so they round-trip exactly.

use super::Matrix;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub fn format_matrix(a: &Matrix) -> String {
    let mut out = format!("{} {}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", a[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be 'rows cols', got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {rows} rows, found {i}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "row {i}: expected {cols} values, found {}",
                row.len()
            )));
        }
        data.extend(row);
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("trailing data after {rows} rows")));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    parse_matrix(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn write_matrix(path: &Path, a: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix(a)).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RandomSource;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = RandomSource::new(17);
        let a = rng.gaussian(3, 4) * 1e-7;
        let b = parse_matrix(&format_matrix(&a)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        let a = Matrix::from_row_slice(2, 2, &[1.0, -0.1, 1.0 / 3.0, 0.0]);
        write_matrix(&p, &a).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), a);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2 2\n1 2\n").is_err());
        assert!(parse_matrix("1 2\n1 2 3\n").is_err());
        assert!(parse_matrix("1 1\nnan\n").is_err());
        assert!(parse_matrix("1 1\nx\n").is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_matrix(Path::new("/nonexistent/m.txt")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/m.txt"));
    }
}
