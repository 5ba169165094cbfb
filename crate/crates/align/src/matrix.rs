//! Plain-text matrix files.
//!
//! ```text
//! matrix 2 3
//! 0.1 0.2 0.3
//! 1 2 3
//! ```
//!
//! A file may hold several blocks back to back. Blank lines and lines
//! starting with `#` are ignored.

use std::io::{self, BufRead, Write};

use ndarray::Array2;

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn read_matrices<R: BufRead>(reader: R) -> Result<Vec<Array2<f64>>, MatrixError> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, usize, Vec<f64>)> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |reason: String| MatrixError::Parse { line: lineno, reason };
        match pending.as_mut() {
            None => {
                let parts: Vec<&str> = text.split_whitespace().collect();
                let dims = match parts.as_slice() {
                    ["matrix", r, c] => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
                    _ => None,
                };
                let (r, c) = dims.ok_or_else(|| err(format!("expected `matrix <rows> <cols>`, got {text:?}")))?;
                if r == 0 || c == 0 {
                    return Err(err("empty matrix".into()));
                }
                pending = Some((r, c, Vec::with_capacity(r * c)));
            }
            Some((_, c, data)) => {
                let row: Vec<f64> = text
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(format!("{e}")))?;
                if row.len() != *c {
                    return Err(err(format!("expected {c} values, got {}", row.len())));
                }
                data.extend(row);
            }
        }
        if let Some((r, c, data)) = &pending {
            if data.len() == r * c {
                let (r, c, data) = pending.take().expect("checked");
                out.push(Array2::from_shape_vec((r, c), data).expect("sized"));
            }
        }
    }
    if let Some((r, _, data)) = pending {
        return Err(MatrixError::Parse { line: 0, reason: format!("truncated block: {} of {r} rows", data.len()) });
    }
    Ok(out)
}

pub fn write_matrix<W: Write>(mut w: W, m: &Array2<f64>) -> io::Result<()> {
    writeln!(w, "matrix {} {}", m.nrows(), m.ncols())?;
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{}", cells.join(" "))?;
    }
    Ok(())
}
