//! Plain-text matrix format.
//!
//! ```text
//! N <n>
//! <i> <j> <w>      one line per nonzero edge, i < j, 0-based
//! H <i> <v>        optional field entries
//! ```
//!
//! Weights are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces the matrix bit for bit. Blank lines and lines
//! starting with `#` are ignored on input.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::CouplingMatrix;
use crate::error::{Error, Result};

pub fn write_matrix<W: Write>(m: &CouplingMatrix, mut out: W) -> Result<()> {
    writeln!(out, "N {}", m.n())?;
    for (i, j, w) in m.edges() {
        writeln!(out, "{i} {j} {w:?}")?;
    }
    for (i, &h) in m.field().iter().enumerate() {
        if h != 0.0 {
            writeln!(out, "H {i} {h:?}")?;
        }
    }
    Ok(())
}

pub fn write_matrix_file(m: &CouplingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(m, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

pub fn read_matrix<R: Read>(input: R) -> Result<CouplingMatrix> {
    let mut matrix: Option<CouplingMatrix> = None;
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap_or_default();
        match (first, matrix.as_mut()) {
            ("N", None) => {
                let n: usize = field(toks.next(), lineno, "size")?;
                matrix = Some(CouplingMatrix::zeros(n));
            }
            ("N", Some(_)) => return Err(parse_err(lineno, "duplicate N header")),
            (_, None) => return Err(parse_err(lineno, "expected 'N <n>' header first")),
            ("H", Some(m)) => {
                let i: usize = field(toks.next(), lineno, "field index")?;
                let v: f64 = field(toks.next(), lineno, "field value")?;
                m.set_field(i, v)
                    .map_err(|e| parse_err(lineno, e.to_string()))?;
            }
            (_, Some(m)) => {
                let i: usize = field(Some(first), lineno, "row index")?;
                let j: usize = field(toks.next(), lineno, "column index")?;
                let w: f64 = field(toks.next(), lineno, "weight")?;
                if i >= j {
                    return Err(parse_err(lineno, format!("edge ({i}, {j}) needs i < j")));
                }
                m.set(i, j, w).map_err(|e| parse_err(lineno, e.to_string()))?;
            }
        }
        if toks.next().is_some() {
            return Err(parse_err(lineno, "trailing tokens"));
        }
    }
    matrix.ok_or_else(|| parse_err(0, "empty matrix file"))
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<CouplingMatrix> {
    read_matrix(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{mobius_ladder, sk_instance};
    use proptest::prelude::*;

    #[test]
    fn mobius_file_layout() {
        let mut buf = Vec::new();
        write_matrix(&mobius_ladder(8, 0.4).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N 8");
        assert_eq!(lines.len(), 13);
        assert!(lines.contains(&"0 1 -1.0"));
        assert!(lines.contains(&"0 4 -0.4"));
    }

    #[test]
    fn field_lines_round_trip() {
        let mut m = mobius_ladder(4, 0.0).unwrap();
        m.set_field(2, 0.25).unwrap();
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("H 2 0.25"));
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_matrix("0 1 1.0\n".as_bytes()).is_err());
        assert!(read_matrix("N 3\n1 0 1.0\n".as_bytes()).is_err());
        assert!(read_matrix("N 3\n0 5 1.0\n".as_bytes()).is_err());
        assert!(read_matrix("N 3\n0 1 x\n".as_bytes()).is_err());
        assert!(read_matrix("".as_bytes()).is_err());
        assert!(read_matrix("N 3\n0 1 1.0 7\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn sk_round_trips_bitwise(n in 2usize..20, seed in any::<u64>()) {
            let m = sk_instance(n, seed).unwrap();
            let mut buf = Vec::new();
            write_matrix(&m, &mut buf).unwrap();
            prop_assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
        }
    }
}
