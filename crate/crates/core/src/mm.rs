//! Matrix Market coordinate I/O for symmetric matrices.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sparse::{SparseSymmetric, TripletList};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

fn parse_header(line: &str) -> Result<Field> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("bad banner: {line:?}"),
        });
    }
    if tokens[1] != "matrix" {
        return Err(Error::UnsupportedFormat(format!("object {}", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!("format {}", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(Error::UnsupportedFormat(format!("field {other}"))),
    };
    if tokens[4] != "symmetric" {
        return Err(Error::UnsupportedFormat(format!("symmetry {}", tokens[4])));
    }
    Ok(field)
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
        line,
        msg: format!("expected {what}"),
    })
}

/// Reads a coordinate `symmetric` matrix. Either triangle may be supplied;
/// `pattern` entries are given the value 1.0.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseSymmetric> {
    let mut lines = reader.lines().enumerate();
    let field = match lines.next() {
        Some((_, line)) => parse_header(&line?)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty input".into(),
            })
        }
    };

    let mut triplets: Option<TripletList> = None;
    let mut expected = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('%') {
            continue;
        }
        let mut toks = body.split_whitespace();
        match triplets.as_mut() {
            None => {
                let m: usize = parse_num(toks.next(), lineno, "row count")?;
                let n: usize = parse_num(toks.next(), lineno, "column count")?;
                expected = parse_num(toks.next(), lineno, "entry count")?;
                if m != n {
                    return Err(Error::UnsupportedFormat(format!("non-square {m} x {n}")));
                }
                triplets = Some(TripletList::with_capacity(n, expected));
            }
            Some(t) => {
                let i: usize = parse_num(toks.next(), lineno, "row index")?;
                let j: usize = parse_num(toks.next(), lineno, "column index")?;
                if i == 0 || j == 0 || i > t.n || j > t.n {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("index ({i}, {j}) out of range"),
                    });
                }
                let v = match field {
                    Field::Pattern => 1.0,
                    Field::Real | Field::Integer => parse_num(toks.next(), lineno, "value")?,
                };
                if toks.next().is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "trailing tokens".into(),
                    });
                }
                t.push(i - 1, j - 1, v);
            }
        }
    }
    let t = triplets.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing size line".into(),
    })?;
    if t.entries.len() != expected {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {expected} entries, found {}", t.entries.len()),
        });
    }
    SparseSymmetric::from_triplets(&t)
}

/// Writes the lower triangle in coordinate symmetric real format, 1-based,
/// with enough digits to round-trip every value exactly.
pub fn write_matrix_market<W: Write>(a: &SparseSymmetric, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market_file(path: impl AsRef<std::path::Path>) -> Result<SparseSymmetric> {
    let f = std::fs::File::open(path)?;
    read_matrix_market(std::io::BufReader::new(f))
}

pub fn write_matrix_market_file(a: &SparseSymmetric, path: impl AsRef<std::path::Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_matrix_market(a, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<SparseSymmetric> {
        read_matrix_market(s.as_bytes())
    }

    #[test]
    fn reads_two_by_two() {
        let a = read(
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 4\n2 1 2\n2 2 3\n",
        )
        .unwrap();
        assert_eq!(a.to_dense(), vec![vec![4.0, 2.0], vec![2.0, 3.0]]);
    }

    #[test]
    fn upper_triangle_is_reflected() {
        let a = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n1 2 2\n2 2 3\n").unwrap();
        assert_eq!(a.get(1, 0), Some(2.0));
        assert_eq!(a.row_idx(), &[0, 1, 1]);
    }

    #[test]
    fn empty_entry_list() {
        let a = read("%%MatrixMarket matrix coordinate real symmetric\n1 1 0\n").unwrap();
        assert_eq!(a.n(), 1);
        assert_eq!(a.nnz(), 0);
    }

    #[test]
    fn pattern_entries_are_one() {
        let a = read("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 2\n1 1\n2 1\n").unwrap();
        assert_eq!(a.values(), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_unsupported_kinds() {
        for banner in [
            "%%MatrixMarket matrix coordinate real general",
            "%%MatrixMarket matrix coordinate complex symmetric",
            "%%MatrixMarket matrix array real symmetric",
            "%%MatrixMarket matrix coordinate real skew-symmetric",
        ] {
            let err = read(&format!("{banner}\n1 1 1\n1 1 1\n")).unwrap_err();
            assert!(matches!(err, Error::UnsupportedFormat(_)), "{banner}: {err}");
        }
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(read(""), Err(Error::Parse { .. })));
        assert!(matches!(read("%%MatrixMarket matrix\n"), Err(Error::Parse { .. })));
        let h = "%%MatrixMarket matrix coordinate real symmetric\n";
        assert!(matches!(read(&format!("{h}2 2 1\n3 1 1.0\n")), Err(Error::Parse { .. })));
        assert!(matches!(read(&format!("{h}2 2 1\n1 1 abc\n")), Err(Error::Parse { .. })));
        assert!(matches!(read(&format!("{h}2 2 2\n1 1 1.0\n")), Err(Error::Parse { .. })));
    }

    #[test]
    fn write_formats() {
        let mut out = Vec::new();
        write_matrix_market(&SparseSymmetric::identity(1).scaled(2.0), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with("1 1 2.0"), "{text}");

        let a = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n2 1 2\n2 2 3\n").unwrap();
        let mut out = Vec::new();
        write_matrix_market(&a, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2 + 3);
        assert_eq!(read(&text).unwrap(), a);
    }
}
