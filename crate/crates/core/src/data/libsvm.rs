//! LIBSVM text format: one example per line, `label idx:val idx:val ...`,
//! 1-based indices. Indices are stored 0-based internally; `dim` is the
//! maximum index observed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Dataset, Features};
use crate::{Error, Result};

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = File::open(path)?;
    let reader = BufReader::new(file);

    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut dim = 0usize;

    let malformed = |line: usize, msg: String| Error::Malformed {
        path: path_str.clone(),
        line,
        msg,
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank line
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| malformed(lineno, format!("non-numeric label '{label_tok}'")))?;

        let mut row: Vec<(u32, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| malformed(lineno, format!("expected idx:val, got '{tok}'")))?;
            let idx1: u32 = idx_s
                .parse()
                .map_err(|_| malformed(lineno, format!("non-numeric feature index '{idx_s}'")))?;
            if idx1 == 0 {
                return Err(malformed(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| malformed(lineno, format!("non-numeric feature value '{val_s}'")))?;
            let idx0 = idx1 - 1;
            if row.iter().any(|&(i, _)| i == idx0) {
                return Err(malformed(
                    lineno,
                    format!("duplicate feature index {idx1} within line"),
                ));
            }
            dim = dim.max(idx1 as usize);
            row.push((idx0, val));
        }
        // conventionally sorted already; tolerate out-of-order input
        row.sort_by_key(|&(i, _)| i);
        rows.push(row);
        labels.push(label);
    }

    if rows.is_empty() {
        return Err(malformed(0, "no examples".into()));
    }
    // A file whose every row is empty of features still needs dim >= 1.
    Dataset::new(dim.max(1), Features::Sparse(rows), labels)
}

/// Writes a dataset in LIBSVM text form (1-based indices). Zero-valued dense
/// entries are omitted, as the format expects.
pub fn save_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for i in 0..ds.n() {
        write!(w, "{}", ds.labels()[i])?;
        match ds.features() {
            Features::Dense(rows) => {
                for (j, &v) in rows[i].iter().enumerate() {
                    if v != 0.0 {
                        write!(w, " {}:{}", j + 1, v)?;
                    }
                }
            }
            Features::Sparse(rows) => {
                for &(j, v) in &rows[i] {
                    write!(w, " {}:{}", j + 1, v)?;
                }
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_basic_line() {
        let f = write_tmp("+1 1:0.5 3:-2\n");
        let ds = load_libsvm(f.path()).unwrap();
        assert_eq!(ds.n(), 1);
        assert!(ds.dim() >= 3);
        assert_eq!(ds.labels()[0], 1.0);
        match ds.features() {
            Features::Sparse(rows) => assert_eq!(rows[0], vec![(0, 0.5), (2, -2.0)]),
            _ => panic!("expected sparse"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("");
        let err = load_libsvm(f.path()).unwrap_err();
        assert!(err.to_string().contains("no examples"));
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let f = write_tmp("+1 1:0.5\n-1 2:abc\n");
        let err = load_libsvm(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "missing line number in: {msg}");

        let f = write_tmp("+1 1:0.5 1:0.7\n");
        let err = load_libsvm(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate feature index"));

        let f = write_tmp("abc 1:0.5\n");
        assert!(load_libsvm(f.path()).is_err());

        let f = write_tmp("+1 0:0.5\n");
        assert!(load_libsvm(f.path()).is_err());
    }

    #[test]
    fn roundtrip_synthetic() {
        let ds = super::super::generate_synthetic_logistic(32, 6, 13, 0.1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_libsvm(&ds, f.path()).unwrap();
        let back = load_libsvm(f.path()).unwrap();
        assert_eq!(back.n(), ds.n());
        assert_eq!(back.dim(), ds.dim());
        assert_eq!(back.labels(), ds.labels());
        // dense vs sparse representation: compare element-wise
        for i in 0..ds.n() {
            let mut dense = vec![0.0; ds.dim()];
            back.row_axpy(i, 1.0, &mut dense);
            match ds.features() {
                Features::Dense(rows) => assert_eq!(&rows[i][..], &dense[..]),
                _ => unreachable!(),
            }
        }
    }
}
