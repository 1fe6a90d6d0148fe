//! CSV matrices and the on-disk exchange format of local sketches.
//!
//! Matrices are written with a `c0,c1,…` header line. A local sketch file
//! starts with the line `node,r,d,seed`, then one line with those values, then
//! the `r × d` payload rows. A directory of local sketches holds one such file
//! per node plus `manifest.csv` with columns `node,r,d,seed,file`.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::distributed::{aggregate, GlobalSketch, LocalSketch};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MANIFEST_FILE: &str = "manifest.csv";
const MANIFEST_HEADER: [&str; 5] = ["node", "r", "d", "seed", "file"];
const LOCAL_HEADER: &str = "node,r,d,seed";

/// Parses a rectangular numeric CSV; a non-numeric first line is taken as a header.
///
/// Locations in errors are 1-based.
pub fn parse_numeric_csv(input: impl Read) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, (usize, String)> = record
            .iter()
            .enumerate()
            .map(|(j, field)| field.parse::<f64>().map_err(|_| (j + 1, field.to_string())))
            .collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(record.len());
                continue;
            }
            Err((column, value)) => {
                return Err(Error::NonNumeric {
                    line,
                    column,
                    value,
                })
            }
        };
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumeric {
                line,
                column: bad + 1,
                value: record[bad].to_string(),
            });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line,
                    column: values.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", values.len()),
                })
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no numeric rows".into(),
        });
    }
    Matrix::from_rows(&rows)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_numeric_csv(file)
}

/// Writes `m` with a `c0,c1,…` header; values use the shortest round-trip form.
pub fn write_matrix(m: &Matrix, mut out: impl Write) -> Result<()> {
    let header: Vec<String> = (0..m.cols()).map(|j| format!("c{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    write_rows(m, out)
}

fn write_rows(m: &Matrix, mut out: impl Write) -> Result<()> {
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix(m, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes one local sketch in the node file format.
pub fn write_local_sketch(sketch: &LocalSketch, mut out: impl Write) -> Result<()> {
    let p = &sketch.payload;
    writeln!(out, "{LOCAL_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{}",
        sketch.node,
        p.rows(),
        p.cols(),
        sketch.seed
    )?;
    write_rows(p, out)
}

/// Reads one local sketch written by [`write_local_sketch`].
pub fn read_local_sketch(input: impl Read) -> Result<LocalSketch> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(LOCAL_HEADER) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("local sketch must start with `{LOCAL_HEADER}`"),
        });
    }
    let meta = lines.next().unwrap_or_default();
    let fields: Vec<&str> = meta.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: 2,
            column: fields.len().min(4) + 1,
            message: "expected node,r,d,seed values".into(),
        });
    }
    let mut values = [0u64; 4];
    for (j, (slot, field)) in values.iter_mut().zip(&fields).enumerate() {
        *slot = field.parse().map_err(|_| Error::NonNumeric {
            line: 2,
            column: j + 1,
            value: field.to_string(),
        })?;
    }
    let [node, rows, cols, seed] = values;
    let body: String = lines.flat_map(|l| [l, "\n"]).collect();
    let payload = parse_numeric_csv(body.as_bytes()).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line: line + 2,
            column,
            message,
        },
        Error::NonNumeric {
            line,
            column,
            value,
        } => Error::NonNumeric {
            line: line + 2,
            column,
            value,
        },
        other => other,
    })?;
    if payload.shape() != (rows as usize, cols as usize) {
        return Err(Error::DimensionMismatch(format!(
            "local sketch declares {rows}x{cols}, payload is {}x{}",
            payload.rows(),
            payload.cols()
        )));
    }
    Ok(LocalSketch {
        node: node as usize,
        seed,
        payload,
        sample_rows: Vec::new(),
    })
}

fn node_file_name(node: usize) -> String {
    format!("node_{node:04}.csv")
}

/// Writes each payload and the manifest into `dir`, creating it if needed.
pub fn write_local_sketches(dir: impl AsRef<Path>, sketches: &[LocalSketch]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = csv::Writer::from_path(&manifest_path)?;
    manifest.write_record(MANIFEST_HEADER)?;
    for s in sketches {
        let name = node_file_name(s.node);
        let path = dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        write_local_sketch(s, &mut out)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        manifest.write_record([
            s.node.to_string(),
            s.payload.rows().to_string(),
            s.payload.cols().to_string(),
            s.seed.to_string(),
            name,
        ])?;
    }
    manifest.flush().map_err(|e| Error::io(manifest_path, e))
}

/// Reads the payloads listed in `dir/manifest.csv`, checking their shapes.
pub fn read_local_sketches(dir: impl AsRef<Path>) -> Result<Vec<LocalSketch>> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut reader = csv::Reader::from_path(&manifest_path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("manifest header must be {}", MANIFEST_HEADER.join(",")),
        });
    }
    let mut sketches = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |column: usize| -> Result<u64> {
            record[column].parse().map_err(|_| Error::NonNumeric {
                line,
                column: column + 1,
                value: record[column].to_string(),
            })
        };
        let (node, rows, cols, seed) = (
            field(0)? as usize,
            field(1)? as usize,
            field(2)? as usize,
            field(3)?,
        );
        let file: PathBuf = dir.join(&record[4]);
        let sketch = read_local_sketch(File::open(&file).map_err(|e| Error::io(&file, e))?)?;
        if (
            sketch.node,
            sketch.payload.rows(),
            sketch.payload.cols(),
            sketch.seed,
        ) != (node, rows, cols, seed)
        {
            return Err(Error::DimensionMismatch(format!(
                "{} disagrees with its manifest entry",
                file.display()
            )));
        }
        sketches.push(sketch);
    }
    Ok(sketches)
}

/// Reads a directory of local sketches and aggregates them.
pub fn aggregate_dir(dir: impl AsRef<Path>) -> Result<GlobalSketch> {
    aggregate(&read_local_sketches(dir)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_csv_parses_exactly() {
        let m = parse_numeric_csv("1,2\n3.5,-4\n0,1e3\n".as_bytes()).unwrap();
        assert_eq!(
            m,
            Matrix::from_rows(&[vec![1.0, 2.0], vec![3.5, -4.0], vec![0.0, 1000.0]]).unwrap()
        );
    }

    #[test]
    fn header_is_skipped() {
        let m = parse_numeric_csv("year,f1\n2001,0.5\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (1, 2));
    }

    #[test]
    fn errors_carry_locations() {
        match parse_numeric_csv("1,2\n3,x\n".as_bytes()) {
            Err(Error::NonNumeric {
                line,
                column,
                value,
            }) => {
                assert_eq!((line, column, value.as_str()), (2, 2, "x"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_numeric_csv("1,2\n3\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn local_sketch_round_trip() {
        let sketch = LocalSketch {
            node: 3,
            seed: 99,
            payload: Matrix::from_fn(2, 3, |i, j| i as f64 - 0.25 * j as f64),
            sample_rows: Vec::new(),
        };
        let mut buf = Vec::new();
        write_local_sketch(&sketch, &mut buf).unwrap();
        assert!(buf.starts_with(b"node,r,d,seed\n3,2,3,99\n"));
        assert_eq!(read_local_sketch(buf.as_slice()).unwrap(), sketch);
    }

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert!(buf.starts_with(b"c0,c1\n"));
        assert_eq!(parse_numeric_csv(buf.as_slice()).unwrap(), m);
    }
}
