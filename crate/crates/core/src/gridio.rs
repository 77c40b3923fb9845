//! On-disk formats for grid functions.
//!
//! Binary layout (little endian):
//!
//! ```text
//! bytes 0..64   ASCII header, space padded, final byte '\n':
//!               "RHOGRID1 d=<dim> n=<n_per_axis> h=<spacing> t=<f64|c64>"
//! bytes 64..    values in row-major point order; f64 per point, or
//!               (re, im) f64 pairs per point for t=c64
//! ```
//!
//! CSV layout: a header row `i0[,i1[,i2]],value` followed by one row per point
//! with the integer axis indices and the value. Rows may come in any order but
//! every point must appear exactly once.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

pub const HEADER_LEN: usize = 64;
const GRID_MAGIC: &str = "RHOGRID1";

/// Contents of a binary grid file.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFile {
    pub real: GridFunction,
    pub imag: Option<GridFunction>,
}

pub(crate) fn pad_header(text: &str) -> Result<[u8; HEADER_LEN]> {
    if text.len() > HEADER_LEN - 1 || text.contains('\n') {
        return Err(Error::Format(format!("header too long: {text}")));
    }
    let mut buf = [b' '; HEADER_LEN];
    buf[..text.len()].copy_from_slice(text.as_bytes());
    buf[HEADER_LEN - 1] = b'\n';
    Ok(buf)
}

/// Splits a padded header into its magic word and `key=value` fields.
pub(crate) fn parse_header(buf: &[u8; HEADER_LEN]) -> Result<(String, Vec<(String, String)>)> {
    let text = std::str::from_utf8(buf).map_err(|_| Error::Format("header is not ASCII".into()))?;
    let mut parts = text.split_whitespace();
    let magic = parts
        .next()
        .ok_or_else(|| Error::Format("empty header".into()))?
        .to_string();
    let fields = parts
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format(format!("bad header field {p}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((magic, fields))
}

pub(crate) fn header_field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("header missing field {key}")))
}

pub(crate) fn grid_from_header(fields: &[(String, String)]) -> Result<Grid> {
    let num = |k: &str| -> Result<f64> {
        header_field(fields, k)?
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("bad header value for {k}")))
    };
    Grid::new(num("d")? as usize, num("n")? as usize, num("h")?)
}

pub(crate) fn grid_header_fields(grid: &Grid) -> String {
    format!("d={} n={} h={}", grid.dim(), grid.n_per_axis(), grid.spacing())
}

fn write_f64s(w: &mut impl Write, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s(r: &mut impl Read, count: usize) -> std::io::Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_binary(f: &GridFunction, path: &Path) -> Result<()> {
    write_binary_parts(f, None, path)
}

pub fn write_binary_complex(re: &GridFunction, im: &GridFunction, path: &Path) -> Result<()> {
    re.grid().check_same(im.grid())?;
    write_binary_parts(re, Some(im), path)
}

fn write_binary_parts(re: &GridFunction, im: Option<&GridFunction>, path: &Path) -> Result<()> {
    let kind = if im.is_some() { "c64" } else { "f64" };
    let header = pad_header(&format!(
        "{GRID_MAGIC} {} t={kind}",
        grid_header_fields(re.grid())
    ))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        w.write_all(&header)?;
        match im {
            None => write_f64s(&mut w, re.values().iter().copied()),
            Some(im) => write_f64s(
                &mut w,
                re.values()
                    .iter()
                    .zip(im.values())
                    .flat_map(|(&a, &b)| [a, b]),
            ),
        }?;
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_binary(path: &Path) -> Result<GridFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    let (magic, fields) = parse_header(&header)?;
    if magic != GRID_MAGIC {
        return Err(Error::Format(format!("not a grid file (magic {magic})")));
    }
    let grid = grid_from_header(&fields)?;
    let kind = header_field(&fields, "t")?;
    let n = grid.len();
    match kind {
        "f64" => {
            let v = read_f64s(&mut r, n).map_err(|e| Error::io(path, e))?;
            Ok(GridFile {
                real: GridFunction::new(grid, v)?,
                imag: None,
            })
        }
        "c64" => {
            let v = read_f64s(&mut r, 2 * n).map_err(|e| Error::io(path, e))?;
            let re = v.iter().step_by(2).copied().collect();
            let im = v.iter().skip(1).step_by(2).copied().collect();
            Ok(GridFile {
                real: GridFunction::new(grid.clone(), re)?,
                imag: Some(GridFunction::new(grid, im)?),
            })
        }
        other => Err(Error::Format(format!("unknown value type {other}"))),
    }
}

pub fn write_csv(f: &GridFunction, path: &Path) -> Result<()> {
    let grid = f.grid();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = (0..grid.dim()).map(|a| format!("i{a}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (idx, v) in f.values().iter().enumerate() {
        let c = grid.coords(idx);
        let mut row: Vec<String> = c[..grid.dim()].iter().map(|i| i.to_string()).collect();
        row.push(format!("{v:?}"));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(grid: &Grid, path: &Path) -> Result<GridFunction> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let dim = grid.dim();
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != dim + 1 {
            return Err(Error::Format(format!(
                "expected {} columns, found {}",
                dim + 1,
                rec.len()
            )));
        }
        let mut c = Vec::with_capacity(dim);
        for a in 0..dim {
            let i: i64 = rec[a]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad index {}", &rec[a])))?;
            if i < 0 || i as usize >= grid.n_per_axis() {
                return Err(Error::Format(format!("index {i} out of range")));
            }
            c.push(i);
        }
        let v: f64 = rec[dim]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad value {}", &rec[dim])))?;
        let idx = grid.index(&c);
        if seen[idx] {
            return Err(Error::Format(format!("duplicate row for point {idx}")));
        }
        seen[idx] = true;
        values[idx] = v;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Format(format!("missing row for point {missing}")));
    }
    GridFunction::new(grid.clone(), values)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Reads a grid function, choosing the format by extension. CSV needs the
/// target grid; binary files carry their own.
pub fn read_any(path: &Path, grid: Option<&Grid>) -> Result<GridFunction> {
    if is_csv(path) {
        let grid = grid.ok_or_else(|| {
            Error::param(format!("{} is CSV; a grid spec is required", path.display()))
        })?;
        read_csv(grid, path)
    } else {
        let f = read_binary(path)?.real;
        if let Some(g) = grid {
            f.grid().check_same(g)?;
        }
        Ok(f)
    }
}

pub fn write_any(f: &GridFunction, path: &Path) -> Result<()> {
    if is_csv(path) {
        write_csv(f, path)
    } else {
        write_binary(f, path)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn header_is_exactly_64_bytes() {
        let g = make_grid(3, 16, 0.125).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.grid");
        let f = GridFunction::from_fn(&g, |i| i as f64 * 0.5 - 3.0);
        write_binary(&f, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 64 + 8 * g.len());
        assert_eq!(&bytes[..8], b"RHOGRID1");
        assert_eq!(bytes[63], b'\n');
        assert_eq!(&bytes[64..72], &(-3.0f64).to_le_bytes());
        let back = read_binary(&p).unwrap();
        assert_eq!(back.real, f);
        assert!(back.imag.is_none());
    }

    #[test]
    fn complex_and_csv_files() {
        let g = make_grid(2, 5, 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let re = GridFunction::from_fn(&g, |i| (i as f64).sin());
        let im = GridFunction::from_fn(&g, |i| (i as f64).cos() / 7.0);
        let p = dir.path().join("c.grid");
        write_binary_complex(&re, &im, &p).unwrap();
        let back = read_binary(&p).unwrap();
        assert_eq!(back.real, re);
        assert_eq!(back.imag.unwrap(), im);

        let p = dir.path().join("f.csv");
        write_csv(&re, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("i0,i1,value\n0,0,0.0\n"));
        assert_eq!(read_any(&p, Some(&g)).unwrap(), re);
        assert!(read_any(&p, None).is_err());
    }

    #[test]
    fn csv_rejects_missing_rows() {
        let g = make_grid(1, 4, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "i0,value\n0,1\n1,2\n3,4\n").unwrap();
        assert!(matches!(read_csv(&g, &p), Err(Error::Format(_))));
    }
}
