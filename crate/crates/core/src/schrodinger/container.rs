//! Binary operator container.
//!
//! Layout: the 8-byte magic `RHOOPER1`, a little-endian `u64` header length,
//! a UTF-8 JSON header ([`OperatorHeader`]), then every stored matrix as
//! row-major little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::DiscreteOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;

const MAGIC: &[u8; 8] = b"RHOOPER1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    /// Number of stored matrices (two for a complex operator).
    pub matrices: usize,
    pub complex: bool,
    pub provenance: String,
    pub potential: Option<String>,
}

pub fn write_operator(op: &DiscreteOperator, path: &Path) -> Result<()> {
    let g = op.grid();
    let header = OperatorHeader {
        dim: g.dim(),
        n: g.n_per_axis(),
        h: g.spacing(),
        matrices: op.matrices().len(),
        complex: op.is_complex(),
        provenance: op.provenance().to_string(),
        potential: op.potential().map(str::to_string),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    let n = g.len();
    let mut row = Vec::with_capacity(8 * n);
    for m in op.matrices() {
        for x in 0..n {
            row.clear();
            for y in 0..n {
                row.extend_from_slice(&m[(x, y)].to_le_bytes());
            }
            w.write_all(&row).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_operator(path: &Path) -> Result<DiscreteOperator> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: not an operator container", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::Format("operator header too long".into()));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let header: OperatorHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Format(format!("operator header: {e}")))?;
    let grid = Grid::new(header.dim, header.n, header.h)?;
    let n = grid.len();
    let mut buf = vec![0u8; 8 * n];
    let mut comps = Vec::with_capacity(header.matrices);
    for _ in 0..header.matrices {
        let mut m = Mat::<f64>::zeros(n, n);
        for x in 0..n {
            r.read_exact(&mut buf).map_err(io)?;
            for (y, chunk) in buf.chunks_exact(8).enumerate() {
                m[(x, y)] = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            }
        }
        comps.push(m);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Format("trailing bytes after operator data".into()));
    }
    let op = DiscreteOperator::from_components(&grid, comps, header.complex, header.provenance)?;
    Ok(match header.potential {
        Some(p) => op.with_potential(p),
        None => op,
    })
}
