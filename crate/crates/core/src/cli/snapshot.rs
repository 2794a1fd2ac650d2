//! Binary field snapshots.
//!
//! Little-endian layout:
//!
//! | bytes       | content                         |
//! |-------------|---------------------------------|
//! | 8           | magic `CHRPSNAP`                |
//! | 4           | `u32` format version (1)        |
//! | 4           | `u32` dimension `d`             |
//! | 8 d         | `u64` cells per axis            |
//! | 8 d         | `f64` box lengths               |
//! | 8           | `f64` time                      |
//! | 8 N         | `f64` values of `u`, row-major  |
//! | 8 N         | `f64` values of `v`, row-major  |

use crate::grid::{Grid, ScalarField};
use crate::solver::State;
use std::io::{self, Read, Write};
use std::path::Path;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CHRPSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
}

pub fn encode(s: &State) -> Vec<u8> {
    let g = s.grid();
    let mut out = Vec::with_capacity(40 + 16 * g.dim() + 16 * g.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &c in g.cells() {
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for &l in g.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&s.t.to_le_bytes());
    for f in [&s.u, &s.v] {
        for &x in f.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> io::Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| invalid("snapshot is truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(buf: &[u8]) -> io::Result<Snapshot> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(8)? != SNAPSHOT_MAGIC {
        return Err(invalid("not a snapshot file (bad magic)"));
    }
    let version = c.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(invalid(format!("unsupported snapshot version {version}")));
    }
    let dim = c.u32()? as usize;
    if !(1..=3).contains(&dim) {
        return Err(invalid(format!("snapshot dimension {dim} outside 1..=3")));
    }
    let cells = (0..dim)
        .map(|_| c.u64().map(|x| x as usize))
        .collect::<io::Result<Vec<_>>>()?;
    let lengths = (0..dim).map(|_| c.f64()).collect::<io::Result<Vec<_>>>()?;
    let t = c.f64()?;
    let grid = Grid::new(&cells, &lengths).map_err(|e| invalid(e.to_string()))?;
    let n = grid.len();
    if buf.len() - c.pos != 16 * n {
        return Err(invalid(format!(
            "snapshot payload has {} bytes, expected {}",
            buf.len() - c.pos,
            16 * n
        )));
    }
    let mut field = || -> io::Result<ScalarField> {
        let vals = (0..n).map(|_| c.f64()).collect::<io::Result<Vec<_>>>()?;
        ScalarField::new(grid, vals).map_err(|e| invalid(e.to_string()))
    };
    let u = field()?;
    let v = field()?;
    Ok(Snapshot { t, u, v })
}

pub fn write_snapshot(path: &Path, s: &State) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode(s))?;
    f.flush()
}

pub fn read_snapshot(path: &Path) -> io::Result<Snapshot> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            dim in 1usize..=3,
            n in 4usize..7,
            t in 0.0f64..10.0,
            seed in any::<u64>(),
        ) {
            let g = Grid::new(&vec![n; dim], &vec![0.75; dim]).unwrap();
            let u = ScalarField::from_fn(g, |x| (x[0] * 13.0 + seed as f64).sin().abs());
            let v = ScalarField::from_fn(g, |x| 1e-300 + x[1] * x[2]);
            let s = State::new(u, v, t).unwrap();
            let d = decode(&encode(&s)).unwrap();
            prop_assert_eq!(d.t.to_bits(), t.to_bits());
            for (a, b) in d.u.values().iter().chain(d.v.values()).zip(s.u.values().iter().chain(s.v.values())) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(d.u.grid(), s.grid());
        }
    }

    #[test]
    fn header_layout() {
        let g = Grid::new(&[4, 5], &[1.0, 2.0]).unwrap();
        let s = State::new(ScalarField::constant(g, 1.0), ScalarField::constant(g, 2.0), 0.5).unwrap();
        let b = encode(&s);
        assert_eq!(&b[..8], b"CHRPSNAP");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(b[40..48].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(b[48..56].try_into().unwrap()), 0.5);
        assert_eq!(b.len(), 56 + 16 * 20);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let g = Grid::unit(1, 4).unwrap();
        let s = State::new(ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0), 0.0).unwrap();
        let b = encode(&s);
        assert!(decode(&b[..b.len() - 1]).is_err());
        let mut m = b.clone();
        m[0] = b'X';
        assert!(decode(&m).is_err());
        let mut m = b.clone();
        m.push(0);
        assert!(decode(&m).is_err());
    }
}
