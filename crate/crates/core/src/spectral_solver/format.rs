//! Flat little-endian grid files.
//!
//! Layout: `b"AKGF"`, version `u32`, axis count `u32`, one `u64` size per
//! axis, one `f64` period per axis, then `(re, im)` `f64` pairs in row-major
//! order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::grid::{GridField, GridSpec};
use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"AKGF";
pub const GRID_VERSION: u32 = 1;

fn io(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_grid(field: &GridField, out: &mut impl Write) -> Result<()> {
    let spec = field.spec();
    let mut buf = Vec::with_capacity(16 + 16 * spec.dim() + 16 * field.len());
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.dim() as u32).to_le_bytes());
    for &s in spec.sizes() {
        buf.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for &p in spec.periods() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .data
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice of length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_grid(input: &mut impl Read) -> Result<GridField> {
    let mut data = Vec::new();
    input.read_to_end(&mut data).map_err(io)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if &c.take::<4>()? != GRID_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = c.u32()? as usize;
    if n == 0 || n > 16 {
        return Err(Error::Format(format!("implausible axis count {n}")));
    }
    let sizes = (0..n)
        .map(|_| c.u64().map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let periods = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let spec = GridSpec::new(sizes, periods).map_err(|e| Error::Format(e.to_string()))?;
    let expected = spec.len() * 16;
    if data.len() - c.pos != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, grid needs {expected}",
            data.len() - c.pos
        )));
    }
    let mut values = Vec::with_capacity(spec.len());
    for _ in 0..spec.len() {
        let re = c.f64()?;
        let im = c.f64()?;
        values.push(Complex64::new(re, im));
    }
    GridField::new(spec, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_grid_file(field: &GridField, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_grid(field, &mut buf)?;
    fs::write(path, buf).map_err(io)
}

pub fn read_grid_file(path: &Path) -> Result<GridField> {
    let mut f = fs::File::open(path).map_err(io)?;
    read_grid(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let spec = GridSpec::new(vec![4, 8], vec![1.5, 6.0]).unwrap();
        let f = GridField::from_fn(&spec, |x| Complex64::new(x[0], -x[1] * x[1]));
        let mut buf = Vec::new();
        write_grid(&f, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"AKGF");
        assert_eq!(buf.len(), 4 + 4 + 4 + 16 + 16 + 32 * 16);
        let back = read_grid(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_corrupt_input() {
        let spec = GridSpec::new(vec![4], vec![1.0]).unwrap();
        let mut buf = Vec::new();
        write_grid(&GridField::zeros(&spec), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_grid(&mut bad.as_slice()), Err(Error::Format(_))));
        let short = &buf[..buf.len() - 3];
        assert!(read_grid(&mut &short[..]).is_err());
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(read_grid(&mut v2.as_slice()).is_err());
    }
}
