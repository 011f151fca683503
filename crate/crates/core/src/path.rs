//! Discretised paths and their on-disk formats.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::grid::TimeGrid;

/// A `d`-dimensional path sampled on a [`TimeGrid`], stored row-major as
/// `(N+1) × d` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return shape("path dimension must be positive");
        }
        if values.len() != grid.len() * dim {
            return shape(format!(
                "expected {} values for {} points of dimension {dim}, got {}",
                grid.len() * dim,
                grid.len(),
                values.len()
            ));
        }
        Ok(Self { grid, dim, values })
    }

    /// Path starting at zero with the given per-cell increments (`N × d`).
    pub fn from_increments(grid: TimeGrid, dim: usize, increments: &[f64]) -> Result<Self> {
        if increments.len() != grid.steps() * dim {
            return shape("increment count does not match grid");
        }
        let mut values = vec![0.0; grid.len() * dim];
        for i in 0..grid.steps() {
            for c in 0..dim {
                values[(i + 1) * dim + c] = values[i * dim + c] + increments[i * dim + c];
            }
        }
        Ok(Self { grid, dim, values })
    }

    /// Builds a path by evaluating `f(t)` at every grid point.
    pub fn from_fn(grid: TimeGrid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for &t in grid.points() {
            let v = f(t);
            if v.len() != dim {
                return shape("closure returned a value of the wrong dimension");
            }
            values.extend(v);
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Per-cell increments, `N × d`.
    pub fn increments(&self) -> Vec<f64> {
        let d = self.dim;
        (0..self.grid.steps() * d)
            .map(|k| self.values[k + d] - self.values[k])
            .collect()
    }

    /// Linear interpolation with every cell split into `factor` equal parts.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return shape("refinement factor must be positive");
        }
        let n = self.grid.steps();
        let d = self.dim;
        let mut points = Vec::with_capacity(n * factor + 1);
        let mut values = Vec::with_capacity((n * factor + 1) * d);
        for i in 0..n {
            let (t0, t1) = (self.grid.t(i), self.grid.t(i + 1));
            let (a, b) = (self.value(i), self.value(i + 1));
            for k in 0..factor {
                let w = k as f64 / factor as f64;
                points.push(t0 + w * (t1 - t0));
                values.extend(a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y));
            }
        }
        points.push(self.grid.horizon());
        values.extend_from_slice(self.value(n));
        Self::new(TimeGrid::from_points(points)?, d, values)
    }

    pub fn ensure_same_grid(&self, other: &Path) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return shape("paths live on different grids or dimensions");
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|c| format!("x_{c}")));
        wr.write_record(&header)?;
        for (i, &t) in self.grid.points().iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.value(i).iter().map(f64::to_string));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let dim = rd.headers()?.len().saturating_sub(1);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(e.to_string()));
            times.push(parse(&rec[0])?);
            for c in 1..=dim {
                values.push(parse(&rec[c])?);
            }
        }
        Self::new(TimeGrid::from_points(times)?, dim, values)
    }

    pub fn to_container(&self) -> Container {
        Container {
            times: self.grid.points().to_vec(),
            dim: self.dim,
            values: self.values.clone(),
            sections: Vec::new(),
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        Self::new(TimeGrid::from_points(c.times.clone())?, c.dim, c.values.clone())
    }
}

const MAGIC: &[u8; 4] = b"TCIP";
pub const CONTAINER_VERSION: u32 = 1;

/// Binary container: magic `TCIP`, `u32` version, then a path payload and
/// named `f64` sections, all little-endian.
///
/// Layout: `dim: u32`, `points: u64`, times, values, `sections: u32`, then per
/// section a `u8` tag length, the tag bytes, a `u64` count and the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub times: Vec<f64>,
    pub dim: usize,
    pub values: Vec<f64>,
    pub sections: Vec<(String, Vec<f64>)>,
}

impl Container {
    pub fn section(&self, tag: &str) -> Option<&[f64]> {
        self.sections.iter().find(|(t, _)| t == tag).map(|(_, v)| v.as_slice())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        write_f64s(&mut w, &self.times)?;
        write_f64s(&mut w, &self.values)?;
        w.write_all(&(self.sections.len() as u32).to_le_bytes())?;
        for (tag, data) in &self.sections {
            let bytes = tag.as_bytes();
            if bytes.len() > u8::MAX as usize {
                return Err(Error::Format(format!("section tag too long: {tag}")));
            }
            w.write_all(&[bytes.len() as u8])?;
            w.write_all(bytes)?;
            w.write_all(&(data.len() as u64).to_le_bytes())?;
            write_f64s(&mut w, data)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CONTAINER_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let points = read_u64(&mut r)? as usize;
        let times = read_f64s(&mut r, points)?;
        let values = read_f64s(&mut r, points * dim)?;
        let count = read_u32(&mut r)? as usize;
        let mut sections = Vec::with_capacity(count);
        for _ in 0..count {
            let mut len = [0u8; 1];
            r.read_exact(&mut len)?;
            let mut tag = vec![0u8; len[0] as usize];
            r.read_exact(&mut tag)?;
            let tag = String::from_utf8(tag).map_err(|e| Error::Format(e.to_string()))?;
            let n = read_u64(&mut r)? as usize;
            sections.push((tag, read_f64s(&mut r, n)?));
        }
        Ok(Self { times, dim, values, sections })
    }
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 8);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Path {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        Path::from_fn(g, 2, |t| vec![t.sin(), -t / 3.0]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = sample();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_1,x_2\n"));
        assert_eq!(Path::read_csv(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn container_round_trip_with_sections() {
        let p = sample();
        let mut c = p.to_container();
        c.sections.push(("AREA".into(), vec![1.0, -2.5]));
        c.sections.push(("WM1".into(), vec![]));
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"TCIP");
        let back = Container::read(buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.section("AREA").unwrap(), &[1.0, -2.5]);
        assert_eq!(Path::from_container(&back).unwrap(), p);
        buf[0] = b'X';
        assert!(Container::read(buf.as_slice()).is_err());
    }

    #[test]
    fn increments_round_trip() {
        let p = sample();
        let q = Path::from_increments(p.grid().clone(), 2, &p.increments()).unwrap();
        for (a, b) in p.values().iter().zip(q.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
