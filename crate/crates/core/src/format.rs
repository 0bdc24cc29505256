//! Binary file formats: the `VSTC` volume cache and the `VSDS` dataset file.
//!
//! Both are little-endian throughout. Layout of `VSTC` (version 1):
//!
//! ```text
//! "VSTC" | version u32 | m u32 | n u32 | T u32 | v_min f32 | v_max f32
//!        | lon0 f64 | lat0 f64 | lon1 f64 | lat1 f64 | t0 i64 | dt u32
//!        | m*n*T f32 in ((t*n + y)*m + x) order
//! ```
//!
//! `VSDS` (version 1) stores an `StDataset`:
//!
//! ```text
//! "VSDS" | version u32 | S u32 | T u32 | t0 i64 | dt u32 | v_min f64 | v_max f64
//!        | S x (id_len u32 | id utf-8 | lon f64 | lat f64)
//!        | S*T f32 station-major, NaN marks a missing reading
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GridSpec, SpaceTimeVolume, StDataset, StSeries, Station, ValueRange};

pub const VSTC_MAGIC: &[u8; 4] = b"VSTC";
pub const VSTC_VERSION: u32 = 1;
pub const VSD_MAGIC: &[u8; 4] = b"VSDS";
pub const VSD_VERSION: u32 = 1;

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

struct LeReader<R> {
    inner: R,
}

impl<R: Read> LeReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated file".into())
            } else {
                Error::Io(e)
            }
        })?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.bytes()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f32_array(&mut self, len: usize) -> Result<Vec<f32>> {
        let mut raw = vec![0u8; len.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?];
        self.inner.read_exact(&mut raw).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated data block".into())
            } else {
                Error::Io(e)
            }
        })?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
    fn magic(&mut self, expected: &[u8; 4], version: u32) -> Result<()> {
        let magic: [u8; 4] = self.bytes()?;
        if &magic != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(expected)
            )));
        }
        let v = self.u32()?;
        if v != version {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }
}

fn write_f32s<W: Write>(w: &mut W, values: impl Iterator<Item = f32>) -> Result<()> {
    let mut buf = Vec::with_capacity(64 * 1024);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 64 * 1024 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_volume<W: Write>(volume: &SpaceTimeVolume, mut w: W) -> Result<()> {
    let g = volume.grid();
    let range = volume.value_range();
    w.write_all(VSTC_MAGIC)?;
    w.write_all(&VSTC_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(g.m, "m")?.to_le_bytes())?;
    w.write_all(&to_u32(g.n, "n")?.to_le_bytes())?;
    w.write_all(&to_u32(volume.steps(), "T")?.to_le_bytes())?;
    w.write_all(&(range.min as f32).to_le_bytes())?;
    w.write_all(&(range.max as f32).to_le_bytes())?;
    for v in [g.lon0, g.lat0, g.lon1, g.lat1] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&volume.t0().to_le_bytes())?;
    w.write_all(&volume.dt().to_le_bytes())?;
    write_f32s(&mut w, volume.data().iter().copied())?;
    w.flush()?;
    Ok(())
}

pub fn read_volume<R: Read>(r: R) -> Result<SpaceTimeVolume> {
    let mut r = LeReader { inner: r };
    r.magic(VSTC_MAGIC, VSTC_VERSION)?;
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let steps = r.u32()? as usize;
    let vmin = r.f32()? as f64;
    let vmax = r.f32()? as f64;
    let (lon0, lat0, lon1, lat1) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let t0 = r.i64()?;
    let dt = r.u32()?;
    let grid = GridSpec::new((lon0, lat0, lon1, lat1), m, n)?;
    let len = m
        .checked_mul(n)
        .and_then(|v| v.checked_mul(steps))
        .ok_or_else(|| Error::Format("volume dimensions overflow".into()))?;
    let data = r.f32_array(len)?;
    SpaceTimeVolume::new(grid, steps, t0, dt, ValueRange::new(vmin, vmax)?, data)
}

pub fn save_volume(volume: &SpaceTimeVolume, path: impl AsRef<Path>) -> Result<()> {
    write_volume(volume, BufWriter::new(File::create(path)?))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<SpaceTimeVolume> {
    read_volume(BufReader::new(File::open(path)?))
}

pub fn write_dataset<W: Write>(ds: &StDataset, mut w: W) -> Result<()> {
    w.write_all(VSD_MAGIC)?;
    w.write_all(&VSD_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(ds.station_count(), "S")?.to_le_bytes())?;
    w.write_all(&to_u32(ds.steps(), "T")?.to_le_bytes())?;
    w.write_all(&ds.t0().to_le_bytes())?;
    w.write_all(&ds.dt().to_le_bytes())?;
    w.write_all(&ds.value_range().min.to_le_bytes())?;
    w.write_all(&ds.value_range().max.to_le_bytes())?;
    for st in ds.stations() {
        let id = st.id.as_bytes();
        w.write_all(&to_u32(id.len(), "station id length")?.to_le_bytes())?;
        w.write_all(id)?;
        w.write_all(&st.lon.to_le_bytes())?;
        w.write_all(&st.lat.to_le_bytes())?;
    }
    write_f32s(
        &mut w,
        ds.series()
            .iter()
            .flat_map(|s| s.values.iter().map(|v| v.unwrap_or(f32::NAN))),
    )?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<StDataset> {
    let mut r = LeReader { inner: r };
    r.magic(VSD_MAGIC, VSD_VERSION)?;
    let s = r.u32()? as usize;
    let steps = r.u32()? as usize;
    let t0 = r.i64()?;
    let dt = r.u32()?;
    let range = ValueRange::new(r.f64()?, r.f64()?)?;
    let mut stations = Vec::with_capacity(s.min(1 << 20));
    for _ in 0..s {
        let len = r.u32()? as usize;
        let mut id = vec![0u8; len];
        r.inner.read_exact(&mut id)?;
        let id = String::from_utf8(id).map_err(|_| Error::Format("station id is not utf-8".into()))?;
        let lon = r.f64()?;
        let lat = r.f64()?;
        stations.push(Station { id, lon, lat });
    }
    let values = r.f32_array(s * steps)?;
    let series = stations
        .iter()
        .zip(values.chunks_exact(steps.max(1)))
        .map(|(st, chunk)| StSeries {
            station_id: st.id.clone(),
            values: chunk.iter().map(|v| (!v.is_nan()).then_some(*v)).collect(),
        })
        .collect();
    StDataset::new(stations, series, t0, dt, steps, range)
}

pub fn save_dataset(ds: &StDataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, BufWriter::new(File::create(path)?))
}

pub fn load_dataset_file(path: impl AsRef<Path>) -> Result<StDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}
