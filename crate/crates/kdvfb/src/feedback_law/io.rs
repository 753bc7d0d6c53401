//! Binary library container.
//!
//! Layout, all numbers little-endian:
//!
//! ```text
//! magic        8 bytes  "KDVFBLIB"
//! version      u32      1
//! length       f64
//! nodes        u64
//! dt, theta    f64 f64
//! period_steps u64
//! window_steps u64
//! modal_dim    u64
//! delta        f64
//! lipschitz    f64
//! planes       u64
//! per plane:   omega f64, quarter f64, first u64,
//!              4 targets of modal_dim f64,
//!              4 windows of (start u64, gain f64, count u64, count f64)
//! ```

use std::io::Write;
use std::path::Path;

use super::library::{PlaneLibrary, SteeringLibrary, Window};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"KDVFBLIB";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated library file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format("count out of range".into()))
    }
    fn count(&mut self, per_item: usize) -> Result<usize> {
        let n = self.u64()?;
        if n.saturating_mul(per_item) > self.buf.len() - self.pos {
            return Err(Error::Format("count exceeds file size".into()));
        }
        Ok(n)
    }
}

impl SteeringLibrary {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.f64(self.length);
        w.u64(self.nodes);
        w.f64(self.dt);
        w.f64(self.theta);
        w.u64(self.period_steps);
        w.u64(self.window_steps);
        w.u64(self.modal_dim);
        w.f64(self.delta);
        w.f64(self.lipschitz);
        w.u64(self.planes.len());
        for p in &self.planes {
            w.f64(p.omega);
            w.f64(p.quarter);
            w.u64(p.first);
            for t in &p.targets {
                t.iter().for_each(|v| w.f64(*v));
            }
            for win in &p.windows {
                w.u64(win.start);
                w.f64(win.gain);
                w.u64(win.samples.len());
                win.samples.iter().for_each(|v| w.f64(*v));
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a steering library file".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported library version {version}"
            )));
        }
        let length = r.f64()?;
        let nodes = r.u64()?;
        let dt = r.f64()?;
        let theta = r.f64()?;
        let period_steps = r.u64()?;
        let window_steps = r.u64()?;
        let modal_dim = r.u64()?;
        let delta = r.f64()?;
        let lipschitz = r.f64()?;
        let nplanes = r.count(8)?;
        if modal_dim != 2 * nplanes {
            return Err(Error::Format(
                "modal dimension does not match the planes".into(),
            ));
        }
        let mut planes = Vec::with_capacity(nplanes);
        for _ in 0..nplanes {
            let omega = r.f64()?;
            let quarter = r.f64()?;
            let first = r.u64()?;
            if first + 1 >= modal_dim {
                return Err(Error::Format("plane offset out of range".into()));
            }
            let mut targets = Vec::with_capacity(4);
            for _ in 0..4 {
                targets.push(
                    (0..modal_dim)
                        .map(|_| r.f64())
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            let mut windows = Vec::with_capacity(4);
            for _ in 0..4 {
                let start = r.u64()?;
                let gain = r.f64()?;
                let n = r.count(8)?;
                let samples = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                if start + n > period_steps {
                    return Err(Error::Format("window exceeds the period".into()));
                }
                windows.push(Window {
                    start,
                    samples,
                    gain,
                });
            }
            planes.push(PlaneLibrary {
                omega,
                quarter,
                first,
                targets: targets.try_into().expect("four targets"),
                windows: windows.try_into().expect("four windows"),
            });
        }
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after library".into()));
        }
        Ok(Self {
            length,
            nodes,
            dt,
            theta,
            period_steps,
            window_steps,
            modal_dim,
            planes,
            delta,
            lipschitz,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// CSV mirror: one row per step with `t` and every `u_i^j`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["t".to_string()];
        for (j, i, _) in self.windows() {
            header.push(format!("u{}_{}", i + 1, j + 1));
        }
        let to_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&header).map_err(to_err)?;
        for k in 0..self.period_steps {
            let mut row = vec![format!("{:.17e}", k as f64 * self.dt)];
            for (_, _, win) in self.windows() {
                let v = if win.contains(k) {
                    win.samples[k - win.start]
                } else {
                    0.0
                };
                row.push(format!("{v:.17e}"));
            }
            w.write_record(&row).map_err(to_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        inner.flush().map_err(|e| Error::io(path, e))
    }
}
