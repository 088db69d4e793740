//! Versioned binary path-dump format for replaying paths in tests.
//!
//! Layout (all little-endian):
//!   magic  b"FKPD"
//!   version u32 (currently 1)
//!   model id: u16 length + utf-8 bytes
//!   dim u32, dt f64, seed u64, path_index u64
//!   n_states u64, then per state:
//!     t f64, ltime f64, dl f64, x[dim] f64, frame[dim*dim] f64
//!     (column-major), touch flag u8, touch[dim] f64 when the flag is 1.
//!
//! The decoder never trusts length fields: every read is bounds-checked and
//! allocation is capped by the actual remaining input size.

use crate::development::{PathSample, PathState};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub const MAGIC: &[u8; 4] = b"FKPD";
pub const VERSION: u32 = 1;

pub fn write_path(path: &PathSample) -> Vec<u8> {
    let n = path.dim;
    let mut out = Vec::with_capacity(64 + path.states.len() * (8 * (3 + n + n * n) + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let id = path.model_id.as_bytes();
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&path.dt.to_le_bytes());
    out.extend_from_slice(&path.seed.to_le_bytes());
    out.extend_from_slice(&path.path_index.to_le_bytes());
    out.extend_from_slice(&(path.states.len() as u64).to_le_bytes());
    for st in &path.states {
        out.extend_from_slice(&st.t.to_le_bytes());
        out.extend_from_slice(&st.ltime.to_le_bytes());
        out.extend_from_slice(&st.dl.to_le_bytes());
        for v in st.x.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in st.frame.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &st.touch {
            Some(p) => {
                out.push(1);
                for v in p.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => out.push(0),
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.buf.len() {
            return Err(Error::Input(format!(
                "truncated path dump at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn read_path(buf: &[u8]) -> Result<PathSample> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Input("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Input(format!("unsupported version {version}")));
    }
    let id_len = r.u16()? as usize;
    if id_len > 256 {
        return Err(Error::Input("model id too long".into()));
    }
    let id_bytes = r.take(id_len)?;
    let model_id = std::str::from_utf8(id_bytes)
        .map_err(|_| Error::Input("model id is not utf-8".into()))?
        .to_string();
    let dim = r.u32()? as usize;
    if !(2..=6).contains(&dim) {
        return Err(Error::Input(format!("dimension {dim} outside 2..=6")));
    }
    let dt = r.f64()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input("nonpositive dt".into()));
    }
    let seed = r.u64()?;
    let path_index = r.u64()?;
    let n_states = r.u64()? as usize;
    let min_state_size = 8 * (3 + dim + dim * dim) + 1;
    if n_states
        .checked_mul(min_state_size)
        .map(|need| need > r.remaining())
        .unwrap_or(true)
    {
        return Err(Error::Input(format!(
            "state count {n_states} exceeds the input size"
        )));
    }
    let mut states = Vec::with_capacity(n_states);
    let mut prev_t = f64::NEG_INFINITY;
    let mut prev_l = 0.0;
    for k in 0..n_states {
        let t = r.f64()?;
        let ltime = r.f64()?;
        let dl = r.f64()?;
        if !t.is_finite() || !ltime.is_finite() || !dl.is_finite() {
            return Err(Error::Input(format!("non-finite state {k}")));
        }
        if t <= prev_t && k > 0 {
            return Err(Error::Input(format!("non-increasing time at state {k}")));
        }
        if ltime + 1e-12 < prev_l {
            return Err(Error::Input(format!("decreasing local time at state {k}")));
        }
        prev_t = t;
        prev_l = ltime;
        let mut x = DVector::zeros(dim);
        for i in 0..dim {
            x[i] = r.f64()?;
        }
        let mut frame = DMatrix::zeros(dim, dim);
        for v in frame.iter_mut() {
            *v = r.f64()?;
        }
        let touch = match r.u8()? {
            0 => None,
            1 => {
                let mut p = DVector::zeros(dim);
                for i in 0..dim {
                    p[i] = r.f64()?;
                }
                Some(p)
            }
            f => return Err(Error::Input(format!("bad touch flag {f}"))),
        };
        states.push(PathState {
            x,
            frame,
            ltime,
            t,
            dl,
            touch,
        });
    }
    if r.remaining() != 0 {
        return Err(Error::Input(format!(
            "{} trailing bytes after the last state",
            r.remaining()
        )));
    }
    Ok(PathSample {
        states,
        dt,
        seed,
        path_index,
        model_id,
        dim,
    })
}
