//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "WXGENCKP"
//! version  u32
//! length   u64      payload bytes
//! payload:
//!   l, m, T, t0     u64 each
//!   epsilon         f64
//!   n_channels      u64, then that many u64
//!   mean[4], std[4] f64
//!   fitted range    i32 days from CE, start then end
//!   zero_floor      f64
//!   n_params        u64, then that many f64 in flattening order
//! checksum u64      FNV-1a over everything before it
//! ```

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use super::{plan_architecture, ArchitectureSpec, ChannelLadder, ModelError, WeatherNet};
use crate::data::StandardizationStats;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WXGENCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 8;
// Bound on filter length and channel counts accepted from a file.
const MAX_DIM: usize = 1 << 16;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ModelError::Corrupt(format!("payload ends early at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize, ModelError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| ModelError::Corrupt(format!("count {v} too large")))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn i32(&mut self) -> Result<i32, ModelError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn date(&mut self) -> Result<NaiveDate, ModelError> {
        let d = self.i32()?;
        NaiveDate::from_num_days_from_ce_opt(d).ok_or_else(|| ModelError::Corrupt(format!("bad date {d}")))
    }
}

impl WeatherNet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = self.spec();
        let mut payload = Vec::new();
        let put_u64 = |p: &mut Vec<u8>, v: u64| p.extend_from_slice(&v.to_le_bytes());
        for v in [
            spec.plan.base_filter,
            spec.plan.dilated_layers,
            spec.plan.window_len,
            spec.plan.t0,
        ] {
            put_u64(&mut payload, v as u64);
        }
        payload.extend_from_slice(&spec.epsilon.to_le_bytes());
        let flat = spec.channels.flat();
        put_u64(&mut payload, flat.len() as u64);
        for c in flat {
            put_u64(&mut payload, c as u64);
        }
        let stats = self.stats();
        for v in stats.mean.iter().chain(&stats.std) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        payload.extend_from_slice(&stats.fitted_start.num_days_from_ce().to_le_bytes());
        payload.extend_from_slice(&stats.fitted_end.num_days_from_ce().to_le_bytes());
        payload.extend_from_slice(&self.zero_floor().to_le_bytes());
        let params = self.params().flatten();
        put_u64(&mut payload, params.len() as u64);
        for v in params {
            payload.extend_from_slice(&v.to_le_bytes());
        }

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < HEADER_LEN {
            return Err(ModelError::Truncated {
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(ModelError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::UnsupportedVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let payload_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let needed = usize::try_from(payload_len)
            .ok()
            .and_then(|p| p.checked_add(HEADER_LEN + 8))
            .unwrap_or(usize::MAX);
        if bytes.len() < needed {
            return Err(ModelError::Truncated {
                needed,
                available: bytes.len(),
            });
        }
        if bytes.len() > needed {
            return Err(ModelError::Corrupt(format!("{} trailing bytes", bytes.len() - needed)));
        }
        let body = &bytes[..needed - 8];
        let stored = u64::from_le_bytes(bytes[needed - 8..].try_into().expect("8 bytes"));
        let computed = fnv1a(body);
        if stored != computed {
            return Err(ModelError::ChecksumMismatch { stored, computed });
        }

        let mut r = Reader {
            buf: &body[HEADER_LEN..],
            pos: 0,
        };
        let l = r.usize()?;
        let m = r.usize()?;
        let window_len = r.usize()?;
        let t0 = r.usize()?;
        let epsilon = r.f64()?;
        let n_channels = r.usize()?;
        if n_channels > r.buf.len() / 8 {
            return Err(ModelError::Corrupt(format!("{n_channels} channel entries")));
        }
        let flat = (0..n_channels).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
        if l > MAX_DIM || flat.iter().any(|&c| c > MAX_DIM) {
            return Err(ModelError::Corrupt("layer dimension out of range".into()));
        }

        if t0 >= window_len {
            return Err(ModelError::Corrupt(format!("t0 {t0} not below T {window_len}")));
        }
        let plan = plan_architecture(window_len - t0, l, m, t0..=t0)?;
        if plan.window_len != window_len {
            return Err(ModelError::Corrupt(format!(
                "stored T {window_len} disagrees with l={l}, m={m}"
            )));
        }
        let spec = ArchitectureSpec::new(plan, ChannelLadder::from_flat(&flat, m)?, epsilon)?;

        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for v in mean.iter_mut().chain(std.iter_mut()) {
            *v = r.f64()?;
        }
        if std.iter().any(|s| !(*s > 0.0 && s.is_finite())) || mean.iter().any(|m| !m.is_finite()) {
            return Err(ModelError::Corrupt("invalid standardization statistics".into()));
        }
        let fitted_start = r.date()?;
        let fitted_end = r.date()?;
        let zero_floor = r.f64()?;
        if !(zero_floor > 0.0 && zero_floor.is_finite()) {
            return Err(ModelError::Corrupt(format!("zero floor {zero_floor}")));
        }
        let n_params = r.usize()?;
        let expected = super::param_count(&spec);
        if n_params != expected {
            return Err(ModelError::Corrupt(format!(
                "{n_params} parameters stored, architecture has {expected}"
            )));
        }
        let params = (0..n_params).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        if r.pos != r.buf.len() {
            return Err(ModelError::Corrupt("payload length disagrees with contents".into()));
        }
        let stats = StandardizationStats {
            mean,
            std,
            fitted_start,
            fitted_end,
        };
        Self::from_parts(spec, &params, stats, zero_floor)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Short identifier of the saved form (its checksum), recorded in
    /// ensemble provenance.
    pub fn checkpoint_id(&self) -> String {
        let bytes = self.to_bytes();
        format!(
            "{:016x}",
            u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"))
        )
    }
}
