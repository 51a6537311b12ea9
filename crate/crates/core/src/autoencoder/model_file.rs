//! Binary model file.
//!
//! ```text
//! "EXMO"            magic
//! u16               format version
//! u32 u32 u32 u64   base_channels, input_frames, input_size, seed
//! u64 u64           epochs_seen, steps
//! u32 + f32*n       loss history
//! u32               layer count
//! per layer:        u32 out, u32 in, u32 kh, u32 kw, f32 weights…, f32 bias…
//! u32               CRC32 of every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::network::{Model, NetworkConfig, TrainingMeta};
use crate::error::{Error, Result};
use crate::ops::FilterBank;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EXMO";
pub const FORMAT_VERSION: u16 = 1;

pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 4 * model.num_params());
    let cfg = model.config();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cfg.base_channels as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.input_frames as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.input_size as u32).to_le_bytes());
    buf.extend_from_slice(&cfg.seed.to_le_bytes());
    buf.extend_from_slice(&model.meta.epochs_seen.to_le_bytes());
    buf.extend_from_slice(&model.meta.steps.to_le_bytes());
    buf.extend_from_slice(&(model.meta.loss_history.len() as u32).to_le_bytes());
    for v in &model.meta.loss_history {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(model.layers().count() as u32).to_le_bytes());
    for fb in model.layers() {
        for d in fb.weights.shape() {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in fb.weights.data().iter().chain(fb.bias.data()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("file truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.err("length overflow"))?, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message: message.into(),
        }
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic, not an EXMO model file".into(),
        });
    }
    let version = r.u16("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < r.pos + 4 {
        return Err(r.err("file truncated before checksum"));
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    // Parse the body first so truncation reports the offset where data ran out.
    let mut r = Reader { buf: &bytes[..body_len], pos: r.pos };

    let config = NetworkConfig {
        base_channels: r.u32("base_channels")? as usize,
        input_frames: r.u32("input_frames")? as usize,
        input_size: r.u32("input_size")? as usize,
        seed: r.u64("seed")?,
    };
    let cfg_end = r.pos;
    config.validate().map_err(|e| Error::Format {
        offset: cfg_end as u64,
        message: format!("invalid network config: {e}"),
    })?;
    let epochs_seen = r.u64("epochs_seen")?;
    let steps = r.u64("steps")?;
    let n_hist = r.u32("loss history length")? as usize;
    let loss_history = r.f32s(n_hist, "loss history")?;

    let expect = config.layer_channels();
    let n_layers = r.u32("layer count")? as usize;
    if n_layers != expect.len() {
        return Err(r.err(format!("expected {} layers, header says {n_layers}", expect.len())));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (i, &(cin, cout)) in expect.iter().enumerate() {
        let at = r.pos;
        let shape = [
            r.u32("layer shape")? as usize,
            r.u32("layer shape")? as usize,
            r.u32("layer shape")? as usize,
            r.u32("layer shape")? as usize,
        ];
        if shape != [cout, cin, 3, 3] {
            return Err(Error::Format {
                offset: at as u64,
                message: format!("layer {i} shape {shape:?}, expected {:?}", [cout, cin, 3, 3]),
            });
        }
        let w = r.f32s(cout * cin * 9, "layer weights")?;
        let b = r.f32s(cout, "layer bias")?;
        layers.push(FilterBank::from_tensors(
            Tensor::from_vec(&shape, w)?,
            Tensor::from_vec(&[cout], b)?,
        )?);
    }
    if r.pos != body_len {
        return Err(r.err(format!("{} unexpected trailing bytes", body_len - r.pos)));
    }
    let actual = crc32fast::hash(&bytes[..body_len]);
    if actual != stored {
        return Err(Error::Format {
            offset: body_len as u64,
            message: format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}"),
        });
    }
    let meta = TrainingMeta {
        epochs_seen,
        steps,
        loss_history,
    };
    Model::from_layers(config, layers, meta)
}

/// Writes the model atomically: a temporary sibling file is renamed into place.
pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, encode_model(model))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    decode_model(&fs::read(path)?)
}
