//! Model checkpoints: a binary tensor container plus a key=value sidecar.
//!
//! Container layout: magic `SBNT`, format version (u32 LE), then for each
//! tensor a name length (u32 LE), the UTF-8 name, the rank (u32 LE), the
//! dims (u32 LE each), and the data as little-endian f32. Tensors follow in
//! parameter order until end of file.
//!
//! The sidecar `<file>.meta` records the variant, the normalization ranges,
//! and the configuration fingerprint, so a checkpoint is self-contained.

use super::{EncoderConfig, Normalization, TrainedModel, Variant};
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SBNT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

/// Write the parameter container and its sidecar.
pub fn write_checkpoint(path: &Path, model: &TrainedModel, fingerprint: u64) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    w.write_all(&CHECKPOINT_MAGIC).map_err(io_err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    for p in model.params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(name).map_err(io_err)?;
        let shape = p.tensor.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io_err)?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
        for &v in p.tensor.data() {
            w.write_all(&(v as f32).to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;

    let meta = sidecar_path(path);
    let mut out = String::new();
    out.push_str(&format!("variant={}\n", model.variant));
    out.push_str(&format!("fingerprint={fingerprint:016x}\n"));
    out.push_str(&format!("norm.mass_min={:?}\n", model.norm.mass_g.0));
    out.push_str(&format!("norm.mass_max={:?}\n", model.norm.mass_g.1));
    out.push_str(&format!("norm.com_min={:?}\n", model.norm.com_mm.0));
    out.push_str(&format!("norm.com_max={:?}\n", model.norm.com_mm.1));
    out.push_str(&format!("norm.moi_min={:?}\n", model.norm.moi_gm2.0));
    out.push_str(&format!("norm.moi_max={:?}\n", model.norm.moi_gm2.1));
    std::fs::write(&meta, out).map_err(|e| Error::io(&meta, e))
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn parse_meta_field(map: &std::collections::HashMap<String, String>, key: &str, path: &Path) -> Result<f64> {
    map.get(key)
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::format(path, format!("missing or invalid sidecar field {key}")))
}

/// Load a checkpoint and its sidecar. Returns the model and the fingerprint
/// recorded at save time.
pub fn read_checkpoint(path: &Path) -> Result<(TrainedModel, u64)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let fmt_err = |reason: &str| Error::format(path, reason);

    let magic: [u8; 4] = read_exact(&mut r).map_err(|_| fmt_err("truncated header"))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(fmt_err("bad magic"));
    }
    let version = u32::from_le_bytes(read_exact(&mut r).map_err(|_| fmt_err("truncated header"))?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }

    let mut params = ParamSet::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read(&mut len_buf).map_err(|e| Error::io(path, e))? {
            0 => break,
            4 => {}
            _ => return Err(fmt_err("truncated tensor header")),
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| fmt_err("truncated tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| fmt_err("tensor name is not utf-8"))?;
        let rank = u32::from_le_bytes(read_exact(&mut r).map_err(|_| fmt_err("truncated rank"))?) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(
                u32::from_le_bytes(read_exact(&mut r).map_err(|_| fmt_err("truncated dims"))?)
                    as usize,
            );
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let b: [u8; 4] = read_exact(&mut r).map_err(|_| fmt_err("truncated tensor data"))?;
            data.push(f64::from(f32::from_le_bytes(b)));
        }
        params.add(&name, Tensor::new(shape, data)?);
    }

    let meta_path = sidecar_path(path);
    let meta = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let map: std::collections::HashMap<String, String> = meta
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    let variant = Variant::parse(
        map.get("variant")
            .ok_or_else(|| Error::format(&meta_path, "missing variant"))?,
    )?;
    let fingerprint = map
        .get("fingerprint")
        .and_then(|v| u64::from_str_radix(v, 16).ok())
        .unwrap_or(0);
    let norm = Normalization {
        mass_g: (
            parse_meta_field(&map, "norm.mass_min", &meta_path)?,
            parse_meta_field(&map, "norm.mass_max", &meta_path)?,
        ),
        com_mm: (
            parse_meta_field(&map, "norm.com_min", &meta_path)?,
            parse_meta_field(&map, "norm.com_max", &meta_path)?,
        ),
        moi_gm2: (
            parse_meta_field(&map, "norm.moi_min", &meta_path)?,
            parse_meta_field(&map, "norm.moi_max", &meta_path)?,
        ),
    };

    Ok((
        TrainedModel {
            variant,
            enc: EncoderConfig::default(),
            norm,
            params,
        },
        fingerprint,
    ))
}
