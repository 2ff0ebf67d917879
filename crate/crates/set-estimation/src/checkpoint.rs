//! Model checkpoints: one self-describing container for both estimator
//! families.
//!
//! A checkpoint stores the model kind, its full configuration as key=value
//! text in a fixed order, and every parameter tensor by name and shape.
//! Floats narrow to f32 on disk; loading widens them back, so a loaded
//! model predicts within f32 rounding of the original and a second save
//! reproduces the file byte for byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::{MlpConfig, MlpModel};
use crate::nn::Tensor;
use crate::set::{SetConfig, SetModel};
use crate::wire::{push_f32s, ByteReader};

pub const MAGIC: [u8; 4] = *b"SETM";
pub const VERSION: u32 = 1;
pub const KIND_SET: u8 = 0;
pub const KIND_MLP: u8 = 1;

#[derive(Clone, Debug)]
pub enum Checkpoint {
    Set(SetModel),
    Mlp(MlpModel),
}

const SET_KEYS: [&str; 8] =
    ["h", "n_blocks", "n_heads", "d_model", "dropout", "max_episode_len", "d_o", "d_p"];
const MLP_KEYS: [&str; 5] = ["h_mlp", "layers", "width", "d_o", "d_p"];

fn set_config_text(cfg: &SetConfig) -> String {
    format!(
        "h={}\nn_blocks={}\nn_heads={}\nd_model={}\ndropout={}\nmax_episode_len={}\nd_o={}\nd_p={}\n",
        cfg.h,
        cfg.n_blocks,
        cfg.n_heads,
        cfg.d_model,
        cfg.dropout,
        cfg.max_episode_len,
        cfg.d_o,
        cfg.d_p
    )
}

fn mlp_config_text(cfg: &MlpConfig) -> String {
    format!(
        "h_mlp={}\nlayers={}\nwidth={}\nd_o={}\nd_p={}\n",
        cfg.h_mlp, cfg.layers, cfg.width, cfg.d_o, cfg.d_p
    )
}

/// Splits a config block into values, insisting on the exact key sequence.
fn parse_kv<'a>(text: &'a str, expect: &[&str]) -> Result<Vec<&'a str>> {
    let mut vals = Vec::new();
    let mut lines = text.lines();
    for key in expect {
        let line = lines
            .next()
            .ok_or_else(|| Error::Config(format!("checkpoint config is missing key {key}")))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad config line {line:?}")))?;
        if k != *key {
            return Err(Error::Config(format!("expected config key {key}, found {k}")));
        }
        vals.push(v);
    }
    if let Some(extra) = lines.next() {
        return Err(Error::Config(format!("unexpected config line {extra:?}")));
    }
    Ok(vals)
}

fn usize_of(v: &str, key: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Config(format!("{key}={v} is not an integer")))
}

fn f64_of(v: &str, key: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("{key}={v} is not a number")))
}

fn parse_set_config(text: &str) -> Result<SetConfig> {
    let v = parse_kv(text, &SET_KEYS)?;
    Ok(SetConfig {
        h: usize_of(v[0], "h")?,
        n_blocks: usize_of(v[1], "n_blocks")?,
        n_heads: usize_of(v[2], "n_heads")?,
        d_model: usize_of(v[3], "d_model")?,
        dropout: f64_of(v[4], "dropout")?,
        max_episode_len: usize_of(v[5], "max_episode_len")?,
        d_o: usize_of(v[6], "d_o")?,
        d_p: usize_of(v[7], "d_p")?,
    })
}

fn parse_mlp_config(text: &str) -> Result<MlpConfig> {
    let v = parse_kv(text, &MLP_KEYS)?;
    Ok(MlpConfig {
        h_mlp: usize_of(v[0], "h_mlp")?,
        layers: usize_of(v[1], "layers")?,
        width: usize_of(v[2], "width")?,
        d_o: usize_of(v[3], "d_o")?,
        d_p: usize_of(v[4], "d_p")?,
    })
}

fn push_params(out: &mut Vec<u8>, names: &[String], params: &[Tensor]) {
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in names.iter().zip(params) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(p.shape().len() as u8);
        for d in p.shape() {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        push_f32s(out, p.data());
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (kind, text) = match ckpt {
        Checkpoint::Set(m) => (KIND_SET, set_config_text(m.cfg())),
        Checkpoint::Mlp(m) => (KIND_MLP, mlp_config_text(m.cfg())),
    };
    out.push(kind);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    match ckpt {
        Checkpoint::Set(m) => push_params(&mut out, m.names(), m.params()),
        Checkpoint::Mlp(m) => push_params(&mut out, m.names(), m.params()),
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_params(r: &mut ByteReader) -> Result<(Vec<String>, Vec<Tensor>)> {
    let count = r.u32()? as usize;
    let mut names = Vec::with_capacity(count);
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let data = r.f32s(len)?;
        names.push(name);
        params.push(Tensor::new(shape, data)?);
    }
    Ok((names, params))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:02x?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let kind = r.u8()?;
    let text_len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(text_len)?)
        .map_err(|_| Error::Format("config block is not UTF-8".into()))?
        .to_string();
    let (names, params) = read_params(&mut r)?;
    r.finish()?;
    match kind {
        KIND_SET => Ok(Checkpoint::Set(SetModel::from_parts(
            parse_set_config(&text)?,
            names,
            params,
        )?)),
        KIND_MLP => Ok(Checkpoint::Mlp(MlpModel::from_parts(
            parse_mlp_config(&text)?,
            names,
            params,
        )?)),
        other => Err(Error::Kind(format!("unknown model kind byte {other}"))),
    }
}

/// Loads a checkpoint that must hold the transformer.
pub fn read_set_checkpoint(path: &Path) -> Result<SetModel> {
    match read_checkpoint(path)? {
        Checkpoint::Set(m) => Ok(m),
        Checkpoint::Mlp(_) => {
            Err(Error::Kind("checkpoint holds the baseline, expected the transformer".into()))
        }
    }
}

/// Loads a checkpoint that must hold the baseline.
pub fn read_mlp_checkpoint(path: &Path) -> Result<MlpModel> {
    match read_checkpoint(path)? {
        Checkpoint::Mlp(m) => Ok(m),
        Checkpoint::Set(_) => {
            Err(Error::Kind("checkpoint holds the transformer, expected the baseline".into()))
        }
    }
}
