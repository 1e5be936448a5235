//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! | offset      | size | content                                        |
//! |-------------|------|------------------------------------------------|
//! | 0           | 8    | magic `JKMCKPT1`                               |
//! | 8           | 4    | format version (`u32`, currently 1)            |
//! | 12          | 8    | header length `H` (`u64`)                      |
//! | 20          | H    | UTF-8 JSON header (see [`Header`])             |
//! | 20 + H      | …    | parameter values as `f64`, in header order     |
//!
//! Each parameter contributes `product(shape)` values in row-major order.
//! Nothing follows the last parameter.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{JokeMeter, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"JKMCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model_config: ModelConfig,
    config_hash: String,
    vocab_hash: String,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: JokeMeter,
    pub vocab_hash: String,
}

impl Checkpoint {
    pub fn new(model: JokeMeter, vocab_hash: impl Into<String>) -> Self {
        Checkpoint {
            model,
            vocab_hash: vocab_hash.into(),
        }
    }

    pub fn config_hash(&self) -> String {
        self.model.config().config_hash()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let params = self.model.params();
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            model_config: self.model.config().clone(),
            config_hash: self.config_hash(),
            vocab_hash: self.vocab_hash.clone(),
            params: params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    trainable: p.trainable,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        let mut buf = Vec::with_capacity(1 << 16);
        for p in params.iter() {
            for v in p.tensor.data() {
                buf.extend_from_slice(&v.to_le_bytes());
                if buf.len() >= 1 << 16 {
                    w.write_all(&buf).map_err(io)?;
                    buf.clear();
                }
            }
        }
        w.write_all(&buf).map_err(io)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(|_| bad("truncated version"))?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.config_hash != header.model_config.config_hash() {
            return Err(bad("config hash does not match the stored config"));
        }

        let mut store = ParamStore::new();
        let mut raw = [0u8; 8];
        for e in &header.params {
            let n: usize = e.shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut raw).map_err(|_| bad("truncated parameter data"))?;
                data.push(f64::from_le_bytes(raw));
            }
            let id = store.add(e.name.clone(), Tensor::new(e.shape.clone(), data)?);
            store.get_mut(id).trainable = e.trainable;
        }
        if r.read(&mut raw).map_err(|e| Error::io("<checkpoint>", e))? != 0 {
            return Err(bad("trailing bytes after parameter data"));
        }
        Ok(Checkpoint {
            model: JokeMeter::from_params(header.model_config, store)?,
            vocab_hash: header.vocab_hash,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(std::io::BufReader::new(file))
    }
}
