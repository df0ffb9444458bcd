//! Single-file checkpoint.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! "WUNC" | version: u16 | json_len: u32 | json metadata
//! repeated until EOF:
//!   name_len: u32 | name (UTF-8) | rank: u8 | dims: u32 × rank | values: f32 × Π dims
//! ```
//!
//! Optimizer moments follow the parameters as ordinary records named
//! `adam.m.<param>` and `adam.v.<param>`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ParamArray, ParameterSet};
use crate::error::{Error, Result};
use crate::training::TrainProgress;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WUNC";
pub const CHECKPOINT_VERSION: u16 = 1;

const M_PREFIX: &str = "adam.m.";
const V_PREFIX: &str = "adam.v.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub sample_rate: u32,
    pub source_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainProgress>,
}

/// Metadata blob as stored; the Adam step lives next to the moments it
/// belongs to in memory.
#[derive(Serialize, Deserialize)]
struct OnDisk {
    #[serde(flatten)]
    meta: CheckpointMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam_step: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments {
    pub step: u64,
    pub m: ParameterSet<f32>,
    pub v: ParameterSet<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParameterSet<f32>,
    pub optimizer: Option<AdamMoments>,
}

fn write_record(out: &mut Vec<u8>, name: &str, array: &ParamArray<f32>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(array.dims.len() as u8);
    for &d in &array.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &array.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated {what} at byte {} (need {n}, have {})",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&OnDisk {
            meta: self.meta.clone(),
            adam_step: self.optimizer.as_ref().map(|o| o.step),
        })?;
        let mut out = Vec::with_capacity(16 + json.len() + self.params.count() * 4);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (name, array) in self.params.iter() {
            write_record(&mut out, name, array);
        }
        if let Some(opt) = &self.optimizer {
            for (name, array) in opt.m.iter() {
                write_record(&mut out, &format!("{M_PREFIX}{name}"), array);
            }
            for (name, array) in opt.v.iter() {
                write_record(&mut out, &format!("{V_PREFIX}{name}"), array);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic, not a WUNC checkpoint".into()));
        }
        let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let json_len = r.u32("metadata length")? as usize;
        let OnDisk { meta, adam_step } = serde_json::from_slice(r.take(json_len, "metadata")?)?;

        let mut params = ParameterSet::new();
        let mut m = ParameterSet::new();
        let mut v = ParameterSet::new();
        while !r.done() {
            let name_len = r.u32("record name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "record name")?)
                .map_err(|e| Error::Checkpoint(format!("record name is not UTF-8: {e}")))?
                .to_string();
            let rank = r.take(1, "rank")?[0] as usize;
            let dims = (0..rank)
                .map(|_| r.u32("dims").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let raw = r.take(n * 4, &format!("values of {name}"))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let array = ParamArray { dims, data };
            if let Some(rest) = name.strip_prefix(M_PREFIX) {
                m.insert(rest, array);
            } else if let Some(rest) = name.strip_prefix(V_PREFIX) {
                v.insert(rest, array);
            } else {
                params.insert(name, array);
            }
        }

        meta.model.validate()?;
        if !super::params::layout_matches(&meta.model, &params) {
            return Err(Error::Checkpoint(
                "parameter names or shapes do not match the stored model config".into(),
            ));
        }
        let optimizer = match (m.is_empty(), v.is_empty()) {
            (true, true) => None,
            _ if params.same_layout(&m) && params.same_layout(&v) => Some(AdamMoments {
                step: adam_step.unwrap_or(0),
                m,
                v,
            }),
            _ => {
                return Err(Error::Checkpoint(
                    "optimizer moments do not mirror the parameters".into(),
                ))
            }
        };
        Ok(Checkpoint {
            meta,
            params,
            optimizer,
        })
    }

    /// Writes to a temporary sibling and renames it into place, so an
    /// interrupted save never leaves a truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        f.write_all(&bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming {}", tmp.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}
