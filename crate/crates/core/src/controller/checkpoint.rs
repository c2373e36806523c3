//! Checkpoint container: bit-exact parameter round trips.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SPDRCKPT"
//! version  u32      (= 1)
//! count    u32      number of tensors
//! per tensor:
//!   name_len u16, name bytes (UTF-8)
//!   rank     u8   (= 2)
//!   dims     rank x u64
//!   data     rows*cols x f64 (row-major)
//! ```
//!
//! The configuration is stored as a sibling JSON document at
//! `<path>.json` and validated against the tensor shapes on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::ControllerConfig;
use super::params::{ControllerParams, ParamsError};
use super::train::Controller;
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 8] = b"SPDRCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("truncated checkpoint file")]
    Truncated,
    #[error("tensor name is not UTF-8")]
    BadName,
    #[error("unsupported tensor rank {rank}")]
    BadRank { rank: u8 },
    #[error("config sidecar {path}: {source}")]
    Config {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("checkpoint config disagrees with the expected config: {what}")]
    ConfigMismatch { what: String },
}

/// Path of the JSON config document stored next to a checkpoint.
pub fn config_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

fn write_tensor(out: &mut impl Write, name: &str, t: &Tensor) -> io::Result<()> {
    let name_bytes = name.as_bytes();
    out.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
    out.write_all(name_bytes)?;
    out.write_all(&[2u8])?;
    out.write_all(&(t.rows() as u64).to_le_bytes())?;
    out.write_all(&(t.cols() as u64).to_le_bytes())?;
    for v in t.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Serialize every parameter tensor plus the config sidecar.
pub fn save_checkpoint(path: &Path, controller: &Controller) -> Result<(), CheckpointError> {
    let named = controller.params.named();
    let mut buf = Vec::new();
    buf.write_all(MAGIC)?;
    buf.write_all(&VERSION.to_le_bytes())?;
    buf.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, tensor) in &named {
        write_tensor(&mut buf, name, tensor)?;
    }
    fs::write(path, buf)?;
    let sidecar = config_sidecar(path);
    let config_json = serde_json::to_string_pretty(&controller.config).expect("config to json");
    fs::write(sidecar, config_json + "\n")?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Load a checkpoint and its config sidecar.
pub fn load_checkpoint(path: &Path) -> Result<Controller, CheckpointError> {
    let sidecar = config_sidecar(path);
    let mut config_text = String::new();
    fs::File::open(&sidecar)?.read_to_string(&mut config_text)?;
    let config: ControllerConfig =
        serde_json::from_str(&config_text).map_err(|source| CheckpointError::Config {
            path: sidecar.display().to_string(),
            source,
        })?;

    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let count = r.u32()? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::BadName)?
            .to_string();
        let rank = r.take(1)?[0];
        if rank != 2 {
            return Err(CheckpointError::BadRank { rank });
        }
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
        }
        let tensor = Tensor::new(rows, cols, data).map_err(|_| CheckpointError::Truncated)?;
        tensors.insert(name, tensor);
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Truncated);
    }
    let params = ControllerParams::from_named(&config, tensors)?;
    Ok(Controller { config, params })
}

/// Load and require agreement with an externally supplied config.
pub fn load_checkpoint_expecting(
    path: &Path,
    expected: &ControllerConfig,
) -> Result<Controller, CheckpointError> {
    let controller = load_checkpoint(path)?;
    if controller.config != *expected {
        let what = if controller.config.d != expected.d {
            format!("D {} vs {}", controller.config.d, expected.d)
        } else if controller.config.d_c != expected.d_c {
            format!("D_c {} vs {}", controller.config.d_c, expected.d_c)
        } else if controller.config.k != expected.k {
            format!("K {} vs {}", controller.config.k, expected.k)
        } else {
            "hyperparameters differ".to_string()
        };
        return Err(CheckpointError::ConfigMismatch { what });
    }
    Ok(controller)
}
