//! Versioned binary checkpoints.
//!
//! Layout: magic "ACTG", a u32 format version, the run manifest as
//! length-prefixed UTF-8 JSON, then each parameter tensor as
//! (u32 name length, name bytes, u32 rank, u64 dims..., little-endian f64
//! values). Tensors appear in the network's canonical parameter order, so
//! files produced from the same architecture are directly diffable.

use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use actgrad_core::network::Network;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"ACTG";
const VERSION: u32 = 1;

pub fn save(path: &Path, manifest: &RunManifest, net: &Network) -> Result<()> {
    let flat = net.flat_params();
    let manifest_json = manifest.to_json();
    let mut buf = Vec::with_capacity(manifest_json.len() + flat.len() * 8 + 1024);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(manifest_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(manifest_json.as_bytes());
    for entry in net.param_entries() {
        buf.extend_from_slice(&(entry.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(entry.name.as_bytes());
        buf.extend_from_slice(&(entry.shape.len() as u32).to_le_bytes());
        for &d in &entry.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &flat[entry.offset..entry.offset + entry.len] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Reads a checkpoint and rebuilds the network it describes. Every tensor in
/// the file must match a parameter of the manifest's architecture by name and
/// shape, and vice versa.
pub fn load(path: &Path) -> Result<(RunManifest, Network)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.corrupt(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.corrupt(format!("unsupported format version {version}")));
    }
    let manifest_len = r.u64()? as usize;
    let manifest_bytes = r.take(manifest_len)?;
    let manifest_text = std::str::from_utf8(manifest_bytes)
        .map_err(|e| CliError::Usage(format!("checkpoint {}: manifest: {e}", path.display())))?;
    let manifest = RunManifest::from_json(manifest_text)
        .map_err(|detail| CliError::Usage(format!("checkpoint {}: {detail}", path.display())))?;

    let mut net = Network::build(&manifest.model_config()?)?;
    let entries = net.param_entries();
    let mut flat = net.flat_params();
    for entry in &entries {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| CliError::Usage(format!("checkpoint {}: tensor name: {e}", path.display())))?
            .to_string();
        if name != entry.name {
            return Err(r.corrupt(format!(
                "tensor {name:?} where {:?} was expected",
                entry.name
            )));
        }
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u64()? as usize);
        }
        if dims != entry.shape {
            return Err(r.corrupt(format!(
                "tensor {name:?} has shape {dims:?}, expected {:?}",
                entry.shape
            )));
        }
        for slot in flat[entry.offset..entry.offset + entry.len].iter_mut() {
            let mut raw = [0u8; 8];
            raw.copy_from_slice(r.take(8)?);
            *slot = f64::from_le_bytes(raw);
        }
    }
    if r.pos != bytes.len() {
        return Err(r.corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    net.set_flat_params(&flat)?;
    Ok((manifest, net))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.corrupt(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(self.take(4)?);
        Ok(u32::from_le_bytes(raw))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(raw))
    }

    fn corrupt(&self, detail: String) -> CliError {
        CliError::Usage(format!("checkpoint {}: {detail}", self.path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{DataManifest, ModelManifest, OptimizerManifest};
    use actgrad_core::network::{ActivationKind, ArchSpec, Network};
    use tempfile::tempdir;

    fn tiny_manifest(activation: &str) -> RunManifest {
        RunManifest {
            model: ModelManifest {
                size: "small".into(),
                activation: activation.into(),
                fourier_rank: 5,
                per_channel: false,
            },
            optimizer: OptimizerManifest {
                algorithm: "rmsprop".into(),
                rho: 0.95,
                epsilon: 1e-8,
                batch_size: 64,
                epochs: 1,
                lr_schedule: "staged".into(),
                ae_epochs_per_layer: 0,
            },
            data: DataManifest {
                train_subset: None,
                val_subset: None,
            },
            seed: 11,
            git_describe: "test".into(),
            started_at: 0,
        }
    }

    #[test]
    fn round_trip_preserves_every_parameter() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let manifest = tiny_manifest("fourier");
        let net = Network::build(&manifest.model_config().unwrap()).unwrap();
        save(&path, &manifest, &net).unwrap();
        let (back_manifest, back_net) = load(&path).unwrap();
        assert_eq!(back_manifest, manifest);
        assert_eq!(back_net.flat_params(), net.flat_params());
    }

    #[test]
    fn magic_and_truncation_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let manifest = tiny_manifest("relu");
        let net = Network::build(&manifest.model_config().unwrap()).unwrap();
        save(&path, &manifest, &net).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load(&path), Err(CliError::Usage(_))));

        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn architecture_mismatch_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        // manifest says small/relu, tensors come from a tiny lc network
        let manifest = tiny_manifest("relu");
        let other = Network::build_custom(ArchSpec::tiny(), ActivationKind::Lc, 5, false, 3).unwrap();
        save(&path, &manifest, &other).unwrap();
        assert!(matches!(load(&path), Err(CliError::Usage(_))));
    }
}
