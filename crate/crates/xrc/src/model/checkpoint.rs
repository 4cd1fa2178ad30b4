//! Checkpoint files: binary weights plus a sidecar text file describing
//! the run (spec name, resolution, epoch, fold, config digest).

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Result, XrcError};

use super::model::{build_model, Model};
use super::spec::ArchitectureSpec;

const MAGIC: &[u8; 4] = b"XRCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub spec: ArchitectureSpec,
    pub epoch: usize,
    pub fold_id: usize,
    pub config_digest: String,
}

pub fn save_checkpoint(path: &Path, model: &Model, meta: &CheckpointMeta) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(VERSION).unwrap();

    let spec_json = serde_json::to_vec(&meta.spec)?;
    out.write_u32::<LittleEndian>(spec_json.len() as u32).unwrap();
    out.extend_from_slice(&spec_json);
    out.write_u64::<LittleEndian>(meta.epoch as u64).unwrap();
    out.write_u64::<LittleEndian>(meta.fold_id as u64).unwrap();
    out.write_u32::<LittleEndian>(meta.config_digest.len() as u32).unwrap();
    out.extend_from_slice(meta.config_digest.as_bytes());

    let params = model.param_slices();
    out.write_u32::<LittleEndian>(params.len() as u32).unwrap();
    for p in params {
        out.write_u32::<LittleEndian>(p.len() as u32).unwrap();
        for v in p {
            out.write_f32::<LittleEndian>(*v).unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| XrcError::io(path, e))?;

    let sidecar = path.with_extension("meta.txt");
    let text = format!(
        "network={}\nresolution={}x{}\nepoch={}\nfold={}\nconfig_digest={}\n",
        meta.spec.name,
        meta.spec.input_resolution.0,
        meta.spec.input_resolution.1,
        meta.epoch,
        meta.fold_id,
        meta.config_digest
    );
    std::fs::write(&sidecar, text).map_err(|e| XrcError::io(sidecar, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta)> {
    let bytes = std::fs::read(path).map_err(|e| XrcError::io(path, e))?;
    let mut cur = std::io::Cursor::new(bytes.as_slice());
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)
        .map_err(|e| XrcError::io(path, e))?;
    if &magic != MAGIC {
        return Err(XrcError::Model(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let bad = |_| XrcError::Model(format!("{}: truncated checkpoint", path.display()));
    let version = cur.read_u32::<LittleEndian>().map_err(bad)?;
    if version != VERSION {
        return Err(XrcError::Model(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let spec_len = cur.read_u32::<LittleEndian>().map_err(bad)? as usize;
    let start = cur.position() as usize;
    let spec: ArchitectureSpec = serde_json::from_slice(&bytes[start..start + spec_len])?;
    cur.set_position((start + spec_len) as u64);
    let epoch = cur.read_u64::<LittleEndian>().map_err(bad)? as usize;
    let fold_id = cur.read_u64::<LittleEndian>().map_err(bad)? as usize;
    let digest_len = cur.read_u32::<LittleEndian>().map_err(bad)? as usize;
    let start = cur.position() as usize;
    let config_digest = String::from_utf8_lossy(&bytes[start..start + digest_len]).to_string();
    cur.set_position((start + digest_len) as u64);

    let n_tensors = cur.read_u32::<LittleEndian>().map_err(bad)? as usize;
    let mut buffers = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let len = cur.read_u32::<LittleEndian>().map_err(bad)? as usize;
        let mut buf = Vec::with_capacity(len);
        for _ in 0..len {
            buf.push(cur.read_f32::<LittleEndian>().map_err(bad)?);
        }
        buffers.push(buf);
    }

    let mut model = build_model(&spec, 0)?;
    model.load_param_slices(&buffers)?;
    Ok((
        model,
        CheckpointMeta {
            spec,
            epoch,
            fold_id,
            config_digest,
        },
    ))
}
