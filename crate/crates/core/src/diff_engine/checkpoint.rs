//! Parameter checkpoints: one JSON header line (layout descriptor plus caller
//! metadata) followed by the parameters as little-endian `f64`.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::mlp::{ParamLayout, ParamVector};
use crate::error::{IslError, Result};

#[derive(Serialize, Deserialize)]
struct Header<M> {
    layout: ParamLayout,
    meta: M,
}

pub fn write_params<W: Write, M: Serialize>(mut w: W, params: &ParamVector, meta: &M) -> Result<()> {
    let header = Header {
        layout: params.layout.clone(),
        meta,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_params<R: BufRead, M: DeserializeOwned>(mut r: R) -> Result<(ParamVector, M)> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(IslError::Checkpoint("missing header line".into()));
    }
    let header: Header<M> = serde_json::from_slice(&line)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.layout.len * 8 {
        return Err(IslError::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            header.layout.len * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((ParamVector::new(header.layout, values)?, header.meta))
}
