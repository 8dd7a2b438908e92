//! Ensemble files: a JSON header plus a sidecar of raw little-endian `f64`
//! values, interleaved `(re, im)`, row-major.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MeasurementEnsemble, ModelKind};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub model: ModelKind,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub patterns_count: usize,
    pub seed: u64,
    pub b_re: f64,
    pub b_im: f64,
}

/// Sidecar location for a header path: same stem, `.bin` extension.
pub fn sidecar_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

/// Writes `header` (JSON) and its sidecar. Only constant-offset ensembles
/// fit the header format.
pub fn write_ensemble(ensemble: &MeasurementEnsemble, header: &Path) -> Result<()> {
    let b = ensemble.constant_offset().ok_or_else(|| {
        Error::invalid("ensemble files store a single offset b; offsets are not constant")
    })?;
    let head = EnsembleHeader {
        model: ensemble.model(),
        n: ensemble.n(),
        m: ensemble.m(),
        patterns_count: ensemble.patterns_count(),
        seed: ensemble.seed(),
        b_re: b.re,
        b_im: b.im,
    };
    let json = serde_json::to_string_pretty(&head).map_err(|source| Error::Json {
        path: header.to_path_buf(),
        source,
    })?;
    fs::write(header, json).map_err(|e| Error::io(header, e))?;

    let mut bytes = Vec::with_capacity(ensemble.rows().len() * 16);
    for a in ensemble.rows() {
        bytes.extend_from_slice(&a.re.to_le_bytes());
        bytes.extend_from_slice(&a.im.to_le_bytes());
    }
    let side = sidecar_path(header);
    fs::write(&side, bytes).map_err(|e| Error::io(&side, e))
}

/// Reads an ensemble written by [`write_ensemble`]. The result carries dense
/// rows only; CDP ensembles come back without the FFT path.
pub fn read_ensemble(header: &Path) -> Result<MeasurementEnsemble> {
    let text = fs::read_to_string(header).map_err(|e| Error::io(header, e))?;
    let head: EnsembleHeader = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: header.to_path_buf(),
        source,
    })?;
    let side = sidecar_path(header);
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let expected = head.m * head.n * 16;
    if bytes.len() != expected {
        return Err(Error::invalid(format!(
            "{} holds {} bytes, header implies {expected}",
            side.display(),
            bytes.len()
        )));
    }
    let rows = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8-byte chunk"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8-byte chunk"));
            C64::new(re, im)
        })
        .collect();
    Ok(
        MeasurementEnsemble::from_rows(head.model, head.n, rows, head.patterns_count, head.seed)?
            .with_offset(C64::new(head.b_re, head.b_im)),
    )
}
