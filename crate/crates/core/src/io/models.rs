//! Fitted-model container: 8-byte magic, `u32` version, `u64` payload
//! length, then a JSON payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::methods::Models;
use crate::types::Task;

pub const MODELS_MAGIC: [u8; 8] = *b"ABSTMODL";
const HEADER: usize = 8 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub task: Task,
    /// Names of the methods the models were fit for.
    pub methods: Vec<String>,
    pub seed: u64,
    pub models: Models,
}

pub fn encode_models(file: &ModelFile) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(file)?;
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(&MODELS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn write_models(path: &Path, file: &ModelFile) -> Result<()> {
    fs::write(path, encode_models(file)?).map_err(|e| Error::io(path, e))
}

pub fn read_models(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let shown = || path.display().to_string();
    if bytes.len() < 8 || bytes[..8] != MODELS_MAGIC {
        return Err(Error::BadMagic { path: shown() });
    }
    if bytes.len() < HEADER {
        return Err(Error::malformed(path, "truncated header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { path: shown(), found: version, expected: FORMAT_VERSION });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    if bytes.len() - HEADER != len {
        return Err(Error::malformed(path, format!("payload is {} bytes, header declares {len}", bytes.len() - HEADER)));
    }
    serde_json::from_slice(&bytes[HEADER..]).map_err(|e| Error::malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::FitOptions;
    use crate::methods::{FitSettings, Method};
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn fitted_models_round_trip_exactly() {
        let spec = SynthSpec { n_train: 200, n_validation: 60, n_test: 10, mc_passes: 2, ..SynthSpec::default() };
        let ds = generate(&spec).unwrap();
        let methods = Method::parse_list("all,HUQ-NUQ", ds.train.split.task()).unwrap();
        let mut models = Models::fit(&ds.train.split, Some(&ds.validation.split), &methods, &FitSettings::default()).unwrap();
        models.calibrate(&ds.validation.split, &methods, &FitOptions::default()).unwrap();
        let file = ModelFile { task: Task::Multiclass, methods: methods.iter().map(Method::to_string).collect(), seed: 7, models };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("models.bin");
        write_models(&p, &file).unwrap();
        let back = read_models(&p).unwrap();
        assert_eq!(back, file);
        for m in methods {
            assert_eq!(
                back.models.score_instances(m, &ds.test.split).unwrap(),
                file.models.score_instances(m, &ds.test.split).unwrap()
            );
        }
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("models.bin");
        fs::write(&p, b"ABSTMTRX\x01\0\0\0").unwrap();
        assert!(matches!(read_models(&p), Err(Error::BadMagic { .. })));
    }
}
