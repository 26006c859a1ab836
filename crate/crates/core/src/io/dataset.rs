use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::{read_matrix, read_mc, sha256_hex, write_matrix, write_mc, Matrix, McTensor, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::types::{ClassProbability, Embedding, Label, LabeledSplit, McSamples, Record, SplitRole, Task};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFiles {
    pub rows: usize,
    pub embeddings: Option<FileRef>,
    pub probs: FileRef,
    pub mc: Option<FileRef>,
    pub labels: FileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub task: Task,
    pub classes: usize,
    pub dim: Option<usize>,
    pub mc_passes: Option<usize>,
    pub seed: Option<u64>,
    pub splits: BTreeMap<SplitRole, SplitFiles>,
}

/// A split as stored on disk, with its out-of-distribution flags.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSplit {
    pub split: LabeledSplit,
    pub ood: Vec<bool>,
}

fn labels_csv(split: &LabeledSplit, ood: &[bool]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let c = split.classes();
    match split.task() {
        Task::Multiclass => w.write_record(["id", "label", "ood"])?,
        Task::Multilabel => {
            let mut header = vec!["id".to_string()];
            header.extend((0..c).map(|l| format!("y{l}")));
            header.push("ood".into());
            w.write_record(&header)?;
        }
    }
    for (i, r) in split.records().iter().enumerate() {
        let mut row = vec![i.to_string()];
        match &r.label {
            Label::Class(k) => row.push(k.to_string()),
            Label::Multi(bits) => row.extend(bits.iter().map(|&b| (b as u8).to_string())),
        }
        row.push((ood.get(i).copied().unwrap_or(false) as u8).to_string());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

/// Writes every split into `dir` and returns the manifest (also written to
/// `dir/manifest.json`).
pub fn write_dataset(dir: &Path, splits: &[(&LabeledSplit, &[bool])], seed: Option<u64>) -> Result<DatasetManifest> {
    let first = splits.first().ok_or_else(|| Error::InvalidParameter("no splits to write".into()))?.0;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        task: first.task(),
        classes: first.classes(),
        dim: first.dim(),
        mc_passes: first.records()[0].mc.as_ref().map(McSamples::passes),
        seed,
        splits: BTreeMap::new(),
    };
    for &(split, ood) in splits {
        if split.task() != manifest.task || split.classes() != manifest.classes || split.dim() != manifest.dim {
            return Err(Error::InvalidParameter("splits disagree on task, classes or dimension".into()));
        }
        let role = split.role().name();
        let n = split.len();
        let file = |suffix: &str| format!("{role}.{suffix}");

        let embeddings = match split.dim() {
            Some(d) => {
                let data = split.embeddings()?.concat();
                let name = file("emb.bin");
                Some(FileRef { sha256: write_matrix(&dir.join(&name), &Matrix::new(n, d, data)?)?, path: name })
            }
            None => None,
        };
        let probs_data: Vec<f64> = split.records().iter().flat_map(|r| r.probs.as_slice().iter().copied()).collect();
        let name = file("probs.bin");
        let probs = FileRef {
            sha256: write_matrix(&dir.join(&name), &Matrix::new(n, manifest.classes, probs_data)?)?,
            path: name,
        };
        let mc = match manifest.mc_passes {
            Some(t) => {
                let data = split
                    .records()
                    .iter()
                    .map(|r| match &r.mc {
                        Some(m) if m.passes() == t => Ok(m.as_flat().to_vec()),
                        _ => Err(Error::MissingMcSamples),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .concat();
                let tensor = McTensor { passes: t, classes: manifest.classes, matrix: Matrix::new(n, t * manifest.classes, data)? };
                let name = file("mc.bin");
                Some(FileRef { sha256: write_mc(&dir.join(&name), &tensor)?, path: name })
            }
            None => None,
        };
        let name = file("labels.csv");
        let labels = FileRef { sha256: write_file(&dir.join(&name), &labels_csv(split, ood)?)?, path: name };
        manifest.splits.insert(split.role(), SplitFiles { rows: n, embeddings, probs, mc, labels });
    }
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_file(&dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub base: PathBuf,
}

impl Dataset {
    /// Reads the manifest and verifies every referenced file's checksum.
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let bytes = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: DatasetManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::malformed(manifest_path, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: manifest_path.display().to_string(),
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let ds = Self { manifest, base };
        ds.verify()?;
        Ok(ds)
    }

    fn refs(&self) -> impl Iterator<Item = &FileRef> {
        self.manifest.splits.values().flat_map(|s| {
            [s.embeddings.as_ref(), Some(&s.probs), s.mc.as_ref(), Some(&s.labels)].into_iter().flatten()
        })
    }

    /// Row counts are checked before checksums so truncation is reported as such.
    pub fn verify(&self) -> Result<()> {
        for (role, files) in &self.manifest.splits {
            for f in [files.embeddings.as_ref(), Some(&files.probs), files.mc.as_ref()].into_iter().flatten() {
                let path = self.base.join(&f.path);
                let m = if Some(f) == files.mc.as_ref() { read_mc(&path, None)?.matrix } else { read_matrix(&path, None)? };
                if m.rows != files.rows {
                    return Err(Error::RowCountMismatch {
                        path: path.display().to_string(),
                        detail: format!("{} split has {} rows, file has {}", role.name(), files.rows, m.rows),
                    });
                }
            }
        }
        for f in self.refs() {
            let path = self.base.join(&f.path);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != f.sha256 {
                return Err(Error::ChecksumMismatch { path: path.display().to_string() });
            }
        }
        Ok(())
    }

    pub fn has(&self, role: SplitRole) -> bool {
        self.manifest.splits.contains_key(&role)
    }

    pub fn load(&self, role: SplitRole) -> Result<StoredSplit> {
        let m = &self.manifest;
        let files = m.splits.get(&role).ok_or_else(|| {
            Error::InvalidParameter(format!("dataset has no {} split", role.name()))
        })?;
        let probs_path = self.base.join(&files.probs.path);
        let probs = read_matrix(&probs_path, Some(&files.probs.sha256))?;
        if probs.cols != m.classes {
            return Err(Error::malformed(&probs_path, format!("{} columns, manifest declares {} classes", probs.cols, m.classes)));
        }
        let embeddings = match &files.embeddings {
            Some(f) => Some(read_matrix(&self.base.join(&f.path), Some(&f.sha256))?),
            None => None,
        };
        let mc = match &files.mc {
            Some(f) => Some(read_mc(&self.base.join(&f.path), Some(&f.sha256))?),
            None => None,
        };
        let (labels, ood) = read_labels(&self.base.join(&files.labels.path), &files.labels.sha256, m.task, m.classes)?;
        let n = files.rows;
        for (what, rows) in [
            ("probabilities", probs.rows),
            ("labels", labels.len()),
            ("embeddings", embeddings.as_ref().map_or(n, |e| e.rows)),
            ("MC samples", mc.as_ref().map_or(n, |t| t.matrix.rows)),
        ] {
            if rows != n {
                return Err(Error::RowCountMismatch {
                    path: self.base.display().to_string(),
                    detail: format!("{} split: {what} has {rows} rows, expected {n}", role.name()),
                });
            }
        }
        let records = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                Ok(Record {
                    embedding: embeddings.as_ref().map(|e| Embedding::new(e.row(i).to_vec())).transpose()?,
                    probs: ClassProbability::new(probs.row(i).to_vec(), m.task)?,
                    mc: mc.as_ref().map(|t| McSamples::from_flat(t.passes, t.classes, t.matrix.row(i).to_vec())).transpose()?,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StoredSplit { split: LabeledSplit::new(role, m.task, records)?, ood })
    }
}

fn read_labels(path: &Path, sha256: &str, task: Task, classes: usize) -> Result<(Vec<Label>, Vec<bool>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if sha256_hex(&bytes) != sha256 {
        return Err(Error::ChecksumMismatch { path: path.display().to_string() });
    }
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let width = match task {
        Task::Multiclass => 3,
        Task::Multilabel => classes + 2,
    };
    let parse = |s: &str, row: usize| -> Result<usize> {
        s.trim().parse().map_err(|_| Error::malformed(path, format!("row {row}: bad integer {s:?}")))
    };
    let mut labels = Vec::new();
    let mut ood = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::malformed(path, format!("row {i}: {} fields, expected {width}", rec.len())));
        }
        if parse(&rec[0], i)? != i {
            return Err(Error::malformed(path, format!("row {i}: ids must be 0..n in order")));
        }
        labels.push(match task {
            Task::Multiclass => Label::Class(parse(&rec[1], i)?),
            Task::Multilabel => Label::Multi((1..=classes).map(|k| parse(&rec[k], i).map(|v| v != 0)).collect::<Result<_>>()?),
        });
        ood.push(parse(&rec[width - 1], i)? != 0);
    }
    Ok((labels, ood))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn spec(task: Task) -> SynthSpec {
        SynthSpec { n_train: 60, n_validation: 30, n_test: 40, mc_passes: 3, labels: 4, task, ..SynthSpec::default() }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for task in [Task::Multiclass, Task::Multilabel] {
            let ds = generate(&spec(task)).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let splits = [SplitRole::Train, SplitRole::Validation, SplitRole::Test].map(|r| ds.split(r));
            let refs: Vec<(&LabeledSplit, &[bool])> = splits.iter().map(|s| (&s.split, s.ood.as_slice())).collect();
            write_dataset(dir.path(), &refs, Some(7)).unwrap();
            let loaded = Dataset::open(&dir.path().join(MANIFEST_FILE)).unwrap();
            for s in splits {
                let back = loaded.load(s.split.role()).unwrap();
                assert_eq!(back.split, s.split);
                assert_eq!(back.ood, s.ood);
            }
        }
    }

    #[test]
    fn truncated_file_reports_row_count() {
        let ds = generate(&spec(Task::Multiclass)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[(&ds.test.split, &ds.test.ood)], None).unwrap();
        let p = dir.path().join("test.probs.bin");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 12]).unwrap();
        assert!(matches!(Dataset::open(&dir.path().join(MANIFEST_FILE)), Err(Error::RowCountMismatch { .. })));
    }

    #[test]
    fn edited_labels_fail_checksum() {
        let ds = generate(&spec(Task::Multiclass)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[(&ds.test.split, &ds.test.ood)], None).unwrap();
        let p = dir.path().join("test.labels.csv");
        let text = fs::read_to_string(&p).unwrap() + "\n";
        fs::write(&p, text).unwrap();
        assert!(matches!(Dataset::open(&dir.path().join(MANIFEST_FILE)), Err(Error::ChecksumMismatch { .. })));
    }
}
