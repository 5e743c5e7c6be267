//! Corpus directory IO: one test case per UTF-8 JSON document.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{ModelError, TestCase};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corpus document {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

/// Writes each case to `<dir>/<case id>.json`, creating the directory.
pub fn save_corpus(dir: &Path, cases: &[TestCase]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for case in cases {
        let path = dir.join(format!("{}.json", case.id));
        let mut document = serde_json::to_string_pretty(case).expect("cases serialize");
        document.push('\n');
        fs::write(&path, document).map_err(|source| CorpusError::Io { path, source })?;
    }
    Ok(())
}

/// Loads and validates every `*.json` document in `dir`, sorted by filename.
pub fn load_corpus(dir: &Path) -> Result<Vec<TestCase>, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut cases = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let case: TestCase =
            serde_json::from_str(&text).map_err(|source| CorpusError::Json { path, source })?;
        case.validate()?;
        cases.push(case);
    }
    Ok(cases)
}
