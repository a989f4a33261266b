#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xmr::ingest::{save_annotations, save_features};
use xmr::synthetic::{corpus, CorpusConfig};

pub const CORPUS_DIM: usize = 64;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub features: PathBuf,
    pub annotations: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Synthetic corpus written to a fresh temp directory.
pub fn corpus_fixture(seed: u64, stories: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let config = CorpusConfig {
        stories,
        feature_dim: CORPUS_DIM,
        ..Default::default()
    };
    let (features, annotations) = corpus(seed, &config);
    let fp = dir.path().join("features.jsonl");
    let ap = dir.path().join("annotations.jsonl");
    save_features(&features, &fp).unwrap();
    save_annotations(&annotations, &ap).unwrap();
    Fixture {
        dir,
        features: fp,
        annotations: ap,
    }
}

pub fn xmr<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_xmr"))
        .args(args)
        .env_remove("XMR_THREADS")
        .output()
        .unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
