use actgrad_core::data::{write_synthetic_corpus, TEST_FILE, TRAIN_FILES};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use std::{env, fs, thread};

pub const CORPUS_SEED: u64 = 2024;

fn all_batches_present(dir: &Path) -> bool {
    TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .all(|f| dir.join(f).exists())
}

/// Directory with a full-size CIFAR-10-format corpus for tests: the real
/// dataset when ACTGRAD_DATA_DIR points at one, otherwise a synthetic corpus
/// generated once under target/. Safe against concurrent test binaries: the
/// corpus is built in a scratch directory and atomically renamed into place.
pub fn data_dir() -> PathBuf {
    if let Ok(dir) = env::var("ACTGRAD_DATA_DIR") {
        let dir = PathBuf::from(dir);
        if all_batches_present(&dir) {
            return dir;
        }
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target");
    let dir = root.join("synthetic-data");
    if all_batches_present(&dir) {
        return dir;
    }
    let scratch = root.join(format!("synthetic-data-build-{}", std::process::id()));
    write_synthetic_corpus(&scratch, CORPUS_SEED).expect("synthetic corpus");
    match fs::rename(&scratch, &dir) {
        Ok(()) => {}
        Err(_) => {
            // another test binary renamed its corpus first; use that one
            let _ = fs::remove_dir_all(&scratch);
            let deadline = Instant::now() + Duration::from_secs(300);
            while !all_batches_present(&dir) {
                assert!(Instant::now() < deadline, "corpus never appeared in {dir:?}");
                thread::sleep(Duration::from_millis(250));
            }
        }
    }
    dir
}
