use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

/// Files staged next to their destination and renamed into place together.
/// Dropping the set without [`commit`](OutputSet::commit) removes the
/// staged files.
#[derive(Default)]
pub struct OutputSet {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl OutputSet {
    pub fn stage(&mut self, dest: &Path, contents: &[u8]) -> std::io::Result<()> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        let mut tmp = NamedTempFile::new_in(&dir)?;
        tmp.write_all(contents)?;
        tmp.flush()?;
        self.staged.push((tmp, dest.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> std::io::Result<()> {
        for (tmp, dest) in self.staged {
            tmp.persist(&dest).map_err(|e| e.error)?;
        }
        Ok(())
    }
}
