use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Files written by one command. Each file is written to a temporary
/// sibling and renamed into place; if the command fails before
/// [`Outputs::commit`], everything written so far is removed.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("cannot write to {}", self.dir.display()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.clone());
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("out");
        {
            let mut out = Outputs::new(&dir).unwrap();
            out.write("a.csv", b"x").unwrap();
            out.write("b.csv", b"y").unwrap();
            assert!(dir.join("a.csv").exists());
        }
        assert!(!dir.exists());
    }

    #[test]
    fn existing_directory_and_other_files_survive_a_rollback() {
        let root = tempfile::tempdir().unwrap();
        std::fs::write(root.path().join("keep.txt"), b"k").unwrap();
        {
            let mut out = Outputs::new(root.path()).unwrap();
            out.write("a.csv", b"x").unwrap();
        }
        assert!(root.path().join("keep.txt").exists());
        assert!(!root.path().join("a.csv").exists());
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 1);
    }

    #[test]
    fn committed_outputs_stay() {
        let root = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(root.path()).unwrap();
        out.write("a.csv", b"x").unwrap();
        out.commit();
        assert_eq!(std::fs::read(root.path().join("a.csv")).unwrap(), b"x");
    }
}
