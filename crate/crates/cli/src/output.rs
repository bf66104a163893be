//! All-or-nothing file output. Every artifact of a command is rendered in
//! memory first and only then written, so a failing command leaves no
//! partial results behind.

use std::fs;
use std::path::{Path, PathBuf};

#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every file to a temporary sibling, then renames them into
    /// place. On failure anything already written is removed again.
    pub fn commit(self) -> std::io::Result<()> {
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let mut created_dirs: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (path, bytes) in &self.files {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    if !dir.exists() {
                        fs::create_dir_all(dir)?;
                        created_dirs.push(dir.to_path_buf());
                    }
                }
                let tmp = tmp_name(path);
                staged.push((tmp.clone(), path.clone()));
                fs::write(&tmp, bytes)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            for dir in created_dirs.iter().rev() {
                let _ = fs::remove_dir(dir);
            }
            return Err(e);
        }
        let mut done = 0;
        for (tmp, path) in &staged {
            if let Err(e) = fs::rename(tmp, path) {
                for (_, p) in &staged[..done] {
                    let _ = fs::remove_file(p);
                }
                for (t, _) in &staged[done..] {
                    let _ = fs::remove_file(t);
                }
                return Err(e);
            }
            done += 1;
        }
        Ok(())
    }
}

fn tmp_name(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".{}.tmp", std::process::id()));
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_everything_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        out.add(dir.path().join("a/x.txt"), "x");
        out.add(dir.path().join("y.txt"), "y");
        out.commit().unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a/x.txt")).unwrap(), "x");

        let blocker = dir.path().join("file");
        fs::write(&blocker, "").unwrap();
        let mut out = Outputs::default();
        out.add(dir.path().join("z.txt"), "z");
        out.add(blocker.join("w.txt"), "w");
        assert!(out.commit().is_err());
        assert!(!dir.path().join("z.txt").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
    }
}
