use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

fn sibling(target: &Path, tag: &str) -> io::Result<PathBuf> {
    let name = target
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "index path has no file name"))?
        .to_string_lossy();
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or_default();
    let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok(parent.join(format!(".{name}.{tag}-{}-{nanos}", std::process::id())))
}

/// A scratch directory next to `target`, removed on drop unless published.
pub(crate) struct StagingDir {
    path: PathBuf,
    target: PathBuf,
    published: bool,
}

impl StagingDir {
    pub(crate) fn new(target: &Path) -> io::Result<Self> {
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let path = sibling(target, "tmp")?;
        fs::create_dir(&path)?;
        Ok(Self {
            path,
            target: target.to_path_buf(),
            published: false,
        })
    }

    pub(crate) fn path(&self) -> &Path {
        &self.path
    }

    /// Moves the staged directory to the target path.
    ///
    /// An existing index is first renamed aside and deleted afterwards, so
    /// readers that already loaded it are unaffected.
    pub(crate) fn publish(mut self) -> io::Result<()> {
        let old = if self.target.exists() {
            let old = sibling(&self.target, "old")?;
            fs::rename(&self.target, &old)?;
            Some(old)
        } else {
            None
        };
        if let Err(e) = fs::rename(&self.path, &self.target) {
            if let Some(old) = &old {
                let _ = fs::rename(old, &self.target);
            }
            return Err(e);
        }
        self.published = true;
        if let Some(old) = old {
            let _ = fs::remove_dir_all(old);
        }
        Ok(())
    }
}

impl Drop for StagingDir {
    fn drop(&mut self) {
        if !self.published {
            let _ = fs::remove_dir_all(&self.path);
        }
    }
}
