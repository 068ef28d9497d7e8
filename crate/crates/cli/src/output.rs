use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// A named output file held in memory until the whole command succeeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: &str, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.to_string(),
            bytes: bytes.into(),
        }
    }

    pub fn json(name: &str, value: &serde_json::Value) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
        text.push('\n');
        Self::new(name, text)
    }
}

/// `{:.16e}`: 17 significant digits, locale independent.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes every artifact into `dir` through a temporary name and renames it
/// into place. On any failure the files written so far are removed.
pub fn commit(dir: &Path, artifacts: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)], renamed: usize| {
        for (i, (tmp, fin)) in staged.iter().enumerate() {
            let _ = fs::remove_file(if i < renamed { fin } else { tmp });
        }
    };
    for a in artifacts {
        let fin = dir.join(&a.name);
        let tmp = dir.join(format!(".{}.partial", a.name));
        if let Err(e) = fs::write(&tmp, &a.bytes) {
            let _ = fs::remove_file(&tmp);
            cleanup(&staged, 0);
            return Err(e);
        }
        staged.push((tmp, fin));
    }
    for i in 0..staged.len() {
        if let Err(e) = fs::rename(&staged[i].0, &staged[i].1) {
            cleanup(&staged, i);
            return Err(e);
        }
    }
    Ok(staged.into_iter().map(|(_, f)| f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn commit_writes_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let ok = [Artifact::new("a.csv", "x\n"), Artifact::new("b.json", "{}\n")];
        let paths = commit(dir.path(), &ok).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("a.csv")).unwrap(), "x\n");

        let fresh = tempfile::tempdir().unwrap();
        let bad = [Artifact::new("c.csv", "y\n"), Artifact::new("missing/d.csv", "z\n")];
        assert!(commit(fresh.path(), &bad).is_err());
        assert_eq!(fs::read_dir(fresh.path()).unwrap().count(), 0);
    }
}
