//! Artifact placement, the run manifest, the output-directory lock and
//! `--check` verification.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const LOCK_FILE: &str = ".fluxchain.lock";
pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// One output of a command. `role` is the file suffix used to name it
/// next to the primary output ("csv", "json", "summary.json", ...).
#[derive(Debug, Clone)]
pub struct Artifact {
    pub role: &'static str,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(role: &'static str, bytes: Vec<u8>) -> Self {
        Self { role, bytes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// File name relative to the output directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub arguments: Vec<String>,
    /// Config role → resolved path (or "builtin:..." for built-in defaults).
    pub config_paths: BTreeMap<String, String>,
    pub seed: u64,
    pub output_directory: String,
    pub outputs: Vec<OutputEntry>,
    pub tool_version: String,
    pub wall_clock_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where each artifact and the manifest go.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub manifest: String,
}

fn names_a_directory(out: &Path) -> bool {
    out.is_dir() || out.as_os_str().to_string_lossy().ends_with(['/', '\\'])
}

/// Directory mode names files `<stem>.<role>`; file mode puts the first
/// artifact at `out` and names the rest `<out stem>.<role>`.
pub fn place(out: &Path, stem: &str, artifacts: &[Artifact]) -> Result<Placement, CliError> {
    let (dir, files, manifest) = if names_a_directory(out) {
        let files: Vec<String> = artifacts.iter().map(|a| format!("{stem}.{}", a.role)).collect();
        (out.to_path_buf(), files, format!("{stem}{MANIFEST_SUFFIX}"))
    } else {
        let name = out
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("--out {} has no file name", out.display())))?
            .to_string_lossy()
            .into_owned();
        let out_stem = out.file_stem().map_or(name.clone(), |s| s.to_string_lossy().into_owned());
        let mut files = vec![name.clone()];
        files.extend(artifacts.iter().skip(1).map(|a| format!("{out_stem}.{}", a.role)));
        let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        (dir.to_path_buf(), files, format!("{name}{MANIFEST_SUFFIX}"))
    };
    let mut seen = files.clone();
    seen.push(manifest.clone());
    seen.sort();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Usage(format!("two outputs would share the name {}; pick another --out", w[0])));
    }
    if files.iter().any(|f| f == LOCK_FILE) {
        return Err(CliError::Usage(format!("{LOCK_FILE} is reserved")));
    }
    Ok(Placement { dir, files, manifest })
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Runtime(format!(
                "{} is locked by another run (delete {} if it is stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::Runtime(format!("cannot lock {}: {e}", dir.display()))),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn entries(placement: &Placement, artifacts: &[Artifact]) -> Vec<OutputEntry> {
    placement
        .files
        .iter()
        .zip(artifacts)
        .map(|(file, a)| OutputEntry { file: file.clone(), sha256: sha256_hex(&a.bytes), bytes: a.bytes.len() as u64 })
        .collect()
}

/// Writes through a temporary file so a reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_file_name(format!(
        ".{}.tmp",
        path.file_name().map_or("out".into(), |n| n.to_string_lossy())
    ));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Mismatches between a fresh recomputation, the manifest and the files on
/// disk. Empty when everything agrees.
pub fn check(placement: &Placement, fresh: &[OutputEntry]) -> Result<Vec<String>, CliError> {
    let path = placement.dir.join(&placement.manifest);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("{}: not a run manifest: {e}", path.display())))?;
    let mut problems = Vec::new();
    let recorded: BTreeMap<&str, &OutputEntry> = manifest.outputs.iter().map(|o| (o.file.as_str(), o)).collect();
    for entry in fresh {
        match recorded.get(entry.file.as_str()) {
            None => problems.push(format!("{}: not in manifest", entry.file)),
            Some(r) if r.sha256 != entry.sha256 => {
                problems.push(format!("{}: recomputed output differs from manifest", entry.file))
            }
            Some(_) => {}
        }
        let on_disk = placement.dir.join(&entry.file);
        match fs::read(&on_disk) {
            Ok(bytes) if sha256_hex(&bytes) == entry.sha256 => {}
            Ok(_) => problems.push(format!("{}: file on disk differs", entry.file)),
            Err(e) => problems.push(format!("{}: {e}", entry.file)),
        }
    }
    for file in recorded.keys() {
        if !fresh.iter().any(|e| e.file == *file) {
            problems.push(format!("{file}: in manifest but not produced"));
        }
    }
    Ok(problems)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arts(roles: &[&'static str]) -> Vec<Artifact> {
        roles.iter().map(|r| Artifact::new(r, r.as_bytes().to_vec())).collect()
    }

    #[test]
    fn file_mode_names() {
        let p = place(Path::new("runs/e.csv"), "ham-eig", &arts(&["csv", "json"])).unwrap();
        assert_eq!(p.dir, PathBuf::from("runs"));
        assert_eq!(p.files, vec!["e.csv", "e.json"]);
        assert_eq!(p.manifest, "e.csv.manifest.json");
        let bare = place(Path::new("e.csv"), "x", &arts(&["csv"])).unwrap();
        assert_eq!(bare.dir, PathBuf::from("."));
    }

    #[test]
    fn directory_mode_names() {
        let p = place(Path::new("runs/"), "ham-eig", &arts(&["csv", "json"])).unwrap();
        assert_eq!(p.files, vec!["ham-eig.csv", "ham-eig.json"]);
        assert_eq!(p.manifest, "ham-eig.manifest.json");
    }

    #[test]
    fn colliding_names_are_rejected() {
        assert!(matches!(place(Path::new("e.json"), "x", &arts(&["csv", "json"])), Err(CliError::Usage(_))));
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = DirLock::acquire(dir.path()).unwrap();
        assert!(DirLock::acquire(dir.path()).is_err());
        drop(a);
        assert!(!dir.path().join(LOCK_FILE).exists());
        DirLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
