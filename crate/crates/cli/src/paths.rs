use std::path::{Path, PathBuf};

pub const DATA_DIR_ENV: &str = "SWR_DATA_DIR";

pub fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// `p` as given when it exists, else relative to the dataset root.
pub fn resolve(p: &Path) -> PathBuf {
    if p.exists() || p.is_absolute() {
        return p.to_path_buf();
    }
    match data_root() {
        Some(root) if root.join(p).exists() => root.join(p),
        _ => p.to_path_buf(),
    }
}

/// Absolute form for recording in configs.
pub fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}
