//! Output-file helpers: provenance headers, complex formatting, CSV/JSON
//! writers. No timestamps or host data — outputs must be byte-identical for
//! identical configs regardless of thread count.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use hht_rmt::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, serde::Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            version: VERSION.to_string(),
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# config_hash={} seed={} version={}\n",
            self.config_hash, self.seed, self.version
        )
    }
}

/// `re{+/-}im i` in shortest round-trip form, e.g. `1+2i`, `0-0.5i`.
pub fn fmt_complex(z: Complex64) -> String {
    if z.im >= 0.0 {
        format!("{}+{}i", z.re, z.im)
    } else {
        format!("{}{}i", z.re, z.im)
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Validation(format!("cannot create output dir {}: {e}", dir.display())))
}

pub fn write_text(path: &PathBuf, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::Validation(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("serialization: {e}")))?;
    write_text(path, &(text + "\n"))
}
