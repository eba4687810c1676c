//! Run directory: field dumps, CSVs and the manifest that ties them together.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use carnot_mbo::{io, DiagnosticsReport, GridFunction};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// SHA-256 of `content` framed like a git blob (`"blob <len>\0" ++ content`).
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub struct RunDir {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
}

impl RunDir {
    /// Create `dir` and fix the run's identity from its inputs.
    pub fn create(dir: &Path, inputs: &[u8]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: content_hash(inputs),
            files: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Short form written into every CSV row.
    pub fn tag(&self) -> &str {
        &self.hash[..12]
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn dump(&mut self, name: &str, f: &GridFunction) -> Result<(), CliError> {
        let p = self.path(&format!("{name}.cmbo"));
        io::write_dump(BufWriter::new(File::create(p)?), f)?;
        Ok(())
    }

    pub fn field_csv(&mut self, name: &str, f: &GridFunction) -> Result<(), CliError> {
        let tag = self.tag().to_string();
        let p = self.path(&format!("{name}.csv"));
        io::write_csv(BufWriter::new(File::create(p)?), f, &tag)?;
        Ok(())
    }

    /// A CSV with the given header; the manifest column is appended.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut s = header.join(",");
        s.push_str(",manifest\n");
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            s.push_str(&r.join(","));
            s.push(',');
            s.push_str(self.tag());
            s.push('\n');
        }
        let p = self.path(&format!("{name}.csv"));
        fs::write(p, s)?;
        Ok(())
    }

    pub fn report(&mut self, rep: &DiagnosticsReport) -> Result<(), CliError> {
        let csv = rep.to_csv(self.tag());
        let p = self.path(&format!("{}_report.csv", rep.name));
        fs::write(p, csv)?;
        Ok(())
    }

    /// Write `manifest.txt`; `header` holds the `key = value` preamble.
    pub fn finish(self, header: &str, config_echo: &str, rep: &DiagnosticsReport) -> Result<PathBuf, CliError> {
        let mut s = String::from("# carnot-mbo run manifest\n");
        let _ = writeln!(s, "hash = sha256:{}", self.hash);
        let _ = writeln!(s, "tag = {}", self.tag());
        s.push_str(header);
        let failed = rep.failures().len();
        let _ = writeln!(s, "passed = {}", failed == 0);
        let _ = writeln!(s, "checks = {}", rep.checks.len());
        let _ = writeln!(s, "failed = {failed}");
        s.push_str("\n[config]\n");
        s.push_str(config_echo);
        s.push_str("\n[checks]\n");
        for c in &rep.checks {
            let _ = writeln!(
                s,
                "{} = {} (measured {:e}, threshold {:e})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.measured,
                c.threshold
            );
        }
        s.push_str("\n[outputs]\n");
        for f in &self.files {
            let _ = writeln!(s, "{f}");
        }
        let p = self.dir.join("manifest.txt");
        fs::write(&p, s)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_git_blob_framing() {
        // `printf 'hello\n' | git hash-object --stdin` under sha256 object format
        assert_eq!(
            content_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }
}
