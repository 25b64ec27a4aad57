//! Output directory handling: CSVs, gnuplot scripts and the manifest.
//!
//! Each written file is recorded with a git-style content hash: SHA-256 over
//! `"blob <len>\0"` followed by the bytes. The manifest holds the resolved
//! configuration and those hashes, and nothing time-dependent.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub struct Bundle {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files
            .push((name.to_string(), blob_hash(contents.as_bytes())));
        Ok(())
    }

    /// Records a file written elsewhere (e.g. a streamed trace).
    pub fn record(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.files.push((name.to_string(), blob_hash(&bytes)));
        Ok(())
    }

    /// Writes `manifest.txt` and returns the hash of the configuration block.
    pub fn finish(mut self, verb: &str, config: &str) -> Result<String, CliError> {
        let config_hash = blob_hash(config.as_bytes());
        let mut text = format!(
            "# privsched {} manifest\nverb={verb}\nconfig_hash={config_hash}\n\n[config]\n{config}\n[files]\n",
            env!("CARGO_PKG_VERSION")
        );
        self.files.sort();
        for (name, hash) in &self.files {
            text.push_str(&format!("{name} {hash}\n"));
        }
        let path = self.path("manifest.txt");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(config_hash)
    }
}

/// A gnuplot script that renders columns of a CSV against its x column.
pub struct Plot<'a> {
    pub output: &'a str,
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    /// `(csv file, gnuplot using-spec, legend)`.
    pub series: Vec<(String, String, String)>,
}

impl Plot<'_> {
    pub fn script(&self) -> String {
        let mut s =
            String::from("set datafile separator ','\nset terminal pngcairo size 900,600\n");
        s.push_str(&format!(
            "set output '{}'\nset title '{}'\nset xlabel '{}'\nset ylabel '{}'\nset key outside right\nset grid\n",
            self.output, self.title, self.xlabel, self.ylabel
        ));
        let parts: Vec<String> = self
            .series
            .iter()
            .map(|(file, using, legend)| {
                format!("'{file}' every ::1 using {using} with linespoints title '{legend}'")
            })
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_sha256_objects() {
        // `git hash-object --object-format=sha256` of an empty file
        assert_eq!(
            blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
