//! Number formatting and all-or-nothing output directories.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// `%g`-style formatting with 6 significant digits.
pub fn fmt6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // Round first so the exponent reflects the rounded mantissa.
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Files staged under temporary names and renamed into place together, so a
/// failed run leaves none of its outputs behind.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut staged = Vec::new();
        let result = (|| {
            for (name, data) in &self.files {
                let tmp = self.dir.join(format!(".{name}.tmp"));
                staged.push(tmp.clone());
                let mut f = fs::File::create(&tmp)?;
                f.write_all(data)?;
                f.sync_all()?;
            }
            for (name, _) in &self.files {
                fs::rename(self.dir.join(format!(".{name}.tmp")), self.dir.join(name))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for tmp in &staged {
                let _ = fs::remove_file(tmp);
            }
            for (name, _) in &self.files {
                remove_if_exists(&self.dir.join(name));
            }
        }
        result
    }
}

fn remove_if_exists(p: &Path) {
    if p.exists() {
        let _ = fs::remove_file(p);
    }
}
