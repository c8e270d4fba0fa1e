//! Artifact rendering and the stage-then-commit file layout.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use gridsec::game::PayoffMatrix;

/// Six significant digits, plain decimal notation for everything between
/// 1e-4 and 1e15, scientific outside it.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let s = if !(-4..15).contains(&exp) {
        sci
    } else if exp >= 5 {
        let unit = 10f64.powi(exp - 5);
        format!("{:.0}", (x / unit).round() * unit)
    } else {
        format!("{:.*}", (5 - exp) as usize, x)
    };
    // rounding can leave a negative zero behind
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// CSV text with the provenance comment on top and LF line endings.
pub struct CsvDoc {
    comments: Vec<String>,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvDoc {
    pub fn new(hash: &str, header: &[&str]) -> Result<Self> {
        let mut doc = Self {
            comments: vec![format!("config-sha256: {hash}")],
            writer: csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new()),
        };
        doc.writer.write_record(header)?;
        Ok(doc)
    }

    pub fn comment(mut self, text: impl Into<String>) -> Self {
        self.comments.push(text.into());
        self
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        out.extend(self.writer.into_inner().map_err(|e| e.into_error())?);
        Ok(out)
    }
}

/// Payoff matrix in shortest round-trip form, so it re-imports exactly.
pub fn payoff_csv(hash: &str, m: &PayoffMatrix, thousands: bool) -> Result<Vec<u8>> {
    let mut out = format!("# config-sha256: {hash}\n").into_bytes();
    if thousands {
        out.extend_from_slice(b"# unit: 1000\n");
        m.map(|v| v / 1000.0).write_csv(&mut out)?;
    } else {
        m.write_csv(&mut out)?;
    }
    Ok(out)
}

pub fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Files are written to a staging directory first. On success they are
/// moved into the output directory; on failure they go to `quarantine/`.
pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let dir = out.join(".staging");
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut moved = Vec::new();
        for name in &self.files {
            let to = self.out.join(name);
            fs::rename(self.dir.join(name), &to)?;
            moved.push(to);
        }
        fs::remove_dir_all(&self.dir)?;
        Ok(moved)
    }

    /// Moves whatever was staged into `<out>/quarantine/`, replacing an
    /// earlier quarantine.
    pub fn quarantine(self) -> Result<PathBuf> {
        let q = self.out.join("quarantine");
        if q.exists() {
            fs::remove_dir_all(&q)?;
        }
        fs::rename(&self.dir, &q)?;
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(131810.7), "131811");
        assert_eq!(sig6(17525.2449), "17525.2");
        assert_eq!(sig6(-230.2534), "-230.253");
        assert_eq!(sig6(0.2931), "0.293100");
        assert_eq!(sig6(0.0047), "0.00470000");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(999999.7), "1000000");
        assert_eq!(sig6(1.5e-9), "1.50000e-9");
        assert_eq!(sig6(f64::NAN), "nan");
    }

    #[test]
    fn csv_has_comment_and_lf() {
        let mut d = CsvDoc::new("abc", &["a", "b"]).unwrap().comment("note");
        d.row(["1", "x,y"]).unwrap();
        let text = String::from_utf8(d.finish().unwrap()).unwrap();
        assert_eq!(text, "# config-sha256: abc\n# note\na,b\n1,\"x,y\"\n");
    }
}
