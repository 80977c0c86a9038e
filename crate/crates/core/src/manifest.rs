//! Utterance lists: `utt_id<TAB>path<TAB>label<TAB>system_id` with a header row.
//!
//! Relative audio paths resolve against the manifest's directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{check_system_id, Label};

pub const MANIFEST_HEADER: &str = "utt_id\tpath\tlabel\tsystem_id";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub path: PathBuf,
    pub label: Label,
    pub system_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Where the manifest was read from; used in diagnostics.
    pub source: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn utt_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.utt_id.as_str())
    }

    pub fn require_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyManifest(self.source.display().to_string()))
        } else {
            Ok(())
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.utt_id,
                e.path.display(),
                e.label,
                e.system_id
            ));
        }
        out
    }
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest_str(&text, path, base)
}

/// Parse manifest text; `source` is only used for error messages.
pub fn parse_manifest_str(text: &str, source: &Path, base_dir: &Path) -> Result<Manifest> {
    let err = |line: usize, reason: String| Error::ManifestParse {
        path: source.to_path_buf(),
        line,
        reason,
    };
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.trim_end() != MANIFEST_HEADER {
                return Err(err(lineno, format!("expected header '{MANIFEST_HEADER}'")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if cols.len() != 4 {
            return Err(err(lineno, format!("expected 4 columns, found {}", cols.len())));
        }
        let (utt_id, rel, label, system_id) = (cols[0], cols[1], cols[2], cols[3]);
        if utt_id.is_empty() || rel.is_empty() {
            return Err(err(lineno, "empty utt_id or path".into()));
        }
        if let Some(first) = seen.insert(utt_id.to_string(), lineno) {
            return Err(err(
                lineno,
                format!("duplicate utt_id '{utt_id}' (first seen on line {first})"),
            ));
        }
        let label: Label = label.parse().map_err(|e| err(lineno, e))?;
        check_system_id(label, system_id).map_err(|e| err(lineno, e))?;
        let rel = Path::new(rel);
        let path = if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            base_dir.join(rel)
        };
        entries.push(ManifestEntry {
            utt_id: utt_id.to_string(),
            path,
            label,
            system_id: system_id.to_string(),
        });
    }
    if !header_seen {
        return Err(err(1, "missing header".into()));
    }
    Ok(Manifest {
        source: source.to_path_buf(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> Result<Manifest> {
        let text = format!("{MANIFEST_HEADER}\n{body}");
        parse_manifest_str(&text, Path::new("m.tsv"), Path::new("/data"))
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::ManifestParse { line, .. } => line,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn valid_rows() {
        let m = parse("u1\ta.wav\tbonafide\t-\nu2\t/abs/b.wav\tspoof\tA01\nu3\tsub/c.wav\tspoof\tA02\n")
            .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.entries[0].path, PathBuf::from("/data/a.wav"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs/b.wav"));
        assert_eq!(m.entries[2].system_id, "A02");
        assert_eq!(m.entries[2].label, Label::Spoof);
    }

    #[test]
    fn duplicate_reports_line() {
        let mut body = String::new();
        for i in 0..5 {
            body.push_str(&format!("u{i}\tx{i}.wav\tbonafide\t-\n"));
        }
        body.push_str("u2\tdup.wav\tbonafide\t-\n");
        // header is line 1, rows start at line 2
        assert_eq!(line_of(parse(&body).unwrap_err()), 7);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(line_of(parse("u1\ta.wav\tspoof\t-\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("u1\ta.wav\tgenuine\t-\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("u1\ta.wav\tbonafide\t-\nu2\tb.wav\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("u1\ta.wav\tbonafide\tA01\n").unwrap_err()), 2);
        let no_header = parse_manifest_str("u1\ta\tbonafide\t-\n", Path::new("m"), Path::new(""));
        assert_eq!(line_of(no_header.unwrap_err()), 1);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("# produced by a script\n\n{MANIFEST_HEADER}\nu1\ta.wav\tbonafide\t-\n\n");
        let m = parse_manifest_str(&text, Path::new("m"), Path::new("")).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn tsv_roundtrip() {
        let m = parse("u1\ta.wav\tbonafide\t-\nu2\tb.wav\tspoof\tS1\n").unwrap();
        let back = parse_manifest_str(&m.to_tsv(), Path::new("m.tsv"), Path::new("/data")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn empty_manifest() {
        let m = parse("").unwrap();
        assert!(matches!(m.require_non_empty(), Err(Error::EmptyManifest(_))));
    }
}
