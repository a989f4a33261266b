//! Line-delimited rule files.
//!
//! ```text
//! {"format":"xmr-rules","version":1,"feature_dim":2048,"vocab_size":9837}
//! {"antecedent":[18,1996],"consequent":2066,"word":"dog","joint":3,"ante":4,"provenance":[{"tag":"train","joint":3,"ante":4}]}
//! ```
//!
//! Rules are written in key order, so equal stores serialize to equal bytes.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CrossModalRule, Provenance, RuleStore, StoredRule};
use crate::error::{Error, Result};
use crate::ingest::write_json_line;
use crate::transactions::Item;

pub const RULES_FORMAT: &str = "xmr-rules";
pub const RULES_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    feature_dim: usize,
    vocab_size: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleLine {
    antecedent: Vec<Item>,
    consequent: Item,
    word: String,
    joint: u64,
    ante: u64,
    provenance: Vec<ProvenanceLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvenanceLine {
    tag: String,
    joint: u64,
    ante: u64,
}

pub fn write_store<W: Write>(store: &RuleStore, out: &mut W) -> std::io::Result<()> {
    write_json_line(
        out,
        &Header {
            format: RULES_FORMAT.to_owned(),
            version: RULES_VERSION,
            feature_dim: store.feature_dim(),
            vocab_size: store.vocab_size(),
        },
    )?;
    for r in store.rules() {
        let line = RuleLine {
            antecedent: r.rule.antecedent.clone(),
            consequent: r.rule.consequent,
            word: store.word(r.rule.consequent).unwrap_or_default().to_owned(),
            joint: r.rule.support_count,
            ante: r.rule.antecedent_support,
            provenance: r
                .provenance
                .iter()
                .map(|p| ProvenanceLine {
                    tag: p.tag.clone(),
                    joint: p.joint,
                    ante: p.ante,
                })
                .collect(),
        };
        write_json_line(out, &line)?;
    }
    Ok(())
}

pub fn save_store(store: &RuleStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_store(store, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_store(path: impl AsRef<Path>) -> Result<RuleStore> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    let parse_err = |offset: usize, msg: String| Error::ParseAt {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };
    let json_err = |start: usize, line: &[u8], e: serde_json::Error| {
        // serde_json columns are 1-based and point at or just past the fault
        let col = e.column().saturating_sub(1).min(line.len());
        parse_err(start + col, e.to_string())
    };

    let mut lines = Vec::new();
    let mut start = 0;
    for chunk in bytes.split_inclusive(|&b| b == b'\n') {
        let body = chunk.strip_suffix(b"\n").unwrap_or(chunk);
        if !body.iter().all(u8::is_ascii_whitespace) {
            lines.push((start, body));
        }
        start += chunk.len();
    }

    let Some(&(header_start, header_bytes)) = lines.first() else {
        return Err(parse_err(0, "empty rule file (missing header)".into()));
    };
    let header_value: serde_json::Value =
        serde_json::from_slice(header_bytes).map_err(|e| json_err(header_start, header_bytes, e))?;
    let format = header_value.get("format").and_then(|v| v.as_str()).unwrap_or("");
    let version = header_value.get("version").and_then(|v| v.as_u64());
    if format != RULES_FORMAT || version != Some(RULES_VERSION as u64) {
        return Err(Error::Version {
            path: path.to_path_buf(),
            expected: format!("{RULES_FORMAT} v{RULES_VERSION}"),
            found: format!(
                "{} v{}",
                if format.is_empty() { "<none>" } else { format },
                version.map_or("?".to_string(), |v| v.to_string())
            ),
        });
    }
    let header: Header = serde_json::from_value(header_value)
        .map_err(|e| parse_err(header_start, format!("bad header: {e}")))?;

    let mut rules = Vec::with_capacity(lines.len() - 1);
    for &(line_start, body) in &lines[1..] {
        let line: RuleLine = serde_json::from_slice(body).map_err(|e| json_err(line_start, body, e))?;
        let stored = StoredRule {
            rule: CrossModalRule {
                antecedent: line.antecedent,
                consequent: line.consequent,
                support_count: line.joint,
                antecedent_support: line.ante,
            },
            provenance: line
                .provenance
                .into_iter()
                .map(|p| Provenance {
                    tag: p.tag,
                    joint: p.joint,
                    ante: p.ante,
                })
                .collect(),
        };
        rules.push((stored, line.word));
    }
    RuleStore::from_rules(header.feature_dim, header.vocab_size, rules).map_err(|e| match e {
        Error::Invariant(msg) => Error::Invariant(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::rule;
    use super::*;

    fn two_rules() -> RuleStore {
        RuleStore::from_rules(4, 8, vec![rule(&[0, 2], 4, 3, 4, "train"), rule(&[1], 5, 2, 2, "train")])
            .unwrap()
    }

    fn write(contents: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents).unwrap();
        f
    }

    #[test]
    fn round_trip() {
        let store = two_rules();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_store(&store, f.path()).unwrap();
        assert_eq!(load_store(f.path()).unwrap(), store);
    }

    #[test]
    fn exact_layout() {
        let mut buf = Vec::new();
        write_store(&two_rules(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"format":"xmr-rules","version":1,"feature_dim":4,"vocab_size":8}"#
        );
        assert_eq!(
            lines[1],
            r#"{"antecedent":[0,2],"consequent":4,"word":"w4","joint":3,"ante":4,"provenance":[{"tag":"train","joint":3,"ante":4}]}"#
        );
    }

    #[test]
    fn truncated_file_reports_byte_offset() {
        let mut buf = Vec::new();
        write_store(&two_rules(), &mut buf).unwrap();
        let cut = buf.len() - 20;
        let f = write(&buf[..cut]);
        match load_store(f.path()) {
            Err(Error::ParseAt { offset, .. }) => {
                let second_line = buf.iter().position(|&b| b == b'\n').unwrap() + 1;
                assert!(offset as usize > second_line && offset as usize <= cut, "{offset}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let f = write(b"{\"format\":\"xmr-rules\",\"version\":2,\"feature_dim\":4,\"vocab_size\":8}\n");
        assert!(matches!(load_store(f.path()), Err(Error::Version { .. })));
        let f = write(b"{\"feature_dim\":4}\n");
        assert!(matches!(load_store(f.path()), Err(Error::Version { .. })));
    }

    #[test]
    fn consequent_below_feature_dim_is_invariant_violation() {
        let f = write(
            b"{\"format\":\"xmr-rules\",\"version\":1,\"feature_dim\":4,\"vocab_size\":8}\n\
              {\"antecedent\":[0],\"consequent\":3,\"word\":\"x\",\"joint\":1,\"ante\":1,\"provenance\":[]}\n",
        );
        assert!(matches!(load_store(f.path()), Err(Error::Invariant(_))));
    }

    #[test]
    fn empty_file() {
        let f = write(b"");
        assert!(matches!(load_store(f.path()), Err(Error::ParseAt { offset: 0, .. })));
    }
}
