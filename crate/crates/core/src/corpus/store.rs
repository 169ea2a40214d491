//! Chunk store: a `PHENORAG-CHUNKS v1` header line (optionally followed by a
//! JSON metadata object on the same line), then one JSON chunk per line.

use std::io::{BufRead, Write};

use super::{Chunk, CorpusError};

pub const CHUNK_STORE_MAGIC: &str = "PHENORAG-CHUNKS";
pub const CHUNK_STORE_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct StoreHeader {
    pub version: String,
    pub meta: serde_json::Value,
}

pub fn write_chunk_store<W: Write>(
    mut w: W,
    chunks: &[Chunk],
    meta: &serde_json::Value,
) -> Result<(), CorpusError> {
    write!(w, "{CHUNK_STORE_MAGIC} {CHUNK_STORE_VERSION}")?;
    if !meta.is_null() {
        write!(w, " {}", serde_json::to_string(meta).map_err(|e| CorpusError::Io(e.to_string()))?)?;
    }
    writeln!(w)?;
    for c in chunks {
        let line = serde_json::to_string(c).map_err(|e| CorpusError::Io(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_chunk_store<R: BufRead>(r: R) -> Result<(StoreHeader, Vec<Chunk>), CorpusError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(CorpusError::NotAChunkStore)??;
    let header = parse_header(&first)?;
    let mut chunks = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk: Chunk = serde_json::from_str(&line).map_err(|e| CorpusError::BadStoreRecord {
            line: i + 2,
            reason: e.to_string(),
        })?;
        chunks.push(chunk);
    }
    Ok((header, chunks))
}

fn parse_header(line: &str) -> Result<StoreHeader, CorpusError> {
    let rest = line
        .strip_prefix(CHUNK_STORE_MAGIC)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or(CorpusError::NotAChunkStore)?;
    let (version, meta) = rest.split_once(' ').unwrap_or((rest, ""));
    if version != CHUNK_STORE_VERSION {
        return Err(CorpusError::UnsupportedVersion {
            found: version.to_string(),
            expected: CHUNK_STORE_VERSION,
        });
    }
    let meta = if meta.trim().is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_str(meta).map_err(|e| CorpusError::BadStoreRecord {
            line: 1,
            reason: e.to_string(),
        })?
    };
    Ok(StoreHeader {
        version: version.to_string(),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{chunk_document, parse_omim_text};

    #[test]
    fn round_trip() {
        let docs = parse_omim_text("#OMIM 1 A\nalpha beta.\n\ngamma.\n#OMIM 2 B\ndelta\n").unwrap();
        let chunks: Vec<_> = docs.iter().flat_map(|d| chunk_document(d, 512).unwrap()).collect();
        let meta = serde_json::json!({"chunk_size": 512});
        let mut buf = Vec::new();
        write_chunk_store(&mut buf, &chunks, &meta).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("PHENORAG-CHUNKS v1 {"));
        let (header, back) = read_chunk_store(&buf[..]).unwrap();
        assert_eq!(header.meta, meta);
        assert_eq!(back, chunks);
    }

    #[test]
    fn version_mismatch() {
        let err = read_chunk_store("PHENORAG-CHUNKS v2\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            CorpusError::UnsupportedVersion {
                found: "v2".into(),
                expected: "v1"
            }
        );
        assert_eq!(
            read_chunk_store("PHENORAG-INDEX v1\n".as_bytes()).unwrap_err(),
            CorpusError::NotAChunkStore
        );
    }

    #[test]
    fn bad_record_line() {
        let err = read_chunk_store("PHENORAG-CHUNKS v1\n{oops}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::BadStoreRecord { line: 2, .. }));
    }
}
