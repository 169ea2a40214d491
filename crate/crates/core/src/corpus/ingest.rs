use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{CorpusError, KnowledgeDoc, Sex, Source};

/// A rejected input record with the 1-based line it started on.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReject {
    pub line: usize,
    pub error: CorpusError,
}

impl std::fmt::Display for IngestReject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.error)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHpoRecord {
    #[serde(default)]
    doc_id: Option<String>,
    #[serde(default)]
    disease_name: Option<String>,
    #[serde(default)]
    gene_symbols: Option<String>,
    #[serde(default)]
    typical_age: Option<String>,
    #[serde(default)]
    sex: Option<String>,
    #[serde(default)]
    systems: Vec<serde_json::Value>,
    #[serde(default)]
    description: Option<String>,
}

/// Parses one structured phenotype record (a single JSON object).
pub fn parse_hpo_record(raw: &str) -> Result<KnowledgeDoc, CorpusError> {
    let rec: RawHpoRecord =
        serde_json::from_str(raw.trim()).map_err(|e| CorpusError::MalformedRecord(e.to_string()))?;

    let disease_name = rec
        .disease_name
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or(CorpusError::MissingField("disease_name"))?;

    let gene_symbols = rec
        .gene_symbols
        .as_deref()
        .unwrap_or("")
        .split('/')
        .map(|g| g.trim().to_uppercase())
        .filter(|g| !g.is_empty())
        .collect();

    let sex = rec.sex.as_deref().map(parse_sex).transpose()?;
    let typical_age = rec.typical_age.map(|s| s.trim().to_string()).filter(|s| !s.is_empty());

    let mut phenotypes_by_system = Vec::with_capacity(rec.systems.len());
    for (index, block) in rec.systems.iter().enumerate() {
        phenotypes_by_system.push(parse_system_block(index, block)?);
    }
    if phenotypes_by_system.iter().all(|(_, t): &(String, Vec<String>)| t.is_empty()) {
        return Err(CorpusError::MissingField("systems"));
    }

    let doc_id = match rec.doc_id.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()) {
        Some(id) => id,
        None => {
            let digest = Sha256::digest(raw.trim().as_bytes());
            format!("HPO:{}", &hex::encode(digest)[..16])
        }
    };

    Ok(KnowledgeDoc {
        doc_id,
        source: Source::HpoRecord,
        disease_name,
        gene_symbols,
        typical_age,
        sex,
        phenotypes_by_system,
        body_text: rec.description.unwrap_or_default().trim().to_string(),
    })
}

fn parse_sex(s: &str) -> Result<Sex, CorpusError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "male" | "m" => Ok(Sex::Male),
        "female" | "f" => Ok(Sex::Female),
        "any" | "both" | "non-sex specific" | "unspecified" => Ok(Sex::Any),
        _ => Err(CorpusError::InvalidField {
            field: "sex",
            value: s.to_string(),
        }),
    }
}

fn parse_system_block(
    index: usize,
    block: &serde_json::Value,
) -> Result<(String, Vec<String>), CorpusError> {
    let bad = |reason: &str| CorpusError::MalformedSystemBlock {
        index,
        reason: reason.to_string(),
    };
    let obj = block.as_object().ok_or_else(|| bad("not an object"))?;
    let system = obj
        .get("system")
        .and_then(|v| v.as_str())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad("missing `system` name"))?;
    let terms = obj
        .get("terms")
        .and_then(|v| v.as_array())
        .ok_or_else(|| bad("missing `terms` list"))?;
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let t = t.as_str().ok_or_else(|| bad("non-string term"))?.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    if let Some(extra) = obj.keys().find(|k| *k != "system" && *k != "terms") {
        return Err(bad(&format!("unexpected key `{extra}`")));
    }
    Ok((system.to_string(), out))
}

/// Parses a file of structured records, one JSON object per non-blank line.
/// Every line yields either a document or a reject carrying its line number.
pub fn parse_hpo_records(content: &str) -> Vec<Result<KnowledgeDoc, IngestReject>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_hpo_record(l).map_err(|error| IngestReject { line: i + 1, error }))
        .collect()
}

fn omim_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^#OMIM[ \t]+(\S+)(?:[ \t]+(.*))?$").expect("valid regex"))
}

/// Splits a narrative-text file on `#OMIM <accession> <title>` header lines.
/// Each record yields a document or a reject tagged with its header line.
pub fn parse_omim_records(content: &str) -> Vec<Result<KnowledgeDoc, IngestReject>> {
    let re = omim_header();
    let mut out = Vec::new();
    // (header line number, accession, title, body lines)
    let mut current: Option<(usize, String, String, Vec<&str>)> = None;
    let mut preamble_line: Option<usize> = None;

    let finish = |cur: (usize, String, String, Vec<&str>)| {
        let (line, accession, title, body) = cur;
        let body = body.join("\n").trim().to_string();
        let doc_id = format!("OMIM:{accession}");
        if body.is_empty() {
            return Err(IngestReject {
                line,
                error: CorpusError::EmptyBody(doc_id),
            });
        }
        Ok(KnowledgeDoc {
            doc_id,
            source: Source::OmimText,
            disease_name: title,
            gene_symbols: Vec::new(),
            typical_age: None,
            sex: None,
            phenotypes_by_system: Vec::new(),
            body_text: body,
        })
    };

    for (i, line) in content.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if let Some(caps) = re.captures(line) {
            if let Some(cur) = current.take() {
                out.push(finish(cur));
            }
            let title = caps.get(2).map(|m| m.as_str().trim().to_string()).unwrap_or_default();
            current = Some((i + 1, caps[1].to_string(), title, Vec::new()));
        } else if let Some(cur) = current.as_mut() {
            cur.3.push(line);
        } else if !line.trim().is_empty() && preamble_line.is_none() {
            preamble_line = Some(i + 1);
        }
    }
    if let Some(cur) = current.take() {
        out.push(finish(cur));
    }
    if let Some(line) = preamble_line {
        out.insert(
            0,
            Err(IngestReject {
                line,
                error: CorpusError::MissingHeader,
            }),
        );
    }
    if out.is_empty() {
        out.push(Err(IngestReject {
            line: 1,
            error: CorpusError::MissingHeader,
        }));
    }
    out
}

/// Parses narrative text that must be well-formed throughout: the first
/// reject aborts the whole file.
pub fn parse_omim_text(raw: &str) -> Result<Vec<KnowledgeDoc>, CorpusError> {
    parse_omim_records(raw)
        .into_iter()
        .map(|r| r.map_err(|rej| rej.error))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOTOS: &str = r#"{"disease_name": "Sotos syndrome", "gene_symbols": "NSD1/SETD2/APC2", "typical_age": "1-5 years", "sex": "any", "systems": [{"system": "Ear", "terms": ["Posteriorly rotated ears"]}, {"system": "Endocrine system", "terms": ["Hypothyroidism"]}], "description": "Overgrowth with macrocephaly."}"#;

    #[test]
    fn sotos_record() {
        let doc = parse_hpo_record(SOTOS).unwrap();
        assert_eq!(doc.source, Source::HpoRecord);
        assert_eq!(doc.disease_name, "Sotos syndrome");
        assert_eq!(doc.gene_symbols, vec!["NSD1", "SETD2", "APC2"]);
        assert_eq!(
            doc.phenotypes_by_system,
            vec![
                ("Ear".to_string(), vec!["Posteriorly rotated ears".to_string()]),
                ("Endocrine system".to_string(), vec!["Hypothyroidism".to_string()]),
            ]
        );
        assert_eq!(doc.sex, Some(Sex::Any));
        assert!(doc.doc_id.starts_with("HPO:"));
    }

    #[test]
    fn genes_are_uppercased() {
        let doc = parse_hpo_record(
            r#"{"disease_name": "X", "gene_symbols": " nsd1 / setd2", "systems": [{"system": "Ear", "terms": ["a"]}]}"#,
        )
        .unwrap();
        assert_eq!(doc.gene_symbols, vec!["NSD1", "SETD2"]);
    }

    #[test]
    fn no_terms_is_missing_field() {
        let err = parse_hpo_record(r#"{"disease_name": "X", "systems": []}"#).unwrap_err();
        assert_eq!(err, CorpusError::MissingField("systems"));
        let err =
            parse_hpo_record(r#"{"disease_name": "X", "systems": [{"system": "Ear", "terms": []}]}"#)
                .unwrap_err();
        assert_eq!(err, CorpusError::MissingField("systems"));
    }

    #[test]
    fn missing_disease_name() {
        let err = parse_hpo_record(r#"{"systems": [{"system": "Ear", "terms": ["a"]}]}"#).unwrap_err();
        assert_eq!(err, CorpusError::MissingField("disease_name"));
    }

    #[test]
    fn optional_fields_absent() {
        let doc = parse_hpo_record(
            r#"{"disease_name": "Y", "systems": [{"system": "Eye", "terms": ["Ptosis"]}]}"#,
        )
        .unwrap();
        assert_eq!(doc.typical_age, None);
        assert_eq!(doc.sex, None);
        assert!(doc.gene_symbols.is_empty());
        assert_eq!(doc.phenotype_count(), 1);
    }

    #[test]
    fn malformed_system_block() {
        let err = parse_hpo_record(r#"{"disease_name": "Y", "systems": [{"terms": ["Ptosis"]}]}"#)
            .unwrap_err();
        assert!(matches!(err, CorpusError::MalformedSystemBlock { index: 0, .. }));
        let err =
            parse_hpo_record(r#"{"disease_name": "Y", "systems": [{"system": "Eye", "terms": "x"}]}"#)
                .unwrap_err();
        assert!(matches!(err, CorpusError::MalformedSystemBlock { index: 0, .. }));
    }

    #[test]
    fn reject_reports_line_number() {
        let content = format!("{SOTOS}\n\n{{\"systems\": []}}\n");
        let out = parse_hpo_records(&content);
        assert_eq!(out.len(), 2);
        assert!(out[0].is_ok());
        let rej = out[1].as_ref().unwrap_err();
        assert_eq!(rej.line, 3);
    }

    #[test]
    fn omim_header_and_paragraphs() {
        let raw = "#OMIM 161800 Nemaline myopathy 3\nPara one.\n\nPara two.\n\nPara three.\n";
        let docs = parse_omim_text(raw).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "OMIM:161800");
        assert_eq!(docs[0].disease_name, "Nemaline myopathy 3");
        assert_eq!(docs[0].body_text, "Para one.\n\nPara two.\n\nPara three.");
        assert_eq!(docs[0].body_text.split("\n\n").count(), 3);
    }

    #[test]
    fn omim_header_only_is_empty_body() {
        let err = parse_omim_text("#OMIM 1 Title\n\n   \n").unwrap_err();
        assert_eq!(err, CorpusError::EmptyBody("OMIM:1".into()));
    }

    #[test]
    fn omim_missing_header() {
        assert_eq!(parse_omim_text("just text\n").unwrap_err(), CorpusError::MissingHeader);
        assert_eq!(parse_omim_text("").unwrap_err(), CorpusError::MissingHeader);
    }

    #[test]
    fn omim_multi_record_count_matches_line_scan() {
        let raw = "#OMIM 300265 Heterotaxy, visceral, 1, X-linked\nBody A.\n#OMIM 102610 Nemaline myopathy\nBody B.\nMore B.\n";
        let docs = parse_omim_text(raw).unwrap();
        let headers = raw.lines().filter(|l| l.starts_with("#OMIM ")).count();
        assert_eq!(docs.len(), headers);
        assert_eq!(docs[1].body_text, "Body B.\nMore B.");
    }
}
