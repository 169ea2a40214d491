use phenorag_core::corpus::{chunk_document, split_text, KnowledgeDoc};
use phenorag_core::tokenize::{Tokenizer, WordPunctTokenizer};
use phenorag_core::Source;
use proptest::prelude::*;

fn narrative(body: String) -> KnowledgeDoc {
    KnowledgeDoc {
        doc_id: "OMIM:999".into(),
        source: Source::OmimText,
        disease_name: String::new(),
        gene_symbols: vec![],
        typical_age: None,
        sex: None,
        phenotypes_by_system: vec![],
        body_text: body,
    }
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn piece() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => "[a-zA-Z0-9]{1,12}",
        2 => prop::sample::select(vec![".", ",", ";", "!", "?", "(", ")", "-", "/"]).prop_map(str::to_string),
        1 => "[α-ωé]{1,4}",
    ]
}

fn gap() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec![" ", " ", " ", "", "  ", "\n", "\n\n", "\t", " \n\n "])
}

fn document() -> impl Strategy<Value = String> {
    prop::collection::vec((piece(), gap()), 0..900)
        .prop_map(|parts| parts.into_iter().map(|(p, g)| format!("{p}{g}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chunks_respect_budget_and_cover_source(body in document(), size in 16usize..600) {
        let tok = WordPunctTokenizer;
        let doc = narrative(body);
        let text = doc.text();
        match chunk_document(&doc, size) {
            Err(_) => prop_assert_eq!(tok.count(&text), 0),
            Ok(chunks) => {
                let mut prev_end = 0;
                for (i, c) in chunks.iter().enumerate() {
                    prop_assert!(c.token_count >= 1 && c.token_count <= size);
                    prop_assert_eq!(tok.count(&c.text), c.token_count);
                    prop_assert_eq!(&text[c.start..c.end], c.text.as_str());
                    prop_assert_eq!(c.ordinal, i);
                    prop_assert!(text[prev_end..c.start].trim().is_empty());
                    prev_end = c.end;
                }
                prop_assert!(text[prev_end..].trim().is_empty());
                let joined: String = chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ");
                prop_assert_eq!(squeeze(&joined), squeeze(&text));
                let total: usize = chunks.iter().map(|c| c.token_count).sum();
                prop_assert_eq!(total, tok.count(&text));
            }
        }
    }

    #[test]
    fn rechunking_is_stable(body in document(), size in 16usize..300) {
        let doc = narrative(body);
        let Ok(first) = chunk_document(&doc, size) else { return Ok(()) };
        prop_assert_eq!(&first, &chunk_document(&doc, size).unwrap());
        for c in &first {
            let again = split_text(&c.text, size, &WordPunctTokenizer);
            prop_assert_eq!(again.len(), 1);
            prop_assert_eq!(&c.text[again[0].start..again[0].end], c.text.as_str());
        }
    }

    #[test]
    fn small_documents_are_one_chunk(body in prop::collection::vec((piece(), gap()), 1..16)) {
        let body: String = body.into_iter().map(|(p, g)| format!("{p}{g}")).collect();
        let chunks = chunk_document(&narrative(body.clone()), 512).unwrap();
        prop_assert_eq!(chunks.len(), 1);
        prop_assert_eq!(chunks[0].text.as_str(), body.trim());
    }
}
