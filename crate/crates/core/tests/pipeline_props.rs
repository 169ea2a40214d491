use std::collections::HashSet;
use std::sync::Arc;

use phenorag_core::instrument::{EventKind, EventLog, RecordingChat, RecordingRetriever};
use phenorag_core::llm::ScriptedMock;
use phenorag_core::pipeline::{parse_cot_reasoning, parse_prediction_list, run_strategy, RunOptions};
use phenorag_core::promptkit::{
    assemble_base_prompt, assemble_cot_prompt, assemble_finalize_prompt, inject_context, ContextChunk, PromptError,
};
use phenorag_core::retrieval::{ContextRetriever, RetrievalError, RetrievedChunk};
use phenorag_core::{ClinicalNote, RetrievalResult, Source, Strategy as Strat, Task};
use proptest::prelude::*;

struct OneChunk;

impl ContextRetriever for OneChunk {
    fn retrieve(&self, _query: &str) -> Result<Vec<RetrievedChunk>, RetrievalError> {
        Ok(vec![RetrievedChunk {
            result: RetrievalResult {
                chunk_id: "HPO:X#00000".into(),
                dense_score: Some(0.5),
                rerank_score: Some(3.0),
                dense_rank: Some(1),
                final_rank: 1,
            },
            doc_id: "HPO:X".into(),
            source: Source::HpoRecord,
            text: "Disease: X\nGenes: ABC1".into(),
        }])
    }
}

fn gene() -> impl Strategy<Value = String> {
    "[A-Z][A-Z0-9]{1,6}"
}

fn list_line() -> impl Strategy<Value = String> {
    prop_oneof![
        (1usize..13, gene()).prop_map(|(n, g)| format!("{n}. '{g}'")),
        (1usize..13, gene()).prop_map(|(n, g)| format!("{n}) \"{g}\"")),
        (1usize..13, gene()).prop_map(|(n, g)| format!("  - {n}. **'{g}'**")),
        gene().prop_map(|g| format!("- {g}")),
        Just("POTENTIAL_GENES:".to_string()),
        Just("Here is my answer.".to_string()),
        Just(String::new()),
        "[a-z ]{0,40}",
    ]
}

fn response() -> impl Strategy<Value = String> {
    prop::collection::vec(list_line(), 0..30).prop_map(|l| l.join("\n"))
}

fn note_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z ,.\n]{1,400}",
        "\\PC{1,200}",
        Just("{{clinical_note}} {{context}} '' REFERENCE CONTEXT: END CONTEXT".to_string()),
    ]
    .prop_filter("non-blank", |s| !s.trim().is_empty())
}

proptest! {
    #[test]
    fn parser_never_exceeds_ten_or_repeats(text in response()) {
        if let Ok((items, degraded)) = parse_prediction_list(&text, Task::Gene) {
            prop_assert!(!items.is_empty() && items.len() <= 10);
            prop_assert_eq!(degraded, items.len() < 10);
            let upper: HashSet<String> = items.iter().map(|s| s.to_uppercase()).collect();
            prop_assert_eq!(upper.len(), items.len());
            for it in &items {
                prop_assert!(text.contains(it.as_str()));
            }
        } else {
            // nothing numbered and quoted follows any marker
            let after = text.find("POTENTIAL_GENES:").map_or("", |i| &text[i..]);
            let entry = |l: &str| {
                let l = l.trim_start_matches([' ', '-']);
                l.starts_with(|c: char| c.is_ascii_digit()) && (l.contains('\'') || l.contains('"'))
            };
            prop_assert!(!after.lines().any(entry));
        }
    }

    #[test]
    fn canonical_lists_round_trip(genes in prop::collection::hash_set(gene(), 10)) {
        let genes: Vec<String> = genes.into_iter().collect();
        let mut text = "POTENTIAL_GENES:\n".to_string();
        for (i, g) in genes.iter().enumerate() {
            text.push_str(&format!("{}. '{}'\n", i + 1, g));
        }
        let (items, degraded) = parse_prediction_list(&text, Task::Gene).unwrap();
        prop_assert!(!degraded);
        prop_assert_eq!(items, genes);
    }

    #[test]
    fn note_is_spliced_verbatim(note in note_text(), task in prop::sample::select(Task::ALL.to_vec())) {
        let builders: [Box<dyn Fn() -> Result<_, PromptError>>; 3] = [
            Box::new(|| assemble_base_prompt(&note, task, 100_000)),
            Box::new(|| assemble_cot_prompt(&note, task, 100_000)),
            Box::new(|| assemble_finalize_prompt(&note, task, "Step 1: x", 100_000)),
        ];
        for b in builders {
            let bundle = b().unwrap();
            prop_assert_eq!(bundle.note(), note.as_str());
            let quoted = format!("'{note}'");
            prop_assert!(bundle.user_message.contains(&quoted));
            let ctx = [ContextChunk { text: "ctx {{clinical_note}}".into(), provenance: "HPO x".into() }];
            let with = inject_context(&bundle, &ctx, 100_000).unwrap();
            prop_assert!(with.user_message.contains(&quoted));
        }
    }

    #[test]
    fn context_never_exceeds_window(
        note in "[a-z ]{1,300}",
        sizes in prop::collection::vec(1usize..400, 0..6),
        window in 300usize..3000,
    ) {
        let ctx: Vec<ContextChunk> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| ContextChunk { text: vec!["tok"; n].join(" "), provenance: format!("OMIM {i}") })
            .collect();
        let Ok(bundle) = assemble_cot_prompt(&note, Task::Gene, window) else {
            return Ok(());
        };
        let with = inject_context(&bundle, &ctx, window).unwrap();
        prop_assert!(with.token_count() <= window);
        prop_assert_eq!(with.context.len() + with.dropped_context, ctx.len());
        prop_assert_eq!(&with.context[..], &ctx[..with.context.len()]);
        if with.dropped_context > 0 {
            let one_more = &ctx[..with.context.len() + 1];
            let over = inject_context(&bundle, one_more, usize::MAX).unwrap();
            prop_assert!(over.token_count() > window);
        }
    }

    #[test]
    fn strategy_event_order(note in "[a-z ]{1,200}", out in response(), strategy in prop::sample::select(Strat::ALL.to_vec())) {
        prop_assume!(!note.trim().is_empty());
        let log = EventLog::new();
        let chat = RecordingChat::new(ScriptedMock::from_entries(vec![], Some(out)).unwrap(), Arc::clone(&log));
        let ret = RecordingRetriever::new(OneChunk, Arc::clone(&log));
        let note = ClinicalNote::unlabeled("n", note);
        let _ = run_strategy(strategy, &note, Task::Gene, &chat, Some(&ret), &RunOptions::default());
        use EventKind::*;
        let want = match strategy {
            Strat::Base | Strat::Cot => vec![LlmCall],
            Strat::Rag | Strat::RagCot => vec![Retrieve, LlmCall],
            Strat::CotRag => vec![LlmCall, Retrieve, LlmCall],
        };
        prop_assert_eq!(log.kinds(), want);
    }
}

#[test]
fn step_one_terms_drive_the_query() {
    let text = "REASONING:\nStep 1:\n- Nervous system: Hypotonia, Areflexia\n- Made up system: Foo\n- **Eye**: none\nStep 2: ok\nStep 5: done\nPOTENTIAL_GENES:\n1. 'A'";
    let r = parse_cot_reasoning(text, Task::Gene).unwrap();
    assert_eq!(r.extracted_terms["Nervous system"], ["Hypotonia", "Areflexia"]);
    assert_eq!(r.extracted_terms["Unclassified"], ["Foo"]);
    assert!(!r.extracted_terms.contains_key("Eye"));
    assert_eq!(r.step(5), "done");
}
