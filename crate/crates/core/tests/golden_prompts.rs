mod common;

use common::read_fixture;
use phenorag_core::promptkit::{
    assemble_base_prompt, assemble_cot_prompt, inject_context, ContextChunk, CONTEXT_OPEN, DEFAULT_WINDOW,
    ORGAN_SYSTEMS,
};
use phenorag_core::Task;

#[test]
fn base_gene_prompt_matches_golden() {
    let note = read_fixture("golden/note.txt");
    let b = assemble_base_prompt(&note, Task::Gene, DEFAULT_WINDOW).unwrap();
    assert_eq!(b.system_message, read_fixture("golden/base_gene.system.txt"));
    assert_eq!(b.user_message, read_fixture("golden/base_gene.user.txt"));
}

#[test]
fn cot_gene_prompt_matches_golden() {
    let note = read_fixture("golden/note.txt");
    let b = assemble_cot_prompt(&note, Task::Gene, DEFAULT_WINDOW).unwrap();
    assert_eq!(b.system_message, read_fixture("golden/cot_gene.system.txt"));
    assert_eq!(b.user_message, read_fixture("golden/cot_gene.user.txt"));
}

#[test]
fn cot_lists_every_category_in_order() {
    let b = assemble_cot_prompt("x", Task::Gene, DEFAULT_WINDOW).unwrap();
    let mut from = 0;
    for name in ORGAN_SYSTEMS {
        let needle = format!("**{name}**");
        let at = b.user_message[from..]
            .find(&needle)
            .unwrap_or_else(|| panic!("{name} missing or out of order"));
        from += at + needle.len();
    }
    assert_eq!(b.user_message.matches("**,**").count(), ORGAN_SYSTEMS.len() - 1);
}

#[test]
fn exactly_ten_block_present() {
    for b in [
        assemble_base_prompt("x", Task::Gene, DEFAULT_WINDOW).unwrap(),
        assemble_cot_prompt("x", Task::Gene, DEFAULT_WINDOW).unwrap(),
    ] {
        let all = format!("{}\n{}", b.system_message, b.user_message);
        assert!(all.contains("EXACTLY 10"));
        let block: String = (1..=10).map(|i| format!("{i}. 'Gene{i}'\n")).collect();
        assert!(all.contains(&format!("POTENTIAL_GENES:\n{block}\nEnsure all gene names are in single quotes, and there are exactly 10 in the list. Do not deviate from this format or add any explanations.")));
    }
}

#[test]
fn context_sits_before_note() {
    let note = read_fixture("golden/note.txt");
    let b = assemble_base_prompt(&note, Task::Gene, DEFAULT_WINDOW).unwrap();
    let ctx = [ContextChunk {
        text: "Sotos syndrome. Genes: NSD1.".into(),
        provenance: "HPO HPO:SOTOS".into(),
    }];
    let with = inject_context(&b, &ctx, DEFAULT_WINDOW).unwrap();
    let open = with.user_message.find(CONTEXT_OPEN).unwrap();
    let at_note = with.user_message.find(&note).unwrap();
    assert!(open < at_note);
    assert_eq!(with.dropped_context, 0);
    // outside the block the prompt is unchanged
    let golden = read_fixture("golden/base_gene.user.txt");
    let end = with.user_message.find("END CONTEXT").unwrap();
    let before = &with.user_message[..open];
    assert!(golden.starts_with(before));
    assert!(with.user_message[end..].contains(&golden[before.len()..]));
}
