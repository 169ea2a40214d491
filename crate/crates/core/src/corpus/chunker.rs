use crate::tokenize::{TokenSpan, Tokenizer, WordPunctTokenizer};

use super::{Chunk, CorpusError, KnowledgeDoc};

pub const MIN_CHUNK_SIZE: usize = 16;

/// A contiguous token range of some text, with its byte span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextPiece {
    pub start: usize,
    pub end: usize,
    pub token_count: usize,
}

// Boundary levels, coarsest first. A boundary before token i has the
// strongest level its preceding gap qualifies for.
const HARD: u8 = 0;
const WORD: u8 = 1;
const SENTENCE: u8 = 2;
const PARAGRAPH: u8 = 3;

/// Splits `text` into pieces of at most `chunk_size` tokens.
///
/// Splitting is recursive: a span that is over budget is cut at paragraph
/// breaks, then sentence ends (or single line breaks), then whitespace, and
/// finally between arbitrary tokens. At each level adjacent pieces are packed
/// greedily, so a chunk only ends at a boundary when the next piece would
/// not fit.
pub fn split_text(text: &str, chunk_size: usize, tokenizer: &dyn Tokenizer) -> Vec<TextPiece> {
    let spans = tokenizer.spans(text);
    if spans.is_empty() {
        return Vec::new();
    }
    let levels = boundary_levels(text, &spans);
    let budget = chunk_size.max(1);
    let mut ranges = Vec::new();
    split_range(&levels, 0, spans.len(), PARAGRAPH, budget, &mut ranges);
    ranges
        .into_iter()
        .map(|(lo, hi)| TextPiece {
            start: spans[lo].start,
            end: spans[hi - 1].end,
            token_count: hi - lo,
        })
        .collect()
}

fn boundary_levels(text: &str, spans: &[TokenSpan]) -> Vec<u8> {
    let mut levels = vec![HARD; spans.len()];
    for i in 1..spans.len() {
        let gap = &text[spans[i - 1].end..spans[i].start];
        if gap.is_empty() {
            continue;
        }
        let newlines = gap.matches('\n').count();
        levels[i] = if newlines >= 2 {
            PARAGRAPH
        } else if newlines == 1 || matches!(spans[i - 1].text(text), "." | "!" | "?") {
            SENTENCE
        } else {
            WORD
        };
    }
    levels
}

fn split_range(
    levels: &[u8],
    lo: usize,
    hi: usize,
    level: u8,
    budget: usize,
    out: &mut Vec<(usize, usize)>,
) {
    if hi - lo <= budget {
        out.push((lo, hi));
        return;
    }
    if level == HARD {
        let mut s = lo;
        while s < hi {
            let e = (s + budget).min(hi);
            out.push((s, e));
            s = e;
        }
        return;
    }

    let mut pieces = Vec::new();
    let mut s = lo;
    for (i, &l) in levels.iter().enumerate().take(hi).skip(lo + 1) {
        if l >= level {
            pieces.push((s, i));
            s = i;
        }
    }
    pieces.push((s, hi));
    if pieces.len() == 1 {
        split_range(levels, lo, hi, level - 1, budget, out);
        return;
    }

    let mut current: Option<(usize, usize)> = None;
    for (ps, pe) in pieces {
        if pe - ps > budget {
            if let Some(c) = current.take() {
                out.push(c);
            }
            split_range(levels, ps, pe, level - 1, budget, out);
            continue;
        }
        current = match current {
            Some((cs, _)) if pe - cs <= budget => Some((cs, pe)),
            Some(c) => {
                out.push(c);
                Some((ps, pe))
            }
            None => Some((ps, pe)),
        };
    }
    if let Some(c) = current {
        out.push(c);
    }
}

/// Chunks a document with the default tokenizer.
pub fn chunk_document(doc: &KnowledgeDoc, chunk_size: usize) -> Result<Vec<Chunk>, CorpusError> {
    chunk_document_with(doc, chunk_size, &WordPunctTokenizer)
}

pub fn chunk_document_with(
    doc: &KnowledgeDoc,
    chunk_size: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<Chunk>, CorpusError> {
    if chunk_size < MIN_CHUNK_SIZE {
        return Err(CorpusError::InvalidChunkSize(chunk_size));
    }
    let text = doc.text();
    let pieces = split_text(&text, chunk_size, tokenizer);
    if pieces.is_empty() {
        return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
    }
    Ok(pieces
        .into_iter()
        .enumerate()
        .map(|(ordinal, p)| Chunk {
            chunk_id: Chunk::make_id(&doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            source: doc.source,
            text: text[p.start..p.end].to_string(),
            token_count: p.token_count,
            ordinal,
            start: p.start,
            end: p.end,
        })
        .collect())
}
