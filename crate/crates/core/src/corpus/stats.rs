use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Chunk, CorpusError, CorpusStats, Source};

pub const DEFAULT_BIN_WIDTH: usize = 64;

/// Count of chunks with `lower <= token_count < upper`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: usize,
    pub upper: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

impl LengthSummary {
    fn of(mut lengths: Vec<usize>) -> Option<Self> {
        if lengths.is_empty() {
            return None;
        }
        lengths.sort_unstable();
        let n = lengths.len();
        let sum: u64 = lengths.iter().map(|&l| l as u64).sum();
        let median = if n % 2 == 1 {
            lengths[n / 2] as f64
        } else {
            (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
        };
        Some(LengthSummary {
            count: n,
            mean: sum as f64 / n as f64,
            median,
            min: lengths[0],
            max: lengths[n - 1],
        })
    }
}

pub fn compute_corpus_stats(chunks: &[Chunk]) -> Result<CorpusStats, CorpusError> {
    compute_corpus_stats_with_bin_width(chunks, DEFAULT_BIN_WIDTH)
}

pub fn compute_corpus_stats_with_bin_width(
    chunks: &[Chunk],
    bin_width: usize,
) -> Result<CorpusStats, CorpusError> {
    let bin_width = bin_width.max(1);
    let total = LengthSummary::of(chunks.iter().map(|c| c.token_count).collect())
        .ok_or(CorpusError::EmptyCorpus)?;

    let mut by_source: BTreeMap<Source, Vec<usize>> = BTreeMap::new();
    for c in chunks {
        by_source.entry(c.source).or_default().push(c.token_count);
    }
    let per_source_chunks = by_source.iter().map(|(s, v)| (*s, v.len())).collect();
    let per_source = by_source
        .into_iter()
        .filter_map(|(s, v)| LengthSummary::of(v).map(|sum| (s, sum)))
        .collect();

    let mut histogram: Vec<HistogramBin> = (0..=total.max / bin_width)
        .map(|i| HistogramBin {
            lower: i * bin_width,
            upper: (i + 1) * bin_width,
            count: 0,
        })
        .collect();
    for c in chunks {
        histogram[c.token_count / bin_width].count += 1;
    }

    Ok(CorpusStats {
        total_chunks: total.count,
        per_source_chunks,
        token_count_mean: total.mean,
        token_count_median: total.median,
        min_tokens: total.min,
        max_tokens: total.max,
        histogram,
        per_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chunk(source: Source, n: usize, i: usize) -> Chunk {
        Chunk {
            chunk_id: format!("d{i}#00000"),
            doc_id: format!("d{i}"),
            source,
            text: String::new(),
            token_count: n,
            ordinal: 0,
            start: 0,
            end: 0,
        }
    }

    #[test]
    fn two_elements() {
        let cs = vec![chunk(Source::HpoRecord, 5, 0), chunk(Source::OmimText, 511, 1)];
        let s = compute_corpus_stats(&cs).unwrap();
        assert_eq!(s.token_count_mean, 258.0);
        assert_eq!(s.token_count_median, 258.0);
        assert_eq!((s.min_tokens, s.max_tokens), (5, 511));
        assert_eq!(s.per_source_chunks[&Source::HpoRecord], 1);
        assert_eq!(s.per_source_chunks[&Source::OmimText], 1);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 2);
    }

    #[test]
    fn single_chunk() {
        let s = compute_corpus_stats(&[chunk(Source::OmimText, 100, 0)]).unwrap();
        assert_eq!(s.token_count_mean, 100.0);
        assert_eq!(s.token_count_median, 100.0);
        assert_eq!((s.min_tokens, s.max_tokens), (100, 100));
    }

    #[test]
    fn empty_corpus() {
        assert_eq!(compute_corpus_stats(&[]).unwrap_err(), CorpusError::EmptyCorpus);
    }

    #[test]
    fn odd_median() {
        let cs: Vec<_> = [7, 1, 3].iter().enumerate().map(|(i, &n)| chunk(Source::OmimText, n, i)).collect();
        assert_eq!(compute_corpus_stats(&cs).unwrap().token_count_median, 3.0);
    }
}
