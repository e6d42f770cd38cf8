//! Shared text utilities: the backend-side tokenizer and a stable hash.
//!
//! Backends see queries as token sequences. The tokenizer here is the
//! one mask positions are expressed in: lowercase, whitespace-split,
//! punctuation split off into single-character tokens, with the literal
//! `[MASK]` marker kept intact as one token. Evaluation-side token
//! granularity uses plain whitespace tokenization instead (see
//! `evaluation`); the two are intentionally different.

/// The mask marker recognized by templates and the tokenizer.
pub const MASK_TOKEN: &str = "[MASK]";

/// Tokenize `text` for backend consumption.
///
/// `"put clothes in dryer. [MASK] turn on dryer."` becomes
/// `[put, clothes, in, dryer, ., [MASK], turn, on, dryer, .]`.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    basic_tokenize_spans(text)
        .into_iter()
        .map(|(tok, _)| tok)
        .collect()
}

/// Like [`basic_tokenize`] but returns each token's byte span in `text`.
pub fn basic_tokenize_spans(text: &str) -> Vec<(String, std::ops::Range<usize>)> {
    let mut out = Vec::new();
    let mut chunk_start = 0;
    for (i, ch) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if ch.is_whitespace() {
            if i > chunk_start {
                split_chunk(&text[chunk_start..i], chunk_start, &mut out);
            }
            chunk_start = i + ch.len_utf8();
        }
    }
    out
}

fn split_chunk(chunk: &str, offset: usize, out: &mut Vec<(String, std::ops::Range<usize>)>) {
    if chunk == MASK_TOKEN {
        out.push((MASK_TOKEN.to_string(), offset..offset + chunk.len()));
        return;
    }
    let mut run_start: Option<usize> = None;
    for (i, ch) in chunk.char_indices().chain(std::iter::once((chunk.len(), ' '))) {
        if ch.is_alphanumeric() {
            run_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = run_start.take() {
            out.push((
                chunk[start..i].to_lowercase(),
                offset + start..offset + i,
            ));
        }
        if !ch.is_whitespace() {
            out.push((ch.to_string(), offset + i..offset + i + ch.len_utf8()));
        }
    }
}

/// Stable 64-bit FNV-1a hash. Used wherever a hash must not change
/// across runs or toolchain versions (feature-hashed embeddings, the
/// mock backend's deterministic score fallback).
pub fn stable_hash64(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separate the parts so ["ab","c"] != ["a","bc"]
        h ^= 0x1f;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Map a stable hash to a score in [-1, 1].
pub fn hash_score(parts: &[&str]) -> f64 {
    let h = stable_hash64(parts);
    (h as f64 / u64::MAX as f64) * 2.0 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_kept_whole() {
        let toks = basic_tokenize("Clean laundry [MASK] gather dirty clothes.");
        assert_eq!(
            toks,
            vec!["clean", "laundry", "[MASK]", "gather", "dirty", "clothes", "."]
        );
    }

    #[test]
    fn punctuation_split_off() {
        assert_eq!(basic_tokenize("commences-with"), vec!["commences", "-", "with"]);
        assert_eq!(basic_tokenize("dryer."), vec!["dryer", "."]);
    }

    #[test]
    fn spans_point_back_into_text() {
        let text = "put clothes in dryer. [MASK] turn on dryer.";
        for (tok, span) in basic_tokenize_spans(text) {
            let slice = &text[span];
            if tok == MASK_TOKEN {
                assert_eq!(slice, MASK_TOKEN);
            } else {
                assert_eq!(slice.to_lowercase(), tok);
            }
        }
    }

    #[test]
    fn hash_is_stable_and_part_sensitive() {
        assert_eq!(stable_hash64(&["a", "bc"]), stable_hash64(&["a", "bc"]));
        assert_ne!(stable_hash64(&["a", "bc"]), stable_hash64(&["ab", "c"]));
        let s = hash_score(&["anything"]);
        assert!((-1.0..=1.0).contains(&s));
    }
}
