//! Label-graph construction.
//!
//! [`build_ctc_graph`] produces the canonical blank-interleaved topology for a
//! single phoneme sequence. [`parallel`] unions the graphs of alternative
//! pronunciations of one word, [`serial`] concatenates word graphs across a
//! shared boundary blank, and [`build_gtc_graph`] folds a word sequence into
//! the full graph: per word, the variants are put in parallel; the words are
//! then serialized left to right and the result is trimmed. The accepted set
//! is every concatenation of one variant per word.

use std::collections::BTreeSet;

use crate::acceptor::LabelGraph;
use crate::error::{Error, Result};
use crate::vocab::BLANK;

/// Non-empty sequence of non-blank symbol indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pronunciation(Vec<usize>);

impl Pronunciation {
    pub fn new(phonemes: Vec<usize>) -> Result<Self> {
        if phonemes.is_empty() {
            return Err(Error::EmptyPronunciation);
        }
        if phonemes.contains(&BLANK) {
            return Err(Error::InvalidTarget(
                "pronunciation contains the blank symbol".into(),
            ));
        }
        Ok(Pronunciation(phonemes))
    }

    pub fn phonemes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

/// A word together with its ordered, deduplicated pronunciation variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordAlternatives {
    word: String,
    variants: Vec<Pronunciation>,
}

impl WordAlternatives {
    /// Deduplicates variants preserving first occurrence; at least one
    /// variant is required.
    pub fn new(word: impl Into<String>, variants: Vec<Pronunciation>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let variants: Vec<Pronunciation> = variants
            .into_iter()
            .filter(|p| seen.insert(p.clone()))
            .collect();
        if variants.is_empty() {
            return Err(Error::EmptyPronunciation);
        }
        Ok(WordAlternatives {
            word: word.into(),
            variants,
        })
    }

    pub fn word(&self) -> &str {
        &self.word
    }

    pub fn variants(&self) -> &[Pronunciation] {
        &self.variants
    }
}

/// Canonical CTC topology for a single sequence `l1..lL`: blanks interleaved
/// as `b0 n1 b1 .. nL bL` (2L+1 nodes); arcs `b(k-1)->nk`, `nk->bk`, and the
/// skip `nk->n(k+1)` exactly when `lk != l(k+1)`; starts `{b0, n1}`, finals
/// `{nL, bL}`.
pub fn build_ctc_graph(p: &Pronunciation, vocab_size: usize) -> Result<LabelGraph> {
    let labels = p.phonemes();
    if let Some(&s) = labels.iter().find(|&&s| s >= vocab_size) {
        return Err(Error::InvalidGraph(format!(
            "phoneme {s} out of range for vocabulary of {vocab_size}"
        )));
    }
    let l = labels.len();
    let mut symbols = Vec::with_capacity(2 * l + 1);
    symbols.push(BLANK);
    for &lab in labels {
        symbols.push(lab);
        symbols.push(BLANK);
    }
    let label_node = |k: usize| 2 * k + 1; // 0-based k
    let blank_node = |k: usize| 2 * k; // b_k
    let mut arcs = Vec::new();
    for k in 0..l {
        arcs.push((blank_node(k), label_node(k)));
        arcs.push((label_node(k), blank_node(k + 1)));
        if k + 1 < l && labels[k] != labels[k + 1] {
            arcs.push((label_node(k), label_node(k + 1)));
        }
    }
    LabelGraph::new(
        vocab_size,
        symbols,
        arcs,
        vec![blank_node(0), label_node(0)],
        vec![label_node(l - 1), blank_node(l)],
    )
}

/// Disjoint union: accepts the union of the two accepted sets.
pub fn parallel(a: &LabelGraph, b: &LabelGraph) -> Result<LabelGraph> {
    if a.vocab_size() != b.vocab_size() {
        return Err(Error::Mismatch(format!(
            "vocabulary sizes differ: {} vs {}",
            a.vocab_size(),
            b.vocab_size()
        )));
    }
    let off = a.num_nodes();
    let mut symbols = a.symbols().to_vec();
    symbols.extend_from_slice(b.symbols());
    let mut arcs = a.arcs().to_vec();
    arcs.extend(b.arcs().iter().map(|&(s, d)| (s + off, d + off)));
    let mut starts = a.starts().to_vec();
    starts.extend(b.starts().iter().map(|&v| v + off));
    let mut finals = a.finals().to_vec();
    finals.extend(b.finals().iter().map(|&v| v + off));
    LabelGraph::new(a.vocab_size(), symbols, arcs, starts, finals)
}

/// Concatenation: accepts `{x . y : x in a, y in b}`.
///
/// A single boundary blank node is shared between `a`'s finals and `b`'s
/// starts: `a`'s blank finals and `b`'s blank starts merge into it, every
/// final label node of `a` gains an arc into it, and it gains an arc to every
/// start label node of `b`. Direct skip arcs `f -> s` are added exactly when
/// the two labels differ, so identical phonemes across the word boundary are
/// still forced through the blank.
pub fn serial(a: &LabelGraph, b: &LabelGraph) -> Result<LabelGraph> {
    if a.vocab_size() != b.vocab_size() {
        return Err(Error::Mismatch(format!(
            "vocabulary sizes differ: {} vs {}",
            a.vocab_size(),
            b.vocab_size()
        )));
    }
    // Graphs accepting the empty sequence (a blank node both start and final)
    // are not constructible from non-empty pronunciations.
    debug_assert!(!a
        .finals()
        .iter()
        .any(|&f| a.symbol_of(f) == BLANK && a.is_start(f)));
    debug_assert!(!b
        .starts()
        .iter()
        .any(|&s| b.symbol_of(s) == BLANK && b.is_final(s)));

    let merged_a = |v: usize| a.symbol_of(v) == BLANK && a.is_final(v);
    let merged_b = |v: usize| b.symbol_of(v) == BLANK && b.is_start(v);

    // New ids: a's kept nodes in order, then the boundary blank, then b's
    // kept nodes in order.
    let mut map_a = vec![usize::MAX; a.num_nodes()];
    let mut symbols = Vec::new();
    for v in 0..a.num_nodes() {
        if !merged_a(v) {
            map_a[v] = symbols.len();
            symbols.push(a.symbol_of(v));
        }
    }
    let boundary = symbols.len();
    symbols.push(BLANK);
    for v in 0..a.num_nodes() {
        if merged_a(v) {
            map_a[v] = boundary;
        }
    }
    let mut map_b = vec![usize::MAX; b.num_nodes()];
    for v in 0..b.num_nodes() {
        if merged_b(v) {
            map_b[v] = boundary;
        } else {
            map_b[v] = symbols.len();
            symbols.push(b.symbol_of(v));
        }
    }

    let mut arcs = BTreeSet::new();
    for &(s, d) in a.arcs() {
        arcs.insert((map_a[s], map_a[d]));
    }
    for &(s, d) in b.arcs() {
        arcs.insert((map_b[s], map_b[d]));
    }
    for &f in a.finals() {
        if a.symbol_of(f) == BLANK {
            continue;
        }
        arcs.insert((map_a[f], boundary));
        for &s in b.starts() {
            if b.symbol_of(s) != BLANK && b.symbol_of(s) != a.symbol_of(f) {
                arcs.insert((map_a[f], map_b[s]));
            }
        }
    }
    for &s in b.starts() {
        if b.symbol_of(s) != BLANK {
            arcs.insert((boundary, map_b[s]));
        }
    }

    let starts = a.starts().iter().map(|&v| map_a[v]).collect();
    let finals = b.finals().iter().map(|&v| map_b[v]).collect();
    LabelGraph::new(
        a.vocab_size(),
        symbols,
        arcs.into_iter().collect(),
        starts,
        finals,
    )
}

/// Folds a word sequence into its pronunciation graph: variants of each word
/// in parallel, words serialized left to right, result trimmed.
pub fn build_gtc_graph(words: &[WordAlternatives], vocab_size: usize) -> Result<LabelGraph> {
    if words.is_empty() {
        return Err(Error::InvalidGraph("empty word sequence".into()));
    }
    let mut label_wfsa: Option<LabelGraph> = None;
    for word in words {
        let mut word_wfsa: Option<LabelGraph> = None;
        for pron in word.variants() {
            let g = build_ctc_graph(pron, vocab_size)?;
            word_wfsa = Some(match word_wfsa {
                None => g,
                Some(acc) => parallel(&acc, &g)?,
            });
        }
        let word_wfsa = word_wfsa.expect("word has at least one variant");
        label_wfsa = Some(match label_wfsa {
            None => word_wfsa,
            Some(acc) => serial(&acc, &word_wfsa)?,
        });
    }
    label_wfsa.expect("at least one word").trim()
}

/// All distinct phoneme sequences spelled by start-to-final paths (blank
/// nodes contribute nothing). Fails with `LimitExceeded` when more than
/// `limit` distinct sequences exist.
pub fn enumerate_collapsed(
    graph: &LabelGraph,
    limit: usize,
) -> Result<BTreeSet<Vec<usize>>> {
    let n = graph.num_nodes();
    let order = crate::acceptor::topo_order(n, graph.arcs())?;

    // suffixes[v]: distinct sequences spelled by paths from v (inclusive) to
    // some final node. Processing in reverse topological order dedups shared
    // suffixes instead of walking every path.
    let mut suffixes: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); n];
    for &v in order.iter().rev() {
        let mut set = BTreeSet::new();
        if graph.is_final(v) {
            set.insert(Vec::new());
        }
        for w in graph.successors(v) {
            for s in &suffixes[w] {
                set.insert(s.clone());
            }
        }
        if graph.symbol_of(v) != BLANK {
            set = set
                .into_iter()
                .map(|mut s| {
                    s.insert(0, graph.symbol_of(v));
                    s
                })
                .collect();
        }
        if set.len() > limit {
            return Err(Error::LimitExceeded { limit });
        }
        suffixes[v] = set;
    }

    let mut accepted = BTreeSet::new();
    for &s in graph.starts() {
        for seq in &suffixes[s] {
            accepted.insert(seq.clone());
        }
        if accepted.len() > limit {
            return Err(Error::LimitExceeded { limit });
        }
    }
    Ok(accepted)
}
