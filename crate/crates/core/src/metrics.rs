//! Edit distances and pooled label/phoneme error rates, including the oracle
//! variant selection: the error of the best sequence a pronunciation graph
//! accepts, computed by dynamic programming over (graph node, reference
//! position) rather than by enumeration.

use rayon::prelude::*;

use crate::acceptor::LabelGraph;
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, NBest};
use crate::loss::TargetSequence;
use crate::vocab::{Vocabulary, BLANK};

/// Substitution/insertion/deletion counts of one alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn distance(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    fn add(&mut self, other: &EditCounts) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
    }
}

/// Levenshtein distance with unit costs. Backtrace ties prefer substitution,
/// then deletion, then insertion, so the counts are deterministic.
pub fn edit_distance(reference: &TargetSequence, hypothesis: &TargetSequence) -> EditCounts {
    let r = reference.phonemes();
    let h = hypothesis.phonemes();
    let (m, n) = (r.len(), h.len());
    let mut d = vec![0usize; (m + 1) * (n + 1)];
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    for i in 0..=m {
        d[idx(i, 0)] = i;
    }
    for j in 0..=n {
        d[idx(0, j)] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = d[idx(i - 1, j - 1)] + usize::from(r[i - 1] != h[j - 1]);
            let del = d[idx(i - 1, j)] + 1;
            let ins = d[idx(i, j - 1)] + 1;
            d[idx(i, j)] = sub.min(del).min(ins);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = d[idx(i, j)];
        if i > 0 && j > 0 && here == d[idx(i - 1, j - 1)] + usize::from(r[i - 1] != h[j - 1]) {
            if r[i - 1] != h[j - 1] {
                counts.substitutions += 1;
            }
            i -= 1;
            j -= 1;
        } else if i > 0 && here == d[idx(i - 1, j)] + 1 {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Corpus-level pooled error rate: `100 * sum(distance) / sum(len(ref))`.
pub fn error_rate<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a TargetSequence, &'a TargetSequence)>,
{
    let mut counts = EditCounts::default();
    let mut ref_len = 0usize;
    for (reference, hypothesis) in pairs {
        counts.add(&edit_distance(reference, hypothesis));
        ref_len += reference.len();
    }
    pooled_percent(&counts, ref_len)
}

fn pooled_percent(counts: &EditCounts, ref_len: usize) -> Result<f64> {
    if ref_len == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(100.0 * counts.distance() as f64 / ref_len as f64)
}

#[derive(Clone, Copy)]
struct Cell {
    cost: usize,
    counts: EditCounts,
}

/// Minimum edit distance between the reference and *any* sequence the graph
/// accepts, in time polynomial in `nodes * len(ref)`. Blank nodes are
/// traversed at zero cost and contribute no symbols. Candidate moves are
/// examined in the order substitution/match, deletion, insertion; ties keep
/// the earlier move, so counts are deterministic.
pub fn graph_edit_distance(graph: &LabelGraph, reference: &TargetSequence) -> EditCounts {
    let r = reference.phonemes();
    let m = r.len();
    let n = graph.num_nodes();
    let order = crate::acceptor::topo_order(n, graph.arcs()).expect("label graph is acyclic");
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(src, dst) in graph.arcs() {
        preds[dst].push(src);
    }

    // Row of the virtual start: j reference symbols deleted before emitting
    // anything.
    let start_row: Vec<Cell> = (0..=m)
        .map(|j| Cell {
            cost: j,
            counts: EditCounts {
                deletions: j,
                ..EditCounts::default()
            },
        })
        .collect();

    let mut dp: Vec<Option<Vec<Cell>>> = vec![None; n];
    let better = |cand: Cell, cur: &mut Option<Cell>| {
        if cur.map_or(true, |c| cand.cost < c.cost) {
            *cur = Some(cand);
        }
    };
    for &v in &order {
        // Best incoming row: the virtual start if v is a start node, then
        // predecessors in ascending id order.
        let mut incoming: Vec<Option<Cell>> = vec![None; m + 1];
        if graph.is_start(v) {
            for j in 0..=m {
                better(start_row[j], &mut incoming[j]);
            }
        }
        for &p in &preds[v] {
            if let Some(row) = &dp[p] {
                for j in 0..=m {
                    better(row[j], &mut incoming[j]);
                }
            }
        }
        if incoming.iter().all(|c| c.is_none()) {
            continue; // unreachable node
        }

        let mut row: Vec<Option<Cell>> = vec![None; m + 1];
        let sym = graph.symbol_of(v);
        for j in 0..=m {
            if sym == BLANK {
                if let Some(c) = incoming[j] {
                    better(c, &mut row[j]);
                }
            } else {
                if j > 0 {
                    if let Some(c) = incoming[j - 1] {
                        let miss = usize::from(sym != r[j - 1]);
                        better(
                            Cell {
                                cost: c.cost + miss,
                                counts: EditCounts {
                                    substitutions: c.counts.substitutions + miss,
                                    ..c.counts
                                },
                            },
                            &mut row[j],
                        );
                    }
                }
                if let Some(c) = incoming[j] {
                    better(
                        Cell {
                            cost: c.cost + 1,
                            counts: EditCounts {
                                insertions: c.counts.insertions + 1,
                                ..c.counts
                            },
                        },
                        &mut row[j],
                    );
                }
            }
            // Deleting one more reference symbol is always available.
            if j > 0 {
                if let Some(c) = row[j - 1] {
                    better(
                        Cell {
                            cost: c.cost + 1,
                            counts: EditCounts {
                                deletions: c.counts.deletions + 1,
                                ..c.counts
                            },
                        },
                        &mut row[j],
                    );
                }
            }
        }
        dp[v] = Some(row.into_iter().map(|c| c.expect("row reachable")).collect());
    }

    let mut best: Option<Cell> = None;
    for &f in graph.finals() {
        if let Some(row) = &dp[f] {
            better(row[m], &mut best);
        }
    }
    best.expect("trim graph has a reachable final").counts
}

/// One scored utterance: the spoken words and the reference phonemes.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub words: Vec<String>,
    pub reference: TargetSequence,
}

/// Parses transcript lines `words<TAB>ref phonemes`. Blank lines and `#`
/// comments are ignored; reference phonemes must exist in the vocabulary.
pub fn parse_transcripts(text: &str, vocab: &Vocabulary) -> Result<Vec<Transcript>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let (words_part, ref_part) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `words<TAB>ref phonemes`".into()))?;
        let words: Vec<String> = words_part.split_whitespace().map(String::from).collect();
        if words.is_empty() {
            return Err(parse_err("no words".into()));
        }
        let mut phonemes = Vec::new();
        for tok in ref_part.split_whitespace() {
            let id = vocab
                .index_of(tok)
                .ok_or_else(|| parse_err(format!("unknown phoneme {tok:?}")))?;
            if id == BLANK {
                return Err(parse_err("blank symbol in reference".into()));
            }
            phonemes.push(id);
        }
        out.push(Transcript {
            words,
            reference: TargetSequence::new(phonemes)?,
        });
    }
    Ok(out)
}

/// Pooled oracle error of a corpus at one n-best depth.
#[derive(Debug, Clone, PartialEq)]
pub struct LerReport {
    pub n: NBest,
    pub counts: EditCounts,
    pub ref_len: usize,
}

impl LerReport {
    pub fn ler(&self) -> f64 {
        100.0 * self.counts.distance() as f64 / self.ref_len as f64
    }

    /// `n=<k> ler=<x.x>% S=<s> I=<i> D=<d> ref_len=<m>`
    pub fn report_line(&self) -> String {
        format!(
            "n={} ler={:.1}% S={} I={} D={} ref_len={}",
            self.n,
            self.ler(),
            self.counts.substitutions,
            self.counts.insertions,
            self.counts.deletions,
            self.ref_len
        )
    }
}

/// Oracle label error rate: every transcript is scored against the graph of
/// its top-n pronunciations per word, picking the accepted sequence that
/// minimizes the edit distance; counts are pooled corpus-wide. Utterances
/// are scored in parallel and reduced in input order.
pub fn oracle_ler_report(
    lexicon: &Lexicon,
    transcripts: &[Transcript],
    n: NBest,
) -> Result<LerReport> {
    let per_utt: Vec<Result<(EditCounts, usize)>> = transcripts
        .par_iter()
        .map(|t| {
            let graph = lexicon.words_to_graph(&t.words, n)?;
            Ok((graph_edit_distance(&graph, &t.reference), t.reference.len()))
        })
        .collect();

    let mut missing: Vec<String> = Vec::new();
    let mut counts = EditCounts::default();
    let mut ref_len = 0usize;
    for r in per_utt {
        match r {
            Ok((c, len)) => {
                counts.add(&c);
                ref_len += len;
            }
            Err(Error::UnknownWords(ws)) => missing.extend(ws),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::UnknownWords(missing));
    }
    if ref_len == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(LerReport { n, counts, ref_len })
}

/// Percentage-only wrapper around [`oracle_ler_report`].
pub fn oracle_ler(lexicon: &Lexicon, transcripts: &[Transcript], n: NBest) -> Result<f64> {
    Ok(oracle_ler_report(lexicon, transcripts, n)?.ler())
}
