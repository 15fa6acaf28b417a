//! Pronunciation dictionaries with ranked variants per word.
//!
//! File format: one variant per line, `word<TAB>phoneme phoneme ...` or
//! `word<TAB>score<TAB>phoneme phoneme ...`. Blank lines and `#` comments are
//! ignored. Scores are optional but must be used consistently within a word;
//! when present, variants are ordered by descending score, otherwise file
//! order is kept. Duplicate variants are dropped, keeping the first. Scores
//! rank variants for n-best selection only — they never become graph weights.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::acceptor::LabelGraph;
use crate::error::{Error, Result};
use crate::topology::{build_gtc_graph, Pronunciation, WordAlternatives};
use crate::vocab::{Vocabulary, BLANK_SYMBOL};

/// How many top-ranked variants to keep per word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NBest {
    Top(usize),
    All,
}

impl NBest {
    pub fn cap(&self, available: usize) -> usize {
        match *self {
            NBest::Top(n) => n.min(available),
            NBest::All => available,
        }
    }
}

impl fmt::Display for NBest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NBest::Top(n) => write!(f, "{n}"),
            NBest::All => write!(f, "all"),
        }
    }
}

impl FromStr for NBest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(NBest::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(NBest::Top(n)),
            _ => Err(Error::Config(format!(
                "expected a positive count or \"all\", got {s:?}"
            ))),
        }
    }
}

/// One ranked pronunciation of a word.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub pronunciation: Pronunciation,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    word: String,
    variants: Vec<Variant>,
}

/// Immutable pronunciation dictionary; words keep first-seen order, variants
/// keep rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
    vocab: Vocabulary,
}

/// Parses the lexicon format described in the module docs.
pub fn parse_lexicon<R: BufRead>(reader: R) -> Result<Lexicon> {
    struct RawEntry {
        word: String,
        rows: Vec<(Vec<String>, Option<f64>)>,
        scored: bool,
    }

    let mut raw: Vec<RawEntry> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };

        let fields: Vec<&str> = line.split('\t').collect();
        let (word, score, phoneme_field) = match fields.len() {
            2 => (fields[0], None, fields[1]),
            3 => {
                let score: f64 = fields[1]
                    .parse()
                    .ok()
                    .filter(|s: &f64| s.is_finite())
                    .ok_or_else(|| parse_err(format!("malformed score {:?}", fields[1])))?;
                (fields[0], Some(score), fields[2])
            }
            _ => {
                return Err(parse_err(format!(
                    "expected 2 or 3 tab-separated fields, got {}",
                    fields.len()
                )))
            }
        };
        let word = word.trim();
        if word.is_empty() {
            return Err(parse_err("empty word".into()));
        }
        let phonemes: Vec<String> = phoneme_field.split_whitespace().map(String::from).collect();
        if phonemes.is_empty() {
            return Err(parse_err("missing phonemes".into()));
        }
        if phonemes.iter().any(|p| p == BLANK_SYMBOL) {
            return Err(parse_err(format!(
                "blank symbol {BLANK_SYMBOL:?} used as a phoneme"
            )));
        }

        match index.get(word) {
            Some(&i) => {
                if raw[i].scored != score.is_some() {
                    return Err(parse_err(format!(
                        "inconsistent scoring for word {word:?}: every variant must be \
                         scored or none"
                    )));
                }
                raw[i].rows.push((phonemes, score));
            }
            None => {
                index.insert(word.to_string(), raw.len());
                raw.push(RawEntry {
                    word: word.to_string(),
                    rows: vec![(phonemes, score)],
                    scored: score.is_some(),
                });
            }
        }
    }

    // Order variants (stable descending score when scored, file order
    // otherwise) and drop duplicate phoneme sequences keeping the first.
    let mut ordered: Vec<(String, Vec<(Vec<String>, Option<f64>)>)> = Vec::new();
    for entry in raw {
        let mut rows = entry.rows;
        if entry.scored {
            rows.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite"));
        }
        let mut seen: Vec<&Vec<String>> = Vec::new();
        let mut variants = Vec::new();
        for (phonemes, score) in &rows {
            if seen.contains(&phonemes) {
                continue;
            }
            variants.push((phonemes.clone(), *score));
            seen.push(phonemes);
        }
        ordered.push((entry.word, variants));
    }

    // The vocabulary is accumulated in first-seen order over the *final*
    // variant order, which makes serialize-then-reparse the identity.
    let mut vocab = Vocabulary::blank_only();
    let mut entries = Vec::with_capacity(ordered.len());
    let mut index = HashMap::new();
    for (word, rows) in ordered {
        let mut variants = Vec::with_capacity(rows.len());
        for (phonemes, score) in rows {
            let ids = phonemes
                .iter()
                .map(|p| vocab.intern_phoneme(p))
                .collect::<Result<Vec<usize>>>()?;
            variants.push(Variant {
                pronunciation: Pronunciation::new(ids)?,
                score,
            });
        }
        index.insert(word.clone(), entries.len());
        entries.push(Entry { word, variants });
    }
    if entries.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "lexicon has no entries".into(),
        });
    }
    Ok(Lexicon {
        entries,
        index,
        vocab,
    })
}

impl Lexicon {
    /// Builds a lexicon from already-indexed pronunciations; variants are
    /// deduplicated preserving order. Used by the synthetic corpus generator.
    pub fn from_entries(
        words: Vec<(String, Vec<Pronunciation>)>,
        vocab: Vocabulary,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(words.len());
        let mut index = HashMap::new();
        for (word, prons) in words {
            if index.contains_key(&word) {
                return Err(Error::Config(format!("duplicate word {word:?}")));
            }
            let alts = WordAlternatives::new(word.clone(), prons)?;
            let variants = alts
                .variants()
                .iter()
                .map(|p| {
                    if p.phonemes().iter().any(|&s| s >= vocab.size()) {
                        return Err(Error::Mismatch(format!(
                            "pronunciation of {word:?} outside vocabulary"
                        )));
                    }
                    Ok(Variant {
                        pronunciation: p.clone(),
                        score: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            index.insert(word, entries.len());
            entries.push(Entry {
                word: alts.word().to_string(),
                variants,
            });
        }
        if entries.is_empty() {
            return Err(Error::Config("lexicon has no entries".into()));
        }
        Ok(Lexicon {
            entries,
            index,
            vocab,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_words(&self) -> usize {
        self.entries.len()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn variants(&self, word: &str) -> Option<&[Variant]> {
        self.index.get(word).map(|&i| self.entries[i].variants.as_slice())
    }

    /// First `min(n, available)` variants in rank order; fewer than `n` is
    /// not an error.
    pub fn n_best(&self, word: &str, n: NBest) -> Result<Vec<&Pronunciation>> {
        let variants = self
            .variants(word)
            .ok_or_else(|| Error::UnknownWords(vec![word.to_string()]))?;
        Ok(variants[..n.cap(variants.len())]
            .iter()
            .map(|v| &v.pronunciation)
            .collect())
    }

    /// Pronunciation graph of a word sequence from the top-n variants of each
    /// word. Unknown words are aggregated into one error.
    pub fn words_to_graph<S: AsRef<str>>(&self, words: &[S], n: NBest) -> Result<LabelGraph> {
        let mut missing: Vec<String> = words
            .iter()
            .map(|w| w.as_ref())
            .filter(|w| !self.contains(w))
            .map(String::from)
            .collect();
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            return Err(Error::UnknownWords(missing));
        }
        let alternatives = words
            .iter()
            .map(|w| {
                let variants = self.n_best(w.as_ref(), n)?.into_iter().cloned().collect();
                WordAlternatives::new(w.as_ref(), variants)
            })
            .collect::<Result<Vec<_>>>()?;
        build_gtc_graph(&alternatives, self.vocab.size())
    }

    /// Serializes back to the lexicon file format; reparsing the output
    /// reproduces this lexicon exactly.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            for variant in &entry.variants {
                out.push_str(&entry.word);
                out.push('\t');
                if let Some(score) = variant.score {
                    out.push_str(&score.to_string());
                    out.push('\t');
                }
                let symbols: Vec<&str> = variant
                    .pronunciation
                    .phonemes()
                    .iter()
                    .map(|&id| self.vocab.symbol(id))
                    .collect();
                out.push_str(&symbols.join(" "));
                out.push('\n');
            }
        }
        out
    }
}
