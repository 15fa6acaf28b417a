//! Phoneme symbol table with a reserved blank at index 0.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Index of the blank symbol in every [`Vocabulary`].
pub const BLANK: usize = 0;

/// Printed form of the blank symbol.
pub const BLANK_SYMBOL: &str = "ε";

/// Ordered phoneme symbol table. Index 0 is always the blank "ε"; all other
/// indices are phonemes. Symbols are unique, non-empty strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from phoneme symbols; the blank is prepended
    /// automatically. At least one phoneme is required.
    pub fn new<I, S>(phonemes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::blank_only();
        for p in phonemes {
            vocab.add_phoneme_strict(p.into())?;
        }
        if vocab.size() < 2 {
            return Err(Error::InvalidVocabulary(
                "at least one phoneme is required besides the blank".into(),
            ));
        }
        Ok(vocab)
    }

    pub(crate) fn blank_only() -> Self {
        let mut index = HashMap::new();
        index.insert(BLANK_SYMBOL.to_string(), BLANK);
        Vocabulary {
            symbols: vec![BLANK_SYMBOL.to_string()],
            index,
        }
    }

    /// Adds a phoneme, rejecting duplicates, empty strings and the blank.
    fn add_phoneme_strict(&mut self, symbol: String) -> Result<usize> {
        if symbol.is_empty() {
            return Err(Error::InvalidVocabulary("empty symbol".into()));
        }
        if symbol == BLANK_SYMBOL {
            return Err(Error::InvalidVocabulary(format!(
                "blank symbol {BLANK_SYMBOL:?} cannot be used as a phoneme"
            )));
        }
        if self.index.contains_key(&symbol) {
            return Err(Error::InvalidVocabulary(format!(
                "duplicate symbol {symbol:?}"
            )));
        }
        let id = self.symbols.len();
        self.index.insert(symbol.clone(), id);
        self.symbols.push(symbol);
        Ok(id)
    }

    /// Adds a phoneme if absent and returns its index; used while ingesting
    /// lexicon files in first-seen order.
    pub(crate) fn intern_phoneme(&mut self, symbol: &str) -> Result<usize> {
        if let Some(&id) = self.index.get(symbol) {
            if id == BLANK {
                return Err(Error::InvalidVocabulary(format!(
                    "blank symbol {BLANK_SYMBOL:?} cannot be used as a phoneme"
                )));
            }
            return Ok(id);
        }
        self.add_phoneme_strict(symbol.to_string())
    }

    /// Number of symbols including the blank.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }
}
