//! Part-of-speech tagging, reduced to the one distinction the corpus report
//! needs: verb or not.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Verb,
    Other,
}

pub trait PosTagger {
    /// Tags a lowercase word. Must be deterministic.
    fn tag(&self, word: &str) -> Tag;
}

impl<F: Fn(&str) -> Tag> PosTagger for F {
    fn tag(&self, word: &str) -> Tag {
        self(word)
    }
}

const VERBS: &str = include_str!("../assets/verbs.txt");
const NON_VERBS: &str = include_str!("../assets/nonverbs.txt");

fn word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Lexicon lookup with suffix fallbacks.
///
/// A word is a verb if it is in the shipped lexicon, if stripping a plural
/// `-s`/`-es` yields a lexicon entry, or if it ends in `-ing` (5+ letters) or
/// `-ed` (4+ letters) and is not on the exception list.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    verbs: HashSet<String>,
    exceptions: HashSet<String>,
}

impl Default for LexiconTagger {
    fn default() -> Self {
        LexiconTagger { verbs: word_list(VERBS), exceptions: word_list(NON_VERBS) }
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, word: &str) -> Tag {
        if self.verbs.contains(word) {
            return Tag::Verb;
        }
        for suffix in ["es", "s"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                if self.verbs.contains(stem) {
                    return Tag::Verb;
                }
            }
        }
        if self.exceptions.contains(word) {
            return Tag::Other;
        }
        let n = word.chars().count();
        if (word.ends_with("ing") && n >= 5) || (word.ends_with("ed") && n >= 4) {
            return Tag::Verb;
        }
        Tag::Other
    }
}

/// Adapter for an external tagger whose decisions were exported as a table.
///
/// The table is tab-separated `word<TAB>tag` lines, where any tag starting
/// with `VB` (Penn Treebank verb tags) counts as a verb. Words missing from
/// the table fall back to the built-in [`LexiconTagger`].
#[derive(Debug, Clone, Default)]
pub struct TableTagger {
    table: HashMap<String, Tag>,
    fallback: LexiconTagger,
}

impl TableTagger {
    pub fn read_from<R: BufRead>(reader: R) -> io::Result<TableTagger> {
        let mut table = HashMap::new();
        for line in reader.lines() {
            let line = line?;
            let mut parts = line.split('\t');
            if let (Some(word), Some(tag)) = (parts.next(), parts.next()) {
                let tag = if tag.trim().starts_with("VB") { Tag::Verb } else { Tag::Other };
                table.insert(word.trim().to_lowercase(), tag);
            }
        }
        Ok(TableTagger { table, fallback: LexiconTagger::default() })
    }
}

impl PosTagger for TableTagger {
    fn tag(&self, word: &str) -> Tag {
        self.table.get(word).copied().unwrap_or_else(|| self.fallback.tag(word))
    }
}

/// Lowercase alphabetic tokens; any non-alphabetic character separates.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}
