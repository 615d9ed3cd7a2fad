//! Dictionary entity linking: greedy longest-match over normalized token windows.

use crate::kg_store::{AliasEntry, Graph, NodeId};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("expected exactly 4 answer options, got {0}")]
    OptionCount(usize),
    #[error("{path}: {message}")]
    AliasFile { path: String, message: String },
}

/// Lowercases, turns every non-alphanumeric character into a separator,
/// collapses runs of separators and trims.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (_, _, token) in tokens(text) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&token);
    }
    out
}

/// Tokens of `text` as `(start_char, end_char, lowercased token)`.
fn tokens(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut count = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = i;
            }
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push((start, i, std::mem::take(&mut current)));
        }
        count = i + 1;
    }
    if !current.is_empty() {
        out.push((start, count, current));
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, BTreeSet<NodeId>>,
    max_token_span: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntityMention {
    pub surface: String,
    /// Character offsets, `start < end`.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkResult {
    pub mention: EntityMention,
    /// Ascending, non-empty.
    pub candidates: Vec<NodeId>,
}

/// Something that maps free text onto graph nodes.
pub trait EntityLinker: Sync {
    fn link(&self, text: &str) -> Vec<LinkResult>;

    /// Candidate nodes for a whole answer string.
    fn link_answer(&self, text: &str) -> BTreeSet<NodeId> {
        self.link(text).into_iter().flat_map(|r| r.candidates).collect()
    }
}

impl Lexicon {
    pub fn build(graph: &Graph) -> Self {
        let mut lex = Lexicon::default();
        for node in graph.nodes() {
            for surface in std::iter::once(&node.name).chain(node.aliases.iter()) {
                lex.insert(surface, node.id);
            }
        }
        lex
    }

    fn insert(&mut self, surface: &str, id: NodeId) {
        let key = normalize(surface);
        if key.is_empty() {
            return;
        }
        let span = key.split(' ').count();
        self.max_token_span = self.max_token_span.max(span);
        self.entries.entry(key).or_default().insert(id);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_token_span(&self) -> usize {
        self.max_token_span
    }

    pub fn lookup(&self, surface: &str) -> Option<&BTreeSet<NodeId>> {
        self.entries.get(&normalize(surface))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl EntityLinker for Lexicon {
    fn link(&self, text: &str) -> Vec<LinkResult> {
        extract_and_map(text, self)
    }

    fn link_answer(&self, text: &str) -> BTreeSet<NodeId> {
        match self.lookup(text) {
            Some(ids) => ids.clone(),
            None => extract_and_map(text, self).into_iter().flat_map(|r| r.candidates).collect(),
        }
    }
}

pub fn build_lexicon(graph: &Graph) -> Lexicon {
    Lexicon::build(graph)
}

/// Scans `text` left to right; at each token takes the longest window (up to
/// the lexicon's span) whose normalized form is a key, then skips past it.
pub fn extract_and_map(text: &str, lexicon: &Lexicon) -> Vec<LinkResult> {
    let toks = tokens(text);
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut key = String::new();
    while i < toks.len() {
        let longest = lexicon.max_token_span.min(toks.len() - i);
        let mut matched = None;
        for len in (1..=longest).rev() {
            key.clear();
            for (k, (_, _, t)) in toks[i..i + len].iter().enumerate() {
                if k > 0 {
                    key.push(' ');
                }
                key.push_str(t);
            }
            if let Some(ids) = lexicon.entries.get(&key) {
                matched = Some((len, ids));
                break;
            }
        }
        match matched {
            Some((len, ids)) => {
                let start = toks[i].0;
                let end = toks[i + len - 1].1;
                out.push(LinkResult {
                    mention: EntityMention { surface: chars[start..end].iter().collect(), start, end },
                    candidates: ids.iter().copied().collect(),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Links each of exactly four option strings as a whole; options that do not
/// link yield an empty set.
pub fn map_answer_options<S: AsRef<str>>(options: &[S], lexicon: &Lexicon) -> Result<Vec<BTreeSet<NodeId>>, LinkError> {
    if options.len() != 4 {
        return Err(LinkError::OptionCount(options.len()));
    }
    Ok(options.iter().map(|o| lexicon.lookup(o.as_ref()).cloned().unwrap_or_default()).collect())
}

/// Reads a two-column `(alias, canonical node name)` table. A first row of
/// `alias<delim>canonical` is treated as a header.
pub fn read_alias_file(path: &Path, delimiter: u8) -> Result<Vec<AliasEntry>, LinkError> {
    let err = |message: String| LinkError::AliasFile { path: path.display().to_string(), message };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(format!("line {}: expected 2 columns, found {}", i + 1, rec.len())));
        }
        if i == 0 && rec[0].trim() == "alias" && rec[1].trim() == "canonical" {
            continue;
        }
        out.push(AliasEntry { alias: rec[0].trim().to_string(), canonical: rec[1].trim().to_string() });
    }
    Ok(out)
}
