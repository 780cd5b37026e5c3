//! Candidate modifiers and their support sets.
//!
//! A candidate modifier is a vocabulary word of at least `min_prefix_len`
//! characters that is a proper string prefix of other vocabulary words, where
//! the remainder (after an optional interfix) is itself a vocabulary word in
//! its observed casing or with its first letter uppercased.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::embeddings::EmbeddingStore;

pub const DEFAULT_MIN_PREFIX_LEN: usize = 4;

/// Linking element between modifier and head. The empty interfix is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interfix(String);

impl Interfix {
    pub fn empty() -> Self {
        Interfix(String::new())
    }

    pub fn new(s: impl Into<String>) -> Self {
        Interfix(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }
}

/// Rendered as `-` when empty, matching the dump and model formats.
impl fmt::Display for Interfix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&self.0)
        }
    }
}

impl FromStr for Interfix {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s == "-" || s.is_empty() {
            Interfix::empty()
        } else {
            Interfix::new(s)
        })
    }
}

/// Ordered set of allowed interfixes, always including the empty one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfixSet(BTreeSet<Interfix>);

impl InterfixSet {
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set: BTreeSet<Interfix> = items.into_iter().map(|s| s.as_ref().parse().unwrap()).collect();
        set.insert(Interfix::empty());
        InterfixSet(set)
    }

    /// Only the empty interfix.
    pub fn none() -> Self {
        Self::new(Vec::<&str>::new())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interfix> {
        self.0.iter()
    }

    pub fn contains(&self, i: &Interfix) -> bool {
        self.0.contains(i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `{ε, s, es}`.
impl Default for InterfixSet {
    fn default() -> Self {
        InterfixSet::new(["s", "es"])
    }
}

impl fmt::Display for InterfixSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// `s` with its first character uppercased, when that maps to exactly one
/// character. Returns `None` if no single-character uppercase form exists.
pub fn upper_first(s: &str) -> Option<String> {
    let mut chars = s.chars();
    let first = chars.next()?;
    let mut upper = first.to_uppercase();
    let u = upper.next()?;
    if upper.next().is_some() {
        return None;
    }
    let mut out = String::with_capacity(s.len());
    out.push(u);
    out.push_str(chars.as_str());
    Some(out)
}

/// Byte trie over a word list answering "which words are prefixes of this
/// string". Children are kept as sorted edge lists in one flat arena.
#[derive(Clone, Debug)]
pub struct PrefixIndex {
    nodes: Vec<TrieNode>,
    min_prefix_len: usize,
    words: usize,
}

#[derive(Clone, Debug, Default)]
struct TrieNode {
    edges: Vec<(u8, u32)>,
    terminal: bool,
}

impl PrefixIndex {
    pub fn build<I, S>(vocab: I, min_prefix_len: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        assert!(min_prefix_len >= 1, "min_prefix_len must be at least 1");
        let mut index = PrefixIndex {
            nodes: vec![TrieNode::default()],
            min_prefix_len,
            words: 0,
        };
        for word in vocab {
            let word = word.as_ref();
            if char_len(word) < min_prefix_len {
                continue;
            }
            let mut node = 0usize;
            for &b in word.as_bytes() {
                node = match index.nodes[node].edges.binary_search_by_key(&b, |e| e.0) {
                    Ok(pos) => index.nodes[node].edges[pos].1 as usize,
                    Err(pos) => {
                        let child = index.nodes.len();
                        index.nodes.push(TrieNode::default());
                        index.nodes[node].edges.insert(pos, (b, child as u32));
                        child
                    }
                };
            }
            if !index.nodes[node].terminal {
                index.nodes[node].terminal = true;
                index.words += 1;
            }
        }
        index
    }

    pub fn min_prefix_len(&self) -> usize {
        self.min_prefix_len
    }

    /// Number of indexed words (those meeting the length minimum).
    pub fn len(&self) -> usize {
        self.words
    }

    pub fn is_empty(&self) -> bool {
        self.words == 0
    }

    pub fn contains(&self, word: &str) -> bool {
        self.walk(word.as_bytes()).is_some_and(|n| self.nodes[n].terminal)
    }

    fn walk(&self, bytes: &[u8]) -> Option<usize> {
        let mut node = 0usize;
        for &b in bytes {
            let edges = &self.nodes[node].edges;
            node = edges[edges.binary_search_by_key(&b, |e| e.0).ok()?].1 as usize;
        }
        Some(node)
    }

    /// Indexed words that are proper prefixes of `word`, shortest first.
    pub fn prefixes<'w>(&self, word: &'w str) -> Vec<&'w str> {
        let bytes = word.as_bytes();
        let mut out = Vec::new();
        let mut node = 0usize;
        for (i, &b) in bytes.iter().enumerate() {
            // Terminals only ever sit at the end of a full word, which is a
            // char boundary, so slicing at `i` is safe whenever one is hit.
            if i > 0 && self.nodes[node].terminal {
                out.push(&word[..i]);
            }
            let edges = &self.nodes[node].edges;
            match edges.binary_search_by_key(&b, |e| e.0) {
                Ok(pos) => node = edges[pos].1 as usize,
                Err(_) => return out,
            }
        }
        out
    }
}

/// One way of reading the remainder of a word after a modifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadVariant<'w> {
    pub interfix: Interfix,
    /// The remainder exactly as it appears in the word.
    pub slice: &'w str,
    /// Forms to look up: the slice itself, then the slice with its first
    /// letter uppercased if that differs.
    pub lookups: Vec<String>,
}

/// All interfix readings of `word` after `modifier` that leave a nonempty
/// remainder. `modifier` must be a prefix of `word`.
pub fn head_variants<'w>(word: &'w str, modifier: &str, interfixes: &InterfixSet) -> Vec<HeadVariant<'w>> {
    let Some(after) = word.strip_prefix(modifier) else {
        return Vec::new();
    };
    let after_offset = word.len() - after.len();
    let mut out = Vec::new();
    for interfix in interfixes.iter() {
        let Some(rest) = after.strip_prefix(interfix.as_str()) else {
            continue;
        };
        if rest.is_empty() {
            continue;
        }
        let start = after_offset + interfix.as_str().len();
        let slice = &word[start..];
        let mut lookups = vec![slice.to_string()];
        if let Some(upper) = upper_first(slice) {
            if upper != slice {
                lookups.push(upper);
            }
        }
        out.push(HeadVariant {
            interfix: interfix.clone(),
            slice,
            lookups,
        });
    }
    out
}

/// A `(head, compound)` pair supporting a modifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SupportPair {
    /// Head as found in the vocabulary (possibly recased).
    pub head: String,
    pub interfix: Interfix,
    pub compound: String,
}

impl SupportPair {
    pub fn new(head: impl Into<String>, interfix: Interfix, compound: impl Into<String>) -> Self {
        SupportPair {
            head: head.into(),
            interfix,
            compound: compound.into(),
        }
    }

    /// The head as it occurs inside the compound, given the modifier.
    pub fn head_slice<'a>(&'a self, modifier: &str) -> Option<&'a str> {
        self.compound
            .strip_prefix(modifier)?
            .strip_prefix(self.interfix.as_str())
    }

    /// Checks `modifier + interfix + slice == compound` where `slice`
    /// equals `head` up to the casing of its first letter.
    pub fn reconstructs(&self, modifier: &str) -> bool {
        let Some(slice) = self.head_slice(modifier) else {
            return false;
        };
        slice == self.head || upper_first(slice).as_deref() == Some(self.head.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModifierCandidate {
    pub modifier: String,
    /// Sorted by compound, then head and interfix.
    pub support: Vec<SupportPair>,
}

impl ModifierCandidate {
    pub fn distinct_compounds(&self) -> usize {
        let mut compounds: Vec<&str> = self.support.iter().map(|p| p.compound.as_str()).collect();
        compounds.dedup();
        compounds.len()
    }
}

/// Counts describing one extraction run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionStats {
    pub vocabulary: usize,
    /// Modifiers with at least one support pair, before filtering.
    pub raw_modifiers: usize,
    /// Modifiers left after dropping those that apply to a single word.
    pub retained_modifiers: usize,
    pub support_pairs: usize,
    /// Retained pairs whose head was only found with its first letter recased.
    pub recased_pairs: usize,
    /// Compounds contributing the same split under both casings of the head;
    /// each casing is counted as a separate pair.
    pub dual_case_heads: usize,
    pub mean_support: f64,
}

impl ExtractionStats {
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "vocabulary\t{}", self.vocabulary)?;
        writeln!(w, "raw_modifiers\t{}", self.raw_modifiers)?;
        writeln!(w, "retained_modifiers\t{}", self.retained_modifiers)?;
        writeln!(w, "support_pairs\t{}", self.support_pairs)?;
        writeln!(w, "recased_pairs\t{}", self.recased_pairs)?;
        writeln!(w, "dual_case_heads\t{}", self.dual_case_heads)?;
        writeln!(w, "mean_support\t{:.4}", self.mean_support)?;
        writeln!(w, "case_variant_counting\tlookup-distinct pairs")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    /// Sorted by modifier.
    pub candidates: Vec<ModifierCandidate>,
    pub stats: ExtractionStats,
}

/// Enumerates candidate modifiers over the store's vocabulary. `prefixes`
/// must index the same vocabulary.
pub fn extract_candidates(store: &EmbeddingStore, prefixes: &PrefixIndex, interfixes: &InterfixSet) -> CandidateSet {
    let shards: Vec<Vec<(String, SupportPair)>> = store
        .words()
        .par_chunks(4096)
        .map(|chunk| {
            let mut found = Vec::new();
            for word in chunk {
                for modifier in prefixes.prefixes(word) {
                    for variant in head_variants(word, modifier, interfixes) {
                        for form in &variant.lookups {
                            if store.contains(form) {
                                found.push((
                                    modifier.to_string(),
                                    SupportPair::new(form.clone(), variant.interfix.clone(), word.clone()),
                                ));
                            }
                        }
                    }
                }
            }
            found
        })
        .collect();

    let mut by_modifier: BTreeMap<String, BTreeSet<SupportPair>> = BTreeMap::new();
    for (modifier, pair) in shards.into_iter().flatten() {
        by_modifier.entry(modifier).or_default().insert(pair);
    }

    let raw_modifiers = by_modifier.len();
    let mut candidates = Vec::new();
    let mut stats = ExtractionStats {
        vocabulary: store.len(),
        raw_modifiers,
        ..Default::default()
    };
    for (modifier, pairs) in by_modifier {
        let mut support: Vec<SupportPair> = pairs.into_iter().collect();
        support.sort_by(|a, b| (&a.compound, &a.head, &a.interfix).cmp(&(&b.compound, &b.head, &b.interfix)));
        let candidate = ModifierCandidate { modifier, support };
        if candidate.distinct_compounds() < 2 {
            continue;
        }
        for pair in &candidate.support {
            if pair.head_slice(&candidate.modifier) != Some(pair.head.as_str()) {
                stats.recased_pairs += 1;
            }
        }
        stats.dual_case_heads += candidate
            .support
            .windows(2)
            .filter(|w| w[0].compound == w[1].compound && w[0].interfix == w[1].interfix)
            .count();
        stats.support_pairs += candidate.support.len();
        candidates.push(candidate);
    }
    stats.retained_modifiers = candidates.len();
    if !candidates.is_empty() {
        stats.mean_support = stats.support_pairs as f64 / candidates.len() as f64;
    }
    CandidateSet { candidates, stats }
}

/// Writes `modifier TAB interfix TAB head TAB compound` lines.
pub fn write_candidates<W: Write>(w: &mut W, candidates: &[ModifierCandidate]) -> io::Result<()> {
    for c in candidates {
        for p in &c.support {
            writeln!(w, "{}\t{}\t{}\t{}", c.modifier, p.interfix, p.head, p.compound)?;
        }
    }
    Ok(())
}
