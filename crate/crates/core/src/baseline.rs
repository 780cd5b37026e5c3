//! Frequency-based splitting: a word is split when the geometric mean of its
//! parts' corpus counts exceeds the word's own count.
//!
//! Products of counts are compared exactly with big integers, so ties in the
//! geometric mean are detected precisely. Among equal means the segmentation
//! with fewer parts wins, then the one whose part lengths are
//! lexicographically longest from the left (shorter interfixes breaking any
//! remaining tie).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use num_bigint::BigUint;
use thiserror::Error;

use crate::candidates::{upper_first, Interfix, InterfixSet};
use crate::segment::Segmentation;

#[derive(Debug, Error)]
pub enum CountError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// Unigram counts. Absent words count zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = FrequencyTable::default();
        for t in tokens {
            table.add(t.as_ref(), 1);
        }
        table
    }

    /// Counts whitespace-separated tokens of every line.
    pub fn count_corpus<R: BufRead>(reader: R) -> io::Result<Self> {
        let mut table = FrequencyTable::default();
        for line in reader.lines() {
            for token in line?.split_whitespace() {
                table.add(token, 1);
            }
        }
        Ok(table)
    }

    pub fn add(&mut self, word: &str, n: u64) {
        *self.counts.entry(word.to_string()).or_insert(0) += n;
        self.total += n;
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// `word TAB count`, sorted by word.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut entries: Vec<(&String, &u64)> = self.counts.iter().collect();
        entries.sort();
        for (word, count) in entries {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, CountError> {
        let mut table = FrequencyTable::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line.split_once('\t').ok_or_else(|| CountError::Syntax {
                line: i + 1,
                msg: "expected word TAB count".into(),
            })?;
            let count: u64 = count.trim().parse().map_err(|_| CountError::Syntax {
                line: i + 1,
                msg: format!("bad count {count:?}"),
            })?;
            table.add(word, count);
        }
        Ok(table)
    }

    /// Count of a part as it appears inside a word, also trying the form
    /// with its first letter uppercased.
    pub fn part_count(&self, part: &str) -> u64 {
        let direct = self.count(part);
        match upper_first(part) {
            Some(upper) if upper != part => direct.max(self.count(&upper)),
            _ => direct,
        }
    }
}

/// Settings for [`geometric_split`].
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySplitter {
    pub min_part_len: usize,
    pub max_parts: usize,
    pub interfixes: InterfixSet,
}

impl Default for FrequencySplitter {
    fn default() -> Self {
        FrequencySplitter {
            min_part_len: 4,
            max_parts: 4,
            interfixes: InterfixSet::default(),
        }
    }
}

impl FrequencySplitter {
    pub fn split(&self, word: &str, table: &FrequencyTable) -> Segmentation {
        geometric_split(word, table, self.min_part_len, &self.interfixes, self.max_parts)
    }
}

#[derive(Clone, Debug)]
struct Partial {
    product: BigUint,
    /// Alternating part length, interfix length, ..., part length (chars).
    key: Vec<usize>,
    /// `(start, end)` char ranges of parts.
    parts: Vec<(usize, usize)>,
    interfixes: Vec<Interfix>,
}

/// Compares two equal-length keys: part lengths longer first, interfix
/// lengths shorter first.
fn key_order(a: &[usize], b: &[usize]) -> Ordering {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let o = if i % 2 == 0 { y.cmp(x) } else { x.cmp(y) };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// `Less` when `a` is the better segmentation.
fn compare_candidates(
    a_prod: &BigUint,
    a_parts: usize,
    a_key: &[usize],
    b_prod: &BigUint,
    b_parts: usize,
    b_key: &[usize],
) -> Ordering {
    // Geometric mean a > b  <=>  a_prod^b_parts > b_prod^a_parts.
    let lhs = a_prod.pow(b_parts as u32);
    let rhs = b_prod.pow(a_parts as u32);
    rhs.cmp(&lhs)
        .then(a_parts.cmp(&b_parts))
        .then_with(|| key_order(a_key, b_key))
}

/// Best segmentation of `word` into at most `max_parts` parts of at least
/// `min_part_len` characters each, with optional interfixes between parts.
/// Returns the word whole unless that segmentation's geometric mean count
/// strictly exceeds the word's own count.
pub fn geometric_split(
    word: &str,
    table: &FrequencyTable,
    min_part_len: usize,
    interfixes: &InterfixSet,
    max_parts: usize,
) -> Segmentation {
    assert!(min_part_len >= 1, "min_part_len must be at least 1");
    assert!(max_parts >= 2, "max_parts must be at least 2");
    let offsets: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let n = offsets.len() - 1;
    let slice = |a: usize, b: usize| &word[offsets[a]..offsets[b]];
    let interfix_lens: Vec<(Interfix, usize)> = interfixes.iter().map(|i| (i.clone(), i.char_len())).collect();

    // best[k][p]: best way to cover chars 0..p with k + 1 parts.
    let mut best: Vec<Vec<Option<Partial>>> = vec![vec![None; n + 1]; max_parts];
    for p in min_part_len..=n {
        let c = table.part_count(slice(0, p));
        if c > 0 {
            best[0][p] = Some(Partial {
                product: BigUint::from(c),
                key: vec![p],
                parts: vec![(0, p)],
                interfixes: vec![],
            });
        }
    }
    for k in 1..max_parts {
        for q in 0..=n {
            let Some(prev) = best[k - 1][q].clone() else { continue };
            for (interfix, ilen) in &interfix_lens {
                let start = q + ilen;
                if start > n || slice(q, start) != interfix.as_str() {
                    continue;
                }
                for p in (start + min_part_len)..=n {
                    let c = table.part_count(slice(start, p));
                    if c == 0 {
                        continue;
                    }
                    let product = &prev.product * c;
                    let mut key = prev.key.clone();
                    key.push(*ilen);
                    key.push(p - start);
                    let replace = match &best[k][p] {
                        None => true,
                        Some(cur) => {
                            product
                                .cmp(&cur.product)
                                .reverse()
                                .then_with(|| key_order(&key, &cur.key))
                                == Ordering::Less
                        }
                    };
                    if replace {
                        let mut parts = prev.parts.clone();
                        parts.push((start, p));
                        let mut ifx = prev.interfixes.clone();
                        ifx.push(interfix.clone());
                        best[k][p] = Some(Partial {
                            product,
                            key,
                            parts,
                            interfixes: ifx,
                        });
                    }
                }
            }
        }
    }

    let mut winner: Option<(&Partial, usize)> = None;
    for (k, row) in best.iter().enumerate().skip(1) {
        if let Some(cand) = &row[n] {
            let parts = k + 1;
            let better = match winner {
                None => true,
                Some((w, wp)) => {
                    compare_candidates(&cand.product, parts, &cand.key, &w.product, wp, &w.key) == Ordering::Less
                }
            };
            if better {
                winner = Some((cand, parts));
            }
        }
    }

    let Some((w, parts)) = winner else {
        return Segmentation::whole(word);
    };
    let own = BigUint::from(table.part_count(word));
    if w.product <= own.pow(parts as u32) {
        return Segmentation::whole(word);
    }
    let mut components = Vec::with_capacity(parts);
    for (i, &(a, b)) in w.parts.iter().enumerate() {
        let interfix = w.interfixes.get(i).cloned().unwrap_or_default();
        components.push((slice(a, b).to_string(), interfix));
    }
    Segmentation::from_parts(components)
}
