//! Corpus rewriting under a splitting policy, with an audit manifest.
//!
//! Input is a tokenized corpus, one sentence per line, tokens separated by
//! single spaces. A token in scope is replaced by its components joined with
//! spaces (interfixes stay attached to the preceding component). Every
//! replacement is recorded in the manifest as
//! `line:token TAB original TAB rendering`, with 1-based line and 0-based
//! token numbers, which is enough to restore the input exactly.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::baseline::FrequencyTable;
use crate::segment::Segmentation;
use crate::splitter::{FrequencyBackoff, Method, Scope, SplitPolicy, Splitter};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("the oov policy needs a translation vocabulary")]
    MissingVocabulary,
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessStats {
    pub lines: usize,
    pub tokens: usize,
    pub in_scope_tokens: usize,
    pub split_tokens: usize,
    pub split_types: usize,
    pub analogy_tokens: usize,
    pub frequency_tokens: usize,
}

impl PreprocessStats {
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "lines\t{}", self.lines)?;
        writeln!(w, "tokens\t{}", self.tokens)?;
        writeln!(w, "in_scope_tokens\t{}", self.in_scope_tokens)?;
        writeln!(w, "split_tokens\t{}", self.split_tokens)?;
        writeln!(w, "split_types\t{}", self.split_types)?;
        writeln!(w, "analogy_split_tokens\t{}", self.analogy_tokens)?;
        writeln!(w, "frequency_split_tokens\t{}", self.frequency_tokens)
    }
}

/// Joins components with spaces, interfixes attached to the left.
pub fn render_tokens(seg: &Segmentation) -> String {
    let parts: Vec<String> = seg
        .components
        .iter()
        .map(|c| format!("{}{}", c.text, c.interfix.as_str()))
        .collect();
    parts.join(" ")
}

pub struct Preprocessor<'a> {
    splitter: &'a Splitter<'a>,
    policy: SplitPolicy,
    counts: &'a FrequencyTable,
    vocabulary: Option<&'a HashSet<String>>,
    backoff: Option<FrequencyBackoff<'a>>,
    block_lines: usize,
}

impl<'a> Preprocessor<'a> {
    /// `counts` are the corpus counts used by `rare:N`; `vocabulary` is the
    /// translation vocabulary required by `oov`.
    pub fn new(
        splitter: &'a Splitter<'a>,
        policy: SplitPolicy,
        counts: &'a FrequencyTable,
        vocabulary: Option<&'a HashSet<String>>,
        backoff: Option<FrequencyBackoff<'a>>,
    ) -> Result<Self, PreprocessError> {
        if policy.scope == Scope::OovOnly && vocabulary.is_none() {
            return Err(PreprocessError::MissingVocabulary);
        }
        Ok(Preprocessor {
            splitter,
            policy,
            counts,
            vocabulary,
            backoff,
            block_lines: 4096,
        })
    }

    pub fn in_scope(&self, token: &str) -> bool {
        if token.is_empty() {
            return false;
        }
        match self.policy.scope {
            Scope::All => true,
            Scope::RareBelow(n) => self.counts.count(token) < n,
            Scope::OovOnly => !self.vocabulary.is_some_and(|v| v.contains(token)),
        }
    }

    fn decide(&self, token: &str) -> (Segmentation, Method) {
        self.splitter
            .split_with_backoff(token, &self.policy, self.backoff.as_ref())
    }

    /// Rewrites `input` to `output` and writes the manifest. Lines are
    /// processed in parallel blocks; output order matches input order.
    pub fn run<R: BufRead, W: Write, M: Write>(
        &self,
        input: R,
        output: &mut W,
        manifest: &mut M,
    ) -> Result<PreprocessStats, PreprocessError> {
        let mut stats = PreprocessStats::default();
        let mut cache: HashMap<String, (Segmentation, Method)> = HashMap::new();
        let mut split_types: HashSet<String> = HashSet::new();
        let mut lines = input.lines();
        let mut line_no = 0usize;
        loop {
            let block: Vec<String> = lines.by_ref().take(self.block_lines).collect::<Result<_, _>>()?;
            if block.is_empty() {
                break;
            }

            let mut fresh: Vec<&str> = block
                .iter()
                .flat_map(|l| l.split(' '))
                .filter(|t| self.in_scope(t) && !cache.contains_key(*t))
                .collect();
            fresh.sort_unstable();
            fresh.dedup();
            let decided: Vec<(String, (Segmentation, Method))> =
                fresh.par_iter().map(|t| (t.to_string(), self.decide(t))).collect();
            cache.extend(decided);

            for line in &block {
                line_no += 1;
                stats.lines += 1;
                let mut rendered = Vec::new();
                for (i, token) in line.split(' ').enumerate() {
                    stats.tokens += usize::from(!token.is_empty());
                    if !self.in_scope(token) {
                        rendered.push(token.to_string());
                        continue;
                    }
                    stats.in_scope_tokens += 1;
                    let (seg, method) = &cache[token];
                    if !seg.is_split() {
                        rendered.push(token.to_string());
                        continue;
                    }
                    stats.split_tokens += 1;
                    match method {
                        Method::Analogy => stats.analogy_tokens += 1,
                        Method::Frequency => stats.frequency_tokens += 1,
                        Method::Unsplit => {}
                    }
                    split_types.insert(token.to_string());
                    let r = render_tokens(seg);
                    writeln!(manifest, "{line_no}:{i}\t{token}\t{r}")?;
                    rendered.push(r);
                }
                writeln!(output, "{}", rendered.join(" "))?;
            }
        }
        stats.split_types = split_types.len();
        Ok(stats)
    }
}

/// Restores the original corpus from a split corpus and its manifest.
pub fn reconstruct<R: BufRead, M: BufRead, W: Write>(
    split: R,
    manifest: M,
    out: &mut W,
) -> Result<(), PreprocessError> {
    let mut by_line: HashMap<usize, Vec<(usize, String, usize)>> = HashMap::new();
    for (idx, line) in manifest.lines().enumerate() {
        let line = line?;
        let bad = |msg: &str| PreprocessError::Manifest {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let mut f = line.split('\t');
        let (Some(pos), Some(orig), Some(rendering), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(bad("expected 3 fields"));
        };
        let (l, t) = pos.split_once(':').ok_or_else(|| bad("position must be line:token"))?;
        let l: usize = l.parse().map_err(|_| bad("bad line number"))?;
        let t: usize = t.parse().map_err(|_| bad("bad token number"))?;
        let width = rendering.split(' ').count();
        by_line.entry(l).or_default().push((t, orig.to_string(), width));
    }
    for (idx, line) in split.lines().enumerate() {
        let line = line?;
        let Some(mut edits) = by_line.remove(&(idx + 1)) else {
            writeln!(out, "{line}")?;
            continue;
        };
        edits.sort_by_key(|e| e.0);
        let tokens: Vec<&str> = line.split(' ').collect();
        let mut restored: Vec<&str> = Vec::with_capacity(tokens.len());
        let mut pos = 0usize;
        let mut edits = edits.iter().peekable();
        let mut original_index = 0usize;
        while pos < tokens.len() {
            match edits.peek() {
                Some((t, orig, width)) if *t == original_index => {
                    restored.push(orig);
                    pos += width;
                    edits.next();
                }
                _ => {
                    restored.push(tokens[pos]);
                    pos += 1;
                }
            }
            original_index += 1;
        }
        writeln!(out, "{}", restored.join(" "))?;
    }
    if let Some(line) = by_line.keys().min() {
        return Err(PreprocessError::Manifest {
            line: 0,
            msg: format!("entries for line {line}, beyond the end of the corpus"),
        });
    }
    Ok(())
}
