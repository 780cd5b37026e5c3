//! Gold-standard scoring, ambiguity bucketing and the synthetic corpus
//! generator used to test the whole pipeline at small scale.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::baseline::FrequencyTable;
use crate::candidates::{char_len, upper_first, Interfix, InterfixSet, PrefixIndex};
use crate::embeddings::{norm, EmbeddingError, EmbeddingStore};
use crate::segment::Segmentation;
use crate::splitter::SplitDecision;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("gold line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("gold file has no entries")]
    EmptyGold,
    #[error("{predicted} predictions for {gold} gold entries")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("entry {index}: prediction for {predicted:?} paired with gold compound {gold:?}")]
    Mismatch {
        index: usize,
        gold: String,
        predicted: String,
    },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// A compound with its reference binary split.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GoldEntry {
    pub compound: String,
    pub modifier: String,
    pub head: String,
    pub interfix: Interfix,
}

/// Equal, or equal after lowercasing the first character of both.
fn eq_fold_first(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let (mut ca, mut cb) = (a.chars(), b.chars());
    match (ca.next(), cb.next()) {
        (Some(x), Some(y)) => x.to_lowercase().eq(y.to_lowercase()) && ca.as_str() == cb.as_str(),
        _ => false,
    }
}

impl GoldEntry {
    /// Checks that `modifier + interfix + head` spells `compound`, allowing
    /// the first letters of modifier and head to differ in case. With no
    /// interfix given, whatever lies between modifier and head is taken as
    /// the interfix.
    pub fn new(compound: &str, modifier: &str, head: &str, interfix: Option<Interfix>) -> Result<Self, String> {
        if modifier.is_empty() || head.is_empty() {
            return Err("empty modifier or head".into());
        }
        let m_end = compound
            .char_indices()
            .nth(char_len(modifier))
            .map_or(compound.len(), |(i, _)| i);
        if !eq_fold_first(&compound[..m_end], modifier) {
            return Err(format!("{compound:?} does not start with {modifier:?}"));
        }
        let rest = &compound[m_end..];
        let interfix = match interfix {
            Some(i) => i,
            None => {
                let h = char_len(head);
                let n = char_len(rest);
                if n < h {
                    return Err(format!("{compound:?} is too short for {modifier:?} + {head:?}"));
                }
                let cut = rest.char_indices().nth(n - h).map_or(rest.len(), |(i, _)| i);
                Interfix::new(&rest[..cut])
            }
        };
        let Some(tail) = rest.strip_prefix(interfix.as_str()) else {
            return Err(format!("interfix {interfix} not found after {modifier:?}"));
        };
        if !eq_fold_first(tail, head) {
            return Err(format!(
                "{modifier:?} + {interfix} + {head:?} does not spell {compound:?}"
            ));
        }
        Ok(GoldEntry {
            compound: compound.to_string(),
            modifier: modifier.to_string(),
            head: head.to_string(),
            interfix,
        })
    }

    /// Character offset of the head in the compound.
    pub fn head_start(&self) -> usize {
        char_len(&self.modifier) + self.interfix.char_len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoldMode {
    /// Any malformed line is an error.
    Strict,
    /// Malformed lines are skipped and reported.
    Lenient,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoldSet {
    pub entries: Vec<GoldEntry>,
    /// Entries dropped because the modifier is shorter than the minimum.
    pub short_filtered: usize,
    /// Malformed lines skipped in lenient mode, with line numbers.
    pub rejected: Vec<(usize, String)>,
}

/// Parses `compound TAB modifier TAB head [TAB interfix]`.
pub fn parse_gold_line(line: &str) -> Result<GoldEntry, String> {
    let f: Vec<&str> = line.split('\t').collect();
    match f.as_slice() {
        [c, m, h] => GoldEntry::new(c, m, h, None),
        [c, m, h, i] => GoldEntry::new(c, m, h, Some(i.parse().expect("interfix parse is infallible"))),
        _ => Err(format!("expected 3 or 4 tab-separated fields, found {}", f.len())),
    }
}

/// Reads a gold file, keeping entries whose modifier has at least
/// `min_prefix_len` characters. Blank lines and `#` comments are skipped.
pub fn load_gold<R: BufRead>(reader: R, min_prefix_len: usize, mode: GoldMode) -> Result<GoldSet, EvalError> {
    let mut set = GoldSet::default();
    let mut seen = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        seen += 1;
        match parse_gold_line(line) {
            Ok(e) if char_len(&e.modifier) < min_prefix_len => set.short_filtered += 1,
            Ok(e) => set.entries.push(e),
            Err(msg) if mode == GoldMode::Lenient => set.rejected.push((idx + 1, msg)),
            Err(msg) => return Err(EvalError::Malformed { line: idx + 1, msg }),
        }
    }
    if seen == 0 {
        return Err(EvalError::EmptyGold);
    }
    Ok(set)
}

/// A predicted segmentation reduced to its boundary offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub word: String,
    /// Character offsets at which non-initial components start.
    pub boundaries: Vec<usize>,
}

impl Prediction {
    pub fn unsplit(word: &str) -> Self {
        Prediction {
            word: word.to_string(),
            boundaries: Vec::new(),
        }
    }

    pub fn from_segmentation(word: &str, seg: &Segmentation) -> Self {
        Prediction {
            word: word.to_string(),
            boundaries: seg.boundaries(),
        }
    }

    pub fn is_split(&self) -> bool {
        !self.boundaries.is_empty()
    }
}

impl From<&SplitDecision> for Prediction {
    fn from(d: &SplitDecision) -> Self {
        Prediction {
            word: d.word.clone(),
            boundaries: d.head_start().into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_total: usize,
    pub n_split: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub coverage: f64,
    pub buckets: Vec<(String, EvalReport)>,
}

impl EvalReport {
    pub fn from_counts(n_total: usize, n_split: usize, n_correct: usize) -> Self {
        assert!(n_correct <= n_split && n_split <= n_total);
        let frac = |n: usize| if n_total == 0 { 0.0 } else { n as f64 / n_total as f64 };
        EvalReport {
            n_total,
            n_split,
            n_correct,
            accuracy: frac(n_correct),
            coverage: frac(n_split),
            buckets: Vec::new(),
        }
    }

    pub fn write_table<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "{:<12} {:>8} {:>8} {:>8} {:>9} {:>9}",
            "set", "total", "split", "correct", "acc%", "cov%"
        )?;
        let row = |w: &mut W, label: &str, r: &EvalReport| {
            writeln!(
                w,
                "{:<12} {:>8} {:>8} {:>8} {:>9.2} {:>9.2}",
                label,
                r.n_total,
                r.n_split,
                r.n_correct,
                100.0 * r.accuracy,
                100.0 * r.coverage
            )
        };
        row(w, "all", self)?;
        for (label, b) in &self.buckets {
            row(w, label, b)?;
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "set\tn_total\tn_split\tn_correct\taccuracy\tcoverage")?;
        let row = |w: &mut W, label: &str, r: &EvalReport| {
            writeln!(
                w,
                "{label}\t{}\t{}\t{}\t{}\t{}",
                r.n_total, r.n_split, r.n_correct, r.accuracy, r.coverage
            )
        };
        row(w, "all", self)?;
        for (label, b) in &self.buckets {
            row(w, label, b)?;
        }
        Ok(())
    }
}

fn check_pairing(predictions: &[Prediction], gold: &[GoldEntry]) -> Result<(), EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predicted: predictions.len(),
        });
    }
    for (index, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.word != g.compound {
            return Err(EvalError::Mismatch {
                index,
                gold: g.compound.clone(),
                predicted: p.word.clone(),
            });
        }
    }
    Ok(())
}

/// Accuracy and coverage of predictions paired positionally with gold
/// entries. A prediction is correct when one of its boundaries falls where
/// the gold head starts; where the interfix is attached does not matter.
pub fn score(predictions: &[Prediction], gold: &[GoldEntry]) -> Result<EvalReport, EvalError> {
    check_pairing(predictions, gold)?;
    let (mut split, mut correct) = (0, 0);
    for (p, g) in predictions.iter().zip(gold) {
        if p.is_split() {
            split += 1;
            if p.boundaries.contains(&g.head_start()) {
                correct += 1;
            }
        }
    }
    Ok(EvalReport::from_counts(gold.len(), split, correct))
}

/// [`score`] overall plus one sub-report per bucket key, in key order.
pub fn score_by_bucket<K, F>(predictions: &[Prediction], gold: &[GoldEntry], bucket: F) -> Result<EvalReport, EvalError>
where
    K: Ord + fmt::Display,
    F: Fn(&GoldEntry) -> K,
{
    let mut report = score(predictions, gold)?;
    let mut groups: BTreeMap<K, (Vec<Prediction>, Vec<GoldEntry>)> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(gold) {
        let slot = groups.entry(bucket(g)).or_default();
        slot.0.push(p.clone());
        slot.1.push(g.clone());
    }
    for (k, (p, g)) in groups {
        report.buckets.push((k.to_string(), score(&p, &g)?));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AmbiguityOptions {
    /// Count a prefix that is another counted prefix plus an interfix
    /// (`Einkaufs` after `Einkauf`) only once.
    pub merge_interfix: bool,
    /// Only count prefixes whose remainder is itself in the vocabulary.
    pub require_head: bool,
}

/// Number of potential split points of `word`: proper prefixes present in
/// `vocab` (which fixes the minimum prefix length). Remainders checked under
/// `require_head` are looked up in the same index, as-is and with the first
/// letter uppercased.
pub fn ambiguity_count(word: &str, vocab: &PrefixIndex, interfixes: &InterfixSet, opts: AmbiguityOptions) -> usize {
    let prefixes = vocab.prefixes(word);
    let mut count = 0;
    for &p in &prefixes {
        if opts.merge_interfix
            && interfixes
                .iter()
                .filter(|i| !i.is_empty())
                .any(|i| p.strip_suffix(i.as_str()).is_some_and(|q| prefixes.contains(&q)))
        {
            continue;
        }
        if opts.require_head {
            let rest = &word[p.len()..];
            let found = vocab.contains(rest) || upper_first(rest).is_some_and(|u| vocab.contains(&u));
            if !found {
                continue;
            }
        }
        count += 1;
    }
    count
}

/// Published full-scale figures, printed next to desk-scale results for
/// orientation. They are not asserted anywhere: they depend on a corpus of
/// two billion tokens, 500-dimensional vectors and a licensed gold set.
pub mod reference {
    pub const LABEL: &str = "published reference values (full-scale), not asserted at desk scale";

    /// Mean hit rate (%) by minimum support (rows 4, 6, 10) and rank
    /// threshold (columns 80, 100).
    pub const MEAN_HIT_RATE: [[f64; 2]; 3] = [[26.0, 22.0], [31.0, 26.0], [36.0, 31.0]];
    pub const MEAN_COSINE: [[f64; 2]; 3] = [[0.39, 0.39], [0.43, 0.43], [0.45, 0.45]];
    #[allow(clippy::approx_constant)]
    pub const PERCENT_WITH_PROTOTYPES: [[f64; 2]; 3] = [[8.93, 9.52], [5.13, 5.47], [2.91, 3.14]];
    pub const MEAN_PROTOTYPES: [[f64; 2]; 3] = [[4.20, 4.16], [3.29, 3.30], [2.25, 2.29]];
    pub const GRID_MIN_SUPPORT: [usize; 3] = [4, 6, 10];
    pub const GRID_RANK: [usize; 2] = [80, 100];
    pub const CANDIDATE_PREFIXES: usize = 165_399;

    /// Hit rate (%) at minimum support 6, rank 80: approximate, exact.
    pub const HIT_RATE_APPROX_EXACT: (f64, f64) = (85.9, 60.9);
    /// Same with an additional cosine floor of 0.5.
    pub const HIT_RATE_APPROX_EXACT_COSINE: (f64, f64) = (25.9, 15.0);

    pub const GOLD_ANNOTATED: usize = 54_569;
    pub const GOLD_AFTER_LENGTH_FILTER: usize = 50_651;
    /// Compounds with 2, 3, 4 and 5 potential split points.
    pub const BUCKET_SIZES: [usize; 4] = [18_571, 1_815, 842, 104];

    /// (accuracy %, coverage %) on the full gold set.
    pub const ANALOGY_FULL: (f64, f64) = (27.43, 58.45);
    pub const FREQUENCY_PARTIAL_FULL: (f64, f64) = (18.04, 31.41);
    pub const FREQUENCY_FULL_FULL: (f64, f64) = (6.57, 13.75);
    /// (accuracy %, coverage %) per ambiguity bucket 2..=5.
    pub const ANALOGY_BUCKETS: [(f64, f64); 4] = [(24.94, 56.75), (21.10, 68.37), (22.09, 62.11), (24.04, 69.23)];
    pub const FREQUENCY_PARTIAL_BUCKETS: [(f64, f64); 4] =
        [(13.13, 20.13), (8.04, 18.35), (9.98, 15.91), (9.62, 11.54)];

    /// Corpus splits performed under the oov, rare:20 and all policies.
    pub const SPLITS_ANALOGY: [usize; 3] = [317, 744, 1616];
    pub const SPLITS_FREQUENCY: [usize; 3] = [226, 231, 244];

    pub fn write<W: std::io::Write>(w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# {LABEL}")?;
        let (a, c) = ANALOGY_FULL;
        writeln!(w, "# analogy splitter, full gold set: acc {a:.2} cov {c:.2}")?;
        let (a, c) = FREQUENCY_PARTIAL_FULL;
        writeln!(w, "# frequency splitter, full gold set: acc {a:.2} cov {c:.2}")?;
        for (i, ((aa, ac), (fa, fc))) in ANALOGY_BUCKETS.iter().zip(FREQUENCY_PARTIAL_BUCKETS).enumerate() {
            writeln!(
                w,
                "# ambiguity {}: analogy acc {aa:.2} cov {ac:.2}; frequency acc {fa:.2} cov {fc:.2} (n={})",
                i + 2,
                BUCKET_SIZES[i]
            )?;
        }
        Ok(())
    }
}

/// Parameters of the synthetic corpus.
///
/// Each modifier has `senses_per_modifier` mutually orthogonal directions of
/// norm `direction_norm`. Sense `s` combines with `pairs_per_sense` heads
/// (minus a random reduction of up to `size_spread`); the compound vector is
/// head + direction + Gaussian noise. `unrelated_pairs` further compounds per
/// modifier get a fresh random direction each, and `distractors` standalone
/// words pad the vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_heads: usize,
    pub n_modifiers: usize,
    pub senses_per_modifier: usize,
    pub pairs_per_sense: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub direction_norm: f64,
    pub rng_seed: u64,
    pub size_spread: usize,
    pub unrelated_pairs: usize,
    pub distractors: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_heads: 50,
            n_modifiers: 10,
            senses_per_modifier: 1,
            pairs_per_sense: 12,
            dim: 32,
            noise_sigma: 0.02,
            direction_norm: 1.0,
            rng_seed: 0,
            size_spread: 0,
            unrelated_pairs: 0,
            distractors: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if self.n_heads == 0 || self.n_modifiers == 0 || self.senses_per_modifier == 0 || self.pairs_per_sense == 0 {
            return bad("all counts must be at least 1");
        }
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.senses_per_modifier > self.dim {
            return bad("more senses than dimensions");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(self.direction_norm > 0.0 && self.direction_norm.is_finite()) {
            return bad("direction_norm must be positive");
        }
        if self.size_spread >= self.pairs_per_sense {
            return bad("size_spread must be below pairs_per_sense");
        }
        let per_modifier = self.senses_per_modifier * self.pairs_per_sense + self.unrelated_pairs;
        if per_modifier > self.n_heads {
            return bad("not enough heads for the pairs of one modifier");
        }
        Ok(())
    }
}

/// Which generator sense produced a compound; `None` for unrelated pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseLabel {
    pub compound: String,
    pub modifier: String,
    pub sense: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub store: EmbeddingStore,
    pub gold: Vec<GoldEntry>,
    pub labels: Vec<SenseLabel>,
    /// Planted sense directions per modifier.
    pub directions: BTreeMap<String, Vec<Vec<f64>>>,
    pub frequencies: FrequencyTable,
    pub heads: Vec<String>,
    pub modifiers: Vec<String>,
}

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";

/// Draws distinct consonant-vowel words. Heads and distractors have three
/// syllables, modifiers four, and no short word is a prefix of a long one,
/// so a compound's only vocabulary prefix is its modifier.
struct WordMaker {
    used: HashSet<String>,
    long_prefixes: HashSet<String>,
}

impl WordMaker {
    fn new() -> Self {
        WordMaker {
            used: HashSet::new(),
            long_prefixes: HashSet::new(),
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng, syllables: usize) -> String {
        loop {
            let mut w = String::with_capacity(2 * syllables);
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(rng).unwrap() as char);
                w.push(*VOWELS.choose(rng).unwrap() as char);
            }
            if self.used.contains(&w) {
                continue;
            }
            if syllables == 3 && self.long_prefixes.contains(&w) {
                continue;
            }
            if syllables == 4 && self.used.contains(&w[..6]) {
                continue;
            }
            if syllables == 4 {
                self.long_prefixes.insert(w[..6].to_string());
            }
            self.used.insert(w.clone());
            return w;
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect()
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim, 1.0);
        let n = norm(&v);
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Orthonormalizes in place (modified Gram-Schmidt) and rescales to `len`.
fn orthogonalize(vs: &mut [Vec<f64>], len: f64, rng: &mut ChaCha8Rng) {
    let dim = vs[0].len();
    for i in 0..vs.len() {
        loop {
            for j in 0..i {
                let (done, rest) = vs.split_at_mut(i);
                let d: f64 = rest[0].iter().zip(&done[j]).map(|(a, b)| a * b).sum();
                for (a, b) in rest[0].iter_mut().zip(&done[j]) {
                    *a -= d * b;
                }
            }
            let n = norm(&vs[i]);
            if n > 1e-9 {
                vs[i].iter_mut().for_each(|x| *x /= n);
                break;
            }
            vs[i] = unit(rng, dim);
        }
    }
    for v in vs.iter_mut() {
        v.iter_mut().for_each(|x| *x *= len);
    }
}

fn word_hash(w: &str) -> u64 {
    w.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> u64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp().round() as u64
}

/// Generates a synthetic vocabulary with planted compound structure. The
/// same config always yields the same corpus.
pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus, EvalError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let dim = config.dim;
    let mut maker = WordMaker::new();
    let mut freq = FrequencyTable::default();
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();

    let mut heads = Vec::with_capacity(config.n_heads);
    let mut head_vecs = Vec::with_capacity(config.n_heads);
    for _ in 0..config.n_heads {
        let w = maker.draw(&mut rng, 3);
        let v = unit(&mut rng, dim);
        freq.add(&w, log_uniform(&mut rng, 20.0, 2000.0));
        rows.push((w.clone(), v.clone()));
        heads.push(w);
        head_vecs.push(v);
    }

    let mut modifiers = Vec::with_capacity(config.n_modifiers);
    let mut directions = BTreeMap::new();
    let mut gold = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..config.n_modifiers {
        let m = maker.draw(&mut rng, 4);
        rows.push((m.clone(), unit(&mut rng, dim)));
        freq.add(&m, log_uniform(&mut rng, 20.0, 2000.0));

        let mut senses: Vec<Vec<f64>> = (0..config.senses_per_modifier).map(|_| unit(&mut rng, dim)).collect();
        orthogonalize(&mut senses, config.direction_norm, &mut rng);

        let mut order: Vec<usize> = (0..config.n_heads).collect();
        order.shuffle(&mut rng);
        let mut next_head = order.into_iter();
        let mut plant = |h: usize, dir: &[f64], sense: Option<usize>, rng: &mut ChaCha8Rng| {
            let noise = gaussian(rng, dim, config.noise_sigma);
            let v: Vec<f64> = head_vecs[h]
                .iter()
                .zip(dir)
                .zip(&noise)
                .map(|((a, b), c)| a + b + c)
                .collect();
            let compound = format!("{m}{}", heads[h]);
            freq.add(&compound, log_uniform(rng, 1.0, 100.0));
            gold.push(GoldEntry {
                compound: compound.clone(),
                modifier: m.clone(),
                head: heads[h].clone(),
                interfix: Interfix::empty(),
            });
            labels.push(SenseLabel {
                compound: compound.clone(),
                modifier: m.clone(),
                sense,
            });
            rows.push((compound, v));
        };
        for (s, dir) in senses.iter().enumerate() {
            let cut = if config.size_spread > 0 {
                rng.gen_range(0..=config.size_spread)
            } else {
                0
            };
            for _ in 0..config.pairs_per_sense - cut {
                let h = next_head.next().expect("validated head budget");
                plant(h, dir, Some(s), &mut rng);
            }
        }
        for _ in 0..config.unrelated_pairs {
            let h = next_head.next().expect("validated head budget");
            let mut dir = unit(&mut rng, dim);
            dir.iter_mut().for_each(|x| *x *= config.direction_norm);
            plant(h, &dir, None, &mut rng);
        }
        directions.insert(m.clone(), senses);
        modifiers.push(m);
    }

    for _ in 0..config.distractors {
        let w = maker.draw(&mut rng, 3);
        freq.add(&w, log_uniform(&mut rng, 1.0, 2000.0));
        rows.push((w, unit(&mut rng, dim)));
    }

    let (store, _) = EmbeddingStore::from_rows(dim, rows)?;
    Ok(SynthCorpus {
        store,
        gold,
        labels,
        directions,
        frequencies: freq,
        heads,
        modifiers,
    })
}

/// A copy of a synthetic corpus in which every compound has exactly
/// `level` vocabulary prefixes.
#[derive(Clone, Debug)]
pub struct AmbiguityBucket {
    pub level: usize,
    pub corpus: SynthCorpus,
}

/// Builds one corpus per ambiguity level in `2..=5` from the same base
/// compounds. Level `k` adds the `k - 1` shortest prefixes (4 to 7
/// characters) of every modifier to the vocabulary as standalone words.
/// They are modelled as inflected variants of the modifier: the modifier's
/// corpus count is shared equally among its `k` surface forms, so the
/// modifier form itself gets `1/k` of it. Embedding vectors of the variants
/// are random, drawn from a per-word seed so they do not depend on `level`.
pub fn ambiguity_buckets(config: &SynthConfig, levels: &[usize]) -> Result<Vec<AmbiguityBucket>, EvalError> {
    let base = synth_corpus(config)?;
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(1..=5).contains(&level) {
            return Err(EvalError::Config(format!("ambiguity level {level} outside 1..=5")));
        }
        let mut rows: Vec<(String, Vec<f64>)> = base
            .store
            .words()
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), base.store.row(i).to_vec()))
            .collect();
        let mut freq = FrequencyTable::default();
        let mass: HashMap<&str, u64> = base
            .modifiers
            .iter()
            .map(|m| (m.as_str(), base.frequencies.count(m)))
            .collect();
        for (w, c) in base.frequencies.iter() {
            match mass.get(w) {
                Some(&total) => freq.add(w, (total / level as u64).max(1)),
                None => freq.add(w, c),
            }
        }
        for m in &base.modifiers {
            let total = mass[m.as_str()];
            for len in 4..4 + level - 1 {
                let variant = &m[..len];
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                rng.set_stream(word_hash(variant));
                rows.push((variant.to_string(), unit(&mut rng, config.dim)));
                freq.add(variant, (total / level as u64).max(1));
            }
        }
        let (store, _) = EmbeddingStore::from_rows(config.dim, rows)?;
        out.push(AmbiguityBucket {
            level,
            corpus: SynthCorpus {
                store,
                frequencies: freq,
                ..base.clone()
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::Interfix;
    use std::io::Cursor;

    fn g(c: &str, m: &str, h: &str) -> GoldEntry {
        GoldEntry::new(c, m, h, None).unwrap()
    }

    #[test]
    fn gold_reconstruction() {
        let e = g("Einkaufswagen", "Einkauf", "Wagen");
        assert_eq!(e.interfix, Interfix::new("s"));
        assert_eq!(e.head_start(), 8);
        let e = g("hauptbahnhof", "Haupt", "Bahnhof");
        assert_eq!(e.interfix, Interfix::empty());
        assert!(GoldEntry::new("Hauptziel", "Haupt", "Ziel", Some(Interfix::new("s"))).is_err());
        assert!(GoldEntry::new("Hauptziel", "Neben", "Ziel", None).is_err());
        assert!(GoldEntry::new("Hauptziel", "Haupt", "Zeil", None).is_err());
        assert!(GoldEntry::new("Ziel", "Haupt", "Ziel", None).is_err());
    }

    #[test]
    fn load_filters_and_reports() {
        let text = "Hauptziel\tHaupt\tZiel\nAltbau\tAlt\tBau\n# comment\n\nBundesliga\tBund\tLiga\tes\n";
        let set = load_gold(Cursor::new(text), 4, GoldMode::Strict).unwrap();
        assert_eq!(set.entries.len(), 2);
        assert_eq!(set.short_filtered, 1);
        assert_eq!(set.entries[1].interfix, Interfix::new("es"));

        let bad = "Hauptziel\tHaupt\tZiel\nHauptziel\tHaupt\tMann\n";
        match load_gold(Cursor::new(bad), 4, GoldMode::Strict) {
            Err(EvalError::Malformed { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let set = load_gold(Cursor::new(bad), 4, GoldMode::Lenient).unwrap();
        assert_eq!(set.entries.len(), 1);
        assert_eq!(set.rejected.len(), 1);
        assert_eq!(set.rejected[0].0, 2);

        assert!(matches!(
            load_gold(Cursor::new("\n# only comments\n"), 4, GoldMode::Strict),
            Err(EvalError::EmptyGold)
        ));
    }

    #[test]
    fn scoring_arithmetic() {
        let gold: Vec<GoldEntry> = (0..10)
            .map(|i| g(&format!("haupt{i}ziel"), "haupt", &format!("{i}ziel")))
            .collect();
        let preds: Vec<Prediction> = gold
            .iter()
            .enumerate()
            .map(|(i, e)| match i {
                0..=3 => Prediction {
                    word: e.compound.clone(),
                    boundaries: vec![5],
                },
                4 | 5 => Prediction {
                    word: e.compound.clone(),
                    boundaries: vec![6],
                },
                _ => Prediction::unsplit(&e.compound),
            })
            .collect();
        let r = score(&preds, &gold).unwrap();
        assert_eq!((r.n_total, r.n_split, r.n_correct), (10, 6, 4));
        assert_eq!(r.accuracy, 0.4);
        assert_eq!(r.coverage, 0.6);

        let none: Vec<Prediction> = gold.iter().map(|e| Prediction::unsplit(&e.compound)).collect();
        let r = score(&none, &gold).unwrap();
        assert_eq!((r.accuracy, r.coverage), (0.0, 0.0));

        assert!(matches!(
            score(&none[..3], &gold),
            Err(EvalError::LengthMismatch { .. })
        ));
        let mut swapped = none.clone();
        swapped.swap(0, 1);
        assert!(matches!(
            score(&swapped, &gold),
            Err(EvalError::Mismatch { index: 0, .. })
        ));
    }

    #[test]
    fn interfix_placement_is_irrelevant() {
        let gold = vec![g("Einkaufswagen", "Einkauf", "Wagen")];
        let attached = Segmentation::from_parts([("Einkaufs", Interfix::empty()), ("wagen", Interfix::empty())]);
        let separate = Segmentation::from_parts([("Einkauf", Interfix::new("s")), ("wagen", Interfix::empty())]);
        let wrong = Segmentation::from_parts([("Einkauf", Interfix::empty()), ("swagen", Interfix::empty())]);
        for (seg, want) in [(attached, 1), (separate, 1), (wrong, 0)] {
            let p = Prediction::from_segmentation("Einkaufswagen", &seg);
            assert_eq!(score(&[p], &gold).unwrap().n_correct, want);
        }
    }

    #[test]
    fn buckets_partition_the_total() {
        let gold = vec![
            g("hauptziel", "haupt", "ziel"),
            g("nebenziel", "neben", "ziel"),
            g("hauptmann", "haupt", "mann"),
        ];
        let preds = vec![
            Prediction {
                word: "hauptziel".into(),
                boundaries: vec![5],
            },
            Prediction::unsplit("nebenziel"),
            Prediction {
                word: "hauptmann".into(),
                boundaries: vec![3],
            },
        ];
        let r = score_by_bucket(&preds, &gold, |e| e.modifier.clone()).unwrap();
        assert_eq!(r.buckets.len(), 2);
        assert_eq!(r.buckets[0].0, "haupt");
        assert_eq!((r.buckets[0].1.n_split, r.buckets[0].1.n_correct), (2, 1));
        assert_eq!(r.buckets[1].1.coverage, 0.0);
        let total: usize = r.buckets.iter().map(|(_, b)| b.n_total).sum();
        assert_eq!(total, r.n_total);
        let mut tsv = Vec::new();
        r.write_tsv(&mut tsv).unwrap();
        assert!(String::from_utf8(tsv).unwrap().starts_with("set\tn_total"));
    }

    #[test]
    fn ambiguity_counting() {
        let vocab = PrefixIndex::build(["einkauf", "einkaufs", "wagen", "Wagen"], 4);
        let ifx = InterfixSet::default();
        let count = |opts| ambiguity_count("einkaufswagen", &vocab, &ifx, opts);
        assert_eq!(count(AmbiguityOptions::default()), 2);
        assert_eq!(
            count(AmbiguityOptions {
                merge_interfix: true,
                require_head: false
            }),
            1
        );
        assert_eq!(
            count(AmbiguityOptions {
                merge_interfix: false,
                require_head: true
            }),
            1
        );
        assert_eq!(
            ambiguity_count("zugvogel", &vocab, &ifx, AmbiguityOptions::default()),
            0
        );

        let bigger = PrefixIndex::build(["einkauf", "einkaufs", "wagen", "eink"], 4);
        assert!(ambiguity_count("einkaufswagen", &bigger, &ifx, AmbiguityOptions::default()) >= 2);
    }

    #[test]
    fn generator_is_deterministic_and_consistent() {
        let cfg = SynthConfig {
            unrelated_pairs: 2,
            distractors: 5,
            senses_per_modifier: 2,
            pairs_per_sense: 6,
            ..Default::default()
        };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        let dump = |c: &SynthCorpus| {
            let mut v = Vec::new();
            c.store.write_text(&mut v).unwrap();
            v
        };
        assert_eq!(dump(&a), dump(&b));
        assert_eq!(a.gold, b.gold);
        assert_eq!(a.gold.len(), 10 * (12 + 2));
        assert_eq!(a.store.len(), 50 + 10 + 10 * 14 + 5);
        for e in &a.gold {
            assert_eq!(format!("{}{}", e.modifier, e.head), e.compound);
            assert!(!e.compound.contains('s'));
        }
        for dirs in a.directions.values() {
            assert!((norm(&dirs[0]) - 1.0).abs() < 1e-12);
            let d: f64 = dirs[0].iter().zip(&dirs[1]).map(|(x, y)| x * y).sum();
            assert!(d.abs() < 1e-12);
        }
        // Only the modifier is a vocabulary prefix of a compound.
        let vocab = PrefixIndex::build(a.store.words(), 4);
        for e in &a.gold {
            assert_eq!(vocab.prefixes(&e.compound), vec![e.modifier.as_str()]);
        }
    }

    #[test]
    fn noiseless_compounds_are_exact() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let c = synth_corpus(&cfg).unwrap();
        for (e, l) in c.gold.iter().zip(&c.labels) {
            let dir = &c.directions[&e.modifier][l.sense.unwrap()];
            let h = c.store.vector(&e.head).unwrap();
            let v = c.store.vector(&e.compound).unwrap();
            for i in 0..cfg.dim {
                assert_eq!(v[i], h[i] + dir[i]);
            }
        }
    }

    #[test]
    fn ambiguity_levels_are_planted() {
        let cfg = SynthConfig {
            n_modifiers: 3,
            ..Default::default()
        };
        let base = synth_corpus(&cfg).unwrap();
        let buckets = ambiguity_buckets(&cfg, &[2, 3, 4, 5]).unwrap();
        for b in &buckets {
            let vocab = PrefixIndex::build(b.corpus.store.words(), 4);
            for e in &b.corpus.gold {
                let n = ambiguity_count(
                    &e.compound,
                    &vocab,
                    &InterfixSet::default(),
                    AmbiguityOptions::default(),
                );
                assert_eq!(n, b.level, "{}", e.compound);
            }
            let m = &b.corpus.modifiers[0];
            let total = base.frequencies.count(m);
            assert_eq!(b.corpus.frequencies.count(m), (total / b.level as u64).max(1));
        }
        assert!(ambiguity_buckets(&cfg, &[6]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig {
            n_heads: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SynthConfig {
            noise_sigma: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SynthConfig {
            n_heads: 11,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SynthConfig::default().validate().is_ok());
    }
}
