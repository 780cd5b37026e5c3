//! Greedy analogy-based decompounding.
//!
//! For a word in the vocabulary, every modifier of the model that is a
//! string prefix of it is tried with every interfix reading of the
//! remainder. When the remainder (as-is or with its first letter uppercased)
//! is a vocabulary word, each prototype of the modifier is applied to it and
//! scored against the word itself: the split must rank the word within
//! `max_rank` neighbors of the prediction and, if configured, reach
//! `min_cosine`. Among passing analogies the highest cosine wins, then the
//! better rank, then the longer modifier, then the lexicographically
//! smallest `(modifier, interfix, head, prototype)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::baseline::{FrequencySplitter, FrequencyTable};
use crate::candidates::{char_len, head_variants, Interfix, PrefixIndex, DEFAULT_MIN_PREFIX_LEN};
use crate::embeddings::{add, cosine};
use crate::induction::{PrototypeId, SplitModel};
use crate::neighbors::NeighborIndex;
use crate::segment::{Component, Segmentation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnsplitReason {
    /// No model modifier is a prefix of the word.
    NoPrefix,
    /// The word itself has no vector.
    WordOov,
    /// No remainder long enough to be a head was found in the vocabulary.
    HeadOov,
    /// Heads were found but no analogy passed the thresholds.
    BelowThreshold,
}

impl fmt::Display for UnsplitReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnsplitReason::NoPrefix => "no_prefix",
            UnsplitReason::WordOov => "word_oov",
            UnsplitReason::HeadOov => "head_oov",
            UnsplitReason::BelowThreshold => "below_threshold",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub modifier: String,
    pub interfix: Interfix,
    /// Head as found in the vocabulary.
    pub head: String,
    pub cosine: f64,
    pub rank: usize,
    pub prototype: PrototypeId,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Split(Split),
    Unsplit(UnsplitReason),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDecision {
    pub word: String,
    pub outcome: Outcome,
}

impl SplitDecision {
    pub fn split(&self) -> Option<&Split> {
        match &self.outcome {
            Outcome::Split(s) => Some(s),
            Outcome::Unsplit(_) => None,
        }
    }

    /// Character offset where the head starts, for split decisions.
    pub fn head_start(&self) -> Option<usize> {
        self.split().map(|s| char_len(&s.modifier) + s.interfix.char_len())
    }

    /// The binary segmentation this decision describes.
    pub fn segmentation(&self) -> Segmentation {
        match &self.outcome {
            Outcome::Unsplit(_) => Segmentation::whole(&self.word),
            Outcome::Split(s) => {
                let start = s.modifier.len() + s.interfix.as_str().len();
                Segmentation::from_parts([
                    (s.modifier.clone(), s.interfix.clone()),
                    (self.word[start..].to_string(), Interfix::empty()),
                ])
            }
        }
    }
}

/// Thresholds and length limits applied while splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitterConfig {
    pub max_rank: usize,
    pub min_cosine: Option<f64>,
    pub min_prefix_len: usize,
    pub min_head_len: usize,
}

impl SplitterConfig {
    /// Thresholds taken from the model's induction settings.
    pub fn from_model(model: &SplitModel) -> Self {
        SplitterConfig {
            max_rank: model.config.max_rank,
            min_cosine: model.config.min_cosine,
            min_prefix_len: DEFAULT_MIN_PREFIX_LEN,
            min_head_len: 4,
        }
    }
}

/// Which tokens a corpus pass sends to the splitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Tokens missing from a translation vocabulary.
    OovOnly,
    /// Tokens whose corpus count is below the threshold.
    RareBelow(u64),
    All,
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oov" => Ok(Scope::OovOnly),
            "all" => Ok(Scope::All),
            "rare" => Ok(Scope::RareBelow(20)),
            _ => match s.strip_prefix("rare:") {
                Some(n) => match n.parse::<u64>() {
                    Ok(n) if n >= 1 => Ok(Scope::RareBelow(n)),
                    _ => Err(format!("bad count threshold in {s:?}")),
                },
                None => Err(format!("unknown policy {s:?} (expected oov, rare:N or all)")),
            },
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::OovOnly => f.write_str("oov"),
            Scope::RareBelow(n) => write!(f, "rare:{n}"),
            Scope::All => f.write_str("all"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backoff {
    None,
    Frequency,
}

impl FromStr for Backoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Backoff::None),
            "freq" | "frequency" => Ok(Backoff::Frequency),
            _ => Err(format!("unknown backoff {s:?} (expected none or freq)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitPolicy {
    pub scope: Scope,
    pub backoff: Backoff,
    pub max_depth: usize,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy {
            scope: Scope::All,
            backoff: Backoff::None,
            max_depth: 4,
        }
    }
}

/// Which method produced a segmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Analogy,
    Frequency,
    Unsplit,
}

/// Frequency splitter used when the analogy splitter cannot judge a word.
pub struct FrequencyBackoff<'a> {
    pub table: &'a FrequencyTable,
    pub splitter: FrequencySplitter,
}

pub struct Splitter<'a> {
    model: &'a SplitModel,
    index: &'a NeighborIndex<'a>,
    config: SplitterConfig,
    modifiers: PrefixIndex,
}

struct Candidate<'w> {
    modifier: &'w str,
    interfix: Interfix,
    head: String,
    cosine: f64,
    rank: usize,
    prototype: usize,
}

impl Candidate<'_> {
    /// `Less` when `self` is the better match.
    fn order(&self, other: &Self) -> Ordering {
        other
            .cosine
            .total_cmp(&self.cosine)
            .then(self.rank.cmp(&other.rank))
            .then_with(|| char_len(other.modifier).cmp(&char_len(self.modifier)))
            .then_with(|| self.modifier.cmp(other.modifier))
            .then_with(|| self.interfix.cmp(&other.interfix))
            .then_with(|| self.head.cmp(&other.head))
            .then(self.prototype.cmp(&other.prototype))
    }
}

impl<'a> Splitter<'a> {
    pub fn new(model: &'a SplitModel, index: &'a NeighborIndex<'a>, config: SplitterConfig) -> Self {
        let modifiers = PrefixIndex::build(model.modifiers.keys(), config.min_prefix_len);
        Splitter {
            model,
            index,
            config,
            modifiers,
        }
    }

    pub fn config(&self) -> &SplitterConfig {
        &self.config
    }

    pub fn model(&self) -> &SplitModel {
        self.model
    }

    /// One binary split decision.
    pub fn decompound(&self, word: &str) -> SplitDecision {
        let outcome = self.decide(word);
        SplitDecision {
            word: word.to_string(),
            outcome,
        }
    }

    fn decide(&self, word: &str) -> Outcome {
        let store = self.index.store();
        let Some(word_vec) = store.vector(word) else {
            return Outcome::Unsplit(UnsplitReason::WordOov);
        };
        let prefixes = self.modifiers.prefixes(word);
        if prefixes.is_empty() {
            return Outcome::Unsplit(UnsplitReason::NoPrefix);
        }

        let mut any_head = false;
        let mut best: Option<Candidate<'_>> = None;
        for modifier in prefixes {
            let prototypes = &self.model.modifiers[modifier];
            for variant in head_variants(word, modifier, &self.model.interfixes) {
                if char_len(variant.slice) < self.config.min_head_len {
                    continue;
                }
                for form in &variant.lookups {
                    let Some(head_vec) = store.vector(form) else { continue };
                    any_head = true;
                    for (pi, proto) in prototypes.iter().enumerate() {
                        let predicted = add(head_vec, &proto.direction);
                        let Ok(Some(rank)) = self.index.rank_of(&predicted, word, self.config.max_rank) else {
                            continue;
                        };
                        let Ok(cos) = cosine(&predicted, word_vec) else {
                            continue;
                        };
                        if self.config.min_cosine.is_some_and(|t| cos < t) {
                            continue;
                        }
                        let cand = Candidate {
                            modifier,
                            interfix: variant.interfix.clone(),
                            head: form.clone(),
                            cosine: cos,
                            rank,
                            prototype: pi,
                        };
                        if best.as_ref().is_none_or(|b| cand.order(b) == Ordering::Less) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }

        match best {
            Some(c) => Outcome::Split(Split {
                modifier: c.modifier.to_string(),
                interfix: c.interfix,
                head: c.head,
                cosine: c.cosine,
                rank: c.rank,
                prototype: PrototypeId {
                    modifier: c.modifier.to_string(),
                    index: c.prototype,
                },
            }),
            None if any_head => Outcome::Unsplit(UnsplitReason::BelowThreshold),
            None => Outcome::Unsplit(UnsplitReason::HeadOov),
        }
    }

    /// Splits recursively into modifier and head, up to `max_depth` levels.
    /// Components are slices of `word`, so joining them with their
    /// interfixes gives back `word`.
    pub fn decompound_recursive(&self, word: &str, max_depth: usize) -> Segmentation {
        Segmentation {
            components: self.recurse(word, max_depth),
        }
    }

    fn recurse(&self, word: &str, depth: usize) -> Vec<Component> {
        let whole = || {
            vec![Component {
                text: word.to_string(),
                interfix: Interfix::empty(),
            }]
        };
        if depth == 0 {
            return whole();
        }
        let Outcome::Split(split) = self.decide(word) else {
            return whole();
        };
        let mut left = self.recurse(&split.modifier, depth - 1);
        let slice = &word[split.modifier.len() + split.interfix.as_str().len()..];
        let mut right = self.recurse(&split.head, depth - 1);
        // The head may have been found with a recased first letter.
        if let Some(first) = right.first_mut() {
            let mut chars = first.text.chars();
            chars.next();
            let original = slice.chars().next().expect("head slice is nonempty");
            first.text = std::iter::once(original).chain(chars).collect();
        }
        left.last_mut().expect("at least one component").interfix = split.interfix;
        left.extend(right);
        left
    }

    /// Analogy split with optional fallback to frequency splitting when the
    /// word or every candidate head is out of vocabulary. Rejections by the
    /// analogy thresholds are final.
    pub fn split_with_backoff(
        &self,
        word: &str,
        policy: &SplitPolicy,
        backoff: Option<&FrequencyBackoff<'_>>,
    ) -> (Segmentation, Method) {
        match self.decide(word) {
            Outcome::Split(_) => {
                let seg = self.decompound_recursive(word, policy.max_depth);
                (seg, Method::Analogy)
            }
            Outcome::Unsplit(UnsplitReason::WordOov | UnsplitReason::HeadOov)
                if policy.backoff == Backoff::Frequency =>
            {
                match backoff {
                    Some(b) => {
                        let seg = b.splitter.split(word, b.table);
                        let method = if seg.is_split() {
                            Method::Frequency
                        } else {
                            Method::Unsplit
                        };
                        (seg, method)
                    }
                    None => (Segmentation::whole(word), Method::Unsplit),
                }
            }
            Outcome::Unsplit(_) => (Segmentation::whole(word), Method::Unsplit),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{InterfixSet, SupportPair};
    use crate::embeddings::EmbeddingStore;
    use crate::induction::{direction_vector, InductionConfig, Prototype};
    use crate::neighbors::SearchMode;
    use std::collections::BTreeMap;

    /// Tiny store where `d_haupt = (0, 0, 2, 0)` and `d_bahn = (0, 0, 0, 2)`.
    fn fixture() -> EmbeddingStore {
        let rows: Vec<(&str, Vec<f64>)> = vec![
            ("Ziel", vec![1.0, 0.0, 0.0, 0.0]),
            ("hauptziel", vec![1.0, 0.0, 2.0, 0.0]),
            ("Mann", vec![0.6, 0.8, 0.0, 0.0]),
            ("hauptmann", vec![0.6, 0.8, 2.0, 0.0]),
            ("Hof", vec![0.0, 1.0, 0.0, 0.0]),
            ("Hofe", vec![0.0, 1.0, 0.1, 0.0]),
            ("bahnhofe", vec![0.0, 1.0, 0.1, 2.0]),
            ("Weg", vec![0.8, -0.6, 0.0, 0.0]),
            ("Wege", vec![0.8, -0.6, 0.0, 0.1]),
            ("bahnwege", vec![-0.8, 0.6, 0.0, -1.0]),
            ("hauptbahnhofe", vec![0.0, 1.0, 2.1, 2.0]),
            ("haupt", vec![-1.0, 0.0, 0.5, 0.0]),
            ("bahn", vec![0.0, -1.0, 0.0, 0.5]),
            ("para", vec![0.0, 0.0, -1.0, 1.0]),
            ("dies", vec![-0.5, 0.5, 0.5, -0.5]),
            ("paradies", vec![0.3, 0.3, 0.3, 0.3]),
            ("parazeit", vec![0.9, 0.9, -0.9, 0.1]),
            ("Zeit", vec![0.2, 0.3, 0.1, -0.9]),
        ];
        EmbeddingStore::from_rows(4, rows).unwrap().0
    }

    fn model_for(store: &EmbeddingStore, sources: &[(&str, &str, &str)], config: InductionConfig) -> SplitModel {
        let mut modifiers: BTreeMap<String, Vec<Prototype>> = BTreeMap::new();
        for (modifier, head, compound) in sources {
            let source = SupportPair::new(*head, Interfix::empty(), *compound);
            modifiers.entry(modifier.to_string()).or_default().push(Prototype {
                modifier: modifier.to_string(),
                direction: direction_vector(store, &source).unwrap(),
                evidence: vec![source.clone()],
                source,
                hit_rate: 1.0,
                mean_cosine: 1.0,
            });
        }
        SplitModel {
            modifiers,
            interfixes: InterfixSet::default(),
            config,
            metadata: BTreeMap::new(),
        }
    }

    fn strict() -> InductionConfig {
        InductionConfig {
            max_rank: 1,
            min_cosine: Some(0.95),
            ..Default::default()
        }
    }

    #[test]
    fn analyzes_novel_compound_by_analogy() {
        let store = fixture();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let model = model_for(&store, &[("haupt", "Ziel", "hauptziel")], strict());
        let splitter = Splitter::new(&model, &index, SplitterConfig::from_model(&model));
        let d = splitter.decompound("hauptmann");
        let s = d.split().expect("split");
        assert_eq!(s.modifier, "haupt");
        assert_eq!(s.interfix, Interfix::empty());
        assert_eq!(s.head, "Mann");
        assert_eq!(s.rank, 1);
        assert!((s.cosine - 1.0).abs() < 1e-12);
        assert_eq!(d.segmentation().parts(), vec!["haupt", "mann"]);
        assert_eq!(d.head_start(), Some(5));
    }

    #[test]
    fn unsplit_reasons() {
        let store = fixture();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let model = model_for(
            &store,
            &[("haupt", "Ziel", "hauptziel"), ("para", "Zeit", "parazeit")],
            strict(),
        );
        let splitter = Splitter::new(&model, &index, SplitterConfig::from_model(&model));
        let reason = |w: &str| match splitter.decompound(w).outcome {
            Outcome::Unsplit(r) => r,
            Outcome::Split(s) => panic!("unexpected split {s:?}"),
        };
        assert_eq!(reason("Ziel"), UnsplitReason::NoPrefix);
        assert_eq!(reason("hauptsache"), UnsplitReason::WordOov);
        assert_eq!(reason("paradies"), UnsplitReason::BelowThreshold);
        // "haupt" remainder is empty; no other reading.
        assert_eq!(reason("haupt"), UnsplitReason::NoPrefix);
    }

    #[test]
    fn short_or_missing_heads() {
        let store = fixture();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let model = model_for(&store, &[("bahn", "Hofe", "bahnhofe")], strict());
        let splitter = Splitter::new(&model, &index, SplitterConfig::from_model(&model));
        // "bahnwege" -> "wege"/"Wege" is in the vocabulary, the analogy fails.
        assert_eq!(
            splitter.decompound("bahnwege").outcome,
            Outcome::Unsplit(UnsplitReason::BelowThreshold)
        );
        let mut loose = SplitterConfig::from_model(&model);
        loose.min_head_len = 5;
        let splitter = Splitter::new(&model, &index, loose);
        assert_eq!(
            splitter.decompound("bahnwege").outcome,
            Outcome::Unsplit(UnsplitReason::HeadOov)
        );
    }

    #[test]
    fn recursion_on_heads_and_depth_cap() {
        let store = fixture();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let config = InductionConfig {
            max_rank: 3,
            min_cosine: Some(0.9),
            ..Default::default()
        };
        let model = model_for(
            &store,
            &[("haupt", "Ziel", "hauptziel"), ("bahn", "Hofe", "bahnhofe")],
            config,
        );
        let splitter = Splitter::new(&model, &index, SplitterConfig::from_model(&model));
        let full = splitter.decompound_recursive("hauptbahnhofe", 4);
        assert_eq!(full.parts(), vec!["haupt", "bahn", "hofe"]);
        assert_eq!(full.join(), "hauptbahnhofe");
        let once = splitter.decompound_recursive("hauptbahnhofe", 1);
        assert_eq!(once.parts(), vec!["haupt", "bahnhofe"]);
        assert_eq!(splitter.decompound_recursive("Zeit", 4).parts(), vec!["Zeit"]);
    }

    #[test]
    fn backoff_rules() {
        let store = fixture();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let model = model_for(
            &store,
            &[("haupt", "Ziel", "hauptziel"), ("para", "Zeit", "parazeit")],
            strict(),
        );
        let splitter = Splitter::new(&model, &index, SplitterConfig::from_model(&model));
        let mut table = FrequencyTable::default();
        for (w, c) in [("haupt", 50), ("Sache", 80), ("para", 90), ("Dies", 90), ("dies", 90)] {
            table.add(w, c);
        }
        let backoff = FrequencyBackoff {
            table: &table,
            splitter: FrequencySplitter::default(),
        };
        let on = SplitPolicy {
            backoff: Backoff::Frequency,
            ..Default::default()
        };
        let off = SplitPolicy::default();

        let (seg, method) = splitter.split_with_backoff("hauptsache", &on, Some(&backoff));
        assert_eq!(method, Method::Frequency);
        assert_eq!(seg.parts(), vec!["haupt", "sache"]);
        let (seg, method) = splitter.split_with_backoff("hauptsache", &off, Some(&backoff));
        assert_eq!((seg.len(), method), (1, Method::Unsplit));

        // Below threshold: the frequency splitter would split, but is not asked.
        let (seg, method) = splitter.split_with_backoff("paradies", &on, Some(&backoff));
        assert_eq!((seg.parts(), method), (vec!["paradies"], Method::Unsplit));

        let (seg, method) = splitter.split_with_backoff("hauptmann", &on, Some(&backoff));
        assert_eq!((seg.parts(), method), (vec!["haupt", "mann"], Method::Analogy));
        let (seg, _) = splitter.split_with_backoff("hauptmann", &off, None);
        assert_eq!(seg.parts(), vec!["haupt", "mann"]);
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("oov".parse::<Scope>().unwrap(), Scope::OovOnly);
        assert_eq!("rare:20".parse::<Scope>().unwrap(), Scope::RareBelow(20));
        assert_eq!("all".parse::<Scope>().unwrap(), Scope::All);
        assert!("rare:0".parse::<Scope>().is_err());
        assert!("some".parse::<Scope>().is_err());
        assert_eq!(Scope::RareBelow(7).to_string(), "rare:7");
        assert_eq!("freq".parse::<Backoff>().unwrap(), Backoff::Frequency);
    }
}
