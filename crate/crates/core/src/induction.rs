//! Prototype induction.
//!
//! For every support pair of a modifier the direction `v(compound) - v(head)`
//! is computed and applied to the heads of the other pairs. A pair is
//! explained (a hit) when its true compound is within `max_rank` neighbors of
//! the prediction and, optionally, within `min_cosine` of it. The direction
//! explaining the most pairs becomes a prototype, its evidence is removed,
//! and the selection repeats until no direction explains `min_support` of
//! the remaining pairs.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::candidates::{extract_candidates, CandidateSet, InterfixSet, ModifierCandidate, PrefixIndex, SupportPair};
use crate::embeddings::{add, cosine, sub, EmbeddingError, EmbeddingStore};
use crate::neighbors::{IndexError, NeighborIndex, SearchMode};

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("word {0:?} has no vector")]
    MissingVector(String),
    #[error("support set is empty")]
    EmptySupport,
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InductionConfig {
    /// Minimum evidence set size for a prototype.
    pub min_support: usize,
    /// A prediction hits only if the target is within this many neighbors.
    pub max_rank: usize,
    /// Optional additional cosine floor for a hit.
    pub min_cosine: Option<f64>,
    /// Pairs evaluated per direction vector are sampled down to this size.
    pub evidence_cap: usize,
    pub eval_mode: SearchMode,
    pub seed: u64,
}

impl Default for InductionConfig {
    fn default() -> Self {
        InductionConfig {
            min_support: 6,
            max_rank: 100,
            min_cosine: None,
            evidence_cap: 500,
            eval_mode: SearchMode::Exact,
            seed: 0,
        }
    }
}

impl InductionConfig {
    pub fn validate(&self) -> Result<(), InductionError> {
        if self.min_support < 2 {
            return Err(InductionError::Config("min_support must be at least 2".into()));
        }
        if self.max_rank < 1 {
            return Err(InductionError::Config("max_rank must be at least 1".into()));
        }
        if let Some(c) = self.min_cosine {
            if !(c > 0.0 && c <= 1.0) {
                return Err(InductionError::Config("min_cosine must lie in (0, 1]".into()));
            }
        }
        if self.evidence_cap < self.min_support {
            return Err(InductionError::Config(
                "evidence_cap must be at least min_support".into(),
            ));
        }
        Ok(())
    }

    fn passes(&self, rank: Option<usize>, cosine: f64) -> bool {
        rank.is_some() && self.min_cosine.is_none_or(|t| cosine >= t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    pub rank: Option<usize>,
    pub cosine: f64,
    pub hit: bool,
}

/// `v(compound) - v(head)`.
pub fn direction_vector(store: &EmbeddingStore, pair: &SupportPair) -> Result<Vec<f64>, InductionError> {
    let compound = lookup(store, &pair.compound)?;
    let head = lookup(store, &pair.head)?;
    Ok(sub(compound, head))
}

fn lookup<'s>(store: &'s EmbeddingStore, word: &str) -> Result<&'s [f64], InductionError> {
    store
        .vector(word)
        .ok_or_else(|| InductionError::MissingVector(word.to_string()))
}

/// Applies `direction` to the pair's head and scores the prediction against
/// the pair's compound.
pub fn evaluate_pair(
    direction: &[f64],
    pair: &SupportPair,
    index: &NeighborIndex<'_>,
    config: &InductionConfig,
) -> Result<EvalResult, InductionError> {
    let store = index.store();
    let predicted = add(lookup(store, &pair.head)?, direction);
    let target = lookup(store, &pair.compound)?;
    let rank = index.rank_of(&predicted, &pair.compound, config.max_rank)?;
    let cosine = cosine(&predicted, target)?;
    Ok(EvalResult {
        rank,
        cosine,
        hit: config.passes(rank, cosine),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prototype {
    pub modifier: String,
    /// The pair whose direction this prototype uses.
    pub source: SupportPair,
    pub direction: Vec<f64>,
    /// Pairs explained at selection time, sorted.
    pub evidence: Vec<SupportPair>,
    /// Fraction of the modifier's full support set this direction explains.
    pub hit_rate: f64,
    /// Mean prediction cosine over the evidence set.
    pub mean_cosine: f64,
}

/// Identifies a prototype within a model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrototypeId {
    pub modifier: String,
    pub index: usize,
}

impl fmt::Display for PrototypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.modifier, self.index)
    }
}

/// Induced modifiers with their prototypes.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitModel {
    pub modifiers: BTreeMap<String, Vec<Prototype>>,
    pub interfixes: InterfixSet,
    pub config: InductionConfig,
    /// Free-form `key -> value` notes carried in the model file.
    pub metadata: BTreeMap<String, String>,
}

impl SplitModel {
    pub fn prototype(&self, id: &PrototypeId) -> Option<&Prototype> {
        self.modifiers.get(&id.modifier)?.get(id.index)
    }

    pub fn prototype_count(&self) -> usize {
        self.modifiers.values().map(Vec::len).sum()
    }
}

fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Induces prototypes for every candidate. The neighbor index decides the
/// evaluation mode; `config.eval_mode` is overwritten with it.
pub fn induce_prototypes(
    candidates: &[ModifierCandidate],
    index: &NeighborIndex<'_>,
    config: &InductionConfig,
    interfixes: &InterfixSet,
) -> Result<SplitModel, InductionError> {
    config.validate()?;
    let mut config = config.clone();
    config.eval_mode = index.mode();

    let induced: Vec<(String, Vec<Prototype>)> = candidates
        .par_iter()
        .map(|c| induce_modifier(c, index, &config).map(|p| (c.modifier.clone(), p)))
        .collect::<Result<_, _>>()?;

    let mut metadata = BTreeMap::new();
    metadata.insert("candidate_modifiers".into(), candidates.len().to_string());
    metadata.insert("self_evidence".into(), "included".into());
    Ok(SplitModel {
        modifiers: induced.into_iter().filter(|(_, p)| !p.is_empty()).collect(),
        interfixes: interfixes.clone(),
        config,
        metadata,
    })
}

struct Hit {
    pair: usize,
    cosine: f64,
}

fn induce_modifier(
    candidate: &ModifierCandidate,
    index: &NeighborIndex<'_>,
    config: &InductionConfig,
) -> Result<Vec<Prototype>, InductionError> {
    let pairs = &candidate.support;
    let n = pairs.len();
    if n < config.min_support {
        return Ok(Vec::new());
    }
    let store = index.store();
    let directions: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| direction_vector(store, p))
        .collect::<Result<_, _>>()?;

    let sampled = n > config.evidence_cap;
    let base_seed = config.seed ^ stable_hash(&candidate.modifier);
    let hits: Vec<Vec<Hit>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pool = evaluation_pool(i, n, config.evidence_cap, base_seed);
            let mut found = Vec::new();
            for j in pool {
                let r = evaluate_pair(&directions[i], &pairs[j], index, config)?;
                if r.hit {
                    found.push(Hit {
                        pair: j,
                        cosine: r.cosine,
                    });
                }
            }
            Ok(found)
        })
        .collect::<Result<_, InductionError>>()?;

    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut prototypes = Vec::new();
    while remaining >= config.min_support {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            let (count, sum) = hits[i]
                .iter()
                .filter(|h| alive[h.pair])
                .fold((0usize, 0.0f64), |(c, s), h| (c + 1, s + h.cosine));
            if count == 0 {
                continue;
            }
            let mean = sum / count as f64;
            let better = match best {
                None => true,
                Some((b, bc, bm)) => {
                    count
                        .cmp(&bc)
                        .then(mean.total_cmp(&bm))
                        .then_with(|| pair_key(&pairs[b]).cmp(&pair_key(&pairs[i])))
                        == Ordering::Greater
                }
            };
            if better {
                best = Some((i, count, mean));
            }
        }
        let Some((i, count, mean)) = best else { break };
        if count < config.min_support {
            break;
        }

        let mut evidence: Vec<SupportPair> = Vec::with_capacity(count);
        for h in hits[i].iter().filter(|h| alive[h.pair]) {
            evidence.push(pairs[h.pair].clone());
        }
        for h in &hits[i] {
            if alive[h.pair] {
                alive[h.pair] = false;
                remaining -= 1;
            }
        }
        evidence.sort();

        let hit_rate = if sampled {
            full_hit_rate(&directions[i], pairs, index, config)?
        } else {
            hits[i].len() as f64 / n as f64
        };
        prototypes.push(Prototype {
            modifier: candidate.modifier.clone(),
            source: pairs[i].clone(),
            direction: directions[i].clone(),
            evidence,
            hit_rate,
            mean_cosine: mean,
        });
    }
    Ok(prototypes)
}

fn pair_key(p: &SupportPair) -> (&str, &str, &str) {
    (&p.compound, &p.head, p.interfix.as_str())
}

/// Pairs against which direction `i` is evaluated: everything when the
/// support fits under the cap, otherwise a seeded sample that always
/// contains `i` itself.
fn evaluation_pool(i: usize, n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let mut pool = rand::seq::index::sample(&mut rng, n, cap).into_vec();
    if !pool.contains(&i) {
        pool[cap - 1] = i;
    }
    pool.sort_unstable();
    pool
}

fn full_hit_rate(
    direction: &[f64],
    pairs: &[SupportPair],
    index: &NeighborIndex<'_>,
    config: &InductionConfig,
) -> Result<f64, InductionError> {
    let mut hits = 0usize;
    for p in pairs {
        if evaluate_pair(direction, p, index, config)?.hit {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Fraction of `support` explained by the prototype's direction.
pub fn hit_rate(
    prototype: &Prototype,
    support: &[SupportPair],
    index: &NeighborIndex<'_>,
    config: &InductionConfig,
) -> Result<f64, InductionError> {
    if support.is_empty() {
        return Err(InductionError::EmptySupport);
    }
    full_hit_rate(&prototype.direction, support, index, config)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModifierStats {
    pub modifier: String,
    pub support: usize,
    pub prototypes: usize,
    pub mean_hit_rate: f64,
    pub mean_cosine: f64,
}

/// Aggregates over an induced model.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub candidate_modifiers: usize,
    pub retained_modifiers: usize,
    /// Mean over retained modifiers of their mean prototype hit rate.
    pub mean_hit_rate: f64,
    /// As `mean_hit_rate`, weighting each modifier by its support size.
    pub mean_hit_rate_by_support: f64,
    pub mean_cosine: f64,
    pub mean_cosine_by_support: f64,
    /// Percentage of candidate modifiers with at least one prototype.
    pub percent_with_prototypes: f64,
    pub mean_prototypes: f64,
    pub per_modifier: Vec<ModifierStats>,
}

pub fn model_stats(model: &SplitModel, candidates: &[ModifierCandidate]) -> StatsReport {
    let support: BTreeMap<&str, usize> = candidates
        .iter()
        .map(|c| (c.modifier.as_str(), c.support.len()))
        .collect();
    let per_modifier: Vec<ModifierStats> = model
        .modifiers
        .iter()
        .map(|(m, protos)| {
            let k = protos.len() as f64;
            ModifierStats {
                modifier: m.clone(),
                support: support.get(m.as_str()).copied().unwrap_or(0),
                prototypes: protos.len(),
                mean_hit_rate: protos.iter().map(|p| p.hit_rate).sum::<f64>() / k,
                mean_cosine: protos.iter().map(|p| p.mean_cosine).sum::<f64>() / k,
            }
        })
        .collect();

    let retained = per_modifier.len();
    let mean = |f: &dyn Fn(&ModifierStats) -> f64| {
        if retained == 0 {
            0.0
        } else {
            per_modifier.iter().map(f).sum::<f64>() / retained as f64
        }
    };
    let total_support: usize = per_modifier.iter().map(|m| m.support).sum();
    let weighted = |f: &dyn Fn(&ModifierStats) -> f64| {
        if total_support == 0 {
            0.0
        } else {
            per_modifier.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total_support as f64
        }
    };

    StatsReport {
        candidate_modifiers: candidates.len(),
        retained_modifiers: retained,
        mean_hit_rate: mean(&|m| m.mean_hit_rate),
        mean_hit_rate_by_support: weighted(&|m| m.mean_hit_rate),
        mean_cosine: mean(&|m| m.mean_cosine),
        mean_cosine_by_support: weighted(&|m| m.mean_cosine),
        percent_with_prototypes: if candidates.is_empty() {
            0.0
        } else {
            100.0 * retained as f64 / candidates.len() as f64
        },
        mean_prototypes: mean(&|m| m.prototypes as f64),
        per_modifier,
    }
}

/// Order-sensitive fingerprint of a vector's exact bits.
pub fn fingerprint(v: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in v {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Candidate extraction followed by induction over the whole vocabulary of
/// the index's store.
pub fn induce_from_store(
    index: &NeighborIndex<'_>,
    config: &InductionConfig,
    interfixes: &InterfixSet,
    min_prefix_len: usize,
) -> Result<(CandidateSet, SplitModel), InductionError> {
    let store = index.store();
    let prefixes = PrefixIndex::build(store.words(), min_prefix_len);
    let candidates = extract_candidates(store, &prefixes, interfixes);
    let model = induce_prototypes(&candidates.candidates, index, config, interfixes)?;
    Ok((candidates, model))
}
