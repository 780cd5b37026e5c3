//! k-nearest-neighbor and rank queries by cosine similarity.
//!
//! Exact mode scans every row. Approximate mode uses a forest of
//! random-projection trees searched best-first through a shared priority
//! queue; it inspects roughly `search_breadth` candidate rows and ranks only
//! those, so a target that is never inspected gets no rank at all and a
//! target that is inspected may rank higher than it would against the full
//! vocabulary.
//!
//! Ties on equal cosine are broken by ascending row index in both modes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::embeddings::{dot, norm, EmbeddingStore};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("cannot index an empty embedding store")]
    EmptyStore,
    #[error("{0} must be at least 1")]
    Parameter(&'static str),
    #[error("query vector has zero norm")]
    ZeroQuery,
    #[error("query has dimension {found}, index has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),
}

/// How neighbor queries are answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Exact,
    Approximate {
        trees: usize,
        search_breadth: usize,
        seed: u64,
    },
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchMode::Exact => f.write_str("exact"),
            SearchMode::Approximate {
                trees,
                search_breadth,
                seed,
            } => write!(f, "approx(trees={trees},breadth={search_breadth},seed={seed})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor<'s> {
    pub row: usize,
    pub word: &'s str,
    pub cosine: f64,
}

/// Cosine neighbor index over an [`EmbeddingStore`]. Immutable once built.
pub struct NeighborIndex<'s> {
    store: &'s EmbeddingStore,
    mode: SearchMode,
    unit: Vec<f64>,
    forest: Vec<Tree>,
}

impl<'s> NeighborIndex<'s> {
    pub fn build(store: &'s EmbeddingStore, mode: SearchMode) -> Result<Self, IndexError> {
        if store.is_empty() {
            return Err(IndexError::EmptyStore);
        }
        let dim = store.dim();
        let mut unit = Vec::with_capacity(store.len() * dim);
        for i in 0..store.len() {
            let row = store.row(i);
            let n = norm(row);
            if n == 0.0 {
                unit.extend(std::iter::repeat_n(0.0, dim));
            } else {
                unit.extend(row.iter().map(|x| x / n));
            }
        }

        let mut index = NeighborIndex {
            store,
            mode,
            unit,
            forest: Vec::new(),
        };
        if let SearchMode::Approximate {
            trees,
            search_breadth,
            seed,
        } = mode
        {
            if trees == 0 {
                return Err(IndexError::Parameter("tree count"));
            }
            if search_breadth == 0 {
                return Err(IndexError::Parameter("search breadth"));
            }
            index.forest = (0..trees)
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(t as u64);
                    Tree::build(&index, &mut rng)
                })
                .collect();
        }
        Ok(index)
    }

    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    pub fn store(&self) -> &'s EmbeddingStore {
        self.store
    }

    fn unit_row(&self, i: usize) -> &[f64] {
        let dim = self.store.dim();
        &self.unit[i * dim..(i + 1) * dim]
    }

    fn normalize_query(&self, q: &[f64]) -> Result<Vec<f64>, IndexError> {
        if q.len() != self.store.dim() {
            return Err(IndexError::Dimension {
                expected: self.store.dim(),
                found: q.len(),
            });
        }
        let n = norm(q);
        if n == 0.0 || !n.is_finite() {
            return Err(IndexError::ZeroQuery);
        }
        Ok(q.iter().map(|x| x / n).collect())
    }

    /// Top `k` words by cosine to `q`, best first.
    pub fn query_neighbors(&self, q: &[f64], k: usize) -> Result<Vec<Neighbor<'s>>, IndexError> {
        if k == 0 {
            return Err(IndexError::Parameter("k"));
        }
        let q = self.normalize_query(q)?;
        let mut scored: Vec<(f64, usize)> = match self.mode {
            SearchMode::Exact => (0..self.store.len()).map(|i| (dot(&q, self.unit_row(i)), i)).collect(),
            SearchMode::Approximate { search_breadth, .. } => self
                .candidates(&q, search_breadth)
                .into_iter()
                .map(|i| (dot(&q, self.unit_row(i)), i))
                .collect(),
        };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_cosine_then_row);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_cosine_then_row);
        Ok(scored
            .into_iter()
            .map(|(cosine, row)| Neighbor {
                row,
                word: self.store.word(row),
                cosine,
            })
            .collect())
    }

    /// 1-based position of `target` among the neighbors of `q`, or `None`
    /// when it falls beyond `max_rank` (or, in approximate mode, is never
    /// inspected).
    pub fn rank_of(&self, q: &[f64], target: &str, max_rank: usize) -> Result<Option<usize>, IndexError> {
        if max_rank == 0 {
            return Err(IndexError::Parameter("max rank"));
        }
        let target_row = self
            .store
            .index_of(target)
            .ok_or_else(|| IndexError::UnknownWord(target.to_string()))?;
        let q = self.normalize_query(q)?;
        let target_cos = dot(&q, self.unit_row(target_row));
        let beats = |i: usize| {
            let c = dot(&q, self.unit_row(i));
            c > target_cos || (c == target_cos && i < target_row)
        };

        let ahead = match self.mode {
            SearchMode::Exact => {
                let mut ahead = 0;
                for i in 0..self.store.len() {
                    if i != target_row && beats(i) {
                        ahead += 1;
                        if ahead >= max_rank {
                            return Ok(None);
                        }
                    }
                }
                ahead
            }
            SearchMode::Approximate { search_breadth, .. } => {
                let inspected = self.candidates(&q, search_breadth);
                if !inspected.contains(&target_row) {
                    return Ok(None);
                }
                inspected.iter().filter(|&&i| i != target_row && beats(i)).count()
            }
        };
        let rank = ahead + 1;
        Ok((rank <= max_rank).then_some(rank))
    }

    /// Rows reached by best-first descent over the forest, stopping once at
    /// least `breadth` distinct rows have been collected. The visiting order
    /// does not depend on `breadth`, so a larger breadth yields a superset.
    fn candidates(&self, q: &[f64], breadth: usize) -> Vec<usize> {
        let mut seen = vec![false; self.store.len()];
        let mut out = Vec::with_capacity(breadth.min(self.store.len()));
        let mut heap = BinaryHeap::new();
        for (t, tree) in self.forest.iter().enumerate() {
            heap.push(Pending {
                priority: f64::INFINITY,
                tree: t,
                node: tree.root,
            });
        }
        while let Some(Pending { priority, tree, node }) = heap.pop() {
            match &self.forest[tree].nodes[node] {
                Node::Leaf(rows) => {
                    for &r in rows {
                        if !seen[r] {
                            seen[r] = true;
                            out.push(r);
                        }
                    }
                    if out.len() >= breadth {
                        break;
                    }
                }
                Node::Split { normal, left, right } => {
                    let margin = dot(normal, q);
                    heap.push(Pending {
                        priority: priority.min(margin),
                        tree,
                        node: *right,
                    });
                    heap.push(Pending {
                        priority: priority.min(-margin),
                        tree,
                        node: *left,
                    });
                }
            }
        }
        out
    }
}

fn by_cosine_then_row(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

struct Pending {
    priority: f64,
    tree: usize,
    node: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.tree.cmp(&self.tree))
            .then_with(|| other.node.cmp(&self.node))
    }
}

enum Node {
    Split {
        normal: Vec<f64>,
        left: usize,
        right: usize,
    },
    Leaf(Vec<usize>),
}

struct Tree {
    nodes: Vec<Node>,
    root: usize,
}

impl Tree {
    fn build(index: &NeighborIndex<'_>, rng: &mut ChaCha8Rng) -> Tree {
        let mut tree = Tree {
            nodes: Vec::new(),
            root: 0,
        };
        let rows: Vec<usize> = (0..index.store.len()).collect();
        tree.root = tree.split(index, rows, rng);
        tree
    }

    fn split(&mut self, index: &NeighborIndex<'_>, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        if rows.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf(rows));
            return self.nodes.len() - 1;
        }

        // Hyperplane through the origin separating two sampled unit rows.
        let a = rows[rng.gen_range(0..rows.len())];
        let mut b = rows[rng.gen_range(0..rows.len())];
        for _ in 0..8 {
            if b != a {
                break;
            }
            b = rows[rng.gen_range(0..rows.len())];
        }
        let normal: Vec<f64> = index
            .unit_row(a)
            .iter()
            .zip(index.unit_row(b))
            .map(|(x, y)| x - y)
            .collect();

        let (mut left, mut right): (Vec<usize>, Vec<usize>) = if norm(&normal) > 0.0 {
            rows.iter()
                .copied()
                .partition(|&r| dot(&normal, index.unit_row(r)) < 0.0)
        } else {
            (Vec::new(), Vec::new())
        };

        if left.is_empty() || right.is_empty() {
            // Degenerate plane (identical vectors): fall back to a random halving.
            let mut shuffled = rows;
            shuffled.shuffle(rng);
            right = shuffled.split_off(shuffled.len() / 2);
            left = shuffled;
            let left_id = self.split(index, left, rng);
            let right_id = self.split(index, right, rng);
            self.nodes.push(Node::Split {
                normal: vec![0.0; index.store.dim()],
                left: left_id,
                right: right_id,
            });
            return self.nodes.len() - 1;
        }

        let left_id = self.split(index, left, rng);
        let right_id = self.split(index, right, rng);
        self.nodes.push(Node::Split {
            normal,
            left: left_id,
            right: right_id,
        });
        self.nodes.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_store(n: usize, dim: usize, seed: u64) -> EmbeddingStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n).map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (format!("w{i}"), v)
        });
        EmbeddingStore::from_rows(dim, rows).unwrap().0
    }

    /// Brute-force reference ordering using the plain cosine function.
    fn oracle(store: &EmbeddingStore, q: &[f64]) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..store.len())
            .map(|i| (cosine(q, store.row(i)).unwrap(), i))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        all.into_iter().map(|(_, i)| i).collect()
    }

    #[test]
    fn exact_full_query_is_sorted() {
        let store = random_store(50, 6, 1);
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let q = store.row(3).to_vec();
        let all = index.query_neighbors(&q, store.len()).unwrap();
        assert_eq!(all.len(), 50);
        assert!(all.windows(2).all(|w| w[0].cosine >= w[1].cosine));
        assert_eq!(all[0].word, "w3");
        assert!((all[0].cosine - 1.0).abs() < 1e-12);
        assert_eq!(index.query_neighbors(&q, 500).unwrap().len(), 50);
        assert_eq!(index.rank_of(&q, "w3", 1).unwrap(), Some(1));
    }

    #[test]
    fn empty_store_and_bad_parameters() {
        let (empty, _) = EmbeddingStore::from_rows(2, Vec::<(String, Vec<f64>)>::new()).unwrap();
        assert_eq!(
            NeighborIndex::build(&empty, SearchMode::Exact).err(),
            Some(IndexError::EmptyStore)
        );
        let store = random_store(10, 3, 2);
        let bad = SearchMode::Approximate {
            trees: 0,
            search_breadth: 10,
            seed: 0,
        };
        assert!(NeighborIndex::build(&store, bad).is_err());
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        assert_eq!(
            index.query_neighbors(&[0.0, 0.0, 0.0], 3).err(),
            Some(IndexError::ZeroQuery)
        );
        assert_eq!(
            index.rank_of(store.row(0), "nope", 3).err(),
            Some(IndexError::UnknownWord("nope".into()))
        );
    }

    #[test]
    fn two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rows = Vec::new();
        for i in 0..40 {
            let base = if i < 20 { [5.0, 0.0, 0.0] } else { [0.0, 5.0, 0.0] };
            let v: Vec<f64> = base
                .iter()
                .map(|b| b + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            rows.push((format!("{}{i}", if i < 20 { "a" } else { "b" }), v));
        }
        let (store, _) = EmbeddingStore::from_rows(3, rows).unwrap();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let centroid: Vec<f64> = (0..3)
            .map(|d| (0..20).map(|i| store.row(i)[d]).sum::<f64>() / 20.0)
            .collect();
        let top = index.query_neighbors(&centroid, 10).unwrap();
        let expected: Vec<usize> = oracle(&store, &centroid).into_iter().take(10).collect();
        assert_eq!(top.iter().map(|n| n.row).collect::<Vec<_>>(), expected);
        assert!(top.iter().all(|n| n.word.starts_with('a')));
    }

    #[test]
    fn planted_analogy_ranks_first() {
        let rows = vec![
            ("owner", vec![1.0, 0.2, 0.0]),
            ("dogowner", vec![1.0, 0.2, 2.0]),
            ("house", vec![0.0, 1.0, 0.1]),
            ("doghouse", vec![0.0, 1.0, 2.1]),
        ];
        let (store, _) = EmbeddingStore::from_rows(3, rows).unwrap();
        let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let d: Vec<f64> = vec![0.0, 0.0, 2.0];
        let q: Vec<f64> = store
            .vector("owner")
            .unwrap()
            .iter()
            .zip(&d)
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(index.rank_of(&q, "dogowner", 5).unwrap(), Some(1));
    }

    #[test]
    fn approximate_recall_on_thousand_words() {
        let store = random_store(1000, 16, 11);
        let exact = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let approx = NeighborIndex::build(
            &store,
            SearchMode::Approximate {
                trees: 8,
                search_breadth: 2048,
                seed: 3,
            },
        )
        .unwrap();
        let mut found = 0;
        let mut total = 0;
        for qi in (0..1000).step_by(37) {
            let q = store.row(qi);
            let truth: Vec<usize> = exact.query_neighbors(q, 10).unwrap().iter().map(|n| n.row).collect();
            let got: Vec<usize> = approx.query_neighbors(q, 10).unwrap().iter().map(|n| n.row).collect();
            total += truth.len();
            found += truth.iter().filter(|r| got.contains(r)).count();
        }
        assert!(found as f64 / total as f64 >= 0.9);
    }

    #[test]
    fn approximate_recall_monotone_in_breadth() {
        let store = random_store(800, 12, 5);
        let exact = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let queries: Vec<usize> = (0..800).step_by(53).collect();
        let mut previous = 0usize;
        for breadth in [8, 16, 32, 64, 128, 256, 800] {
            let approx = NeighborIndex::build(
                &store,
                SearchMode::Approximate {
                    trees: 2,
                    search_breadth: breadth,
                    seed: 9,
                },
            )
            .unwrap();
            let mut hits = 0;
            for &qi in &queries {
                let truth: Vec<usize> = exact
                    .query_neighbors(store.row(qi), 10)
                    .unwrap()
                    .iter()
                    .map(|n| n.row)
                    .collect();
                let got: Vec<usize> = approx
                    .query_neighbors(store.row(qi), 10)
                    .unwrap()
                    .iter()
                    .map(|n| n.row)
                    .collect();
                hits += truth.iter().filter(|r| got.contains(r)).count();
            }
            assert!(hits >= previous, "recall dropped at breadth {breadth}");
            previous = hits;
        }
    }

    #[test]
    fn approximate_build_is_deterministic() {
        let store = random_store(300, 8, 21);
        let mode = SearchMode::Approximate {
            trees: 3,
            search_breadth: 40,
            seed: 77,
        };
        let a = NeighborIndex::build(&store, mode).unwrap();
        let b = NeighborIndex::build(&store, mode).unwrap();
        for qi in 0..30 {
            assert_eq!(
                a.query_neighbors(store.row(qi), 5).unwrap(),
                b.query_neighbors(store.row(qi), 5).unwrap()
            );
        }
    }

    #[test]
    fn approximate_disagreement_is_measurable() {
        let store = random_store(2000, 16, 4);
        let exact = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
        let approx = NeighborIndex::build(
            &store,
            SearchMode::Approximate {
                trees: 1,
                search_breadth: 20,
                seed: 1,
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut disagree = 0;
        for _ in 0..100 {
            let q: Vec<f64> = (0..16).map(|_| StandardNormal.sample(&mut rng)).collect();
            let target = store.word(rng.gen_range(0..2000));
            if exact.rank_of(&q, target, 50).unwrap() != approx.rank_of(&q, target, 50).unwrap() {
                disagree += 1;
            }
        }
        assert!(disagree > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn exact_matches_brute_force(n in 1usize..400, dim in 1usize..8, seed in any::<u64>(), k in 1usize..50) {
            let store = random_store(n, dim, seed);
            let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let q: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            prop_assume!(norm(&q) > 0.0);
            let got: Vec<usize> = index.query_neighbors(&q, k).unwrap().iter().map(|n| n.row).collect();
            let want: Vec<usize> = oracle(&store, &q).into_iter().take(k).collect();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn rank_consistent_with_neighbors(n in 2usize..200, seed in any::<u64>(), r in 1usize..30) {
            let store = random_store(n, 4, seed);
            let index = NeighborIndex::build(&store, SearchMode::Exact).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let q: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
            let target = store.word(rng.gen_range(0..n)).to_string();
            let list = index.query_neighbors(&q, r).unwrap();
            let at_r = list.len() == r && list[r - 1].word == target;
            prop_assert_eq!(at_r, index.rank_of(&q, &target, r).unwrap() == Some(r));
            let pos = list.iter().position(|nb| nb.word == target).map(|p| p + 1);
            prop_assert_eq!(pos, index.rank_of(&q, &target, r).unwrap());
        }
    }
}
