//! Compound splitting by semantic analogy over word embeddings.
//!
//! A modifier such as `haupt` is represented by one or more *prototype*
//! direction vectors, each the offset `v(compound) - v(head)` of a source
//! pair like `(Ziel, hauptziel)`. A new word is split when adding a
//! prototype to the vector of its remainder lands close to the word itself.
//!
//! The pipeline is:
//!
//! 1. [`embeddings`]: load a vector file into an [`EmbeddingStore`].
//! 2. [`candidates`]: find every vocabulary prefix that combines with other
//!    vocabulary words, with optional interfixes.
//! 3. [`induction`]: pick prototypes per modifier by greedy evidence cover,
//!    scoring analogies with a [`NeighborIndex`].
//! 4. [`splitter`]: decompound words with the induced [`SplitModel`].
//! 5. [`evaluation`] and [`baseline`]: score against gold splits and compare
//!    with a frequency-based splitter.

pub mod baseline;
pub mod candidates;
pub mod embeddings;
pub mod evaluation;
pub mod induction;
pub mod model_file;
pub mod neighbors;
pub mod preprocess;
pub mod projection;
pub mod segment;
pub mod splitter;

pub use baseline::{FrequencySplitter, FrequencyTable};
pub use candidates::{extract_candidates, Interfix, InterfixSet, PrefixIndex};
pub use embeddings::{EmbeddingStore, Format};
pub use induction::{induce_prototypes, InductionConfig, SplitModel};
pub use neighbors::{NeighborIndex, SearchMode};
pub use segment::Segmentation;
pub use splitter::{SplitDecision, Splitter, SplitterConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/candidates.md")]
    mod candidates {}
    #[doc = include_str!("../../../book/src/prototypes.md")]
    mod prototypes {}
    #[doc = include_str!("../../../book/src/splitting.md")]
    mod splitting {}
    #[doc = include_str!("../../../book/src/baseline.md")]
    mod baseline {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
