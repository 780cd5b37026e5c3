//! Two-dimensional PCA projection of selected word vectors.

use std::collections::HashSet;
use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::embeddings::EmbeddingStore;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("need at least 3 distinct words with vectors, found {0}")]
    TooFewWords(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    /// `(word, x, y)` in input order, first occurrences only.
    pub points: Vec<(String, f64, f64)>,
    /// Share of the total variance captured by each component.
    pub explained_variance: [f64; 2],
    pub duplicates: Vec<String>,
    pub missing: Vec<String>,
}

impl ProjectionReport {
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (word, x, y) in &self.points {
            writeln!(w, "{word}\t{x}\t{y}")?;
        }
        Ok(())
    }
}

/// Projects the vectors of `words` onto the top two principal components of
/// their own covariance. Each component's sign is chosen so that its
/// largest-magnitude loading is positive. Unknown and repeated words are
/// dropped and listed in the report.
pub fn project_words<S: AsRef<str>>(store: &EmbeddingStore, words: &[S]) -> Result<ProjectionReport, ProjectionError> {
    let mut seen = HashSet::new();
    let mut kept: Vec<(&str, &[f64])> = Vec::new();
    let mut duplicates = Vec::new();
    let mut missing = Vec::new();
    for w in words {
        let w = w.as_ref();
        if !seen.insert(w) {
            duplicates.push(w.to_string());
            continue;
        }
        match store.vector(w) {
            Some(v) => kept.push((w, v)),
            None => missing.push(w.to_string()),
        }
    }
    if kept.len() < 3 {
        return Err(ProjectionError::TooFewWords(kept.len()));
    }

    let n = kept.len();
    let dim = store.dim();
    let mut x = DMatrix::<f64>::from_fn(n, dim, |i, j| kept[i].1[j]);
    for j in 0..dim {
        let mean = x.column(j).sum() / n as f64;
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();

    let mut axes = Vec::with_capacity(2);
    let mut explained = [0.0; 2];
    for k in 0..2 {
        let idx = order.get(k).copied();
        let mut axis = match idx {
            Some(i) => eig.eigenvectors.column(i).into_owned(),
            None => nalgebra::DVector::zeros(dim),
        };
        let pivot = axis
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > axis[best].abs() { i } else { best });
        if axis[pivot] < 0.0 {
            axis.neg_mut();
        }
        if let (Some(i), true) = (idx, total > 0.0) {
            explained[k] = eig.eigenvalues[i].max(0.0) / total;
        }
        axes.push(axis);
    }

    let px = &x * &axes[0];
    let py = &x * &axes[1];
    let points = kept
        .iter()
        .enumerate()
        .map(|(i, (w, _))| (w.to_string(), px[i], py[i]))
        .collect();
    Ok(ProjectionReport {
        points,
        explained_variance: explained,
        duplicates,
        missing,
    })
}
