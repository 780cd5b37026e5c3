//! Versioned text container for [`SplitModel`].
//!
//! ```text
//! analogsplit-model   1
//! config  min_support 6
//! ...
//! interfixes  -   es  s
//! meta    <key>   <value>
//! prototype   <modifier>  <interfix>  <head>  <compound>  <hit_rate>  <mean_cosine>  <fingerprint>
//! evidence    <interfix>  <head>  <compound>
//! ```
//!
//! Fields are tab-separated. Direction vectors are not stored: they are
//! recomputed from the embedding store on load and checked against the
//! recorded fingerprint of their exact bits.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::candidates::{Interfix, InterfixSet, SupportPair};
use crate::embeddings::EmbeddingStore;
use crate::induction::{direction_vector, fingerprint, InductionConfig, InductionError, Prototype, SplitModel};
use crate::neighbors::SearchMode;

pub const MAGIC: &str = "analogsplit-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unsupported model version {0}")]
    Version(String),
    #[error("line {line}: direction for {compound:?} does not match the embedding store")]
    StoreMismatch { line: usize, compound: String },
    #[error(transparent)]
    Induction(#[from] InductionError),
}

pub fn write_model<W: Write>(model: &SplitModel, w: &mut W) -> io::Result<()> {
    let c = &model.config;
    writeln!(w, "{MAGIC}\t{VERSION}")?;
    writeln!(w, "config\tmin_support\t{}", c.min_support)?;
    writeln!(w, "config\tmax_rank\t{}", c.max_rank)?;
    match c.min_cosine {
        Some(t) => writeln!(w, "config\tmin_cosine\t{t}")?,
        None => writeln!(w, "config\tmin_cosine\t-")?,
    }
    writeln!(w, "config\tevidence_cap\t{}", c.evidence_cap)?;
    match c.eval_mode {
        SearchMode::Exact => writeln!(w, "config\teval_mode\texact")?,
        SearchMode::Approximate {
            trees,
            search_breadth,
            seed,
        } => writeln!(w, "config\teval_mode\tapprox\t{trees}\t{search_breadth}\t{seed}")?,
    }
    writeln!(w, "config\tseed\t{}", c.seed)?;
    let interfixes: Vec<String> = model.interfixes.iter().map(|i| i.to_string()).collect();
    writeln!(w, "interfixes\t{}", interfixes.join("\t"))?;
    for (k, v) in &model.metadata {
        writeln!(w, "meta\t{k}\t{v}")?;
    }
    for protos in model.modifiers.values() {
        for p in protos {
            writeln!(
                w,
                "prototype\t{}\t{}\t{}\t{}\t{}\t{}\t{:016x}",
                p.modifier,
                p.source.interfix,
                p.source.head,
                p.source.compound,
                p.hit_rate,
                p.mean_cosine,
                fingerprint(&p.direction)
            )?;
            for e in &p.evidence {
                writeln!(w, "evidence\t{}\t{}\t{}", e.interfix, e.head, e.compound)?;
            }
        }
    }
    Ok(())
}

pub fn read_model<R: BufRead>(reader: R, store: &EmbeddingStore) -> Result<SplitModel, ModelError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| ModelError::Syntax {
        line: 1,
        msg: "empty model file".into(),
    })?;
    let header = header?;
    let mut fields = header.split('\t');
    if fields.next() != Some(MAGIC) {
        return Err(ModelError::Syntax {
            line: 1,
            msg: "not a model file".into(),
        });
    }
    let version = fields.next().unwrap_or("");
    if version != VERSION.to_string() {
        return Err(ModelError::Version(version.to_string()));
    }

    let mut config = InductionConfig::default();
    let mut interfixes = InterfixSet::none();
    let mut metadata = BTreeMap::new();
    let mut modifiers: BTreeMap<String, Vec<Prototype>> = BTreeMap::new();
    let mut current: Option<(String, usize)> = None;

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let syntax = |msg: &str| ModelError::Syntax {
            line: line_no,
            msg: msg.to_string(),
        };
        let num = |s: &str| -> Result<usize, ModelError> { s.parse().map_err(|_| syntax("expected an integer")) };
        let real = |s: &str| -> Result<f64, ModelError> { s.parse().map_err(|_| syntax("expected a number")) };
        match f[0] {
            "config" if f.len() >= 3 => match f[1] {
                "min_support" => config.min_support = num(f[2])?,
                "max_rank" => config.max_rank = num(f[2])?,
                "min_cosine" => config.min_cosine = if f[2] == "-" { None } else { Some(real(f[2])?) },
                "evidence_cap" => config.evidence_cap = num(f[2])?,
                "seed" => config.seed = f[2].parse().map_err(|_| syntax("bad seed"))?,
                "eval_mode" => {
                    config.eval_mode = match (f[2], f.len()) {
                        ("exact", _) => SearchMode::Exact,
                        ("approx", 6) => SearchMode::Approximate {
                            trees: num(f[3])?,
                            search_breadth: num(f[4])?,
                            seed: f[5].parse().map_err(|_| syntax("bad seed"))?,
                        },
                        _ => return Err(syntax("bad eval_mode")),
                    }
                }
                _ => return Err(syntax("unknown config key")),
            },
            "interfixes" => interfixes = InterfixSet::new(&f[1..]),
            "meta" if f.len() == 3 => {
                metadata.insert(f[1].to_string(), f[2].to_string());
            }
            "prototype" if f.len() == 8 => {
                let source = SupportPair::new(f[3], f[2].parse().unwrap(), f[4]);
                let direction = direction_vector(store, &source)?;
                let expected = u64::from_str_radix(f[7], 16).map_err(|_| syntax("bad fingerprint"))?;
                if fingerprint(&direction) != expected {
                    return Err(ModelError::StoreMismatch {
                        line: line_no,
                        compound: source.compound,
                    });
                }
                let list = modifiers.entry(f[1].to_string()).or_default();
                list.push(Prototype {
                    modifier: f[1].to_string(),
                    source,
                    direction,
                    evidence: Vec::new(),
                    hit_rate: real(f[5])?,
                    mean_cosine: real(f[6])?,
                });
                current = Some((f[1].to_string(), list.len() - 1));
            }
            "evidence" if f.len() == 4 => {
                let (m, i) = current
                    .as_ref()
                    .ok_or_else(|| syntax("evidence before any prototype"))?;
                let interfix: Interfix = f[1].parse().unwrap();
                modifiers.get_mut(m).expect("current modifier exists")[*i]
                    .evidence
                    .push(SupportPair::new(f[2], interfix, f[3]));
            }
            _ => return Err(syntax("unrecognized record")),
        }
    }
    config.validate()?;
    Ok(SplitModel {
        modifiers,
        interfixes,
        config,
        metadata,
    })
}
