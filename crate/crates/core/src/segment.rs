//! Ordered word components with the interfixes between them.

use std::fmt;

use crate::candidates::{char_len, Interfix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub text: String,
    /// Interfix following this component; empty for the last one.
    pub interfix: Interfix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    pub components: Vec<Component>,
}

impl Segmentation {
    pub fn whole(word: &str) -> Self {
        Segmentation {
            components: vec![Component {
                text: word.to_string(),
                interfix: Interfix::empty(),
            }],
        }
    }

    /// Builds from `(part, interfix after part)` pairs.
    pub fn from_parts<I, S>(parts: I) -> Self
    where
        I: IntoIterator<Item = (S, Interfix)>,
        S: Into<String>,
    {
        Segmentation {
            components: parts
                .into_iter()
                .map(|(text, interfix)| Component {
                    text: text.into(),
                    interfix,
                })
                .collect(),
        }
    }

    pub fn is_split(&self) -> bool {
        self.components.len() > 1
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn parts(&self) -> Vec<&str> {
        self.components.iter().map(|c| c.text.as_str()).collect()
    }

    /// Concatenation of components and interfixes.
    pub fn join(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            out.push_str(&c.text);
            out.push_str(c.interfix.as_str());
        }
        out
    }

    /// Character offsets at which the second and later components start.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                out.push(offset);
            }
            offset += char_len(&c.text) + c.interfix.char_len();
        }
        out
    }

    /// `a | b | c`, with interfixes shown as `a(s) | b` when requested.
    pub fn render(&self, show_interfix: bool) -> String {
        let rendered: Vec<String> = self
            .components
            .iter()
            .map(|c| {
                if show_interfix && !c.interfix.is_empty() {
                    format!("{}({})", c.text, c.interfix.as_str())
                } else {
                    c.text.clone()
                }
            })
            .collect();
        rendered.join(" | ")
    }
}

impl fmt::Display for Segmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(false))
    }
}
