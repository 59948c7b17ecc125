//! Ordered, labeled finite state spaces.

use crate::error::{Error, Result};

/// An ordered list of distinct state labels. Index positions are the
/// canonical coordinates; labels are what reaches files and reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut seen = std::collections::BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(Error::DuplicateLabel {
                    label: label.clone(),
                });
            }
        }
        Ok(Self { labels })
    }

    /// Alphabet `"0", "1", ..., "n-1"`.
    pub fn indexed(n: usize) -> Self {
        Self {
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Keep only the listed positions, preserving order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexed_labels_round_trip() {
        let a = Alphabet::indexed(3);
        assert_eq!(a.len(), 3);
        assert_eq!(a.label(2), "2");
        assert_eq!(a.index_of("1"), Some(1));
        assert_eq!(a.index_of("7"), None);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(matches!(
            Alphabet::new(["a", "a"]),
            Err(Error::DuplicateLabel { .. })
        ));
        assert!(matches!(
            Alphabet::new(Vec::<String>::new()),
            Err(Error::EmptyAlphabet)
        ));
    }
}
