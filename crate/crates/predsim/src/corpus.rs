//! Source-tagged training corpora and their line-delimited JSON input format.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::vocab::tokenize;

/// One utterance: a source label and its token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub source: String,
    pub tokens: Vec<String>,
}

/// A list of source-tagged documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingCorpus {
    documents: Vec<Document>,
}

#[derive(Deserialize)]
struct Record {
    source: String,
    text: String,
}

impl TrainingCorpus {
    pub fn new(documents: Vec<Document>) -> Self {
        TrainingCorpus { documents }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    /// Source labels in order of first appearance.
    pub fn source_labels(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut labels = Vec::new();
        for doc in &self.documents {
            if seen.insert(doc.source.as_str()) {
                labels.push(doc.source.clone());
            }
        }
        labels
    }

    /// Reads a corpus from `path`: one JSON object per line with string
    /// fields `source` and `text`. Text is lowercased and split on Unicode
    /// whitespace and punctuation. Blank lines are skipped; documents whose
    /// text yields no tokens are kept out of the corpus.
    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut documents = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(path, lineno + 1, e.to_string()))?;
            let tokens = tokenize(&record.text);
            if tokens.is_empty() {
                continue;
            }
            documents.push(Document {
                source: record.source,
                tokens,
            });
        }
        if documents.is_empty() {
            return Err(Error::EmptyCorpus(format!("{} has no documents", path.display())));
        }
        Ok(TrainingCorpus { documents })
    }
}
