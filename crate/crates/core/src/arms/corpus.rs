use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::ArmError;
use crate::featurizer::tokenize;

/// A knowledge-base article. Tokens cover title and body.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    tokens: Vec<String>,
    term_counts: BTreeMap<String, u32>,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
    ) -> Result<Self, ArmError> {
        let doc_id = doc_id.into();
        let title = title.into();
        let body = body.into();
        if body.trim().is_empty() {
            return Err(ArmError::Corpus(format!("document {doc_id:?} has an empty body")));
        }
        let tokens = tokenize(&format!("{title} {body}"));
        let mut term_counts = BTreeMap::new();
        for t in &tokens {
            *term_counts.entry(t.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            doc_id,
            title,
            body,
            tokens,
            term_counts,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn term_frequency(&self, term: &str) -> u32 {
        self.term_counts.get(term).copied().unwrap_or(0)
    }

    pub fn term_counts(&self) -> &BTreeMap<String, u32> {
        &self.term_counts
    }

    pub fn distinct_terms(&self) -> BTreeSet<&str> {
        self.term_counts.keys().map(String::as_str).collect()
    }
}

/// Documents sorted by `doc_id`, ids unique.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(mut docs: Vec<Document>) -> Result<Self, ArmError> {
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = docs.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(ArmError::Corpus(format!("duplicate doc_id {:?}", w[0].doc_id)));
        }
        Ok(Self { docs })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs
            .binary_search_by(|d| d.doc_id.as_str().cmp(doc_id))
            .ok()
            .map(|i| &self.docs[i])
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    doc_id: String,
    title: String,
    body: String,
}

/// Loads either a JSONL file of `{doc_id, title, body}` or a directory of
/// UTF-8 text files (`doc_id` = file stem, first non-empty line = title).
pub fn load_corpus(path: &Path) -> Result<Corpus, ArmError> {
    let err = |e: std::io::Error| ArmError::Corpus(format!("{}: {e}", path.display()));
    if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)
            .map_err(err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        entries.sort_by_key(|e| e.path());
        let mut docs = Vec::new();
        for entry in entries {
            let p = entry.path();
            if !p.is_file() {
                continue;
            }
            let text = fs::read_to_string(&p).map_err(err)?;
            let doc_id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut lines = text.lines().skip_while(|l| l.trim().is_empty());
            let title = lines.next().unwrap_or("").trim().to_string();
            let rest: Vec<&str> = lines.collect();
            let body = if rest.iter().all(|l| l.trim().is_empty()) {
                title.clone()
            } else {
                rest.join("\n").trim().to_string()
            };
            docs.push(Document::new(doc_id, title, body)?);
        }
        Corpus::new(docs)
    } else {
        let text = fs::read_to_string(path).map_err(err)?;
        let mut docs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let d: JsonDoc = serde_json::from_str(line).map_err(|e| {
                ArmError::Corpus(format!("{} line {}: {e}", path.display(), n + 1))
            })?;
            docs.push(Document::new(d.doc_id, d.title, d.body)?);
        }
        Corpus::new(docs)
    }
}
