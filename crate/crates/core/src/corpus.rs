//! Topic-grouped document sets and rule-based sentence segmentation.
//!
//! Two on-disk layouts are supported:
//!
//! * `topic-dirs`: `<root>/<topic_id>/docs/*.txt`, one document per file, and
//!   optionally `<root>/<topic_id>/refs/*.txt`, one reference summary per file.
//! * `jsonl`: one topic per line,
//!   `{"topic_id": str, "documents": [{"doc_id": str, "text": str}], "references": [str]}`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    TopicDirs,
    Jsonl,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topic-dirs" => Ok(Layout::TopicDirs),
            "jsonl" => Ok(Layout::Jsonl),
            other => Err(Error::InvalidParameter(format!(
                "unknown layout {other:?} (expected topic-dirs or jsonl)"
            ))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::TopicDirs => "topic-dirs",
            Layout::Jsonl => "jsonl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    /// 0-based index within the document.
    pub sent_index: usize,
    pub word_count: usize,
    pub byte_length: usize,
}

impl Sentence {
    /// 1-based position of the sentence in its document.
    pub fn position(&self) -> usize {
        self.sent_index + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub doc_index: usize,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub topic_id: String,
    pub documents: Vec<Document>,
    pub references: Vec<String>,
}

impl Topic {
    /// Segments raw `(doc_id, text)` pairs into a topic. Documents keep the
    /// order they are given in.
    pub fn from_texts<I, S, T>(
        topic_id: &str,
        documents: I,
        references: Vec<String>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        if topic_id.trim().is_empty() {
            return Err(Error::InvalidParameter("empty topic id".into()));
        }
        let mut docs = Vec::new();
        for (doc_index, (doc_id, text)) in documents.into_iter().enumerate() {
            let doc_id = doc_id.into();
            let sentences = segment_sentences(text.as_ref());
            if sentences.is_empty() {
                return Err(Error::EmptyDocument {
                    topic: topic_id.to_string(),
                    doc: doc_id,
                });
            }
            docs.push(Document {
                doc_id,
                doc_index,
                sentences,
            });
        }
        if docs.is_empty() {
            return Err(Error::EmptyTopic(topic_id.to_string()));
        }
        Ok(Topic {
            topic_id: topic_id.to_string(),
            documents: docs,
            references,
        })
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn sentence(&self, at: SentenceRef) -> &Sentence {
        &self.documents[at.doc].sentences[at.sent]
    }

    /// All sentence references in document order.
    pub fn sentence_refs(&self) -> impl Iterator<Item = SentenceRef> + '_ {
        self.documents
            .iter()
            .enumerate()
            .flat_map(|(doc, d)| (0..d.sentences.len()).map(move |sent| SentenceRef { doc, sent }))
    }

    /// Mean sentence length in words.
    pub fn mean_sentence_words(&self) -> f64 {
        let total: usize = self
            .documents
            .iter()
            .flat_map(|d| &d.sentences)
            .map(|s| s.word_count)
            .sum();
        total as f64 / self.sentence_count() as f64
    }

    /// Mean sentence length in bytes.
    pub fn mean_sentence_bytes(&self) -> f64 {
        let total: usize = self
            .documents
            .iter()
            .flat_map(|d| &d.sentences)
            .map(|s| s.byte_length)
            .sum();
        total as f64 / self.sentence_count() as f64
    }
}

/// Locates a sentence inside a topic. Ordering is (doc_index, sent_index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub doc: usize,
    pub sent: usize,
}

/// Key used by precomputed embedding files: `<topic_id>/d<doc_index>/s<sent_index>`.
pub fn sentence_key(topic_id: &str, at: SentenceRef) -> String {
    format!("{topic_id}/d{}/s{}", at.doc, at.sent)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub topics: Vec<Topic>,
}

impl Corpus {
    pub fn new(topics: Vec<Topic>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &topics {
            if !seen.insert(t.topic_id.as_str()) {
                return Err(Error::DuplicateTopic(t.topic_id.clone()));
            }
        }
        Ok(Corpus { topics })
    }

    pub fn topic(&self, topic_id: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }
}

/// Number of whitespace-delimited tokens.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn load_corpus(root: &Path, layout: Layout) -> Result<Corpus> {
    if !root.exists() {
        return Err(Error::MissingPath(root.to_path_buf()));
    }
    let topics = match layout {
        Layout::TopicDirs => load_topic_dirs(root)?,
        Layout::Jsonl => load_jsonl(root)?,
    };
    if topics.is_empty() {
        return Err(Error::NoTopics(root.to_path_buf()));
    }
    Corpus::new(topics)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        paths.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

fn txt_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
        .collect())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_topic_dirs(root: &Path) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let topic_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut docs = Vec::new();
        for path in txt_files(&dir.join("docs"))? {
            let doc_id = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            docs.push((doc_id, read_text(&path)?));
        }
        if docs.is_empty() {
            return Err(Error::EmptyTopic(topic_id));
        }
        let mut references = Vec::new();
        for path in txt_files(&dir.join("refs"))? {
            let text = read_text(&path)?;
            if !text.trim().is_empty() {
                references.push(text.trim().to_string());
            }
        }
        topics.push(Topic::from_texts(&topic_id, docs, references)?);
    }
    Ok(topics)
}

#[derive(Debug, Deserialize)]
struct TopicRecord {
    topic_id: String,
    documents: Vec<DocumentRecord>,
    #[serde(default)]
    references: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct DocumentRecord {
    doc_id: String,
    text: String,
}

fn load_jsonl(path: &Path) -> Result<Vec<Topic>> {
    let raw = read_text(path)?;
    let mut topics = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TopicRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.topic_id.trim().is_empty() {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: "empty topic_id".into(),
            });
        }
        let docs = record.documents.into_iter().map(|d| (d.doc_id, d.text));
        topics.push(Topic::from_texts(
            &record.topic_id,
            docs,
            record.references,
        )?);
    }
    Ok(topics)
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "gen", "gov", "sen", "rep",
    "rev", "lt", "col", "capt", "sgt", "maj", "adm", "hon", "pres", "messrs", "vs", "inc", "ltd",
    "co", "corp", "dept", "univ", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
    "oct", "nov", "dec",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}', '\u{bb}'];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// True when `token` (the text preceding a single period, period excluded)
/// is an abbreviation that must not end a sentence.
fn is_abbreviation(token: &str) -> bool {
    let token = token.trim_start_matches(|c: char| !c.is_alphanumeric());
    if token.is_empty() {
        return false;
    }
    let mut chars = token.chars();
    let first = chars.next().unwrap();
    if chars.next().is_none() {
        // single capital letter initial, e.g. "J."
        return first.is_uppercase();
    }
    // dotted initialisms such as "U.S" or "e.g"
    if token.split('.').all(|part| {
        let mut cs = part.chars();
        matches!((cs.next(), cs.next()), (Some(c), None) if c.is_alphabetic())
    }) {
        return true;
    }
    let lower = token.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits text into sentences on `.`, `!`, `?` followed by whitespace or end
/// of input. Periods after known abbreviations, single-letter initials and
/// dotted initialisms do not split; decimals never split because the period
/// is followed by a digit. Internal whitespace runs collapse to one space.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut pieces: Vec<&str> = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        let run_end = j;
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        if !at_boundary {
            i = j.max(i + 1);
            continue;
        }
        if c == '.' && run_end == i + 1 {
            let token_start = text[..pos]
                .rfind(char::is_whitespace)
                .map(|p| p + text[p..].chars().next().unwrap().len_utf8())
                .unwrap_or(0)
                .max(start);
            if is_abbreviation(&text[token_start..pos]) {
                i = j;
                continue;
            }
        }
        let end = if j == chars.len() {
            text.len()
        } else {
            chars[j].0
        };
        pieces.push(&text[start..end]);
        start = end;
        i = j;
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }

    pieces
        .into_iter()
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(sent_index, text)| Sentence {
            word_count: count_words(&text),
            byte_length: text.len(),
            sent_index,
            text,
        })
        .collect()
}
