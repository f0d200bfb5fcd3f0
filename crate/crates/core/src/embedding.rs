//! Sentence and document embeddings.
//!
//! Sentence vectors come from an [`EmbeddingProvider`]; a document vector is
//! always the componentwise mean of its sentence vectors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{sentence_key, Corpus, SentenceRef, Topic};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Unit vector along the first axis.
    pub fn basis(dim: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[0] = 1.0;
        EmbeddingVector(values)
    }

    /// Componentwise mean. Panics on an empty input; callers guarantee
    /// equal dimensions.
    pub fn mean<'a, I>(vectors: I) -> Self
    where
        I: IntoIterator<Item = &'a EmbeddingVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter.next().expect("mean of zero vectors");
        let mut acc = first.0.clone();
        let mut n = 1usize;
        for v in iter {
            for (a, x) in acc.iter_mut().zip(&v.0) {
                *a += x;
            }
            n += 1;
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        EmbeddingVector(acc)
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Source of sentence vectors. Implementations must be safe to call from
/// several threads at once; `embed_corpus` embeds topics in parallel.
pub trait EmbeddingProvider: Send + Sync {
    /// Returns one vector per sentence of `topic`, in document order then
    /// sentence order.
    fn embed_topic(&self, topic: &Topic) -> Result<Vec<EmbeddingVector>>;
}

#[derive(Debug, Clone)]
pub struct EmbeddedTopic {
    pub topic: Topic,
    /// `sentence_vectors[doc][sent]`
    pub sentence_vectors: Vec<Vec<EmbeddingVector>>,
    pub document_vectors: Vec<EmbeddingVector>,
}

impl EmbeddedTopic {
    /// Groups flat per-sentence vectors by document and derives document
    /// vectors as their means.
    pub fn from_sentence_vectors(topic: Topic, flat: Vec<EmbeddingVector>) -> Result<Self> {
        let expected = topic.sentence_count();
        if flat.len() != expected {
            return Err(Error::Provider(format!(
                "provider returned {} vectors for {} sentences of topic {:?}",
                flat.len(),
                expected,
                topic.topic_id
            )));
        }
        let dim = flat.first().map(|v| v.dim()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Provider("provider returned empty vectors".into()));
        }
        for (v, at) in flat.iter().zip(topic.sentence_refs()) {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEmbedding(sentence_key(&topic.topic_id, at)));
            }
        }
        let mut flat = flat.into_iter();
        let sentence_vectors: Vec<Vec<EmbeddingVector>> = topic
            .documents
            .iter()
            .map(|d| flat.by_ref().take(d.sentences.len()).collect())
            .collect();
        let document_vectors = sentence_vectors.iter().map(EmbeddingVector::mean).collect();
        Ok(EmbeddedTopic {
            topic,
            sentence_vectors,
            document_vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.document_vectors[0].dim()
    }

    pub fn sentence_vector(&self, at: SentenceRef) -> &EmbeddingVector {
        &self.sentence_vectors[at.doc][at.sent]
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddedCorpus {
    pub topics: Vec<EmbeddedTopic>,
}

impl EmbeddedCorpus {
    pub fn dim(&self) -> usize {
        self.topics.first().map(EmbeddedTopic::dim).unwrap_or(0)
    }

    pub fn topic(&self, topic_id: &str) -> Option<&EmbeddedTopic> {
        self.topics.iter().find(|t| t.topic.topic_id == topic_id)
    }
}

pub fn embed_topic(topic: &Topic, provider: &dyn EmbeddingProvider) -> Result<EmbeddedTopic> {
    let flat = provider.embed_topic(topic)?;
    EmbeddedTopic::from_sentence_vectors(topic.clone(), flat)
}

/// Embeds every topic (in parallel) and checks that all vectors share one
/// dimension.
pub fn embed_corpus(corpus: &Corpus, provider: &dyn EmbeddingProvider) -> Result<EmbeddedCorpus> {
    let topics = corpus
        .topics
        .par_iter()
        .map(|t| embed_topic(t, provider))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = topics.first() {
        let dim = first.dim();
        if let Some(bad) = topics.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
    }
    Ok(EmbeddedCorpus { topics })
}

// ---------------------------------------------------------------------------
// Precomputed vectors

#[derive(Debug, Serialize, Deserialize)]
pub struct VectorRecord {
    pub key: String,
    pub vector: Vec<f64>,
}

/// Looks vectors up by sentence key in a JSONL file of
/// `{"key": "<topic_id>/d<doc_index>/s<sent_index>", "vector": [...]}` records.
#[derive(Debug, Clone)]
pub struct FileProvider {
    vectors: HashMap<String, EmbeddingVector>,
}

impl FileProvider {
    pub fn open(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, path)
    }

    fn parse(raw: &str, path: &Path) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: VectorRecord = serde_json::from_str(line).map_err(|e| {
                Error::Provider(format!(
                    "{}:{}: malformed record: {e}",
                    path.display(),
                    i + 1
                ))
            })?;
            let vector = EmbeddingVector::new(record.vector);
            if vector.dim() == 0 {
                return Err(Error::Provider(format!(
                    "{}:{}: empty vector",
                    path.display(),
                    i + 1
                )));
            }
            if !vector.is_finite() {
                return Err(Error::NonFiniteEmbedding(record.key));
            }
            if vectors.insert(record.key.clone(), vector).is_some() {
                return Err(Error::DuplicateEmbedding(record.key));
            }
        }
        Ok(FileProvider { vectors })
    }

    pub fn from_records(records: impl IntoIterator<Item = VectorRecord>) -> Result<Self> {
        let mut vectors = HashMap::new();
        for r in records {
            if vectors
                .insert(r.key.clone(), EmbeddingVector::new(r.vector))
                .is_some()
            {
                return Err(Error::DuplicateEmbedding(r.key));
            }
        }
        Ok(FileProvider { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for FileProvider {
    fn embed_topic(&self, topic: &Topic) -> Result<Vec<EmbeddingVector>> {
        topic
            .sentence_refs()
            .map(|at| {
                let key = sentence_key(&topic.topic_id, at);
                self.vectors
                    .get(&key)
                    .cloned()
                    .ok_or(Error::MissingEmbedding(key))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Built-in hashed TF-IDF

/// Deterministic bag-of-words embedding: lowercase alphanumeric tokens are
/// hashed (with a seed) into `dim` buckets, weighted by in-sentence term
/// frequency times smoothed inverse document frequency over the topic's
/// documents, and L2-normalized. Sentences without tokens map to e1.
#[derive(Debug, Clone)]
pub struct TfidfProvider {
    dim: usize,
    seed: u64,
}

impl TfidfProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "builtin embedding dimension must be at least 2, got {dim}"
            )));
        }
        Ok(TfidfProvider { dim, seed })
    }

    fn bucket(&self, token: &str) -> usize {
        (seeded_hash(token.as_bytes(), self.seed) % self.dim as u64) as usize
    }
}

pub(crate) fn word_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// FNV-1a over the bytes with the seed folded into the offset basis, then a
/// splitmix64 finalizer.
pub(crate) fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

impl EmbeddingProvider for TfidfProvider {
    fn embed_topic(&self, topic: &Topic) -> Result<Vec<EmbeddingVector>> {
        let n_docs = topic.documents.len() as f64;
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in &topic.documents {
            let mut seen: Vec<String> = doc
                .sentences
                .iter()
                .flat_map(|s| word_tokens(&s.text))
                .collect();
            seen.sort_unstable();
            seen.dedup();
            for tok in seen {
                *df.entry(tok).or_default() += 1;
            }
        }

        let mut out = Vec::with_capacity(topic.sentence_count());
        for doc in &topic.documents {
            for sent in &doc.sentences {
                let mut tf: HashMap<String, usize> = HashMap::new();
                for tok in word_tokens(&sent.text) {
                    *tf.entry(tok).or_default() += 1;
                }
                // Sorted accumulation keeps float sums identical across runs.
                let mut terms: Vec<_> = tf.into_iter().collect();
                terms.sort_unstable();
                let mut values = vec![0.0; self.dim];
                for (tok, count) in terms {
                    let idf = ((1.0 + n_docs) / (1.0 + df[&tok] as f64)).ln() + 1.0;
                    values[self.bucket(&tok)] += count as f64 * idf;
                }
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    out.push(EmbeddingVector::basis(self.dim));
                } else {
                    out.push(EmbeddingVector::new(
                        values.into_iter().map(|v| v / norm).collect(),
                    ));
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Remote service

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for a sidecar embedding service: `POST <endpoint>/embed` with
/// `{"texts": [...]}`, answered by `{"vectors": [[...]]}` in request order.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    url: String,
    batch_size: usize,
    max_retries: usize,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(endpoint: &str, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Ok(RemoteProvider {
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            batch_size,
            max_retries: 3,
            backoff: Duration::from_millis(200),
            client,
        })
    }

    /// Number of retries after the first attempt, and the base delay that
    /// doubles between attempts.
    pub fn with_retries(mut self, max_retries: usize, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.embed_batch(batch)?);
        }
        Ok(out)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        let response = loop {
            match self.try_post(texts) {
                Ok(r) => break r,
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => {
                    if attempt >= self.max_retries {
                        return Err(Error::Provider(format!(
                            "{} failed after {} attempts: {msg}",
                            self.url,
                            attempt + 1
                        )));
                    }
                    attempt += 1;
                    thread::sleep(delay);
                    delay *= 2;
                }
            }
        };
        if response.vectors.len() != texts.len() {
            return Err(Error::Provider(format!(
                "protocol error: {} vectors returned for {} texts",
                response.vectors.len(),
                texts.len()
            )));
        }
        response
            .vectors
            .into_iter()
            .zip(texts)
            .map(|(v, text)| {
                let v = EmbeddingVector::new(v);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteEmbedding((*text).to_string()))
                }
            })
            .collect()
    }

    fn try_post(&self, texts: &[&str]) -> std::result::Result<EmbedResponse, Attempt> {
        let resp = self
            .client
            .post(&self.url)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Transient(format!("status {status}")));
        }
        if status.as_u16() != 200 {
            return Err(Attempt::Fatal(Error::Provider(format!(
                "{} answered with status {status}",
                self.url
            ))));
        }
        resp.json::<EmbedResponse>()
            .map_err(|e| Attempt::Fatal(Error::Provider(format!("malformed response: {e}"))))
    }
}

enum Attempt {
    Transient(String),
    Fatal(Error),
}

impl EmbeddingProvider for RemoteProvider {
    fn embed_topic(&self, topic: &Topic) -> Result<Vec<EmbeddingVector>> {
        let texts: Vec<&str> = topic
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter().map(|s| s.text.as_str()))
            .collect();
        self.embed_texts(&texts)
    }
}

/// Parsed form of the `file:PATH`, `builtin:DIM`, `remote:URL` provider
/// specifications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderSpec {
    File(PathBuf),
    Builtin(usize),
    Remote(String),
}

impl ProviderSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::File(path) => Box::new(FileProvider::open(path)?),
            ProviderSpec::Builtin(dim) => Box::new(TfidfProvider::new(*dim, seed)?),
            ProviderSpec::Remote(url) => Box::new(RemoteProvider::new(url, 64)?),
        })
    }
}

impl std::str::FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| {
            Error::InvalidParameter(format!(
                "embedder {s:?} must be file:PATH, builtin:DIM or remote:URL"
            ))
        })?;
        match kind {
            "file" => Ok(ProviderSpec::File(PathBuf::from(arg))),
            "builtin" => arg
                .parse()
                .map(ProviderSpec::Builtin)
                .map_err(|_| Error::InvalidParameter(format!("bad builtin dimension {arg:?}"))),
            "remote" => Ok(ProviderSpec::Remote(arg.to_string())),
            other => Err(Error::InvalidParameter(format!(
                "unknown embedder kind {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProviderSpec::File(p) => write!(f, "file:{}", p.display()),
            ProviderSpec::Builtin(d) => write!(f, "builtin:{d}"),
            ProviderSpec::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}
