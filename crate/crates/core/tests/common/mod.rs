//! Fixture builders shared by the integration tests.

#![allow(dead_code)]

use comspec::corpus::{Corpus, Topic};
use comspec::embedding::{EmbeddedTopic, EmbeddingVector};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: [&str; 13] = [
    "b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 3] = ["a", "o", "u"];

/// A pronounceable pseudo-word, unique per index (three CV syllables).
/// Vowel endings keep the Porter stemmer from merging distinct words.
pub fn word(index: usize) -> String {
    let syllables = ONSETS.len() * VOWELS.len();
    let mut i = index;
    let mut out = String::new();
    for _ in 0..3 {
        let s = i % syllables;
        i /= syllables;
        out.push_str(ONSETS[s / VOWELS.len()]);
        out.push_str(VOWELS[s % VOWELS.len()]);
    }
    assert_eq!(i, 0, "word index out of range");
    out
}

pub fn sentence(words: &[String]) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// Disjoint word pools carved from one counter.
pub struct Vocab {
    next: usize,
}

impl Vocab {
    pub fn new(offset: usize) -> Self {
        Vocab { next: offset }
    }

    pub fn take(&mut self, n: usize) -> Vec<String> {
        let words = (self.next..self.next + n).map(word).collect();
        self.next += n;
        words
    }
}

fn paraphrase(rng: &mut ChaCha8Rng, core: &[String], variants: &[String], extra: usize) -> String {
    let mut words: Vec<String> = core.to_vec();
    words.extend(variants.choose_multiple(rng, extra).cloned());
    words.shuffle(rng);
    sentence(&words)
}

/// A topic with three planted document clusters.
///
/// Every document restates one common fact and the fact of its own cluster,
/// each with a couple of random extra words, around filler sentences that mix
/// a few cluster words into topic-wide noise. The single reference lists the
/// core words of the common fact and of each cluster fact.
pub fn planted_topic(topic_index: usize, seed: u64) -> Topic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (topic_index as u64).wrapping_mul(0x9e37_79b9));
    // 39^3 words in total; each topic uses a disjoint slice
    let mut vocab = Vocab::new(topic_index * 200);
    let common = vocab.take(6);
    let noise = vocab.take(60);
    let clusters: Vec<(Vec<String>, Vec<String>)> =
        (0..3).map(|_| (vocab.take(6), vocab.take(30))).collect();

    let mut docs = Vec::new();
    for (c, (fact, cluster_words)) in clusters.iter().enumerate() {
        let n_docs = rng.random_range(2..=4);
        for d in 0..n_docs {
            let mut sentences = vec![
                paraphrase(&mut rng, &common, &noise, 2),
                paraphrase(&mut rng, fact, &noise, 2),
            ];
            for _ in 0..rng.random_range(3..=5) {
                let mut words: Vec<String> = cluster_words
                    .choose_multiple(&mut rng, 3)
                    .cloned()
                    .collect();
                words.extend(noise.choose_multiple(&mut rng, 5).cloned());
                words.shuffle(&mut rng);
                sentences.push(sentence(&words));
            }
            sentences.shuffle(&mut rng);
            docs.push((format!("c{c}d{d}"), sentences.join(" ")));
        }
    }
    docs.shuffle(&mut rng);

    let mut reference = vec![sentence(&common)];
    reference.extend(clusters.iter().map(|(fact, _)| sentence(fact)));
    Topic::from_texts(
        &format!("topic{topic_index:02}"),
        docs,
        vec![reference.join(" ")],
    )
    .unwrap()
}

pub fn planted_corpus(topics: usize, seed: u64) -> Corpus {
    Corpus::new((0..topics).map(|i| planted_topic(i, seed)).collect()).unwrap()
}

/// A document id with its `(text, vector)` sentences.
pub type HandDoc<'a> = (&'a str, Vec<(&'a str, Vec<f64>)>);

/// Embeds `docs` without a provider, so fixtures control every vector exactly.
pub fn hand_embedded(topic_id: &str, docs: &[HandDoc]) -> EmbeddedTopic {
    let texts: Vec<(String, String)> = docs
        .iter()
        .map(|(id, sents)| {
            let text = sents.iter().map(|(t, _)| *t).collect::<Vec<_>>().join(" ");
            (id.to_string(), text)
        })
        .collect();
    let topic = Topic::from_texts(topic_id, texts, vec![]).unwrap();
    for (doc, (_, sents)) in topic.documents.iter().zip(docs) {
        assert_eq!(
            doc.sentences.len(),
            sents.len(),
            "fixture text must segment as written"
        );
    }
    let flat = docs
        .iter()
        .flat_map(|(_, sents)| sents.iter().map(|(_, v)| EmbeddingVector::new(v.clone())))
        .collect();
    EmbeddedTopic::from_sentence_vectors(topic, flat).unwrap()
}

/// Six documents in three well-separated groups of sizes 3, 2 and 1. Each
/// document has a "shared" sentence leaning on the common axis and a
/// "specific" sentence on its group's axis. Axes: (alpha, beta, gamma, common).
pub fn three_group_fixture() -> EmbeddedTopic {
    hand_embedded(
        "groups",
        &[
            (
                "a1",
                vec![
                    ("Alpha1 shared fact.", vec![0.3, 0.0, 0.0, 1.0]),
                    ("Alpha1 specific fact.", vec![1.0, 0.0, 0.0, 0.0]),
                ],
            ),
            (
                "b1",
                vec![
                    ("Beta1 shared fact.", vec![0.0, 0.3, 0.0, 1.0]),
                    ("Beta1 specific fact.", vec![0.0, 1.0, 0.0, 0.0]),
                ],
            ),
            (
                "a2",
                vec![
                    ("Alpha2 shared fact.", vec![0.3, 0.0, 0.0, 1.0]),
                    ("Alpha2 specific fact.", vec![1.0, 0.1, 0.0, 0.0]),
                ],
            ),
            (
                "c1",
                vec![
                    ("Gamma1 shared fact.", vec![0.0, 0.0, 0.3, 1.0]),
                    ("Gamma1 specific fact.", vec![0.0, 0.0, 1.0, 0.0]),
                ],
            ),
            (
                "a3",
                vec![
                    ("Alpha3 shared fact.", vec![0.3, 0.0, 0.0, 1.0]),
                    ("Alpha3 specific fact.", vec![1.0, 0.0, 0.1, 0.0]),
                ],
            ),
            (
                "b2",
                vec![
                    ("Beta2 shared fact.", vec![0.0, 0.3, 0.0, 1.0]),
                    ("Beta2 specific fact.", vec![0.1, 1.0, 0.0, 0.0]),
                ],
            ),
        ],
    )
}

/// Random points in the unit cube.
pub fn random_points(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// Points scattered around `groups` random centers.
pub fn clustered_points(
    rng: &mut impl Rng,
    n: usize,
    dim: usize,
    groups: usize,
    spread: f64,
) -> Vec<Vec<f64>> {
    let centers = random_points(rng, groups.max(1), dim);
    (0..n)
        .map(|i| {
            centers[i % centers.len()]
                .iter()
                .map(|c| c + spread * (rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect()
}
