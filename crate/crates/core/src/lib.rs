//! Unsupervised extractive multi-document summarization over a class tree of
//! documents.
//!
//! Documents of a topic are clustered top-down with k-means into a class
//! tree. Sentences are then picked node by node, root first: the root
//! contributes what all documents share, deeper nodes what distinguishes a
//! subgroup of documents from the rest. A ROUGE evaluator, the ablation
//! baselines and a grid search are included for experiments.
//!
//! ```
//! use comspec::{
//!     corpus::{Corpus, Topic},
//!     embedding::{embed_corpus, TfidfProvider},
//!     scoring::Hyperparams,
//!     selection::Budget,
//!     variants::{summarize_topic, Method, VariantSpec},
//! };
//!
//! let topic = Topic::from_texts(
//!     "t1",
//!     vec![
//!         ("a", "The storm hit the coast. Power failed in the city."),
//!         ("b", "The storm hit the coast overnight. Schools closed."),
//!     ],
//!     vec![],
//! )
//! .unwrap();
//! let corpus = Corpus::new(vec![topic]).unwrap();
//! let embedded = embed_corpus(&corpus, &TfidfProvider::new(64, 0).unwrap()).unwrap();
//! let spec = VariantSpec::new(Method::OursFinal, Hyperparams::default(), Budget::words(10), 7);
//! let out = summarize_topic(&embedded.topics[0], &spec).unwrap();
//! assert!(!out.summary.text.is_empty());
//! ```

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod porter;
pub mod rouge;
pub mod scoring;
pub mod selection;
pub mod tree;
pub mod variants;

pub use error::{Error, Result};
