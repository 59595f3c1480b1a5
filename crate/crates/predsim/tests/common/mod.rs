//! Shared fixtures: seeded synthetic corpora with planted topic structure.

#![allow(dead_code)]

use std::fmt::Write as _;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use predsim::{Document, TrainingCorpus};

pub const TOPIC_A_WORDS: usize = 20;
pub const TOPIC_B_WORDS: usize = 20;

/// The shared word that occurs in documents of both topics; its conditioned
/// neighborhoods are what the topic keyword sets pull apart.
pub const PIVOT: &str = "pivot";

pub fn topic_a_word(i: usize) -> String {
    format!("a{i:02}")
}

pub fn topic_b_word(i: usize) -> String {
    format!("b{i:02}")
}

fn draw_doc(
    rng: &mut ChaCha8Rng,
    topic_word: impl Fn(usize) -> String,
    n_topic_words: usize,
    len: usize,
) -> Vec<String> {
    let shared = ["och", "det", "som"];
    let mut tokens = Vec::with_capacity(len);
    for _ in 0..len {
        let roll: f64 = rng.random();
        if roll < 0.08 {
            tokens.push(PIVOT.to_string());
        } else if roll < 0.20 {
            tokens.push(shared[rng.random_range(0..shared.len())].to_string());
        } else {
            tokens.push(topic_word(rng.random_range(0..n_topic_words)));
        }
    }
    tokens
}

/// Two-topic corpus: disjoint topical vocabularies plus a handful of shared
/// words and the pivot. About 9600 tokens.
pub fn two_topic_corpus(seed: u64) -> TrainingCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::new();
    for d in 0..120 {
        documents.push(Document {
            source: format!("alpha{:02}", d % 4),
            tokens: draw_doc(&mut rng, topic_a_word, TOPIC_A_WORDS, 40),
        });
        documents.push(Document {
            source: format!("beta{:02}", d % 4),
            tokens: draw_doc(&mut rng, topic_b_word, TOPIC_B_WORDS, 40),
        });
    }
    TrainingCorpus::new(documents)
}

/// Corpus for the source-similarity pipeline: two "media" sources and two
/// "party" sources per topic, so tables have a planted alignment.
pub fn pipeline_corpus(seed: u64) -> TrainingCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::new();
    let sides: [(&str, &str, fn(usize) -> String, usize); 2] = [
        ("alpha.news", "party.x", topic_a_word, TOPIC_A_WORDS),
        ("beta.news", "party.y", topic_b_word, TOPIC_B_WORDS),
    ];
    for _ in 0..60 {
        for (media, party, word, n) in sides {
            documents.push(Document {
                source: media.to_string(),
                tokens: draw_doc(&mut rng, word, n, 40),
            });
            documents.push(Document {
                source: party.to_string(),
                tokens: draw_doc(&mut rng, word, n, 40),
            });
        }
    }
    TrainingCorpus::new(documents)
}

/// Serializes a corpus as the line-delimited JSON interchange format.
pub fn corpus_to_jsonl(corpus: &TrainingCorpus) -> String {
    let mut out = String::new();
    for doc in corpus.documents() {
        let record = serde_json::json!({
            "source": doc.source,
            "text": doc.tokens.join(" "),
        });
        writeln!(out, "{record}").unwrap();
    }
    out
}

pub fn jaccard<T: std::hash::Hash + Eq + Clone>(a: &[T], b: &[T]) -> f64 {
    let sa: std::collections::HashSet<T> = a.iter().cloned().collect();
    let sb: std::collections::HashSet<T> = b.iter().cloned().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
