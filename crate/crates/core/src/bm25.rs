//! Okapi BM25 average relevance, used as a query-difficulty baseline.
//!
//! Each test query is scored against every document of the training corpus
//! and reduced to the mean. The mean is written in the same scores format as
//! Thrust so routing and evaluation do not care which produced it.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gating::Direction;
use crate::scoring::QueryScore;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// `ln(1 + (n - df + 0.5) / (df + 0.5))`, never negative.
pub fn idf(n_docs: usize, df: usize) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturating term-frequency part of the Okapi formula.
pub fn tf_component(tf: f64, doc_len: f64, avgdl: f64, k1: f64, b: f64) -> f64 {
    tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / avgdl))
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    docs: Vec<HashMap<String, u32>>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
    df: HashMap<String, usize>,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    pub fn build<S: AsRef<str>>(corpus: &[S], k1: f64, b: f64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::InvalidArgument(format!("k1 must be positive, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidArgument(format!("b must be in [0, 1], got {b}")));
        }
        let mut docs = Vec::with_capacity(corpus.len());
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            let tokens = tokenize(doc.as_ref());
            doc_lengths.push(tokens.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for term in tf.keys() {
                *df.entry(term.clone()).or_default() += 1;
            }
            docs.push(tf);
        }
        let avgdl = doc_lengths.iter().sum::<usize>() as f64 / docs.len() as f64;
        if avgdl == 0.0 {
            return Err(Error::DegenerateCorpus);
        }
        Ok(Self {
            docs,
            doc_lengths,
            avgdl,
            df,
            k1,
            b,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_lengths(&self) -> &[usize] {
        &self.doc_lengths
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn tf(&self, doc_index: usize, term: &str) -> u32 {
        self.docs
            .get(doc_index)
            .and_then(|d| d.get(term))
            .copied()
            .unwrap_or(0)
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Relevance of one document. Repeated query terms count once per
    /// occurrence; terms unseen in the corpus contribute nothing.
    pub fn score(&self, query: &str, doc_index: usize) -> Result<f64> {
        if doc_index >= self.docs.len() {
            return Err(Error::DocIndexOutOfRange {
                index: doc_index,
                n_docs: self.docs.len(),
            });
        }
        let terms = tokenize(query);
        Ok(self.score_tokens(&terms, doc_index))
    }

    fn score_tokens(&self, terms: &[String], doc_index: usize) -> f64 {
        let doc = &self.docs[doc_index];
        let dl = self.doc_lengths[doc_index] as f64;
        terms
            .iter()
            .filter_map(|t| {
                let tf = *doc.get(t)?;
                let df = self.df(t);
                Some(idf(self.docs.len(), df) * tf_component(f64::from(tf), dl, self.avgdl, self.k1, self.b))
            })
            .sum()
    }

    /// Mean relevance of `query` over the whole corpus.
    pub fn avg_relevance(&self, query: &str) -> f64 {
        let terms = tokenize(query);
        let total: f64 = (0..self.docs.len()).map(|i| self.score_tokens(&terms, i)).sum();
        total / self.docs.len() as f64
    }

    /// Average relevance of each `(id, text)` query, in input order.
    pub fn score_queries<I, T>(&self, queries: &[(I, T)]) -> Vec<QueryScore>
    where
        I: AsRef<str> + Sync,
        T: AsRef<str> + Sync,
    {
        queries
            .par_iter()
            .map(|(id, text)| QueryScore::new(id.as_ref(), self.avg_relevance(text.as_ref())))
            .collect()
    }
}

pub fn build_index<S: AsRef<str>>(corpus: &[S], k1: f64, b: f64) -> Result<Bm25Index> {
    Bm25Index::build(corpus, k1, b)
}

pub fn bm25_score(index: &Bm25Index, query: &str, doc_index: usize) -> Result<f64> {
    index.score(query, doc_index)
}

pub fn avg_relevance(index: &Bm25Index, query: &str) -> f64 {
    index.avg_relevance(query)
}

/// Which end of the average-relevance ranking counts as difficult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Difficulty {
    /// Queries least similar to the training corpus are hardest.
    #[default]
    LowRelevance,
    HighRelevance,
}

impl Difficulty {
    /// Routing direction that sends the most difficult queries to retrieval first.
    pub fn direction(self) -> Direction {
        match self {
            Difficulty::LowRelevance => Direction::LowFirst,
            Difficulty::HighRelevance => Direction::HighFirst,
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::LowRelevance => "low-relevance",
            Difficulty::HighRelevance => "high-relevance",
        })
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low-relevance" => Ok(Difficulty::LowRelevance),
            "high-relevance" => Ok(Difficulty::HighRelevance),
            _ => Err(Error::InvalidArgument(format!("unknown difficulty {s:?}"))),
        }
    }
}
