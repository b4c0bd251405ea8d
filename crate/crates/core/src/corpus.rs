//! Line-aligned parallel corpora and per-language word frequency tables.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

/// One side of the bitext.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Source => "source",
            Side::Target => "target",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An aligned sentence pair. `id` is the 0-based line number in both files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePair {
    pub id: usize,
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

impl SamplePair {
    pub fn tokens(&self, side: Side) -> &[String] {
        match side {
            Side::Source => &self.src,
            Side::Target => &self.tgt,
        }
    }

    /// Source plus target token count; the unit of the batch word budget.
    pub fn word_count(&self) -> usize {
        self.src.len() + self.tgt.len()
    }

    /// Length used for bucketing: the longer of the two sides.
    pub fn bucket_len(&self) -> usize {
        self.src.len().max(self.tgt.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pairs: Vec<SamplePair>,
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_ascii_whitespace().map(str::to_owned).collect()
}

impl Corpus {
    /// Builds a corpus from the two sides' full text, one sentence per line.
    pub fn from_texts(src: &str, tgt: &str) -> Result<Self> {
        Self::from_named_texts(("source", src), ("target", tgt))
    }

    fn from_named_texts(src: (&str, &str), tgt: (&str, &str)) -> Result<Self> {
        let src_lines: Vec<&str> = src.1.lines().collect();
        let tgt_lines: Vec<&str> = tgt.1.lines().collect();
        if src_lines.len() != tgt_lines.len() {
            return Err(Error::LineCountMismatch {
                left: src.0.to_owned(),
                left_lines: src_lines.len(),
                right: tgt.0.to_owned(),
                right_lines: tgt_lines.len(),
            });
        }
        let mut pairs = Vec::with_capacity(src_lines.len());
        for (id, (s, t)) in src_lines.iter().zip(&tgt_lines).enumerate() {
            let src = tokenize(s);
            let tgt = tokenize(t);
            if src.is_empty() || tgt.is_empty() {
                return Err(Error::EmptyLine(id));
            }
            pairs.push(SamplePair { id, src, tgt });
        }
        Ok(Corpus { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[SamplePair] {
        &self.pairs
    }

    pub fn get(&self, id: usize) -> Option<&SamplePair> {
        self.pairs.get(id)
    }

    pub fn total_tokens(&self, side: Side) -> usize {
        self.pairs.iter().map(|p| p.tokens(side).len()).sum()
    }
}

impl std::ops::Index<usize> for Corpus {
    type Output = SamplePair;

    fn index(&self, id: usize) -> &SamplePair {
        &self.pairs[id]
    }
}

pub(crate) fn read_utf8(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|_| Error::InvalidEncoding {
        path: path.to_path_buf(),
    })
}

/// Loads a line-aligned bitext from two UTF-8 files. Tokens are split on
/// ASCII whitespace; subword segmentation is expected upstream.
pub fn load_bitext(src_path: impl AsRef<Path>, tgt_path: impl AsRef<Path>) -> Result<Corpus> {
    let (src_path, tgt_path) = (src_path.as_ref(), tgt_path.as_ref());
    let src = read_utf8(src_path)?;
    let tgt = read_utf8(tgt_path)?;
    Corpus::from_named_texts(
        (&src_path.display().to_string(), &src),
        (&tgt_path.display().to_string(), &tgt),
    )
}

/// Word counts and competition ranks for one language.
///
/// `rank(w) = 1 + |{v : count(v) > count(w)}|`, so tied words share the
/// smaller rank and the most frequent word has rank 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreqTable {
    side: Side,
    counts: HashMap<String, u64>,
    ranks: HashMap<String, u32>,
}

impl FreqTable {
    pub fn from_counts(side: Side, counts: HashMap<String, u64>) -> Self {
        let mut by_count: Vec<(&String, u64)> = counts.iter().map(|(w, &c)| (w, c)).collect();
        by_count.sort_unstable_by(|a, b| b.1.cmp(&a.1));
        let mut ranks = HashMap::with_capacity(counts.len());
        let mut rank = 1u32;
        let mut prev = None;
        for (pos, (word, count)) in by_count.into_iter().enumerate() {
            if prev != Some(count) {
                rank = pos as u32 + 1;
                prev = Some(count);
            }
            ranks.insert(word.clone(), rank);
        }
        FreqTable {
            side,
            counts,
            ranks,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.counts.get(word).copied()
    }

    pub fn rank(&self, word: &str) -> Option<u32> {
        self.ranks.get(word).copied()
    }

    pub fn counts(&self) -> &HashMap<String, u64> {
        &self.counts
    }

    pub fn ranks(&self) -> &HashMap<String, u32> {
        &self.ranks
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }
}

pub fn build_freq_table(corpus: &Corpus, side: Side) -> Result<FreqTable> {
    build_freq_table_with(corpus, side, Exec::default())
}

pub fn build_freq_table_with(corpus: &Corpus, side: Side, exec: Exec) -> Result<FreqTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pairs = corpus.pairs();
    let counts = exec.fold_reduce(
        pairs.len(),
        HashMap::<String, u64>::new,
        |mut acc, i| {
            for tok in pairs[i].tokens(side) {
                *acc.entry(tok.clone()).or_insert(0) += 1;
            }
            acc
        },
        |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (w, c) in small {
                *big.entry(w).or_insert(0) += c;
            }
            big
        },
    );
    Ok(FreqTable::from_counts(side, counts))
}

/// Source and target tables built from the same corpus.
#[derive(Debug, Clone)]
pub struct FreqTables {
    pub source: FreqTable,
    pub target: FreqTable,
}

impl FreqTables {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        Ok(FreqTables {
            source: build_freq_table(corpus, Side::Source)?,
            target: build_freq_table(corpus, Side::Target)?,
        })
    }

    pub fn for_side(&self, side: Side) -> &FreqTable {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }
}
