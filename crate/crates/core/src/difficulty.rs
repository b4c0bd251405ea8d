//! Per-sample difficulty criteria. Higher values are harder.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_utf8, Corpus, FreqTables, Side};
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// Token count.
    SentLen,
    /// Rank of the least frequent token.
    MaxWfr,
    /// Mean token rank.
    AvgWfr,
    /// `-ln p` of an auxiliary model's one-best translation probability.
    OneBest,
    /// Difficulty values read verbatim from a score file.
    External,
}

/// Which tokens a criterion looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Src,
    Tgt,
    Both,
}

impl Scope {
    fn sides(self) -> &'static [Side] {
        match self {
            Scope::Src => &[Side::Source],
            Scope::Tgt => &[Side::Target],
            Scope::Both => &[Side::Source, Side::Target],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    Max,
    Avg,
}

/// A criterion as written on the command line: `kind:side`, e.g. `avg_wfr:both`.
/// `one_best` and `file` take no side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Criterion {
    pub kind: CriterionKind,
    pub scope: Scope,
}

impl Criterion {
    pub fn new(kind: CriterionKind, scope: Scope) -> Self {
        let scope = match kind {
            CriterionKind::OneBest | CriterionKind::External => Scope::Both,
            _ => scope,
        };
        Criterion { kind, scope }
    }

    /// Filename-safe label, e.g. `avg_wfr_both`.
    pub fn slug(&self) -> String {
        self.to_string().replace(':', "_")
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            CriterionKind::SentLen => "sent_len",
            CriterionKind::MaxWfr => "max_wfr",
            CriterionKind::AvgWfr => "avg_wfr",
            CriterionKind::OneBest => return f.write_str("one_best"),
            CriterionKind::External => return f.write_str("file"),
        };
        let side = match self.scope {
            Scope::Src => "src",
            Scope::Tgt => "tgt",
            Scope::Both => "both",
        };
        write!(f, "{kind}:{side}")
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown criterion {s:?}"));
        let (kind, side) = match s.split_once(':') {
            Some((k, s)) => (k, Some(s)),
            None => (s, None),
        };
        let kind = match kind {
            "sent_len" => CriterionKind::SentLen,
            "max_wfr" => CriterionKind::MaxWfr,
            "avg_wfr" => CriterionKind::AvgWfr,
            "one_best" => CriterionKind::OneBest,
            "file" => CriterionKind::External,
            _ => return Err(bad()),
        };
        let scope = match (kind, side) {
            (CriterionKind::OneBest | CriterionKind::External, None) => Scope::Both,
            (CriterionKind::OneBest | CriterionKind::External, Some(_)) => return Err(bad()),
            (_, Some("src")) => Scope::Src,
            (_, Some("tgt")) => Scope::Tgt,
            (_, Some("both")) => Scope::Both,
            _ => return Err(bad()),
        };
        Ok(Criterion::new(kind, scope))
    }
}

/// Difficulty scores index-aligned with corpus ids; every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyVector {
    criterion: Criterion,
    values: Vec<f64>,
}

impl DifficultyVector {
    pub fn new(criterion: Criterion, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(DifficultyVector { criterion, values })
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes one value per line, line `i` holding sample `i`.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

pub fn score_sentence_length(corpus: &Corpus, scope: Scope) -> DifficultyVector {
    let values = corpus
        .pairs()
        .iter()
        .map(|p| scope.sides().iter().map(|&s| p.tokens(s).len()).sum::<usize>() as f64)
        .collect();
    DifficultyVector {
        criterion: Criterion::new(CriterionKind::SentLen, scope),
        values,
    }
}

pub fn score_word_freq_rank(
    corpus: &Corpus,
    scope: Scope,
    mode: RankMode,
    tables: &FreqTables,
) -> Result<DifficultyVector> {
    score_word_freq_rank_with(corpus, scope, mode, tables, Exec::default())
}

pub fn score_word_freq_rank_with(
    corpus: &Corpus,
    scope: Scope,
    mode: RankMode,
    tables: &FreqTables,
    exec: Exec,
) -> Result<DifficultyVector> {
    let pairs = corpus.pairs();
    let scored = exec.map(pairs.len(), |i| {
        let pair = &pairs[i];
        let mut max = 0u32;
        let mut sum = 0u64;
        let mut n = 0u64;
        for &side in scope.sides() {
            let table = tables.for_side(side);
            for tok in pair.tokens(side) {
                let r = table.rank(tok).ok_or_else(|| Error::UnknownWord {
                    id: pair.id,
                    side: side.as_str(),
                    token: tok.clone(),
                })?;
                max = max.max(r);
                sum += u64::from(r);
                n += 1;
            }
        }
        Ok(match mode {
            RankMode::Max => f64::from(max),
            RankMode::Avg => sum as f64 / n as f64,
        })
    });
    let values = scored.into_iter().collect::<Result<Vec<_>>>()?;
    let kind = match mode {
        RankMode::Max => CriterionKind::MaxWfr,
        RankMode::Avg => CriterionKind::AvgWfr,
    };
    Ok(DifficultyVector {
        criterion: Criterion::new(kind, scope),
        values,
    })
}

fn parse_lines(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != expected {
        return Err(Error::LineCountMismatch {
            left: what.to_owned(),
            left_lines: lines.len(),
            right: "corpus".to_owned(),
            right_lines: expected,
        });
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::ParseError {
                line: i + 1,
                text: l.to_string(),
            })
        })
        .collect()
}

/// Parses one-best probabilities (one per line, in `(0, 1]`) into `-ln p`.
pub fn parse_one_best_scores(text: &str, corpus_len: usize) -> Result<DifficultyVector> {
    let probs = parse_lines(text, corpus_len, "one-best score file")?;
    let mut values = Vec::with_capacity(probs.len());
    for (i, p) in probs.into_iter().enumerate() {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::OutOfRange {
                line: i + 1,
                value: p,
            });
        }
        // 0.0 - ln(1) keeps p = 1 at +0 rather than -0.
        values.push(0.0 - p.ln());
    }
    DifficultyVector::new(Criterion::new(CriterionKind::OneBest, Scope::Both), values)
}

pub fn load_one_best_scores(path: impl AsRef<Path>, corpus: &Corpus) -> Result<DifficultyVector> {
    parse_one_best_scores(&read_utf8(path.as_ref())?, corpus.len())
}

/// Reads an exported difficulty vector (any criterion) as-is.
pub fn load_difficulty_file(path: impl AsRef<Path>, corpus: &Corpus) -> Result<DifficultyVector> {
    let text = read_utf8(path.as_ref())?;
    let values = parse_lines(&text, corpus.len(), "difficulty file")?;
    DifficultyVector::new(Criterion::new(CriterionKind::External, Scope::Both), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(src: &str, tgt: &str) -> Corpus {
        Corpus::from_texts(src, tgt).unwrap()
    }

    #[test]
    fn sentence_length_per_scope() {
        let c = corpus("ein kleiner test", "a small test");
        assert_eq!(score_sentence_length(&c, Scope::Src).values(), [3.0]);
        assert_eq!(score_sentence_length(&c, Scope::Both).values(), [6.0]);
        let c = corpus("x", "y");
        assert_eq!(score_sentence_length(&c, Scope::Tgt).values(), [1.0]);
    }

    #[test]
    fn word_freq_rank_max_and_avg() {
        let c = corpus("a a a\nb c", "x\ny");
        let t = FreqTables::build(&c).unwrap();
        let max = score_word_freq_rank(&c, Scope::Src, RankMode::Max, &t).unwrap();
        assert_eq!(max.values()[1], 2.0);
        let avg = score_word_freq_rank(&c, Scope::Src, RankMode::Avg, &t).unwrap();
        assert_eq!(avg.values()[0], 1.0);

        let c = corpus("a b\na", "x\nx");
        let t = FreqTables::build(&c).unwrap();
        let avg = score_word_freq_rank(&c, Scope::Src, RankMode::Avg, &t).unwrap();
        assert_eq!(avg.values()[0], 1.5);
    }

    #[test]
    fn both_sides_pool_tokens_with_separate_tables() {
        // "a" is rank 1 on the source side but rank 2 on the target side.
        let c = corpus("a a\nb", "a z z\nz");
        let t = FreqTables::build(&c).unwrap();
        let avg = score_word_freq_rank(&c, Scope::Both, RankMode::Avg, &t).unwrap();
        // pair 0: src a(1) a(1), tgt a(2) z(1) z(1) -> 6/5
        assert_eq!(avg.values()[0], 6.0 / 5.0);
        let max = score_word_freq_rank(&c, Scope::Both, RankMode::Max, &t).unwrap();
        assert_eq!(max.values(), [2.0, 2.0]);
    }

    #[test]
    fn unknown_word_signals_table_mismatch() {
        let c = corpus("a", "x");
        let other = corpus("b", "x");
        let t = FreqTables::build(&other).unwrap();
        let err = score_word_freq_rank(&c, Scope::Src, RankMode::Max, &t).unwrap_err();
        assert!(matches!(err, Error::UnknownWord { id: 0, .. }));
    }

    #[test]
    fn one_best_is_negative_log() {
        let v = parse_one_best_scores("1.0\n0.5\n0.25\n", 3).unwrap();
        assert_eq!(v.values()[0], 0.0);
        assert!(v.values()[0].is_sign_positive());
        assert!(v.values()[2] > v.values()[1]);
        assert!((v.values()[1] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn one_best_errors() {
        assert!(matches!(
            parse_one_best_scores("0.5\n", 2),
            Err(Error::LineCountMismatch { .. })
        ));
        assert!(matches!(
            parse_one_best_scores("0.5\nabc\n", 2),
            Err(Error::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse_one_best_scores("0\n", 1),
            Err(Error::OutOfRange { line: 1, .. })
        ));
        assert!(matches!(
            parse_one_best_scores("1.5\n", 1),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            parse_one_best_scores("NaN\n", 1),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn criterion_syntax() {
        let c: Criterion = "avg_wfr:both".parse().unwrap();
        assert_eq!(c.kind, CriterionKind::AvgWfr);
        assert_eq!(c.scope, Scope::Both);
        assert_eq!(c.to_string(), "avg_wfr:both");
        assert_eq!(c.slug(), "avg_wfr_both");
        assert_eq!("one_best".parse::<Criterion>().unwrap().to_string(), "one_best");
        assert!("sent_len".parse::<Criterion>().is_err());
        assert!("sent_len:left".parse::<Criterion>().is_err());
        assert!("one_best:src".parse::<Criterion>().is_err());
        assert!("bleu:src".parse::<Criterion>().is_err());
    }

    #[test]
    fn score_file_round_trip() {
        let c = corpus("a b\nc\nd e f", "x\ny\nz");
        let v = score_sentence_length(&c, Scope::Both);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.txt");
        v.save(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "3\n2\n4\n");
        let back = load_difficulty_file(&path, &c).unwrap();
        assert_eq!(back.values(), v.values());
    }

    #[test]
    fn rejects_non_finite() {
        let crit = Criterion::new(CriterionKind::External, Scope::Both);
        assert!(matches!(
            DifficultyVector::new(crit, vec![1.0, f64::INFINITY]),
            Err(Error::NonFinite(1))
        ));
    }
}
