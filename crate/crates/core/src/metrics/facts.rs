use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use super::{MetricsError, Prf};
use crate::corpus::tokenize;

const DEFAULT_LEXICON: &str = include_str!("../../data/verbs.txt");
pub const DEFAULT_EMBEDDING_WIDTH: usize = 128;
/// Signed buckets each token writes into.
pub const HASH_SLOTS: usize = 8;

/// An (argument, predicate, argument) fact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactTriple {
    pub arg1: Vec<String>,
    pub predicate: Vec<String>,
    pub arg2: Vec<String>,
    pub sentence: usize,
}

impl FactTriple {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.arg1
            .iter()
            .chain(&self.predicate)
            .chain(&self.arg2)
            .map(String::as_str)
    }

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}", self.arg1.join(" "), self.predicate.join(" "), self.arg2.join(" "))
    }

    pub fn from_tsv(line: &str, sentence: usize) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
        }
        let words = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
        let predicate = words(fields[1]);
        if predicate.is_empty() {
            return Err("empty predicate".into());
        }
        Ok(Self {
            arg1: words(fields[0]),
            predicate,
            arg2: words(fields[2]),
            sentence,
        })
    }
}

pub trait FactExtractor {
    fn extract(&self, text: &str) -> Result<Vec<FactTriple>, MetricsError>;
}

pub trait FactEmbedder {
    /// One vector per triple, all of the same width.
    fn embed(&self, facts: &[FactTriple]) -> Result<Vec<Vec<f64>>, MetricsError>;
}

/// Splits sentences on `.`, `!` and `?` and cuts each at its first predicate
/// word; the predicate extends over adjacent lexicon words.
#[derive(Clone, Debug)]
pub struct LexiconExtractor {
    lexicon: BTreeSet<String>,
}

impl Default for LexiconExtractor {
    fn default() -> Self {
        Self::new(DEFAULT_LEXICON.lines())
    }
}

impl LexiconExtractor {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lexicon = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        Self { lexicon }
    }

    pub fn len(&self) -> usize {
        self.lexicon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexicon.is_empty()
    }

    fn sentence_triple(&self, sentence: &[String], index: usize) -> Option<FactTriple> {
        let start = sentence.iter().position(|t| self.lexicon.contains(t))?;
        let end = sentence[start..]
            .iter()
            .position(|t| !self.lexicon.contains(t))
            .map_or(sentence.len(), |k| start + k);
        Some(FactTriple {
            arg1: sentence[..start].to_vec(),
            predicate: sentence[start..end].to_vec(),
            arg2: sentence[end..].to_vec(),
            sentence: index,
        })
    }
}

impl FactExtractor for LexiconExtractor {
    fn extract(&self, text: &str) -> Result<Vec<FactTriple>, MetricsError> {
        let tokens = tokenize(text);
        let facts = tokens
            .split(|t| matches!(t.as_str(), "." | "!" | "?"))
            .filter(|s| !s.is_empty())
            .enumerate()
            .filter_map(|(i, s)| self.sentence_triple(s, i))
            .collect();
        Ok(facts)
    }
}

fn run_adapter(program: &PathBuf, input: &str) -> Result<String, MetricsError> {
    let fail = |detail: String| MetricsError::Adapter {
        program: program.display().to_string(),
        detail,
    };
    let mut child = Command::new(program)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(format!("failed to start: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let payload = input.to_owned();
    // Feed stdin from another thread so a chatty adapter cannot deadlock us.
    let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));
    let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
    let write_result = writer.join().expect("stdin writer panicked");
    if !out.status.success() {
        return Err(fail(format!(
            "exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    write_result.map_err(|e| fail(format!("writing input: {e}")))?;
    String::from_utf8(out.stdout).map_err(|_| fail("output is not UTF-8".into()))
}

/// Runs an external program: text on stdin, one TSV triple per output line.
#[derive(Clone, Debug)]
pub struct ExecExtractor {
    pub program: PathBuf,
}

impl FactExtractor for ExecExtractor {
    fn extract(&self, text: &str) -> Result<Vec<FactTriple>, MetricsError> {
        let out = run_adapter(&self.program, text)?;
        out.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                FactTriple::from_tsv(l, i).map_err(|detail| MetricsError::Adapter {
                    program: self.program.display().to_string(),
                    detail: format!("line {}: {detail}", i + 1),
                })
            })
            .collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Replaces a zero vector by the first basis vector, then scales to unit norm.
pub fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Signed feature hashing of the triple's tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedEmbedder {
    pub width: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self {
            width: DEFAULT_EMBEDDING_WIDTH,
        }
    }
}

impl HashedEmbedder {
    pub fn embed_one(&self, fact: &FactTriple) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        for token in fact.tokens() {
            for slot in 0..HASH_SLOTS {
                let h = fnv1a(format!("{slot}\u{1f}{token}").as_bytes());
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % self.width as u64) as usize] += sign;
            }
        }
        normalize(v)
    }
}

impl FactEmbedder for HashedEmbedder {
    fn embed(&self, facts: &[FactTriple]) -> Result<Vec<Vec<f64>>, MetricsError> {
        if self.width == 0 {
            return Err(MetricsError::InvalidArgument("embedding width must be positive".into()));
        }
        Ok(facts.iter().map(|f| self.embed_one(f)).collect())
    }
}

/// Runs an external program: TSV triples on stdin, one line of `width`
/// space-separated floats per triple on stdout.
#[derive(Clone, Debug)]
pub struct ExecEmbedder {
    pub program: PathBuf,
    pub width: usize,
}

impl FactEmbedder for ExecEmbedder {
    fn embed(&self, facts: &[FactTriple]) -> Result<Vec<Vec<f64>>, MetricsError> {
        if facts.is_empty() {
            return Ok(Vec::new());
        }
        let fail = |detail: String| MetricsError::Adapter {
            program: self.program.display().to_string(),
            detail,
        };
        let input: String = facts.iter().map(|f| f.to_tsv() + "\n").collect();
        let out = run_adapter(&self.program, &input)?;
        let lines: Vec<&str> = out.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != facts.len() {
            return Err(fail(format!("expected {} vectors, got {}", facts.len(), lines.len())));
        }
        lines
            .iter()
            .enumerate()
            .map(|(i, line)| {
                let v: Vec<f64> = line
                    .split_whitespace()
                    .map(|x| x.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| fail(format!("line {}: {e}", i + 1)))?;
                if v.len() != self.width {
                    return Err(fail(format!("line {}: width {} instead of {}", i + 1, v.len(), self.width)));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(fail(format!("line {}: non-finite value", i + 1)));
                }
                Ok(normalize(v))
            })
            .collect()
    }
}

/// Cosine similarity clamped to `[0, 1]`.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Soft fact matching: precision averages each generated fact's best match
/// among the reference facts, recall the reverse. Empty sides score zero.
pub fn factual_score(generated: &[Vec<f64>], reference: &[Vec<f64>]) -> Prf {
    if generated.is_empty() || reference.is_empty() {
        log::warn!(
            "factual score with {} generated and {} reference facts; scoring 0",
            generated.len(),
            reference.len()
        );
        return Prf::default();
    }
    let best_mean = |xs: &[Vec<f64>], ys: &[Vec<f64>]| {
        xs.iter()
            .map(|x| ys.iter().map(|y| similarity(x, y)).fold(0.0, f64::max))
            .sum::<f64>()
            / xs.len() as f64
    };
    Prf::from_parts(best_mean(generated, reference), best_mean(reference, generated))
}
