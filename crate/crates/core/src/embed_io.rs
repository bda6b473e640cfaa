//! Readers and writers for embeddings, similarity benchmarks, categorized
//! lexicons and labeled sentence corpora.
//!
//! Embeddings use the word2vec text layout: an optional `V dim` header, then
//! one whitespace-separated line per word. Every other format is
//! tab-separated. All parsers accept LF or CRLF line endings, skip blank
//! lines, and report 1-based line numbers in their errors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::textprep::{tokenize, NormalizationRules};

/// Categories with fewer in-vocabulary words than this are dropped.
pub const MIN_GROUP_SIZE: usize = 5;
/// Categories with more in-vocabulary words than this are dropped.
pub const MAX_GROUP_SIZE: usize = 250;

/// A vocabulary with one dense vector per word.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    words: Vec<String>,
    index: HashMap<String, usize>,
    values: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(words: Vec<String>, values: Matrix) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyInput("embedding has no words".into()));
        }
        if values.cols() == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        if words.len() != values.rows() {
            return Err(Error::Shape(format!(
                "{} words but {} vector rows",
                words.len(),
                values.rows()
            )));
        }
        if !values.is_finite() {
            return Err(Error::InvalidValue("embedding has non-finite entries".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::InvalidValue(format!(
                    "token {i} is empty or contains whitespace: {w:?}"
                )));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidValue(format!("duplicate token {w:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            words,
            index,
            values,
        })
    }

    pub fn from_rows<S: Into<String>, R: AsRef<[f64]>>(rows: Vec<(S, R)>) -> Result<Self> {
        let mut words = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len());
        for (w, r) in rows {
            words.push(w.into());
            vectors.push(r.as_ref().to_vec());
        }
        EmbeddingMatrix::new(words, Matrix::from_rows(&vectors)?)
    }

    /// Same vocabulary, new vectors (e.g. the output of a sparse transform).
    pub fn with_values(&self, values: Matrix) -> Result<Self> {
        EmbeddingMatrix::new(self.words.clone(), values)
    }

    /// Number of words, `V`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.values.row(i))
    }

    /// Exact match first, then the lowercased form.
    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.index_of(word)
            .or_else(|| self.index_of(&word.to_lowercase()))
    }

    pub fn require(&self, word: &str) -> Result<usize> {
        self.lookup(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))
    }

    /// Whether every entry is `>= 0`.
    pub fn is_non_negative(&self) -> bool {
        self.values.as_slice().iter().all(|&v| v >= 0.0)
    }
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader.lines().enumerate().map(|(i, l)| {
        (
            i + 1,
            l.map(|mut s| {
                if s.ends_with('\r') {
                    s.pop();
                }
                s
            }),
        )
    })
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let v = fields.next()?.parse().ok()?;
    let d = fields.next()?.parse().ok()?;
    fields.next().is_none().then_some((v, d))
}

/// Reads word2vec-style text embeddings.
///
/// The first non-blank line is a header when it holds exactly two
/// non-negative integers; the declared word count and dimension are then
/// enforced. Without a header the dimension is taken from the first row.
pub fn parse_dense_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingMatrix> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut dim: Option<usize> = None;
    let mut words = Vec::new();
    let mut data = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut first = true;
    let mut last_line = 0;

    for (lineno, line) in lines(reader) {
        let line = line?;
        last_line = lineno;
        if line.trim().is_empty() {
            continue;
        }
        if first {
            first = false;
            if let Some((v, d)) = parse_header(&line) {
                if d == 0 {
                    return Err(Error::parse(lineno, "header declares dimension 0"));
                }
                header = Some((v, d, lineno));
                dim = Some(d);
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line has a field");
        let values: Vec<&str> = fields.collect();
        let expected = *dim.get_or_insert(values.len());
        if values.is_empty() {
            return Err(Error::parse(lineno, format!("token {word:?} has no values")));
        }
        if values.len() != expected {
            return Err(Error::parse(
                lineno,
                format!(
                    "dimension mismatch: expected {expected} values, found {}",
                    values.len()
                ),
            ));
        }
        if let Some(prev) = seen.insert(word.to_owned(), lineno) {
            return Err(Error::parse(
                lineno,
                format!("duplicate token {word:?} (first seen on line {prev})"),
            ));
        }
        for field in values {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric value {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        words.push(word.to_owned());
    }

    if words.is_empty() {
        return Err(Error::EmptyInput("no embedding rows".into()));
    }
    if let Some((v, _, _)) = header {
        if v != words.len() {
            return Err(Error::parse(
                last_line,
                format!("header declares {v} words, found {}", words.len()),
            ));
        }
    }
    let dim = dim.expect("set by the first row");
    let rows = words.len();
    EmbeddingMatrix::new(words, Matrix::new(rows, dim, data)?)
}

/// Writes a `V dim` header and one line per word, each value printed with
/// `precision` digits after the decimal point.
///
/// Rounding is that of Rust's float formatting: the exact binary value is
/// rounded to nearest, ties to even, so `0.25` at precision 1 prints `0.2`.
pub fn write_embeddings<W: Write>(emb: &EmbeddingMatrix, precision: usize, mut out: W) -> Result<()> {
    if precision == 0 {
        return Err(Error::Config("precision must be at least 1".into()));
    }
    writeln!(out, "{} {}", emb.len(), emb.dim())?;
    for (word, row) in emb.words.iter().zip(emb.values.row_iter()) {
        out.write_all(word.as_bytes())?;
        for v in row {
            write!(out, " {v:.precision$}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_embeddings_file(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    parse_dense_embeddings(BufReader::new(open(path.as_ref())?))
}

pub fn write_embeddings_file(
    path: impl AsRef<Path>,
    emb: &EmbeddingMatrix,
    precision: usize,
) -> Result<()> {
    let file = File::create(path.as_ref()).map_err(|e| io_at(path.as_ref(), e))?;
    write_embeddings(emb, precision, BufWriter::new(file))
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io_at(path, e))
}

pub(crate) fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityBenchmark {
    pub name: String,
    pub pairs: Vec<SimilarityPair>,
    pub scale_max: f64,
}

/// Reads `word1<TAB>word2<TAB>score` lines. Lines starting with `#` are
/// comments. Out-of-vocabulary pairs are kept; evaluation skips them.
pub fn parse_similarity_benchmark<R: BufRead>(
    reader: R,
    name: &str,
    scale_max: f64,
) -> Result<SimilarityBenchmark> {
    if !(scale_max.is_finite() && scale_max > 0.0) {
        return Err(Error::Config(format!("scale_max must be positive, got {scale_max}")));
    }
    let mut pairs = Vec::new();
    for (lineno, line) in lines(reader) {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (w1, w2) = (fields[0].trim(), fields[1].trim());
        if w1.is_empty() || w2.is_empty() {
            return Err(Error::parse(lineno, "empty word"));
        }
        let score: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-numeric score {:?}", fields[2])))?;
        if !(0.0..=scale_max).contains(&score) {
            return Err(Error::parse(
                lineno,
                format!("score {score} out of range [0, {scale_max}]"),
            ));
        }
        pairs.push(SimilarityPair {
            word1: w1.to_owned(),
            word2: w2.to_owned(),
            score,
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput(format!("benchmark {name:?} has no pairs")));
    }
    Ok(SimilarityBenchmark {
        name: name.to_owned(),
        pairs,
        scale_max,
    })
}

/// Semantic groups `S_j`, keyed by category name.
///
/// Every retained group has between [`MIN_GROUP_SIZE`] and
/// [`MAX_GROUP_SIZE`] unique words.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryDataset {
    groups: BTreeMap<String, Vec<String>>,
    discarded: usize,
}

impl CategoryDataset {
    /// Deduplicates each group (first occurrence wins) and drops groups
    /// outside the size bounds.
    pub fn new<I, W>(groups: I) -> Self
    where
        I: IntoIterator<Item = (String, W)>,
        W: IntoIterator<Item = String>,
    {
        let mut merged: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (name, words) in groups {
            merged.entry(name).or_default().extend(words);
        }
        let mut discarded = 0;
        let mut kept = BTreeMap::new();
        for (name, words) in merged {
            let mut seen = HashSet::new();
            let unique: Vec<String> = words.into_iter().filter(|w| seen.insert(w.clone())).collect();
            if (MIN_GROUP_SIZE..=MAX_GROUP_SIZE).contains(&unique.len()) {
                kept.insert(name, unique);
            } else {
                discarded += 1;
            }
        }
        CategoryDataset {
            groups: kept,
            discarded,
        }
    }

    /// Keeps only words present in `emb` (matched case-insensitively and
    /// rewritten to the embedding's spelling), then reapplies the size bounds.
    pub fn restrict_to(&self, emb: &EmbeddingMatrix) -> CategoryDataset {
        let folded = folded_index(emb);
        CategoryDataset::new(self.groups.iter().map(|(name, words)| {
            let present: Vec<String> = words
                .iter()
                .filter_map(|w| {
                    emb.index_of(w)
                        .or_else(|| folded.get(&w.to_lowercase()).copied())
                        .map(|i| emb.word(i).to_owned())
                })
                .collect();
            (name.clone(), present)
        }))
    }

    pub fn groups(&self) -> impl ExactSizeIterator<Item = (&str, &[String])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn group(&self, name: &str) -> Option<&[String]> {
        self.groups.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups dropped by the most recent size filter.
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    pub fn mean_group_size(&self) -> f64 {
        if self.groups.is_empty() {
            return 0.0;
        }
        self.groups.values().map(Vec::len).sum::<usize>() as f64 / self.groups.len() as f64
    }
}

fn folded_index(emb: &EmbeddingMatrix) -> HashMap<String, usize> {
    let mut folded = HashMap::new();
    for (i, w) in emb.words().iter().enumerate() {
        folded.entry(w.to_lowercase()).or_insert(i);
    }
    folded
}

/// Reads `category<TAB>word` lines. Words are lowercased. With a vocabulary,
/// groups are intersected with it before the size bounds are applied.
pub fn parse_category_dataset<R: BufRead>(
    reader: R,
    vocabulary: Option<&EmbeddingMatrix>,
) -> Result<CategoryDataset> {
    let mut raw: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (lineno, line) in lines(reader) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (category, word) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "missing tab separator"))?;
        let (category, word) = (category.trim(), word.trim());
        if category.is_empty() || word.is_empty() {
            return Err(Error::parse(lineno, "empty category or word"));
        }
        raw.entry(category.to_owned())
            .or_default()
            .push(word.to_lowercase());
    }
    let total = raw.len();
    let dataset = match vocabulary {
        Some(emb) => {
            let unfiltered = CategoryDataset {
                groups: raw,
                discarded: 0,
            };
            unfiltered.restrict_to(emb)
        }
        None => CategoryDataset::new(raw),
    };
    if dataset.is_empty() {
        return Err(Error::EmptyInput(format!(
            "all {total} categories discarded by the {MIN_GROUP_SIZE}..={MAX_GROUP_SIZE} size filter"
        )));
    }
    Ok(dataset)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub label: String,
}

/// Labeled, tokenized sentences. `labels` is sorted and defines the class
/// order used by classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCorpus {
    pub samples: Vec<LabeledSentence>,
    pub labels: Vec<String>,
}

impl LabeledCorpus {
    pub fn new(samples: Vec<LabeledSentence>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("corpus has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| s.tokens.is_empty()) {
            return Err(Error::InvalidValue(format!("sample {i} has no tokens")));
        }
        let labels: BTreeSet<String> = samples.iter().map(|s| s.label.clone()).collect();
        Ok(LabeledCorpus {
            samples,
            labels: labels.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Class index of every sample, in sample order.
    pub fn label_indices(&self) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| {
                self.labels
                    .binary_search(&s.label)
                    .expect("labels built from samples")
            })
            .collect()
    }
}

/// Reads `label<TAB>sentence` lines; sentences are normalized with the
/// default rules and split on whitespace.
pub fn parse_labeled_sentences<R: BufRead>(reader: R) -> Result<LabeledCorpus> {
    let rules = NormalizationRules::default();
    let mut samples = Vec::new();
    for (lineno, line) in lines(reader) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "missing tab separator"))?;
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::parse(lineno, "empty label"));
        }
        let tokens = tokenize(text, rules);
        if tokens.is_empty() {
            return Err(Error::parse(lineno, "sentence is empty after normalization"));
        }
        samples.push(LabeledSentence {
            tokens,
            label: label.to_owned(),
        });
    }
    LabeledCorpus::new(samples)
}
