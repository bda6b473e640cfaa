//! Word-intrusion questions: four words from the top of a dimension plus one
//! intruder from its bottom half that ranks high somewhere else.

use std::io::Write;

use super::{positions, ranking, Direction};
use crate::embed_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numcore::SeededRng;

/// Source dimensions tried per question before giving up.
pub const MAX_RETRIES: usize = 100;

/// Rank bands for a vocabulary of `V` words. Ranks are 0-based positions in
/// descending order, ties by vocabulary index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntrusionBands {
    /// Ranks `< top` form the top 10%: `ceil(0.1·V)`.
    pub top: usize,
    /// Ranks `< high` form the top 20%: `ceil(0.2·V)`.
    pub high: usize,
    /// Ranks `>= bottom` form the bottom half: `V - floor(V/2)`.
    pub bottom: usize,
}

impl IntrusionBands {
    pub fn for_vocabulary(v: usize) -> Result<Self> {
        if v < 10 {
            return Err(Error::InvalidValue(format!(
                "intrusion questions need at least 10 words, got {v}"
            )));
        }
        let bands = IntrusionBands {
            top: v.div_ceil(10),
            high: v.div_ceil(5),
            bottom: v - v / 2,
        };
        if bands.top < 4 {
            return Err(Error::InvalidValue(format!(
                "top 10% of {v} words holds {} words, fewer than the 4 a question needs",
                bands.top
            )));
        }
        Ok(bands)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntrusionQuestion {
    pub words: [String; 5],
    pub intruder: usize,
    pub source_dim: usize,
    pub home_dim: usize,
}

struct RankTable {
    /// `pos[d][w]`: rank of word `w` in dimension `d`.
    pos: Vec<Vec<usize>>,
    /// `order[d]`: words of dimension `d` in rank order.
    order: Vec<Vec<usize>>,
}

impl RankTable {
    fn new(emb: &EmbeddingMatrix) -> Self {
        let order: Vec<Vec<usize>> = (0..emb.dim()).map(|d| ranking(emb, d, Direction::Positive)).collect();
        let pos = order.iter().map(|o| positions(o)).collect();
        RankTable { pos, order }
    }
}

/// Generates `count` questions. Each question draws a source dimension, four
/// distinct words from its top band, and an intruder from its bottom half
/// that sits in the top 20% of some other (home) dimension; the intruder's
/// slot among the five is random. A source dimension without any eligible
/// intruder is redrawn, up to [`MAX_RETRIES`] times.
pub fn generate_intrusion_questions(
    emb: &EmbeddingMatrix,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<IntrusionQuestion>> {
    let bands = IntrusionBands::for_vocabulary(emb.len())?;
    if emb.dim() < 2 {
        return Err(Error::NoEligibleIntruder(
            "a single dimension leaves no home dimension for an intruder".into(),
        ));
    }
    let table = RankTable::new(emb);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(one_question(emb, &table, bands, rng)?);
    }
    Ok(out)
}

fn one_question(
    emb: &EmbeddingMatrix,
    table: &RankTable,
    bands: IntrusionBands,
    rng: &mut SeededRng,
) -> Result<IntrusionQuestion> {
    let dims = emb.dim();
    for _ in 0..MAX_RETRIES {
        let source = rng.below(dims);
        let candidates: Vec<usize> = table.order[source][bands.bottom..]
            .iter()
            .copied()
            .filter(|&w| (0..dims).any(|d| d != source && table.pos[d][w] < bands.high))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let chosen = rng.sample(&table.order[source][..bands.top], 4);
        let intruder = candidates[rng.below(candidates.len())];
        let homes: Vec<usize> = (0..dims)
            .filter(|&d| d != source && table.pos[d][intruder] < bands.high)
            .collect();
        let home_dim = homes[rng.below(homes.len())];
        let slot = rng.below(5);
        let mut words: Vec<String> = chosen.iter().map(|&w| emb.word(w).to_owned()).collect();
        words.insert(slot, emb.word(intruder).to_owned());
        return Ok(IntrusionQuestion {
            words: words.try_into().expect("five words"),
            intruder: slot,
            source_dim: source,
            home_dim,
        });
    }
    Err(Error::NoEligibleIntruder(format!(
        "no dimension offered an intruder in {MAX_RETRIES} draws"
    )))
}

/// Checks every band constraint of `q` against `emb`.
pub fn check_question(emb: &EmbeddingMatrix, q: &IntrusionQuestion) -> Result<()> {
    let bands = IntrusionBands::for_vocabulary(emb.len())?;
    let bad = |msg: String| Err(Error::InvalidValue(msg));
    if q.intruder >= 5 {
        return bad(format!("intruder index {} out of range", q.intruder));
    }
    if q.source_dim >= emb.dim() || q.home_dim >= emb.dim() {
        return bad("dimension out of range".into());
    }
    if q.source_dim == q.home_dim {
        return bad("home dimension equals source dimension".into());
    }
    let source = positions(&ranking(emb, q.source_dim, Direction::Positive));
    let home = positions(&ranking(emb, q.home_dim, Direction::Positive));
    let mut seen = Vec::with_capacity(5);
    for (slot, word) in q.words.iter().enumerate() {
        let w = emb.require(word)?;
        if seen.contains(&w) {
            return bad(format!("word {word:?} repeated"));
        }
        seen.push(w);
        if slot == q.intruder {
            if source[w] < bands.bottom {
                return bad(format!("intruder {word:?} has source rank {}", source[w]));
            }
            if home[w] >= bands.high {
                return bad(format!("intruder {word:?} has home rank {}", home[w]));
            }
        } else if source[w] >= bands.top {
            return bad(format!("word {word:?} has source rank {}", source[w]));
        }
    }
    Ok(())
}

/// One question per line: `w1..w5`, source dimension, home dimension,
/// intruder index, tab-separated.
pub fn write_questions<W: Write>(questions: &[IntrusionQuestion], mut out: W) -> Result<()> {
    for q in questions {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            q.words.join("\t"),
            q.source_dim,
            q.home_dim,
            q.intruder
        )?;
    }
    out.flush()?;
    Ok(())
}
