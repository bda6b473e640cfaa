//! Sign heatmaps of selected word vectors with dimensions sorted by a leading
//! word group.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::embed_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::ZERO_EPS;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignClass {
    Positive,
    Negative,
    Zero,
}

impl SignClass {
    /// `|v| < ZERO_EPS` is zero.
    pub fn of(v: f64) -> Self {
        if v.abs() < ZERO_EPS {
            SignClass::Zero
        } else if v > 0.0 {
            SignClass::Positive
        } else {
            SignClass::Negative
        }
    }

    pub fn symbol(self) -> char {
        match self {
            SignClass::Positive => '+',
            SignClass::Negative => '-',
            SignClass::Zero => '0',
        }
    }

    fn fill(self) -> &'static str {
        match self {
            SignClass::Positive => "#d7301f",
            SignClass::Negative => "#2b5cad",
            SignClass::Zero => "#ffffff",
        }
    }
}

/// One panel: the chosen words of one embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapSpec {
    pub label: String,
    pub words: Vec<String>,
    /// The first `group_size` words drive the dimension order.
    pub group_size: usize,
    /// `permutation[r]` is the dimension drawn at column `r`.
    pub permutation: Vec<usize>,
    /// `values[w][r]`: value of word `w` in dimension `permutation[r]`.
    pub values: Vec<Vec<f64>>,
}

impl HeatmapSpec {
    pub fn sign(&self, word: usize, rank: usize) -> SignClass {
        SignClass::of(self.values[word][rank])
    }
}

/// Orders dimensions by the descending mean of the first `group_size` word
/// vectors. The sort is stable, so equal means (an all-zero embedding
/// included) keep dimension order.
pub fn build_heatmap(label: &str, emb: &EmbeddingMatrix, words: &[String], group_size: usize) -> Result<HeatmapSpec> {
    if emb.is_empty() || emb.dim() == 0 {
        return Err(Error::EmptyInput("empty embedding".into()));
    }
    if group_size == 0 || group_size > words.len() {
        return Err(Error::Config(format!(
            "sort group size {group_size} must lie in 1..={}",
            words.len()
        )));
    }
    let rows: Vec<&[f64]> = words.iter().map(|w| emb.require(w).map(|i| emb.row(i))).collect::<Result<_>>()?;
    let mean: Vec<f64> = (0..emb.dim())
        .map(|d| rows[..group_size].iter().map(|r| r[d]).sum::<f64>() / group_size as f64)
        .collect();
    let mut permutation: Vec<usize> = (0..emb.dim()).collect();
    permutation.sort_by(|&a, &b| super::numeric_cmp(mean[b], mean[a]));
    let values = rows
        .iter()
        .map(|r| permutation.iter().map(|&d| r[d]).collect())
        .collect();
    Ok(HeatmapSpec {
        label: label.to_owned(),
        words: words.to_vec(),
        group_size,
        permutation,
        values,
    })
}

/// `embedding,word,dim_rank,dimension,sign,value` rows, panel by panel.
pub fn write_heatmap_csv<W: Write>(specs: &[HeatmapSpec], mut out: W) -> Result<()> {
    writeln!(out, "embedding,word,dim_rank,dimension,sign,value")?;
    for s in specs {
        for (w, word) in s.words.iter().enumerate() {
            for (rank, &dim) in s.permutation.iter().enumerate() {
                let v = s.values[w][rank];
                writeln!(out, "{},{word},{rank},{dim},{},{v:.6}", s.label, SignClass::of(v).symbol())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

const CELL_W: usize = 3;
const CELL_H: usize = 14;
const LABEL_W: usize = 120;
const TITLE_H: usize = 20;
const GAP: usize = 16;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Standalone SVG with one panel per [`HeatmapSpec`], stacked vertically: red for
/// positive, blue for negative, white for zero. A rule separates the sort
/// group from the remaining words.
pub fn write_heatmap_svg<W: Write>(specs: &[HeatmapSpec], mut out: W) -> Result<()> {
    let width = LABEL_W + specs.iter().map(|s| s.permutation.len() * CELL_W).max().unwrap_or(0) + GAP;
    let height: usize = specs.iter().map(|s| TITLE_H + s.words.len() * CELL_H + GAP).sum::<usize>() + GAP;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    )?;
    writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#)?;
    let mut y = GAP;
    for s in specs {
        writeln!(out, r#"<text x="4" y="{}" font-weight="bold">{}</text>"#, y + 14, escape(&s.label))?;
        y += TITLE_H;
        let panel_w = s.permutation.len() * CELL_W;
        for (w, word) in s.words.iter().enumerate() {
            let row_y = y + w * CELL_H;
            writeln!(out, r#"<text x="4" y="{}">{}</text>"#, row_y + CELL_H - 3, escape(word))?;
            for rank in 0..s.permutation.len() {
                let sign = s.sign(w, rank);
                if sign != SignClass::Zero {
                    writeln!(
                        out,
                        r#"<rect x="{}" y="{row_y}" width="{CELL_W}" height="{CELL_H}" fill="{}"/>"#,
                        LABEL_W + rank * CELL_W,
                        sign.fill()
                    )?;
                }
            }
        }
        let rule_y = y + s.group_size * CELL_H;
        writeln!(
            out,
            r##"<line x1="{LABEL_W}" y1="{rule_y}" x2="{}" y2="{rule_y}" stroke="#000" stroke-width="1"/>"##,
            LABEL_W + panel_w
        )?;
        writeln!(
            out,
            r##"<rect x="{LABEL_W}" y="{y}" width="{panel_w}" height="{}" fill="none" stroke="#000" stroke-width="0.5"/>"##,
            s.words.len() * CELL_H
        )?;
        y += s.words.len() * CELL_H + GAP;
    }
    writeln!(out, "</svg>")?;
    out.flush()?;
    Ok(())
}

/// Builds one panel per `(label, embedding)` and writes both the CSV and the
/// SVG.
pub fn export_heatmap(
    embs: &[(&str, &EmbeddingMatrix)],
    words: &[String],
    group_size: usize,
    csv_path: &Path,
    svg_path: &Path,
) -> Result<Vec<HeatmapSpec>> {
    if embs.is_empty() {
        return Err(Error::EmptyInput("no embeddings to draw".into()));
    }
    let specs: Vec<HeatmapSpec> = embs
        .iter()
        .map(|(label, emb)| build_heatmap(label, emb, words, group_size))
        .collect::<Result<_>>()?;
    write_heatmap_csv(&specs, BufWriter::new(File::create(csv_path)?))?;
    write_heatmap_svg(&specs, BufWriter::new(File::create(svg_path)?))?;
    Ok(specs)
}
