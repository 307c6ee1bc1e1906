//! Value statistics of quantized tensors: histograms, entropy, and the
//! palette/neighbour similarity cascade.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::palette::PALETTE_SIZE;
use crate::tensor::QuantizedTensor;

/// Column labels of a [`SimilarityReport`], in report order.
pub const BUCKET_NAMES: [&str; 7] = ["AD_m", "AD_l", "AD_t", "AD_tl", "AD_bl", "AD_tr", "none"];

/// Neighbour offsets `(dx, dy)` tested after the palette, in cascade order.
const NEIGHBOURS: [(isize, isize); 5] = [(-1, 0), (0, -1), (-1, -1), (-1, 1), (1, -1)];

pub fn histogram(samples: &[u8]) -> [u64; 256] {
    let mut counts = [0u64; 256];
    for &s in samples {
        counts[s as usize] += 1;
    }
    counts
}

/// Shannon entropy in bits of the distribution given by `counts`.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let total = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            // p * log2(1/p) keeps a single bin at +0
            p * (total / c as f64).log2()
        })
        .sum())
}

/// Outcome of [`ad_similarity`]: one count per bucket in [`BUCKET_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityReport {
    pub counts: [u64; 7],
    pub threshold: u32,
    pub samples: u64,
}

impl SimilarityReport {
    pub fn percentages(&self) -> [f64; 7] {
        let mut out = [0.0; 7];
        if self.samples > 0 {
            for (o, &c) in out.iter_mut().zip(&self.counts) {
                *o = 100.0 * c as f64 / self.samples as f64;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = BUCKET_NAMES.join(",");
        s.push('\n');
        let row: Vec<String> = self
            .percentages()
            .iter()
            .map(|p| format!("{p:.2}"))
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} |", BUCKET_NAMES.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(BUCKET_NAMES.len()));
        let row: Vec<String> = self
            .percentages()
            .iter()
            .map(|p| format!("{p:.2}"))
            .collect();
        let _ = writeln!(s, "| {} |", row.join(" | "));
        s
    }
}

/// Classifies every sample against the palette values and then against its
/// left, top, top-left, bottom-left and top-right neighbours, stopping at the
/// first one within `threshold` (strictly less). Neighbours are taken inside
/// the sample's own channel; a missing neighbour never matches.
pub fn ad_similarity(
    q: &QuantizedTensor,
    palette: &[u8; PALETTE_SIZE],
    threshold: u32,
) -> SimilarityReport {
    let (rows, cols) = (q.rows(), q.cols());
    let counts = (0..q.channels())
        .into_par_iter()
        .map(|c| channel_counts(q.channel(c), rows, cols, palette, threshold))
        .reduce(
            || [0u64; 7],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    SimilarityReport {
        counts,
        threshold,
        samples: q.len() as u64,
    }
}

fn channel_counts(
    plane: &[u8],
    rows: usize,
    cols: usize,
    palette: &[u8; PALETTE_SIZE],
    threshold: u32,
) -> [u64; 7] {
    let close = |a: u8, b: u8| u32::from(a.abs_diff(b)) < threshold;
    let mut counts = [0u64; 7];
    for y in 0..rows {
        for x in 0..cols {
            let v = plane[y * cols + x];
            let bucket = if palette.iter().any(|&m| close(v, m)) {
                0
            } else {
                NEIGHBOURS
                    .iter()
                    .position(|&(dx, dy)| {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        (0..cols as isize).contains(&nx)
                            && (0..rows as isize).contains(&ny)
                            && close(v, plane[ny as usize * cols + nx as usize])
                    })
                    .map_or(6, |i| i + 1)
            };
            counts[bucket] += 1;
        }
    }
    counts
}
