//! The eight-entry palette of most frequent levels.
//!
//! The palette values are fixed for a whole tensor. Their order changes at
//! every tile boundary: entries are stably re-sorted by how often each value
//! occurred in the tiles coded so far, so encoder and decoder derive the same
//! order from already-coded samples. Each tile then picks the entry `j*`
//! closest (in summed absolute difference) to its samples.

use std::cmp::Reverse;

use crate::error::Result;

pub const PALETTE_SIZE: usize = 8;

/// The eight most frequent levels, ties broken toward the smaller level.
///
/// With fewer than eight distinct levels the remaining slots are the
/// smallest unused levels in ascending order.
pub fn extract_palette(data: &[u8]) -> [u8; PALETTE_SIZE] {
    let hist = histogram(data);
    let mut levels: Vec<u8> = (0..=255).collect();
    levels.sort_by_key(|&v| (Reverse(hist[v as usize]), v));
    levels[..PALETTE_SIZE].try_into().unwrap()
}

/// Orders `values` by descending frequency within the first tile, stable on ties.
pub fn initial_sort(values: [u8; PALETTE_SIZE], first_tile: &[u8]) -> [u8; PALETTE_SIZE] {
    let hist = histogram(first_tile);
    let mut order = values;
    order.sort_by_key(|&v| Reverse(hist[v as usize]));
    order
}

/// `argmin_j sum_i |x_i - p_j|`, smallest `j` on ties.
pub fn select_index(order: &[u8; PALETTE_SIZE], tile: &[u8]) -> u8 {
    let hist = histogram(tile);
    let mut best = (u64::MAX, 0u8);
    for (j, &p) in order.iter().enumerate() {
        let sad: u64 = hist
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(v, &n)| n * (v as i64 - i64::from(p)).unsigned_abs())
            .sum();
        if sad < best.0 {
            best = (sad, j as u8);
        }
    }
    best.1
}

fn histogram(data: &[u8]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in data {
        hist[v as usize] += 1;
    }
    hist
}

/// Palette order and cumulative occurrence counts for one coding session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaletteState {
    // (value, occurrences in coded tiles), in current order.
    entries: [(u8, u64); PALETTE_SIZE],
}

impl PaletteState {
    /// Starts from the transmitted (initially sorted) order with zero counts.
    pub fn new(initial_order: [u8; PALETTE_SIZE]) -> Self {
        Self {
            entries: initial_order.map(|v| (v, 0)),
        }
    }

    pub fn order(&self) -> [u8; PALETTE_SIZE] {
        self.entries.map(|(v, _)| v)
    }

    pub fn value(&self, index: u8) -> u8 {
        self.entries[index as usize].0
    }

    pub fn cum_counts(&self) -> [u64; PALETTE_SIZE] {
        self.entries.map(|(_, n)| n)
    }

    /// Adds the exact-match counts of a fully coded tile.
    pub fn accumulate(&mut self, tile: &[u8]) {
        let hist = histogram(tile);
        for (v, n) in &mut self.entries {
            *n += hist[*v as usize];
        }
    }

    /// Re-sorts by descending cumulative count; equal counts keep their order.
    pub fn resort(&mut self) {
        self.entries.sort_by_key(|&(_, n)| Reverse(n));
    }
}

/// Truncated unary codeword of a palette index: `j` ones followed by a
/// terminating zero, except index 7 which drops the terminator.
pub fn unary_encode(index: u8) -> Vec<bool> {
    assert!(
        (index as usize) < PALETTE_SIZE,
        "palette index {index} out of range"
    );
    let mut bits = vec![true; index as usize];
    if (index as usize) < PALETTE_SIZE - 1 {
        bits.push(false);
    }
    bits
}

/// Reads a truncated unary palette index, pulling bits from `next_bit`.
pub fn unary_decode(mut next_bit: impl FnMut() -> Result<bool>) -> Result<u8> {
    let mut index = 0u8;
    while (index as usize) < PALETTE_SIZE - 1 && next_bit()? {
        index += 1;
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code_string(index: u8) -> String {
        unary_encode(index)
            .into_iter()
            .map(|b| if b { '1' } else { '0' })
            .collect()
    }

    /// Direct frequency ranking used as an oracle.
    fn brute_palette(data: &[u8]) -> Vec<u8> {
        let mut counted: Vec<(usize, u8)> = (0..=255u8)
            .map(|v| (data.iter().filter(|&&x| x == v).count(), v))
            .collect();
        counted.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        counted.into_iter().take(8).map(|(_, v)| v).collect()
    }

    #[test]
    fn extraction_with_padding() {
        assert_eq!(
            extract_palette(&[7, 7, 7, 2, 2, 9]),
            [7, 2, 9, 0, 1, 3, 4, 5]
        );
        assert_eq!(extract_palette(&[5; 40]), [5, 0, 1, 2, 3, 4, 6, 7]);
        let uniform: Vec<u8> = (0..=255).collect();
        assert_eq!(extract_palette(&uniform), [0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn initial_sort_cases() {
        let values = [10, 11, 12, 13, 14, 15, 16, 17];
        assert_eq!(initial_sort(values, &[13; 9])[0], 13);

        let mut tile = vec![10u8; 5];
        tile.extend([11; 5]);
        tile.extend([12; 9]);
        assert_eq!(&initial_sort(values, &tile)[..3], &[12, 10, 11]);

        assert_eq!(initial_sort(values, &[200, 201, 202]), values);
    }

    #[test]
    fn resort_follows_counts() {
        let mut s = PaletteState::new([0, 1, 2, 3, 4, 5, 6, 7]);
        s.resort();
        assert_eq!(s.order(), [0, 1, 2, 3, 4, 5, 6, 7]);

        s.accumulate(&[5; 169]);
        s.resort();
        assert_eq!(s.order(), [5, 0, 1, 2, 3, 4, 6, 7]);
        assert_eq!(s.cum_counts()[0], 169);

        s.accumulate(&[[3u8; 100].as_slice(), &[6; 100]].concat());
        s.resort();
        assert_eq!(s.order(), [5, 3, 6, 0, 1, 2, 4, 7]);
    }

    #[test]
    fn select_index_cases() {
        let p = [10, 20, 30, 40, 50, 60, 70, 80];
        assert_eq!(select_index(&p, &[50; 16]), 4);
        assert_eq!(select_index(&p, &[19; 16]), 1);
        // 15 is equidistant from 10 and 20
        assert_eq!(select_index(&p, &[15; 16]), 0);
        // {10, 20}: sums tie at 10 for j=0 and j=1
        assert_eq!(select_index(&p, &[10, 20]), 0);
    }

    #[test]
    fn unary_codewords() {
        assert_eq!(code_string(0), "0");
        assert_eq!(code_string(1), "10");
        assert_eq!(code_string(2), "110");
        assert_eq!(code_string(5), "111110");
        assert_eq!(code_string(6), "1111110");
        assert_eq!(code_string(7), "1111111");
    }

    #[test]
    fn unary_roundtrip() {
        for j in 0..8u8 {
            let bits = unary_encode(j);
            assert!(bits.len() <= 7);
            let mut it = bits.iter().copied();
            let decoded = unary_decode(|| Ok(it.next().expect("decoder over-read"))).unwrap();
            assert_eq!(decoded, j);
            assert!(it.next().is_none());
        }
    }

    proptest! {
        #[test]
        fn extraction_matches_brute_force(data in proptest::collection::vec(0u8..24, 1..200)) {
            prop_assert_eq!(extract_palette(&data).to_vec(), brute_palette(&data));
        }

        #[test]
        fn selection_matches_brute_force(
            p in proptest::array::uniform8(any::<u8>()),
            tile in proptest::collection::vec(any::<u8>(), 1..64),
        ) {
            let sums: Vec<u64> = p
                .iter()
                .map(|&pj| tile.iter().map(|&x| (i64::from(x) - i64::from(pj)).unsigned_abs()).sum())
                .collect();
            let min = *sums.iter().min().unwrap();
            let expected = sums.iter().position(|&s| s == min).unwrap() as u8;
            prop_assert_eq!(select_index(&p, &tile), expected);
        }

        #[test]
        fn resort_keeps_a_permutation(
            tiles in proptest::collection::vec(proptest::collection::vec(0u8..12, 1..30), 1..6),
        ) {
            let mut s = PaletteState::new([3, 1, 4, 0, 5, 9, 2, 6]);
            let mut prev = s.cum_counts().iter().sum::<u64>();
            for t in &tiles {
                s.accumulate(t);
                s.resort();
                let mut sorted = s.order();
                sorted.sort();
                prop_assert_eq!(sorted, [0, 1, 2, 3, 4, 5, 6, 9]);
                let counts = s.cum_counts();
                prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
                let total = counts.iter().sum::<u64>();
                prop_assert!(total >= prev);
                prev = total;
            }
        }
    }
}
