//! Character-level Levenshtein distance using the blocked bit-vector
//! algorithm (Myers 1999, Hyyrö 2003): O(⌈m/64⌉·n) word operations.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

const HIGH_BIT: u64 = 1 << 63;

/// Levenshtein distance between the character sequences of `a` and `b`.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    // The shorter string is the bit-parallel pattern.
    let (pattern, text) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = pattern.len();
    if m == 0 {
        return text.len();
    }
    let words = m.div_ceil(64);

    let mut ascii = vec![0u64; 128 * words];
    let mut other: BTreeMap<char, Vec<u64>> = BTreeMap::new();
    for (i, &c) in pattern.iter().enumerate() {
        let (w, bit) = (i / 64, 1u64 << (i % 64));
        if (c as u32) < 128 {
            ascii[c as usize * words + w] |= bit;
        } else {
            other.entry(c).or_insert_with(|| vec![0u64; words])[w] |= bit;
        }
    }
    let zeros = vec![0u64; words];

    let mut pv = vec![u64::MAX; words];
    let mut mv = vec![0u64; words];
    for &c in text {
        let peq: &[u64] = if (c as u32) < 128 {
            &ascii[c as usize * words..(c as usize + 1) * words]
        } else {
            other.get(&c).map(Vec::as_slice).unwrap_or(&zeros)
        };
        // Top boundary row grows by one per column.
        let mut hin: i32 = 1;
        for w in 0..words {
            hin = advance_block(&mut pv[w], &mut mv[w], peq[w], hin);
        }
    }

    // Walk down the last column: D[0][n] = n, then apply vertical deltas.
    let mut score = text.len() as i64;
    for i in 0..m {
        let (w, bit) = (i / 64, 1u64 << (i % 64));
        if pv[w] & bit != 0 {
            score += 1;
        } else if mv[w] & bit != 0 {
            score -= 1;
        }
    }
    score as usize
}

#[inline]
fn advance_block(pv: &mut u64, mv: &mut u64, eq: u64, hin: i32) -> i32 {
    let hin_neg = (hin < 0) as u64;
    let xv = eq | *mv;
    let eq = eq | hin_neg;
    let xh = ((eq & *pv).wrapping_add(*pv) ^ *pv) | eq;
    let mut ph = *mv | !(xh | *pv);
    let mut mh = *pv & xh;
    let mut hout = 0;
    if ph & HIGH_BIT != 0 {
        hout += 1;
    }
    if mh & HIGH_BIT != 0 {
        hout -= 1;
    }
    ph <<= 1;
    mh <<= 1;
    mh |= hin_neg;
    ph |= (hin > 0) as u64;
    *pv = mh | !(xv | ph);
    *mv = ph & xv;
    hout
}
