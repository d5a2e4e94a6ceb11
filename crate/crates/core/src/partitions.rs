//! Binary partitions of a qubit budget into GHZ blocks and their J_z spectra.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Multiset of GHZ blocks: `m` copies of a `2^k`-qubit state for each `(k, m)`.
///
/// Blocks are kept with distinct `k`, sorted by descending `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<(u32, u32)>,
}

impl Partition {
    /// Builds a partition from `(k, m)` pairs in any order; equal `k` are merged
    /// and zero counts dropped.
    pub fn new(pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Partition> {
        let mut blocks: Vec<(u32, u32)> = Vec::new();
        for (k, m) in pairs {
            if k > 62 {
                return Err(Error::invalid(format!("block exponent {k} too large")));
            }
            if m == 0 {
                continue;
            }
            match blocks.iter_mut().find(|b| b.0 == k) {
                Some(b) => b.1 += m,
                None => blocks.push((k, m)),
            }
        }
        if blocks.is_empty() {
            return Err(Error::invalid("partition has no blocks"));
        }
        blocks.sort_by(|a, b| b.0.cmp(&a.0));
        Ok(Partition { blocks })
    }

    /// `(k, m_k)` pairs, descending in `k`.
    pub fn blocks(&self) -> &[(u32, u32)] {
        &self.blocks
    }

    pub fn n_total(&self) -> usize {
        self.blocks.iter().map(|&(k, m)| (m as usize) << k).sum()
    }

    /// Number of block copies M = Σ m_k.
    pub fn copies(&self) -> usize {
        self.blocks.iter().map(|&(_, m)| m as usize).sum()
    }

    pub fn m(&self, k: u32) -> u32 {
        self.blocks.iter().find(|b| b.0 == k).map_or(0, |b| b.1)
    }

    /// Block qubit counts, one entry per copy, largest first.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flat_map(|&(k, m)| std::iter::repeat_n(1usize << k, m as usize))
            .collect()
    }

    /// Σ m_k 4^k, the quantum Fisher information at φ = 0.
    pub fn fisher(&self) -> f64 {
        self.blocks.iter().map(|&(k, m)| m as f64 * 4f64.powi(k as i32)).sum()
    }

    /// `[[k, m], ...]` as JSON.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::from(self.blocks.iter().map(|&(k, m)| vec![k, m]).collect::<Vec<_>>())
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Partition> {
        let pairs: Vec<(u32, u32)> =
            serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        Partition::new(pairs)
    }
}

impl fmt::Display for Partition {
    /// Compact form `3x4+3x2+3x1`: copies times block qubit count.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(k, m)) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}x{}", m, 1u64 << k)?;
        }
        Ok(())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Partition> {
        let mut pairs = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            let (m, size) = term
                .split_once(['x', 'X', '*'])
                .ok_or_else(|| Error::Parse(format!("term '{term}' is not of the form MxS")))?;
            let m: u32 = m.trim().parse().map_err(|_| Error::Parse(format!("bad count in '{term}'")))?;
            let size: u64 =
                size.trim().parse().map_err(|_| Error::Parse(format!("bad block size in '{term}'")))?;
            if size == 0 || !size.is_power_of_two() {
                return Err(Error::Parse(format!("block size {size} is not a power of two")));
            }
            pairs.push((size.trailing_zeros(), m));
        }
        Partition::new(pairs)
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<(u32, u32)>::deserialize(d)?;
        Partition::new(pairs).map_err(serde::de::Error::custom)
    }
}

/// Result of a possibly budget-limited enumeration.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub partitions: Vec<Partition>,
    pub truncated: bool,
}

/// All binary partitions of `n_total`, optionally with block size at most `2^k_cap`.
///
/// Order is lexicographic on the descending list of block sizes, largest first.
pub fn enumerate_partitions(n_total: usize, k_cap: Option<u32>) -> Result<Vec<Partition>> {
    Ok(enumerate_partitions_budget(n_total, k_cap, usize::MAX)?.partitions)
}

/// As [`enumerate_partitions`], stopping after `budget` partitions.
pub fn enumerate_partitions_budget(n_total: usize, k_cap: Option<u32>, budget: usize) -> Result<Enumeration> {
    if n_total == 0 {
        return Err(Error::invalid("n_total must be at least 1"));
    }
    let top = (usize::BITS - 1 - n_total.leading_zeros()).min(k_cap.unwrap_or(u32::MAX));
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let truncated = !rec(n_total, top as i64, &mut cur, &mut out, budget);
    Ok(Enumeration { partitions: out, truncated })
}

/// Returns false when the budget stopped the walk.
fn rec(rest: usize, k: i64, cur: &mut Vec<(u32, u32)>, out: &mut Vec<Partition>, budget: usize) -> bool {
    if rest == 0 {
        if out.len() >= budget {
            return false;
        }
        out.push(Partition { blocks: cur.clone() });
        return true;
    }
    if k < 0 {
        return true;
    }
    if k == 0 {
        cur.push((0, rest as u32));
        let ok = rec(0, -1, cur, out, budget);
        cur.pop();
        return ok;
    }
    let size = 1usize << k;
    for m in (0..=rest / size).rev() {
        if m > 0 {
            cur.push((k as u32, m as u32));
        }
        let ok = rec(rest - m * size, k - 1, cur, out, budget);
        if m > 0 {
            cur.pop();
        }
        if !ok {
            return false;
        }
    }
    true
}

/// Number of binary partitions of `n`, by the recurrence b(2j) = b(2j−2) + b(j),
/// b(2j+1) = b(2j).
pub fn binary_partition_count(n: usize) -> u128 {
    let mut b = vec![0u128; n + 1];
    b[0] = 1;
    for i in 1..=n {
        b[i] = if i % 2 == 1 { b[i - 1] } else { b[i - 2] + b[i / 2] };
    }
    b[n]
}

/// Amplitudes of a partition state over J_z eigenvalues n = 0..N.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySpectrum {
    pub n_total: usize,
    pub amplitude: Vec<f64>,
}

/// Subset-sum counts of the block multiset: coefficients of Π (1 + x^{2^k}).
///
/// Counts are exact integers while they stay below 2^63; past that the
/// product is recomputed in floating point.
pub fn subset_counts(p: &Partition) -> Vec<f64> {
    exact_counts(p).map_or_else(|| float_counts(p), |v| v.into_iter().map(|c| c as f64).collect())
}

fn exact_counts(p: &Partition) -> Option<Vec<u64>> {
    let mut v = vec![0u64; p.n_total() + 1];
    v[0] = 1;
    let mut reach = 0usize;
    for size in p.block_sizes() {
        reach += size;
        for i in (size..=reach).rev() {
            let s = v[i].checked_add(v[i - size])?;
            if s >= 1 << 63 {
                return None;
            }
            v[i] = s;
        }
    }
    Some(v)
}

fn float_counts(p: &Partition) -> Vec<f64> {
    let mut f = vec![0.0f64; p.n_total() + 1];
    f[0] = 1.0;
    let mut reach = 0usize;
    for size in p.block_sizes() {
        reach += size;
        for i in (size..=reach).rev() {
            f[i] += f[i - size];
        }
    }
    f
}

/// J_z spectrum of the product of GHZ blocks.
pub fn frequency_amplitudes(p: &Partition) -> FrequencySpectrum {
    let counts = subset_counts(p);
    let scale = 2f64.powi(-(p.copies() as i32));
    let amplitude = counts.iter().map(|c| (c * scale).sqrt()).collect();
    FrequencySpectrum { n_total: p.n_total(), amplitude }
}
