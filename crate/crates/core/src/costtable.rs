//! Single-constant-multiplication adder costs.
//!
//! `cost(c)` is the minimal number of two-input adders that compute `c·x`
//! from `x` when shifts are free. Values are found by enumerating sequences
//! `t0 = 1, t_i = A(t_j, t_k)` (j, k < i) where `A` is the odd-normalized
//! shift-add primitive [`AOp`]. Enumeration is exhaustive through
//! `exact_through` adders; one closure pass composing two disjoint
//! realizations then gives a non-exact upper bound for the next level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::{bit_length, odd_part};

/// Largest cost level the tables ever hold.
pub const MAX_LEVEL: u8 = 4;
/// Covers every odd base of a 14-bit coefficient.
pub const DEFAULT_BOUND: u64 = (1 << 14) - 1;
pub const DEFAULT_EXACT_LEVEL: u8 = 3;

const ABSENT: u8 = u8::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("cost table bound must be at least 1")]
    ZeroBound,
    #[error("exact level {0} outside 1..=4")]
    BadLevel(u8),
    #[error("malformed cost table cache: {0}")]
    BadCache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// `|2^left_shift_u · u ± 2^left_shift_v · v| >> normalize_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AOp {
    pub left_shift_u: u32,
    pub left_shift_v: u32,
    pub sign: Sign,
    pub normalize_shift: u32,
}

impl AOp {
    /// Applies the operation; `None` if the result is not a positive odd
    /// integer or the shift pattern is invalid.
    pub fn apply(&self, u: u64, v: u64) -> Option<u64> {
        if self.left_shift_u != 0 && self.left_shift_v != 0 {
            return None;
        }
        let a = (u as u128).checked_shl(self.left_shift_u)?;
        let b = (v as u128).checked_shl(self.left_shift_v)?;
        let raw = match self.sign {
            Sign::Plus => a + b,
            Sign::Minus => a.abs_diff(b),
        };
        if raw == 0 || raw.trailing_zeros() != self.normalize_shift {
            return None;
        }
        u64::try_from(raw >> self.normalize_shift).ok()
    }
}

/// Calls `emit` with every value of `A(u, v)` for odd `u, v` that is below
/// `limit`, using left shifts up to `max_shift`. Values may repeat.
pub fn for_each_aop(u: u64, v: u64, max_shift: u32, limit: u64, mut emit: impl FnMut(u64)) {
    let (u, v) = (u as u128, v as u128);
    let limit = limit as u128;
    let sum = u + v;
    emit_odd(sum, limit, &mut emit);
    emit_odd(u.abs_diff(v), limit, &mut emit);
    let pairs: &[(u128, u128)] = if u == v { &[(u, v)] } else { &[(u, v), (v, u)] };
    for &(p, q) in pairs {
        for a in 1..=max_shift {
            let ps = p << a;
            if ps >= limit + q {
                break;
            }
            if ps + q < limit {
                emit((ps + q) as u64);
            }
            let d = ps.abs_diff(q);
            if d != 0 && d < limit {
                emit(d as u64);
            }
        }
    }
}

fn emit_odd(raw: u128, limit: u128, emit: &mut impl FnMut(u64)) {
    if raw == 0 {
        return;
    }
    let odd = raw >> raw.trailing_zeros();
    if odd < limit {
        emit(odd as u64);
    }
}

/// Minimal adder cost per odd value up to `bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    bound: u64,
    exact_through: u8,
    /// indexed by `c >> 1` for odd `c <= bound`
    cost: Vec<u8>,
}

struct Search {
    limit: u64,
    max_shift: u32,
    best: Vec<u8>,
}

impl Search {
    fn record(&mut self, v: u64, level: u8) {
        let slot = &mut self.best[(v >> 1) as usize];
        if *slot > level {
            *slot = level;
        }
    }

    fn get(&self, v: u64) -> u8 {
        self.best[(v >> 1) as usize]
    }

    /// Extends the sequence `seq` (which always starts with 1) by one value
    /// and recurses until it holds `max_level` adders.
    fn extend(&mut self, seq: &mut Vec<u64>, max_level: u8) {
        let level = seq.len() as u8;
        let last = level == max_level;
        let newest = seq.len() - 1;
        let mut next = Vec::new();
        for i in 0..seq.len() {
            for j in i..seq.len() {
                // At the final level a pair without the newest value only
                // reproduces values reachable with one adder fewer.
                if last && newest > 0 && j != newest {
                    continue;
                }
                for_each_aop(seq[i], seq[j], self.max_shift, self.limit, |w| next.push(w));
            }
        }
        next.sort_unstable();
        next.dedup();
        for w in next {
            if seq.contains(&w) {
                continue;
            }
            self.record(w, level);
            if !last {
                seq.push(w);
                self.extend(seq, max_level);
                seq.pop();
            }
        }
    }

    /// One pass over pairs of already-costed values whose costs sum to
    /// `level - 1`; new values get `level` as an upper bound.
    fn closure(&mut self, level: u8) {
        let mut by_level: Vec<Vec<u64>> = vec![Vec::new(); level as usize];
        for (idx, &c) in self.best.iter().enumerate() {
            if c < level {
                by_level[c as usize].push(2 * idx as u64 + 1);
            }
        }
        let mut found = Vec::new();
        for cu in 0..level {
            let cv = level - 1 - cu;
            if cu > cv {
                break;
            }
            for &u in &by_level[cu as usize] {
                for &v in &by_level[cv as usize] {
                    for_each_aop(u, v, self.max_shift, self.limit, |w| {
                        if self.best[(w >> 1) as usize] == ABSENT {
                            found.push(w);
                        }
                    });
                }
            }
        }
        for w in found {
            self.record(w, level);
        }
    }
}

impl CostTable {
    /// Builds the table for odd values up to `bound`, exact through
    /// `max_exact_level` adders. Left shifts go up to `bit_length(bound) + 1`
    /// and intermediate values stay below `2^(bit_length(bound) + 1)`.
    pub fn build(bound: u64, max_exact_level: u8) -> Result<Self, CostError> {
        if bound < 1 {
            return Err(CostError::ZeroBound);
        }
        if !(1..=MAX_LEVEL).contains(&max_exact_level) {
            return Err(CostError::BadLevel(max_exact_level));
        }
        let max_shift = bit_length(bound) + 1;
        let limit = 1u64 << max_shift;
        let mut search = Search {
            limit,
            max_shift,
            best: vec![ABSENT; (limit / 2) as usize],
        };
        search.record(1, 0);
        search.extend(&mut vec![1], max_exact_level);
        if max_exact_level < MAX_LEVEL {
            search.closure(max_exact_level + 1);
        }
        let cost = (0..bound.div_ceil(2)).map(|i| search.get(2 * i + 1)).collect();
        Ok(CostTable {
            bound,
            exact_through: max_exact_level,
            cost,
        })
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn exact_through(&self) -> u8 {
        self.exact_through
    }

    /// Tabulated cost of an odd value, exact or upper bound.
    pub fn cost(&self, c: u64) -> Option<u8> {
        if c.is_multiple_of(2) || c > self.bound {
            return None;
        }
        match self.cost[(c >> 1) as usize] {
            ABSENT => None,
            k => Some(k),
        }
    }

    pub fn is_exact(&self, c: u64) -> bool {
        self.cost(c).is_some_and(|k| k <= self.exact_through)
    }

    /// Exact cost of the odd base of `v`, or `None` when absent, non-exact
    /// or above [`MAX_LEVEL`].
    pub fn exact_base_cost(&self, v: u64) -> Option<u8> {
        if v == 0 {
            return None;
        }
        let (odd, _) = odd_part(v);
        self.cost(odd).filter(|&k| k <= self.exact_through && k <= MAX_LEVEL)
    }

    /// `(odd value, cost)` for every tabulated entry, ascending.
    pub fn entries(&self) -> impl Iterator<Item = (u64, u8)> + '_ {
        self.cost
            .iter()
            .enumerate()
            .filter(|(_, &k)| k != ABSENT)
            .map(|(i, &k)| (2 * i as u64 + 1, k))
    }

    /// Text cache: a header line with the build parameters, then
    /// `value cost` per tabulated entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# cost-table bound={} exact={}", self.bound, self.exact_through).unwrap();
        for (v, k) in self.entries() {
            writeln!(out, "{v} {k}").unwrap();
        }
        out
    }

    /// Parses a cache written by [`CostTable::to_text`]. Returns `Ok(None)`
    /// when the cache was built with different parameters.
    pub fn from_text(text: &str, bound: u64, max_exact_level: u8) -> Result<Option<Self>, CostError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| CostError::BadCache("empty".into()))?;
        let params = header
            .strip_prefix("# cost-table ")
            .ok_or_else(|| CostError::BadCache(format!("bad header {header:?}")))?;
        let mut cached_bound = None;
        let mut cached_level = None;
        for kv in params.split_whitespace() {
            match kv.split_once('=') {
                Some(("bound", v)) => cached_bound = v.parse::<u64>().ok(),
                Some(("exact", v)) => cached_level = v.parse::<u8>().ok(),
                _ => return Err(CostError::BadCache(format!("bad header field {kv:?}"))),
            }
        }
        if cached_bound != Some(bound) || cached_level != Some(max_exact_level) {
            return Ok(None);
        }
        let mut cost = vec![ABSENT; bound.div_ceil(2) as usize];
        for line in lines {
            let bad = || CostError::BadCache(format!("bad entry {line:?}"));
            let (v, k) = line.split_once(' ').ok_or_else(bad)?;
            let v: u64 = v.parse().map_err(|_| bad())?;
            let k: u8 = k.parse().map_err(|_| bad())?;
            if v.is_multiple_of(2) || v > bound || k > MAX_LEVEL {
                return Err(bad());
            }
            cost[(v >> 1) as usize] = k;
        }
        Ok(Some(CostTable {
            bound,
            exact_through: max_exact_level,
            cost,
        }))
    }
}

/// Coefficients grouped by the cost of their odd base.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CostClassification {
    pub cost_sets: BTreeMap<u8, BTreeSet<u64>>,
    pub cost_other: BTreeSet<u64>,
}

impl CostClassification {
    pub fn level(&self, k: u8) -> BTreeSet<u64> {
        self.cost_sets.get(&k).cloned().unwrap_or_default()
    }
}

/// Buckets each value by the exact table cost of its odd base. Values the
/// table cannot place (absent, non-exact, uncovered, or a bare power of two)
/// go to `cost_other`.
pub fn classify(values: impl IntoIterator<Item = u64>, table: &CostTable) -> CostClassification {
    let mut out = CostClassification::default();
    for v in values {
        match table.exact_base_cost(v) {
            Some(k) if k >= 1 => {
                out.cost_sets.entry(k).or_default().insert(v);
            }
            _ => {
                out.cost_other.insert(v);
            }
        }
    }
    out
}
