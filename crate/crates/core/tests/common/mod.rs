#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use ragfir_core::graph::{AdderGraph, Op};
use ragfir_core::QuantizedFilter;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LOWPASS64: &str = include_str!("../../fixtures/lowpass64.txt");

pub fn lowpass64() -> QuantizedFilter {
    QuantizedFilter::parse(LOWPASS64).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Even-symmetric filter with `taps` coefficients drawn from
/// `(-2^(bits-1), 2^(bits-1))`.
pub fn random_symmetric(rng: &mut ChaCha8Rng, taps: usize, bits: u32) -> QuantizedFilter {
    let hi = (1i64 << (bits - 1)) - 1;
    let half: Vec<i64> = (0..taps.div_ceil(2)).map(|_| rng.gen_range(-hi..=hi)).collect();
    let mut h = half.clone();
    h.extend(half.iter().rev().skip(taps % 2));
    assert_eq!(h.len(), taps);
    QuantizedFilter::new(h)
}

pub fn random_samples(rng: &mut ChaCha8Rng, len: usize, width: u32) -> Vec<i64> {
    let hi = (1i64 << (width - 1)) - 1;
    (0..len).map(|_| rng.gen_range(-hi..=hi)).collect()
}

/// Odd part by repeated halving.
fn oddify(mut v: u64) -> u64 {
    while v.is_multiple_of(2) {
        v /= 2;
    }
    v
}

/// All odd `|2^a u ± 2^b v| / 2^r` below `limit`, one of `a`, `b` zero and
/// both at most `max_shift`, written as a literal enumeration of the
/// definition.
fn oracle_aop(u: u64, v: u64, max_shift: u32, limit: u64, out: &mut Vec<u64>) {
    for a in 0..=max_shift {
        for b in 0..=max_shift {
            if a != 0 && b != 0 {
                continue;
            }
            let x = (u as i128) << a;
            let y = (v as i128) << b;
            for raw in [x + y, x - y] {
                if raw == 0 {
                    continue;
                }
                let w = raw.unsigned_abs();
                if w >= 1u128 << 80 {
                    continue;
                }
                let w = oddify(w as u64);
                if w < limit {
                    out.push(w);
                }
            }
        }
    }
}

/// Brute-force minimal adder cost: breadth-first search over *sets* of
/// fundamentals `{1, t1, .., tk}` up to four adders. Intermediate values and
/// shifts use the same limits as a table built with `bound`.
pub fn oracle_costs(bound: u64) -> HashMap<u64, u8> {
    let bits = 64 - bound.leading_zeros();
    let max_shift = bits + 1;
    let limit = 1u64 << (bits + 1);
    let mut cost: HashMap<u64, u8> = HashMap::from([(1, 0)]);
    let mut frontier: HashSet<Vec<u64>> = HashSet::from([vec![1]]);
    let mut scratch = Vec::new();
    for level in 1..=4u8 {
        let mut next = HashSet::new();
        for state in &frontier {
            for (i, &u) in state.iter().enumerate() {
                for &v in &state[i..] {
                    scratch.clear();
                    oracle_aop(u, v, max_shift, limit, &mut scratch);
                    for &w in &scratch {
                        if state.contains(&w) {
                            continue;
                        }
                        cost.entry(w).or_insert(level);
                        if level < 4 {
                            let mut s = state.clone();
                            s.push(w);
                            s.sort_unstable();
                            next.insert(s);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    cost
}

/// Hand-written shift-add realization of the 64-tap small coefficient set,
/// three-operand sums split into two chained adders. 269 and 428 are built
/// from earlier fundamentals. Note 219 = 168 + 49 + 2, not 168 + 49 - 2.
pub fn hand_written_small_set_graph() -> AdderGraph {
    let mut g = AdderGraph::new();
    let x = AdderGraph::INPUT;
    let add = |g: &mut AdderGraph, l, ls, r, rs, op| g.push_add_sub(l, ls, r, rs, op).unwrap();
    let x9 = add(&mut g, x, 3, x, 0, Op::Add);
    let x127 = add(&mut g, x, 7, x, 0, Op::Sub);
    let t = add(&mut g, x9, 2, x9, 0, Op::Add);
    let x49 = add(&mut g, t, 0, x, 2, Op::Add);
    let t = add(&mut g, x127, 0, x49, 0, Op::Sub);
    let x79 = add(&mut g, t, 0, x, 0, Op::Add);
    let t = add(&mut g, x127, 0, x9, 0, Op::Add);
    let x137 = add(&mut g, t, 0, x, 0, Op::Add);
    let t = add(&mut g, x137, 0, x9, 0, Op::Add);
    let x162 = add(&mut g, t, 0, x, 4, Op::Add);
    let t = add(&mut g, x162, 0, x, 2, Op::Add);
    let x168 = add(&mut g, t, 0, x, 1, Op::Add);
    let t = add(&mut g, x127, 0, x49, 0, Op::Add);
    let x174 = add(&mut g, t, 0, x, 1, Op::Sub);
    let t = add(&mut g, x168, 0, x49, 0, Op::Add);
    let x219 = add(&mut g, t, 0, x, 1, Op::Add);
    // reconstructed
    let t = add(&mut g, x219, 0, x49, 0, Op::Add);
    let x269 = add(&mut g, t, 0, x, 0, Op::Add);
    let x428 = add(&mut g, x174, 0, x127, 1, Op::Add);
    // listed again from here on
    let t = add(&mut g, x428, 0, x9, 1, Op::Add);
    let x450 = add(&mut g, t, 0, x, 2, Op::Add);
    let t = add(&mut g, x450, 0, x9, 1, Op::Add);
    let x470 = add(&mut g, t, 0, x, 1, Op::Add);
    let t = add(&mut g, x450, 0, x269, 0, Op::Add);
    let x592 = add(&mut g, t, 0, x127, 0, Op::Sub);
    let t = add(&mut g, x592, 0, x137, 0, Op::Add);
    let x733 = add(&mut g, t, 0, x, 2, Op::Add);
    for (m, n) in [
        (9, x9),
        (49, x49),
        (79, x79),
        (127, x127),
        (137, x137),
        (162, x162),
        (168, x168),
        (174, x174),
        (219, x219),
        (269, x269),
        (428, x428),
        (450, x450),
        (470, x470),
        (592, x592),
        (733, x733),
    ] {
        g.set_output(m, n, 0).unwrap();
    }
    g
}
