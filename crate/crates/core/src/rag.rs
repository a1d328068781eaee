//! Reduced-adder-graph synthesis.
//!
//! Targets are reduced to odd bases and realized in order of their tabulated
//! cost: cost-1 bases first as `2^k ± 1`, then anything one shift-add away
//! from already realized values, then stalled targets through a single
//! auxiliary fundamental, then through a split guided by the cost table,
//! and finally a CSD chain when nothing else applies.
//! Signs never enter the graph; it realizes magnitudes only.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::coeffs::CoefficientPartition;
use crate::costtable::{CostTable, MAX_LEVEL};
use crate::graph::{AdderGraph, Op};
use crate::{bit_length, csd, odd_part};

/// Which magnitudes the shared adder graph realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Only the small set; the large set stays on constant multipliers.
    McmSmallOnly,
    /// Both sets (fully multiplierless).
    McmAll,
}

/// Level used to order targets the table cannot place.
const OTHER_LEVEL: u8 = MAX_LEVEL + 1;

/// Recursion limit for table-guided splits.
const SPLIT_DEPTH: u32 = 3;

/// How one pending target was realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Direct,
    Closure,
    Auxiliary,
    Decomposed,
    Csd,
}

#[derive(Debug, Clone, Copy)]
enum Form {
    /// `(p << s) + q`
    Sum,
    /// `(p << s) - q`
    Diff,
    /// `q - (p << s)`
    RevDiff,
}

#[derive(Debug, Clone, Copy)]
struct Recipe {
    p: u64,
    s: u32,
    q: u64,
    form: Form,
}

/// Synthesis in progress.
#[derive(Debug, Clone)]
pub struct SynthesisState {
    realized: BTreeMap<u64, usize>,
    depth: BTreeMap<u64, usize>,
    pending: BTreeMap<u8, BTreeSet<u64>>,
    graph: AdderGraph,
    aux_added: Vec<u64>,
    steps: BTreeMap<u64, Step>,
    max_shift: u32,
    limit: u64,
}

impl SynthesisState {
    fn new(odd_targets: &BTreeSet<u64>, table: &CostTable) -> Self {
        let largest = odd_targets.iter().copied().max().unwrap_or(1);
        let max_shift = bit_length(largest) + 1;
        let mut pending: BTreeMap<u8, BTreeSet<u64>> = BTreeMap::new();
        for &t in odd_targets.iter().filter(|&&t| t > 1) {
            let level = match table.cost(t) {
                Some(k) if table.is_exact(t) => k,
                _ => OTHER_LEVEL,
            };
            pending.entry(level).or_default().insert(t);
        }
        SynthesisState {
            realized: BTreeMap::from([(1, AdderGraph::INPUT)]),
            depth: BTreeMap::from([(1, 0)]),
            pending,
            graph: AdderGraph::new(),
            aux_added: Vec::new(),
            steps: BTreeMap::new(),
            max_shift,
            limit: 1u64 << (max_shift + 1),
        }
    }

    pub fn realized(&self) -> impl Iterator<Item = u64> + '_ {
        self.realized.keys().copied()
    }

    pub fn aux_added(&self) -> &[u64] {
        &self.aux_added
    }

    pub fn graph(&self) -> &AdderGraph {
        &self.graph
    }

    pub fn steps(&self) -> &BTreeMap<u64, Step> {
        &self.steps
    }

    fn first_pending(&self) -> Option<u64> {
        self.pending.values().flat_map(|s| s.iter()).next().copied()
    }

    fn pending_in_order(&self) -> Vec<u64> {
        self.pending.values().flat_map(|s| s.iter().copied()).collect()
    }

    fn is_realized(&self, v: u64) -> bool {
        self.realized.contains_key(&v)
    }

    /// Every way to write `t` as one shift-add of two realized values,
    /// reduced to the shallowest.
    fn one_aop(&self, t: u64) -> Option<Recipe> {
        let mut best: Option<(usize, Recipe)> = None;
        let t = t as u128;
        for (&p, &dp) in &self.depth {
            for s in 1..=self.max_shift {
                let ps = (p as u128) << s;
                let candidates = [
                    (t.checked_sub(ps), Form::Sum),
                    (ps.checked_sub(t), Form::Diff),
                    (Some(t + ps), Form::RevDiff),
                ];
                for (q, form) in candidates {
                    let Some(q) = q.filter(|&q| q > 0 && q <= u64::MAX as u128) else {
                        continue;
                    };
                    let q = q as u64;
                    if let Some(&dq) = self.depth.get(&q) {
                        let d = 1 + dp.max(dq);
                        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                            best = Some((d, Recipe { p, s, q, form }));
                        }
                    }
                }
            }
        }
        best.map(|(_, r)| r)
    }

    fn push(&mut self, value: u64, recipe: Recipe, step: Step) {
        debug_assert!(!self.is_realized(value));
        let np = self.realized[&recipe.p];
        let nq = self.realized[&recipe.q];
        let node = match recipe.form {
            Form::Sum => self.graph.push_add_sub(np, recipe.s, nq, 0, Op::Add),
            Form::Diff => self.graph.push_add_sub(np, recipe.s, nq, 0, Op::Sub),
            Form::RevDiff => self.graph.push_add_sub(nq, 0, np, recipe.s, Op::Sub),
        }
        .expect("operands are realized earlier");
        let d = 1 + self.depth[&recipe.p].max(self.depth[&recipe.q]);
        self.realized.insert(value, node);
        self.depth.insert(value, d);
        for set in self.pending.values_mut() {
            if set.remove(&value) {
                self.steps.insert(value, step);
            }
        }
        self.pending.retain(|_, s| !s.is_empty());
    }

    fn realize_cost_one(&mut self) {
        let Some(level_one) = self.pending.get(&1).cloned() else {
            return;
        };
        for t in level_one {
            let (form, s) = if (t - 1).is_power_of_two() {
                (Form::Sum, (t - 1).trailing_zeros())
            } else {
                (Form::Diff, (t + 1).trailing_zeros())
            };
            debug_assert_eq!(
                match form {
                    Form::Sum => (1u64 << s) + 1,
                    _ => (1u64 << s) - 1,
                },
                t
            );
            self.push(t, Recipe { p: 1, s, q: 1, form }, Step::Direct);
        }
    }

    /// Realizes pending targets that are one shift-add away, rescanning from
    /// the cheapest after every success, until nothing more fits.
    fn closure(&mut self) {
        'scan: loop {
            for t in self.pending_in_order() {
                if let Some(r) = self.one_aop(t) {
                    self.push(t, r, Step::Closure);
                    continue 'scan;
                }
            }
            return;
        }
    }

    /// Smallest odd `a` with `a` one shift-add from the realized set and `t`
    /// one shift-add from the realized set plus `a`.
    fn auxiliary_for(&self, t: u64) -> Option<(u64, Recipe)> {
        let t = t as u128;
        let limit = self.limit as u128;
        let mut cands = BTreeSet::new();
        let mut add = |a: u128| {
            if a > 1 && a < limit && a % 2 == 1 {
                cands.insert(a as u64);
            }
        };
        for &v in self.realized.keys() {
            let v = v as u128;
            for s in 1..=self.max_shift {
                let vs = v << s;
                // a as the unshifted operand
                for a in [t.checked_sub(vs), vs.checked_sub(t), Some(t + vs)]
                    .into_iter()
                    .flatten()
                {
                    add(a);
                }
                // a as the shifted operand
                for num in [t.checked_sub(v), Some(t + v), v.checked_sub(t)].into_iter().flatten() {
                    if num > 0 && num % (1u128 << s) == 0 {
                        add(num >> s);
                    }
                }
            }
        }
        for s in 1..=self.max_shift {
            for div in [(1u128 << s) + 1, (1u128 << s) - 1] {
                if t.is_multiple_of(div) {
                    add(t / div);
                }
            }
        }
        cands
            .into_iter()
            .filter(|a| !self.is_realized(*a))
            .find_map(|a| self.one_aop(a).map(|r| (a, r)))
    }

    /// Estimated adders to add `x`: zero when realized, else the tabulated
    /// cost, else the CSD cost. A CSD chain is itself a shift-add sequence,
    /// so the tabulated cost is never above it.
    fn estimate(&self, x: u64, table: &CostTable) -> u32 {
        if self.is_realized(x) {
            return 0;
        }
        table.cost(x).map_or_else(|| csd::adder_cost(x), u32::from)
    }

    /// Cheapest `t = (p << s) ± q` or `q - (p << s)` over odd `p`, `q` below
    /// the limit, scored by [`Self::estimate`] of both operands.
    fn split(&self, t: u64, table: &CostTable) -> Option<(u32, Recipe)> {
        let mut best: Option<(u32, Recipe)> = None;
        for s in 1..=self.max_shift {
            let mut p = 1u64;
            while (p << s) < t + self.limit {
                let ps = p << s;
                let candidates = [
                    (t.checked_sub(ps), Form::Sum),
                    (ps.checked_sub(t), Form::Diff),
                    (Some(t + ps), Form::RevDiff),
                ];
                for (q, form) in candidates {
                    let Some(q) = q.filter(|&q| q > 0 && q < self.limit && q != t && p != t) else {
                        continue;
                    };
                    let e = 1 + self.estimate(p, table) + self.estimate(q, table);
                    if best.as_ref().is_none_or(|(b, _)| e < *b) {
                        best = Some((e, Recipe { p, s, q, form }));
                    }
                }
                p += 2;
            }
        }
        best
    }

    /// Realizes `x` (not a target unless `step` says so) through one
    /// shift-add, a table-guided split, or a CSD chain, in that order.
    fn realize_split(&mut self, x: u64, table: &CostTable, budget: u32, step: Step) {
        if self.is_realized(x) {
            return;
        }
        if let Some(r) = self.one_aop(x) {
            self.push(x, r, step);
        } else if let Some((_, r)) = self
            .split(x, table)
            .filter(|(e, _)| budget > 0 && *e < csd::adder_cost(x))
        {
            for operand in [r.p, r.q] {
                if !self.is_realized(operand) {
                    let target = self.pending.values().any(|set| set.contains(&operand));
                    self.realize_split(operand, table, budget - 1, Step::Auxiliary);
                    if !target {
                        self.aux_added.push(operand);
                    }
                }
            }
            // an operand's chain may already pass through x
            if !self.is_realized(x) {
                self.push(x, r, step);
            }
        } else {
            self.realize_csd(x);
        }
    }

    /// CSD chain from the most significant digit: `c_{i+1} = (c_i << gap) ± 1`.
    fn realize_csd(&mut self, t: u64) {
        let digits = csd::digits(t);
        let nz: Vec<(u32, i8)> = digits
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &d)| d != 0)
            .map(|(i, &d)| (i as u32, d))
            .collect();
        let mut cur = 1u64;
        let mut pos = nz[0].0;
        for &(i, d) in &nz[1..] {
            let gap = pos - i;
            let (next, form) = if d > 0 {
                ((cur << gap) + 1, Form::Sum)
            } else {
                ((cur << gap) - 1, Form::Diff)
            };
            if !self.is_realized(next) {
                self.push(
                    next,
                    Recipe {
                        p: cur,
                        s: gap,
                        q: 1,
                        form,
                    },
                    Step::Csd,
                );
            }
            cur = next;
            pos = i;
        }
        debug_assert_eq!(cur, t);
    }

    fn run(&mut self, table: &CostTable) {
        self.realize_cost_one();
        loop {
            self.closure();
            let Some(t) = self.first_pending() else {
                return;
            };
            if let Some((a, recipe)) = self.auxiliary_for(t) {
                self.push(a, recipe, Step::Auxiliary);
                self.aux_added.push(a);
                let r = self.one_aop(t).expect("auxiliary makes the target reachable");
                self.push(t, r, Step::Auxiliary);
            } else {
                let before = self.graph.adder_count();
                let mut trial = self.clone();
                trial.realize_split(t, table, SPLIT_DEPTH, Step::Decomposed);
                if trial.graph.adder_count() - before < csd::adder_cost(t) as usize {
                    *self = trial;
                } else {
                    self.realize_csd(t);
                }
            }
        }
    }

    fn attach_outputs(&mut self, targets: &BTreeSet<u64>) {
        for &m in targets {
            let (odd, shift) = odd_part(m);
            let node = self.realized[&odd];
            self.graph.set_output(m, node, shift).expect("node exists");
        }
    }
}

/// Adder graph with one output per target magnitude (zero is ignored).
pub fn synthesize(targets: &BTreeSet<u64>, table: &CostTable) -> AdderGraph {
    synthesize_traced(targets, table).graph
}

/// Like [`synthesize`], keeping the final synthesis state for reporting.
pub fn synthesize_traced(targets: &BTreeSet<u64>, table: &CostTable) -> SynthesisState {
    let targets: BTreeSet<u64> = targets.iter().copied().filter(|&m| m > 0).collect();
    let odd: BTreeSet<u64> = targets.iter().map(|&m| odd_part(m).0).collect();
    let mut state = SynthesisState::new(&odd, table);
    state.run(table);
    state.attach_outputs(&targets);
    state
}

/// Graph for the partition: the small set, plus the large set under
/// [`SynthesisMode::McmAll`], plus pure shifts for powers of two.
pub fn synthesize_all(partition: &CoefficientPartition, table: &CostTable, mode: SynthesisMode) -> AdderGraph {
    let mut targets: BTreeSet<u64> = partition.coeff_r.iter().copied().collect();
    if mode == SynthesisMode::McmAll {
        targets.extend(partition.coeff_s.iter().copied());
    }
    targets.extend(partition.power_of_two.iter().copied());
    synthesize(&targets, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn table() -> &'static CostTable {
        static T: OnceLock<CostTable> = OnceLock::new();
        T.get_or_init(|| CostTable::build(4095, 3).unwrap())
    }

    fn synth(ts: &[u64]) -> AdderGraph {
        let g = synthesize(&ts.iter().copied().collect(), table());
        g.validate().unwrap();
        g.verify(100, 16).unwrap();
        g
    }

    #[test]
    fn split_beats_csd_when_no_single_auxiliary_fits() {
        let ts = BTreeSet::from([1001, 3411]);
        let s = synthesize_traced(&ts, table());
        assert_eq!(s.steps()[&3411], Step::Decomposed);
        assert!(s.graph().adder_count() <= 7);
        assert!(s.graph().adder_count() < (csd::adder_cost(1001) + csd::adder_cost(3411)) as usize);
        s.graph().verify(100, 16).unwrap();
    }

    #[test]
    fn cost_one_pair() {
        let g = synth(&[9, 127]);
        assert_eq!(g.adder_count(), 2);
        let text = g.to_string();
        assert!(text.contains("n1 = n0 << 3 + n0 << 0"));
        assert!(text.contains("n0 << 7 - n0 << 0"));
    }

    #[test]
    fn single_targets() {
        assert_eq!(synth(&[5]).adder_count(), 1);
        assert_eq!(synth(&[45]).adder_count(), 2);
        assert_eq!(synth(&[90]).adder_count(), 2);
        assert_eq!(synth(&[1, 2, 64]).adder_count(), 0);
        assert_eq!(synth(&[]).adder_count(), 0);
    }

    #[test]
    fn reuses_shared_bases() {
        // 9, 18 and 36 share one fundamental
        assert_eq!(synth(&[9, 18, 36]).adder_count(), 1);
    }

    #[test]
    fn csd_fallback_terminates() {
        // beyond the table: every target falls to the "other" level
        let small = CostTable::build(7, 1).unwrap();
        let g = synthesize(&[683, 12345, 65535].into_iter().collect(), &small);
        g.validate().unwrap();
        g.verify(50, 12).unwrap();
    }

    #[test]
    fn records_steps() {
        let s = synthesize_traced(&[9, 127, 49, 733].into_iter().collect(), table());
        assert_eq!(s.steps()[&9], Step::Direct);
        assert_eq!(s.steps()[&127], Step::Direct);
        assert!(s.steps().contains_key(&733));
        for a in s.aux_added() {
            assert!(s.realized().any(|v| v == *a));
        }
    }
}
