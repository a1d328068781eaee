//! Adder-graph IR.
//!
//! Node 0 is the input. Every other node is a two-input shift-add
//! `(left << left_shift) ± (right << right_shift)` over earlier nodes, so the
//! graph is acyclic by construction. Outputs bind a target magnitude to a
//! node plus a free output shift.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node} references n{operand}, which does not precede it")]
    ForwardReference { node: usize, operand: usize },
    #[error("node {node} shifts both operands")]
    DoubleShift { node: usize },
    #[error("node {node} has non-positive value {value} at x = 1")]
    NonPositive { node: usize, value: i128 },
    #[error("output {magnitude} references missing node n{node}")]
    MissingNode { magnitude: u64, node: usize },
    #[error("output {magnitude}: node value {value} << {shift} does not equal the target")]
    WrongOutput { magnitude: u64, value: i128, shift: u32 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Op {
    Add,
    Sub,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Node {
    Input,
    AddSub {
        left: usize,
        left_shift: u32,
        right: usize,
        right_shift: u32,
        op: Op,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OutputTap {
    pub node: usize,
    pub shift: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderGraph {
    nodes: Vec<Node>,
    outputs: BTreeMap<u64, OutputTap>,
}

impl Default for AdderGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl AdderGraph {
    pub const INPUT: usize = 0;

    pub fn new() -> Self {
        AdderGraph {
            nodes: vec![Node::Input],
            outputs: BTreeMap::new(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn outputs(&self) -> &BTreeMap<u64, OutputTap> {
        &self.outputs
    }

    /// Appends a shift-add node. Checks structure only (operand order and
    /// the single-shift rule); use [`AdderGraph::validate`] for values.
    pub fn push_add_sub(
        &mut self,
        left: usize,
        left_shift: u32,
        right: usize,
        right_shift: u32,
        op: Op,
    ) -> Result<usize, GraphError> {
        let node = self.nodes.len();
        for operand in [left, right] {
            if operand >= node {
                return Err(GraphError::ForwardReference { node, operand });
            }
        }
        if left_shift != 0 && right_shift != 0 {
            return Err(GraphError::DoubleShift { node });
        }
        self.nodes.push(Node::AddSub {
            left,
            left_shift,
            right,
            right_shift,
            op,
        });
        Ok(node)
    }

    pub fn set_output(&mut self, magnitude: u64, node: usize, shift: u32) -> Result<(), GraphError> {
        if node >= self.nodes.len() {
            return Err(GraphError::MissingNode { magnitude, node });
        }
        self.outputs.insert(magnitude, OutputTap { node, shift });
        Ok(())
    }

    /// Node values for a given input; intermediate values are exact.
    pub fn node_values(&self, x: i128) -> Vec<i128> {
        let mut vals: Vec<i128> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match *node {
                Node::Input => x,
                Node::AddSub {
                    left,
                    left_shift,
                    right,
                    right_shift,
                    op,
                } => {
                    let l = vals[left] << left_shift;
                    let r = vals[right] << right_shift;
                    match op {
                        Op::Add => l + r,
                        Op::Sub => l - r,
                    }
                }
            };
            vals.push(v);
        }
        vals
    }

    /// Output values keyed by target magnitude.
    pub fn evaluate(&self, x: i128) -> BTreeMap<u64, i128> {
        let vals = self.node_values(x);
        self.outputs
            .iter()
            .map(|(&m, tap)| (m, vals[tap.node] << tap.shift))
            .collect()
    }

    /// Checks positivity of every node at x = 1 and the output equations.
    pub fn validate(&self) -> Result<(), GraphError> {
        let vals = self.node_values(1);
        if let Some((node, &value)) = vals.iter().enumerate().find(|(_, &v)| v <= 0) {
            return Err(GraphError::NonPositive { node, value });
        }
        for (&magnitude, tap) in &self.outputs {
            let value = vals[tap.node];
            if value << tap.shift != magnitude as i128 {
                return Err(GraphError::WrongOutput {
                    magnitude,
                    value,
                    shift: tap.shift,
                });
            }
        }
        Ok(())
    }

    /// Largest magnitude any node or shifted operand reaches per unit input.
    pub fn max_operand(&self) -> u128 {
        let vals = self.node_values(1);
        let mut best = vals.iter().map(|v| v.unsigned_abs()).max().unwrap_or(1);
        for node in &self.nodes {
            if let Node::AddSub {
                left,
                left_shift,
                right,
                right_shift,
                ..
            } = *node
            {
                best = best.max(vals[left].unsigned_abs() << left_shift);
                best = best.max(vals[right].unsigned_abs() << right_shift);
            }
        }
        for &m in self.outputs.keys() {
            best = best.max(m as u128);
        }
        best
    }

    pub fn adder_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn metrics(&self) -> GraphMetrics {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut shift_edge_count = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::AddSub {
                left,
                left_shift,
                right,
                right_shift,
                ..
            } = *node
            {
                depth[i] = 1 + depth[left].max(depth[right]);
                shift_edge_count += (left_shift != 0) as usize + (right_shift != 0) as usize;
            }
        }
        shift_edge_count += self.outputs.values().filter(|t| t.shift != 0).count();
        let per_output_depth = self.outputs.iter().map(|(&m, t)| (m, depth[t.node])).collect();
        GraphMetrics {
            adder_count: self.adder_count(),
            shift_edge_count,
            max_depth: depth.iter().copied().max().unwrap_or(0),
            per_output_depth,
        }
    }

    /// Checks `evaluate(x)[m] == m·x` for the fixed probes
    /// `{0, 1, -1, 2^(w-1)-1, -2^(w-1)}` plus `trials` seeded random inputs of
    /// `input_width` bits.
    pub fn verify(&self, trials: usize, input_width: u32) -> Result<usize, Mismatch> {
        self.verify_seeded(trials, input_width, 0x5eed)
    }

    pub fn verify_seeded(&self, trials: usize, input_width: u32, seed: u64) -> Result<usize, Mismatch> {
        assert!(
            (1..=64).contains(&input_width),
            "input width {input_width} outside 1..=64"
        );
        let lo = -(1i128 << (input_width - 1));
        let hi = (1i128 << (input_width - 1)) - 1;
        let mut probes = vec![0, 1, -1, hi, lo];
        probes.retain(|x| (lo..=hi).contains(x));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        probes.extend((0..trials).map(|_| rng.gen_range(lo..=hi)));
        let mut checks = 0;
        for x in probes {
            for (m, got) in self.evaluate(x) {
                let expected = m as i128 * x;
                if got != expected {
                    return Err(Mismatch {
                        magnitude: m,
                        x,
                        got,
                        expected,
                    });
                }
                checks += 1;
            }
        }
        Ok(checks)
    }
}

/// First failing check of [`AdderGraph::verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("output {magnitude} at x = {x}: got {got}, expected {expected}")]
pub struct Mismatch {
    pub magnitude: u64,
    pub x: i128,
    pub got: i128,
    pub expected: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphMetrics {
    pub adder_count: usize,
    pub shift_edge_count: usize,
    pub max_depth: usize,
    pub per_output_depth: BTreeMap<u64, usize>,
}

/// One node per line (`n3 = n1 << 2 + n0 << 0`), then one line per output
/// (`out 162 = n7 << 1`).
impl fmt::Display for AdderGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Input => writeln!(f, "n{i} = in")?,
                Node::AddSub {
                    left,
                    left_shift,
                    right,
                    right_shift,
                    op,
                } => writeln!(
                    f,
                    "n{i} = n{left} << {left_shift} {} n{right} << {right_shift}",
                    op.symbol()
                )?,
            }
        }
        for (m, tap) in &self.outputs {
            writeln!(f, "out {m} = n{} << {}", tap.node, tap.shift)?;
        }
        Ok(())
    }
}

impl FromStr for AdderGraph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut graph = AdderGraph {
            nodes: Vec::new(),
            outputs: BTreeMap::new(),
        };
        for (idx, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| GraphError::Parse {
                line: idx + 1,
                message: message.to_string(),
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                [name, "=", "in"] => {
                    if parse_ref(name) != Some(0) || !graph.nodes.is_empty() {
                        return Err(err("input must be the first node, n0"));
                    }
                    graph.nodes.push(Node::Input);
                }
                [name, "=", l, "<<", ls, op, r, "<<", rs] => {
                    if parse_ref(name) != Some(graph.nodes.len()) || graph.nodes.is_empty() {
                        return Err(err("nodes must be numbered consecutively after n0"));
                    }
                    let op = match *op {
                        "+" => Op::Add,
                        "-" => Op::Sub,
                        _ => return Err(err("operator must be + or -")),
                    };
                    let l = parse_ref(l).ok_or_else(|| err("bad left operand"))?;
                    let r = parse_ref(r).ok_or_else(|| err("bad right operand"))?;
                    let ls = ls.parse().map_err(|_| err("bad left shift"))?;
                    let rs = rs.parse().map_err(|_| err("bad right shift"))?;
                    graph.push_add_sub(l, ls, r, rs, op).map_err(|e| err(&e.to_string()))?;
                }
                ["out", m, "=", node, "<<", shift] => {
                    let m = m.parse().map_err(|_| err("bad output magnitude"))?;
                    let node = parse_ref(node).ok_or_else(|| err("bad output node"))?;
                    let shift = shift.parse().map_err(|_| err("bad output shift"))?;
                    graph.set_output(m, node, shift).map_err(|e| err(&e.to_string()))?;
                }
                _ => return Err(err("unrecognized line")),
            }
        }
        if graph.nodes.is_empty() {
            return Err(GraphError::Parse {
                line: 0,
                message: "missing input node".into(),
            });
        }
        Ok(graph)
    }
}

fn parse_ref(tok: &str) -> Option<usize> {
    tok.strip_prefix('n')?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nine_and_127() -> AdderGraph {
        let mut g = AdderGraph::new();
        let n9 = g.push_add_sub(0, 3, 0, 0, Op::Add).unwrap();
        let n127 = g.push_add_sub(0, 7, 0, 0, Op::Sub).unwrap();
        g.set_output(9, n9, 0).unwrap();
        g.set_output(127, n127, 0).unwrap();
        g
    }

    #[test]
    fn evaluate_examples() {
        let g = nine_and_127();
        assert_eq!(g.evaluate(7)[&9], 63);
        assert_eq!(g.evaluate(1)[&127], 127);
        assert!(g.evaluate(0).values().all(|&v| v == 0));
    }

    #[test]
    fn verify_detects_flipped_op() {
        assert!(nine_and_127().verify(50, 16).is_ok());
        let mut g = AdderGraph::new();
        let n = g.push_add_sub(0, 3, 0, 0, Op::Sub).unwrap();
        g.set_output(9, n, 0).unwrap();
        let m = g.verify(50, 16).unwrap_err();
        assert_eq!(
            m,
            Mismatch {
                magnitude: 9,
                x: 1,
                got: 7,
                expected: 9
            }
        );
        assert!(matches!(
            g.validate(),
            Err(GraphError::WrongOutput { magnitude: 9, .. })
        ));
    }

    #[test]
    fn metrics_examples() {
        let mut g = AdderGraph::new();
        let n = g.push_add_sub(0, 3, 0, 0, Op::Add).unwrap();
        g.set_output(9, n, 0).unwrap();
        let m = g.metrics();
        assert_eq!((m.adder_count, m.max_depth, m.shift_edge_count), (1, 1, 1));

        let m = nine_and_127().metrics();
        assert_eq!((m.adder_count, m.max_depth), (2, 1));

        let m = AdderGraph::new().metrics();
        assert_eq!((m.adder_count, m.max_depth, m.shift_edge_count), (0, 0, 0));
    }

    #[test]
    fn structural_errors() {
        let mut g = AdderGraph::new();
        assert_eq!(
            g.push_add_sub(0, 0, 1, 0, Op::Add),
            Err(GraphError::ForwardReference { node: 1, operand: 1 })
        );
        assert_eq!(
            g.push_add_sub(0, 1, 0, 2, Op::Add),
            Err(GraphError::DoubleShift { node: 1 })
        );
        let n = g.push_add_sub(0, 0, 0, 0, Op::Sub).unwrap();
        assert_eq!(g.validate(), Err(GraphError::NonPositive { node: n, value: 0 }));
    }

    #[test]
    fn text_round_trip() {
        let mut g = nine_and_127();
        let n = g.push_add_sub(1, 0, 2, 1, Op::Add).unwrap();
        g.set_output(526, n, 1).unwrap();
        g.set_output(4, 0, 2).unwrap();
        g.validate().unwrap();
        let text = g.to_string();
        assert!(text.contains("n1 = n0 << 3 + n0 << 0"));
        assert!(text.contains("out 526 = n3 << 1"));
        let back: AdderGraph = text.parse().unwrap();
        assert_eq!(back, g);
        assert_eq!(back.metrics(), g.metrics());
    }

    #[test]
    fn parse_errors() {
        assert!("n1 = in".parse::<AdderGraph>().is_err());
        assert!("n0 = in\nn2 = n0 << 1 + n0 << 0".parse::<AdderGraph>().is_err());
        assert!("n0 = in\nn1 = n0 << 1 * n0 << 0".parse::<AdderGraph>().is_err());
        assert!("n0 = in\nn1 = n0 << 1 + n0 << 1".parse::<AdderGraph>().is_err());
        assert!("".parse::<AdderGraph>().is_err());
    }
}
