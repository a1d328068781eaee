//! Clocked filter datapaths, the golden convolution and a cycle-accurate
//! simulator.
//!
//! A [`FilterNetlist`] is a flat list of elements. Combinational elements
//! only read elements with a lower index; registers may read any element and
//! update once per cycle. Each architecture has a fixed latency `Λ` so that
//! `simulate(x).outputs[n + Λ] == golden(x)[n]`:
//!
//! | architecture       | structure                                        | Λ       |
//! |--------------------|--------------------------------------------------|---------|
//! | `PulsedParallel`   | systolic chain, two input delays per PE          | `N - 1` |
//! | `SymmetricPreadd`  | delay line, pre-adders, registered products      | 2       |
//! | `RagHybrid`        | transposed form, MCM block + multipliers         | 1       |
//! | `RagPure`          | transposed form, MCM block only                  | 1       |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bit_length;
use crate::coeffs::{CoefficientPartition, QuantizedFilter, Symmetry};
use crate::graph::AdderGraph;

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    PulsedParallel,
    SymmetricPreadd,
    RagHybrid,
    RagPure,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::PulsedParallel,
        Architecture::SymmetricPreadd,
        Architecture::RagHybrid,
        Architecture::RagPure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::PulsedParallel => "pulsed_parallel",
            Architecture::SymmetricPreadd => "symmetric_preadd",
            Architecture::RagHybrid => "rag_hybrid",
            Architecture::RagPure => "rag_pure",
        }
    }

    /// Short name used on the command line.
    pub fn flag(self) -> &'static str {
        match self {
            Architecture::PulsedParallel => "pulsed",
            Architecture::SymmetricPreadd => "preadd",
            Architecture::RagHybrid => "hybrid",
            Architecture::RagPure => "rag",
        }
    }

    pub fn needs_symmetry(self) -> bool {
        matches!(self, Architecture::SymmetricPreadd | Architecture::RagHybrid)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.flag() == s || a.name() == s)
            .ok_or_else(|| format!("unknown architecture {s:?} (expected pulsed, preadd, hybrid or rag)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Input,
    Zero,
    Register {
        d: NetId,
    },
    Adder {
        a: NetId,
        b: NetId,
    },
    /// `a - b`
    Subtractor {
        a: NetId,
        b: NetId,
    },
    ConstMultiplier {
        coeff: u64,
        a: NetId,
    },
    ShiftWire {
        shift: u32,
        a: NetId,
    },
    McmBlock {
        a: NetId,
        graph: AdderGraph,
    },
    /// One product `magnitude · a` of an [`Element::McmBlock`].
    McmPort {
        block: NetId,
        magnitude: u64,
    },
}

impl Element {
    pub fn kind(&self) -> &'static str {
        match self {
            Element::Input => "input",
            Element::Zero => "zero",
            Element::Register { .. } => "register",
            Element::Adder { .. } => "adder",
            Element::Subtractor { .. } => "subtractor",
            Element::ConstMultiplier { .. } => "const_multiplier",
            Element::ShiftWire { .. } => "shift_wire",
            Element::McmBlock { .. } => "mcm_block",
            Element::McmPort { .. } => "mcm_port",
        }
    }

    /// Elements this one reads.
    pub fn operands(&self) -> Vec<NetId> {
        match *self {
            Element::Input | Element::Zero => vec![],
            Element::Register { d } => vec![d],
            Element::Adder { a, b } | Element::Subtractor { a, b } => vec![a, b],
            Element::ConstMultiplier { a, .. } | Element::ShiftWire { a, .. } | Element::McmBlock { a, .. } => vec![a],
            Element::McmPort { block, .. } => vec![block],
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArchError {
    #[error("{arch} requires a symmetric filter")]
    Asymmetric { arch: Architecture },
    #[error("{arch} requires an adder graph")]
    MissingGraph { arch: Architecture },
    #[error("adder graph has no output for magnitude {magnitude}")]
    GraphCoverage { magnitude: u64 },
    #[error("partition does not describe this filter")]
    PartitionMismatch,
    #[error("filter has no taps")]
    Empty,
    #[error("input width {0} outside 2..=48")]
    InputWidth(u32),
    #[error("element {element} reads n{operand} out of order")]
    Order { element: NetId, operand: NetId },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("sample {index} = {value} does not fit {width} input bits")]
    InputRange { index: usize, value: i64, width: u32 },
    #[error("cycle {cycle}: element n{element} value {value} overflows {width} bits")]
    Overflow {
        cycle: usize,
        element: NetId,
        value: i128,
        width: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterNetlist {
    pub architecture: Architecture,
    pub input_width: u32,
    pub accumulator_width: u32,
    pub elements: Vec<Element>,
    pub output: NetId,
    /// Cycles `Λ` between `x(n)` entering and `y(n)` leaving.
    pub latency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetlistMetrics {
    pub multipliers: usize,
    pub adders: usize,
    pub mcm_adders: usize,
    pub registers: usize,
    pub shift_wires: usize,
    pub latency: usize,
    pub accumulator_width: u32,
}

impl FilterNetlist {
    pub fn validate(&self) -> Result<(), ArchError> {
        for (i, el) in self.elements.iter().enumerate() {
            let limit = if matches!(el, Element::Register { .. }) {
                self.elements.len()
            } else {
                i
            };
            if let Some(&operand) = el.operands().iter().find(|&&o| o >= limit) {
                return Err(ArchError::Order { element: i, operand });
            }
        }
        Ok(())
    }

    pub fn count(&self, pred: impl Fn(&Element) -> bool) -> usize {
        self.elements.iter().filter(|e| pred(e)).count()
    }

    pub fn multipliers(&self) -> usize {
        self.count(|e| matches!(e, Element::ConstMultiplier { .. }))
    }

    pub fn metrics(&self) -> NetlistMetrics {
        NetlistMetrics {
            multipliers: self.multipliers(),
            adders: self.count(|e| matches!(e, Element::Adder { .. } | Element::Subtractor { .. })),
            mcm_adders: self
                .elements
                .iter()
                .map(|e| match e {
                    Element::McmBlock { graph, .. } => graph.adder_count(),
                    _ => 0,
                })
                .sum(),
            registers: self.count(|e| matches!(e, Element::Register { .. })),
            shift_wires: self.count(|e| matches!(e, Element::ShiftWire { .. })),
            latency: self.latency,
            accumulator_width: self.accumulator_width,
        }
    }

    /// Directed wiring `(from, to)` in element order.
    pub fn edges(&self) -> impl Iterator<Item = (NetId, NetId)> + '_ {
        self.elements
            .iter()
            .enumerate()
            .flat_map(|(i, e)| e.operands().into_iter().map(move |o| (o, i)))
    }
}

struct Builder {
    elements: Vec<Element>,
    zero: Option<NetId>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            elements: vec![Element::Input],
            zero: None,
        }
    }

    fn add(&mut self, e: Element) -> NetId {
        self.elements.push(e);
        self.elements.len() - 1
    }

    fn zero(&mut self) -> NetId {
        match self.zero {
            Some(z) => z,
            None => {
                let z = self.add(Element::Zero);
                self.zero = Some(z);
                z
            }
        }
    }

    fn reg(&mut self, d: NetId) -> NetId {
        self.add(Element::Register { d })
    }

    /// `acc + product` or `acc - product` by the tap sign.
    fn accumulate(&mut self, acc: NetId, product: NetId, tap: i64) -> NetId {
        if tap < 0 {
            self.add(Element::Subtractor { a: acc, b: product })
        } else {
            self.add(Element::Adder { a: acc, b: product })
        }
    }
}

const INPUT: NetId = 0;

fn ceil_log2(v: u128) -> u32 {
    if v <= 1 {
        0
    } else {
        u128::BITS - (v - 1).leading_zeros()
    }
}

/// `input_width + ceil(log2(Σ|h|)) + 1`, the worst-case accumulator size.
pub fn accumulator_width(filter: &QuantizedFilter, input_width: u32) -> u32 {
    input_width + ceil_log2(filter.l1_norm()) + 1
}

/// Builds the datapath of one architecture. `graph` is required by the
/// RAG architectures and must cover the magnitudes they route through the
/// MCM block.
pub fn build(
    filter: &QuantizedFilter,
    architecture: Architecture,
    partition: &CoefficientPartition,
    graph: Option<&AdderGraph>,
    input_width: u32,
) -> Result<FilterNetlist, ArchError> {
    if filter.is_empty() {
        return Err(ArchError::Empty);
    }
    if !(2..=48).contains(&input_width) {
        return Err(ArchError::InputWidth(input_width));
    }
    if architecture.needs_symmetry() && filter.symmetry() == Symmetry::None {
        return Err(ArchError::Asymmetric { arch: architecture });
    }
    let magnitudes: Vec<u64> = filter.taps().iter().map(|t| t.unsigned_abs()).collect();
    if partition.tap_magnitudes != magnitudes || !magnitudes.iter().all(|&m| partition.covers(m)) {
        return Err(ArchError::PartitionMismatch);
    }
    let mut width = accumulator_width(filter, input_width);
    let (elements, output, latency) = match architecture {
        Architecture::PulsedParallel => pulsed_parallel(filter),
        Architecture::SymmetricPreadd => symmetric_preadd(filter),
        Architecture::RagHybrid | Architecture::RagPure => {
            let graph = graph.ok_or(ArchError::MissingGraph { arch: architecture })?;
            // MCM internals can exceed the largest coefficient (e.g. 128x - x)
            width = width.max(input_width + bit_length(graph.max_operand() as u64) + 1);
            transposed(filter, architecture, partition, graph)?
        }
    };
    let netlist = FilterNetlist {
        architecture,
        input_width,
        accumulator_width: width,
        elements,
        output,
        latency,
    };
    netlist.validate()?;
    Ok(netlist)
}

/// Systolic array: PE k sees `x(n - 2k)` and the registered partial sum of
/// PE k-1, so `y(n)` leaves the last PE at cycle `n + N - 1`.
fn pulsed_parallel(filter: &QuantizedFilter) -> (Vec<Element>, NetId, usize) {
    let mut b = Builder::new();
    let mut x = INPUT;
    let mut partial = None;
    for (k, &h) in filter.taps().iter().enumerate() {
        if k > 0 {
            let r = b.reg(x);
            x = b.reg(r);
        }
        let product = b.add(Element::ConstMultiplier {
            coeff: h.unsigned_abs(),
            a: x,
        });
        let incoming = match partial {
            None => b.zero(),
            Some(s) => b.reg(s),
        };
        partial = Some(b.accumulate(incoming, product, h));
    }
    (b.elements, partial.expect("at least one tap"), filter.len() - 1)
}

/// Direct form with pre-adders pairing `x(n-k)` and `x(n-(N-1-k))`;
/// products are registered and the sum is registered once more.
fn symmetric_preadd(filter: &QuantizedFilter) -> (Vec<Element>, NetId, usize) {
    let taps = filter.taps();
    let n = taps.len();
    let mut b = Builder::new();
    let mut delay = vec![INPUT];
    for k in 1..n {
        let r = b.reg(delay[k - 1]);
        delay.push(r);
    }
    let mut acc = b.zero();
    for (k, &h) in taps.iter().enumerate().take(n.div_ceil(2)) {
        let mirror = n - 1 - k;
        let operand = if mirror == k {
            delay[k]
        } else if filter.symmetry() == Symmetry::Odd {
            b.add(Element::Subtractor {
                a: delay[k],
                b: delay[mirror],
            })
        } else {
            b.add(Element::Adder {
                a: delay[k],
                b: delay[mirror],
            })
        };
        let product = b.add(Element::ConstMultiplier {
            coeff: h.unsigned_abs(),
            a: operand,
        });
        let staged = b.reg(product);
        acc = b.accumulate(acc, staged, h);
    }
    let out = b.reg(acc);
    (b.elements, out, 2)
}

/// Transposed form: every product of the current sample feeds a registered
/// accumulation spine, tap signs picking adder or subtractor.
fn transposed(
    filter: &QuantizedFilter,
    architecture: Architecture,
    partition: &CoefficientPartition,
    graph: &AdderGraph,
) -> Result<(Vec<Element>, NetId, usize), ArchError> {
    let via_mcm = |m: u64| {
        partition.coeff_r.binary_search(&m).is_ok()
            || (architecture == Architecture::RagPure && partition.coeff_s.binary_search(&m).is_ok())
    };
    let mut b = Builder::new();
    let mut block = None;
    let mut products: BTreeMap<u64, NetId> = BTreeMap::new();
    for &m in partition.tap_magnitudes.iter() {
        if m == 0 || products.contains_key(&m) {
            continue;
        }
        let net = if m.is_power_of_two() {
            b.add(Element::ShiftWire {
                shift: m.trailing_zeros(),
                a: INPUT,
            })
        } else if via_mcm(m) {
            if !graph.outputs().contains_key(&m) {
                return Err(ArchError::GraphCoverage { magnitude: m });
            }
            let blk = *block.get_or_insert_with(|| {
                b.add(Element::McmBlock {
                    a: INPUT,
                    graph: graph.clone(),
                })
            });
            b.add(Element::McmPort {
                block: blk,
                magnitude: m,
            })
        } else {
            b.add(Element::ConstMultiplier { coeff: m, a: INPUT })
        };
        products.insert(m, net);
    }
    let taps = filter.taps();
    let mut carry: Option<NetId> = None;
    for k in (0..taps.len()).rev() {
        let incoming = match carry {
            None => b.zero(),
            Some(acc) => b.reg(acc),
        };
        let h = taps[k];
        carry = Some(if h == 0 {
            incoming
        } else {
            b.accumulate(incoming, products[&h.unsigned_abs()], h)
        });
    }
    let out = b.reg(carry.expect("at least one tap"));
    Ok((b.elements, out, 1))
}

/// Exact `y(n) = Σ h(k) x(n-k)` with `x(m) = 0` for `m < 0`.
pub fn golden(filter: &QuantizedFilter, x: &[i64]) -> Vec<i128> {
    let h = filter.taps();
    (0..x.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, &hk)| hk as i128 * x[n - k] as i128)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimTrace {
    pub inputs: Vec<i64>,
    pub outputs: Vec<i128>,
    pub cycles: usize,
}

impl SimTrace {
    /// `cycle value` per line.
    pub fn to_text(&self) -> String {
        self.outputs
            .iter()
            .enumerate()
            .map(|(c, v)| format!("{c} {v}\n"))
            .collect()
    }

    /// First `n` where `outputs[n + latency] != expected[n]`.
    pub fn first_divergence(&self, expected: &[i128], latency: usize) -> Option<usize> {
        (0..self.outputs.len().saturating_sub(latency)).find(|&n| self.outputs[n + latency] != expected[n])
    }
}

pub(crate) fn fits(v: i128, width: u32) -> bool {
    let half = 1i128 << (width - 1);
    (-half..half).contains(&v)
}

/// Largest magnitude accepted as a sample: `|x| < 2^(width-1)`.
pub fn sample_limit(input_width: u32) -> i64 {
    (1i64 << (input_width - 1)) - 1
}

/// Runs the netlist one cycle per input sample, registers starting at
/// zero. Every value is checked against the accumulator width.
pub fn simulate(netlist: &FilterNetlist, x: &[i64]) -> Result<SimTrace, SimError> {
    let limit = sample_limit(netlist.input_width);
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| v.abs() > limit) {
        return Err(SimError::InputRange {
            index,
            value,
            width: netlist.input_width,
        });
    }
    let width = netlist.accumulator_width;
    let els = &netlist.elements;
    let mut state = vec![0i128; els.len()];
    let mut vals = vec![0i128; els.len()];
    let mut ports: Vec<BTreeMap<u64, i128>> = vec![BTreeMap::new(); els.len()];
    let mut outputs = Vec::with_capacity(x.len());
    for (cycle, &sample) in x.iter().enumerate() {
        for i in 0..els.len() {
            let v = match &els[i] {
                Element::Input => sample as i128,
                Element::Zero => 0,
                Element::Register { .. } => state[i],
                Element::Adder { a, b } => vals[*a] + vals[*b],
                Element::Subtractor { a, b } => vals[*a] - vals[*b],
                Element::ConstMultiplier { coeff, a } => *coeff as i128 * vals[*a],
                Element::ShiftWire { shift, a } => vals[*a] << shift,
                Element::McmBlock { a, graph } => {
                    let input = vals[*a];
                    if let Some(&bad) = graph.node_values(input).iter().find(|&&v| !fits(v, width)) {
                        return Err(SimError::Overflow {
                            cycle,
                            element: i,
                            value: bad,
                            width,
                        });
                    }
                    ports[i] = graph.evaluate(input);
                    input
                }
                Element::McmPort { block, magnitude } => ports[*block][magnitude],
            };
            if !fits(v, width) {
                return Err(SimError::Overflow {
                    cycle,
                    element: i,
                    value: v,
                    width,
                });
            }
            vals[i] = v;
        }
        outputs.push(vals[netlist.output]);
        for (i, el) in els.iter().enumerate() {
            if let Element::Register { d } = el {
                state[i] = vals[*d];
            }
        }
    }
    Ok(SimTrace {
        inputs: x.to_vec(),
        outputs,
        cycles: x.len(),
    })
}
