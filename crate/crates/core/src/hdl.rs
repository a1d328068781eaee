//! Structural Verilog-2001 emission and an interpreter for the emitted
//! subset.
//!
//! Every netlist element becomes one identifier `n<i>`. MCM blocks are
//! flattened into `n<i>_m<j>` wires, one per graph node. Shifts are
//! concatenations with zero bits, so they cost no logic. The interpreter
//! parses the text back (not the netlist) and runs it cycle by cycle with
//! two's-complement wraparound at each declared width.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::arch::{fits, sample_limit, Element, FilterNetlist, SimTrace};
use crate::graph::{Node, Op};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HdlError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest identifier {0} is not declared in the text")]
    Manifest(String),
    #[error("sample {index} = {value} does not fit {width} input bits")]
    InputRange { index: usize, value: i64, width: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub element: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HdlArtifact {
    pub module_name: String,
    pub text: String,
    pub manifest: BTreeMap<String, ManifestEntry>,
}

impl HdlArtifact {
    /// JSON document with keys in identifier order.
    pub fn manifest_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn ident(i: usize) -> String {
    format!("n{i}")
}

fn mcm_wire(block: usize, node: usize) -> String {
    format!("n{block}_m{node}")
}

/// `name` shifted left by `k` as pure wiring.
fn shifted(name: &str, k: u32) -> String {
    if k == 0 {
        name.to_string()
    } else {
        format!("$signed({{{name}, {k}'b0}})")
    }
}

pub fn emit(netlist: &FilterNetlist) -> HdlArtifact {
    let w = netlist.accumulator_width;
    let module_name = format!("fir_{}", netlist.architecture.name());
    let mut manifest = BTreeMap::new();
    let mut decls = String::new();
    let mut body = String::new();
    let mut regs = Vec::new();

    for (i, el) in netlist.elements.iter().enumerate() {
        let name = ident(i);
        let detail = match el {
            Element::Input => {
                writeln!(body, "    assign {name} = x_in;").unwrap();
                "x_in".to_string()
            }
            Element::Zero => {
                writeln!(body, "    assign {name} = 0;").unwrap();
                "0".to_string()
            }
            Element::Register { d } => {
                regs.push((name.clone(), ident(*d)));
                format!("register of {}", ident(*d))
            }
            Element::Adder { a, b } => {
                let rhs = format!("{} + {}", ident(*a), ident(*b));
                writeln!(body, "    assign {name} = {rhs};").unwrap();
                rhs
            }
            Element::Subtractor { a, b } => {
                let rhs = format!("{} - {}", ident(*a), ident(*b));
                writeln!(body, "    assign {name} = {rhs};").unwrap();
                rhs
            }
            Element::ConstMultiplier { coeff, a } => {
                let rhs = format!("{w}'sd{coeff} * {}", ident(*a));
                writeln!(body, "    assign {name} = {rhs};").unwrap();
                format!("{coeff} times {}", ident(*a))
            }
            Element::ShiftWire { shift, a } => {
                writeln!(body, "    assign {name} = {};", shifted(&ident(*a), *shift)).unwrap();
                format!("{} << {shift}", ident(*a))
            }
            Element::McmBlock { a, graph } => {
                writeln!(body, "    // {name}: shift-add block, {} adders", graph.adder_count()).unwrap();
                for (j, node) in graph.nodes().iter().enumerate() {
                    let wire = mcm_wire(i, j);
                    writeln!(decls, "    wire signed [{}:0] {wire};", w - 1).unwrap();
                    let rhs = match *node {
                        Node::Input => ident(*a),
                        Node::AddSub {
                            left,
                            left_shift,
                            right,
                            right_shift,
                            op,
                        } => format!(
                            "{} {} {}",
                            shifted(&mcm_wire(i, left), left_shift),
                            match op {
                                Op::Add => '+',
                                Op::Sub => '-',
                            },
                            shifted(&mcm_wire(i, right), right_shift)
                        ),
                    };
                    writeln!(body, "    assign {wire} = {rhs};").unwrap();
                }
                manifest.insert(
                    name,
                    ManifestEntry {
                        element: i,
                        kind: el.kind().to_string(),
                        detail: format!("{} nodes fed by {}", graph.nodes().len(), ident(*a)),
                    },
                );
                continue;
            }
            Element::McmPort { block, magnitude } => {
                let Element::McmBlock { graph, .. } = &netlist.elements[*block] else {
                    panic!("mcm port n{i} is not attached to a block");
                };
                let tap = graph.outputs()[magnitude];
                let src = shifted(&mcm_wire(*block, tap.node), tap.shift);
                writeln!(body, "    assign {name} = {src};").unwrap();
                format!("{magnitude} times input of {}", ident(*block))
            }
        };
        let storage = if matches!(el, Element::Register { .. }) {
            "reg "
        } else {
            "wire"
        };
        writeln!(decls, "    {storage} signed [{}:0] {name};", w - 1).unwrap();
        manifest.insert(
            name,
            ManifestEntry {
                element: i,
                kind: el.kind().to_string(),
                detail,
            },
        );
    }

    let mut text = String::new();
    writeln!(
        text,
        "// {} datapath, latency {} cycles, {} bit accumulator",
        netlist.architecture.name(),
        netlist.latency,
        w
    )
    .unwrap();
    writeln!(text, "module {module_name} (").unwrap();
    writeln!(text, "    input wire clk,").unwrap();
    writeln!(text, "    input wire rst,").unwrap();
    writeln!(text, "    input wire signed [{}:0] x_in,", netlist.input_width - 1).unwrap();
    writeln!(text, "    output wire signed [{}:0] y_out", w - 1).unwrap();
    writeln!(text, ");").unwrap();
    text.push_str(&decls);
    text.push_str(&body);
    if !regs.is_empty() {
        writeln!(text, "    always @(posedge clk) begin").unwrap();
        writeln!(text, "        if (rst) begin").unwrap();
        for (q, _) in &regs {
            writeln!(text, "            {q} <= 0;").unwrap();
        }
        writeln!(text, "        end else begin").unwrap();
        for (q, d) in &regs {
            writeln!(text, "            {q} <= {d};").unwrap();
        }
        writeln!(text, "        end").unwrap();
        writeln!(text, "    end").unwrap();
    }
    writeln!(text, "    assign y_out = {};", ident(netlist.output)).unwrap();
    writeln!(text, "endmodule").unwrap();

    HdlArtifact {
        module_name,
        text,
        manifest,
    }
}

#[derive(Debug, Clone, Copy)]
enum Operand {
    Slot(usize),
    Shifted(usize, u32),
    Const(i128),
}

#[derive(Debug, Clone, Copy)]
enum Expr {
    Term(Operand),
    Add(Operand, Operand),
    Sub(Operand, Operand),
    Mul(i128, Operand),
}

#[derive(Debug, Default)]
struct Program {
    widths: Vec<u32>,
    slots: HashMap<String, usize>,
    is_reg: Vec<bool>,
    input: Option<usize>,
    output: Option<(usize, u32)>,
    input_width: u32,
    assigns: Vec<(usize, Expr)>,
    updates: Vec<(usize, usize)>,
    resets: Vec<usize>,
}

impl Program {
    fn declare(&mut self, name: &str, width: u32, is_reg: bool, line: usize) -> Result<usize, HdlError> {
        if self.slots.contains_key(name) {
            return Err(parse_err(line, &format!("{name} declared twice")));
        }
        let slot = self.widths.len();
        self.widths.push(width);
        self.is_reg.push(is_reg);
        self.slots.insert(name.to_string(), slot);
        Ok(slot)
    }

    fn slot(&self, name: &str, line: usize) -> Result<usize, HdlError> {
        self.slots
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(line, &format!("undeclared identifier {name}")))
    }

    fn operand(&self, tok: &str, line: usize) -> Result<Operand, HdlError> {
        if let Some(inner) = tok.strip_prefix("$signed({").and_then(|t| t.strip_suffix("})")) {
            let (name, zeros) = inner
                .split_once(", ")
                .ok_or_else(|| parse_err(line, "bad concatenation"))?;
            let k = zeros
                .strip_suffix("'b0")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| parse_err(line, "bad zero padding"))?;
            return Ok(Operand::Shifted(self.slot(name, line)?, k));
        }
        if let Ok(v) = tok.parse::<i128>() {
            return Ok(Operand::Const(v));
        }
        Ok(Operand::Slot(self.slot(tok, line)?))
    }

    fn expr(&self, rhs: &str, line: usize) -> Result<Expr, HdlError> {
        if let Some((lit, operand)) = rhs.split_once(" * ") {
            let (width, value) = lit
                .split_once("'sd")
                .ok_or_else(|| parse_err(line, "multiplier literal must be sized and signed"))?;
            let width: u32 = width.parse().map_err(|_| parse_err(line, "bad literal width"))?;
            let value: i128 = value.parse().map_err(|_| parse_err(line, "bad literal value"))?;
            return Ok(Expr::Mul(wrap(value, width), self.operand(operand, line)?));
        }
        if let Some((a, b)) = rhs.split_once(" + ") {
            return Ok(Expr::Add(self.operand(a, line)?, self.operand(b, line)?));
        }
        if let Some((a, b)) = rhs.split_once(" - ") {
            return Ok(Expr::Sub(self.operand(a, line)?, self.operand(b, line)?));
        }
        Ok(Expr::Term(self.operand(rhs, line)?))
    }
}

fn parse_err(line: usize, message: &str) -> HdlError {
    HdlError::Parse {
        line,
        message: message.to_string(),
    }
}

/// Reads `[H:0]` and returns `H + 1`.
fn range_width(tok: &str, line: usize) -> Result<u32, HdlError> {
    tok.strip_prefix('[')
        .and_then(|t| t.strip_suffix(":0]"))
        .and_then(|h| h.parse::<u32>().ok())
        .map(|h| h + 1)
        .ok_or_else(|| parse_err(line, &format!("bad range {tok:?}")))
}

/// Sign-extends the low `width` bits of `v`.
fn wrap(v: i128, width: u32) -> i128 {
    if width >= 128 {
        return v;
    }
    let shift = 128 - width;
    (v << shift) >> shift
}

#[derive(PartialEq)]
enum Section {
    Header,
    Body,
    Reset,
    Update,
    AfterIf,
    Closing,
}

fn compile(text: &str) -> Result<Program, HdlError> {
    let mut prog = Program::default();
    let mut section = Section::Header;
    let mut defined = Vec::new();
    let mut saw_module = false;
    let mut saw_end = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with("//") {
            continue;
        }
        let toks: Vec<&str> = l.trim_end_matches([';', ',']).split_whitespace().collect();
        match (&section, toks.as_slice()) {
            (Section::Header, ["module", _, "("]) => saw_module = true,
            (Section::Header, ["input", "wire", "clk"] | ["input", "wire", "rst"]) => {}
            (Section::Header, ["input", "wire", "signed", range, "x_in"]) => {
                prog.input_width = range_width(range, line)?;
                let s = prog.declare("x_in", prog.input_width, false, line)?;
                prog.input = Some(s);
                defined.push(s);
            }
            (Section::Header, ["output", "wire", "signed", range, "y_out"]) => {
                let width = range_width(range, line)?;
                prog.output = Some((usize::MAX, width));
            }
            (Section::Header, [")"]) => section = Section::Body,
            (Section::Body, [kind @ ("wire" | "reg"), "signed", range, name]) => {
                let width = range_width(range, line)?;
                let s = prog.declare(name, width, *kind == "reg", line)?;
                if *kind == "reg" {
                    defined.push(s);
                }
            }
            (Section::Body, ["assign", "y_out", "=", src]) => {
                let s = prog.slot(src, line)?;
                let (_, width) = prog.output.ok_or_else(|| parse_err(line, "y_out not declared"))?;
                prog.output = Some((s, width));
                section = Section::Closing;
            }
            (Section::Body, ["assign", target, "=", ..]) => {
                let rhs = l
                    .trim_end_matches(';')
                    .split_once(" = ")
                    .map(|(_, r)| r)
                    .ok_or_else(|| parse_err(line, "missing ="))?;
                let t = prog.slot(target, line)?;
                if prog.is_reg[t] || defined.contains(&t) {
                    return Err(parse_err(line, &format!("{target} assigned twice")));
                }
                let expr = prog.expr(rhs, line)?;
                let reads = match expr {
                    Expr::Term(a) | Expr::Mul(_, a) => vec![a],
                    Expr::Add(a, b) | Expr::Sub(a, b) => vec![a, b],
                };
                for op in reads {
                    if let Operand::Slot(s) | Operand::Shifted(s, _) = op {
                        if !defined.contains(&s) {
                            return Err(parse_err(line, "operand used before it is driven"));
                        }
                    }
                }
                prog.assigns.push((t, expr));
                defined.push(t);
            }
            (Section::Body, ["always", "@(posedge", "clk)", "begin"]) => {}
            (Section::Body, ["if", "(rst)", "begin"]) => section = Section::Reset,
            (Section::Reset, [q, "<=", "0"]) => prog.resets.push(prog.slot(q, line)?),
            (Section::Reset, ["end", "else", "begin"]) => section = Section::Update,
            (Section::Update, [q, "<=", d]) => {
                let q = prog.slot(q, line)?;
                if !prog.is_reg[q] {
                    return Err(parse_err(line, "nonblocking assignment to a wire"));
                }
                let d = prog.slot(d, line)?;
                prog.updates.push((q, d));
            }
            (Section::Update, ["end"]) => section = Section::AfterIf,
            (Section::AfterIf, ["end"]) => section = Section::Body,
            (Section::Closing, ["endmodule"]) => saw_end = true,
            _ => return Err(parse_err(line, &format!("unexpected {l:?}"))),
        }
    }
    if !saw_module || !saw_end || prog.input.is_none() {
        return Err(parse_err(0, "incomplete module"));
    }
    match prog.output {
        Some((s, _)) if s != usize::MAX => {}
        _ => return Err(parse_err(0, "y_out never driven")),
    }
    let regs: Vec<usize> = (0..prog.widths.len()).filter(|&s| prog.is_reg[s]).collect();
    let mut updated: Vec<usize> = prog.updates.iter().map(|&(q, _)| q).collect();
    updated.sort_unstable();
    let mut reset = prog.resets.clone();
    reset.sort_unstable();
    if updated != regs || reset != regs {
        return Err(parse_err(0, "every register needs exactly one reset and one update"));
    }
    Ok(prog)
}

/// Parses `artifact.text` and runs it on `x`, one sample per clock after
/// reset. Identical to [`crate::arch::simulate`] on the source netlist.
pub fn interpret(artifact: &HdlArtifact, x: &[i64]) -> Result<SimTrace, HdlError> {
    let prog = compile(&artifact.text)?;
    for name in artifact.manifest.keys() {
        let declared = prog.slots.contains_key(name) || prog.slots.contains_key(&format!("{name}_m0"));
        if !declared {
            return Err(HdlError::Manifest(name.clone()));
        }
    }
    let limit = sample_limit(prog.input_width) as i128;
    let mut vals = vec![0i128; prog.widths.len()];
    for &r in &prog.resets {
        vals[r] = 0;
    }
    let input = prog.input.expect("compiled");
    let (out_slot, out_width) = prog.output.expect("compiled");
    let mut outputs = Vec::with_capacity(x.len());
    let read = |vals: &[i128], op: Operand| -> i128 {
        match op {
            Operand::Slot(s) => vals[s],
            Operand::Shifted(s, k) => wrap(vals[s] << k, prog.widths[s] + k),
            Operand::Const(c) => c,
        }
    };
    for (index, &sample) in x.iter().enumerate() {
        if (sample as i128).abs() > limit {
            return Err(HdlError::InputRange {
                index,
                value: sample,
                width: prog.input_width,
            });
        }
        vals[input] = wrap(sample as i128, prog.input_width);
        for &(t, expr) in &prog.assigns {
            let v = match expr {
                Expr::Term(a) => read(&vals, a),
                Expr::Add(a, b) => read(&vals, a) + read(&vals, b),
                Expr::Sub(a, b) => read(&vals, a) - read(&vals, b),
                Expr::Mul(c, a) => c * read(&vals, a),
            };
            vals[t] = wrap(v, prog.widths[t]);
        }
        outputs.push(wrap(vals[out_slot], out_width));
        let next: Vec<i128> = prog
            .updates
            .iter()
            .map(|&(q, d)| wrap(vals[d], prog.widths[q]))
            .collect();
        for (&(q, _), v) in prog.updates.iter().zip(next) {
            vals[q] = v;
        }
    }
    debug_assert!(outputs.iter().all(|&v| fits(v, out_width)));
    Ok(SimTrace {
        inputs: x.to_vec(),
        outputs,
        cycles: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build, simulate, Architecture};
    use crate::coeffs::{preprocess, QuantizedFilter};
    use crate::costtable::CostTable;
    use crate::rag::{synthesize_all, SynthesisMode};

    fn netlist(taps: &[i64], arch: Architecture) -> FilterNetlist {
        let f = QuantizedFilter::new(taps.to_vec());
        let p = preprocess(&f);
        let t = CostTable::build(1023, 3).unwrap();
        let g = synthesize_all(&p, &t, SynthesisMode::McmAll);
        build(&f, arch, &p, Some(&g), 10).unwrap()
    }

    #[test]
    fn closes_the_loop_on_small_filters() {
        let x: Vec<i64> = (0..64).map(|i| ((i * 7919) % 1021) - 510).collect();
        for arch in Architecture::ALL {
            let n = netlist(&[1, 2, 1], arch);
            let art = emit(&n);
            assert_eq!(interpret(&art, &x).unwrap(), simulate(&n, &x).unwrap(), "{arch}");
            let n = netlist(&[-3, 0, 45, 131, 45, 0, -3], arch);
            let art = emit(&n);
            assert_eq!(interpret(&art, &x).unwrap(), simulate(&n, &x).unwrap(), "{arch}");
        }
    }

    #[test]
    fn empty_input() {
        let art = emit(&netlist(&[1, 2, 1], Architecture::RagHybrid));
        let t = interpret(&art, &[]).unwrap();
        assert!(t.outputs.is_empty());
        assert_eq!(t.cycles, 0);
    }

    #[test]
    fn manifest_covers_every_element_once() {
        let n = netlist(&[-3, 0, 45, 131, 45, 0, -3], Architecture::RagPure);
        let art = emit(&n);
        let mut seen: Vec<usize> = art.manifest.values().map(|e| e.element).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..n.elements.len()).collect::<Vec<_>>());
        assert!(!art.text.contains('*'));
        assert_eq!(emit(&n), art);
    }

    #[test]
    fn rejects_tampered_text() {
        let art = emit(&netlist(&[1, 2, 1], Architecture::SymmetricPreadd));
        let broken = HdlArtifact {
            text: art.text.replace("assign n0 = x_in;", "assign n0 = n99;"),
            ..art.clone()
        };
        assert!(matches!(interpret(&broken, &[1]), Err(HdlError::Parse { .. })));
        let mut manifest = art.manifest.clone();
        manifest.insert(
            "ghost".into(),
            ManifestEntry {
                element: 0,
                kind: "input".into(),
                detail: String::new(),
            },
        );
        let ghost = HdlArtifact { manifest, ..art };
        assert_eq!(interpret(&ghost, &[1]), Err(HdlError::Manifest("ghost".into())));
    }

    #[test]
    fn wrap_sign_extends() {
        assert_eq!(wrap(255, 8), -1);
        assert_eq!(wrap(127, 8), 127);
        assert_eq!(wrap(-129, 8), 127);
    }
}
