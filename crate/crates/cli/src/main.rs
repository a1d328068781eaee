//! `ragfir`: design, synthesize, verify and compare FIR filter datapaths.
//!
//! Exit codes: 0 success, 1 verification or synthesis failure, 2 usage error.

mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ragfir_core::arch::{self, sample_limit, Architecture};
use ragfir_core::coeffs::{design_lowpass, preprocess, quantize};
use ragfir_core::costtable::{classify, CostTable, DEFAULT_BOUND, DEFAULT_EXACT_LEVEL, MAX_LEVEL};
use ragfir_core::rag::{synthesize_all, synthesize_traced};
use ragfir_core::{hdl, AdderGraph, CoefficientPartition, FilterSpec, QuantizedFilter, SynthesisMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use report::{
    ArchSummary, Classification, Column, Comparison, GraphSummary, PartitionSummary, RunReport, Tool, Verdict,
};

#[derive(Parser)]
#[command(name = "ragfir", version, about = "Multiplierless and hybrid FIR filter synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a windowed-sinc low-pass filter and write its integer taps.
    Design(DesignArgs),
    /// Synthesize one architecture and write a run report.
    Synth(SynthArgs),
    /// Simulate random samples through one architecture against the golden model.
    Verify(VerifyArgs),
    /// Build every architecture and print a table of structural metrics.
    Compare(CompareArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Number of taps.
    #[arg(long)]
    taps: usize,
    /// Sample rate in Hz.
    #[arg(long)]
    fs: f64,
    /// Cutoff frequency in Hz.
    #[arg(long)]
    fc: f64,
    /// Fraction bits of the integer taps.
    #[arg(long, default_value_t = 15)]
    frac_bits: u32,
    /// Output coefficient file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Pulsed,
    Preadd,
    Hybrid,
    Rag,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Pulsed => Architecture::PulsedParallel,
            ArchArg::Preadd => Architecture::SymmetricPreadd,
            ArchArg::Hybrid => Architecture::RagHybrid,
            ArchArg::Rag => Architecture::RagPure,
        }
    }
}

#[derive(Args)]
struct CostArgs {
    /// Largest odd value the cost table covers.
    #[arg(long, default_value_t = DEFAULT_BOUND)]
    cost_bound: u64,
    /// Deepest cost level searched exhaustively (1 to 4).
    #[arg(long, default_value_t = DEFAULT_EXACT_LEVEL)]
    cost_exact_level: u8,
    /// Cost table cache; read when its parameters match, rewritten otherwise.
    #[arg(long)]
    cost_cache: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Coefficient file, one integer per line.
    file: PathBuf,
    #[arg(long, value_enum)]
    arch: ArchArg,
    #[command(flatten)]
    cost: CostArgs,
    /// Datapath input width in bits.
    #[arg(long, default_value_t = 12)]
    input_width: u32,
    /// Random samples for the simulation spot check.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Seed of the spot-check samples.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the adder graph text.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    /// Write the Verilog module.
    #[arg(long)]
    emit_hdl: Option<PathBuf>,
    /// Write the element manifest (JSON).
    #[arg(long)]
    emit_manifest: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    arch: ArchArg,
    /// Number of random samples.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Bit width of the random samples; at most the input width.
    #[arg(long, default_value_t = 12)]
    width: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Datapath input width in bits.
    #[arg(long, default_value_t = 12)]
    input_width: u32,
    #[command(flatten)]
    cost: CostArgs,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    file: PathBuf,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value_t = 12)]
    input_width: u32,
    /// Random samples checked against the golden model per architecture.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON comparison here.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Failed(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Failed(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(a) => design(a),
        Command::Synth(a) => synth(a),
        Command::Verify(a) => verify(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn design(a: DesignArgs) -> Result<(), Failure> {
    let spec = FilterSpec {
        tap_count: a.taps,
        sample_rate: a.fs,
        cutoff: a.fc,
        quant_fraction_bits: a.frac_bits,
    };
    if a.frac_bits > 40 {
        return Err(usage(anyhow!("--frac-bits {} is above 40", a.frac_bits)));
    }
    let real = design_lowpass(&spec).context("invalid filter spec")?;
    let q = quantize(&real, a.frac_bits);
    write(&a.out, &q.to_file_string())?;
    println!(
        "wrote {} taps ({} symmetry) to {}",
        q.len(),
        symmetry_name(&q),
        a.out.display()
    );
    Ok(())
}

fn symmetry_name(f: &QuantizedFilter) -> String {
    format!("{:?}", f.symmetry()).to_lowercase()
}

fn load_filter(path: &Path) -> Result<QuantizedFilter, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    let filter = QuantizedFilter::parse(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)?;
    Ok(filter)
}

fn check_input_width(w: u32) -> Result<(), Failure> {
    if !(2..=48).contains(&w) {
        return Err(usage(anyhow!("--input-width {w} outside 2..=48")));
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cost_table(c: &CostArgs) -> Result<CostTable, Failure> {
    if c.cost_bound == 0 {
        return Err(usage(anyhow!("--cost-bound must be positive")));
    }
    if !(1..=MAX_LEVEL).contains(&c.cost_exact_level) {
        return Err(usage(anyhow!("--cost-exact-level must be 1 to {MAX_LEVEL}")));
    }
    if let Some(path) = &c.cost_cache {
        if let Ok(text) = fs::read_to_string(path) {
            match CostTable::from_text(&text, c.cost_bound, c.cost_exact_level) {
                Ok(Some(t)) => return Ok(t),
                Ok(None) => {}
                Err(e) => eprintln!("warning: ignoring {}: {e}", path.display()),
            }
        }
    }
    let table = CostTable::build(c.cost_bound, c.cost_exact_level).map_err(usage)?;
    if let Some(path) = &c.cost_cache {
        write(path, &table.to_text())?;
    }
    Ok(table)
}

fn cost_params(c: &CostArgs, p: &mut BTreeMap<&'static str, String>) {
    p.insert("cost_bound", c.cost_bound.to_string());
    p.insert("cost_exact_level", c.cost_exact_level.to_string());
}

fn mode_for(a: Architecture) -> Option<SynthesisMode> {
    match a {
        Architecture::RagHybrid => Some(SynthesisMode::McmSmallOnly),
        Architecture::RagPure => Some(SynthesisMode::McmAll),
        _ => None,
    }
}

fn mode_name(m: SynthesisMode) -> &'static str {
    match m {
        SynthesisMode::McmSmallOnly => "mcm_small_only",
        SynthesisMode::McmAll => "mcm_all",
    }
}

fn samples(n: usize, width: u32, seed: u64) -> Vec<i64> {
    let hi = sample_limit(width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-hi..=hi)).collect()
}

/// Everything a single-architecture run needs before simulation.
struct Prepared {
    filter: QuantizedFilter,
    partition: CoefficientPartition,
    table: CostTable,
    graph: Option<(SynthesisMode, AdderGraph, Vec<u64>)>,
}

fn prepare(path: &Path, arch: Architecture, cost: &CostArgs) -> Result<Prepared, Failure> {
    let filter = load_filter(path)?;
    let partition = preprocess(&filter);
    let table = cost_table(cost)?;
    let graph = mode_for(arch).map(|mode| {
        let mut targets: std::collections::BTreeSet<u64> = partition.coeff_r.iter().copied().collect();
        if mode == SynthesisMode::McmAll {
            targets.extend(partition.coeff_s.iter().copied());
        }
        targets.extend(partition.power_of_two.iter().copied());
        let state = synthesize_traced(&targets, &table);
        (mode, state.graph().clone(), state.aux_added().to_vec())
    });
    Ok(Prepared {
        filter,
        partition,
        table,
        graph,
    })
}

fn base_report(command: &'static str, prep: &Prepared, parameters: BTreeMap<&'static str, String>) -> RunReport {
    let c = classify(prep.partition.coeff_r.iter().copied(), &prep.table);
    RunReport {
        tool: Tool::current(),
        command,
        parameters,
        partition: PartitionSummary::new(prep.filter.len(), symmetry_name(&prep.filter), &prep.partition),
        classification: Classification::new(&c, prep.table.exact_through()),
        graph: prep.graph.as_ref().map(|(mode, g, aux)| GraphSummary {
            mode: mode_name(*mode).into(),
            metrics: g.metrics(),
            auxiliary: aux.clone(),
        }),
        architecture: None,
        verification: BTreeMap::new(),
    }
}

fn graph_verdict(g: &AdderGraph) -> Verdict {
    match g
        .validate()
        .map_err(|e| e.to_string())
        .and_then(|_| g.verify(100, 16).map_err(|e| e.to_string()))
    {
        Ok(checks) => Verdict::pass(format!("{checks} output checks")),
        Err(e) => Verdict::fail(e),
    }
}

fn golden_verdict(netlist: &arch::FilterNetlist, filter: &QuantizedFilter, x: &[i64]) -> Verdict {
    let want = arch::golden(filter, x);
    match arch::simulate(netlist, x) {
        Ok(trace) => match trace.first_divergence(&want, netlist.latency) {
            None => Verdict::pass(format!("{} samples, latency {}", x.len(), netlist.latency)),
            Some(n) => Verdict::fail(format!(
                "first divergence at n = {n} (cycle {}): got {}, expected {}",
                n + netlist.latency,
                trace.outputs[n + netlist.latency],
                want[n]
            )),
        },
        Err(e) => Verdict::fail(e.to_string()),
    }
}

fn hdl_verdict(netlist: &arch::FilterNetlist, x: &[i64]) -> Verdict {
    let sim = match arch::simulate(netlist, x) {
        Ok(t) => t,
        Err(e) => return Verdict::fail(e.to_string()),
    };
    match hdl::interpret(&hdl::emit(netlist), x) {
        Ok(hw) => match (0..x.len()).find(|&c| hw.outputs[c] != sim.outputs[c]) {
            None => Verdict::pass(format!("{} cycles", x.len())),
            Some(c) => Verdict::fail(format!(
                "cycle {c}: hdl {}, simulator {}",
                hw.outputs[c], sim.outputs[c]
            )),
        },
        Err(e) => Verdict::fail(e.to_string()),
    }
}

fn emit_report(report_text: &str, summary: &str, path: Option<&PathBuf>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            write(p, report_text)?;
            print!("{summary}");
        }
        None => print!("{report_text}"),
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    check_input_width(a.input_width)?;
    let arch: Architecture = a.arch.into();
    let prep = prepare(&a.file, arch, &a.cost)?;
    let mut params = BTreeMap::from([
        ("file", a.file.display().to_string()),
        ("arch", arch.flag().to_string()),
        ("input_width", a.input_width.to_string()),
        ("samples", a.samples.to_string()),
        ("seed", a.seed.to_string()),
    ]);
    cost_params(&a.cost, &mut params);
    let mut report = base_report("synth", &prep, params);
    if let Some((_, g, _)) = &prep.graph {
        report.verification.insert("graph", graph_verdict(g));
        if let Some(path) = &a.dump_graph {
            write(path, &g.to_string())?;
        }
    } else if a.dump_graph.is_some() {
        return Err(usage(anyhow!("--dump-graph needs --arch hybrid or rag")));
    }
    let netlist = arch::build(
        &prep.filter,
        arch,
        &prep.partition,
        prep.graph.as_ref().map(|(_, g, _)| g),
        a.input_width,
    )
    .with_context(|| format!("building {arch}"))?;
    report.architecture = Some(ArchSummary {
        name: arch.name().into(),
        metrics: netlist.metrics(),
    });
    let x = samples(a.samples, a.input_width, a.seed);
    report
        .verification
        .insert("simulation", golden_verdict(&netlist, &prep.filter, &x));
    if a.emit_hdl.is_some() || a.emit_manifest.is_some() {
        let art = hdl::emit(&netlist);
        if let Some(p) = &a.emit_hdl {
            write(p, &art.text)?;
        }
        if let Some(p) = &a.emit_manifest {
            write(p, &art.manifest_text())?;
        }
        report.verification.insert("hdl", hdl_verdict(&netlist, &x));
    }
    emit_report(&report.to_json(), &report.summary(), a.report.as_ref())?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Failed(anyhow!("verification failed")))
    }
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    check_input_width(a.input_width)?;
    if a.width < 2 || a.width > a.input_width {
        return Err(usage(anyhow!(
            "--width {} must be between 2 and the input width {}",
            a.width,
            a.input_width
        )));
    }
    let arch: Architecture = a.arch.into();
    let prep = prepare(&a.file, arch, &a.cost)?;
    let mut params = BTreeMap::from([
        ("file", a.file.display().to_string()),
        ("arch", arch.flag().to_string()),
        ("input_width", a.input_width.to_string()),
        ("samples", a.samples.to_string()),
        ("width", a.width.to_string()),
        ("seed", a.seed.to_string()),
    ]);
    cost_params(&a.cost, &mut params);
    let mut report = base_report("verify", &prep, params);
    if let Some((_, g, _)) = &prep.graph {
        report.verification.insert("graph", graph_verdict(g));
    }
    let netlist = arch::build(
        &prep.filter,
        arch,
        &prep.partition,
        prep.graph.as_ref().map(|(_, g, _)| g),
        a.input_width,
    )
    .with_context(|| format!("building {arch}"))?;
    report.architecture = Some(ArchSummary {
        name: arch.name().into(),
        metrics: netlist.metrics(),
    });
    let x = samples(a.samples, a.width, a.seed);
    report
        .verification
        .insert("simulation", golden_verdict(&netlist, &prep.filter, &x));
    report.verification.insert("hdl", hdl_verdict(&netlist, &x));
    if let Some(p) = &a.report {
        write(p, &report.to_json())?;
    }
    print!("{}", report.summary());
    if report.passed() {
        println!("pass");
        Ok(())
    } else {
        let first = report.verification.iter().find(|(_, v)| !v.passed).expect("a failure");
        Err(Failure::Failed(anyhow!("{} mismatch: {}", first.0, first.1.detail)))
    }
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    check_input_width(a.input_width)?;
    let filter = load_filter(&a.file)?;
    let partition = preprocess(&filter);
    let table = cost_table(&a.cost)?;
    let x = samples(a.samples, a.input_width, a.seed);
    let small = synthesize_all(&partition, &table, SynthesisMode::McmSmallOnly);
    let all = synthesize_all(&partition, &table, SynthesisMode::McmAll);
    let columns: Vec<Column> = Architecture::ALL
        .into_iter()
        .map(|arch| {
            let graph = match mode_for(arch) {
                Some(SynthesisMode::McmAll) => Some(&all),
                Some(SynthesisMode::McmSmallOnly) => Some(&small),
                None => None,
            };
            match arch::build(&filter, arch, &partition, graph, a.input_width) {
                Ok(n) => Column {
                    architecture: arch.name().into(),
                    metrics: Some(n.metrics()),
                    golden: Some(golden_verdict(&n, &filter, &x)),
                    error: None,
                },
                Err(e) => Column {
                    architecture: arch.name().into(),
                    metrics: None,
                    golden: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut params = BTreeMap::from([
        ("file", a.file.display().to_string()),
        ("input_width", a.input_width.to_string()),
        ("samples", a.samples.to_string()),
        ("seed", a.seed.to_string()),
    ]);
    cost_params(&a.cost, &mut params);
    let cmp = Comparison {
        tool: Tool::current(),
        command: "compare",
        parameters: params,
        partition: PartitionSummary::new(filter.len(), symmetry_name(&filter), &partition),
        columns,
    };
    print!("{}", cmp.table());
    if let Some(p) = &a.report {
        write(p, &cmp.to_json())?;
    }
    let failed: Vec<&str> = cmp
        .columns
        .iter()
        .filter(|c| !c.ok())
        .map(|c| c.architecture.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Failed(anyhow!("failed: {}", failed.join(", "))))
    }
}
