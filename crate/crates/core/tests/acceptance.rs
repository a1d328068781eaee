//! Acceptance suite. Prints one `PASS`/`FAIL`/`SKIP` line per criterion
//! and exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use ragfir_core::arch::{self, Architecture};
use ragfir_core::coeffs::preprocess;
use ragfir_core::costtable::{classify, CostTable, DEFAULT_BOUND, DEFAULT_EXACT_LEVEL};
use ragfir_core::rag::{synthesize, synthesize_all, SynthesisMode};
use ragfir_core::{csd, hdl, QuantizedFilter};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mode_for(a: Architecture) -> SynthesisMode {
    if a == Architecture::RagPure {
        SynthesisMode::McmAll
    } else {
        SynthesisMode::McmSmallOnly
    }
}

fn netlist(f: &QuantizedFilter, a: Architecture, table: &CostTable, width: u32) -> Result<arch::FilterNetlist, String> {
    let p = preprocess(f);
    let g = synthesize_all(&p, table, mode_for(a));
    arch::build(f, a, &p, Some(&g), width).map_err(|e| format!("{a}: {e}"))
}

fn partition_regression() -> Outcome {
    let p = preprocess(&common::lowpass64());
    let r: BTreeSet<u64> = p.coeff_r.iter().copied().collect();
    let s: BTreeSet<u64> = p.coeff_s.iter().copied().collect();
    let want_r = BTreeSet::from([9, 49, 79, 127, 137, 162, 168, 174, 219, 269, 428, 450, 470, 592, 733]);
    let want_s = BTreeSet::from([
        747, 875, 957, 972, 903, 1100, 1825, 2622, 3462, 4311, 5134, 5891, 6548, 7072, 7437, 7624,
    ]);
    ensure(r == want_r, || format!("coeff_r {r:?}"))?;
    ensure(s == want_s, || format!("coeff_s {s:?}"))?;
    Ok(format!("coeff_r {} values, coeff_s {} values", r.len(), s.len()))
}

fn cost_regression(table: &CostTable) -> Outcome {
    let p = preprocess(&common::lowpass64());
    let c = classify(p.coeff_r.iter().copied(), table);
    let listed: [(&str, &[u64]); 4] = [
        ("cost-1", &[9, 127]),
        ("cost-2", &[49, 79, 137, 162, 168]),
        ("cost-3", &[174, 219]),
        ("cost-o", &[269, 428, 450, 470, 592, 733]),
    ];
    let computed = |v: u64| {
        (1..=4)
            .find(|&k| c.level(k).contains(&v))
            .map_or("cost-o".to_string(), |k| format!("cost-{k}"))
    };
    let one = c.level(1);
    let two = c.level(2);
    ensure(one == BTreeSet::from([9, 127]), || format!("cost-1 {one:?}"))?;
    ensure(two.is_superset(&BTreeSet::from([49, 79, 137, 162, 168])), || {
        format!("cost-2 {two:?} misses a listed member")
    })?;
    let mut divergence = Vec::new();
    for (name, values) in listed {
        for &v in values {
            let got = computed(v);
            if got != name {
                divergence.push(format!("{v} listed {name} computed {got}"));
            }
        }
    }
    // only the higher sets may move
    ensure(
        divergence
            .iter()
            .all(|d| d.contains("listed cost-3") || d.contains("listed cost-o")),
        || format!("{divergence:?}"),
    )?;
    Ok(format!(
        "cost-1 {one:?}, listed cost-2 members all at cost 2; divergence: {}",
        if divergence.is_empty() {
            "none".to_string()
        } else {
            divergence.join(", ")
        }
    ))
}

fn cost_oracle() -> Outcome {
    let oracle = common::oracle_costs(1024);
    let small = CostTable::build(1024, DEFAULT_EXACT_LEVEL).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for c in (1..=1024u64).step_by(2) {
        let want = oracle.get(&c).copied();
        let got = small.cost(c);
        ensure(got == want, || format!("c = {c}: table {got:?}, oracle {want:?}"))?;
        checked += 1;
    }
    Ok(format!("{checked} odd values, exact match through cost 4"))
}

fn adder_budget(table: &CostTable) -> Outcome {
    let p = preprocess(&common::lowpass64());
    let g = synthesize(&p.coeff_r.iter().copied().collect(), table);
    g.validate().map_err(|e| e.to_string())?;
    let checks = g.verify(100, 16).map_err(|e| e.to_string())?;
    ensure(g.outputs().len() == 15, || format!("{} outputs", g.outputs().len()))?;
    ensure(g.adder_count() <= 28, || format!("{} adders", g.adder_count()))?;
    Ok(format!("{} adders, {checks} output checks", g.adder_count()))
}

fn bit_exact(table: &CostTable) -> Outcome {
    let mut rng = common::rng(5);
    let mut filters = vec![common::lowpass64()];
    for _ in 0..25 {
        let taps = rng.gen_range(8..=64);
        filters.push(common::random_symmetric(&mut rng, taps, 14));
    }
    let mut runs = 0;
    for (i, f) in filters.iter().enumerate() {
        let x = common::random_samples(&mut rng, 1000, 12);
        let want = arch::golden(f, &x);
        for a in Architecture::ALL {
            let n = netlist(f, a, table, 12)?;
            let trace = arch::simulate(&n, &x).map_err(|e| format!("filter {i} {a}: {e}"))?;
            let d = trace.first_divergence(&want, n.latency);
            ensure(d.is_none(), || {
                format!("filter {i} {a}: first divergence at n = {}", d.unwrap())
            })?;
            runs += 1;
        }
    }
    Ok(format!(
        "{} filters x 4 architectures, {runs} runs, zero mismatches",
        filters.len()
    ))
}

fn multiplier_accounting(table: &CostTable) -> Outcome {
    let f = common::lowpass64();
    let want = [
        (Architecture::RagHybrid, 16),
        (Architecture::SymmetricPreadd, 32),
        (Architecture::RagPure, 0),
        (Architecture::PulsedParallel, 64),
    ];
    let mut line = Vec::new();
    for (a, n) in want {
        let got = netlist(&f, a, table, 12)?.multipliers();
        ensure(got == n, || format!("{a}: {got} multipliers, expected {n}"))?;
        line.push(format!("{a}={got}"));
    }
    Ok(line.join(" "))
}

fn hdl_closure(table: &CostTable) -> Outcome {
    let mut rng = common::rng(7);
    let cases = [
        (common::lowpass64(), Architecture::RagHybrid),
        (QuantizedFilter::new(vec![1, 2, 1]), Architecture::RagHybrid),
    ];
    for (f, a) in cases {
        let n = netlist(&f, a, table, 12)?;
        let x = common::random_samples(&mut rng, 1000, 12);
        let sim = arch::simulate(&n, &x).map_err(|e| e.to_string())?;
        let art = hdl::emit(&n);
        let hw = hdl::interpret(&art, &x).map_err(|e| e.to_string())?;
        let d = (0..x.len()).find(|&c| sim.outputs[c] != hw.outputs[c]);
        ensure(d.is_none(), || format!("{}-tap {a}: cycle {}", f.len(), d.unwrap()))?;
    }
    Ok("64-tap hybrid and [1,2,1] hybrid, 1000 cycles each".into())
}

fn properties(table: &CostTable) -> Outcome {
    let mut rng = common::rng(8);
    let mut sets = 0;
    for _ in 0..40 {
        let k = rng.gen_range(1..=12);
        let targets: BTreeSet<u64> = (0..k).map(|_| rng.gen_range(1..=8191)).collect();
        let g = synthesize(&targets, table);
        // node positivity at x = 1
        let vals = g.node_values(1);
        ensure(vals.iter().all(|&v| v > 0), || {
            format!("{targets:?}: non-positive node")
        })?;
        // linearity
        for _ in 0..20 {
            let a = rng.gen_range(-2048i128..=2047);
            let b = rng.gen_range(-2048i128..=2047);
            let (ea, eb, es) = (g.evaluate(a), g.evaluate(b), g.evaluate(a + b));
            for (m, v) in &es {
                ensure(*v == ea[m] + eb[m], || format!("{targets:?}: not additive at {m}"))?;
                ensure(*v == *m as i128 * (a + b), || {
                    format!("{targets:?}: wrong product at {m}")
                })?;
            }
        }
        // CSD budget
        let budget: u32 = targets.iter().map(|&t| csd::adder_cost(t)).sum();
        ensure(g.adder_count() as u32 <= budget, || {
            format!("{targets:?}: {} adders over CSD budget {budget}", g.adder_count())
        })?;
        // determinism
        let again = synthesize(&targets, table);
        ensure(g.to_string() == again.to_string(), || {
            format!("{targets:?}: serializations differ")
        })?;
        sets += 1;
    }
    Ok(format!(
        "linearity, positivity, CSD budget, determinism on {sets} random target sets"
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let table = CostTable::build(DEFAULT_BOUND, DEFAULT_EXACT_LEVEL).expect("default table");
    let results: Vec<(u8, &str, Outcome)> = vec![
        (1, "partition regression", partition_regression()),
        (2, "cost regression", cost_regression(&table)),
        (3, "cost table oracle", cost_oracle()),
        (4, "adder budget", adder_budget(&table)),
        (5, "bit-exact filter equivalence", bit_exact(&table)),
        (6, "multiplier accounting", multiplier_accounting(&table)),
        (7, "HDL closure", hdl_closure(&table)),
        (8, "property suites", properties(&table)),
    ];
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    }
    let p = preprocess(&common::lowpass64());
    let depth = synthesize(&p.coeff_r.iter().copied().collect(), &table)
        .metrics()
        .max_depth;
    println!(
        "SKIP 9 excluded: FPGA resource, power and temperature figures; adder depth reported only (64-tap small set: {depth})"
    );
    println!(
        "{} passed, {failed} failed in {:.1?}",
        results.len() - failed,
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
