// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::time::{Duration, Instant};

use common::*;
use rtlock::analyze::{analyze, uniquify, ElementKind, ElementsReport, Payload};
use rtlock::backend::keyfile::{key_text, manifest_text, parse_key};
use rtlock::backend::{emit, DEFAULT_KEY_PORT};
use rtlock::frontend::parse;
use rtlock::harness::{self, key_effect, Mode};
use rtlock::lock::{candidates, Budget, ObfuscationConfig, TechniqueSet};

const SEED: u64 = 11;
const STIMULUS_SEED: u64 = 2024;

type Criterion = (u8, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(t: Instant, budget: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < budget, format!("{:.1} s of {} s", e.as_secs_f64(), budget.as_secs()))
}

fn correct_key_equivalence() -> Outcome {
    let t = Instant::now();
    let corpus = corpus();
    let sequential = corpus.iter().filter(|f| f.sim().is_sequential()).count();
    let mut checks = 0;
    let mut failures = Vec::new();
    for f in &corpus {
        let mode = Mode::auto(&f.sim(), STIMULUS_SEED);
        for (tname, tech) in TECHNIQUES {
            for pct in [25, 100] {
                let l = lock(&f.design, tech, Budget::Percent(pct), SEED);
                let res = harness::check_correctness(&f.design, &l.wired, l.key(), DEFAULT_KEY_PORT, mode);
                checks += 1;
                match res {
                    Ok(c) if c.pass => {}
                    Ok(c) => failures.push(format!("{} {tname}-{pct}: {:?}", f.name, c.counterexample)),
                    Err(e) => failures.push(format!("{} {tname}-{pct}: {e}", f.name)),
                }
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(60));
    let pass = failures.is_empty() && corpus.len() >= 10 && sequential >= 3 && fast;
    outcome(
        pass,
        format!(
            "{} fixtures ({sequential} sequential), {checks} locked variants, {} mismatching, {time}{}",
            corpus.len(),
            failures.len(),
            failures.first().map(|s| format!("; first: {s}")).unwrap_or_default()
        ),
    )
}

fn key_effect_no_collisions() -> Outcome {
    let t = Instant::now();
    let mut checked = Vec::new();
    let mut bits = 0;
    let mut failures = Vec::new();
    for f in corpus() {
        let sim = f.sim();
        let l = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), SEED);
        let r = l.key().len();
        if r == 0 || r > 64 || sim.input_bits() > harness::AUTO_EXHAUSTIVE_BITS {
            continue;
        }
        let mode = Mode::exhaustive(&sim);
        match key_effect(&f.design, &l.wired, l.key(), DEFAULT_KEY_PORT, mode) {
            Ok(rep) => {
                bits += rep.r;
                checked.push(format!("{}:F={:.3}", f.name, rep.f.unwrap_or(0.0)));
            }
            Err(e) => failures.push(format!("{}: {e}", f.name)),
        }
    }
    let (fast, time) = within(t, Duration::from_secs(120));
    outcome(
        failures.is_empty() && fast,
        format!(
            "{} fixtures, {bits} flipped bits, {} with collisions, {time}; {}{}",
            checked.len() + failures.len(),
            failures.len(),
            checked.join(" "),
            failures.iter().map(|s| format!("; {s}")).collect::<String>()
        ),
    )
}

fn injectivity() -> Outcome {
    let t = Instant::now();
    let mut covered = BTreeSet::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for f in corpus() {
        let sim = f.sim();
        if sim.is_sequential() || sim.input_bits() > harness::INJECTIVITY_INPUT_CAP {
            continue;
        }
        for (tname, tech) in TECHNIQUES {
            let l = lock(&f.design, tech, Budget::Percent(100), SEED);
            let r = l.key().len();
            if r == 0 || r > 10 {
                continue;
            }
            let res = harness::truth_table_injectivity(&l.wired, DEFAULT_KEY_PORT, 10, harness::INJECTIVITY_INPUT_CAP)
                .expect("within caps");
            covered.insert(f.name.clone());
            runs.push(format!("{}/{tname}(r={r})", f.name));
            if !res.pass {
                let (a, b) = res.collision.expect("collision");
                failures.push(format!("{}/{tname}: keys {a:#x} and {b:#x} unlock the same function", f.name));
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(120));
    outcome(
        failures.is_empty() && covered.len() >= 5 && fast,
        format!(
            "{} fixtures, {} of {} locked variants injective, {} fixtures injective under every technique set, {time}{}",
            covered.len(),
            runs.len() - failures.len(),
            runs.len(),
            covered.iter().filter(|n| !failures.iter().any(|f| f.starts_with(&format!("{n}/")))).count(),
            failures.iter().map(|s| format!("; {s}")).collect::<String>()
        ),
    )
}

fn bit_accounting() -> Outcome {
    let mut failures = Vec::new();
    let mut total = 0;
    for f in corpus() {
        let l = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), SEED);
        let mut const_bits = 0u64;
        let (mut ops, mut branches) = (0u64, 0u64);
        for (el, _) in &l.locked.locked {
            match &el.payload {
                Payload::Constant { width, .. } => const_bits += *width as u64,
                Payload::Operation { .. } => ops += 1,
                Payload::Branch { .. } => branches += 1,
            }
        }
        let expected = const_bits + ops + branches;
        let width = l.key().len() as u64;
        let manifest: u64 = l.locked.key.manifest.iter().map(|e| e.width as u64).sum();
        let u = uniquify(&f.design);
        let report = ElementsReport::new(&u, &analyze(&u).expect("analysis"));
        let skipped = l.locked.warnings.len() as u64;
        total += width;
        if width != expected || manifest != width || report.total_bits - skipped != width {
            failures.push(format!(
                "{}: key {width}, const {const_bits} + ops {ops} + branches {branches}, dry run {} - {skipped}",
                f.name, report.total_bits
            ));
        }
    }
    outcome(failures.is_empty(), format!("{total} key bits across corpus; {}", failures.join("; ")))
}

fn budget_law() -> Outcome {
    let f = fixture("mixed20");
    let u = uniquify(&f.design);
    let cands = candidates(&u, true).expect("candidates");
    let full = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), SEED);
    let total: u64 = cands.iter().map(|c| c.bit_req() as u64).sum();
    let mut failures = Vec::new();
    if cands.len() != 20 || !full.locked.warnings.is_empty() {
        failures.push(format!("{} candidates, {} warnings", cands.len(), full.locked.warnings.len()));
    }
    for k in 0..=total {
        let l = lock(&f.design, TechniqueSet::ALL, Budget::MaxBits(k), SEED);
        let mut used = 0;
        let mut expect = Vec::new();
        for c in &cands {
            if used + c.bit_req() as u64 <= k {
                used += c.bit_req() as u64;
                expect.push(c.id.clone());
            }
        }
        let got: Vec<String> = l.locked.locked.iter().map(|(e, _)| e.id.clone()).collect();
        if l.key().len() as u64 > k || got != expect {
            failures.push(format!("k={k}: width {} locked {got:?} expected {expect:?}", l.key().len()));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "mixed20, {} elements, budgets 0..={total}; {}",
            cands.len(),
            failures.first().cloned().unwrap_or_default()
        ),
    )
}

fn collision_guards() -> Outcome {
    let plus7 = parse("module g(input [7:0] a, output [7:0] y); assign y = a + 8'd7; endmodule").unwrap();
    let plus1 = parse("module g(input [7:0] a, output [7:0] y); assign y = a + 1; endmodule").unwrap();
    let op = only(ElementKind::Operation);
    let dummy = |d: &rtlock::frontend::ast::SourceUnit, seed| {
        lock(d, op, Budget::Percent(100), seed).locked.key.manifest[0].dummy.clone().expect("operation entry")
    };
    let (mut minus, mut times) = (0, 0);
    for seed in 0..1000 {
        minus += (dummy(&plus7, seed) == "-") as u32;
        times += (dummy(&plus1, seed) == "*") as u32;
    }
    outcome(minus == 0 && times == 0, format!("1000 seeds: `-` for a+8'd7 {minus} times, `*` for a+1 {times} times"))
}

fn constant_indistinguishability() -> Outcome {
    let a = parse("module t(input [7:0] x, output [7:0] y); assign y = x ^ 8'hA5; endmodule").unwrap();
    let b = parse("module t(input [7:0] x, output [7:0] y); assign y = x ^ 8'h3C; endmodule").unwrap();
    let mut same_text = true;
    let mut keys_differ = true;
    for (_, tech) in TECHNIQUES {
        if !tech.constant {
            continue;
        }
        let la = lock(&a, tech, Budget::Percent(100), SEED);
        let lb = lock(&b, tech, Budget::Percent(100), SEED);
        same_text &= la.text == lb.text;
        keys_differ &= key_text(&la.locked.key) != key_text(&lb.locked.key);
    }
    outcome(same_text && keys_differ, format!("locked text identical: {same_text}; key files differ: {keys_differ}"))
}

fn worked_examples() -> Outcome {
    let dir = fixture_dir().join("worked");
    let read = |n: &str| fs::read_to_string(dir.join(n)).expect("golden file");
    let mut failures = Vec::new();
    for (name, tech, line) in [
        ("const", only(ElementKind::Constant), "assign b = a + key_in[4:0];"),
        ("op", only(ElementKind::Operation), "assign c = (a - b) & {8{key_in[0]}} | (a + b) & {8{~key_in[0]}};"),
        ("branch", only(ElementKind::Branch), "if ((a <= b) ^ key_in[0])"),
    ] {
        let design = parse(&read(&format!("{name}.v"))).unwrap();
        let mut cfg = ObfuscationConfig::new(tech, Budget::Percent(100), 0);
        if dir.join(format!("{name}.input.key")).exists() {
            cfg.input_key = Some(parse_key(&read(&format!("{name}.input.key"))).unwrap());
        }
        let l = lock_cfg(&design, &cfg);
        if l.text != read(&format!("{name}.locked.v")) {
            failures.push(format!("{name}: locked text differs from golden"));
        }
        if !l.text.lines().any(|x| x.trim() == line) {
            failures.push(format!("{name}: missing `{line}`"));
        }
        if key_text(&l.locked.key) != read(&format!("{name}.key"))
            || manifest_text(&l.locked.key) != read(&format!("{name}.manifest.jsonl"))
        {
            failures.push(format!("{name}: key or manifest differs from golden"));
        }
    }
    let const_key = parse_key(&read("const.key")).unwrap();
    if const_key != [false, true, false, true, false] {
        failures.push("constant key is not 01010".into());
    }
    outcome(failures.is_empty(), format!("3 examples against goldens; {}", failures.join("; ")))
}

fn reset_safety() -> Outcome {
    let f = fixture("dff_ar");
    let l = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), SEED);
    let r = l.key().len();
    let sim = rtlock::sim::Simulator::new(&l.wired, DEFAULT_KEY_PORT).unwrap();
    let mut bad = Vec::new();
    for k in 0..1u64 << r {
        let key: Vec<bool> = (0..r).map(|i| (k >> i) & 1 == 1).collect();
        let mut s = sim.session();
        s.set_key(&key).unwrap();
        s.reset_sequence().unwrap();
        s.settle().unwrap();
        let after_reset = s.peek("q").unwrap();
        for d in [0xF, 0x6, 0x3] {
            s.apply(&[1, d]).unwrap();
            s.settle().unwrap();
            s.clock().unwrap();
        }
        s.set_reset(true);
        s.settle().unwrap();
        s.clock().unwrap();
        s.settle().unwrap();
        if after_reset != 0 || s.peek("q") != Some(0) || s.outputs() != [0] {
            bad.push(k);
        }
    }
    outcome(
        r <= 8 && bad.is_empty(),
        format!("dff_ar r={r}, {} keys, {} leave reset state nonzero", 1u64 << r, bad.len()),
    )
}

fn round_trip_and_determinism() -> Outcome {
    let mut failures = Vec::new();
    let mut texts = 0;
    for f in corpus() {
        let mut sources = vec![f.text.clone()];
        for (tname, tech) in TECHNIQUES {
            for pct in [25, 100] {
                let a = lock(&f.design, tech, Budget::Percent(pct), SEED);
                let b = lock(&f.design, tech, Budget::Percent(pct), SEED);
                if a.text != b.text
                    || key_text(&a.locked.key) != key_text(&b.locked.key)
                    || manifest_text(&a.locked.key) != manifest_text(&b.locked.key)
                {
                    failures.push(format!("{} {tname}-{pct}: nondeterministic", f.name));
                }
                sources.push(a.text);
            }
        }
        for src in sources {
            texts += 1;
            let d1 = parse(&src).expect("parses");
            let e1 = emit(&d1);
            let d2 = parse(&e1).expect("emitted text parses");
            if d2 != d1 || emit(&d2) != e1 {
                failures.push(format!("{}: parse/emit is not a fixpoint", f.name));
            }
        }
    }
    let unique: HashSet<_> = failures.iter().collect();
    outcome(
        failures.is_empty(),
        format!("{texts} sources round-tripped, locking repeated twice per config; {unique:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "correct-key equivalence", correct_key_equivalence),
        (2, "key effect, zero collisions", key_effect_no_collisions),
        (3, "truth-table injectivity", injectivity),
        (4, "bit accounting", bit_accounting),
        (5, "budget law", budget_law),
        (6, "collision guards", collision_guards),
        (7, "constant indistinguishability", constant_indistinguishability),
        (8, "worked-example fidelity", worked_examples),
        (9, "reset-blacklist safety", reset_safety),
        (10, "round-trip and determinism", round_trip_and_determinism),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        failed += !o.pass as u32;
        println!(
            "criterion {n:>2} [{}] {name} ({:.1} s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
