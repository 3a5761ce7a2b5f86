// SPDX-License-Identifier: Apache-2.0

//! Correctness, key-effect and injectivity experiments built on the
//! simulator.
//!
//! A verification point is one output bit in one sampled cycle after reset
//! release. Runs are independent; the parallel path distributes them with
//! rayon and merges results in index order, so both paths report identical
//! numbers.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::frontend::ast::{mask, SourceUnit};
use crate::sim::{SimError, Simulator};

/// Largest enumerable input space, in bits across all cycles.
pub const EXHAUSTIVE_CAP_BITS: u32 = 20;
/// Input bits up to which [`Mode::auto`] picks exhaustive checking.
pub const AUTO_EXHAUSTIVE_BITS: u32 = 16;
pub const DEFAULT_VECTORS: usize = 1024;
pub const DEFAULT_CYCLES: usize = 16;
pub const INJECTIVITY_KEY_CAP: u32 = 12;
pub const INJECTIVITY_INPUT_CAP: u32 = 16;

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("{what} needs {bits} bits, cap is {cap}")]
    CapExceeded { what: String, bits: u32, cap: u32 },
    #[error("design is sequential")]
    NotCombinational,
    #[error("key bits with no failing point: {bits:?}")]
    KeyEffectViolation { bits: Vec<usize>, report: Box<VerificationReport> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every input sequence of `cycles` cycles.
    Exhaustive { cycles: usize },
    /// `vectors` random sequences of `cycles` cycles.
    Random { vectors: usize, cycles: usize, seed: u64 },
}

impl Mode {
    /// Exhaustive over one cycle for combinational designs; for sequential
    /// ones the longest sequence keeping the space within
    /// [`AUTO_EXHAUSTIVE_BITS`], at most 8 cycles.
    pub fn exhaustive(sim: &Simulator) -> Mode {
        let bits = sim.input_bits() as usize;
        let cycles = match (sim.is_sequential(), bits) {
            (false, _) => 1,
            (true, 0) => 8,
            (true, b) => (AUTO_EXHAUSTIVE_BITS as usize / b).clamp(1, 8),
        };
        Mode::Exhaustive { cycles }
    }

    pub fn random(seed: u64) -> Mode {
        Mode::Random { vectors: DEFAULT_VECTORS, cycles: DEFAULT_CYCLES, seed }
    }

    /// Exhaustive when the design has at most [`AUTO_EXHAUSTIVE_BITS`] input
    /// bits, random otherwise.
    pub fn auto(sim: &Simulator, seed: u64) -> Mode {
        if sim.input_bits() <= AUTO_EXHAUSTIVE_BITS {
            Mode::exhaustive(sim)
        } else {
            Mode::random(seed)
        }
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self, Mode::Exhaustive { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Mode::Exhaustive { cycles } => format!("exhaustive(cycles={cycles})"),
            Mode::Random { vectors, cycles, seed } => format!("random(vectors={vectors},cycles={cycles},seed={seed})"),
        }
    }
}

/// How independent runs are distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Exec::Parallel;
        #[cfg(not(feature = "parallel"))]
        Exec::Sequential
    }
}

fn map_range<T: Send>(exec: Exec, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

fn chunk(stim: &[Sequence], c: usize) -> &[Sequence] {
    &stim[c * CHUNK..((c + 1) * CHUNK).min(stim.len())]
}

/// Per-cycle data input values.
pub type Sequence = Vec<Vec<u128>>;

/// The fixed stimulus set for `mode`.
pub fn stimulus(sim: &Simulator, mode: Mode) -> Result<Vec<Sequence>, HarnessError> {
    let widths: Vec<u32> = sim.inputs().iter().map(|p| p.width).collect();
    match mode {
        Mode::Exhaustive { cycles } => {
            let bits = sim.input_bits() as u64 * cycles as u64;
            if bits > EXHAUSTIVE_CAP_BITS as u64 {
                return Err(HarnessError::CapExceeded {
                    what: "exhaustive stimulus".into(),
                    bits: bits.min(u32::MAX as u64) as u32,
                    cap: EXHAUSTIVE_CAP_BITS,
                });
            }
            // The last cycle varies fastest so neighbours share long prefixes.
            Ok((0..1u64 << bits)
                .map(|mut k| {
                    let mut seq: Sequence = (0..cycles)
                        .map(|_| {
                            widths
                                .iter()
                                .map(|&w| {
                                    let v = (k as u128) & mask(w);
                                    k = k.checked_shr(w).unwrap_or(0);
                                    v
                                })
                                .collect()
                        })
                        .collect();
                    seq.reverse();
                    seq
                })
                .collect())
        }
        Mode::Random { vectors, cycles, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..vectors)
                .map(|_| {
                    (0..cycles).map(|_| widths.iter().map(|&w| rng.random::<u128>() & mask(w)).collect()).collect()
                })
                .collect())
        }
    }
}

type Shape = Vec<(String, u32)>;

/// Original and locked design elaborated with matching interfaces.
pub struct Pair {
    pub orig: Simulator,
    pub locked: Simulator,
}

impl Pair {
    pub fn new(orig: &SourceUnit, locked: &SourceUnit, key_port: &str) -> Result<Pair, HarnessError> {
        let o = Simulator::new(orig, key_port)?;
        let l = Simulator::new(locked, key_port)?;
        let sig = |s: &Simulator| -> (Shape, Shape) {
            (
                s.inputs().iter().map(|p| (p.name.clone(), p.width)).collect(),
                s.outputs().iter().map(|p| (p.name.clone(), p.width)).collect(),
            )
        };
        let (oi, oo) = sig(&o);
        let (li, lo) = sig(&l);
        if oi != li {
            return Err(HarnessError::InterfaceMismatch(format!("inputs {oi:?} vs {li:?}")));
        }
        if oo != lo {
            return Err(HarnessError::InterfaceMismatch(format!("outputs {oo:?} vs {lo:?}")));
        }
        if o.key_width() != 0 {
            return Err(HarnessError::InterfaceMismatch("original design has a key port".into()));
        }
        Ok(Pair { orig: o, locked: l })
    }

    fn reference(&self, stim: &[Sequence], exec: Exec) -> Result<Vec<Vec<Vec<u128>>>, SimError> {
        let chunks = map_range(exec, stim.len().div_ceil(CHUNK), |c| {
            self.orig.run_batch(&mut self.orig.session(), &[], chunk(stim, c))
        });
        Ok(chunks.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect())
    }

    /// Verification points per sequence.
    fn points_per_sequence(&self, cycles: usize) -> u64 {
        self.orig.output_bits() as u64 * cycles as u64
    }
}

fn mismatches(a: &[Vec<u128>], b: &[Vec<u128>]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p ^ q).count_ones() as u64).sum::<u64>()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Input values per cycle, by port name.
    pub stimulus: Vec<Vec<(String, u128)>>,
    pub cycle: usize,
    pub output: String,
    pub bit: u32,
    pub expected: u128,
    pub actual: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Correctness {
    pub pass: bool,
    pub mode: String,
    pub points: u64,
    pub counterexample: Option<Counterexample>,
}

/// Compare `locked` under `key` with `orig` on every point of the stimulus
/// set; report the first mismatch in stimulus order.
pub fn check_correctness(
    orig: &SourceUnit,
    locked: &SourceUnit,
    key: &[bool],
    key_port: &str,
    mode: Mode,
) -> Result<Correctness, HarnessError> {
    check_correctness_with(&Pair::new(orig, locked, key_port)?, key, mode, Exec::default())
}

pub fn check_correctness_with(pair: &Pair, key: &[bool], mode: Mode, exec: Exec) -> Result<Correctness, HarnessError> {
    let stim = stimulus(&pair.orig, mode)?;
    let nchunks = stim.len().div_ceil(CHUNK);
    let per_chunk = map_range(exec, nchunks, |c| -> Result<Option<(usize, usize, usize)>, SimError> {
        let a = pair.orig.run_batch(&mut pair.orig.session(), &[], chunk(&stim, c))?;
        let b = pair.locked.run_batch(&mut pair.locked.session(), key, chunk(&stim, c))?;
        for (j, (ta, tb)) in a.iter().zip(&b).enumerate() {
            for (t, (x, y)) in ta.iter().zip(tb).enumerate() {
                if let Some(o) = (0..x.len()).find(|&o| x[o] != y[o]) {
                    return Ok(Some((c * CHUNK + j, t, o)));
                }
            }
        }
        Ok(None)
    });
    let cycles = stim.first().map_or(0, |s| s.len());
    let points = pair.points_per_sequence(cycles) * stim.len() as u64;
    let mut first = None;
    for r in per_chunk {
        if let Some(hit) = r? {
            first = Some(hit);
            break;
        }
    }
    let counterexample = match first {
        None => None,
        Some((i, t, o)) => {
            let a = pair.orig.run(&[], &stim[i])?;
            let b = pair.locked.run(key, &stim[i])?;
            let names: Vec<String> = pair.orig.inputs().iter().map(|p| p.name.clone()).collect();
            let port = &pair.orig.outputs()[o];
            Some(Counterexample {
                stimulus: stim[i][..=t]
                    .iter()
                    .map(|vals| names.iter().cloned().zip(vals.iter().copied()).collect())
                    .collect(),
                cycle: t,
                output: port.name.clone(),
                bit: (a[t][o] ^ b[t][o]).trailing_zeros(),
                expected: a[t][o],
                actual: b[t][o],
            })
        }
    };
    Ok(Correctness { pass: counterexample.is_none(), mode: mode.label(), points, counterexample })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitEffect {
    pub bit: usize,
    pub failing: u64,
    pub total: u64,
}

/// Single-bit flip results; `F` is `None` for a design without key bits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub design: String,
    pub r: usize,
    pub mode: String,
    pub per_bit: Vec<BitEffect>,
    #[serde(rename = "F")]
    pub f: Option<f64>,
}

impl VerificationReport {
    /// Bits whose flip changed no verification point.
    pub fn violations(&self) -> Vec<usize> {
        self.per_bit.iter().filter(|b| b.failing == 0).map(|b| b.bit).collect()
    }

    pub fn f_text(&self) -> String {
        self.f.map_or_else(|| "no key".to_string(), |f| format!("{f:.6}"))
    }
}

/// Flip each key bit in turn and count mismatching points against the
/// original. Under exhaustive mode a bit without any failing point is a
/// [`HarnessError::KeyEffectViolation`].
pub fn key_effect(
    orig: &SourceUnit,
    locked: &SourceUnit,
    key: &[bool],
    key_port: &str,
    mode: Mode,
) -> Result<VerificationReport, HarnessError> {
    let pair = Pair::new(orig, locked, key_port)?;
    let report = key_effect_with(&pair, &orig.top_name, key, mode, Exec::default())?;
    let bad = report.violations();
    if mode.is_exhaustive() && !bad.is_empty() {
        return Err(HarnessError::KeyEffectViolation { bits: bad, report: Box::new(report) });
    }
    Ok(report)
}

/// The flip experiment without the violation check.
pub fn key_effect_with(
    pair: &Pair,
    design: &str,
    key: &[bool],
    mode: Mode,
    exec: Exec,
) -> Result<VerificationReport, HarnessError> {
    let r = key.len();
    if pair.locked.key_width() != r {
        return Err(SimError::KeyWidth { expected: pair.locked.key_width(), got: r }.into());
    }
    let stim = stimulus(&pair.orig, mode)?;
    let reference = pair.reference(&stim, exec)?;
    let cycles = stim.first().map_or(0, |s| s.len());
    let total = pair.points_per_sequence(cycles) * stim.len() as u64;
    let nchunks = stim.len().div_ceil(CHUNK);
    let counts = map_range(exec, r * nchunks, |task| -> Result<u64, SimError> {
        let (bit, c) = (task / nchunks, task % nchunks);
        let mut flipped = key.to_vec();
        flipped[bit] = !flipped[bit];
        let traces = pair.locked.run_batch(&mut pair.locked.session(), &flipped, chunk(&stim, c))?;
        Ok(traces.iter().enumerate().map(|(j, t)| mismatches(&reference[c * CHUNK + j], t)).sum())
    });
    let mut per_bit: Vec<BitEffect> = (0..r).map(|bit| BitEffect { bit, failing: 0, total }).collect();
    for (task, n) in counts.into_iter().enumerate() {
        per_bit[task / nchunks].failing += n?;
    }
    let f = (r > 0).then(|| {
        per_bit.iter().map(|b| if b.total == 0 { 0.0 } else { b.failing as f64 / b.total as f64 }).sum::<f64>()
            / r as f64
    });
    Ok(VerificationReport { design: design.to_string(), r, mode: mode.label(), per_bit, f })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Injectivity {
    pub pass: bool,
    pub tables: u64,
    /// Two keys with identical truth tables, if any.
    pub collision: Option<(u64, u64)>,
}

/// Tabulate the unlocked function for each of the `2^r` keys over all
/// inputs and check the tables are pairwise distinct.
pub fn truth_table_injectivity(
    locked: &SourceUnit,
    key_port: &str,
    r_cap: u32,
    in_cap: u32,
) -> Result<Injectivity, HarnessError> {
    let sim = Simulator::new(locked, key_port)?;
    truth_table_injectivity_with(&sim, r_cap, in_cap, Exec::default())
}

pub fn truth_table_injectivity_with(
    sim: &Simulator,
    r_cap: u32,
    in_cap: u32,
    exec: Exec,
) -> Result<Injectivity, HarnessError> {
    if sim.is_sequential() {
        return Err(HarnessError::NotCombinational);
    }
    let r = sim.key_width() as u32;
    if r > r_cap {
        return Err(HarnessError::CapExceeded { what: "key space".into(), bits: r, cap: r_cap });
    }
    let ib = sim.input_bits();
    if ib > in_cap {
        return Err(HarnessError::CapExceeded { what: "input space".into(), bits: ib, cap: in_cap });
    }
    let stim = stimulus(sim, Mode::Exhaustive { cycles: 1 })?;
    let key_bits = |k: u64| -> Vec<bool> { (0..r).map(|i| (k >> i) & 1 == 1).collect() };
    let table = |k: u64| -> Result<Vec<Vec<u128>>, SimError> {
        let traces = sim.run_batch(&mut sim.session(), &key_bits(k), &stim)?;
        Ok(traces.into_iter().map(|mut t| t.remove(0)).collect())
    };
    let n = 1u64 << r;
    let digests = map_range(exec, n as usize, |k| {
        table(k as u64).map(|t| {
            let mut h = DefaultHasher::new();
            t.hash(&mut h);
            h.finish()
        })
    });
    let mut seen: HashMap<u64, Vec<u64>> = HashMap::new();
    for (k, d) in digests.into_iter().enumerate() {
        seen.entry(d?).or_default().push(k as u64);
    }
    let mut buckets: Vec<Vec<u64>> = seen.into_values().filter(|ks| ks.len() > 1).collect();
    buckets.sort();
    for ks in buckets {
        let tables = ks.iter().map(|&k| table(k)).collect::<Result<Vec<_>, _>>()?;
        for i in 0..ks.len() {
            for j in i + 1..ks.len() {
                if tables[i] == tables[j] {
                    return Ok(Injectivity { pass: false, tables: n, collision: Some((ks[i], ks[j])) });
                }
            }
        }
    }
    Ok(Injectivity { pass: true, tables: n, collision: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::insert_key_ports;
    use crate::frontend::parse;
    use crate::lock::{obfuscate_design, Budget, ObfuscationConfig, TechniqueSet};

    fn locked(src: &str, t: TechniqueSet) -> (SourceUnit, SourceUnit, Vec<bool>) {
        let su = parse(src).unwrap();
        let l = obfuscate_design(&su, &ObfuscationConfig::new(t, Budget::Percent(100), 1)).unwrap();
        let (wired, _) = insert_key_ports(&l.design, "key_in").unwrap();
        (su, wired, l.key.bits)
    }

    const XOR8: &str = "module t(input [7:0] x, output [7:0] y); assign y = x ^ 8'hA5; endmodule";

    #[test]
    fn xor_toy_key_effect_is_one_eighth() {
        let (o, l, k) = locked(XOR8, TechniqueSet::only(crate::analyze::ElementKind::Constant));
        assert_eq!(k.len(), 8);
        let rep = key_effect(&o, &l, &k, "key_in", Mode::Exhaustive { cycles: 1 }).unwrap();
        assert!(rep.per_bit.iter().all(|b| b.failing == 256 && b.total == 2048));
        assert_eq!(rep.f, Some(0.125));
    }

    #[test]
    fn flipped_key_gives_counterexample() {
        let (o, l, mut k) = locked(XOR8, TechniqueSet::only(crate::analyze::ElementKind::Constant));
        assert!(check_correctness(&o, &l, &k, "key_in", Mode::Exhaustive { cycles: 1 }).unwrap().pass);
        k[0] = !k[0];
        let c = check_correctness(&o, &l, &k, "key_in", Mode::Exhaustive { cycles: 1 }).unwrap();
        let cx = c.counterexample.unwrap();
        assert_eq!((cx.cycle, cx.output.as_str(), cx.bit), (0, "y", 0));
        assert_eq!(cx.stimulus, vec![vec![("x".to_string(), 0)]]);
        assert_eq!((cx.expected, cx.actual), (0xA5, 0xA4));
    }

    #[test]
    fn no_key_report() {
        let su = parse("module t(input a, output y); assign y = a; endmodule").unwrap();
        let rep = key_effect(&su, &su, &[], "key_in", Mode::Exhaustive { cycles: 1 }).unwrap();
        assert_eq!((rep.r, rep.f, rep.f_text()), (0, None, "no key".to_string()));
        assert_eq!(
            serde_json::to_string(&rep).unwrap(),
            r#"{"design":"t","r":0,"mode":"exhaustive(cycles=1)","per_bit":[],"F":null}"#
        );
    }

    #[test]
    fn injectivity_of_xor_toy() {
        let (_, l, _) = locked(XOR8, TechniqueSet::only(crate::analyze::ElementKind::Constant));
        let inj = truth_table_injectivity(&l, "key_in", 12, 16).unwrap();
        assert_eq!(inj, Injectivity { pass: true, tables: 256, collision: None });
    }

    #[test]
    fn identical_arms_collide() {
        let l = parse(
            "module t(input [3:0] a, input [3:0] b, input [0:0] key_in, output [3:0] y);
             assign y = (a + b) & {4{key_in[0]}} | (a + b) & {4{~key_in[0]}}; endmodule",
        )
        .unwrap();
        let inj = truth_table_injectivity(&l, "key_in", 12, 16).unwrap();
        assert_eq!(inj.collision, Some((0, 1)));
        assert!(!inj.pass);
    }

    #[test]
    fn caps_are_enforced() {
        let (_, l, _) = locked(XOR8, TechniqueSet::only(crate::analyze::ElementKind::Constant));
        assert!(matches!(truth_table_injectivity(&l, "key_in", 4, 16), Err(HarnessError::CapExceeded { .. })));
        let su = parse("module t(input [20:0] a, output y); assign y = ^a; endmodule").unwrap();
        let s = Simulator::new(&su, "key_in").unwrap();
        assert!(matches!(stimulus(&s, Mode::Exhaustive { cycles: 1 }), Err(HarnessError::CapExceeded { .. })));
        assert!(matches!(Mode::auto(&s, 3), Mode::Random { vectors: 1024, cycles: 16, seed: 3 }));
    }

    #[test]
    fn sequential_exhaustive_enumerates_sequences() {
        let su = parse(
            "module t(input clk, input rst, input [1:0] d, output reg [1:0] q);
             always @(posedge clk or posedge rst) if (rst) q <= 0; else q <= q ^ d; endmodule",
        )
        .unwrap();
        let s = Simulator::new(&su, "key_in").unwrap();
        assert_eq!(Mode::exhaustive(&s), Mode::Exhaustive { cycles: 8 });
        assert_eq!(stimulus(&s, Mode::Exhaustive { cycles: 3 }).unwrap().len(), 64);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let (o, l, k) = locked(
            "module t(input [3:0] a, input [3:0] b, output [3:0] y, output z); assign y = a + b; assign z = a > b; endmodule",
            TechniqueSet::ALL,
        );
        let pair = Pair::new(&o, &l, "key_in").unwrap();
        let m = Mode::Exhaustive { cycles: 1 };
        assert_eq!(
            key_effect_with(&pair, "t", &k, m, Exec::Sequential).unwrap(),
            key_effect_with(&pair, "t", &k, m, Exec::Parallel).unwrap()
        );
    }
}
