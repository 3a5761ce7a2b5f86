// SPDX-License-Identifier: Apache-2.0

//! Cycle-based two-state interpreter.
//!
//! The hierarchy is flattened into one bit vector. Port connections that are
//! plain references share storage; anything else becomes a continuous
//! assignment. Each cycle applies inputs, settles the combinational processes,
//! samples outputs and then fires every edge-triggered block once, committing
//! nonblocking updates together at the end.

mod elab;
pub mod expr;

use std::collections::HashSet;

use thiserror::Error;

use crate::frontend::ast::{mask, SourceUnit};
use elab::{BitSpan, CStmt, Flat, LPiece, LTarget, Label, ProcKind};
use expr::{as_i128, Store};

pub use elab::Port;

/// Iteration cap for procedural `for` loops.
pub const LOOP_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("combinational loop through {}", .0.join(", "))]
    CombinationalLoop(Vec<String>),
    #[error("multiple drivers on `{0}`")]
    DriverConflict(String),
    #[error("key width {got} does not match key port width {expected}")]
    KeyWidth { expected: usize, got: usize },
    #[error("stimulus shape: {0}")]
    Stimulus(String),
    #[error("loop exceeded {LOOP_LIMIT} iterations in {0}")]
    LoopBound(String),
    #[error("unsupported for simulation: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Compile(String),
}

/// Flat bit storage.
#[derive(Debug, Clone)]
struct State {
    words: Vec<u64>,
}

impl State {
    fn get(&self, pos: usize, width: u32) -> u128 {
        let w = pos / 64;
        let s = pos % 64;
        let word = |i: usize| self.words.get(i).copied().unwrap_or(0) as u128;
        let mut v = (word(w) | word(w + 1) << 64) >> s;
        if s > 0 && width as usize + s > 128 {
            v |= word(w + 2) << (128 - s);
        }
        v & mask(width)
    }

    fn set(&mut self, pos: usize, width: u32, value: u128) {
        let mut done = 0u32;
        while done < width {
            let p = pos + done as usize;
            let (wi, s) = (p / 64, (p % 64) as u32);
            let n = (64 - s).min(width - done);
            let m = (mask(n) as u64) << s;
            let chunk = ((value >> done) as u64) & mask(n) as u64;
            self.words[wi] = (self.words[wi] & !m) | (chunk << s);
            done += n;
        }
    }
}

impl Store for State {
    fn read(&self, id: usize, off: u32, width: u32) -> u128 {
        self.get(id * 64 + off as usize, width)
    }
}

/// A group of combinational processes evaluated together, in dependency
/// order. Cyclic groups iterate to a fixpoint.
#[derive(Debug, Clone)]
struct Group {
    procs: Vec<usize>,
    cyclic: bool,
    writes: Vec<BitSpan>,
}

/// An elaborated design ready to run. Immutable and shareable; each run
/// owns a [`Session`].
#[derive(Debug, Clone)]
pub struct Simulator {
    flat: Flat,
    groups: Vec<Group>,
    seq: Vec<usize>,
    /// Stimulus inputs: top inputs other than clocks, resets and the key.
    data_inputs: Vec<usize>,
    key_input: Option<usize>,
    reset: Option<(usize, bool)>,
}

impl Simulator {
    /// Elaborate `design`; `key_port` names the top-level key input if any.
    pub fn new(design: &SourceUnit, key_port: &str) -> Result<Simulator, SimError> {
        let flat = Flat::build(design)?;
        for p in flat.inputs.iter().chain(&flat.outputs) {
            if p.width > 128 && p.name != key_port {
                return Err(SimError::Unsupported(format!("port `{}` wider than 128 bits", p.name)));
            }
        }
        check_drivers(&flat)?;
        let groups = schedule(&flat);
        let seq = (0..flat.processes.len()).filter(|&i| flat.processes[i].kind == ProcKind::Seq).collect();
        let key_input = flat.inputs.iter().position(|p| p.name == key_port);
        let pos_of = |i: usize| BitSpan::of(&flat.inputs[i].sig).lo;
        let reset = flat.resets.iter().find_map(|r| {
            (0..flat.inputs.len())
                .find(|&i| Some(i) != key_input && flat.inputs[i].width == 1 && pos_of(i) == r.pos)
                .map(|i| (i, r.active_high))
        });
        let data_inputs = (0..flat.inputs.len())
            .filter(|&i| {
                let span = BitSpan::of(&flat.inputs[i].sig);
                Some(i) != key_input
                    && reset.map(|r| r.0) != Some(i)
                    && !flat.edge_bits.iter().any(|&b| span.lo <= b && b < span.hi)
            })
            .collect();
        Ok(Simulator { flat, groups, seq, data_inputs, key_input, reset })
    }

    /// Inputs driven by stimulus, in port order.
    pub fn inputs(&self) -> Vec<&Port> {
        self.data_inputs.iter().map(|&i| &self.flat.inputs[i]).collect()
    }

    pub fn outputs(&self) -> &[Port] {
        &self.flat.outputs
    }

    pub fn key_width(&self) -> usize {
        self.key_input.map_or(0, |i| self.flat.inputs[i].width as usize)
    }

    pub fn input_bits(&self) -> u32 {
        self.inputs().iter().map(|p| p.width).sum()
    }

    pub fn output_bits(&self) -> u32 {
        self.flat.outputs.iter().map(|p| p.width).sum()
    }

    pub fn is_sequential(&self) -> bool {
        !self.seq.is_empty()
    }

    /// Name of the detected reset input and whether it is active high.
    pub fn reset(&self) -> Option<(&str, bool)> {
        self.reset.map(|(i, h)| (self.flat.inputs[i].name.as_str(), h))
    }

    pub fn session(&self) -> Session<'_> {
        Session { sim: self, state: State { words: vec![0; self.flat.words] }, pending: Vec::new() }
    }

    /// Output trace per cycle after the reset sequence. `stimulus[t][j]`
    /// drives data input `j` in cycle `t`.
    pub fn run(&self, key: &[bool], stimulus: &[Vec<u128>]) -> Result<Vec<Vec<u128>>, SimError> {
        let mut s = self.session();
        self.run_in(&mut s, key, stimulus)
    }

    /// Like [`Simulator::run`], reusing `session`'s storage.
    pub fn run_in(
        &self,
        s: &mut Session<'_>,
        key: &[bool],
        stimulus: &[Vec<u128>],
    ) -> Result<Vec<Vec<u128>>, SimError> {
        s.clear();
        s.set_key(key)?;
        s.reset_sequence()?;
        let mut trace = Vec::with_capacity(stimulus.len());
        for vec in stimulus {
            s.apply(vec)?;
            s.settle()?;
            trace.push(s.outputs());
            s.clock()?;
        }
        Ok(trace)
    }

    /// Runs every sequence from reset under one key. The state after each
    /// clock is kept, so a sequence sharing a prefix with its predecessor
    /// resumes from there instead of starting over.
    pub fn run_batch(
        &self,
        s: &mut Session<'_>,
        key: &[bool],
        stimuli: &[Vec<Vec<u128>>],
    ) -> Result<Vec<Vec<Vec<u128>>>, SimError> {
        s.clear();
        s.set_key(key)?;
        s.reset_sequence()?;
        let mut states = vec![s.state.clone()];
        let mut out: Vec<Vec<Vec<u128>>> = Vec::with_capacity(stimuli.len());
        for (i, seq) in stimuli.iter().enumerate() {
            let shared = match i.checked_sub(1) {
                Some(p) => stimuli[p].iter().zip(seq).take_while(|(a, b)| a == b).count().min(states.len() - 1),
                None => 0,
            };
            states.truncate(shared + 1);
            s.state.clone_from(&states[shared]);
            let mut trace = out.last().map_or_else(Vec::new, |t| t[..shared].to_vec());
            trace.reserve(seq.len() - shared);
            for (t, vec) in seq.iter().enumerate().skip(shared) {
                s.apply(vec)?;
                s.settle()?;
                trace.push(s.outputs());
                s.clock()?;
                if t + 1 < seq.len() {
                    states.push(s.state.clone());
                }
            }
            out.push(trace);
        }
        Ok(out)
    }
}

/// Mutable simulation state of one run.
pub struct Session<'a> {
    sim: &'a Simulator,
    state: State,
    pending: Vec<(usize, u32, u128)>,
}

impl Session<'_> {
    /// Zero every signal.
    pub fn clear(&mut self) {
        self.state.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn set_key(&mut self, key: &[bool]) -> Result<(), SimError> {
        let expected = self.sim.key_width();
        if key.len() != expected {
            return Err(SimError::KeyWidth { expected, got: key.len() });
        }
        if let Some(i) = self.sim.key_input {
            let pos = BitSpan::of(&self.sim.flat.inputs[i].sig).lo;
            for (b, &v) in key.iter().enumerate() {
                self.state.set(pos + b, 1, v as u128);
            }
        }
        Ok(())
    }

    /// Drive the data inputs.
    pub fn apply(&mut self, values: &[u128]) -> Result<(), SimError> {
        let ins = &self.sim.data_inputs;
        if values.len() != ins.len() {
            return Err(SimError::Stimulus(format!("{} values for {} inputs", values.len(), ins.len())));
        }
        for (&i, &v) in ins.iter().zip(values) {
            let p = &self.sim.flat.inputs[i];
            self.state.set(BitSpan::of(&p.sig).lo, p.width, v & mask(p.width));
        }
        Ok(())
    }

    /// Drive the reset input to its asserted or released level.
    pub fn set_reset(&mut self, asserted: bool) {
        if let Some((i, high)) = self.sim.reset {
            let pos = BitSpan::of(&self.sim.flat.inputs[i].sig).lo;
            self.state.set(pos, 1, (asserted == high) as u128);
        }
    }

    /// Zero data inputs, hold reset asserted for two cycles, release it.
    pub fn reset_sequence(&mut self) -> Result<(), SimError> {
        if !self.sim.is_sequential() {
            return Ok(());
        }
        self.apply(&vec![0; self.sim.data_inputs.len()])?;
        self.set_reset(true);
        for _ in 0..2 {
            self.settle()?;
            self.clock()?;
        }
        self.set_reset(false);
        Ok(())
    }

    pub fn outputs(&self) -> Vec<u128> {
        self.sim.flat.outputs.iter().map(|p| self.state.get(BitSpan::of(&p.sig).lo, p.width)).collect()
    }

    /// Value of a flattened signal by hierarchical name (`u0.q`), up to 128 bits.
    pub fn peek(&self, name: &str) -> Option<u128> {
        let (_, s) = self.sim.flat.signals.iter().find(|(n, _)| n == name)?;
        Some(self.state.get(BitSpan::of(s).lo, s.width.min(128)))
    }

    /// Evaluate combinational processes until stable.
    pub fn settle(&mut self) -> Result<(), SimError> {
        let sim = self.sim;
        for g in &sim.groups {
            if !g.cyclic {
                for &p in &g.procs {
                    self.exec(&sim.flat.processes[p].body, p)?;
                }
                continue;
            }
            let limit = 2 * g.procs.len() + g.writes.iter().map(|w| w.hi - w.lo).sum::<usize>() + 2;
            let mut stable = false;
            for _ in 0..limit {
                let before = self.snapshot(&g.writes);
                for &p in &g.procs {
                    self.exec(&sim.flat.processes[p].body, p)?;
                }
                if self.snapshot(&g.writes) == before {
                    stable = true;
                    break;
                }
            }
            if !stable {
                return Err(SimError::CombinationalLoop(names_over(&sim.flat, &g.writes)));
            }
        }
        Ok(())
    }

    /// Fire every edge-triggered block once and commit nonblocking updates.
    pub fn clock(&mut self) -> Result<(), SimError> {
        let sim = self.sim;
        for &p in &sim.seq {
            self.exec(&sim.flat.processes[p].body, p)?;
        }
        for (pos, w, v) in std::mem::take(&mut self.pending) {
            self.state.set(pos, w, v);
        }
        Ok(())
    }

    fn snapshot(&self, spans: &[BitSpan]) -> Vec<u128> {
        let mut out = Vec::new();
        for s in spans {
            let mut p = s.lo;
            while p < s.hi {
                let w = (s.hi - p).min(128) as u32;
                out.push(self.state.get(p, w));
                p += w as usize;
            }
        }
        out
    }

    fn write(&mut self, t: &LTarget, value: u128, nonblocking: bool) {
        let mut shift = 0u32;
        for piece in t.pieces.iter().rev() {
            let (pos, w) = match piece {
                LPiece::Static { pos, width } => (*pos, *width),
                LPiece::Dyn { pos, sig_width, lsb, index } => {
                    let iv = index.eval(&self.state);
                    let i = if index.signed { as_i128(iv, index.width) } else { iv as i128 };
                    let rel = i - *lsb as i128;
                    if rel < 0 || rel >= *sig_width as i128 {
                        shift += 1;
                        continue;
                    }
                    (pos + rel as usize, 1)
                }
            };
            let v = if shift >= 128 { 0 } else { (value >> shift) & mask(w) };
            if nonblocking {
                self.pending.push((pos, w, v));
            } else {
                self.state.set(pos, w, v);
            }
            shift += w;
        }
    }

    fn exec(&mut self, s: &CStmt, proc_idx: usize) -> Result<(), SimError> {
        match s {
            CStmt::Nop => {}
            CStmt::Block(ss) => {
                for x in ss {
                    self.exec(x, proc_idx)?;
                }
            }
            CStmt::Assign { target, rhs, nonblocking } => {
                let v = rhs.eval(&self.state);
                self.write(target, v, *nonblocking);
            }
            CStmt::If { cond, then_s, else_s } => {
                if cond.eval(&self.state) != 0 {
                    self.exec(then_s, proc_idx)?;
                } else if let Some(e) = else_s {
                    self.exec(e, proc_idx)?;
                }
            }
            CStmt::Case { sel, items, default } => {
                let v = sel.eval(&self.state);
                let hit = items.iter().find(|(labels, _)| {
                    labels.iter().any(|l| match l {
                        Label::Value(e) => e.eval(&self.state) == v,
                        Label::Pattern { value, care } => (v ^ value) & care == 0,
                    })
                });
                match (hit, default) {
                    (Some((_, body)), _) => self.exec(body, proc_idx)?,
                    (None, Some(d)) => self.exec(d, proc_idx)?,
                    (None, None) => {}
                }
            }
            CStmt::For { var, init, cond, step, body } => {
                let v = init.eval(&self.state);
                self.write(var, v, false);
                let mut n = 0;
                while cond.eval(&self.state) != 0 {
                    n += 1;
                    if n > LOOP_LIMIT {
                        return Err(SimError::LoopBound(self.sim.flat.processes[proc_idx].origin.clone()));
                    }
                    self.exec(body, proc_idx)?;
                    let v = step.eval(&self.state);
                    self.write(var, v, false);
                }
            }
        }
        Ok(())
    }
}

fn names_over(flat: &Flat, spans: &[BitSpan]) -> Vec<String> {
    let mut names: Vec<String> = flat
        .signals
        .iter()
        .filter(|(_, s)| spans.iter().any(|w| w.overlaps(&BitSpan::of(s))))
        .map(|(n, _)| n.clone())
        .collect();
    names.sort();
    names.dedup();
    names
}

fn effective(spans: &[BitSpan], locals: &[BitSpan]) -> Vec<BitSpan> {
    spans.iter().copied().filter(|s| !locals.contains(s)).collect()
}

fn check_drivers(flat: &Flat) -> Result<(), SimError> {
    let writes: Vec<Vec<BitSpan>> = flat.processes.iter().map(|p| effective(&p.writes, &p.locals)).collect();
    for i in 0..writes.len() {
        for j in i + 1..writes.len() {
            for a in &writes[i] {
                if let Some(b) = writes[j].iter().find(|b| a.overlaps(b)) {
                    let lo = a.lo.max(b.lo);
                    let name = names_over(flat, &[BitSpan { lo, hi: lo + 1 }]).into_iter().next().unwrap_or_default();
                    return Err(SimError::DriverConflict(name));
                }
            }
        }
    }
    Ok(())
}

/// Order combinational processes by data dependency; strongly connected
/// components become cyclic groups.
fn schedule(flat: &Flat) -> Vec<Group> {
    let comb: Vec<usize> = (0..flat.processes.len()).filter(|&i| flat.processes[i].kind == ProcKind::Comb).collect();
    let n = comb.len();
    let reads: Vec<Vec<BitSpan>> =
        comb.iter().map(|&p| effective(&flat.processes[p].reads, &flat.processes[p].locals)).collect();
    let writes: Vec<Vec<BitSpan>> =
        comb.iter().map(|&p| effective(&flat.processes[p].writes, &flat.processes[p].locals)).collect();
    let feeds = |a: usize, b: usize| writes[a].iter().any(|w| reads[b].iter().any(|r| w.overlaps(r)));
    let succ: Vec<Vec<usize>> = (0..n).map(|a| (0..n).filter(|&b| b != a && feeds(a, b)).collect()).collect();

    // Tarjan's algorithm yields components in reverse topological order.
    struct T<'a> {
        succ: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(t: &mut T<'_>, v: usize) {
        t.index[v] = Some(t.next);
        t.low[v] = t.next;
        t.next += 1;
        t.stack.push(v);
        t.on[v] = true;
        for &w in &t.succ[v] {
            match t.index[w] {
                None => {
                    visit(t, w);
                    t.low[v] = t.low[v].min(t.low[w]);
                }
                Some(iw) if t.on[w] => t.low[v] = t.low[v].min(iw),
                _ => {}
            }
        }
        if Some(t.low[v]) == t.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = t.stack.pop().expect("stack");
                t.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort();
            t.out.push(comp);
        }
    }
    let mut t = T {
        succ: &succ,
        index: vec![None; n],
        low: vec![0; n],
        on: vec![false; n],
        stack: vec![],
        next: 0,
        out: vec![],
    };
    for v in 0..n {
        if t.index[v].is_none() {
            visit(&mut t, v);
        }
    }
    let mut comps = t.out;
    comps.reverse();
    comps
        .into_iter()
        .map(|c| {
            let self_loop = c.len() == 1 && flat.processes[comb[c[0]]].continuous && feeds(c[0], c[0]);
            let cyclic = c.len() > 1 || self_loop;
            let ws: HashSet<(usize, usize)> = c.iter().flat_map(|&i| writes[i].iter().map(|s| (s.lo, s.hi))).collect();
            let mut ws: Vec<BitSpan> = ws.into_iter().map(|(lo, hi)| BitSpan { lo, hi }).collect();
            ws.sort_by_key(|s| (s.lo, s.hi));
            Group { procs: c.into_iter().map(|i| comb[i]).collect(), cyclic, writes: ws }
        })
        .collect()
}

/// Simulate `design` for `stimulus.len()` cycles after reset. `key` must
/// match the width of the top-level `key_port` (empty when absent).
pub fn simulate(
    design: &SourceUnit,
    key: &[bool],
    key_port: &str,
    stimulus: &[Vec<u128>],
) -> Result<Vec<Vec<u128>>, SimError> {
    Simulator::new(design, key_port)?.run(key, stimulus)
}

#[cfg(test)]
mod tests;
