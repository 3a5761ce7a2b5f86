// SPDX-License-Identifier: Apache-2.0

//! Hierarchy flattening and statement compilation.

use std::collections::HashMap;

use super::expr::{compile, compile_assign_rhs, compile_self, self_size, CExpr, CompileError, Scope, SigRef};
use super::SimError;
use crate::analyze::blacklist::{reset_branch, reset_test};
use crate::frontend::ast::*;

/// Absolute bit interval `[lo, hi)` in the flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitSpan {
    pub lo: usize,
    pub hi: usize,
}

impl BitSpan {
    pub fn of(s: &SigRef) -> BitSpan {
        let lo = s.id * 64 + s.base as usize;
        BitSpan { lo, hi: lo + s.width as usize }
    }

    pub fn overlaps(&self, o: &BitSpan) -> bool {
        self.lo < o.hi && o.lo < self.hi
    }
}

#[derive(Debug, Clone)]
pub enum LPiece {
    Static { pos: usize, width: u32 },
    Dyn { pos: usize, sig_width: u32, lsb: i64, index: CExpr },
}

impl LPiece {
    fn width(&self) -> u32 {
        match self {
            LPiece::Static { width, .. } => *width,
            LPiece::Dyn { .. } => 1,
        }
    }
}

/// Assignment target; pieces are ordered most significant first.
#[derive(Debug, Clone)]
pub struct LTarget {
    pub pieces: Vec<LPiece>,
    pub width: u32,
}

#[derive(Debug, Clone)]
pub enum Label {
    Value(CExpr),
    Pattern { value: u128, care: u128 },
}

#[derive(Debug, Clone)]
pub enum CStmt {
    Block(Vec<CStmt>),
    Assign { target: LTarget, rhs: CExpr, nonblocking: bool },
    If { cond: CExpr, then_s: Box<CStmt>, else_s: Option<Box<CStmt>> },
    Case { sel: CExpr, items: Vec<(Vec<Label>, CStmt)>, default: Option<Box<CStmt>> },
    For { var: LTarget, init: CExpr, cond: CExpr, step: CExpr, body: Box<CStmt> },
    Nop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcKind {
    Comb,
    Seq,
}

#[derive(Debug, Clone)]
pub struct Process {
    pub kind: ProcKind,
    pub body: CStmt,
    pub reads: Vec<BitSpan>,
    pub writes: Vec<BitSpan>,
    /// Loop variables; excluded from dependency and driver analysis.
    pub locals: Vec<BitSpan>,
    /// A continuous assignment cannot read its own result.
    pub continuous: bool,
    pub origin: String,
}

#[derive(Debug, Clone)]
pub struct Port {
    pub name: String,
    pub width: u32,
    pub sig: SigRef,
}

/// Reset input detected from an edge block's top-level `if`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResetInput {
    pub pos: usize,
    pub active_high: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Flat {
    pub words: usize,
    pub signals: Vec<(String, SigRef)>,
    pub processes: Vec<Process>,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    /// Bit positions named in edge events.
    pub edge_bits: Vec<usize>,
    pub resets: Vec<ResetInput>,
}

struct InstScope {
    map: HashMap<String, SigRef>,
}

impl Scope for InstScope {
    fn lookup(&self, name: &str) -> Option<SigRef> {
        self.map.get(name).copied()
    }
}

fn cerr(origin: &str, e: CompileError) -> SimError {
    SimError::Compile(format!("{origin}: {e}"))
}

fn hier(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl Flat {
    fn alloc(&mut self, width: u32, lsb: i64, signed: bool) -> SigRef {
        let id = self.words;
        self.words += (width as usize).div_ceil(64).max(1);
        SigRef { id, base: 0, width, lsb, signed }
    }

    pub fn build(design: &SourceUnit) -> Result<Flat, SimError> {
        let mut flat = Flat::default();
        let top = design.top();
        let mut bound = HashMap::new();
        for p in &top.ports {
            let info = top.signal(&p.name).expect("port declared");
            let sig = flat.alloc(info.width, info.lsb, info.signed);
            let port = Port { name: p.name.clone(), width: info.width, sig };
            match p.dir {
                Direction::Input => flat.inputs.push(port),
                Direction::Output => flat.outputs.push(port),
                Direction::Inout => return Err(SimError::Unsupported(format!("inout port `{}`", p.name))),
            }
            bound.insert(p.name.clone(), sig);
        }
        flat.instantiate(design, top, "", bound)?;
        Ok(flat)
    }

    fn instantiate(
        &mut self,
        design: &SourceUnit,
        m: &ModuleDecl,
        prefix: &str,
        mut bound: HashMap<String, SigRef>,
    ) -> Result<(), SimError> {
        if m.ports.iter().any(|p| p.dir == Direction::Inout) {
            return Err(SimError::Unsupported(format!("inout port in `{}`", m.name)));
        }
        let names = m.ports.iter().map(|p| p.name.as_str()).chain(m.nets.iter().map(|n| n.name.as_str()));
        for name in names {
            let info = m.signal(name).expect("declared");
            let sig = match bound.remove(name) {
                Some(s) => s,
                None => self.alloc(info.width, info.lsb, info.signed),
            };
            self.signals.push((hier(prefix, name), sig));
            bound.insert(name.to_string(), sig);
        }
        let scope = InstScope { map: bound };

        for (k, item) in m.items.iter().enumerate() {
            let origin = format!("{}/i{k}", if prefix.is_empty() { m.name.as_str() } else { prefix });
            match &item.kind {
                ItemKind::Assign { lhs, rhs } => {
                    let target = lvalue(lhs, &scope).map_err(|e| cerr(&origin, e))?;
                    let rhs_c = compile_assign_rhs(rhs, target.width, &scope).map_err(|e| cerr(&origin, e))?;
                    let mut reads = Vec::new();
                    expr_reads(rhs, &scope, &mut reads);
                    lvalue_index_reads(lhs, &scope, &mut reads);
                    let writes = lvalue_writes(lhs, &scope);
                    self.processes.push(Process {
                        kind: ProcKind::Comb,
                        body: CStmt::Assign { target, rhs: rhs_c, nonblocking: false },
                        reads,
                        writes,
                        locals: vec![],
                        continuous: true,
                        origin,
                    });
                }
                ItemKind::Always(a) => {
                    let mut acc = Access::default();
                    let body = stmt(&a.body, &scope, &mut acc).map_err(|e| cerr(&origin, e))?;
                    let kind = match &a.sensitivity {
                        Sensitivity::Star => ProcKind::Comb,
                        Sensitivity::Edges(evs) => {
                            for ev in evs {
                                let s = scope.lookup(&ev.signal).expect("validated");
                                self.edge_bits.push(BitSpan::of(&s).lo);
                            }
                            if let Some((path, _)) = reset_branch(&a.body, evs) {
                                let mut s = &a.body;
                                for &i in &path {
                                    let StmtKind::Block { stmts, .. } = &s.kind else { unreachable!() };
                                    s = &stmts[i as usize];
                                }
                                let StmtKind::If { cond, .. } = &s.kind else { unreachable!() };
                                let (name, negated) = reset_test(cond).expect("reset test");
                                let sig = scope.lookup(name).expect("validated");
                                self.resets.push(ResetInput { pos: BitSpan::of(&sig).lo, active_high: !negated });
                            }
                            ProcKind::Seq
                        }
                    };
                    self.processes.push(Process {
                        kind,
                        body,
                        reads: acc.reads,
                        writes: acc.writes,
                        locals: acc.locals,
                        continuous: false,
                        origin,
                    });
                }
                ItemKind::Instance(inst) => {
                    let child = design.module(&inst.module).expect("validated");
                    let child_prefix = hier(prefix, &inst.name);
                    let mut child_bound = HashMap::new();
                    let mut deferred = Vec::new();
                    for c in &inst.connections {
                        let Some(e) = &c.expr else { continue };
                        let info = child.signal(&c.port).expect("validated");
                        if let Some(parent) = alias(e, &scope) {
                            if parent.width == info.width {
                                child_bound.insert(
                                    c.port.clone(),
                                    SigRef { width: info.width, lsb: info.lsb, signed: info.signed, ..parent },
                                );
                                continue;
                            }
                        }
                        deferred.push((c, info));
                    }
                    for (c, info) in &deferred {
                        let sig = self.alloc(info.width, info.lsb, info.signed);
                        child_bound.insert(c.port.clone(), sig);
                    }
                    let child_sigs = child_bound.clone();
                    self.instantiate(design, child, &child_prefix, child_bound)?;
                    let porigin = format!("{origin}/{}", inst.name);
                    for (c, info) in deferred {
                        let e = c.expr.as_ref().expect("connected");
                        let csig = child_sigs[&c.port];
                        let child_scope = InstScope { map: HashMap::from([(c.port.clone(), csig)]) };
                        let port_ref = Expr::ident(&c.port);
                        let proc = if info.dir == Some(Direction::Input) {
                            let target = LTarget {
                                pieces: vec![LPiece::Static { pos: BitSpan::of(&csig).lo, width: info.width }],
                                width: info.width,
                            };
                            let rhs = compile_assign_rhs(e, info.width, &scope).map_err(|x| cerr(&porigin, x))?;
                            let mut reads = Vec::new();
                            expr_reads(e, &scope, &mut reads);
                            Process {
                                kind: ProcKind::Comb,
                                body: CStmt::Assign { target, rhs, nonblocking: false },
                                reads,
                                writes: vec![BitSpan::of(&csig)],
                                locals: vec![],
                                continuous: true,
                                origin: porigin.clone(),
                            }
                        } else {
                            let target = lvalue(e, &scope).map_err(|x| cerr(&porigin, x))?;
                            let rhs = compile_assign_rhs(&port_ref, target.width, &child_scope)
                                .map_err(|x| cerr(&porigin, x))?;
                            let mut reads = vec![BitSpan::of(&csig)];
                            lvalue_index_reads(e, &scope, &mut reads);
                            Process {
                                kind: ProcKind::Comb,
                                body: CStmt::Assign { target, rhs, nonblocking: false },
                                reads,
                                writes: lvalue_writes(e, &scope),
                                locals: vec![],
                                continuous: true,
                                origin: porigin.clone(),
                            }
                        };
                        self.processes.push(proc);
                    }
                }
            }
        }
        Ok(())
    }
}

/// A reference that can share storage with a port: a whole signal or a
/// constant select.
fn alias(e: &Expr, scope: &InstScope) -> Option<SigRef> {
    let ExprKind::Ref { name, select } = &e.kind else { return None };
    let s = scope.lookup(name)?;
    let (msb, lsb) = match select {
        None => return Some(s),
        Some(Select::Part(m, l)) => (*m, *l),
        Some(Select::Bit(i)) => {
            let l = i.as_literal()?;
            let v = l.value as i64;
            (v, v)
        }
    };
    if lsb < s.lsb || msb >= s.lsb + s.width as i64 || msb < lsb {
        return None;
    }
    Some(SigRef { base: s.base + (lsb - s.lsb) as u32, width: (msb - lsb + 1) as u32, lsb: 0, signed: false, ..s })
}

fn span_of_ref(name: &str, select: &Option<Select>, scope: &InstScope) -> Option<BitSpan> {
    let s = scope.lookup(name)?;
    let whole = BitSpan::of(&s);
    let bounded = |msb: i64, lsb: i64| {
        if lsb < s.lsb || msb >= s.lsb + s.width as i64 {
            None
        } else {
            let lo = whole.lo + (lsb - s.lsb) as usize;
            Some(BitSpan { lo, hi: lo + (msb - lsb + 1) as usize })
        }
    };
    match select {
        None => Some(whole),
        Some(Select::Part(m, l)) => bounded(*m, *l),
        Some(Select::Bit(i)) => match i.as_literal() {
            Some(l) => bounded(l.value as i64, l.value as i64),
            None => Some(whole),
        },
    }
}

fn expr_reads(e: &Expr, scope: &InstScope, out: &mut Vec<BitSpan>) {
    e.walk(&mut |x| {
        if let ExprKind::Ref { name, select } = &x.kind {
            out.extend(span_of_ref(name, select, scope));
        }
    });
}

fn lvalue_index_reads(e: &Expr, scope: &InstScope, out: &mut Vec<BitSpan>) {
    match &e.kind {
        ExprKind::Ref { select: Some(Select::Bit(i)), .. } => expr_reads(i, scope, out),
        ExprKind::Concat(parts) => parts.iter().for_each(|p| lvalue_index_reads(p, scope, out)),
        _ => {}
    }
}

fn lvalue_writes(e: &Expr, scope: &InstScope) -> Vec<BitSpan> {
    let mut out = Vec::new();
    match &e.kind {
        ExprKind::Ref { name, select } => out.extend(span_of_ref(name, select, scope)),
        ExprKind::Concat(parts) => parts.iter().for_each(|p| out.extend(lvalue_writes(p, scope))),
        _ => {}
    }
    out
}

fn lvalue(e: &Expr, scope: &dyn Scope) -> Result<LTarget, CompileError> {
    let mut pieces = Vec::new();
    fn go(e: &Expr, scope: &dyn Scope, out: &mut Vec<LPiece>) -> Result<(), CompileError> {
        match &e.kind {
            ExprKind::Ref { name, select } => {
                let s = scope.lookup(name).ok_or_else(|| CompileError::Unresolved(name.clone()))?;
                let pos = BitSpan::of(&s).lo;
                let piece = match select {
                    None => LPiece::Static { pos, width: s.width },
                    Some(Select::Part(m, l)) => {
                        if *l < s.lsb || *m >= s.lsb + s.width as i64 || m < l {
                            return Err(CompileError::BadSelect(name.clone()));
                        }
                        LPiece::Static { pos: pos + (l - s.lsb) as usize, width: (m - l + 1) as u32 }
                    }
                    Some(Select::Bit(i)) => match i.as_literal() {
                        Some(l) => {
                            let v = l.value as i64;
                            if v < s.lsb || v >= s.lsb + s.width as i64 {
                                return Err(CompileError::BadSelect(name.clone()));
                            }
                            LPiece::Static { pos: pos + (v - s.lsb) as usize, width: 1 }
                        }
                        None => LPiece::Dyn { pos, sig_width: s.width, lsb: s.lsb, index: compile_self(i, scope)? },
                    },
                };
                out.push(piece);
                Ok(())
            }
            ExprKind::Concat(parts) => parts.iter().try_for_each(|p| go(p, scope, out)),
            _ => Err(CompileError::BadSelect("non-lvalue".into())),
        }
    }
    go(e, scope, &mut pieces)?;
    let width = pieces.iter().map(LPiece::width).sum();
    Ok(LTarget { pieces, width })
}

#[derive(Default)]
struct Access {
    reads: Vec<BitSpan>,
    writes: Vec<BitSpan>,
    locals: Vec<BitSpan>,
}

fn stmt(s: &Stmt, scope: &InstScope, acc: &mut Access) -> Result<CStmt, CompileError> {
    Ok(match &s.kind {
        StmtKind::Null => CStmt::Nop,
        StmtKind::Block { stmts, .. } => {
            CStmt::Block(stmts.iter().map(|x| stmt(x, scope, acc)).collect::<Result<_, _>>()?)
        }
        StmtKind::Assign { lhs, rhs, blocking } => {
            let target = lvalue(lhs, scope)?;
            let rhs_c = compile_assign_rhs(rhs, target.width, scope)?;
            expr_reads(rhs, scope, &mut acc.reads);
            lvalue_index_reads(lhs, scope, &mut acc.reads);
            acc.writes.extend(lvalue_writes(lhs, scope));
            CStmt::Assign { target, rhs: rhs_c, nonblocking: !blocking }
        }
        StmtKind::If { cond, then_s, else_s } => {
            expr_reads(cond, scope, &mut acc.reads);
            CStmt::If {
                cond: compile_self(cond, scope)?,
                then_s: Box::new(stmt(then_s, scope, acc)?),
                else_s: match else_s {
                    Some(e) => Some(Box::new(stmt(e, scope, acc)?)),
                    None => None,
                },
            }
        }
        StmtKind::Case { selector, items, default, .. } => {
            expr_reads(selector, scope, &mut acc.reads);
            let (mut w, mut signed) = self_size(selector, scope)?;
            for it in items {
                for l in &it.labels {
                    match l {
                        CaseLabel::Expr(e) => {
                            expr_reads(e, scope, &mut acc.reads);
                            let (lw, ls) = self_size(e, scope)?;
                            w = w.max(lw);
                            signed &= ls;
                        }
                        CaseLabel::Pattern(p) => {
                            w = w.max(p.width);
                            signed = false;
                        }
                    }
                }
            }
            let sel = compile(selector, w, signed, scope)?;
            let mut citems = Vec::new();
            for it in items {
                let mut labels = Vec::new();
                for l in &it.labels {
                    labels.push(match l {
                        CaseLabel::Expr(e) => Label::Value(compile(e, w, signed, scope)?),
                        CaseLabel::Pattern(p) => Label::Pattern {
                            value: p.value & mask(p.width),
                            care: (p.care & mask(p.width)) | (mask(w) & !mask(p.width)),
                        },
                    });
                }
                citems.push((labels, stmt(&it.body, scope, acc)?));
            }
            CStmt::Case {
                sel,
                items: citems,
                default: match default {
                    Some(d) => Some(Box::new(stmt(d, scope, acc)?)),
                    None => None,
                },
            }
        }
        StmtKind::For { var, init, cond, step, body } => {
            let v = Expr::ident(var);
            let target = lvalue(&v, scope)?;
            acc.locals.extend(lvalue_writes(&v, scope));
            for e in [init, cond, step] {
                expr_reads(e, scope, &mut acc.reads);
            }
            CStmt::For {
                init: compile_assign_rhs(init, target.width, scope)?,
                cond: compile_self(cond, scope)?,
                step: compile_assign_rhs(step, target.width, scope)?,
                var: target,
                body: Box::new(stmt(body, scope, acc)?),
            }
        }
    })
}
