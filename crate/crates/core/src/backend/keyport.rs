// SPDX-License-Identifier: Apache-2.0

//! Key port insertion through the hierarchy.

use std::collections::HashMap;

use super::BackendError;
use crate::frontend::ast::*;

pub const DEFAULT_KEY_PORT: &str = "key_in";

/// Global key range `[lsb, lsb + width)` owned by a module or instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyRange {
    pub lsb: u64,
    pub width: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyWiring {
    pub port: String,
    /// Per module that consumes key bits.
    pub modules: Vec<(String, KeyRange)>,
    /// Per instance `(parent, instance name, child range)`.
    pub instances: Vec<(String, String, KeyRange)>,
}

impl KeyWiring {
    pub fn module_range(&self, name: &str) -> Option<KeyRange> {
        self.modules.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }
}

fn own_bits(m: &ModuleDecl) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut visit = |e: &Expr| {
        e.walk(&mut |x| {
            if let ExprKind::KeyBits { lsb, width } = x.kind {
                out.push((lsb, lsb + width as u64));
            }
        })
    };
    for_each_expr(m, &mut visit);
    out
}

fn for_each_expr(m: &ModuleDecl, f: &mut dyn FnMut(&Expr)) {
    fn stmt(s: &Stmt, f: &mut dyn FnMut(&Expr)) {
        match &s.kind {
            StmtKind::Block { stmts, .. } => stmts.iter().for_each(|c| stmt(c, f)),
            StmtKind::Assign { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            StmtKind::If { cond, then_s, else_s } => {
                f(cond);
                stmt(then_s, f);
                if let Some(e) = else_s {
                    stmt(e, f);
                }
            }
            StmtKind::Case { selector, items, default, .. } => {
                f(selector);
                for it in items {
                    for l in &it.labels {
                        if let CaseLabel::Expr(e) = l {
                            f(e);
                        }
                    }
                    stmt(&it.body, f);
                }
                if let Some(d) = default {
                    stmt(d, f);
                }
            }
            StmtKind::For { init, cond, step, body, .. } => {
                f(init);
                f(cond);
                f(step);
                stmt(body, f);
            }
            StmtKind::Null => {}
        }
    }
    for item in &m.items {
        match &item.kind {
            ItemKind::Assign { lhs, rhs } => {
                f(lhs);
                f(rhs);
            }
            ItemKind::Always(a) => stmt(&a.body, f),
            ItemKind::Instance(inst) => inst.connections.iter().filter_map(|c| c.expr.as_ref()).for_each(&mut *f),
        }
    }
}

pub(crate) fn for_each_expr_mut(m: &mut ModuleDecl, f: &mut dyn FnMut(&mut Expr)) {
    fn stmt(s: &mut Stmt, f: &mut dyn FnMut(&mut Expr)) {
        match &mut s.kind {
            StmtKind::Block { stmts, .. } => stmts.iter_mut().for_each(|c| stmt(c, f)),
            StmtKind::Assign { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            StmtKind::If { cond, then_s, else_s } => {
                f(cond);
                stmt(then_s, f);
                if let Some(e) = else_s {
                    stmt(e, f);
                }
            }
            StmtKind::Case { selector, items, default, .. } => {
                f(selector);
                for it in items {
                    for l in &mut it.labels {
                        if let CaseLabel::Expr(e) = l {
                            f(e);
                        }
                    }
                    stmt(&mut it.body, f);
                }
                if let Some(d) = default {
                    stmt(d, f);
                }
            }
            StmtKind::For { init, cond, step, body, .. } => {
                f(init);
                f(cond);
                f(step);
                stmt(body, f);
            }
            StmtKind::Null => {}
        }
    }
    for item in &mut m.items {
        match &mut item.kind {
            ItemKind::Assign { lhs, rhs } => {
                f(lhs);
                f(rhs);
            }
            ItemKind::Always(a) => stmt(&mut a.body, f),
            ItemKind::Instance(inst) => inst.connections.iter_mut().filter_map(|c| c.expr.as_mut()).for_each(&mut *f),
        }
    }
}

fn rewrite_key_refs(e: &mut Expr, port: &str, base: u64) {
    if let ExprKind::KeyBits { lsb, width } = e.kind {
        let lo = (lsb - base) as i64;
        let select = if width == 1 {
            Select::Bit(Box::new(Expr::lit(Literal::integer(lo))))
        } else {
            Select::Part(lo + width as i64 - 1, lo)
        };
        e.kind = ExprKind::Ref { name: port.to_string(), select: Some(select) };
        return;
    }
    match &mut e.kind {
        ExprKind::Ref { select: Some(Select::Bit(i)), .. } => rewrite_key_refs(i, port, base),
        ExprKind::Unary(_, a) | ExprKind::Repeat(_, a) => rewrite_key_refs(a, port, base),
        ExprKind::Binary(_, l, r) => {
            rewrite_key_refs(l, port, base);
            rewrite_key_refs(r, port, base);
        }
        ExprKind::Ternary(c, t, f) => {
            rewrite_key_refs(c, port, base);
            rewrite_key_refs(t, port, base);
            rewrite_key_refs(f, port, base);
        }
        ExprKind::Concat(parts) => parts.iter_mut().for_each(|p| rewrite_key_refs(p, port, base)),
        _ => {}
    }
}

/// Give every module that consumes key bits, directly or through its
/// children, an input `port[W-1:0]`; rewrite abstract key references to
/// local selects; pass each child its slice.
pub fn insert_key_ports(design: &SourceUnit, port: &str) -> Result<(SourceUnit, KeyWiring), BackendError> {
    let mut ranges: HashMap<String, Option<(u64, u64)>> = HashMap::new();
    fn range_of(
        design: &SourceUnit,
        name: &str,
        ranges: &mut HashMap<String, Option<(u64, u64)>>,
    ) -> Option<(u64, u64)> {
        if let Some(r) = ranges.get(name) {
            return *r;
        }
        let m = design.module(name).expect("instantiated module exists");
        let mut spans = own_bits(m);
        for inst in m.instances() {
            spans.extend(range_of(design, &inst.module, ranges));
        }
        let r = spans.iter().copied().reduce(|(a, b), (c, d)| (a.min(c), b.max(d)));
        ranges.insert(name.to_string(), r);
        r
    }
    for m in &design.modules {
        range_of(design, &m.name, &mut ranges);
    }

    let mut out = design.clone();
    let mut wiring = KeyWiring { port: port.to_string(), ..Default::default() };
    for m in &mut out.modules {
        let Some((lo, hi)) = ranges[&m.name] else { continue };
        if m.signal(port).is_some() {
            return Err(BackendError::KeyPortCollision { module: m.name.clone(), name: port.to_string() });
        }
        let width = hi - lo;
        wiring.modules.push((m.name.clone(), KeyRange { lsb: lo, width }));
        for_each_expr_mut(m, &mut |e| rewrite_key_refs(e, port, lo));
        let parent = m.name.clone();
        for item in &mut m.items {
            let ItemKind::Instance(inst) = &mut item.kind else { continue };
            let Some((clo, chi)) = ranges[&inst.module] else { continue };
            let slice = Expr::part(port, (chi - lo) as i64 - 1, (clo - lo) as i64);
            inst.connections.push(Connection { port: port.to_string(), expr: Some(slice), span: Span::default() });
            wiring.instances.push((parent.clone(), inst.name.clone(), KeyRange { lsb: clo, width: chi - clo }));
        }
        m.ports.push(Port {
            name: port.to_string(),
            dir: Direction::Input,
            kind: NetKind::Wire,
            signed: false,
            range: Some(Range { msb: width as i64 - 1, lsb: 0 }),
            span: Span::default(),
        });
    }
    Ok((out, wiring))
}
