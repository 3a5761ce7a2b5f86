// SPDX-License-Identifier: Apache-2.0

//! Addressing of expression nodes inside a module.
//!
//! A [`Location`] names an expression root (an item-level or statement-level
//! slot) plus a child-index path into it. Its string form is a `/`-separated
//! path such as `top/i2/s0/s1/rhs/e0/e1`; a node is contained in another when
//! the other's path is a segment prefix of it.

use std::fmt::Write;

use crate::frontend::ast::*;
use crate::frontend::width::{expr_at, expr_at_mut};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Rhs,
    Lhs,
    Cond,
    Selector,
    Label(u16, u16),
    Init,
    Test,
    Step,
    Conn(u16),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    pub item: usize,
    /// Statement child indices from the always body.
    pub stmt: Vec<u16>,
    pub slot: Slot,
    pub expr: Vec<u8>,
}

impl Location {
    pub fn child(&self, i: u8) -> Location {
        let mut l = self.clone();
        l.expr.push(i);
        l
    }

    pub fn path(&self, module: &str) -> String {
        let mut s = item_path(module, self.item);
        for n in &self.stmt {
            let _ = write!(s, "/s{n}");
        }
        s.push('/');
        s.push_str(&slot_name(self.slot));
        for e in &self.expr {
            let _ = write!(s, "/e{e}");
        }
        s
    }
}

pub fn item_path(module: &str, item: usize) -> String {
    format!("{module}/i{item}")
}

pub fn stmt_path(module: &str, item: usize, stmt: &[u16]) -> String {
    let mut s = item_path(module, item);
    for n in stmt {
        let _ = write!(s, "/s{n}");
    }
    s
}

fn slot_name(s: Slot) -> String {
    match s {
        Slot::Rhs => "rhs".into(),
        Slot::Lhs => "lhs".into(),
        Slot::Cond => "cond".into(),
        Slot::Selector => "sel".into(),
        Slot::Label(j, l) => format!("lbl{j}.{l}"),
        Slot::Init => "init".into(),
        Slot::Test => "test".into(),
        Slot::Step => "step".into(),
        Slot::Conn(k) => format!("c{k}"),
    }
}

/// `inner` equals `outer` or lies below it.
pub fn contains(outer: &str, inner: &str) -> bool {
    inner.len() >= outer.len()
        && inner.starts_with(outer)
        && (inner.len() == outer.len() || inner.as_bytes()[outer.len()] == b'/')
}

pub fn stmt_at<'a>(s: &'a Stmt, path: &[u16]) -> Option<&'a Stmt> {
    let Some((&n, rest)) = path.split_first() else { return Some(s) };
    let next: &Stmt = match &s.kind {
        StmtKind::Block { stmts, .. } => stmts.get(n as usize)?,
        StmtKind::If { then_s, .. } if n == 0 => then_s,
        StmtKind::If { else_s: Some(e), .. } if n == 1 => e,
        StmtKind::Case { items, default, .. } => match items.get(n as usize) {
            Some(it) => &it.body,
            None if n as usize == items.len() => default.as_deref()?,
            None => return None,
        },
        StmtKind::For { body, .. } if n == 0 => body,
        _ => return None,
    };
    stmt_at(next, rest)
}

pub fn stmt_at_mut<'a>(s: &'a mut Stmt, path: &[u16]) -> Option<&'a mut Stmt> {
    let Some((&n, rest)) = path.split_first() else { return Some(s) };
    let next: &mut Stmt = match &mut s.kind {
        StmtKind::Block { stmts, .. } => stmts.get_mut(n as usize)?,
        StmtKind::If { then_s, .. } if n == 0 => then_s,
        StmtKind::If { else_s: Some(e), .. } if n == 1 => e,
        StmtKind::Case { items, default, .. } => {
            let len = items.len();
            match items.get_mut(n as usize) {
                Some(it) => &mut it.body,
                None if n as usize == len => default.as_deref_mut()?,
                None => return None,
            }
        }
        StmtKind::For { body, .. } if n == 0 => body,
        _ => return None,
    };
    stmt_at_mut(next, rest)
}

fn stmt_slot(s: &Stmt, slot: Slot) -> Option<&Expr> {
    match (&s.kind, slot) {
        (StmtKind::Assign { rhs, .. }, Slot::Rhs) => Some(rhs),
        (StmtKind::Assign { lhs, .. }, Slot::Lhs) => Some(lhs),
        (StmtKind::If { cond, .. }, Slot::Cond) => Some(cond),
        (StmtKind::Case { selector, .. }, Slot::Selector) => Some(selector),
        (StmtKind::Case { items, .. }, Slot::Label(j, l)) => match items.get(j as usize)?.labels.get(l as usize)? {
            CaseLabel::Expr(e) => Some(e),
            CaseLabel::Pattern(_) => None,
        },
        (StmtKind::For { init, .. }, Slot::Init) => Some(init),
        (StmtKind::For { cond, .. }, Slot::Test) => Some(cond),
        (StmtKind::For { step, .. }, Slot::Step) => Some(step),
        _ => None,
    }
}

fn stmt_slot_mut(s: &mut Stmt, slot: Slot) -> Option<&mut Expr> {
    match (&mut s.kind, slot) {
        (StmtKind::Assign { rhs, .. }, Slot::Rhs) => Some(rhs),
        (StmtKind::Assign { lhs, .. }, Slot::Lhs) => Some(lhs),
        (StmtKind::If { cond, .. }, Slot::Cond) => Some(cond),
        (StmtKind::Case { selector, .. }, Slot::Selector) => Some(selector),
        (StmtKind::Case { items, .. }, Slot::Label(j, l)) => {
            match items.get_mut(j as usize)?.labels.get_mut(l as usize)? {
                CaseLabel::Expr(e) => Some(e),
                CaseLabel::Pattern(_) => None,
            }
        }
        (StmtKind::For { init, .. }, Slot::Init) => Some(init),
        (StmtKind::For { cond, .. }, Slot::Test) => Some(cond),
        (StmtKind::For { step, .. }, Slot::Step) => Some(step),
        _ => None,
    }
}

/// Expression root named by `loc`, ignoring `loc.expr`.
pub fn root_at<'a>(m: &'a ModuleDecl, loc: &Location) -> Option<&'a Expr> {
    match &m.items.get(loc.item)?.kind {
        ItemKind::Assign { rhs, .. } if loc.slot == Slot::Rhs && loc.stmt.is_empty() => Some(rhs),
        ItemKind::Assign { lhs, .. } if loc.slot == Slot::Lhs && loc.stmt.is_empty() => Some(lhs),
        ItemKind::Always(a) => stmt_slot(stmt_at(&a.body, &loc.stmt)?, loc.slot),
        ItemKind::Instance(inst) => match loc.slot {
            Slot::Conn(k) if loc.stmt.is_empty() => inst.connections.get(k as usize)?.expr.as_ref(),
            _ => None,
        },
        _ => None,
    }
}

pub fn root_at_mut<'a>(m: &'a mut ModuleDecl, loc: &Location) -> Option<&'a mut Expr> {
    match &mut m.items.get_mut(loc.item)?.kind {
        ItemKind::Assign { rhs, .. } if loc.slot == Slot::Rhs && loc.stmt.is_empty() => Some(rhs),
        ItemKind::Assign { lhs, .. } if loc.slot == Slot::Lhs && loc.stmt.is_empty() => Some(lhs),
        ItemKind::Always(a) => stmt_slot_mut(stmt_at_mut(&mut a.body, &loc.stmt)?, loc.slot),
        ItemKind::Instance(inst) => match loc.slot {
            Slot::Conn(k) if loc.stmt.is_empty() => inst.connections.get_mut(k as usize)?.expr.as_mut(),
            _ => None,
        },
        _ => None,
    }
}

pub fn node_at<'a>(m: &'a ModuleDecl, loc: &Location) -> Option<&'a Expr> {
    expr_at(root_at(m, loc)?, &loc.expr)
}

pub fn node_at_mut<'a>(m: &'a mut ModuleDecl, loc: &Location) -> Option<&'a mut Expr> {
    expr_at_mut(root_at_mut(m, loc)?, &loc.expr)
}
