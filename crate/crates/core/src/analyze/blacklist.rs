// SPDX-License-Identifier: Apache-2.0

//! Nodes exempt from locking.

use serde::Serialize;

use super::location::{contains, item_path, stmt_path};
use crate::frontend::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlackListReason {
    ResetProcess,
    SensitivityList,
    InductionVariable,
    UserPragma,
    OutputInterface,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlackListEntry {
    /// Node path; every node below it is covered too.
    pub node: String,
    pub reason: BlackListReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BlackList {
    pub entries: Vec<BlackListEntry>,
}

impl BlackList {
    pub fn covers(&self, path: &str) -> Option<BlackListReason> {
        self.entries.iter().find(|e| contains(&e.node, path)).map(|e| e.reason)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, node: String, reason: BlackListReason) {
        self.entries.push(BlackListEntry { node, reason });
    }
}

pub fn create_black_list(m: &ModuleDecl) -> BlackList {
    let mut bl = BlackList::default();
    if m.skip {
        bl.push(m.name.clone(), BlackListReason::UserPragma);
        return bl;
    }
    for (i, item) in m.items.iter().enumerate() {
        if item.skip {
            let reason =
                if drives_output(m, item) { BlackListReason::OutputInterface } else { BlackListReason::UserPragma };
            bl.push(item_path(&m.name, i), reason);
            continue;
        }
        let ItemKind::Always(a) = &item.kind else { continue };
        if let Sensitivity::Edges(evs) = &a.sensitivity {
            for k in 0..evs.len() {
                bl.push(format!("{}/edge{k}", item_path(&m.name, i)), BlackListReason::SensitivityList);
            }
            if let Some((path, _)) = reset_branch(&a.body, evs) {
                let base = stmt_path(&m.name, i, &path);
                bl.push(format!("{base}/cond"), BlackListReason::ResetProcess);
                bl.push(format!("{base}/s0"), BlackListReason::ResetProcess);
            }
        }
        stmt_entries(m, i, &a.body, &mut Vec::new(), &mut bl);
    }
    bl
}

/// Top-level `if` of an edge block whose condition is an edge signal,
/// possibly negated. Returns the statement path of the `if` and the signal.
pub fn reset_branch<'a>(body: &'a Stmt, evs: &[EdgeEvent]) -> Option<(Vec<u16>, &'a str)> {
    let mut s = body;
    let mut path = Vec::new();
    while let StmtKind::Block { stmts, .. } = &s.kind {
        if stmts.len() != 1 {
            return None;
        }
        s = &stmts[0];
        path.push(0);
    }
    let StmtKind::If { cond, .. } = &s.kind else { return None };
    let sig = reset_signal(cond)?;
    evs.iter().any(|e| e.signal == sig).then_some((path, sig))
}

/// `r`, `!r` or `~r` for a plain identifier `r`; the bool is true when negated.
pub fn reset_test(cond: &Expr) -> Option<(&str, bool)> {
    match &cond.kind {
        ExprKind::Ref { name, select: None } => Some((name, false)),
        ExprKind::Unary(UnaryOp::LogNot | UnaryOp::Not, inner) => match &inner.kind {
            ExprKind::Ref { name, select: None } => Some((name, true)),
            _ => None,
        },
        _ => None,
    }
}

fn reset_signal(cond: &Expr) -> Option<&str> {
    reset_test(cond).map(|(n, _)| n)
}

fn stmt_entries(m: &ModuleDecl, item: usize, s: &Stmt, path: &mut Vec<u16>, bl: &mut BlackList) {
    if s.skip {
        bl.push(stmt_path(&m.name, item, path), BlackListReason::UserPragma);
        return;
    }
    let child = |n: u16, c: &Stmt, path: &mut Vec<u16>, bl: &mut BlackList| {
        path.push(n);
        stmt_entries(m, item, c, path, bl);
        path.pop();
    };
    match &s.kind {
        StmtKind::Block { stmts, .. } => {
            for (n, c) in stmts.iter().enumerate() {
                child(n as u16, c, path, bl);
            }
        }
        StmtKind::If { then_s, else_s, .. } => {
            child(0, then_s, path, bl);
            if let Some(e) = else_s {
                child(1, e, path, bl);
            }
        }
        StmtKind::Case { items, default, .. } => {
            for (n, it) in items.iter().enumerate() {
                child(n as u16, &it.body, path, bl);
            }
            if let Some(d) = default {
                child(items.len() as u16, d, path, bl);
            }
        }
        StmtKind::For { body, .. } => {
            let base = stmt_path(&m.name, item, path);
            for slot in ["init", "test", "step"] {
                bl.push(format!("{base}/{slot}"), BlackListReason::InductionVariable);
            }
            child(0, body, path, bl);
        }
        StmtKind::Assign { .. } | StmtKind::Null => {}
    }
}

fn drives_output(m: &ModuleDecl, item: &ModuleItem) -> bool {
    let is_out = |name: &str| m.port(name).is_some_and(|p| p.dir != Direction::Input);
    let mut targets = Vec::new();
    match &item.kind {
        ItemKind::Assign { lhs, .. } => lvalue_names(lhs, &mut targets),
        ItemKind::Always(a) => stmt_targets(&a.body, &mut targets),
        ItemKind::Instance(_) => {}
    }
    targets.iter().any(|n| is_out(n))
}

fn lvalue_names<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
    match &e.kind {
        ExprKind::Ref { name, .. } => out.push(name),
        ExprKind::Concat(parts) => parts.iter().for_each(|p| lvalue_names(p, out)),
        _ => {}
    }
}

fn stmt_targets<'a>(s: &'a Stmt, out: &mut Vec<&'a str>) {
    match &s.kind {
        StmtKind::Assign { lhs, .. } => lvalue_names(lhs, out),
        StmtKind::Block { stmts, .. } => stmts.iter().for_each(|c| stmt_targets(c, out)),
        StmtKind::If { then_s, else_s, .. } => {
            stmt_targets(then_s, out);
            if let Some(e) = else_s {
                stmt_targets(e, out);
            }
        }
        StmtKind::Case { items, default, .. } => {
            items.iter().for_each(|it| stmt_targets(&it.body, out));
            if let Some(d) = default {
                stmt_targets(d, out);
            }
        }
        StmtKind::For { body, .. } => stmt_targets(body, out),
        StmtKind::Null => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn bl(src: &str) -> BlackList {
        create_black_list(parse(src).unwrap().top())
    }

    #[test]
    fn async_reset_process() {
        let b = bl("module m(input clk, input rst, input d, output reg q);
                    always @(posedge clk or posedge rst) if (rst) q <= 0; else q <= d; endmodule");
        let got: Vec<(&str, BlackListReason)> = b.entries.iter().map(|e| (e.node.as_str(), e.reason)).collect();
        assert_eq!(
            got,
            [
                ("m/i0/edge0", BlackListReason::SensitivityList),
                ("m/i0/edge1", BlackListReason::SensitivityList),
                ("m/i0/cond", BlackListReason::ResetProcess),
                ("m/i0/s0", BlackListReason::ResetProcess),
            ]
        );
        assert_eq!(b.covers("m/i0/s0/rhs"), Some(BlackListReason::ResetProcess));
        assert_eq!(b.covers("m/i0/s1/rhs"), None);
    }

    #[test]
    fn negated_reset_inside_block() {
        let b = bl("module m(input clk, input rst_n, input d, output reg q);
                    always @(posedge clk or negedge rst_n) begin if (!rst_n) q <= 0; else q <= d; end endmodule");
        assert_eq!(b.covers("m/i0/s0/cond"), Some(BlackListReason::ResetProcess));
        assert_eq!(b.covers("m/i0/s0/s0/rhs"), Some(BlackListReason::ResetProcess));
    }

    #[test]
    fn synchronous_reset_not_detected() {
        let b = bl("module m(input clk, input rst, input d, output reg q);
                    always @(posedge clk) if (rst) q <= 0; else q <= d; endmodule");
        assert!(b.entries.iter().all(|e| e.reason == BlackListReason::SensitivityList));
    }

    #[test]
    fn module_pragma() {
        let b = bl("(* assure_skip *) module m(input a, output y); assign y = a + 1; endmodule");
        assert_eq!(b.covers("m/i0/rhs/e1"), Some(BlackListReason::UserPragma));
    }

    #[test]
    fn item_pragmas_and_loops() {
        let b = bl("module m(input [3:0] a, output [3:0] y, output reg [3:0] z); wire [3:0] t;
                    (* assure_skip *) assign y = a + 1;
                    (* assure_skip *) assign t = a - 1;
                    integer i;
                    always @* begin z = 0; for (i = 0; i < 4; i = i + 1) z[i] = t[i]; end endmodule");
        assert_eq!(b.covers("m/i0/rhs"), Some(BlackListReason::OutputInterface));
        assert_eq!(b.covers("m/i1/rhs"), Some(BlackListReason::UserPragma));
        assert_eq!(b.covers("m/i2/s1/test/e1"), Some(BlackListReason::InductionVariable));
        assert_eq!(b.covers("m/i2/s1/s0/rhs"), None);
    }

    #[test]
    fn combinational_module_is_clean() {
        assert!(bl("module m(input [3:0] a, output [3:0] y); assign y = a ^ 4'h5; endmodule").is_empty());
    }
}
