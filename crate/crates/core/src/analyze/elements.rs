// SPDX-License-Identifier: Apache-2.0

//! Candidate enumeration in depth-first pre-order.

use serde::{Deserialize, Serialize};

use super::blacklist::BlackList;
use super::location::{Location, Slot};
use super::AnalyzeError;
use crate::frontend::ast::*;
use crate::frontend::width::{self, LiteralPosition, NodeContext, RootContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Constant,
    Operation,
    Branch,
}

impl ElementKind {
    pub fn tag(self) -> &'static str {
        match self {
            ElementKind::Constant => "const",
            ElementKind::Operation => "op",
            ElementKind::Branch => "branch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Constant {
        literal: Literal,
        /// Matched width; also the key width.
        width: u32,
        /// Literal bits at the matched width.
        bits: u128,
        /// The literal had nonzero bits above the matched width.
        truncated: bool,
    },
    Operation {
        op: BinaryOp,
        shape: OpShape,
    },
    Branch {
        cond: Expr,
        ternary: bool,
    },
}

/// Evaluation context of an operation node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpShape {
    /// Width the node is evaluated at.
    pub context_width: u32,
    pub context_signed: bool,
    /// Low result bits that reach an observable point.
    pub demand: u32,
    pub left: (u32, bool),
    pub right: (u32, bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObfuscationElement {
    pub id: String,
    pub module: String,
    pub kind: ElementKind,
    /// For branches of `if` statements the condition root; for ternaries the
    /// ternary node itself.
    pub location: Location,
    pub payload: Payload,
}

impl ObfuscationElement {
    pub fn bit_req(&self) -> u32 {
        bit_req(self)
    }
}

pub fn bit_req(el: &ObfuscationElement) -> u32 {
    match &el.payload {
        Payload::Constant { width, .. } => *width,
        Payload::Operation { .. } | Payload::Branch { .. } => 1,
    }
}

/// Strip logical negations from a branch condition.
fn condition_core(e: &Expr) -> (&Expr, Vec<u8>) {
    let mut e = e;
    let mut path = Vec::new();
    while let ExprKind::Unary(UnaryOp::LogNot, inner) = &e.kind {
        e = inner;
        path.push(0);
    }
    (e, path)
}

struct Walker<'a> {
    design: &'a SourceUnit,
    m: &'a ModuleDecl,
    bl: &'a BlackList,
    out: Vec<ObfuscationElement>,
}

/// Matched width and bits for a literal, or `None` when the literal is not a
/// candidate at its position. `signed_ok` admits a signed context whose
/// demanded bits do not depend on sign extension.
pub fn match_constant(lit: &Literal, ctx: &NodeContext, signed_ok: bool) -> Option<(u32, u128, bool)> {
    if ctx.position == LiteralPosition::Index || (ctx.context_signed && !signed_ok) {
        return None;
    }
    let cw = ctx.context_width;
    let value = lit.value & mask(cw);
    let fits = |w: u32| w >= 128 || value >> w == 0;
    let w = match ctx.position {
        LiteralPosition::Operand => cw.min(ctx.demand),
        LiteralPosition::ShiftAmount { shifted_width } => {
            let c = (u32::BITS - (shifted_width.max(2) - 1).leading_zeros()).min(lit.width);
            if fits(c) {
                c
            } else {
                lit.width
            }
        }
        LiteralPosition::Comparison { other_width: Some(ow) } if fits(ow) => ow,
        LiteralPosition::Comparison { .. } => cw,
        LiteralPosition::Index => unreachable!(),
    };
    if w == 0 {
        return None;
    }
    Some((w, value & mask(w), !fits(w)))
}

impl Walker<'_> {
    fn push(&mut self, loc: Location, path: String, kind: ElementKind, payload: Payload) {
        if self.bl.covers(&path).is_some() {
            return;
        }
        self.out.push(ObfuscationElement {
            id: format!("{path}#{}", kind.tag()),
            module: self.m.name.clone(),
            kind,
            location: loc,
            payload,
        });
    }

    fn root(&mut self, loc: Location, e: &Expr, ctx: RootContext, branch_cond: bool) -> Result<(), AnalyzeError> {
        let contexts = width::node_contexts(e, ctx, self.m)?;
        // Comparisons at the root of a branch condition belong to the branch.
        let mut branch_owned: Vec<Vec<u8>> = Vec::new();
        let mut own_cond = |cond: &Expr, prefix: &[u8]| {
            let (core, p) = condition_core(cond);
            if matches!(&core.kind, ExprKind::Binary(op, ..) if op.is_comparison()) {
                branch_owned.push(prefix.iter().copied().chain(p).collect());
            }
        };
        if branch_cond {
            own_cond(e, &[]);
        }
        for nc in &contexts {
            if let Some(ExprKind::Ternary(c, ..)) = width::expr_at(e, &nc.path).map(|x| &x.kind) {
                let prefix: Vec<u8> = nc.path.iter().copied().chain([0]).collect();
                own_cond(c, &prefix);
            }
        }
        // Replacing a node in a signed context turns that context unsigned,
        // which only matters for bits at or above the narrowest operand.
        let mut narrowest: Vec<(u32, u32)> = Vec::new();
        for nc in contexts.iter().filter(|nc| nc.context_signed) {
            let w = width::width_of(width::expr_at(e, &nc.path).expect("context path resolves"), self.m)?;
            match narrowest.iter_mut().find(|(cw, _)| *cw == nc.context_width) {
                Some((_, min)) => *min = (*min).min(w),
                None => narrowest.push((nc.context_width, w)),
            }
        }
        let signed_ok =
            |nc: &NodeContext| narrowest.iter().any(|&(cw, min)| cw == nc.context_width && nc.demand.min(cw) <= min);
        for nc in &contexts {
            let node = width::expr_at(e, &nc.path).expect("context path resolves");
            let nloc = Location { expr: nc.path.clone(), ..loc.clone() };
            let path = nloc.path(&self.m.name);
            match &node.kind {
                ExprKind::Literal(lit) => {
                    if let Some((width, bits, truncated)) = match_constant(lit, nc, signed_ok(nc)) {
                        if truncated {
                            log::warn!(
                                "{path}: literal {} truncated to {width} bits drops nonzero bits",
                                crate::backend::emit::literal(lit)
                            );
                        }
                        let payload = Payload::Constant { literal: *lit, width, bits, truncated };
                        self.push(nloc, path, ElementKind::Constant, payload);
                    }
                }
                ExprKind::Binary(op, l, r) => {
                    if (nc.context_signed && !signed_ok(nc)) || branch_owned.contains(&nc.path) {
                        continue;
                    }
                    let shape = OpShape {
                        context_width: nc.context_width,
                        context_signed: nc.context_signed,
                        demand: nc.demand.min(nc.context_width),
                        left: width::size(l, self.m)?,
                        right: width::size(r, self.m)?,
                    };
                    let payload = Payload::Operation { op: *op, shape };
                    self.push(nloc, path, ElementKind::Operation, payload);
                }
                ExprKind::Ternary(c, ..) => {
                    let payload = Payload::Branch { cond: (**c).clone(), ternary: true };
                    self.push(nloc, path, ElementKind::Branch, payload);
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn stmt(&mut self, item: usize, s: &Stmt, path: &mut Vec<u16>) -> Result<(), AnalyzeError> {
        let at = |slot: Slot, path: &Vec<u16>| Location { item, stmt: path.clone(), slot, expr: vec![] };
        match &s.kind {
            StmtKind::Null => {}
            StmtKind::Block { stmts, .. } => {
                for (n, c) in stmts.iter().enumerate() {
                    path.push(n as u16);
                    self.stmt(item, c, path)?;
                    path.pop();
                }
            }
            StmtKind::Assign { lhs, rhs, .. } => {
                let lw = width::lvalue_width(lhs, self.m)?;
                let ctx = RootContext::assignment(rhs, lw, self.m)?;
                self.root(at(Slot::Rhs, path), rhs, ctx, false)?;
            }
            StmtKind::If { cond, then_s, else_s } => {
                let loc = at(Slot::Cond, path);
                let p = loc.path(&self.m.name);
                self.push(loc.clone(), p, ElementKind::Branch, Payload::Branch { cond: cond.clone(), ternary: false });
                self.root(loc, cond, RootContext::own(cond, self.m)?, true)?;
                path.push(0);
                self.stmt(item, then_s, path)?;
                path.pop();
                if let Some(e) = else_s {
                    path.push(1);
                    self.stmt(item, e, path)?;
                    path.pop();
                }
            }
            StmtKind::Case { selector, items, default, .. } => {
                let mut w = width::width_of(selector, self.m)?;
                for it in items {
                    for l in &it.labels {
                        w = w.max(match l {
                            CaseLabel::Expr(e) => width::width_of(e, self.m)?,
                            CaseLabel::Pattern(p) => p.width,
                        });
                    }
                }
                let ctx = RootContext { width: w, signed: false, demand: w };
                self.root(at(Slot::Selector, path), selector, ctx, false)?;
                for (n, it) in items.iter().enumerate() {
                    path.push(n as u16);
                    self.stmt(item, &it.body, path)?;
                    path.pop();
                }
                if let Some(d) = default {
                    path.push(items.len() as u16);
                    self.stmt(item, d, path)?;
                    path.pop();
                }
            }
            StmtKind::For { init, cond, step, body, .. } => {
                for (slot, e) in [(Slot::Init, init), (Slot::Test, cond), (Slot::Step, step)] {
                    self.root(at(slot, path), e, RootContext::own(e, self.m)?, false)?;
                }
                path.push(0);
                self.stmt(item, body, path)?;
                path.pop();
            }
        }
        Ok(())
    }

    fn item(&mut self, i: usize, item: &ModuleItem) -> Result<(), AnalyzeError> {
        match &item.kind {
            ItemKind::Assign { lhs, rhs } => {
                let lw = width::lvalue_width(lhs, self.m)?;
                let ctx = RootContext::assignment(rhs, lw, self.m)?;
                self.root(Location { item: i, stmt: vec![], slot: Slot::Rhs, expr: vec![] }, rhs, ctx, false)
            }
            ItemKind::Always(a) => self.stmt(i, &a.body, &mut Vec::new()),
            ItemKind::Instance(inst) => {
                let child = self.design.module(&inst.module).expect("validated instance");
                for (k, c) in inst.connections.iter().enumerate() {
                    let (Some(e), Some(port)) = (&c.expr, child.port(&c.port)) else { continue };
                    if port.dir != Direction::Input {
                        continue;
                    }
                    let ctx = RootContext::assignment(e, port.width(), self.m)?;
                    let loc = Location { item: i, stmt: vec![], slot: Slot::Conn(k as u16), expr: vec![] };
                    self.root(loc, e, ctx, false)?;
                }
                Ok(())
            }
        }
    }
}

/// Candidates of module `m` in depth-first pre-order, blacklisted nodes
/// removed. `design` supplies child port widths for instance connections.
pub fn enumerate_elements(
    design: &SourceUnit,
    m: &ModuleDecl,
    bl: &BlackList,
) -> Result<Vec<ObfuscationElement>, AnalyzeError> {
    let mut w = Walker { design, m, bl, out: Vec::new() };
    for (i, item) in m.items.iter().enumerate() {
        w.item(i, item)?;
    }
    Ok(w.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::blacklist::create_black_list;
    use crate::frontend::parse;

    fn elements(src: &str) -> Vec<ObfuscationElement> {
        let su = parse(src).unwrap();
        let m = su.top();
        enumerate_elements(&su, m, &create_black_list(m)).unwrap()
    }

    fn summary(els: &[ObfuscationElement]) -> Vec<(ElementKind, u32)> {
        els.iter().map(|e| (e.kind, e.bit_req())).collect()
    }

    #[test]
    fn xor_constant() {
        let els = elements("module m(input [7:0] x, output [7:0] y); assign y = x ^ 8'hA5; endmodule");
        assert_eq!(summary(&els), [(ElementKind::Operation, 1), (ElementKind::Constant, 8)]);
        assert!(matches!(els[1].payload, Payload::Constant { bits: 0xa5, width: 8, .. }));
        assert_eq!(els[0].id, "m/i0/rhs#op");
        assert_eq!(els[1].id, "m/i0/rhs/e1#const");
    }

    #[test]
    fn integer_into_one_bit_reg() {
        let els =
            elements("module m(input clk, input d, output reg q); always @(posedge clk) if (d) q <= 1; endmodule");
        assert_eq!(summary(&els), [(ElementKind::Branch, 1), (ElementKind::Constant, 1)]);
    }

    #[test]
    fn plain_add() {
        let els = elements("module m(input [3:0] a, input [3:0] b, output [3:0] c); assign c = a + b; endmodule");
        assert_eq!(summary(&els), [(ElementKind::Operation, 1)]);
        assert!(matches!(
            els[0].payload,
            Payload::Operation { op: BinaryOp::Add, shape: OpShape { context_width: 4, .. } }
        ));
    }

    #[test]
    fn branch_root_comparison_is_not_an_operation() {
        let els = elements(
            "module m(input [3:0] a, input [3:0] b, output reg y, output [3:0] z);
             always @* if (!(a > b)) y = 1'b1; else y = 1'b0;
             assign z = (a == b) ? a : b; endmodule",
        );
        let kinds: Vec<ElementKind> = els.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [ElementKind::Branch, ElementKind::Constant, ElementKind::Constant, ElementKind::Branch]);
    }

    #[test]
    fn shift_and_comparison_matching() {
        let els = elements(
            "module m(input [31:0] a, input [3:0] x, output [31:0] y, output z);
             assign y = a >> 32'd3; assign z = x == 32'd3; endmodule",
        );
        let consts: Vec<u32> = els.iter().filter(|e| e.kind == ElementKind::Constant).map(|e| e.bit_req()).collect();
        assert_eq!(consts, [5, 4]);
    }

    #[test]
    fn reset_constants_excluded() {
        let els = elements(
            "module m(input clk, input rst, input [3:0] d, output reg [3:0] q);
             always @(posedge clk or posedge rst) if (rst) q <= 4'd0; else q <= d + 4'd1; endmodule",
        );
        assert_eq!(summary(&els), [(ElementKind::Operation, 1), (ElementKind::Constant, 4)]);
        assert!(els.iter().all(|e| e.id.starts_with("m/i0/s1/")));
    }

    #[test]
    fn masked_and_demand() {
        let els = elements("module m(input [3:0] a, output [7:0] y); assign y = a & 8'h0f; endmodule");
        assert_eq!(summary(&els), [(ElementKind::Operation, 1), (ElementKind::Constant, 4)]);
    }

    #[test]
    fn deterministic_ids() {
        let src =
            "module m(input [3:0] a, input [3:0] b, output [3:0] y); assign y = (a + 1) * (b - 2) ^ 4'h3; endmodule";
        let a: Vec<String> = elements(src).into_iter().map(|e| e.id).collect();
        let b: Vec<String> = elements(src).into_iter().map(|e| e.id).collect();
        assert_eq!(a, b);
        let mut uniq = a.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), a.len());
    }
}
