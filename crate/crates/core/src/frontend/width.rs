// SPDX-License-Identifier: Apache-2.0

//! Width queries over the AST.
//!
//! [`width_of`] gives the self-determined width of an expression. The
//! [`node_contexts`] walk goes further: for every node it reports the
//! width and signedness it is evaluated at and its *demand*, the number of low
//! bits of the node that can influence the enclosing assignment or
//! condition. The analyzer uses these to size constants to their target
//! signals instead of the literal's written width.

use super::ast::{BinaryOp, Expr, ExprKind, ModuleDecl, Select, UnaryOp};
use super::FrontendError;
use crate::sim::expr::{self_size, Scope, SigRef};

/// Resolves identifiers against one module's declarations.
pub struct ModuleScope<'a>(pub &'a ModuleDecl);

impl Scope for ModuleScope<'_> {
    fn lookup(&self, name: &str) -> Option<SigRef> {
        self.0.signal(name).map(|s| SigRef { id: 0, base: 0, width: s.width, lsb: s.lsb, signed: s.signed })
    }
}

/// Self-determined width of `e` inside module `ctx`.
pub fn width_of(e: &Expr, ctx: &ModuleDecl) -> Result<u32, FrontendError> {
    size(e, ctx).map(|(w, _)| w)
}

pub(crate) fn size(e: &Expr, ctx: &ModuleDecl) -> Result<(u32, bool), FrontendError> {
    self_size(e, &ModuleScope(ctx)).map_err(|err| FrontendError::invalid(e.span, err.to_string()))
}

/// Width of an assignment target.
pub fn lvalue_width(lhs: &Expr, ctx: &ModuleDecl) -> Result<u32, FrontendError> {
    width_of(lhs, ctx)
}

/// Where a literal sits, for operand-specific sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteralPosition {
    Operand,
    /// Right side of a shift whose left side is evaluated at `shifted_width`.
    ShiftAmount {
        shifted_width: u32,
    },
    /// Operand of a comparison; `other_width` is set when the other side's
    /// value does not depend on the comparison width.
    Comparison {
        other_width: Option<u32>,
    },
    /// Inside a bit-select index.
    Index,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeContext {
    /// Child-index path from the walked root.
    pub path: Vec<u8>,
    pub context_width: u32,
    pub context_signed: bool,
    pub demand: u32,
    pub position: LiteralPosition,
}

/// Sizing of an expression root.
#[derive(Debug, Clone, Copy)]
pub struct RootContext {
    pub width: u32,
    pub signed: bool,
    pub demand: u32,
}

impl RootContext {
    /// Self-determined root (conditions, selectors).
    pub fn own(e: &Expr, m: &ModuleDecl) -> Result<Self, FrontendError> {
        let (w, s) = size(e, m)?;
        Ok(RootContext { width: w, signed: s, demand: w })
    }

    /// Right side of an assignment to `lhs_width` bits.
    pub fn assignment(rhs: &Expr, lhs_width: u32, m: &ModuleDecl) -> Result<Self, FrontendError> {
        let (w, s) = size(rhs, m)?;
        Ok(RootContext { width: w.max(lhs_width), signed: s, demand: lhs_width })
    }
}

pub fn node_contexts(e: &Expr, root: RootContext, m: &ModuleDecl) -> Result<Vec<NodeContext>, FrontendError> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    visit(e, root.width, root.signed, root.demand, LiteralPosition::Operand, m, &mut path, &mut out)?;
    Ok(out)
}

/// [`node_contexts`] restricted to literal nodes.
pub fn literal_contexts(e: &Expr, root: RootContext, m: &ModuleDecl) -> Result<Vec<NodeContext>, FrontendError> {
    Ok(node_contexts(e, root, m)?
        .into_iter()
        .filter(|c| matches!(expr_at(e, &c.path).map(|x| &x.kind), Some(ExprKind::Literal(_))))
        .collect())
}

/// Value of `e` does not change with the width it is evaluated at.
pub fn is_width_insensitive(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Ref { .. } | ExprKind::KeyBits { .. } | ExprKind::Concat(_) | ExprKind::Repeat(..) => true,
        ExprKind::Unary(op, _) => !matches!(op, UnaryOp::Not | UnaryOp::Neg),
        ExprKind::Binary(op, _, _) => op.is_comparison() || op.is_logical(),
        ExprKind::Literal(_) | ExprKind::Ternary(..) => false,
    }
}

#[allow(clippy::too_many_arguments)]
fn visit(
    e: &Expr,
    w: u32,
    s: bool,
    d: u32,
    pos: LiteralPosition,
    m: &ModuleDecl,
    path: &mut Vec<u8>,
    out: &mut Vec<NodeContext>,
) -> Result<(), FrontendError> {
    out.push(NodeContext { path: path.clone(), context_width: w, context_signed: s, demand: d, position: pos });
    let mut child = |i: u8, e: &Expr, w: u32, s: bool, d: u32, pos: LiteralPosition, path: &mut Vec<u8>| {
        path.push(i);
        let r = visit(e, w, s, d, pos, m, path, out);
        path.pop();
        r
    };
    let index_pos = |p: LiteralPosition| if p == LiteralPosition::Index { p } else { LiteralPosition::Operand };
    match &e.kind {
        ExprKind::Literal(_) => Ok(()),
        ExprKind::KeyBits { .. } => Ok(()),
        ExprKind::Ref { select, .. } => {
            if let Some(Select::Bit(idx)) = select {
                let (iw, is) = size(idx, m)?;
                child(0, idx, iw, is, iw, LiteralPosition::Index, path)?;
            }
            Ok(())
        }
        ExprKind::Unary(op, a) => match op {
            UnaryOp::Not | UnaryOp::Neg => child(0, a, w, s, d.min(w), index_pos(pos), path),
            _ => {
                let (aw, as_) = size(a, m)?;
                child(0, a, aw, as_, aw, index_pos(pos), path)
            }
        },
        ExprKind::Binary(op, l, r) => {
            let ipos = index_pos(pos);
            if op.is_comparison() {
                let (lw, ls) = size(l, m)?;
                let (rw, rs) = size(r, m)?;
                let (ow, os) = (lw.max(rw), ls && rs);
                let cmp = |other: &Expr, other_w: u32| {
                    if ipos == LiteralPosition::Index {
                        ipos
                    } else {
                        LiteralPosition::Comparison { other_width: is_width_insensitive(other).then_some(other_w) }
                    }
                };
                child(0, l, ow, os, ow, cmp(r, rw), path)?;
                child(1, r, ow, os, ow, cmp(l, lw), path)
            } else if op.is_logical() {
                let (lw, ls) = size(l, m)?;
                let (rw, rs) = size(r, m)?;
                child(0, l, lw, ls, lw, ipos, path)?;
                child(1, r, rw, rs, rw, ipos, path)
            } else if op.is_shift() {
                let (rw, rs) = size(r, m)?;
                let left_demand = match (op, r.as_literal()) {
                    (BinaryOp::Shl, _) => d.min(w),
                    (_, Some(lit)) if !lit.signed || lit.value >> (lit.width - 1) == 0 => {
                        let amount = lit.value.min(u32::MAX as u128) as u32;
                        d.saturating_add(amount).min(w)
                    }
                    _ => w,
                };
                child(0, l, w, s, left_demand, ipos, path)?;
                let amount_pos = if ipos == LiteralPosition::Index {
                    ipos
                } else {
                    LiteralPosition::ShiftAmount { shifted_width: w }
                };
                child(1, r, rw, rs, rw, amount_pos, path)
            } else if op.is_modular() {
                // Bits of one `&` operand above the other's zero-extended width are masked off.
                let masked = |other: &Expr| -> Result<u32, FrontendError> {
                    if *op == BinaryOp::And && !s && is_width_insensitive(other) {
                        Ok(size(other, m)?.0)
                    } else {
                        Ok(u32::MAX)
                    }
                };
                let (ld, rd) = (d.min(w).min(masked(r)?), d.min(w).min(masked(l)?));
                child(0, l, w, s, ld, ipos, path)?;
                child(1, r, w, s, rd, ipos, path)
            } else {
                child(0, l, w, s, w, ipos, path)?;
                child(1, r, w, s, w, ipos, path)
            }
        }
        ExprKind::Ternary(c, t, f) => {
            let ipos = index_pos(pos);
            let (cw, cs) = size(c, m)?;
            child(0, c, cw, cs, cw, ipos, path)?;
            child(1, t, w, s, d.min(w), ipos, path)?;
            child(2, f, w, s, d.min(w), ipos, path)
        }
        ExprKind::Concat(parts) => {
            for (i, p) in parts.iter().enumerate() {
                let (pw, ps) = size(p, m)?;
                child(i as u8, p, pw, ps, pw, index_pos(pos), path)?;
            }
            Ok(())
        }
        ExprKind::Repeat(_, inner) => {
            let (iw, is) = size(inner, m)?;
            child(0, inner, iw, is, iw, index_pos(pos), path)
        }
    }
}

/// Follow a child-index path from `e`.
pub fn expr_at<'a>(e: &'a Expr, path: &[u8]) -> Option<&'a Expr> {
    let Some((&first, rest)) = path.split_first() else { return Some(e) };
    let next: &Expr = match (&e.kind, first) {
        (ExprKind::Ref { select: Some(Select::Bit(i)), .. }, 0) => i,
        (ExprKind::Unary(_, a), 0) | (ExprKind::Repeat(_, a), 0) => a,
        (ExprKind::Binary(_, l, _), 0) => l,
        (ExprKind::Binary(_, _, r), 1) => r,
        (ExprKind::Ternary(c, _, _), 0) => c,
        (ExprKind::Ternary(_, t, _), 1) => t,
        (ExprKind::Ternary(_, _, f), 2) => f,
        (ExprKind::Concat(v), i) => v.get(i as usize)?,
        _ => return None,
    };
    expr_at(next, rest)
}

/// Mutable variant of [`expr_at`].
pub fn expr_at_mut<'a>(e: &'a mut Expr, path: &[u8]) -> Option<&'a mut Expr> {
    let Some((&first, rest)) = path.split_first() else { return Some(e) };
    let next: &mut Expr = match (&mut e.kind, first) {
        (ExprKind::Ref { select: Some(Select::Bit(i)), .. }, 0) => i,
        (ExprKind::Unary(_, a), 0) | (ExprKind::Repeat(_, a), 0) => a,
        (ExprKind::Binary(_, l, _), 0) => l,
        (ExprKind::Binary(_, _, r), 1) => r,
        (ExprKind::Ternary(c, _, _), 0) => c,
        (ExprKind::Ternary(_, t, _), 1) => t,
        (ExprKind::Ternary(_, _, f), 2) => f,
        (ExprKind::Concat(v), i) => v.get_mut(i as usize)?,
        _ => return None,
    };
    expr_at_mut(next, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::ItemKind;
    use crate::frontend::parse;

    fn module(src: &str) -> ModuleDecl {
        parse(src).unwrap().modules.remove(0)
    }

    fn rhs_contexts(src: &str) -> (Vec<NodeContext>, u32) {
        let m = module(src);
        let ItemKind::Assign { lhs, rhs } = &m.items[0].kind else { panic!() };
        let lw = lvalue_width(lhs, &m).unwrap();
        let root = RootContext::assignment(rhs, lw, &m).unwrap();
        (literal_contexts(rhs, root, &m).unwrap(), lw)
    }

    #[test]
    fn self_widths() {
        let m = module("module m(input [7:0] a, input [3:0] b, output y); assign y = 1'b0; endmodule");
        let e = |s: &str| {
            let src = format!("module t(input [7:0] a, input [3:0] b, output [31:0] y); assign y = {s}; endmodule");
            let mm = module(&src);
            let ItemKind::Assign { rhs, .. } = &mm.items[0].kind else { panic!() };
            width_of(rhs, &mm).unwrap()
        };
        assert_eq!(e("5'b01010"), 5);
        assert_eq!(e("a[3:1]"), 3);
        assert_eq!(e("a + b"), 8);
        assert_eq!(e("a < b"), 1);
        assert_eq!(e("{a, b}"), 12);
        assert_eq!(e("a + 1"), 32);
        drop(m);
    }

    #[test]
    fn integer_literal_into_one_bit_target() {
        let (ctx, lw) = rhs_contexts("module m(input c, output y); assign y = 1; endmodule");
        assert_eq!(lw, 1);
        assert_eq!(ctx[0].context_width, 32);
        assert_eq!(ctx[0].demand, 1);
    }

    #[test]
    fn division_demands_full_width() {
        let (ctx, _) = rhs_contexts("module m(input [3:0] a, output [3:0] y); assign y = (a + 1) / 4'd3; endmodule");
        assert_eq!(ctx.iter().map(|c| c.demand).collect::<Vec<_>>(), vec![32, 32]);
        let (ctx, _) = rhs_contexts("module m(input [3:0] a, output [3:0] y); assign y = (a + 1) >> 2; endmodule");
        assert_eq!(ctx[0].demand, 6);
        assert_eq!(ctx[1].position, LiteralPosition::ShiftAmount { shifted_width: 32 });
    }

    #[test]
    fn comparison_literal_sees_other_width() {
        let (ctx, _) = rhs_contexts("module m(input [3:0] a, output y); assign y = a == 3; endmodule");
        assert_eq!(ctx[0].position, LiteralPosition::Comparison { other_width: Some(4) });
        let (ctx, _) = rhs_contexts("module m(input [3:0] a, output y); assign y = (a + a) == 3; endmodule");
        assert_eq!(ctx[0].position, LiteralPosition::Comparison { other_width: None });
    }

    #[test]
    fn paths_resolve() {
        let m = module("module m(input [3:0] a, output [3:0] y); assign y = a ^ (4'd3 + a); endmodule");
        let ItemKind::Assign { rhs, .. } = &m.items[0].kind else { panic!() };
        let root = RootContext::assignment(rhs, 4, &m).unwrap();
        let ctx = literal_contexts(rhs, root, &m).unwrap();
        assert_eq!(ctx[0].path, vec![1, 0]);
        assert_eq!(expr_at(rhs, &ctx[0].path).unwrap().as_literal().unwrap().value, 3);
    }
}
