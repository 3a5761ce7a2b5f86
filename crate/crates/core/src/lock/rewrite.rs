// SPDX-License-Identifier: Apache-2.0

//! The three element rewrites. Key bits are referenced abstractly by their
//! global index and wired to ports later.

use crate::frontend::ast::*;

pub fn key_bits(lsb: u64, width: u32) -> Expr {
    Expr::new(ExprKind::KeyBits { lsb, width }, Span::default())
}

/// Replace a constant by the key slice holding its bits.
pub fn obfuscate_constant(lsb: u64, width: u32) -> Expr {
    key_bits(lsb, width)
}

/// `X & {W{k}} | Y & {W{~k}}`: the original sits in the arm selected by
/// the key bit's value, the dummy in the other.
pub fn obfuscate_operation(original: &Expr, dummy: BinaryOp, key_bit: u64, key_value: bool, width: u32) -> Expr {
    let ExprKind::Binary(_, l, r) = &original.kind else {
        panic!("operation element is not a binary node");
    };
    let decoy = Expr::new(ExprKind::Binary(dummy, l.clone(), r.clone()), original.span);
    let (x, y) = if key_value { (original.clone(), decoy) } else { (decoy, original.clone()) };
    let k = key_bits(key_bit, 1);
    let mask_k = Expr::repeat(width, k.clone());
    let mask_nk = Expr::repeat(width, Expr::unary(UnaryOp::Not, k));
    let mut out =
        Expr::binary(BinaryOp::Or, Expr::binary(BinaryOp::And, x, mask_k), Expr::binary(BinaryOp::And, y, mask_nk));
    out.span = original.span;
    out
}

/// `(cond) ^ k` for key bit 0, `(negate(cond)) ^ k` for key bit 1.
/// Multi-bit conditions are reduced with `|` first. `width` gives the
/// self-determined width of a subexpression.
pub fn obfuscate_branch(cond: &Expr, width: &dyn Fn(&Expr) -> u32, key_bit: u64, key_value: bool) -> Expr {
    let test = if key_value {
        negate(cond, width)
    } else if width(cond) > 1 {
        Expr::unary(UnaryOp::RedOr, cond.clone())
    } else {
        cond.clone()
    };
    let mut out = Expr::binary(BinaryOp::Xor, test, key_bits(key_bit, 1));
    out.span = cond.span;
    out
}

/// Logical negation pushed inward: De Morgan over `&&`/`||`, flipped
/// comparisons, double negation removed, `!(..)` otherwise.
pub fn negate(e: &Expr, width: &dyn Fn(&Expr) -> u32) -> Expr {
    let flip = |op: BinaryOp| match op {
        BinaryOp::Eq => Some(BinaryOp::Ne),
        BinaryOp::Ne => Some(BinaryOp::Eq),
        BinaryOp::Lt => Some(BinaryOp::Ge),
        BinaryOp::Ge => Some(BinaryOp::Lt),
        BinaryOp::Gt => Some(BinaryOp::Le),
        BinaryOp::Le => Some(BinaryOp::Gt),
        _ => None,
    };
    let mut out = match &e.kind {
        ExprKind::Binary(op @ (BinaryOp::LogAnd | BinaryOp::LogOr), l, r) => {
            let dual = if *op == BinaryOp::LogAnd { BinaryOp::LogOr } else { BinaryOp::LogAnd };
            Expr::binary(dual, negate(l, width), negate(r, width))
        }
        ExprKind::Binary(op, l, r) if flip(*op).is_some() => {
            Expr::new(ExprKind::Binary(flip(*op).unwrap(), l.clone(), r.clone()), e.span)
        }
        ExprKind::Unary(UnaryOp::LogNot, inner) => {
            if is_boolean(inner) || width(inner) == 1 {
                (**inner).clone()
            } else {
                Expr::unary(UnaryOp::RedOr, (**inner).clone())
            }
        }
        _ => Expr::unary(UnaryOp::LogNot, e.clone()),
    };
    out.span = e.span;
    out
}

/// One-bit by construction.
fn is_boolean(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.is_comparison() || op.is_logical(),
        ExprKind::Unary(op, _) => matches!(op, UnaryOp::LogNot | UnaryOp::RedAnd | UnaryOp::RedOr | UnaryOp::RedXor),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::emit::expr;

    fn w(x: &Expr) -> u32 {
        match &x.kind {
            ExprKind::Ref { name, .. } if name == "a" || name == "b" => 8,
            ExprKind::Binary(op, ..) if !op.is_comparison() && !op.is_logical() => 8,
            _ => 1,
        }
    }

    fn e(src: &str) -> Expr {
        let su = crate::frontend::parse(&format!(
            "module m(input [7:0] a, input [7:0] b, input c, input d, output y); assign y = {src}; endmodule"
        ))
        .unwrap();
        match &su.top().items[0].kind {
            ItemKind::Assign { rhs, .. } => rhs.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn masked_mux_arms_follow_key_value() {
        let orig = e("a + b");
        assert_eq!(
            expr(&obfuscate_operation(&orig, BinaryOp::Sub, 0, false, 8)),
            "(a - b) & {8{key_in[0]}} | (a + b) & {8{~key_in[0]}}"
        );
        assert_eq!(
            expr(&obfuscate_operation(&orig, BinaryOp::Sub, 0, true, 8)),
            "(a + b) & {8{key_in[0]}} | (a - b) & {8{~key_in[0]}}"
        );
    }

    #[test]
    fn branch_forms() {
        assert_eq!(expr(&obfuscate_branch(&e("a > b"), &w, 2, true)), "(a <= b) ^ key_in[2]");
        assert_eq!(expr(&obfuscate_branch(&e("a > b"), &w, 2, false)), "(a > b) ^ key_in[2]");
        assert_eq!(expr(&obfuscate_branch(&e("a"), &w, 0, false)), "|a ^ key_in[0]");
    }

    #[test]
    fn de_morgan() {
        assert_eq!(expr(&negate(&e("a > b && (c || !d)"), &w)), "a <= b || !c && d");
        assert_eq!(expr(&negate(&e("!(a == b)"), &w)), "a == b");
        assert_eq!(expr(&negate(&e("!a"), &w)), "|a");
        assert_eq!(expr(&negate(&e("a & b"), &w)), "!(a & b)");
    }
}
