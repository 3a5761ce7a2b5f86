// SPDX-License-Identifier: Apache-2.0

//! Two-state expression semantics.
//!
//! Expressions are compiled once into a [`CExpr`] tree in which every node
//! already knows the width and signedness it is evaluated at. Sizing follows
//! the usual Verilog rules:
//!
//! * `+ - * / % & | ^ ~^`, unary `~ -`, the left operand of shifts and the two
//!   arms of `?:` are context-determined: they are evaluated at the width of
//!   the enclosing expression.
//! * Operands of comparisons are sized against each other (the wider wins)
//!   and produce one unsigned bit.
//! * Operands of `&& || !`, reductions, shift amounts, conditions, concat and
//!   repeat members are self-determined.
//! * An expression is signed only when every operand is signed; the type then
//!   flows back down to context-determined operands, which decides between sign
//!   and zero extension.
//! * An assignment evaluates its right side at `max(lhs, rhs)` bits and
//!   truncates.
//!
//! Division or modulus by zero yields zero. Out-of-range dynamic bit selects
//! read zero and writes to them are dropped.

use crate::frontend::ast::{mask, BinaryOp, Expr, ExprKind, Select, UnaryOp, MAX_VALUE_WIDTH};
use std::fmt;

/// Static view of a signal as seen from compiled code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigRef {
    /// Storage slot.
    pub id: usize,
    /// Bit offset of the signal within its slot.
    pub base: u32,
    pub width: u32,
    /// Declared lsb index.
    pub lsb: i64,
    pub signed: bool,
}

pub trait Scope {
    fn lookup(&self, name: &str) -> Option<SigRef>;
}

/// Scope with no signals, for constant expressions.
pub struct NoSignals;

impl Scope for NoSignals {
    fn lookup(&self, _name: &str) -> Option<SigRef> {
        None
    }
}

pub trait Store {
    fn read(&self, id: usize, off: u32, width: u32) -> u128;
}

impl Store for NoSignals {
    fn read(&self, _id: usize, _off: u32, _width: u32) -> u128 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileError {
    Unresolved(String),
    TooWide(u32),
    KeyNotWired,
    BadSelect(String),
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompileError::Unresolved(n) => write!(f, "unresolved identifier `{n}`"),
            CompileError::TooWide(w) => {
                write!(f, "expression width {w} exceeds {MAX_VALUE_WIDTH} bits")
            }
            CompileError::KeyNotWired => f.write_str("key bits referenced before key port wiring"),
            CompileError::BadSelect(n) => write!(f, "select out of declared range on `{n}`"),
        }
    }
}

impl std::error::Error for CompileError {}

#[derive(Debug, Clone)]
enum Node {
    Const(u128),
    /// Static slice read; `signed` controls extension to the node width.
    Read {
        id: usize,
        off: u32,
        width: u32,
        signed: bool,
    },
    DynBit {
        id: usize,
        base: u32,
        sig_width: u32,
        lsb: i64,
        index: Box<CExpr>,
    },
    Unary(UnaryOp, Box<CExpr>),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>),
    Ternary(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Concat(Vec<CExpr>),
    Repeat(u32, Box<CExpr>),
}

/// A compiled expression node evaluated at `width` bits.
#[derive(Debug, Clone)]
pub struct CExpr {
    node: Node,
    pub width: u32,
    pub signed: bool,
}

/// Self-determined `(width, signed)` of an expression.
pub fn self_size(e: &Expr, scope: &dyn Scope) -> Result<(u32, bool), CompileError> {
    Ok(match &e.kind {
        ExprKind::Literal(l) => (l.width, l.signed),
        ExprKind::Ref { name, select } => {
            let s = scope.lookup(name).ok_or_else(|| CompileError::Unresolved(name.clone()))?;
            match select {
                None => (s.width, s.signed),
                Some(Select::Bit(_)) => (1, false),
                Some(Select::Part(msb, lsb)) => ((msb - lsb + 1) as u32, false),
            }
        }
        ExprKind::KeyBits { width, .. } => (*width, false),
        ExprKind::Unary(op, a) => match op {
            UnaryOp::Not | UnaryOp::Neg => self_size(a, scope)?,
            _ => (1, false),
        },
        ExprKind::Binary(op, l, r) => {
            let (lw, ls) = self_size(l, scope)?;
            let (rw, rs) = self_size(r, scope)?;
            if op.is_comparison() || op.is_logical() {
                (1, false)
            } else if op.is_shift() {
                (lw, ls)
            } else {
                (lw.max(rw), ls && rs)
            }
        }
        ExprKind::Ternary(_, t, f) => {
            let (tw, ts) = self_size(t, scope)?;
            let (fw, fs) = self_size(f, scope)?;
            (tw.max(fw), ts && fs)
        }
        ExprKind::Concat(parts) => {
            let mut w = 0;
            for p in parts {
                w += self_size(p, scope)?.0;
            }
            (w, false)
        }
        ExprKind::Repeat(n, inner) => (n * self_size(inner, scope)?.0, false),
    })
}

/// Compile `e` in its own self-determined context.
pub fn compile_self(e: &Expr, scope: &dyn Scope) -> Result<CExpr, CompileError> {
    let (w, s) = self_size(e, scope)?;
    compile(e, w, s, scope)
}

/// Compile `e` as the right-hand side of an assignment to `lhs_width` bits.
pub fn compile_assign_rhs(e: &Expr, lhs_width: u32, scope: &dyn Scope) -> Result<CExpr, CompileError> {
    let (w, s) = self_size(e, scope)?;
    compile(e, w.max(lhs_width), s, scope)
}

/// Compile `e` in a context of `width` bits with the given signedness.
pub fn compile(e: &Expr, width: u32, signed: bool, scope: &dyn Scope) -> Result<CExpr, CompileError> {
    if width > MAX_VALUE_WIDTH {
        return Err(CompileError::TooWide(width));
    }
    let node = match &e.kind {
        ExprKind::Literal(l) => {
            let v = if signed && l.signed { sext(l.value, l.width) & mask(width) } else { l.value };
            Node::Const(v & mask(width))
        }
        ExprKind::KeyBits { .. } => return Err(CompileError::KeyNotWired),
        ExprKind::Ref { name, select } => {
            let s = scope.lookup(name).ok_or_else(|| CompileError::Unresolved(name.clone()))?;
            match select {
                None => {
                    if s.width > MAX_VALUE_WIDTH {
                        return Err(CompileError::TooWide(s.width));
                    }
                    Node::Read { id: s.id, off: s.base, width: s.width, signed: signed && s.signed }
                }
                Some(Select::Part(msb, lsb)) => {
                    if *lsb < s.lsb || *msb >= s.lsb + s.width as i64 || msb < lsb {
                        return Err(CompileError::BadSelect(name.clone()));
                    }
                    Node::Read {
                        id: s.id,
                        off: s.base + (lsb - s.lsb) as u32,
                        width: (msb - lsb + 1) as u32,
                        signed: false,
                    }
                }
                Some(Select::Bit(idx)) => match const_index(idx) {
                    Some(i) => {
                        if i < s.lsb || i >= s.lsb + s.width as i64 {
                            Node::Const(0)
                        } else {
                            Node::Read { id: s.id, off: s.base + (i - s.lsb) as u32, width: 1, signed: false }
                        }
                    }
                    None => Node::DynBit {
                        id: s.id,
                        base: s.base,
                        sig_width: s.width,
                        lsb: s.lsb,
                        index: Box::new(compile_self(idx, scope)?),
                    },
                },
            }
        }
        ExprKind::Unary(op, a) => match op {
            UnaryOp::Not | UnaryOp::Neg => Node::Unary(*op, Box::new(compile(a, width, signed, scope)?)),
            _ => Node::Unary(*op, Box::new(compile_self(a, scope)?)),
        },
        ExprKind::Binary(op, l, r) => {
            if op.is_comparison() {
                let (lw, ls) = self_size(l, scope)?;
                let (rw, rs) = self_size(r, scope)?;
                let ow = lw.max(rw);
                let os = ls && rs;
                Node::Binary(*op, Box::new(compile(l, ow, os, scope)?), Box::new(compile(r, ow, os, scope)?))
            } else if op.is_logical() {
                Node::Binary(*op, Box::new(compile_self(l, scope)?), Box::new(compile_self(r, scope)?))
            } else if op.is_shift() {
                Node::Binary(*op, Box::new(compile(l, width, signed, scope)?), Box::new(compile_self(r, scope)?))
            } else {
                Node::Binary(
                    *op,
                    Box::new(compile(l, width, signed, scope)?),
                    Box::new(compile(r, width, signed, scope)?),
                )
            }
        }
        ExprKind::Ternary(c, t, f) => Node::Ternary(
            Box::new(compile_self(c, scope)?),
            Box::new(compile(t, width, signed, scope)?),
            Box::new(compile(f, width, signed, scope)?),
        ),
        ExprKind::Concat(parts) => {
            let parts = parts.iter().map(|p| compile_self(p, scope)).collect::<Result<Vec<_>, _>>()?;
            let total: u32 = parts.iter().map(|p| p.width).sum();
            if total > MAX_VALUE_WIDTH {
                return Err(CompileError::TooWide(total));
            }
            Node::Concat(parts)
        }
        ExprKind::Repeat(n, inner) => {
            let inner = compile_self(inner, scope)?;
            if n * inner.width > MAX_VALUE_WIDTH {
                return Err(CompileError::TooWide(n * inner.width));
            }
            Node::Repeat(*n, Box::new(inner))
        }
    };
    Ok(CExpr { node, width, signed })
}

fn const_index(e: &Expr) -> Option<i64> {
    let l = e.as_literal()?;
    Some(if l.signed { sext(l.value, l.width) as i64 } else { l.value as i64 })
}

/// Sign-extend the low `width` bits of `v` to 128 bits.
pub fn sext(v: u128, width: u32) -> u128 {
    if width == 0 || width >= 128 {
        return v;
    }
    if (v >> (width - 1)) & 1 == 1 {
        v | !mask(width)
    } else {
        v & mask(width)
    }
}

pub fn as_i128(v: u128, width: u32) -> i128 {
    sext(v, width) as i128
}

impl CExpr {
    pub fn eval(&self, st: &dyn Store) -> u128 {
        let w = self.width;
        let m = mask(w);
        match &self.node {
            Node::Const(v) => *v,
            Node::Read { id, off, width, signed } => {
                let v = st.read(*id, *off, *width);
                if *signed {
                    sext(v, *width) & m
                } else {
                    v
                }
            }
            Node::DynBit { id, base, sig_width, lsb, index } => {
                let iv = index.eval(st);
                let i = if index.signed { as_i128(iv, index.width) } else { iv as i128 };
                let rel = i - *lsb as i128;
                if rel < 0 || rel >= *sig_width as i128 {
                    0
                } else {
                    st.read(*id, base + rel as u32, 1)
                }
            }
            Node::Unary(op, a) => {
                let av = a.eval(st);
                match op {
                    UnaryOp::Not => !av & m,
                    UnaryOp::Neg => av.wrapping_neg() & m,
                    UnaryOp::LogNot => (av == 0) as u128,
                    UnaryOp::RedAnd => (av == mask(a.width)) as u128,
                    UnaryOp::RedOr => (av != 0) as u128,
                    UnaryOp::RedXor => (av.count_ones() & 1) as u128,
                }
            }
            Node::Binary(op, l, r) => {
                if op.is_logical() {
                    let lv = l.eval(st) != 0;
                    // both sides are side-effect free
                    let rv = r.eval(st) != 0;
                    return match op {
                        BinaryOp::LogAnd => (lv && rv) as u128,
                        _ => (lv || rv) as u128,
                    };
                }
                let a = l.eval(st);
                let b = r.eval(st);
                match op {
                    BinaryOp::Add => a.wrapping_add(b) & m,
                    BinaryOp::Sub => a.wrapping_sub(b) & m,
                    BinaryOp::Mul => a.wrapping_mul(b) & m,
                    BinaryOp::Div | BinaryOp::Mod => {
                        if b == 0 {
                            0
                        } else if self.signed {
                            let (x, y) = (as_i128(a, w), as_i128(b, w));
                            let q = if *op == BinaryOp::Div { x.wrapping_div(y) } else { x.wrapping_rem(y) };
                            (q as u128) & m
                        } else if *op == BinaryOp::Div {
                            a / b
                        } else {
                            a % b
                        }
                    }
                    BinaryOp::Shl => {
                        if b >= w as u128 {
                            0
                        } else {
                            (a << b) & m
                        }
                    }
                    BinaryOp::Shr => {
                        if b >= w as u128 {
                            0
                        } else {
                            a >> b
                        }
                    }
                    BinaryOp::And => a & b,
                    BinaryOp::Or => a | b,
                    BinaryOp::Xor => a ^ b,
                    BinaryOp::Xnor => !(a ^ b) & m,
                    BinaryOp::Eq => (a == b) as u128,
                    BinaryOp::Ne => (a != b) as u128,
                    BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                        let ord = if l.signed { as_i128(a, l.width).cmp(&as_i128(b, l.width)) } else { a.cmp(&b) };
                        let res = match op {
                            BinaryOp::Lt => ord.is_lt(),
                            BinaryOp::Le => ord.is_le(),
                            BinaryOp::Gt => ord.is_gt(),
                            _ => ord.is_ge(),
                        };
                        res as u128
                    }
                    BinaryOp::LogAnd | BinaryOp::LogOr => unreachable!(),
                }
            }
            Node::Ternary(c, t, f) => {
                if c.eval(st) != 0 {
                    t.eval(st)
                } else {
                    f.eval(st)
                }
            }
            Node::Concat(parts) => {
                let mut v: u128 = 0;
                for p in parts {
                    v = if p.width >= 128 { 0 } else { v << p.width };
                    v |= p.eval(st);
                }
                v & m
            }
            Node::Repeat(n, inner) => {
                let iv = inner.eval(st);
                let mut v: u128 = 0;
                for _ in 0..*n {
                    v = if inner.width >= 128 { 0 } else { v << inner.width };
                    v |= iv;
                }
                v & m
            }
        }
    }
}

/// Evaluate a constant expression in its self-determined context.
pub fn eval_const(e: &Expr) -> Result<(u128, u32, bool), CompileError> {
    let c = compile_self(e, &NoSignals)?;
    Ok((c.eval(&NoSignals), c.width, c.signed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::{Base, Literal};

    fn lit(w: u32, v: u128) -> Expr {
        Expr::lit(Literal::sized(w, v, Base::Dec))
    }

    #[test]
    fn context_width_keeps_carry() {
        // 4'd15 + 4'd1 in a 5-bit assignment context is 16
        let e = Expr::binary(BinaryOp::Add, lit(4, 15), lit(4, 1));
        let c = compile_assign_rhs(&e, 5, &NoSignals).unwrap();
        assert_eq!(c.eval(&NoSignals), 16);
        let c = compile_assign_rhs(&e, 4, &NoSignals).unwrap();
        assert_eq!(c.eval(&NoSignals), 0);
    }

    #[test]
    fn signed_integer_arithmetic() {
        let e = Expr::binary(BinaryOp::Sub, Expr::lit(Literal::integer(3)), Expr::lit(Literal::integer(5)));
        let (v, w, s) = eval_const(&e).unwrap();
        assert_eq!((w, s), (32, true));
        assert_eq!(sext(v, 32) as i128, -2);
        let e = Expr::binary(BinaryOp::Lt, e, Expr::lit(Literal::integer(0)));
        assert_eq!(eval_const(&e).unwrap().0, 1);
        // mixing with an unsigned operand makes the comparison unsigned
        let e = Expr::binary(
            BinaryOp::Lt,
            Expr::binary(BinaryOp::Sub, Expr::lit(Literal::integer(3)), Expr::lit(Literal::integer(5))),
            lit(8, 0),
        );
        assert_eq!(eval_const(&e).unwrap().0, 0);
    }

    #[test]
    fn division_by_zero_is_zero() {
        let e = Expr::binary(BinaryOp::Div, lit(8, 9), lit(8, 0));
        assert_eq!(eval_const(&e).unwrap().0, 0);
    }

    #[test]
    fn concat_and_repeat() {
        let e = Expr::new(ExprKind::Concat(vec![lit(2, 0b10), lit(3, 0b011)]), Default::default());
        assert_eq!(eval_const(&e).unwrap(), (0b10011, 5, false));
        let e = Expr::repeat(3, lit(2, 0b01));
        assert_eq!(eval_const(&e).unwrap(), (0b010101, 6, false));
    }
}
