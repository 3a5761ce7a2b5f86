// SPDX-License-Identifier: Apache-2.0

//! Dummy operator selection for operation locking.
//!
//! Every operator has a primary partner of the same complexity class. The
//! primary is chosen whenever it is legal; otherwise the PRNG picks among
//! the legal fallbacks. A candidate is legal when no collision rule rejects
//! it and a probe over the operand value space finds at least one input on
//! which original and dummy differ in the demanded result bits.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analyze::OpShape;
use crate::frontend::ast::{mask, BinaryOp, Expr, ExprKind};
use crate::sim::expr::{compile, Scope, SigRef, Store};

use BinaryOp::*;

/// Candidate dummies per operator: primary first, then fallbacks.
pub struct DummyOpTable;

impl DummyOpTable {
    pub fn candidates(op: BinaryOp) -> &'static [BinaryOp] {
        match op {
            Add => &[Sub, Xor, Xnor],
            Sub => &[Add, Xor, Xnor],
            Mul => &[Div, Add],
            Div => &[Mul, Mod],
            Mod => &[Div, Mul],
            Shl => &[Shr],
            Shr => &[Shl],
            And => &[Or, Xor],
            Or => &[And, Xor],
            Xor => &[Xnor, And, Or],
            Xnor => &[Xor, And, Or],
            Lt => &[Ge, Gt, Le],
            Ge => &[Lt, Le, Gt],
            Gt => &[Le, Lt, Ge],
            Le => &[Gt, Ge, Lt],
            Eq => &[Ne, Lt, Gt],
            Ne => &[Eq, Lt, Gt],
            LogAnd => &[LogOr],
            LogOr => &[LogAnd],
        }
    }
}

fn is_one(e: &Expr) -> bool {
    e.as_literal().is_some_and(|l| l.value == 1)
}

/// Static collision rules, independent of operand values.
pub fn rule_allows(op: BinaryOp, dummy: BinaryOp, l: &Expr, r: &Expr) -> bool {
    let additive = |o: BinaryOp| matches!(o, Add | Sub);
    let literal_operand = l.as_literal().is_some() || r.as_literal().is_some();
    // A wrong bit would be undone by supplying the two's complement of the constant.
    if additive(op) && additive(dummy) && literal_operand {
        return false;
    }
    // Multiplying by one is an obvious fake for an increment.
    if op == Add && dummy == Mul && (is_one(l) || is_one(r)) {
        return false;
    }
    op != dummy
}

/// Dummies that pass the collision rules and the difference probe, in
/// table order.
pub fn legal_dummies(op: BinaryOp, l: &Expr, r: &Expr, shape: &OpShape) -> Vec<BinaryOp> {
    DummyOpTable::candidates(op)
        .iter()
        .copied()
        .filter(|&d| rule_allows(op, d, l, r) && distinguishable(op, d, l, r, shape))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoSafeDummy;

/// Pick the dummy for an operation site. The primary partner wins when
/// legal; otherwise `rng` chooses among the legal fallbacks.
pub fn select_dummy<R: Rng>(
    op: BinaryOp,
    l: &Expr,
    r: &Expr,
    shape: &OpShape,
    rng: &mut R,
) -> Result<BinaryOp, NoSafeDummy> {
    let legal = legal_dummies(op, l, r, shape);
    let primary = DummyOpTable::candidates(op)[0];
    if legal.first() == Some(&primary) {
        return Ok(primary);
    }
    match legal.len() {
        0 => Err(NoSafeDummy),
        n => Ok(legal[rng.random_range(0..n)]),
    }
}

/// Two free operands named `l` and `r` stored in slots 0 and 1.
struct Operands {
    left: (u32, bool),
    right: (u32, bool),
}

impl Scope for Operands {
    fn lookup(&self, name: &str) -> Option<SigRef> {
        let (id, (width, signed)) = match name {
            "l" => (0, self.left),
            "r" => (1, self.right),
            _ => return None,
        };
        Some(SigRef { id, base: 0, width, lsb: 0, signed })
    }
}

struct Values([u128; 2]);

impl Store for Values {
    fn read(&self, id: usize, off: u32, width: u32) -> u128 {
        (self.0[id] >> off) & mask(width)
    }
}

const PROBE_EXHAUSTIVE_BITS: u32 = 16;
const PROBE_SAMPLES: usize = 4096;

/// Whether `op` and `dummy` differ on the demanded bits for some operand
/// values. Literal operands keep their value; structurally equal operands
/// share one variable.
fn distinguishable(op: BinaryOp, dummy: BinaryOp, l: &Expr, r: &Expr, shape: &OpShape) -> bool {
    let same = l == r;
    let free = |e: &Expr, name: &str| -> Expr {
        match e.kind {
            ExprKind::Literal(_) => e.clone(),
            _ => Expr::ident(name),
        }
    };
    let lf = free(l, "l");
    let rf = if same { lf.clone() } else { free(r, "r") };
    let scope = Operands { left: shape.left, right: shape.right };
    let build = |o: BinaryOp| {
        compile(&Expr::binary(o, lf.clone(), rf.clone()), shape.context_width, shape.context_signed, &scope)
    };
    let (Ok(a), Ok(b)) = (build(op), build(dummy)) else { return true };
    let dmask = mask(shape.demand);
    let differs = |lv: u128, rv: u128| {
        let st = Values([lv, if same { lv } else { rv }]);
        (a.eval(&st) ^ b.eval(&st)) & dmask != 0
    };

    let lbits = if matches!(lf.kind, ExprKind::Literal(_)) { 0 } else { shape.left.0 };
    let rbits = if same || matches!(rf.kind, ExprKind::Literal(_)) { 0 } else { shape.right.0 };
    if lbits + rbits <= PROBE_EXHAUSTIVE_BITS {
        for lv in 0..(1u128 << lbits) {
            for rv in 0..(1u128 << rbits) {
                if differs(lv, rv) {
                    return true;
                }
            }
        }
        return false;
    }
    let specials = |w: u32| [0, 1, mask(w), 1u128 << (w - 1), mask(w) >> 1];
    for lv in specials(shape.left.0.max(1)) {
        for rv in specials(shape.right.0.max(1)) {
            if differs(lv, rv) {
                return true;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..PROBE_SAMPLES)
        .any(|_| differs(rng.random::<u128>() & mask(lbits.max(1)), rng.random::<u128>() & mask(rbits.max(1))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::Literal;

    fn shape(w: u32) -> OpShape {
        OpShape { context_width: w, context_signed: false, demand: w, left: (w, false), right: (w, false) }
    }

    #[test]
    fn nets_get_primary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = select_dummy(Add, &Expr::ident("a"), &Expr::ident("b"), &shape(8), &mut rng).unwrap();
        assert_eq!(d, Sub);
    }

    #[test]
    fn literal_operand_forbids_subtraction() {
        let seven = Expr::lit(Literal::sized(8, 7, crate::frontend::ast::Base::Dec));
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = select_dummy(Add, &Expr::ident("a"), &seven, &shape(8), &mut rng).unwrap();
            assert!(matches!(d, Xor | Xnor), "{d:?}");
        }
    }

    #[test]
    fn increment_never_multiplied() {
        assert!(!rule_allows(Add, Mul, &Expr::ident("a"), &Expr::lit(Literal::integer(1))));
    }

    #[test]
    fn identical_operands_filter_and_or() {
        let a = Expr::ident("a");
        assert_eq!(legal_dummies(And, &a, &a, &shape(4)), [Xor]);
    }

    #[test]
    fn one_bit_add_collides_with_sub_and_xor() {
        let mut s = shape(4);
        s.demand = 1;
        assert_eq!(legal_dummies(Add, &Expr::ident("a"), &Expr::ident("b"), &s), [Xnor]);
    }

    #[test]
    fn wide_operands_probe_by_sampling() {
        assert_eq!(legal_dummies(Add, &Expr::ident("a"), &Expr::ident("b"), &shape(32)), [Sub, Xor, Xnor]);
    }

    #[test]
    fn shift_by_literal_zero_has_no_dummy() {
        let zero = Expr::lit(Literal::sized(3, 0, crate::frontend::ast::Base::Dec));
        let mut s = shape(8);
        s.right = (3, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_dummy(Shl, &Expr::ident("a"), &zero, &s, &mut rng), Err(NoSafeDummy));
    }
}
