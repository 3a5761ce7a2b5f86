// SPDX-License-Identifier: Apache-2.0

//! Deterministic Verilog text generation.
//!
//! Output is ANSI-style, four-space indented, one declaration per line.
//! Parenthesization is canonical: a nested binary operator is wrapped when
//! precedence requires it or when it belongs to a different operator family
//! than its parent (so `(a + b) & m` rather than `a + b & m`); relational
//! operands of `&&`/`||` and arithmetic operands of relations are left bare.

use std::fmt::Write;

use crate::frontend::ast::*;

const INDENT: &str = "    ";
const SKIP_ATTR: &str = "(* assure_skip *)";

pub fn emit(design: &SourceUnit) -> String {
    let mut out = String::new();
    for (i, m) in design.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        emit_module(m, &mut out);
    }
    out
}

pub fn emit_module(m: &ModuleDecl, out: &mut String) {
    if m.skip {
        out.push_str(SKIP_ATTR);
        out.push('\n');
    }
    if m.ports.is_empty() {
        let _ = writeln!(out, "module {};", m.name);
    } else {
        let _ = writeln!(out, "module {} (", m.name);
        for (i, p) in m.ports.iter().enumerate() {
            let sep = if i + 1 < m.ports.len() { "," } else { "" };
            let kind = match (p.dir, p.kind) {
                (_, NetKind::Integer) => " integer",
                (Direction::Output, NetKind::Reg) => " reg",
                (_, NetKind::Reg) => " reg",
                _ => "",
            };
            let _ = writeln!(
                out,
                "{INDENT}{}{kind}{}{}{} {}{sep}",
                p.dir.keyword(),
                if p.signed && p.kind != NetKind::Integer { " signed" } else { "" },
                if p.range.is_some() { " " } else { "" },
                p.range.map(range).unwrap_or_default(),
                p.name
            );
        }
        out.push_str(");\n");
    }
    if !m.nets.is_empty() {
        for n in &m.nets {
            let kw = match n.kind {
                NetKind::Wire => "wire",
                NetKind::Reg => "reg",
                NetKind::Integer => "integer",
            };
            let signed = if n.signed && n.kind != NetKind::Integer { " signed" } else { "" };
            let r = n.range.map(|r| format!(" {}", range(r))).unwrap_or_default();
            let _ = writeln!(out, "{INDENT}{kw}{signed}{r} {};", n.name);
        }
    }
    for item in &m.items {
        out.push('\n');
        emit_item(item, out);
    }
    out.push_str("endmodule\n");
}

fn range(r: Range) -> String {
    format!("[{}:{}]", r.msb, r.lsb)
}

fn emit_item(item: &ModuleItem, out: &mut String) {
    out.push_str(INDENT);
    if item.skip {
        out.push_str(SKIP_ATTR);
        out.push(' ');
    }
    match &item.kind {
        ItemKind::Assign { lhs, rhs } => {
            let _ = writeln!(out, "assign {} = {};", expr(lhs), expr(rhs));
        }
        ItemKind::Always(a) => {
            out.push_str("always ");
            match &a.sensitivity {
                Sensitivity::Star => out.push_str("@*"),
                Sensitivity::Edges(evs) => {
                    let list: Vec<String> = evs
                        .iter()
                        .map(|e| {
                            let kw = match e.edge {
                                Edge::Pos => "posedge",
                                Edge::Neg => "negedge",
                            };
                            format!("{kw} {}", e.signal)
                        })
                        .collect();
                    let _ = write!(out, "@({})", list.join(" or "));
                }
            }
            stmt_tail(&a.body, 2, out);
            out.push('\n');
        }
        ItemKind::Instance(inst) => {
            if inst.connections.is_empty() {
                let _ = writeln!(out, "{} {} ();", inst.module, inst.name);
                return;
            }
            let _ = writeln!(out, "{} {} (", inst.module, inst.name);
            for (i, c) in inst.connections.iter().enumerate() {
                let sep = if i + 1 < inst.connections.len() { "," } else { "" };
                let e = c.expr.as_ref().map(expr).unwrap_or_default();
                let _ = writeln!(out, "{INDENT}{INDENT}.{}({e}){sep}", c.port);
            }
            let _ = writeln!(out, "{INDENT});");
        }
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

/// Emit a statement on its own line(s).
fn stmt_line(s: &Stmt, level: usize, out: &mut String) {
    indent(level, out);
    stmt_inline(s, level, out);
    out.push('\n');
}

/// Emit a statement that continues the current line (after `if (...)`,
/// `else`, `@*`, a case label). Blocks stay on the line; anything else goes
/// to a fresh, deeper-indented line.
fn stmt_tail(s: &Stmt, level: usize, out: &mut String) {
    if matches!(s.kind, StmtKind::Block { .. }) && !s.skip {
        out.push(' ');
        stmt_inline(s, level - 1, out);
    } else {
        out.push('\n');
        indent(level, out);
        stmt_inline(s, level, out);
    }
}

/// Statement text starting at the current position; the caller has emitted
/// indentation for `level` and handles the trailing newline.
fn stmt_inline(s: &Stmt, level: usize, out: &mut String) {
    if s.skip {
        out.push_str(SKIP_ATTR);
        out.push(' ');
    }
    match &s.kind {
        StmtKind::Null => out.push(';'),
        StmtKind::Block { label, stmts } => {
            out.push_str("begin");
            if let Some(l) = label {
                let _ = write!(out, " : {l}");
            }
            out.push('\n');
            for st in stmts {
                stmt_line(st, level + 1, out);
            }
            indent(level, out);
            out.push_str("end");
        }
        StmtKind::Assign { lhs, rhs, blocking } => {
            let op = if *blocking { "=" } else { "<=" };
            let _ = write!(out, "{} {op} {};", expr(lhs), expr(rhs));
        }
        StmtKind::If { cond, then_s, else_s } => {
            let _ = write!(out, "if ({})", expr(cond));
            stmt_tail(then_s, level + 1, out);
            if let Some(e) = else_s {
                if matches!(then_s.kind, StmtKind::Block { .. }) && !then_s.skip {
                    out.push_str(" else");
                } else {
                    out.push('\n');
                    indent(level, out);
                    out.push_str("else");
                }
                if matches!(e.kind, StmtKind::If { .. }) && !e.skip {
                    out.push(' ');
                    stmt_inline(e, level, out);
                } else {
                    stmt_tail(e, level + 1, out);
                }
            }
        }
        StmtKind::Case { kind, selector, items, default } => {
            let kw = match kind {
                CaseKind::Case => "case",
                CaseKind::Casez => "casez",
            };
            let _ = writeln!(out, "{kw} ({})", expr(selector));
            for it in items {
                indent(level + 1, out);
                let labels: Vec<String> = it.labels.iter().map(case_label).collect();
                let _ = write!(out, "{}:", labels.join(", "));
                stmt_tail(&it.body, level + 2, out);
                out.push('\n');
            }
            if let Some(d) = default {
                indent(level + 1, out);
                out.push_str("default:");
                stmt_tail(d, level + 2, out);
                out.push('\n');
            }
            indent(level, out);
            out.push_str("endcase");
        }
        StmtKind::For { var, init, cond, step, body } => {
            let _ = write!(out, "for ({var} = {}; {}; {var} = {})", expr(init), expr(cond), expr(step));
            stmt_tail(body, level + 1, out);
        }
    }
}

fn case_label(l: &CaseLabel) -> String {
    match l {
        CaseLabel::Expr(e) => expr(e),
        CaseLabel::Pattern(p) => {
            let mut s = format!("{}'b", p.width);
            for i in (0..p.width).rev() {
                s.push(if (p.care >> i) & 1 == 0 {
                    '?'
                } else if (p.value >> i) & 1 == 1 {
                    '1'
                } else {
                    '0'
                });
            }
            s
        }
    }
}

pub fn literal(l: &Literal) -> String {
    if !l.sized && l.width == 32 && l.signed && l.value >> 31 == 0 {
        return l.value.to_string();
    }
    let s = if l.signed { "s" } else { "" };
    let w = l.width;
    match l.base {
        Base::Bin => format!("{w}'{s}b{:0width$b}", l.value, width = w as usize),
        Base::Oct => format!("{w}'{s}o{:o}", l.value),
        Base::Dec => format!("{w}'{s}d{}", l.value),
        Base::Hex => format!("{w}'{s}h{:0width$x}", l.value, width = w.div_ceil(4) as usize),
    }
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Family {
    Arith,
    Shift,
    Rel,
    Bit,
    Logic,
}

fn family(op: BinaryOp) -> Family {
    use BinaryOp::*;
    match op {
        Add | Sub | Mul | Div | Mod => Family::Arith,
        Shl | Shr => Family::Shift,
        Eq | Ne | Lt | Le | Gt | Ge => Family::Rel,
        And | Or | Xor | Xnor => Family::Bit,
        LogAnd | LogOr => Family::Logic,
    }
}

fn needs_parens(parent: BinaryOp, child: &Expr, right: bool) -> bool {
    match &child.kind {
        ExprKind::Ternary(..) => true,
        ExprKind::Binary(cop, _, _) => {
            let (pf, cf) = (family(parent), family(*cop));
            if pf != cf {
                let bare = matches!((pf, cf), (Family::Logic, Family::Rel) | (Family::Rel, Family::Arith));
                !bare || cop.precedence() <= parent.precedence()
            } else {
                cop.precedence() < parent.precedence() || (right && cop.precedence() <= parent.precedence())
            }
        }
        _ => false,
    }
}

fn operand(parent: BinaryOp, e: &Expr, right: bool) -> String {
    if needs_parens(parent, e, right) {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

fn is_primary(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Literal(_)
            | ExprKind::Ref { .. }
            | ExprKind::KeyBits { .. }
            | ExprKind::Concat(_)
            | ExprKind::Repeat(..)
    )
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Literal(l) => literal(l),
        ExprKind::Ref { name, select } => match select {
            None => name.clone(),
            Some(Select::Bit(i)) => format!("{name}[{}]", expr(i)),
            Some(Select::Part(m, l)) => format!("{name}[{m}:{l}]"),
        },
        ExprKind::KeyBits { lsb, width } => {
            if *width == 1 {
                format!("key_in[{lsb}]")
            } else {
                format!("key_in[{}:{lsb}]", lsb + *width as u64 - 1)
            }
        }
        ExprKind::Unary(op, a) => {
            if is_primary(a) {
                format!("{}{}", op.symbol(), expr(a))
            } else {
                format!("{}({})", op.symbol(), expr(a))
            }
        }
        ExprKind::Binary(op, l, r) => {
            format!("{} {} {}", operand(*op, l, false), op.symbol(), operand(*op, r, true))
        }
        ExprKind::Ternary(c, t, f) => {
            let c = if is_primary(c) { expr(c) } else { format!("({})", expr(c)) };
            let arm =
                |x: &Expr| if matches!(x.kind, ExprKind::Ternary(..)) { format!("({})", expr(x)) } else { expr(x) };
            format!("{c} ? {} : {}", arm(t), arm(f))
        }
        ExprKind::Concat(parts) => {
            let v: Vec<String> = parts.iter().map(expr).collect();
            format!("{{{}}}", v.join(", "))
        }
        ExprKind::Repeat(n, inner) => {
            let body = match &inner.kind {
                ExprKind::Concat(_) => expr(inner),
                _ => format!("{{{}}}", expr(inner)),
            };
            format!("{{{n}{body}}}")
        }
    }
}
