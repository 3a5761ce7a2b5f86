// SPDX-License-Identifier: Apache-2.0

//! Structural checks run after parsing.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::FrontendError;

pub(super) fn source_unit(modules: Vec<ModuleDecl>, top: Option<&str>) -> Result<SourceUnit, FrontendError> {
    let mut seen = HashSet::new();
    for m in &modules {
        if !seen.insert(m.name.as_str()) {
            return Err(FrontendError::invalid(m.span, format!("module `{}` defined twice", m.name)));
        }
    }
    for m in &modules {
        module(m, &modules)?;
    }
    check_acyclic(&modules)?;

    let top_name = match top {
        Some(t) => {
            if !modules.iter().any(|m| m.name == t) {
                return Err(FrontendError::invalid(Span::default(), format!("top module `{t}` not found")));
            }
            t.to_string()
        }
        None => {
            let instantiated: HashSet<&str> =
                modules.iter().flat_map(|m| m.instances().map(|i| i.module.as_str())).collect();
            let roots: Vec<&str> =
                modules.iter().map(|m| m.name.as_str()).filter(|n| !instantiated.contains(n)).collect();
            match roots.as_slice() {
                [one] => one.to_string(),
                [] => return Err(FrontendError::invalid(Span::default(), "no modules in input")),
                _ => {
                    return Err(FrontendError::invalid(
                        Span::default(),
                        format!("several candidate top modules ({}); pass one explicitly", roots.join(", ")),
                    ))
                }
            }
        }
    };
    Ok(SourceUnit { modules, top_name })
}

fn check_acyclic(modules: &[ModuleDecl]) -> Result<(), FrontendError> {
    let idx: HashMap<&str, usize> = modules.iter().enumerate().map(|(i, m)| (m.name.as_str(), i)).collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; modules.len()];
    fn visit(
        i: usize,
        modules: &[ModuleDecl],
        idx: &HashMap<&str, usize>,
        state: &mut [u8],
    ) -> Result<(), FrontendError> {
        state[i] = 1;
        for inst in modules[i].instances() {
            let j = idx[inst.module.as_str()];
            match state[j] {
                1 => {
                    return Err(FrontendError::invalid(
                        modules[i].span,
                        format!("recursive instantiation through `{}`", modules[j].name),
                    ))
                }
                0 => visit(j, modules, idx, state)?,
                _ => {}
            }
        }
        state[i] = 2;
        Ok(())
    }
    for i in 0..modules.len() {
        if state[i] == 0 {
            visit(i, modules, &idx, &mut state)?;
        }
    }
    Ok(())
}

fn module(m: &ModuleDecl, all: &[ModuleDecl]) -> Result<(), FrontendError> {
    let mut names: BTreeMap<&str, Span> = BTreeMap::new();
    for (n, sp) in m.ports.iter().map(|p| (&p.name, p.span)).chain(m.nets.iter().map(|n| (&n.name, n.span))) {
        if names.insert(n.as_str(), sp).is_some() {
            return Err(FrontendError::invalid(sp, format!("`{n}` declared twice")));
        }
    }

    let mut inst_names = HashSet::new();
    for item in &m.items {
        match &item.kind {
            ItemKind::Assign { lhs, rhs } => {
                check_expr(m, rhs)?;
                check_lvalue(m, lhs, LvalueCtx::Continuous)?;
            }
            ItemKind::Always(a) => {
                let clocked = match &a.sensitivity {
                    Sensitivity::Star => false,
                    Sensitivity::Edges(evs) => {
                        for ev in evs {
                            let s = m.signal(&ev.signal).ok_or_else(|| {
                                FrontendError::invalid(ev.span, format!("undeclared identifier `{}`", ev.signal))
                            })?;
                            if s.width != 1 {
                                return Err(FrontendError::invalid(ev.span, "edge event on a multi-bit signal"));
                            }
                        }
                        true
                    }
                };
                check_stmt(m, &a.body, clocked)?;
            }
            ItemKind::Instance(inst) => {
                if !inst_names.insert(inst.name.as_str()) {
                    return Err(FrontendError::invalid(item.span, format!("instance `{}` declared twice", inst.name)));
                }
                let child = all
                    .iter()
                    .find(|c| c.name == inst.module)
                    .ok_or_else(|| FrontendError::invalid(item.span, format!("unknown module `{}`", inst.module)))?;
                let mut connected = HashSet::new();
                for c in &inst.connections {
                    let port = child.port(&c.port).ok_or_else(|| {
                        FrontendError::invalid(c.span, format!("module `{}` has no port `{}`", child.name, c.port))
                    })?;
                    if !connected.insert(c.port.as_str()) {
                        return Err(FrontendError::invalid(c.span, format!("port `{}` connected twice", c.port)));
                    }
                    if let Some(e) = &c.expr {
                        match port.dir {
                            Direction::Input => check_expr(m, e)?,
                            _ => check_lvalue(m, e, LvalueCtx::Continuous)?,
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LvalueCtx {
    Continuous,
    Procedural,
}

fn undeclared(e: &Expr, name: &str) -> FrontendError {
    FrontendError::invalid(e.span, format!("undeclared identifier `{name}`"))
}

fn check_expr(m: &ModuleDecl, e: &Expr) -> Result<(), FrontendError> {
    let mut res = Ok(());
    e.walk(&mut |x| {
        if res.is_err() {
            return;
        }
        if let ExprKind::Ref { name, select } = &x.kind {
            match m.signal(name) {
                None => res = Err(undeclared(x, name)),
                Some(s) => {
                    if let Some(Select::Part(msb, lsb)) = select {
                        if *lsb < s.lsb || *msb >= s.lsb + s.width as i64 {
                            res = Err(FrontendError::invalid(x.span, format!("part-select out of range on `{name}`")));
                        }
                    }
                }
            }
        }
    });
    res
}

fn check_lvalue(m: &ModuleDecl, e: &Expr, ctx: LvalueCtx) -> Result<(), FrontendError> {
    match &e.kind {
        ExprKind::Concat(parts) => parts.iter().try_for_each(|p| check_lvalue(m, p, ctx)),
        ExprKind::Ref { name, select } => {
            let s = m.signal(name).ok_or_else(|| undeclared(e, name))?;
            if s.dir == Some(Direction::Input) {
                return Err(FrontendError::invalid(e.span, format!("assignment to input `{name}`")));
            }
            match (ctx, s.kind) {
                (LvalueCtx::Continuous, NetKind::Wire) | (LvalueCtx::Procedural, NetKind::Reg | NetKind::Integer) => {}
                (LvalueCtx::Continuous, _) => {
                    return Err(FrontendError::invalid(e.span, format!("continuous assignment to variable `{name}`")))
                }
                (LvalueCtx::Procedural, _) => {
                    return Err(FrontendError::invalid(e.span, format!("procedural assignment to net `{name}`")))
                }
            }
            if let Some(sel) = select {
                match sel {
                    Select::Bit(i) => check_expr(m, i)?,
                    Select::Part(msb, lsb) => {
                        if *lsb < s.lsb || *msb >= s.lsb + s.width as i64 {
                            return Err(FrontendError::invalid(
                                e.span,
                                format!("part-select out of range on `{name}`"),
                            ));
                        }
                    }
                }
            }
            Ok(())
        }
        _ => Err(FrontendError::invalid(e.span, "expression is not assignable")),
    }
}

fn check_stmt(m: &ModuleDecl, s: &Stmt, clocked: bool) -> Result<(), FrontendError> {
    match &s.kind {
        StmtKind::Null => Ok(()),
        StmtKind::Block { stmts, .. } => stmts.iter().try_for_each(|x| check_stmt(m, x, clocked)),
        StmtKind::Assign { lhs, rhs, blocking } => {
            if clocked && *blocking {
                return Err(FrontendError::Unsupported {
                    name: "blocking assignment in edge-triggered block".into(),
                    line: s.span.line,
                });
            }
            if !clocked && !*blocking {
                return Err(FrontendError::Unsupported {
                    name: "nonblocking assignment in combinational block".into(),
                    line: s.span.line,
                });
            }
            check_expr(m, rhs)?;
            check_lvalue(m, lhs, LvalueCtx::Procedural)
        }
        StmtKind::If { cond, then_s, else_s } => {
            check_expr(m, cond)?;
            check_stmt(m, then_s, clocked)?;
            if let Some(e) = else_s {
                check_stmt(m, e, clocked)?;
            }
            Ok(())
        }
        StmtKind::Case { selector, items, default, .. } => {
            check_expr(m, selector)?;
            for it in items {
                for l in &it.labels {
                    if let CaseLabel::Expr(e) = l {
                        check_expr(m, e)?;
                    }
                }
                check_stmt(m, &it.body, clocked)?;
            }
            if let Some(d) = default {
                check_stmt(m, d, clocked)?;
            }
            Ok(())
        }
        StmtKind::For { var, init, cond, step, body } => {
            let sig = m
                .signal(var)
                .ok_or_else(|| FrontendError::invalid(s.span, format!("undeclared loop variable `{var}`")))?;
            if sig.kind == NetKind::Wire {
                return Err(FrontendError::invalid(s.span, format!("loop variable `{var}` must be a variable")));
            }
            check_expr(m, init)?;
            check_expr(m, cond)?;
            check_expr(m, step)?;
            check_stmt(m, body, clocked)
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::frontend::{parse, parse_with_top, FrontendError};

    fn invalid(src: &str) -> String {
        match parse(src) {
            Err(FrontendError::Invalid { msg, .. }) => msg,
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn undeclared_identifier() {
        assert!(invalid("module m(output y); assign y = q; endmodule").contains("undeclared"));
    }

    #[test]
    fn cyclic_instantiation() {
        assert!(invalid("module a; b u(); endmodule module b; a u(); endmodule").contains("recursive"));
    }

    #[test]
    fn top_selection() {
        let src = "module leaf(input a, output y); assign y = a; endmodule \
                   module root(input a, output y); leaf u(.a(a), .y(y)); endmodule";
        assert_eq!(parse(src).unwrap().top_name, "root");
        assert_eq!(parse_with_top(src, Some("leaf")).unwrap().top_name, "leaf");
        assert!(invalid("module a; endmodule module b; endmodule").contains("several"));
    }

    #[test]
    fn blocking_rules() {
        assert!(matches!(
            parse("module m(input clk, input d, output reg q); always @(posedge clk) q = d; endmodule"),
            Err(FrontendError::Unsupported { .. })
        ));
        assert!(matches!(
            parse("module m(input d, output reg q); always @* q <= d; endmodule"),
            Err(FrontendError::Unsupported { .. })
        ));
    }

    #[test]
    fn net_kind_rules() {
        assert!(invalid("module m(input d, output reg q); assign q = d; endmodule").contains("variable"));
        assert!(invalid("module m(input d, output q); always @* q = d; endmodule").contains("net"));
    }
}
