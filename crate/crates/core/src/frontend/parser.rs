// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the Verilog subset.
//!
//! Parameters, localparams and genvars are elaborated while parsing: a
//! reference to one of them becomes a literal, and any operator whose operands
//! are all constants (with at least one parameter among them) is folded into a
//! single literal at its self-determined width. Generate `for` loops are
//! unrolled. The resulting tree therefore contains no parameter identifiers.

use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, NumTok, Tok, Token};
use super::validate;
use super::FrontendError;
use crate::sim::expr::{eval_const, sext};

const MAX_GENERATE_ITERATIONS: i64 = 1 << 16;

/// Parse a translation unit; the top module is the unique module that no
/// other module instantiates.
pub fn parse(text: &str) -> Result<SourceUnit, FrontendError> {
    parse_with_top(text, None)
}

/// Parse a translation unit with an explicit top module.
pub fn parse_with_top(text: &str, top: Option<&str>) -> Result<SourceUnit, FrontendError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { toks: tokens, pos: 0, consts: HashMap::new() };
    let mut modules = Vec::new();
    loop {
        let skip = p.pragmas();
        if p.at_eof() {
            break;
        }
        let mut m = p.module()?;
        m.skip |= skip;
        modules.push(m);
    }
    validate::source_unit(modules, top)
}

/// Constness class of a parsed expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cls {
    /// Mentions a signal.
    Dynamic,
    /// Only written literals.
    Lit,
    /// Constant, derived from at least one parameter or genvar.
    Param,
}

impl Cls {
    fn join(self, other: Cls) -> Cls {
        match (self, other) {
            (Cls::Dynamic, _) | (_, Cls::Dynamic) => Cls::Dynamic,
            (Cls::Param, _) | (_, Cls::Param) => Cls::Param,
            _ => Cls::Lit,
        }
    }
}

struct PExpr {
    e: Expr,
    cls: Cls,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Parameters and live genvars of the module being parsed.
    consts: HashMap<String, Literal>,
}

/// Header port as written before its declaration is seen.
struct PendingPort {
    name: String,
    span: Span,
    decl: Option<Port>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: impl Into<String>) -> FrontendError {
        let sp = self.span();
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(_) => "number".to_string(),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::SkipPragma => "pragma".to_string(),
            Tok::Eof => "end of input".to_string(),
        };
        FrontendError::Syntax { line: sp.line, col: sp.col, expected: format!("{}, found {found}", expected.into()) }
    }

    fn unsupported(&self, name: impl Into<String>) -> FrontendError {
        FrontendError::Unsupported { name: name.into(), line: self.span().line }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<Span, FrontendError> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            Err(self.err(format!("`{s}`")))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<Span, FrontendError> {
        if self.is_kw(s) {
            Ok(self.bump().span)
        } else {
            Err(self.err(format!("`{s}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => Err(self.err("identifier")),
        }
    }

    /// Consume any skip pragmas; true if at least one was present.
    fn pragmas(&mut self) -> bool {
        let mut any = false;
        while matches!(self.peek(), Tok::SkipPragma) {
            self.bump();
            any = true;
        }
        any
    }

    // ---------------------------------------------------------------- modules

    fn module(&mut self) -> Result<ModuleDecl, FrontendError> {
        if self.is_kw("macromodule") {
            return Err(self.unsupported("macromodule"));
        }
        let span = self.expect_kw("module")?;
        let (name, _) = self.ident()?;
        self.consts.clear();

        if self.eat_sym("#") {
            self.expect_sym("(")?;
            loop {
                if self.is_kw("parameter") {
                    self.bump();
                }
                self.param_assign()?;
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
        }

        let mut pending: Vec<PendingPort> = Vec::new();
        if self.eat_sym("(") {
            if !self.is_sym(")") {
                if self.is_direction() {
                    self.ansi_ports(&mut pending)?;
                } else {
                    loop {
                        let (n, sp) = self.ident()?;
                        pending.push(PendingPort { name: n, span: sp, decl: None });
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_sym(")")?;
        }
        self.expect_sym(";")?;

        let mut nets: Vec<NetDecl> = Vec::new();
        let mut items: Vec<ModuleItem> = Vec::new();
        while !self.is_kw("endmodule") {
            if self.at_eof() {
                return Err(self.err("`endmodule`"));
            }
            self.module_item(&mut pending, &mut nets, &mut items, None)?;
        }
        self.bump();

        let mut ports = Vec::with_capacity(pending.len());
        for pp in pending {
            let mut port = pp.decl.ok_or_else(|| {
                FrontendError::invalid(pp.span, format!("port `{}` has no direction declaration", pp.name))
            })?;
            // `output y; reg y;` style
            if let Some(i) = nets.iter().position(|n| n.name == port.name) {
                let n = nets.remove(i);
                if n.range.is_some() && port.range.is_some() && n.range != port.range {
                    return Err(FrontendError::invalid(n.span, format!("conflicting range for `{}`", n.name)));
                }
                port.kind = n.kind;
                port.signed |= n.signed;
                port.range = port.range.or(n.range);
            }
            ports.push(port);
        }
        Ok(ModuleDecl { name, ports, nets, items, skip: false, span })
    }

    fn is_direction(&self) -> bool {
        self.is_kw("input") || self.is_kw("output") || self.is_kw("inout")
    }

    fn direction(&mut self) -> Result<Direction, FrontendError> {
        let d = match self.peek() {
            Tok::Ident(s) if s == "input" => Direction::Input,
            Tok::Ident(s) if s == "output" => Direction::Output,
            Tok::Ident(s) if s == "inout" => Direction::Inout,
            _ => return Err(self.err("port direction")),
        };
        self.bump();
        Ok(d)
    }

    /// `[wire|reg|integer] [signed] [range]`
    fn net_type(&mut self, default: NetKind) -> Result<(NetKind, bool, Option<Range>), FrontendError> {
        let kind = if self.eat_kw("wire") {
            NetKind::Wire
        } else if self.eat_kw("reg") {
            NetKind::Reg
        } else if self.eat_kw("integer") {
            NetKind::Integer
        } else {
            if self.is_kw("real") || self.is_kw("time") || self.is_kw("realtime") || self.is_kw("tri") {
                return Err(self.unsupported(format!("{:?} declaration", self.peek())));
            }
            default
        };
        let signed = self.eat_kw("signed");
        let range = if self.is_sym("[") && kind != NetKind::Integer { Some(self.range()?) } else { None };
        Ok((kind, signed, range))
    }

    fn ansi_ports(&mut self, pending: &mut Vec<PendingPort>) -> Result<(), FrontendError> {
        let mut dir = self.direction()?;
        let (mut kind, mut signed, mut range) = self.net_type(NetKind::Wire)?;
        loop {
            let (name, span) = self.ident()?;
            pending.push(PendingPort {
                name: name.clone(),
                span,
                decl: Some(Port { name, dir, kind, signed, range, span }),
            });
            if !self.eat_sym(",") {
                return Ok(());
            }
            if self.is_direction() {
                dir = self.direction()?;
                (kind, signed, range) = self.net_type(NetKind::Wire)?;
            }
        }
    }

    fn range(&mut self) -> Result<Range, FrontendError> {
        let sp = self.expect_sym("[")?;
        let msb = self.const_int()?;
        self.expect_sym(":")?;
        let lsb = self.const_int()?;
        self.expect_sym("]")?;
        if msb < lsb {
            return Err(FrontendError::Unsupported { name: "ascending range".into(), line: sp.line });
        }
        Ok(Range { msb, lsb })
    }

    fn const_int(&mut self) -> Result<i64, FrontendError> {
        let sp = self.span();
        let pe = self.expr()?;
        let lit = self.fold_const(&pe, sp)?;
        Ok(lit_to_i64(&lit))
    }

    fn fold_const(&self, pe: &PExpr, sp: Span) -> Result<Literal, FrontendError> {
        if pe.cls == Cls::Dynamic {
            let name = pe.e.refs().first().map(|s| s.to_string()).unwrap_or_default();
            return Err(FrontendError::ParameterUnresolvable { name, line: sp.line });
        }
        fold(&pe.e).map_err(|e| FrontendError::invalid(sp, e.to_string()))
    }

    fn param_assign(&mut self) -> Result<(), FrontendError> {
        let sp = self.span();
        let (_, signed, range) = self.net_type(NetKind::Wire)?;
        let (name, _) = self.ident()?;
        self.expect_sym("=")?;
        let pe = self.expr()?;
        if pe.cls == Cls::Dynamic {
            return Err(FrontendError::ParameterUnresolvable { name, line: sp.line });
        }
        let mut lit = fold(&pe.e).map_err(|e| FrontendError::invalid(sp, e.to_string()))?;
        if let Some(r) = range {
            // typed parameter: convert to the declared width
            let v = if lit.signed { sext(lit.value, lit.width) } else { lit.value };
            lit = Literal { width: r.width(), value: v & mask(r.width()), signed, sized: true, base: lit.base };
        } else if signed {
            lit.signed = true;
        }
        self.consts.insert(name, lit);
        Ok(())
    }

    fn module_item(
        &mut self,
        pending: &mut Vec<PendingPort>,
        nets: &mut Vec<NetDecl>,
        items: &mut Vec<ModuleItem>,
        gen_prefix: Option<&str>,
    ) -> Result<(), FrontendError> {
        let skip = self.pragmas();
        let span = self.span();
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            Tok::Sym(";") => {
                self.bump();
                return Ok(());
            }
            _ => return Err(self.err("module item")),
        };
        let in_gen = gen_prefix.is_some();
        let no_decl_in_gen = |p: &Parser| {
            if in_gen {
                Err(p.unsupported("declaration inside generate loop"))
            } else {
                Ok(())
            }
        };
        match word.as_str() {
            "input" | "output" | "inout" => {
                no_decl_in_gen(self)?;
                let dir = self.direction()?;
                let (kind, signed, range) = self.net_type(NetKind::Wire)?;
                loop {
                    let (name, sp) = self.ident()?;
                    let pp = pending
                        .iter_mut()
                        .find(|p| p.name == name)
                        .ok_or_else(|| FrontendError::invalid(sp, format!("`{name}` is not in the port list")))?;
                    if pp.decl.is_some() {
                        return Err(FrontendError::invalid(sp, format!("port `{name}` declared twice")));
                    }
                    pp.decl = Some(Port { name, dir, kind, signed, range, span: sp });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
            "wire" | "reg" | "integer" => {
                no_decl_in_gen(self)?;
                let (kind, signed, range) = self.net_type(NetKind::Wire)?;
                loop {
                    let (name, sp) = self.ident()?;
                    if self.is_sym("[") {
                        return Err(self.unsupported("memory (two-dimensional reg)"));
                    }
                    nets.push(NetDecl { name: name.clone(), kind, signed, range, span: sp });
                    if self.eat_sym("=") {
                        if kind != NetKind::Wire {
                            return Err(self.unsupported("variable declaration initializer"));
                        }
                        let rhs = self.expr()?.e;
                        items.push(ModuleItem {
                            kind: ItemKind::Assign { lhs: Expr::new(ExprKind::Ref { name, select: None }, sp), rhs },
                            skip,
                            span: sp,
                        });
                    }
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
            "parameter" | "localparam" => {
                no_decl_in_gen(self)?;
                self.bump();
                loop {
                    self.param_assign()?;
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
            "genvar" => {
                self.bump();
                loop {
                    self.ident()?;
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
            "assign" => {
                self.bump();
                loop {
                    let lhs = self.lvalue()?;
                    self.expect_sym("=")?;
                    let rhs = self.expr()?.e;
                    items.push(ModuleItem { kind: ItemKind::Assign { lhs, rhs }, skip, span });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
            "always" => {
                self.bump();
                let sensitivity = self.sensitivity()?;
                let body = self.stmt()?;
                items.push(ModuleItem { kind: ItemKind::Always(AlwaysBlock { sensitivity, body }), skip, span });
            }
            "generate" => {
                self.bump();
                while !self.is_kw("endgenerate") {
                    if self.at_eof() {
                        return Err(self.err("`endgenerate`"));
                    }
                    self.module_item(pending, nets, items, gen_prefix)?;
                }
                self.bump();
            }
            "for" => self.generate_for(pending, nets, items, gen_prefix, skip)?,
            "initial" | "function" | "task" | "specify" | "primitive" | "defparam" | "if" | "case" | "always_ff"
            | "always_comb" | "always_latch" | "logic" | "real" | "time" => {
                return Err(self.unsupported(word));
            }
            _ if is_keyword(&word) => return Err(self.err("module item")),
            _ => {
                // module instance
                self.bump();
                let module = word;
                if self.is_sym("#") {
                    return Err(self.unsupported("instance parameter override"));
                }
                let (iname, _) = self.ident()?;
                let name = match gen_prefix {
                    Some(p) => format!("{p}{iname}"),
                    None => iname,
                };
                self.expect_sym("(")?;
                let mut connections = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        let csp = self.span();
                        if !self.eat_sym(".") {
                            return Err(self.unsupported("positional port connection"));
                        }
                        let (port, _) = self.ident()?;
                        self.expect_sym("(")?;
                        let expr = if self.is_sym(")") { None } else { Some(self.expr()?.e) };
                        self.expect_sym(")")?;
                        connections.push(Connection { port, expr, span: csp });
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                items.push(ModuleItem { kind: ItemKind::Instance(Instance { module, name, connections }), skip, span });
            }
        }
        Ok(())
    }

    /// Unroll `for (gv = a; cond; gv = step) begin [: label] ... end`.
    fn generate_for(
        &mut self,
        pending: &mut Vec<PendingPort>,
        nets: &mut Vec<NetDecl>,
        items: &mut Vec<ModuleItem>,
        gen_prefix: Option<&str>,
        skip: bool,
    ) -> Result<(), FrontendError> {
        let sp = self.expect_kw("for")?;
        self.expect_sym("(")?;
        let (var, _) = self.ident()?;
        self.expect_sym("=")?;
        let init = self.const_int()?;
        self.expect_sym(";")?;
        let cond_pos = self.pos;
        // Evaluate condition and step by re-parsing them with the genvar bound.
        self.consts.insert(var.clone(), Literal::integer(init));
        self.skip_until_sym(";")?;
        self.bump();
        let step_pos = self.pos;
        self.skip_until_sym(")")?;
        self.bump();
        let (label, body_pos) = if self.eat_kw("begin") {
            let label = if self.eat_sym(":") { Some(self.ident()?.0) } else { None };
            (label, self.pos)
        } else {
            return Err(self.unsupported("generate loop without begin/end block"));
        };

        let mut value = init;
        let mut iterations = 0;
        let end_pos;
        loop {
            self.consts.insert(var.clone(), Literal::integer(value));
            self.pos = cond_pos;
            let cond = self.const_int()?;
            if cond == 0 {
                // skip the body without elaborating it
                self.pos = body_pos;
                self.skip_block()?;
                end_pos = self.pos;
                break;
            }
            iterations += 1;
            if iterations > MAX_GENERATE_ITERATIONS {
                return Err(FrontendError::invalid(sp, "generate loop does not terminate"));
            }
            self.pos = body_pos;
            let prefix = format!("{}{}_{}_", gen_prefix.unwrap_or(""), label.as_deref().unwrap_or("gen"), value);
            let first = items.len();
            while !self.is_kw("end") {
                if self.at_eof() {
                    return Err(self.err("`end`"));
                }
                self.module_item(pending, nets, items, Some(&prefix))?;
            }
            for it in &mut items[first..] {
                it.skip |= skip;
            }
            self.pos = step_pos;
            let (svar, _) = self.ident()?;
            if svar != var {
                return Err(FrontendError::invalid(sp, "generate loop step must assign the genvar"));
            }
            self.expect_sym("=")?;
            value = self.const_int()?;
        }
        self.consts.remove(&var);
        self.pos = end_pos;
        self.expect_kw("end")?;
        Ok(())
    }

    fn skip_until_sym(&mut self, s: &str) -> Result<(), FrontendError> {
        let mut depth = 0i32;
        loop {
            match self.peek() {
                Tok::Eof => return Err(self.err(format!("`{s}`"))),
                Tok::Sym(x) if *x == s && depth == 0 => return Ok(()),
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    /// Skip to the `end` matching an already consumed `begin`.
    fn skip_block(&mut self) -> Result<(), FrontendError> {
        let mut depth = 0;
        loop {
            match self.peek() {
                Tok::Eof => return Err(self.err("`end`")),
                Tok::Ident(s) if s == "begin" || s == "case" || s == "casez" => depth += 1,
                Tok::Ident(s) if s == "end" || s == "endcase" => {
                    if depth == 0 {
                        return Ok(());
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn sensitivity(&mut self) -> Result<Sensitivity, FrontendError> {
        self.expect_sym("@")?;
        if self.eat_sym("*") {
            return Ok(Sensitivity::Star);
        }
        self.expect_sym("(")?;
        if self.eat_sym("*") {
            self.expect_sym(")")?;
            return Ok(Sensitivity::Star);
        }
        let mut edges = Vec::new();
        loop {
            let span = self.span();
            let edge = if self.eat_kw("posedge") {
                Edge::Pos
            } else if self.eat_kw("negedge") {
                Edge::Neg
            } else {
                return Err(self.unsupported("level-sensitive event list (use @* instead)"));
            };
            let (signal, _) = self.ident()?;
            edges.push(EdgeEvent { edge, signal, span });
            if !(self.eat_kw("or") || self.eat_sym(",")) {
                break;
            }
        }
        self.expect_sym(")")?;
        Ok(Sensitivity::Edges(edges))
    }

    // ------------------------------------------------------------- statements

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let skip = self.pragmas();
        let mut s = self.stmt_inner()?;
        s.skip |= skip;
        Ok(s)
    }

    fn stmt_inner(&mut self) -> Result<Stmt, FrontendError> {
        let span = self.span();
        if self.eat_sym(";") {
            return Ok(Stmt::new(StmtKind::Null, span));
        }
        if self.eat_kw("begin") {
            let label = if self.eat_sym(":") { Some(self.ident()?.0) } else { None };
            let mut stmts = Vec::new();
            while !self.is_kw("end") {
                if self.at_eof() {
                    return Err(self.err("`end`"));
                }
                stmts.push(self.stmt()?);
            }
            self.bump();
            return Ok(Stmt::new(StmtKind::Block { label, stmts }, span));
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let cond = self.expr()?.e;
            self.expect_sym(")")?;
            let then_s = Box::new(self.stmt()?);
            let else_s = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
            return Ok(Stmt::new(StmtKind::If { cond, then_s, else_s }, span));
        }
        if self.is_kw("case") || self.is_kw("casez") {
            let kind = if self.eat_kw("case") {
                CaseKind::Case
            } else {
                self.bump();
                CaseKind::Casez
            };
            return self.case_stmt(kind, span);
        }
        if self.is_kw("casex") {
            return Err(self.unsupported("casex"));
        }
        if self.eat_kw("for") {
            return self.for_stmt(span);
        }
        for kw in ["while", "repeat", "forever", "wait", "fork", "disable", "assign", "deassign", "force"] {
            if self.is_kw(kw) {
                return Err(self.unsupported(kw));
            }
        }
        if self.is_sym("#") {
            return Err(self.unsupported("delay control"));
        }
        let lhs = self.lvalue()?;
        let blocking = if self.eat_sym("=") {
            true
        } else if self.eat_sym("<=") {
            false
        } else {
            return Err(self.err("`=` or `<=`"));
        };
        if self.is_sym("#") || self.is_sym("@") {
            return Err(self.unsupported("intra-assignment timing control"));
        }
        let rhs = self.expr()?.e;
        self.expect_sym(";")?;
        Ok(Stmt::new(StmtKind::Assign { lhs, rhs, blocking }, span))
    }

    fn case_stmt(&mut self, kind: CaseKind, span: Span) -> Result<Stmt, FrontendError> {
        self.expect_sym("(")?;
        let selector = self.expr()?.e;
        self.expect_sym(")")?;
        let mut items = Vec::new();
        let mut default = None;
        while !self.eat_kw("endcase") {
            if self.at_eof() {
                return Err(self.err("`endcase`"));
            }
            if self.eat_kw("default") {
                self.eat_sym(":");
                if default.is_some() {
                    return Err(FrontendError::invalid(span, "duplicate default"));
                }
                default = Some(Box::new(self.stmt()?));
                continue;
            }
            let mut labels = Vec::new();
            loop {
                labels.push(self.case_label(kind)?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(":")?;
            let body = self.stmt()?;
            items.push(CaseItem { labels, body });
        }
        Ok(Stmt::new(StmtKind::Case { kind, selector, items, default }, span))
    }

    fn case_label(&mut self, kind: CaseKind) -> Result<CaseLabel, FrontendError> {
        if let Tok::Number(n) = self.peek().clone() {
            if n.care != mask(n.width) {
                if kind != CaseKind::Casez {
                    return Err(self.unsupported("z/? digits outside casez"));
                }
                self.bump();
                return Ok(CaseLabel::Pattern(Pattern { width: n.width, value: n.value, care: n.care }));
            }
        }
        Ok(CaseLabel::Expr(self.expr()?.e))
    }

    fn for_stmt(&mut self, span: Span) -> Result<Stmt, FrontendError> {
        self.expect_sym("(")?;
        let (var, _) = self.ident()?;
        self.expect_sym("=")?;
        let init = self.expr()?;
        self.expect_sym(";")?;
        let cond = self.expr()?;
        self.expect_sym(";")?;
        let (svar, ssp) = self.ident()?;
        if svar != var {
            return Err(FrontendError::invalid(ssp, "for-loop step must assign the loop variable"));
        }
        self.expect_sym("=")?;
        let step = self.expr()?;
        self.expect_sym(")")?;
        let body = Box::new(self.stmt()?);
        // bounds and step may mention only the loop variable and constants
        for (what, pe) in [("initial value", &init), ("condition", &cond), ("step", &step)] {
            if pe.e.refs().iter().any(|r| *r != var) || (what == "initial value" && pe.cls == Cls::Dynamic) {
                return Err(FrontendError::Unsupported {
                    name: format!("for-loop {what} that is not constant"),
                    line: span.line,
                });
            }
        }
        Ok(Stmt::new(StmtKind::For { var, init: init.e, cond: cond.e, step: step.e, body }, span))
    }

    fn lvalue(&mut self) -> Result<Expr, FrontendError> {
        let span = self.span();
        if self.eat_sym("{") {
            let mut parts = Vec::new();
            loop {
                parts.push(self.lvalue()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("}")?;
            return Ok(Expr::new(ExprKind::Concat(parts), span));
        }
        let (name, _) = self.ident()?;
        if self.consts.contains_key(&name) {
            return Err(FrontendError::invalid(span, format!("cannot assign to parameter `{name}`")));
        }
        let select = self.select()?;
        Ok(Expr::new(ExprKind::Ref { name, select }, span))
    }

    fn select(&mut self) -> Result<Option<Select>, FrontendError> {
        if !self.is_sym("[") {
            return Ok(None);
        }
        let sp = self.bump().span;
        let first = self.expr()?;
        if self.is_sym("+:") || self.is_sym("-:") {
            return Err(self.unsupported("indexed part-select"));
        }
        let sel = if self.eat_sym(":") {
            let msb = lit_to_i64(&self.fold_const(&first, sp)?);
            let lsb = self.const_int()?;
            if msb < lsb {
                return Err(FrontendError::Unsupported { name: "reversed part-select".into(), line: sp.line });
            }
            Select::Part(msb, lsb)
        } else {
            let idx = match first.cls {
                Cls::Dynamic => first.e,
                _ => Expr::new(
                    ExprKind::Literal(fold(&first.e).map_err(|e| FrontendError::invalid(sp, e.to_string()))?),
                    first.e.span,
                ),
            };
            Select::Bit(Box::new(idx))
        };
        self.expect_sym("]")?;
        if self.is_sym("[") {
            return Err(self.unsupported("multi-dimensional select"));
        }
        Ok(Some(sel))
    }

    // ------------------------------------------------------------ expressions

    fn expr(&mut self) -> Result<PExpr, FrontendError> {
        let cond = self.binary(1)?;
        if self.is_sym("?") {
            let span = self.bump().span;
            let t = self.expr()?;
            self.expect_sym(":")?;
            let f = self.expr()?;
            let cls = cond.cls.join(t.cls).join(f.cls);
            let e = Expr::new(ExprKind::Ternary(Box::new(cond.e), Box::new(t.e), Box::new(f.e)), span);
            return self.finish(e, cls);
        }
        Ok(cond)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        match self.peek() {
            Tok::Sym("^~") => Some(BinaryOp::Xnor),
            Tok::Sym(s) => BinaryOp::from_symbol(s),
            _ => None,
        }
    }

    fn binary(&mut self, min_prec: u8) -> Result<PExpr, FrontendError> {
        let mut lhs = self.unary()?;
        loop {
            if let Tok::Sym(s @ ("===" | "!==" | "<<<" | ">>>" | "**")) = self.peek() {
                return Err(self.unsupported(format!("operator {s}")));
            }
            let Some(op) = self.binary_op() else { break };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let cls = lhs.cls.join(rhs.cls);
            let span = lhs.e.span;
            let e = Expr::new(ExprKind::Binary(op, Box::new(lhs.e), Box::new(rhs.e)), span);
            lhs = self.finish(e, cls)?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PExpr, FrontendError> {
        let span = self.span();
        let op = match self.peek() {
            Tok::Sym("~") => Some(UnaryOp::Not),
            Tok::Sym("!") => Some(UnaryOp::LogNot),
            Tok::Sym("-") => Some(UnaryOp::Neg),
            Tok::Sym("&") => Some(UnaryOp::RedAnd),
            Tok::Sym("|") => Some(UnaryOp::RedOr),
            Tok::Sym("^") => Some(UnaryOp::RedXor),
            Tok::Sym("+") => {
                self.bump();
                return self.unary();
            }
            Tok::Sym(s @ ("~&" | "~|" | "~^" | "^~")) => {
                return Err(self.unsupported(format!("reduction operator {s}")));
            }
            _ => None,
        };
        match op {
            Some(op) => {
                self.bump();
                let a = self.unary()?;
                let e = Expr::new(ExprKind::Unary(op, Box::new(a.e)), span);
                self.finish(e, a.cls)
            }
            None => self.primary(),
        }
    }

    /// Fold parameter-derived constant expressions into literals.
    fn finish(&self, e: Expr, cls: Cls) -> Result<PExpr, FrontendError> {
        if cls == Cls::Param {
            let span = e.span;
            let lit = fold(&e).map_err(|err| FrontendError::invalid(span, err.to_string()))?;
            Ok(PExpr { e: Expr::new(ExprKind::Literal(lit), span), cls })
        } else {
            Ok(PExpr { e, cls })
        }
    }

    fn primary(&mut self) -> Result<PExpr, FrontendError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                if n.care != mask(n.width) {
                    return Err(FrontendError::Unsupported {
                        name: "z/? value (two-state only)".into(),
                        line: span.line,
                    });
                }
                Ok(PExpr { e: Expr::new(ExprKind::Literal(num_literal(&n)), span), cls: Cls::Lit })
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => {
                self.bump();
                let first = self.expr()?;
                if self.is_sym("{") {
                    // replication {n{...}}
                    let count = lit_to_i64(&self.fold_const(&first, span)?);
                    if count <= 0 {
                        return Err(FrontendError::invalid(span, "replication count must be positive"));
                    }
                    self.bump();
                    let mut parts = vec![self.expr()?];
                    while self.eat_sym(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_sym("}")?;
                    self.expect_sym("}")?;
                    let cls = parts.iter().fold(first.cls, |c, p| c.join(p.cls));
                    let inner = if parts.len() == 1 {
                        parts.pop().unwrap().e
                    } else {
                        Expr::new(ExprKind::Concat(parts.into_iter().map(|p| p.e).collect()), span)
                    };
                    let e = Expr::new(ExprKind::Repeat(count as u32, Box::new(inner)), span);
                    return self.finish(e, cls);
                }
                let mut parts = vec![first];
                while self.eat_sym(",") {
                    parts.push(self.expr()?);
                }
                self.expect_sym("}")?;
                let cls = parts.iter().fold(Cls::Lit, |c, p| c.join(p.cls));
                let e = Expr::new(ExprKind::Concat(parts.into_iter().map(|p| p.e).collect()), span);
                self.finish(e, cls)
            }
            Tok::Ident(name) if !is_keyword(&name) => {
                self.bump();
                if self.is_sym("(") {
                    return Err(self.unsupported(format!("function call {name}")));
                }
                if let Some(lit) = self.consts.get(&name).copied() {
                    let lit = match self.select()? {
                        None => lit,
                        Some(sel) => select_literal(&lit, &sel).ok_or_else(|| {
                            FrontendError::ParameterUnresolvable { name: name.clone(), line: span.line }
                        })?,
                    };
                    return Ok(PExpr { e: Expr::new(ExprKind::Literal(lit), span), cls: Cls::Param });
                }
                let select = self.select()?;
                Ok(PExpr { e: Expr::new(ExprKind::Ref { name, select }, span), cls: Cls::Dynamic })
            }
            _ => Err(self.err("expression")),
        }
    }
}

fn num_literal(n: &NumTok) -> Literal {
    Literal { width: n.width, value: n.value, signed: n.signed, sized: n.sized, base: n.base }
}

fn lit_to_i64(l: &Literal) -> i64 {
    if l.signed {
        sext(l.value, l.width) as i64
    } else {
        l.value as i64
    }
}

/// Evaluate a constant expression into one literal.
fn fold(e: &Expr) -> Result<Literal, crate::sim::expr::CompileError> {
    let (value, width, signed) = eval_const(e)?;
    let unsized_int = width == 32 && signed && value >> 31 == 0;
    Ok(Literal { width, value, signed, sized: !unsized_int, base: Base::Dec })
}

fn select_literal(lit: &Literal, sel: &Select) -> Option<Literal> {
    let (msb, lsb) = match sel {
        Select::Part(m, l) => (*m, *l),
        Select::Bit(i) => {
            let i = lit_to_i64(i.as_literal()?);
            (i, i)
        }
    };
    if lsb < 0 || msb >= lit.width as i64 {
        return None;
    }
    let w = (msb - lsb + 1) as u32;
    Some(Literal::sized(w, lit.value >> lsb, Base::Dec))
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "module"
            | "endmodule"
            | "input"
            | "output"
            | "inout"
            | "wire"
            | "reg"
            | "integer"
            | "signed"
            | "parameter"
            | "localparam"
            | "assign"
            | "always"
            | "begin"
            | "end"
            | "if"
            | "else"
            | "case"
            | "casez"
            | "casex"
            | "endcase"
            | "default"
            | "for"
            | "posedge"
            | "negedge"
            | "or"
            | "generate"
            | "endgenerate"
            | "genvar"
            | "initial"
            | "function"
            | "endfunction"
            | "task"
            | "endtask"
    )
}
