// SPDX-License-Identifier: Apache-2.0

//! Typed syntax tree for the supported Verilog subset.
//!
//! Every node carries a [`Span`]. Spans never participate in equality, so two
//! trees compare equal when they are structurally identical regardless of
//! where their nodes came from. This is what the emit/parse round trip relies
//! on.

use std::fmt;

/// Source position (1-based line and column).
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Widest value the literal and expression machinery handles.
pub const MAX_VALUE_WIDTH: u32 = 128;

/// Mask with the low `width` bits set.
pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    Bin,
    Oct,
    Dec,
    Hex,
}

/// A sized two-state constant.
///
/// `sized` and `base` are formatting hints only; equality looks at
/// width, value and signedness.
#[derive(Debug, Clone, Copy)]
pub struct Literal {
    pub width: u32,
    pub value: u128,
    pub signed: bool,
    pub sized: bool,
    pub base: Base,
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.value == other.value && self.signed == other.signed
    }
}

impl Eq for Literal {}

impl Literal {
    pub fn sized(width: u32, value: u128, base: Base) -> Self {
        Literal { width, value: value & mask(width), signed: false, sized: true, base }
    }

    /// Plain decimal integer such as `1` (32 bits, signed).
    pub fn integer(value: i64) -> Self {
        Literal { width: 32, value: (value as u128) & mask(32), signed: true, sized: false, base: Base::Dec }
    }

    pub fn bit(&self, i: u32) -> bool {
        i < self.width && (self.value >> i) & 1 == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,    // ~
    LogNot, // !
    Neg,    // -
    RedAnd, // &
    RedOr,  // |
    RedXor, // ^
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "~",
            UnaryOp::LogNot => "!",
            UnaryOp::Neg => "-",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedXor => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    And,
    Or,
    Xor,
    Xnor,
    LogAnd,
    LogOr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 19] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Mod,
        BinaryOp::Shl,
        BinaryOp::Shr,
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Xor,
        BinaryOp::Xnor,
        BinaryOp::LogAnd,
        BinaryOp::LogOr,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::Xnor => "~^",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinaryOp> {
        BinaryOp::ALL.iter().copied().find(|op| op.symbol() == s)
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 10,
            BinaryOp::Add | BinaryOp::Sub => 9,
            BinaryOp::Shl | BinaryOp::Shr => 8,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 7,
            BinaryOp::Eq | BinaryOp::Ne => 6,
            BinaryOp::And => 5,
            BinaryOp::Xor | BinaryOp::Xnor => 4,
            BinaryOp::Or => 3,
            BinaryOp::LogAnd => 2,
            BinaryOp::LogOr => 1,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::LogAnd | BinaryOp::LogOr)
    }

    pub fn is_shift(self) -> bool {
        matches!(self, BinaryOp::Shl | BinaryOp::Shr)
    }

    /// Low result bits depend only on the same low operand bits.
    pub fn is_modular(self) -> bool {
        matches!(
            self,
            BinaryOp::Add
                | BinaryOp::Sub
                | BinaryOp::Mul
                | BinaryOp::And
                | BinaryOp::Or
                | BinaryOp::Xor
                | BinaryOp::Xnor
        )
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Select {
    /// `x[e]`
    Bit(Box<Expr>),
    /// `x[msb:lsb]`, constant bounds in declared index space.
    Part(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Literal(Literal),
    Ref {
        name: String,
        select: Option<Select>,
    },
    /// Bits of the design-wide locking key, before key ports are wired.
    KeyBits {
        lsb: u64,
        width: u32,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Repeat(u32, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn lit(lit: Literal) -> Self {
        Expr::new(ExprKind::Literal(lit), Span::default())
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Ref { name: name.into(), select: None }, Span::default())
    }

    pub fn part(name: impl Into<String>, msb: i64, lsb: i64) -> Self {
        Expr::new(ExprKind::Ref { name: name.into(), select: Some(Select::Part(msb, lsb)) }, Span::default())
    }

    pub fn bit_of(name: impl Into<String>, idx: i64) -> Self {
        let idx = Expr::lit(Literal::integer(idx));
        Expr::new(ExprKind::Ref { name: name.into(), select: Some(Select::Bit(Box::new(idx))) }, Span::default())
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        let span = e.span;
        Expr::new(ExprKind::Unary(op, Box::new(e)), span)
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Self {
        let span = l.span;
        Expr::new(ExprKind::Binary(op, Box::new(l), Box::new(r)), span)
    }

    pub fn repeat(count: u32, e: Expr) -> Self {
        let span = e.span;
        Expr::new(ExprKind::Repeat(count, Box::new(e)), span)
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match &self.kind {
            ExprKind::Literal(l) => Some(l),
            _ => None,
        }
    }

    /// Pre-order walk over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Literal(_) | ExprKind::KeyBits { .. } => {}
            ExprKind::Ref { select, .. } => {
                if let Some(Select::Bit(i)) = select {
                    i.walk(f);
                }
            }
            ExprKind::Unary(_, e) | ExprKind::Repeat(_, e) => e.walk(f),
            ExprKind::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            ExprKind::Ternary(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            ExprKind::Concat(v) => v.iter().for_each(|e| e.walk(f)),
        }
    }

    /// Names of all signals read by this expression.
    pub fn refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Ref { name, .. } = &e.kind {
                out.push(name.as_str());
            }
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

/// Declared `[msb:lsb]` range, `msb >= lsb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Range {
    pub msb: i64,
    pub lsb: i64,
}

impl Range {
    pub fn width(&self) -> u32 {
        (self.msb - self.lsb + 1) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub dir: Direction,
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub span: Span,
}

impl Port {
    pub fn width(&self) -> u32 {
        match self.kind {
            NetKind::Integer => 32,
            _ => self.range.map_or(1, |r| r.width()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDecl {
    pub name: String,
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub span: Span,
}

impl NetDecl {
    pub fn width(&self) -> u32 {
        match self.kind {
            NetKind::Integer => 32,
            _ => self.range.map_or(1, |r| r.width()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeEvent {
    pub edge: Edge,
    pub signal: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sensitivity {
    Star,
    Edges(Vec<EdgeEvent>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
}

/// A `casez` label pattern: bits where `care` is 0 match anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pattern {
    pub width: u32,
    pub value: u128,
    pub care: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseLabel {
    Expr(Expr),
    Pattern(Pattern),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseItem {
    pub labels: Vec<CaseLabel>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Block {
        label: Option<String>,
        stmts: Vec<Stmt>,
    },
    Assign {
        lhs: Expr,
        rhs: Expr,
        blocking: bool,
    },
    If {
        cond: Expr,
        then_s: Box<Stmt>,
        else_s: Option<Box<Stmt>>,
    },
    Case {
        kind: CaseKind,
        selector: Expr,
        items: Vec<CaseItem>,
        default: Option<Box<Stmt>>,
    },
    /// `for (var = init; cond; var = step) body`
    For {
        var: String,
        init: Expr,
        cond: Expr,
        step: Expr,
        body: Box<Stmt>,
    },
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub skip: bool,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, skip: false, span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlwaysBlock {
    pub sensitivity: Sensitivity,
    pub body: Stmt,
}

impl AlwaysBlock {
    pub fn is_clocked(&self) -> bool {
        matches!(self.sensitivity, Sensitivity::Edges(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub port: String,
    pub expr: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub connections: Vec<Connection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemKind {
    Assign { lhs: Expr, rhs: Expr },
    Always(AlwaysBlock),
    Instance(Instance),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleItem {
    pub kind: ItemKind,
    pub skip: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: String,
    pub ports: Vec<Port>,
    pub nets: Vec<NetDecl>,
    pub items: Vec<ModuleItem>,
    pub skip: bool,
    pub span: Span,
}

/// Signal shape as seen from expressions inside a module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalInfo {
    pub width: u32,
    pub signed: bool,
    pub lsb: i64,
    pub kind: NetKind,
    pub dir: Option<Direction>,
}

impl ModuleDecl {
    pub fn signal(&self, name: &str) -> Option<SignalInfo> {
        if let Some(p) = self.ports.iter().find(|p| p.name == name) {
            return Some(SignalInfo {
                width: p.width(),
                signed: p.signed || p.kind == NetKind::Integer,
                lsb: p.range.map_or(0, |r| r.lsb),
                kind: p.kind,
                dir: Some(p.dir),
            });
        }
        self.nets.iter().find(|n| n.name == name).map(|n| SignalInfo {
            width: n.width(),
            signed: n.signed || n.kind == NetKind::Integer,
            lsb: n.range.map_or(0, |r| r.lsb),
            kind: n.kind,
            dir: None,
        })
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.items.iter().filter_map(|it| match &it.kind {
            ItemKind::Instance(i) => Some(i),
            _ => None,
        })
    }

    pub fn is_sequential(&self) -> bool {
        self.items.iter().any(|it| matches!(&it.kind, ItemKind::Always(a) if a.is_clocked()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub modules: Vec<ModuleDecl>,
    pub top_name: String,
}

impl SourceUnit {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn module_mut(&mut self, name: &str) -> Option<&mut ModuleDecl> {
        self.modules.iter_mut().find(|m| m.name == name)
    }

    pub fn top(&self) -> &ModuleDecl {
        self.module(&self.top_name).expect("top module present")
    }
}
