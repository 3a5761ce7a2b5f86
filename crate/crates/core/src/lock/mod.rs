// SPDX-License-Identifier: Apache-2.0

//! Key-bit allocation and the locking rewrites.

pub mod dummy;
pub mod key;
pub mod rewrite;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analyze::location::{node_at, node_at_mut};
use crate::analyze::{
    create_black_list, enumerate_elements, hierarchy_order, uniquify, AnalyzeError, BlackListReason, ElementKind,
    ObfuscationElement, Payload,
};
use crate::frontend::ast::{ExprKind, SourceUnit};
use crate::frontend::width::width_of;

pub use dummy::{legal_dummies, select_dummy, DummyOpTable};
pub use key::{LockingKey, ManifestEntry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LockError {
    #[error("no obfuscation technique enabled")]
    TechniqueSetEmpty,
    #[error("key budget is zero; design left unchanged")]
    BudgetZero,
    #[error("input key exhausted after {consumed} bits")]
    InputKeyExhausted { consumed: usize },
    #[error("{element}: no safe dummy for `{op}`; element left unchanged")]
    NoSafeDummy { element: String, op: String },
    #[error("percent budget must be within 0..=100, got {0}")]
    InvalidPercent(u32),
    #[error("{0}")]
    Analyze(String),
}

impl From<AnalyzeError> for LockError {
    fn from(e: AnalyzeError) -> Self {
        LockError::Analyze(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TechniqueSet {
    pub constant: bool,
    pub operation: bool,
    pub branch: bool,
}

impl TechniqueSet {
    pub const ALL: TechniqueSet = TechniqueSet { constant: true, operation: true, branch: true };
    pub const NONE: TechniqueSet = TechniqueSet { constant: false, operation: false, branch: false };

    pub fn only(kind: ElementKind) -> Self {
        let mut t = Self::NONE;
        t.set(kind);
        t
    }

    pub fn contains(&self, kind: ElementKind) -> bool {
        match kind {
            ElementKind::Constant => self.constant,
            ElementKind::Operation => self.operation,
            ElementKind::Branch => self.branch,
        }
    }

    fn set(&mut self, kind: ElementKind) {
        match kind {
            ElementKind::Constant => self.constant = true,
            ElementKind::Operation => self.operation = true,
            ElementKind::Branch => self.branch = true,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::NONE
    }
}

impl FromStr for TechniqueSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut t = Self::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "all" => t = Self::ALL,
                "const" | "constant" => t.set(ElementKind::Constant),
                "op" | "operation" => t.set(ElementKind::Operation),
                "branch" => t.set(ElementKind::Branch),
                other => return Err(format!("unknown technique `{other}` (expected const, op, branch or all)")),
            }
        }
        Ok(t)
    }
}

impl fmt::Display for TechniqueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::ALL {
            return f.write_str("all");
        }
        let names: Vec<&str> = [(self.constant, "const"), (self.operation, "op"), (self.branch, "branch")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    MaxBits(u64),
    /// Integer percentage applied to each category.
    Percent(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObfuscationConfig {
    pub techniques: TechniqueSet,
    pub budget: Budget,
    pub seed: u64,
    /// External source of operation and branch key bits.
    pub input_key: Option<Vec<bool>>,
    /// Honor `assure_skip` pragmas.
    pub respect_pragmas: bool,
}

impl ObfuscationConfig {
    pub fn new(techniques: TechniqueSet, budget: Budget, seed: u64) -> Self {
        ObfuscationConfig { techniques, budget, seed, input_key: None, respect_pragmas: true }
    }
}

/// Result of locking a design.
#[derive(Debug, Clone)]
pub struct Locked {
    /// Uniquified design with key bits referenced by global index.
    pub design: SourceUnit,
    pub key: LockingKey,
    /// Locked elements in key order, with the lsb of their key range.
    pub locked: Vec<(ObfuscationElement, u64)>,
    /// All candidates of enabled techniques, in key order.
    pub candidates: Vec<ObfuscationElement>,
    /// Non-fatal conditions (`BudgetZero`, `NoSafeDummy`).
    pub warnings: Vec<LockError>,
}

/// Candidates of the uniquified `design` in allocation order: modules
/// innermost first, elements depth-first within a module.
pub fn candidates(design: &SourceUnit, respect_pragmas: bool) -> Result<Vec<ObfuscationElement>, AnalyzeError> {
    let mut out = Vec::new();
    for name in hierarchy_order(design) {
        let m = design.module(&name).expect("module in hierarchy");
        let mut bl = create_black_list(m);
        if !respect_pragmas {
            bl.entries.retain(|e| !matches!(e.reason, BlackListReason::UserPragma | BlackListReason::OutputInterface));
        }
        out.extend(enumerate_elements(design, m, &bl)?);
    }
    Ok(out)
}

fn has_safe_dummy(design: &SourceUnit, el: &ObfuscationElement) -> bool {
    let Payload::Operation { op, shape } = &el.payload else { return true };
    let m = design.module(&el.module).expect("element module");
    let Some(ExprKind::Binary(_, l, r)) = node_at(m, &el.location).map(|e| &e.kind) else { return false };
    !legal_dummies(*op, l, r, shape).is_empty()
}

/// Indices of `elements` admitted by the skip-and-continue fold: an element
/// is taken when its bit requirement fits in what remains of `budget`.
pub fn fold_budget(elements: impl IntoIterator<Item = (usize, u32)>, budget: u64) -> (Vec<usize>, u64) {
    let mut remaining = budget;
    let mut taken = Vec::new();
    for (i, bits) in elements {
        if bits as u64 <= remaining {
            remaining -= bits as u64;
            taken.push(i);
        }
    }
    (taken, budget - remaining)
}

fn percent_of(p: u32, n: u64) -> u64 {
    (p as u64 * n).div_ceil(100)
}

/// Choose which candidates to lock. Returns indices into `cands`, sorted.
fn select(cands: &[ObfuscationElement], safe: &[bool], budget: Budget) -> Vec<usize> {
    let eligible = |i: usize| safe[i];
    let mut chosen = match budget {
        Budget::MaxBits(k) => {
            fold_budget((0..cands.len()).filter(|&i| eligible(i)).map(|i| (i, cands[i].bit_req())), k).0
        }
        Budget::Percent(p) => {
            let total: u64 = cands.iter().map(|e| e.bit_req() as u64).sum();
            let target = percent_of(p, total);
            let count = |k: ElementKind| cands.iter().filter(|e| e.kind == k).count() as u64;
            let mut used = 0;
            let mut chosen = Vec::new();
            for kind in [ElementKind::Operation, ElementKind::Branch] {
                let quota = percent_of(p, count(kind));
                let of_kind = (0..cands.len()).filter(|&i| cands[i].kind == kind && eligible(i));
                let (taken, bits) = fold_budget(of_kind.map(|i| (i, 1)), quota.min(target - used));
                used += bits;
                chosen.extend(taken);
            }
            let consts =
                (0..cands.len()).filter(|&i| cands[i].kind == ElementKind::Constant).map(|i| (i, cands[i].bit_req()));
            chosen.extend(fold_budget(consts, target - used).0);
            chosen
        }
    };
    chosen.sort_unstable();
    chosen
}

/// Next operation/branch key bit.
fn draw_bit(cfg: &ObfuscationConfig, consumed: &mut usize, rng: &mut ChaCha8Rng) -> Result<bool, LockError> {
    match &cfg.input_key {
        Some(stream) => {
            let b = *stream.get(*consumed).ok_or(LockError::InputKeyExhausted { consumed: *consumed })?;
            *consumed += 1;
            Ok(b)
        }
        None => Ok(rng.random::<bool>()),
    }
}

/// Key bits for one element: the constant's own bits, or one bit from the
/// input key or the PRNG.
pub fn get_obfuscation_key(
    el: &ObfuscationElement,
    cfg: &ObfuscationConfig,
    consumed: &mut usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<bool>, LockError> {
    match &el.payload {
        Payload::Constant { width, bits, .. } => Ok((0..*width).map(|i| (bits >> i) & 1 == 1).collect()),
        Payload::Operation { .. } | Payload::Branch { .. } => Ok(vec![draw_bit(cfg, consumed, rng)?]),
    }
}

/// Lock `design` under `cfg`. The design is uniquified first.
pub fn obfuscate_design(design: &SourceUnit, cfg: &ObfuscationConfig) -> Result<Locked, LockError> {
    if cfg.techniques.is_empty() {
        return Err(LockError::TechniqueSetEmpty);
    }
    if let Budget::Percent(p) = cfg.budget {
        if p > 100 {
            return Err(LockError::InvalidPercent(p));
        }
    }
    let mut d = uniquify(design);
    let cands: Vec<ObfuscationElement> =
        candidates(&d, cfg.respect_pragmas)?.into_iter().filter(|e| cfg.techniques.contains(e.kind)).collect();

    if matches!(cfg.budget, Budget::MaxBits(0) | Budget::Percent(0)) {
        log::warn!("{}", LockError::BudgetZero);
        return Ok(Locked {
            design: design.clone(),
            key: LockingKey::default(),
            locked: Vec::new(),
            candidates: cands,
            warnings: vec![LockError::BudgetZero],
        });
    }

    let mut warnings = Vec::new();
    let safe: Vec<bool> = cands
        .iter()
        .map(|el| {
            let ok = has_safe_dummy(&d, el);
            if !ok {
                let Payload::Operation { op, .. } = &el.payload else { unreachable!() };
                let w = LockError::NoSafeDummy { element: el.id.clone(), op: op.symbol().into() };
                log::warn!("{w}");
                warnings.push(w);
            }
            ok
        })
        .collect();
    let chosen = select(&cands, &safe, cfg.budget);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut consumed = 0;
    let mut key = LockingKey::default();
    let mut locked = Vec::with_capacity(chosen.len());
    let mut dummies = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        let el = &cands[i];
        let lsb = key.bits.len() as u64;
        let bits = get_obfuscation_key(el, cfg, &mut consumed, &mut rng)?;
        let dummy = match &el.payload {
            Payload::Operation { op, shape } => {
                let m = d.module(&el.module).expect("element module");
                let Some(ExprKind::Binary(_, l, r)) = node_at(m, &el.location).map(|e| &e.kind) else {
                    unreachable!("operation element addresses a binary node")
                };
                Some(select_dummy(*op, l, r, shape, &mut rng).expect("safety checked during selection"))
            }
            _ => None,
        };
        let technique = match el.kind {
            ElementKind::Constant => "constant-extraction",
            ElementKind::Operation => "operation-mux",
            ElementKind::Branch => "branch-xor",
        };
        key.manifest.push(ManifestEntry {
            lsb,
            width: bits.len() as u32,
            element: el.id.clone(),
            kind: el.kind,
            technique: technique.into(),
            dummy: dummy.map(|o| o.symbol().to_string()),
        });
        key.bits.extend(bits);
        locked.push((el.clone(), lsb));
        dummies.push(dummy);
    }

    // Descendants come after their ancestors in pre-order, so rewriting in
    // reverse keeps every pending location valid.
    for ((el, lsb), dummy) in locked.iter().zip(&dummies).rev() {
        let m = d.module_mut(&el.module).expect("element module");
        let value = key.bits[*lsb as usize];
        match &el.payload {
            Payload::Constant { width, .. } => {
                *node_at_mut(m, &el.location).expect("constant location") = rewrite::obfuscate_constant(*lsb, *width);
            }
            Payload::Operation { shape, .. } => {
                let node = node_at_mut(m, &el.location).expect("operation location");
                *node =
                    rewrite::obfuscate_operation(node, dummy.expect("dummy chosen"), *lsb, value, shape.context_width);
            }
            Payload::Branch { ternary, .. } => {
                let scope = m.clone();
                let width = |x: &crate::frontend::ast::Expr| width_of(x, &scope).unwrap_or(1);
                let node = node_at_mut(m, &el.location).expect("branch location");
                let cond = if *ternary {
                    match &mut node.kind {
                        ExprKind::Ternary(c, ..) => &mut **c,
                        _ => unreachable!("ternary branch addresses a ternary node"),
                    }
                } else {
                    node
                };
                *cond = rewrite::obfuscate_branch(cond, &width, *lsb, value);
            }
        }
    }

    Ok(Locked { design: d, key, locked, candidates: cands, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::emit::expr;
    use crate::frontend::ast::ItemKind;
    use crate::frontend::parse;

    fn rhs(su: &SourceUnit, item: usize) -> String {
        match &su.top().items[item].kind {
            ItemKind::Assign { rhs, .. } => expr(rhs),
            _ => panic!(),
        }
    }

    #[test]
    fn constant_moves_into_key() {
        let su = parse("module m(input [4:0] a, output [4:0] b); assign b = a + 5'b01010; endmodule").unwrap();
        let cfg = ObfuscationConfig::new(TechniqueSet::only(ElementKind::Constant), Budget::Percent(100), 1);
        let l = obfuscate_design(&su, &cfg).unwrap();
        assert_eq!(rhs(&l.design, 0), "a + key_in[4:0]");
        assert_eq!(l.key.bits, [false, true, false, true, false]);
        assert!(l.key.manifest_is_partition());
    }

    #[test]
    fn max_bits_skips_the_suffix() {
        let su = parse(
            "module m(input [3:0] a, input [3:0] b, output [3:0] x, output [3:0] y, output [3:0] z);
             assign x = a + b; assign y = a - b; assign z = a ^ b; endmodule",
        )
        .unwrap();
        let cfg = ObfuscationConfig::new(TechniqueSet::only(ElementKind::Operation), Budget::MaxBits(2), 3);
        let l = obfuscate_design(&su, &cfg).unwrap();
        assert_eq!(l.key.width(), 2);
        assert_eq!(rhs(&l.design, 2), "a ^ b");
    }

    #[test]
    fn nested_elements_rewrite_bottom_up() {
        let su = parse("module m(input [7:0] a, input [7:0] b, output [7:0] c); assign c = (a + 8'd3) ^ b; endmodule")
            .unwrap();
        let mut cfg = ObfuscationConfig::new(TechniqueSet::ALL, Budget::Percent(100), 0);
        cfg.input_key = Some(vec![false, false]);
        let l = obfuscate_design(&su, &cfg).unwrap();
        assert_eq!(l.key.width(), 10);
        let text = rhs(&l.design, 0);
        assert!(!text.contains("8'd3"), "{text}");
        assert_eq!(text.matches("key_in[9:2]").count(), 4, "{text}");
    }

    #[test]
    fn input_key_exhaustion() {
        let su = parse("module m(input [3:0] a, input [3:0] b, output [3:0] x, output [3:0] y); assign x = a + b; assign y = a - b; endmodule").unwrap();
        let mut cfg = ObfuscationConfig::new(TechniqueSet::ALL, Budget::Percent(100), 0);
        cfg.input_key = Some(vec![true]);
        assert_eq!(obfuscate_design(&su, &cfg).unwrap_err(), LockError::InputKeyExhausted { consumed: 1 });
    }

    #[test]
    fn budget_zero_and_empty_techniques() {
        let su = parse("module m(input [3:0] a, output [3:0] x); assign x = a + 4'd1; endmodule").unwrap();
        let l = obfuscate_design(&su, &ObfuscationConfig::new(TechniqueSet::ALL, Budget::MaxBits(0), 0)).unwrap();
        assert_eq!(l.warnings, [LockError::BudgetZero]);
        assert_eq!(l.design, su);
        assert_eq!(
            obfuscate_design(&su, &ObfuscationConfig::new(TechniqueSet::NONE, Budget::MaxBits(4), 0)).unwrap_err(),
            LockError::TechniqueSetEmpty
        );
    }

    #[test]
    fn percent_quotas() {
        // 4 ops, 1 branch, constants of 4 + 4 bits: total 13, 25% -> 4 bits.
        let su = parse(
            "module m(input [3:0] a, input [3:0] b, output [3:0] w, output [3:0] x, output reg [3:0] y);
             assign w = a + 4'd5; assign x = a - b;
             always @* if (a[0]) y = a ^ 4'd9; else y = a & b; endmodule",
        )
        .unwrap();
        let l = obfuscate_design(&su, &ObfuscationConfig::new(TechniqueSet::ALL, Budget::Percent(25), 0)).unwrap();
        let kinds: Vec<ElementKind> = l.locked.iter().map(|(e, _)| e.kind).collect();
        assert_eq!(kinds, [ElementKind::Operation, ElementKind::Branch]);
        assert_eq!(l.key.width(), 2);
    }

    #[test]
    fn techniques_parse() {
        assert_eq!("all".parse::<TechniqueSet>().unwrap(), TechniqueSet::ALL);
        let t: TechniqueSet = "const,branch".parse().unwrap();
        assert!(t.constant && t.branch && !t.operation);
        assert!("gate".parse::<TechniqueSet>().is_err());
    }
}
