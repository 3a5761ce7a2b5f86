// SPDX-License-Identifier: Apache-2.0

//! Hierarchy uniquification.

use std::collections::{HashMap, HashSet};

use crate::frontend::ast::{ItemKind, ModuleDecl, SourceUnit};

/// Clone every module reached through more than one instance path so each
/// definition is instantiated exactly once. Clones are named `<name>__u<k>`
/// with `k` counted in depth-first instance order. Modules unreachable from
/// the top are dropped.
pub fn uniquify(design: &SourceUnit) -> SourceUnit {
    let mut paths: HashMap<&str, usize> = HashMap::new();
    count_paths(design, &design.top_name, &mut paths);

    let mut taken: HashSet<String> = design.modules.iter().map(|m| m.name.clone()).collect();
    let mut next_k: HashMap<String, usize> = HashMap::new();
    let mut clones: HashMap<String, Vec<ModuleDecl>> = HashMap::new();
    let mut ctx = Ctx { design, paths: &paths, taken: &mut taken, next_k: &mut next_k, clones: &mut clones };
    ctx.visit(&design.top_name, design.top_name.clone());

    let mut modules = Vec::new();
    for m in &design.modules {
        if let Some(v) = clones.remove(&m.name) {
            modules.extend(v);
        }
    }
    SourceUnit { modules, top_name: design.top_name.clone() }
}

fn count_paths<'a>(design: &'a SourceUnit, name: &'a str, paths: &mut HashMap<&'a str, usize>) {
    *paths.entry(name).or_default() += 1;
    if let Some(m) = design.module(name) {
        for inst in m.instances() {
            count_paths(design, &inst.module, paths);
        }
    }
}

struct Ctx<'a, 'b> {
    design: &'a SourceUnit,
    paths: &'b HashMap<&'a str, usize>,
    taken: &'b mut HashSet<String>,
    next_k: &'b mut HashMap<String, usize>,
    clones: &'b mut HashMap<String, Vec<ModuleDecl>>,
}

impl Ctx<'_, '_> {
    fn fresh_name(&mut self, orig: &str) -> String {
        let k = self.next_k.entry(orig.to_string()).or_default();
        loop {
            let name = format!("{orig}__u{k}");
            *k += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    fn visit(&mut self, orig: &str, name: String) {
        let mut m = self.design.module(orig).expect("validated hierarchy").clone();
        m.name = name;
        for item in &mut m.items {
            if let ItemKind::Instance(inst) = &mut item.kind {
                let child = inst.module.clone();
                let child_name = if self.paths.get(child.as_str()).copied().unwrap_or(0) > 1 {
                    self.fresh_name(&child)
                } else {
                    child.clone()
                };
                inst.module = child_name.clone();
                self.visit(&child, child_name);
            }
        }
        self.clones.entry(orig.to_string()).or_default().push(m);
    }
}

/// Module names in key-allocation order: post-order from the top, children
/// in instantiation order. Expects a uniquified design.
pub fn hierarchy_order(design: &SourceUnit) -> Vec<String> {
    fn walk(design: &SourceUnit, name: &str, out: &mut Vec<String>) {
        if let Some(m) = design.module(name) {
            for inst in m.instances() {
                walk(design, &inst.module, out);
            }
        }
        out.push(name.to_string());
    }
    let mut out = Vec::new();
    walk(design, &design.top_name, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn shared_child_is_cloned() {
        let su = parse(
            "module B(input a, output y); assign y = ~a; endmodule
             module A(input a, output y); wire w; B u0(.a(a), .y(w)); B u1(.a(w), .y(y)); endmodule",
        )
        .unwrap();
        let u = uniquify(&su);
        let names: Vec<&str> = u.modules.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["B__u0", "B__u1", "A"]);
        let insts: Vec<&str> = u.top().instances().map(|i| i.module.as_str()).collect();
        assert_eq!(insts, ["B__u0", "B__u1"]);
        assert_eq!(hierarchy_order(&u), ["B__u0", "B__u1", "A"]);
    }

    #[test]
    fn distinct_instances_unchanged() {
        let su = parse(
            "module B(input a, output y); assign y = ~a; endmodule
             module C(input a, output y); assign y = a; endmodule
             module A(input a, output y); wire w; B u0(.a(a), .y(w)); C u1(.a(w), .y(y)); endmodule",
        )
        .unwrap();
        assert_eq!(uniquify(&su), su);
    }

    #[test]
    fn existing_name_is_skipped() {
        let su = parse(
            "module B(input a, output y); assign y = ~a; endmodule
             module B__u0(input a, output y); assign y = a; endmodule
             module A(input a, output y); wire w, v; B u0(.a(a), .y(w)); B u1(.a(w), .y(v)); B__u0 u2(.a(v), .y(y)); endmodule",
        )
        .unwrap();
        let u = uniquify(&su);
        let insts: Vec<&str> = u.top().instances().map(|i| i.module.as_str()).collect();
        assert_eq!(insts, ["B__u1", "B__u2", "B__u0"]);
    }
}
