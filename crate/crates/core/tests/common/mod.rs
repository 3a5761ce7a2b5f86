// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rtlock::analyze::ElementKind;
use rtlock::backend::{emit, insert_key_ports, DEFAULT_KEY_PORT};
use rtlock::frontend::ast::SourceUnit;
use rtlock::frontend::parse;
use rtlock::lock::{obfuscate_design, Budget, Locked, ObfuscationConfig, TechniqueSet};
use rtlock::sim::Simulator;

pub struct Fixture {
    pub name: String,
    pub path: PathBuf,
    pub text: String,
    pub design: SourceUnit,
}

impl Fixture {
    pub fn sim(&self) -> Simulator {
        Simulator::new(&self.design, DEFAULT_KEY_PORT).expect("fixture simulates")
    }
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load_dir(dir: &Path) -> Vec<Fixture> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .expect("fixture directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "v") && !p.to_string_lossy().ends_with(".locked.v"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).expect("readable fixture");
            let design = parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            Fixture { name: path.file_stem().unwrap().to_string_lossy().into_owned(), path, text, design }
        })
        .collect()
}

/// Corpus designs plus the worked examples.
pub fn corpus() -> Vec<Fixture> {
    let mut v = load_dir(&fixture_dir().join("corpus"));
    v.extend(load_dir(&fixture_dir().join("worked")));
    v
}

pub fn fixture(name: &str) -> Fixture {
    corpus().into_iter().find(|f| f.name == name).unwrap_or_else(|| panic!("no fixture {name}"))
}

pub const TECHNIQUES: [(&str, TechniqueSet); 4] = [
    ("CONST", TechniqueSet { constant: true, operation: false, branch: false }),
    ("OP", TechniqueSet { constant: false, operation: true, branch: false }),
    ("BRANCH", TechniqueSet { constant: false, operation: false, branch: true }),
    ("ALL", TechniqueSet::ALL),
];

pub fn only(kind: ElementKind) -> TechniqueSet {
    TechniqueSet::only(kind)
}

/// Locked design with its key port wired, plus the locking result.
pub struct LockedDesign {
    pub locked: Locked,
    pub wired: SourceUnit,
    pub text: String,
}

impl LockedDesign {
    pub fn key(&self) -> &[bool] {
        &self.locked.key.bits
    }
}

pub fn lock_cfg(design: &SourceUnit, cfg: &ObfuscationConfig) -> LockedDesign {
    let locked = obfuscate_design(design, cfg).expect("locking succeeds");
    let (wired, _) = insert_key_ports(&locked.design, DEFAULT_KEY_PORT).expect("key port");
    let text = emit(&wired);
    LockedDesign { locked, wired, text }
}

pub fn lock(design: &SourceUnit, t: TechniqueSet, budget: Budget, seed: u64) -> LockedDesign {
    lock_cfg(design, &ObfuscationConfig::new(t, budget, seed))
}
