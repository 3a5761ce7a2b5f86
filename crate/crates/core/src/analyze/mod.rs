// SPDX-License-Identifier: Apache-2.0

//! Hierarchy uniquification, blacklists and candidate enumeration.

pub mod blacklist;
pub mod elements;
pub mod location;
pub mod uniquify;

use serde::Serialize;
use thiserror::Error;

pub use blacklist::{create_black_list, BlackList, BlackListEntry, BlackListReason};
pub use elements::{bit_req, enumerate_elements, ElementKind, ObfuscationElement, OpShape, Payload};
pub use location::{Location, Slot};
pub use uniquify::{hierarchy_order, uniquify};

use crate::frontend::{ast::SourceUnit, FrontendError};

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
}

/// Analysis of one module of a uniquified design.
#[derive(Debug, Clone)]
pub struct ModuleAnalysis {
    pub module: String,
    pub blacklist: BlackList,
    pub elements: Vec<ObfuscationElement>,
}

/// Analyze every module of a uniquified design in key-allocation order.
pub fn analyze(design: &SourceUnit) -> Result<Vec<ModuleAnalysis>, AnalyzeError> {
    hierarchy_order(design)
        .into_iter()
        .map(|name| {
            let m = design.module(&name).expect("module in hierarchy");
            let blacklist = create_black_list(m);
            let elements = enumerate_elements(design, m, &blacklist)?;
            Ok(ModuleAnalysis { module: name, blacklist, elements })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ElementRecord {
    pub id: String,
    pub module: String,
    pub kind: ElementKind,
    pub bit_req: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BlackListRecord {
    pub module: String,
    pub node: String,
    pub reason: BlackListReason,
}

/// Dry-run report of candidates and blacklist entries.
#[derive(Debug, Serialize)]
pub struct ElementsReport {
    pub design: String,
    pub total_bits: u64,
    pub constant_bits: u64,
    pub operations: usize,
    pub branches: usize,
    pub elements: Vec<ElementRecord>,
    pub blacklist: Vec<BlackListRecord>,
}

impl ElementsReport {
    pub fn new(design: &SourceUnit, analysis: &[ModuleAnalysis]) -> Self {
        let mut r = ElementsReport {
            design: design.top_name.clone(),
            total_bits: 0,
            constant_bits: 0,
            operations: 0,
            branches: 0,
            elements: Vec::new(),
            blacklist: Vec::new(),
        };
        for ma in analysis {
            for el in &ma.elements {
                let bits = el.bit_req() as u64;
                r.total_bits += bits;
                let detail = match &el.payload {
                    Payload::Constant { literal, width, .. } => {
                        r.constant_bits += bits;
                        Some(format!("{} matched to {width} bits", crate::backend::emit::literal(literal)))
                    }
                    Payload::Operation { op, .. } => {
                        r.operations += 1;
                        Some(op.symbol().to_string())
                    }
                    Payload::Branch { cond, .. } => {
                        r.branches += 1;
                        Some(crate::backend::emit::expr(cond))
                    }
                };
                r.elements.push(ElementRecord {
                    id: el.id.clone(),
                    module: el.module.clone(),
                    kind: el.kind,
                    bit_req: el.bit_req(),
                    detail,
                });
            }
            for e in &ma.blacklist.entries {
                r.blacklist.push(BlackListRecord { module: ma.module.clone(), node: e.node.clone(), reason: e.reason });
            }
        }
        r
    }
}
