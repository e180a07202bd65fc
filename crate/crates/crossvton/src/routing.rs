//! Construction-method routing.
//!
//! Given the garment spec worn in the constructed image (`pc`) and the
//! spec of the ground-truth garment (`pg`), decides which construction
//! method applies and in which pipeline round. Encoded cell-for-cell from
//! the method table:
//!
//! - same category, same length → IDM;
//! - Upper↔Upper and Dress↔Dress with mismatched length → IDM_S;
//! - Lower↔Lower is IDM regardless of length;
//! - pg Upper, pc Dress (any lengths) → IDM;
//! - pg Lower, pc Dress: short dress → IDM_S, long dress → IDM;
//! - pg Dress, pc Upper or Lower → CrossVTON (round 2);
//! - Upper↔Lower in either order → not constructible.

use serde::{Deserialize, Serialize};

use crate::maskcore::{GarmentCategory, GarmentLength, GarmentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstructionMethod {
    /// Off-the-shelf mask-based try-on.
    Idm,
    /// IDM with the lower-boundary stretch/shrink mask strategy.
    IdmS,
    /// The round-1-trained model itself.
    CrossVton,
    /// Not constructible.
    Na,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Round {
    Round1,
    Round2,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub method: ConstructionMethod,
    pub round: Round,
}

impl RoutingDecision {
    fn of(method: ConstructionMethod) -> Self {
        let round = match method {
            ConstructionMethod::CrossVton => Round::Round2,
            ConstructionMethod::Na => Round::None,
            _ => Round::Round1,
        };
        Self { method, round }
    }
}

impl std::fmt::Display for ConstructionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstructionMethod::Idm => "IDM",
            ConstructionMethod::IdmS => "IDM_S",
            ConstructionMethod::CrossVton => "CROSSVTON",
            ConstructionMethod::Na => "NA",
        })
    }
}

impl std::fmt::Display for Round {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Round::Round1 => "round1",
            Round::Round2 => "round2",
            Round::None => "none",
        })
    }
}

/// Method-table lookup. Total over the 6×6 spec space.
pub fn route(pc: GarmentSpec, pg: GarmentSpec) -> RoutingDecision {
    use ConstructionMethod::*;
    use GarmentCategory::*;
    let method = match (pg.category, pc.category) {
        (Upper, Upper) | (Dress, Dress) => {
            if pg.length == pc.length {
                Idm
            } else {
                IdmS
            }
        }
        // Lower↔Lower: the table marks the whole block IDM, length mismatch included.
        (Lower, Lower) => Idm,
        (Upper, Dress) => Idm,
        (Lower, Dress) => match pc.length {
            GarmentLength::Short => IdmS,
            GarmentLength::Long => Idm,
        },
        (Dress, Upper) | (Dress, Lower) => CrossVton,
        (Upper, Lower) | (Lower, Upper) => Na,
    };
    RoutingDecision::of(method)
}

/// One (pc, pg) pair with its routing decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedPair {
    pub pc: GarmentSpec,
    pub pg: GarmentSpec,
    pub decision: RoutingDecision,
}

/// A construction plan: input pairs partitioned by round, input order
/// preserved within each group. Duplicates are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstructionPlan {
    pub round1: Vec<PlannedPair>,
    pub round2: Vec<PlannedPair>,
    pub rejected: Vec<PlannedPair>,
}

impl ConstructionPlan {
    pub fn len(&self) -> usize {
        self.round1.len() + self.round2.len() + self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn enumerate_plan(pairs: &[(GarmentSpec, GarmentSpec)]) -> ConstructionPlan {
    let mut plan = ConstructionPlan::default();
    for &(pc, pg) in pairs {
        let decision = route(pc, pg);
        let planned = PlannedPair { pc, pg, decision };
        match decision.round {
            Round::Round1 => plan.round1.push(planned),
            Round::Round2 => plan.round2.push(planned),
            Round::None => plan.rejected.push(planned),
        }
    }
    plan
}

/// All 36 (pc, pg) combinations in a fixed order.
pub fn all_pairs() -> Vec<(GarmentSpec, GarmentSpec)> {
    let specs = GarmentSpec::all();
    let mut pairs = Vec::with_capacity(36);
    for &pg in &specs {
        for &pc in &specs {
            pairs.push((pc, pg));
        }
    }
    pairs
}

/// One pair + decision per line, for plan export.
pub fn plan_line(p: &PlannedPair) -> String {
    format!("pc={} pg={} method={} round={}", p.pc, p.pg, p.decision.method, p.decision.round)
}
