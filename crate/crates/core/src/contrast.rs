//! Weighted contrast between a fact and a foil under the expert model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{
    joint_rep, CharacterRep, ConceptClass, ConceptDim, ExerciseRep, ScoringModel, JOINT_DIM,
};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub fact_id: String,
    pub foil_id: String,
    /// `w ∘ g(x, fact) − w ∘ g(x, foil)`, indexed like [`ConceptDim::ALL`].
    pub delta_g: [f64; JOINT_DIM],
    /// Dimensions where the fact is ahead.
    pub s_fact: BTreeSet<ConceptDim>,
    /// Dimensions where the foil is ahead.
    pub s_foil: BTreeSet<ConceptDim>,
}

impl ContrastReport {
    pub fn fact_classes(&self) -> BTreeSet<ConceptClass> {
        self.s_fact.iter().map(|d| d.class()).collect()
    }

    pub fn foil_classes(&self) -> BTreeSet<ConceptClass> {
        self.s_foil.iter().map(|d| d.class()).collect()
    }

    pub fn total(&self) -> f64 {
        self.delta_g.iter().sum()
    }
}

pub fn contrast(
    x: &CharacterRep,
    fact: (&str, &ExerciseRep),
    foil: (&str, &ExerciseRep),
    expert: &ScoringModel,
    tol: f64,
) -> Result<ContrastReport> {
    if fact.0 == foil.0 {
        return Err(Error::DegenerateContrast(fact.0.to_string()));
    }
    let gf = joint_rep(x, fact.1).0;
    let gg = joint_rep(x, foil.1).0;
    let mut delta_g = [0.0; JOINT_DIM];
    for k in 0..JOINT_DIM {
        delta_g[k] = expert.weights[k] * gf[k] - expert.weights[k] * gg[k];
    }
    let mut s_fact = BTreeSet::new();
    let mut s_foil = BTreeSet::new();
    for dim in ConceptDim::ALL {
        let d = delta_g[dim.index()];
        if d > tol {
            s_fact.insert(dim);
        } else if d < -tol {
            s_foil.insert(dim);
        }
    }
    Ok(ContrastReport {
        fact_id: fact.0.to_string(),
        foil_id: foil.0.to_string(),
        delta_g,
        s_fact,
        s_foil,
    })
}

/// Net contrast per concept class.
pub fn concept_rollup(r: &ContrastReport) -> BTreeMap<ConceptClass, f64> {
    let mut out: BTreeMap<ConceptClass, f64> =
        ConceptClass::ALL.into_iter().map(|c| (c, 0.0)).collect();
    for dim in ConceptDim::ALL {
        *out.get_mut(&dim.class()).expect("all classes present") += r.delta_g[dim.index()];
    }
    out
}
