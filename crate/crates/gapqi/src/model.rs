//! Model-file ingestion.
//!
//! A model file is a JSON document describing the point space, the partial
//! map, the potential, optional explicit structures (for negative fixtures),
//! declared-infinite zeta regions, and named measures:
//!
//! ```json
//! {
//!   "points": ["0", "1", "2", "3"],
//!   "sigma": { "1": "0", "2": "0", "3": "1" },
//!   "potential_h": { "1": 0.6931471805599453, "2": 0.0, "3": 0.0 },
//!   "explicit_gap": { "levels": [ { "domain": [...], "classes": [[...]] } ] },
//!   "explicit_potential": [ { "level": 1, "values": { "1": 0.5 } } ],
//!   "zeta_overrides": [ { "level": 1, "points": ["1", "2"] } ],
//!   "measures": { "mu1": { "1": 2.0, "2": 1.0 } },
//!   "depth": 3
//! }
//! ```
//!
//! Everything except `points` is optional. A missing `potential_h` means the
//! zero potential on `dom(sigma)`. When `explicit_gap` is present it replaces
//! the map-derived structure wholesale (including its domains), which is how
//! axiom-violating fixtures are expressed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::gap::{GapError, GapStructure, LevelPartition};
use crate::measures::Measure;
use crate::potential::{Potential, PotentialError};
use crate::space::{DomainChain, PointSet, SpaceModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown point id `{0}`")]
    UnknownId(String),
    #[error("duplicate point id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    NonInvariantOverride(GapError),
    #[error("invalid explicit structure: {0}")]
    InvalidStructure(GapError),
    #[error("invalid potential: {0}")]
    InvalidPotential(#[from] PotentialError),
    #[error("measure `{name}` has a negative or non-finite weight at `{point}`")]
    BadWeight { name: String, point: String },
    #[error("no measure named `{0}` in the model file")]
    NoSuchMeasure(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub points: Vec<String>,
    #[serde(default)]
    pub sigma: BTreeMap<String, String>,
    #[serde(default)]
    pub potential_h: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub explicit_gap: Option<ExplicitGap>,
    #[serde(default)]
    pub explicit_potential: Option<Vec<ExplicitPotentialLevel>>,
    #[serde(default)]
    pub zeta_overrides: Vec<ZetaOverride>,
    #[serde(default)]
    pub measures: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub depth: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct ExplicitGap {
    pub levels: Vec<ExplicitLevel>,
}

#[derive(Debug, Deserialize)]
pub struct ExplicitLevel {
    pub domain: Vec<String>,
    pub classes: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
pub struct ExplicitPotentialLevel {
    pub level: usize,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
pub struct ZetaOverride {
    pub level: usize,
    pub points: Vec<String>,
}

/// A fully resolved model: interned space, structure with overrides applied,
/// potential, and named measures.
pub struct LoadedModel {
    pub space: SpaceModel,
    pub gap: GapStructure,
    pub potential: Potential,
    pub measures: BTreeMap<String, Measure>,
    pub h: Vec<Option<f64>>,
    pub depth: usize,
}

pub const DEFAULT_DEPTH: usize = 4;

pub fn load_model(path: &Path, depth_flag: Option<usize>) -> Result<LoadedModel, ModelError> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    resolve_model(file, depth_flag)
}

pub fn resolve_model(file: ModelFile, depth_flag: Option<usize>) -> Result<LoadedModel, ModelError> {
    let sigma_pairs: Vec<(String, String)> = file
        .sigma
        .iter()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    let space = SpaceModel::new(&file.points, &sigma_pairs).map_err(|e| match e {
        crate::space::SpaceError::UnknownPoint(id) => ModelError::UnknownId(id),
        crate::space::SpaceError::DuplicatePoint(id) => ModelError::DuplicateId(id),
        other => ModelError::UnknownId(other.to_string()),
    })?;
    let depth = depth_flag.or(file.depth).unwrap_or(DEFAULT_DEPTH);

    // h on dom(sigma): explicit values, or zero by default.
    let mut h = vec![None; space.n_points()];
    match &file.potential_h {
        Some(values) => {
            for (id, v) in values {
                let p = space
                    .point(id)
                    .map_err(|_| ModelError::UnknownId(id.clone()))?;
                h[p.0] = Some(*v);
            }
        }
        None => {
            for p in space.points() {
                if space.sigma(p).is_some() {
                    h[p.0] = Some(0.0);
                }
            }
        }
    }

    let mut gap = match &file.explicit_gap {
        Some(explicit) => {
            let mut domains = Vec::new();
            let mut partitions = Vec::new();
            for (level, lv) in explicit.levels.iter().enumerate() {
                let mut domain = PointSet::empty(space.n_points());
                for id in &lv.domain {
                    domain.insert(
                        space
                            .point(id)
                            .map_err(|_| ModelError::UnknownId(id.clone()))?,
                    );
                }
                let mut classes = Vec::new();
                for class in &lv.classes {
                    let mut members = Vec::new();
                    for id in class {
                        members.push(
                            space
                                .point(id)
                                .map_err(|_| ModelError::UnknownId(id.clone()))?,
                        );
                    }
                    classes.push(members);
                }
                let partition = LevelPartition::from_classes(
                    space.n_points(),
                    level,
                    &domain,
                    classes,
                    |p| space.id_of(p).to_owned(),
                )
                .map_err(ModelError::InvalidStructure)?;
                domains.push(domain);
                partitions.push(partition);
            }
            GapStructure::from_partitions(
                DomainChain::from_levels(domains),
                partitions,
                space.n_points(),
            )
        }
        None => GapStructure::from_sigma(&space, depth),
    };

    for ov in &file.zeta_overrides {
        let mut set = PointSet::empty(space.n_points());
        for id in &ov.points {
            set.insert(
                space
                    .point(id)
                    .map_err(|_| ModelError::UnknownId(id.clone()))?,
            );
        }
        gap.declare_infinite(ov.level, &set, |p| space.id_of(p).to_owned())
            .map_err(ModelError::NonInvariantOverride)?;
    }

    let potential = match &file.explicit_potential {
        Some(levels) => {
            let max_level = levels.iter().map(|l| l.level).max().unwrap_or(0);
            let mut k = vec![vec![None; space.n_points()]; max_level + 1];
            for lv in levels {
                for (id, v) in &lv.values {
                    let p = space
                        .point(id)
                        .map_err(|_| ModelError::UnknownId(id.clone()))?;
                    k[lv.level][p.0] = Some(*v);
                }
            }
            Potential::from_levels(space.n_points(), k)
        }
        None => Potential::from_h(&space, &h, gap.depth())?,
    };

    let mut measures = BTreeMap::new();
    for (name, weights) in &file.measures {
        let mut m = Measure::zero(space.n_points());
        for (id, w) in weights {
            let p = space
                .point(id)
                .map_err(|_| ModelError::UnknownId(id.clone()))?;
            if !w.is_finite() || *w < 0.0 {
                return Err(ModelError::BadWeight {
                    name: name.clone(),
                    point: id.clone(),
                });
            }
            m.set_weight(p, *w);
        }
        measures.insert(name.clone(), m);
    }

    Ok(LoadedModel {
        space,
        gap,
        potential,
        measures,
        h,
        depth,
    })
}

impl LoadedModel {
    pub fn measure(&self, name: &str) -> Result<&Measure, ModelError> {
        self.measures
            .get(name)
            .ok_or_else(|| ModelError::NoSuchMeasure(name.to_owned()))
    }
}
