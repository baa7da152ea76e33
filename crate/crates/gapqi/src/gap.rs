//! GAP structures: a decreasing domain chain with one equivalence relation per
//! level, subject to the axiom `R_n ∩ (U_n × U_m) ⊆ R_m` for `n ≤ m`.
//!
//! Structures can be derived from a partial map (classes are the fibers of the
//! iterates) or supplied explicitly, so that axiom-violating fixtures exist
//! for negative tests. Relations are stored as partitions: a class id per point
//! plus the member list of each class, members and class representatives in
//! ascending point order.

use serde::Serialize;
use thiserror::Error;

use crate::space::{DomainChain, PointId, PointSet, SpaceModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GapError {
    #[error("point `{point}` lies outside U_{level}")]
    OutsideDomain { point: String, level: usize },
    #[error("bad levels: n={n} must not exceed m={m}")]
    BadLevels { n: usize, m: usize },
    #[error("level {0} exceeds the structure depth")]
    LevelOutOfRange(usize),
    #[error("zeta override at level {level} is not R_{level}-invariant (witness `{witness}`)")]
    NonInvariantOverride { level: usize, witness: String },
    #[error("partition at level {level} mentions point `{point}` outside U_{level}")]
    PartitionOutsideDomain { level: usize, point: String },
    #[error("partition at level {level} misses or repeats point `{point}`")]
    MalformedPartition { level: usize, point: String },
}

/// Partition of one chain level into equivalence classes.
#[derive(Clone, Debug)]
pub struct LevelPartition {
    /// Class id per point index; `None` off the level's domain.
    class_of: Vec<Option<u32>>,
    /// Class members, ascending; classes ordered by least member.
    classes: Vec<Vec<PointId>>,
}

impl LevelPartition {
    /// Builds a partition from raw class lists over `domain`.
    pub fn from_classes(
        n_points: usize,
        level: usize,
        domain: &PointSet,
        raw: Vec<Vec<PointId>>,
        id_of: impl Fn(PointId) -> String,
    ) -> Result<LevelPartition, GapError> {
        let mut class_of = vec![None; n_points];
        let mut classes: Vec<Vec<PointId>> = Vec::with_capacity(raw.len());
        for members in raw {
            let mut members = members;
            members.sort_unstable();
            members.dedup();
            let cid = classes.len() as u32;
            for &p in &members {
                if !domain.contains(p) {
                    return Err(GapError::PartitionOutsideDomain {
                        level,
                        point: id_of(p),
                    });
                }
                if class_of[p.0].replace(cid).is_some() {
                    return Err(GapError::MalformedPartition {
                        level,
                        point: id_of(p),
                    });
                }
            }
            if !members.is_empty() {
                classes.push(members);
            }
        }
        for p in domain.iter() {
            if class_of[p.0].is_none() {
                return Err(GapError::MalformedPartition {
                    level,
                    point: id_of(p),
                });
            }
        }
        classes.sort_by_key(|c| c[0]);
        // Reindex class ids after sorting.
        for (cid, members) in classes.iter().enumerate() {
            for &p in members {
                class_of[p.0] = Some(cid as u32);
            }
        }
        Ok(LevelPartition { class_of, classes })
    }

    fn identity(n_points: usize, domain: &PointSet) -> LevelPartition {
        let mut class_of = vec![None; n_points];
        let mut classes = Vec::with_capacity(domain.len());
        for p in domain.iter() {
            class_of[p.0] = Some(classes.len() as u32);
            classes.push(vec![p]);
        }
        LevelPartition { class_of, classes }
    }

    pub fn class_id(&self, p: PointId) -> Option<u32> {
        self.class_of.get(p.0).copied().flatten()
    }

    pub fn class_members(&self, p: PointId) -> Option<&[PointId]> {
        self.class_id(p).map(|cid| &self.classes[cid as usize][..])
    }

    pub fn related(&self, x: PointId, y: PointId) -> bool {
        match (self.class_id(x), self.class_id(y)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// All classes, ordered by least member.
    pub fn classes(&self) -> &[Vec<PointId>] {
        &self.classes
    }
}

/// A GAP structure over a finite model, with optional declared-infinite zeta
/// regions (the finite stand-in for genuinely infinite classes).
#[derive(Clone, Debug)]
pub struct GapStructure {
    chain: DomainChain,
    relations: Vec<LevelPartition>,
    /// Effective `Z_n` per level: the R_n-saturation of every override
    /// declared at a level `<= n`, intersected with `U_n`.
    declared_infinite: Vec<PointSet>,
    n_points: usize,
}

impl GapStructure {
    /// Derives the structure from a model: classes of `R_n` are the fibers of
    /// `sigma^n` restricted to `U_n`.
    pub fn from_sigma(model: &SpaceModel, depth: usize) -> GapStructure {
        let chain = DomainChain::build(model, depth);
        let n_points = model.n_points();
        let mut relations = Vec::with_capacity(chain.depth() + 1);
        for n in 0..=chain.depth() {
            let domain = chain.level(n).unwrap();
            if n == 0 {
                relations.push(LevelPartition::identity(n_points, domain));
                continue;
            }
            // Group points of U_n by sigma^n value.
            let mut by_image: Vec<(PointId, PointId)> = domain
                .iter()
                .map(|x| (model.iterate(x, n).expect("x in U_n"), x))
                .collect();
            by_image.sort_unstable();
            let mut raw: Vec<Vec<PointId>> = Vec::new();
            for (img, x) in by_image {
                match raw.last_mut() {
                    Some(last) if model.iterate(last[0], n).unwrap() == img => last.push(x),
                    _ => raw.push(vec![x]),
                }
            }
            relations.push(
                LevelPartition::from_classes(n_points, n, domain, raw, |p| {
                    model.id_of(p).to_owned()
                })
                .expect("fibers form a partition"),
            );
        }
        let declared_infinite = vec![PointSet::empty(n_points); chain.depth() + 1];
        GapStructure {
            chain,
            relations,
            declared_infinite,
            n_points,
        }
    }

    /// Wraps explicitly given partitions. Level 0 must be supplied as the
    /// identity partition or omitted (`relations` may be shorter than the
    /// chain only at the top).
    pub fn from_partitions(
        chain: DomainChain,
        relations: Vec<LevelPartition>,
        n_points: usize,
    ) -> GapStructure {
        assert_eq!(
            relations.len(),
            chain.depth() + 1,
            "one partition per chain level"
        );
        let declared_infinite = vec![PointSet::empty(n_points); chain.depth() + 1];
        GapStructure {
            chain,
            relations,
            declared_infinite,
            n_points,
        }
    }

    /// Declares `set` to have infinite partition function at `level`.
    ///
    /// The set must be R_level-invariant. The declaration propagates upward:
    /// `Z_n ∩ U_m ⊆ Z_m` holds by construction, with R_m-saturation applied at
    /// every level.
    pub fn declare_infinite(
        &mut self,
        level: usize,
        set: &PointSet,
        id_of: impl Fn(PointId) -> String,
    ) -> Result<(), GapError> {
        if level > self.depth() {
            return Err(GapError::LevelOutOfRange(level));
        }
        // Invariance scan at the declaring level.
        for x in set.iter() {
            if let Some(members) = self.relations[level].class_members(x) {
                for &y in members {
                    if !set.contains(y) {
                        return Err(GapError::NonInvariantOverride {
                            level,
                            witness: id_of(y),
                        });
                    }
                }
            }
        }
        for n in level..=self.depth() {
            let mut eff = self.declared_infinite[n]
                .union(&set.intersection(self.chain.level(n).unwrap()));
            // R_n-saturate.
            let mut grew = true;
            while grew {
                grew = false;
                for x in eff.clone().iter() {
                    if let Some(members) = self.relations[n].class_members(x) {
                        for &y in members {
                            if !eff.contains(y) {
                                eff.insert(y);
                                grew = true;
                            }
                        }
                    }
                }
            }
            self.declared_infinite[n] = eff;
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn depth(&self) -> usize {
        self.chain.depth()
    }

    pub fn chain(&self) -> &DomainChain {
        &self.chain
    }

    pub fn level_domain(&self, n: usize) -> Result<&PointSet, GapError> {
        self.chain.level(n).ok_or(GapError::LevelOutOfRange(n))
    }

    pub fn relation(&self, n: usize) -> Result<&LevelPartition, GapError> {
        self.relations.get(n).ok_or(GapError::LevelOutOfRange(n))
    }

    /// Points declared to have infinite partition function at level `n`.
    pub fn declared_infinite(&self, n: usize) -> &PointSet {
        &self.declared_infinite[n]
    }

    pub fn has_overrides(&self) -> bool {
        self.declared_infinite.iter().any(|s| !s.is_empty())
    }

    /// `R_n(x)` including `x` itself, ascending.
    pub fn class_of(&self, n: usize, x: PointId) -> Result<&[PointId], GapError> {
        let rel = self.relation(n)?;
        rel.class_members(x).ok_or(GapError::OutsideDomain {
            point: x.to_string(),
            level: n,
        })
    }

    /// Whether `(x, y) ∈ R_n`.
    pub fn related(&self, n: usize, x: PointId, y: PointId) -> bool {
        self.relations
            .get(n)
            .map(|r| r.related(x, y))
            .unwrap_or(false)
    }

    /// The class of `x` under the union relation `R = ∪_n R_n`, computed as a
    /// transitive closure across levels.
    pub fn union_class(&self, x: PointId) -> Vec<PointId> {
        let mut seen = PointSet::empty(self.n_points);
        seen.insert(x);
        let mut frontier = vec![x];
        while let Some(p) = frontier.pop() {
            for rel in &self.relations {
                if let Some(members) = rel.class_members(p) {
                    for &q in members {
                        if !seen.contains(q) {
                            seen.insert(q);
                            frontier.push(q);
                        }
                    }
                }
            }
        }
        seen.iter().collect()
    }

    /// Splits `R_m(x)` into its constituent `R_n`-classes (`n ≤ m`).
    ///
    /// Every block carries a representative; `x` represents its own block,
    /// other blocks are represented by their least member.
    pub fn decompose_class(
        &self,
        n: usize,
        m: usize,
        x: PointId,
    ) -> Result<Vec<(PointId, Vec<PointId>)>, GapError> {
        if n > m {
            return Err(GapError::BadLevels { n, m });
        }
        let big = self.class_of(m, x)?.to_vec();
        let fine = self.relation(n)?;
        let mut blocks: Vec<(PointId, Vec<PointId>)> = Vec::new();
        let mut placed = PointSet::empty(self.n_points);
        for &y in &big {
            if placed.contains(y) {
                continue;
            }
            let members: Vec<PointId> = match fine.class_members(y) {
                Some(ms) => ms.to_vec(),
                // Points of U_m outside U_n cannot occur when the GAP axiom
                // holds; treat them as singleton blocks so the decomposition
                // is total even on invalid structures.
                None => vec![y],
            };
            for &z in &members {
                placed.insert(z);
            }
            let rep = if members.contains(&x) { x } else { members[0] };
            blocks.push((rep, members));
        }
        blocks.sort_by_key(|(_, ms)| ms[0]);
        Ok(blocks)
    }
}

/// Result of one structural check, with an optional witness pair.
#[derive(Clone, Debug, Serialize)]
pub struct StructuralCheck {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<PairWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairWitness {
    pub level_n: usize,
    pub level_m: usize,
    pub x: String,
    pub y: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<StructuralCheck>,
}

/// Exhaustive pair-scan validation of the GAP axioms and their stated
/// consequences.
pub fn validate_gap(g: &GapStructure, id_of: impl Fn(PointId) -> String) -> ValidationReport {
    let depth = g.depth();
    let mut checks = Vec::new();

    let mut push = |name: &str, witness: Option<PairWitness>| {
        checks.push(StructuralCheck {
            name: name.to_owned(),
            passed: witness.is_none(),
            witness,
        });
    };

    // Chain monotonicity and R_0 = identity.
    push(
        "chain_monotone",
        if g.chain.is_monotone() {
            None
        } else {
            let bad = (1..=depth)
                .find(|&n| {
                    !g.chain
                        .level(n)
                        .unwrap()
                        .is_subset(g.chain.level(n - 1).unwrap())
                })
                .unwrap();
            let w = g
                .chain
                .level(bad)
                .unwrap()
                .difference(g.chain.level(bad - 1).unwrap())
                .first()
                .unwrap();
            Some(PairWitness {
                level_n: bad - 1,
                level_m: bad,
                x: id_of(w),
                y: id_of(w),
            })
        },
    );
    push(
        "r0_identity",
        g.relations[0]
            .classes()
            .iter()
            .find(|c| c.len() != 1)
            .map(|c| PairWitness {
                level_n: 0,
                level_m: 0,
                x: id_of(c[0]),
                y: id_of(c[1]),
            }),
    );

    // Axiom: R_n ∩ (U_n × U_m) ⊆ R_m for n ≤ m.
    let mut axiom_witness = None;
    'axiom: for n in 0..=depth {
        for m in n..=depth {
            let um = g.chain.level(m).unwrap();
            for class in g.relations[n].classes() {
                for &x in class {
                    for &y in class {
                        if um.contains(y) && !g.related(m, x, y) {
                            axiom_witness = Some(PairWitness {
                                level_n: n,
                                level_m: m,
                                x: id_of(x),
                                y: id_of(y),
                            });
                            break 'axiom;
                        }
                    }
                }
            }
        }
    }
    push("axiom_inclusion", axiom_witness);

    // Consequence (i): the restriction of R_n to U_m is contained in R_m.
    let mut restr_witness = None;
    'restr: for n in 0..=depth {
        for m in n..=depth {
            let um = g.chain.level(m).unwrap();
            for class in g.relations[n].classes() {
                for &x in class {
                    for &y in class {
                        if um.contains(x) && um.contains(y) && !g.related(m, x, y) {
                            restr_witness = Some(PairWitness {
                                level_n: n,
                                level_m: m,
                                x: id_of(x),
                                y: id_of(y),
                            });
                            break 'restr;
                        }
                    }
                }
            }
        }
    }
    push("restriction_contained", restr_witness);

    // Consequence (ii): U_m is invariant under R_n for n ≤ m.
    let mut invar_witness = None;
    'invar: for n in 0..=depth {
        for m in n..=depth {
            let um = g.chain.level(m).unwrap();
            for class in g.relations[n].classes() {
                let touches = class.iter().any(|&y| um.contains(y));
                if touches {
                    for &x in class {
                        if !um.contains(x) {
                            let y = *class.iter().find(|&&y| um.contains(y)).unwrap();
                            invar_witness = Some(PairWitness {
                                level_n: n,
                                level_m: m,
                                x: id_of(x),
                                y: id_of(y),
                            });
                            break 'invar;
                        }
                    }
                }
            }
        }
    }
    push("level_sets_invariant", invar_witness);

    // R_n ∩ R_m = R_n ∩ R_{n+1} ∩ ... ∩ R_m.
    let mut chain_witness = None;
    'rchain: for n in 0..=depth {
        for m in n..=depth {
            for class in g.relations[n].classes() {
                for &x in class {
                    for &y in class {
                        if g.related(m, x, y) {
                            for k in n..=m {
                                if !g.related(k, x, y) {
                                    chain_witness = Some(PairWitness {
                                        level_n: n,
                                        level_m: m,
                                        x: id_of(x),
                                        y: id_of(y),
                                    });
                                    break 'rchain;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    push("relation_chain_identity", chain_witness);

    ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// An element `(x, k - l, y)` of the depth-bounded Renault-Deaconu groupoid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupoidElement {
    pub x: PointId,
    pub n: i64,
    pub y: PointId,
}

/// All triples `(x, k-l, y)` with `k, l ≤ depth`, `x ∈ U_k`, `y ∈ U_l` and
/// `sigma^k(x) = sigma^l(y)`, deduplicated as triples and sorted.
pub fn enumerate_groupoid(model: &SpaceModel, depth: usize) -> Vec<GroupoidElement> {
    let chain = DomainChain::build(model, depth);
    let mut out = Vec::new();
    for k in 0..=depth.min(chain.depth()) {
        let uk = match chain.level(k) {
            Some(s) => s,
            None => break,
        };
        for l in 0..=depth.min(chain.depth()) {
            let ul = match chain.level(l) {
                Some(s) => s,
                None => break,
            };
            for x in uk.iter() {
                let ix = model.iterate(x, k).unwrap();
                for y in ul.iter() {
                    if model.iterate(y, l).unwrap() == ix {
                        out.push(GroupoidElement {
                            x,
                            n: k as i64 - l as i64,
                            y,
                        });
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
