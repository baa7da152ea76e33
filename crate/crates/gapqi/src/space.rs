//! Finite state spaces with a partial self-map and the derived domain chain.
//!
//! Points are interned to dense indices at construction; every set that the
//! relation and operator machinery manipulates is a bitset over those indices,
//! so results are deterministic and iteration order is always ascending index.

use std::collections::BTreeMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("unknown point id `{0}`")]
    UnknownPoint(String),
    #[error("duplicate point id `{0}`")]
    DuplicatePoint(String),
    #[error("point `{point}` lies outside the domain of sigma^{level}")]
    OutsideDomain { point: String, level: usize },
}

/// Index of a point in the interning order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub usize);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A subset of the point space, backed by a bitset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    bits: FixedBitSet,
}

impl PointSet {
    pub fn empty(n_points: usize) -> PointSet {
        PointSet {
            bits: FixedBitSet::with_capacity(n_points),
        }
    }

    pub fn full(n_points: usize) -> PointSet {
        let mut bits = FixedBitSet::with_capacity(n_points);
        bits.insert_range(..);
        PointSet { bits }
    }

    pub fn from_points<I: IntoIterator<Item = PointId>>(n_points: usize, iter: I) -> PointSet {
        let mut s = PointSet::empty(n_points);
        for p in iter {
            s.insert(p);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    pub fn insert(&mut self, p: PointId) {
        self.bits.insert(p.0);
    }

    pub fn remove(&mut self, p: PointId) {
        self.bits.remove(p.0);
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.bits.contains(p.0)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Members in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = PointId> + '_ {
        self.bits.ones().map(PointId)
    }

    pub fn first(&self) -> Option<PointId> {
        self.iter().next()
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        PointSet { bits }
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        PointSet { bits }
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        PointSet { bits }
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }
}

/// A finite point space together with a partial self-map `sigma`.
#[derive(Clone, Debug)]
pub struct SpaceModel {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    sigma: Vec<Option<PointId>>,
}

impl SpaceModel {
    /// Builds a model from point ids and a partial map given on ids.
    pub fn new<S: AsRef<str>>(
        points: &[S],
        sigma_pairs: &[(S, S)],
    ) -> Result<SpaceModel, SpaceError> {
        let mut ids = Vec::with_capacity(points.len());
        let mut index = BTreeMap::new();
        for p in points {
            let id = p.as_ref().to_owned();
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(SpaceError::DuplicatePoint(id));
            }
            ids.push(id);
        }
        let mut sigma = vec![None; ids.len()];
        for (from, to) in sigma_pairs {
            let fi = *index
                .get(from.as_ref())
                .ok_or_else(|| SpaceError::UnknownPoint(from.as_ref().to_owned()))?;
            let ti = *index
                .get(to.as_ref())
                .ok_or_else(|| SpaceError::UnknownPoint(to.as_ref().to_owned()))?;
            sigma[fi] = Some(PointId(ti));
        }
        Ok(SpaceModel { ids, index, sigma })
    }

    pub fn n_points(&self) -> usize {
        self.ids.len()
    }

    pub fn id_of(&self, p: PointId) -> &str {
        &self.ids[p.0]
    }

    pub fn point(&self, id: &str) -> Result<PointId, SpaceError> {
        self.index
            .get(id)
            .map(|&i| PointId(i))
            .ok_or_else(|| SpaceError::UnknownPoint(id.to_owned()))
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> {
        (0..self.ids.len()).map(PointId)
    }

    /// `sigma(x)`, if `x` lies in the domain.
    pub fn sigma(&self, x: PointId) -> Option<PointId> {
        self.sigma[x.0]
    }

    /// The domain `U = dom(sigma)`.
    pub fn sigma_domain(&self) -> PointSet {
        PointSet::from_points(
            self.n_points(),
            self.points().filter(|&p| self.sigma(p).is_some()),
        )
    }

    /// `sigma^n(x)`. Errors unless `x` lies in `U_n`.
    pub fn iterate(&self, x: PointId, n: usize) -> Result<PointId, SpaceError> {
        let mut cur = x;
        for _ in 0..n {
            cur = self.sigma(cur).ok_or_else(|| SpaceError::OutsideDomain {
                point: self.id_of(x).to_owned(),
                level: n,
            })?;
        }
        Ok(cur)
    }
}

/// The decreasing chain `U_0 ⊇ U_1 ⊇ ...` of domains of the iterates of sigma.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainChain {
    levels: Vec<PointSet>,
}

impl DomainChain {
    /// Builds `U_0 ... U_depth` by the recursion
    /// `U_n = { x in U : sigma(x) in U_{n-1} }`.
    ///
    /// The chain is truncated right after the first empty level, since all
    /// deeper levels are empty too.
    pub fn build(model: &SpaceModel, depth: usize) -> DomainChain {
        let mut levels = vec![PointSet::full(model.n_points())];
        for _ in 1..=depth {
            let prev = levels.last().unwrap();
            let next = PointSet::from_points(
                model.n_points(),
                model
                    .points()
                    .filter(|&x| matches!(model.sigma(x), Some(y) if prev.contains(y))),
            );
            let empty = next.is_empty();
            levels.push(next);
            if empty {
                break;
            }
        }
        DomainChain { levels }
    }

    /// Wraps explicitly given levels. Callers are responsible for monotonicity;
    /// `validate_gap` re-checks it.
    pub fn from_levels(levels: Vec<PointSet>) -> DomainChain {
        assert!(!levels.is_empty(), "a domain chain has at least U_0");
        DomainChain { levels }
    }

    /// Deepest stored level index.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// `U_n`. For `n` beyond the stored depth the set is empty only if the
    /// chain stabilized at the empty set; such levels are reported as empty.
    pub fn level(&self, n: usize) -> Option<&PointSet> {
        self.levels.get(n)
    }

    pub fn contains(&self, n: usize, x: PointId) -> bool {
        match self.levels.get(n) {
            Some(s) => s.contains(x),
            None => false,
        }
    }

    pub fn iter_levels(&self) -> impl Iterator<Item = &PointSet> {
        self.levels.iter()
    }

    pub fn is_monotone(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].is_subset(&w[0]))
    }
}

#[cfg(test)]
pub(crate) fn m0() -> SpaceModel {
    // Running example: points {0,1,2,3}, sigma(1)=0, sigma(2)=0, sigma(3)=1.
    SpaceModel::new(&["0", "1", "2", "3"], &[("1", "0"), ("2", "0"), ("3", "1")]).unwrap()
}
