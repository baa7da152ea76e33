//! The conditional-expectation calculus.
//!
//! Per level n this provides the class-sum operator `F_n` (the expectation of
//! the proper relation `R_n`, zero-extended off `U_n`), the partition function
//! `zeta_n(x) = sum_{y ~ x} rho_n(y)`, the infinity/finiteness split
//! `Z_n / Y_n`, and the normalized projector
//! `Q_n(f)(x) = sum_{y ~ x} f(y) rho_n(y) zeta_n(y)^{-1}`.
//!
//! Zeta values are exact class sums on the finite backend. A model may declare
//! regions as having infinite partition function (the finite stand-in for
//! infinite classes); all downstream operators treat those through the
//! `0 * inf = 0` convention, so `zeta^{-1}` annihilates them. A budgeted
//! evaluation mode enumerates class members up to a cap and reports
//! unresolved sums as certified lower bounds instead of guessing.

use thiserror::Error;

use crate::extreal::{ExtReal, Finite, Infinity};
use crate::gap::GapStructure;
use crate::potential::CocycleTable;
use crate::space::{PointId, PointSet};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorsError {
    #[error("zeta unresolved at level {level}, point `{point}`: budget exhausted at lower bound {lower_bound}")]
    UnresolvedZeta {
        level: usize,
        point: String,
        lower_bound: f64,
    },
    #[error("level {0} out of range")]
    LevelOutOfRange(usize),
}

/// A `[0, inf]`-valued function on the whole point space, zero-extension
/// explicit.
#[derive(Clone, Debug, PartialEq)]
pub struct FnOnSpace {
    values: Vec<ExtReal>,
}

impl FnOnSpace {
    pub fn zero(n_points: usize) -> FnOnSpace {
        FnOnSpace {
            values: vec![ExtReal::ZERO; n_points],
        }
    }

    pub fn constant(n_points: usize, v: ExtReal) -> FnOnSpace {
        FnOnSpace {
            values: vec![v; n_points],
        }
    }

    pub fn indicator(n_points: usize, set: &PointSet) -> FnOnSpace {
        let mut f = FnOnSpace::zero(n_points);
        for p in set.iter() {
            f.values[p.0] = ExtReal::ONE;
        }
        f
    }

    pub fn indicator_point(n_points: usize, p: PointId) -> FnOnSpace {
        let mut f = FnOnSpace::zero(n_points);
        f.values[p.0] = ExtReal::ONE;
        f
    }

    pub fn from_values(values: Vec<ExtReal>) -> FnOnSpace {
        FnOnSpace { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, p: PointId) -> ExtReal {
        self.values[p.0]
    }

    pub fn set(&mut self, p: PointId, v: ExtReal) {
        self.values[p.0] = v;
    }

    /// Pointwise product under the `0 * inf = 0` convention.
    pub fn mul(&self, other: &FnOnSpace) -> FnOnSpace {
        FnOnSpace {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &FnOnSpace) -> FnOnSpace {
        FnOnSpace {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, c: ExtReal) -> FnOnSpace {
        FnOnSpace {
            values: self.values.iter().map(|&v| c * v).collect(),
        }
    }

    /// Zeroes the function outside `set`.
    pub fn restricted_to(&self, set: &PointSet) -> FnOnSpace {
        let mut out = FnOnSpace::zero(self.len());
        for p in set.iter() {
            out.values[p.0] = self.values[p.0];
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, ExtReal)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (PointId(i), v))
    }
}

/// `F_n(f)(x) = sum_{y in R_n(x)} f(y)` on `U_n`, zero elsewhere.
///
/// Sums accumulate in ascending point order; the class sum is computed once
/// and shared by all members.
pub fn expectation(g: &GapStructure, n: usize, f: &FnOnSpace) -> FnOnSpace {
    let mut out = FnOnSpace::zero(g.n_points());
    if let Ok(rel) = g.relation(n) {
        for class in rel.classes() {
            let s: ExtReal = class.iter().map(|&y| f.value(y)).sum();
            for &x in class {
                out.set(x, s);
            }
        }
    }
    out
}

/// Resolved partition-function value at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZetaValue {
    Finite(f64),
    Infinite,
}

impl ZetaValue {
    pub fn as_ext(self) -> ExtReal {
        match self {
            ZetaValue::Finite(v) => Finite(v),
            ZetaValue::Infinite => Infinity,
        }
    }

    /// `zeta^{-1}`, with `inf^{-1} = 0`. Never zero-division: zeta >= rho > 0.
    pub fn inv(self) -> f64 {
        match self {
            ZetaValue::Finite(v) => 1.0 / v,
            ZetaValue::Infinite => 0.0,
        }
    }
}

/// Fully resolved partition functions for all levels `0..=depth`.
#[derive(Clone, Debug)]
pub struct ZetaProfile {
    /// `levels[n][x]`, defined on `U_n`.
    levels: Vec<Vec<Option<ZetaValue>>>,
}

impl ZetaProfile {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn value(&self, n: usize, x: PointId) -> Option<ZetaValue> {
        self.levels.get(n).and_then(|l| l.get(x.0).copied().flatten())
    }
}

/// Exact partition functions: `zeta_n(x) = sum_{y in R_n(x)} rho_n(y)`,
/// with declared-infinite regions pinned to `inf`.
pub fn zeta(g: &GapStructure, ct: &CocycleTable) -> ZetaProfile {
    let depth = g.depth().min(ct.depth());
    let mut levels = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let mut level = vec![None; g.n_points()];
        let declared = g.declared_infinite(n);
        for class in g.relation(n).unwrap().classes() {
            let pinned = class.iter().any(|&y| declared.contains(y));
            let value = if pinned {
                ZetaValue::Infinite
            } else {
                let s: f64 = class
                    .iter()
                    .map(|&y| ct.rho(n, y).expect("rho defined on U_n"))
                    .sum();
                ZetaValue::Finite(s)
            };
            for &x in class {
                level[x.0] = Some(value);
            }
        }
        levels.push(level);
    }
    ZetaProfile { levels }
}

/// Tri-state partition-function value under a class-enumeration budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BudgetedZeta {
    Finite(f64),
    Infinite,
    /// Budget exhausted; the partial sum is a certified lower bound.
    Unknown { lower_bound: f64, enumerated: usize },
}

/// Budgeted evaluation: class members are enumerated in ascending order and
/// summation stops after `budget` elements. No divergence heuristics; an
/// exhausted budget yields `Unknown` with the partial sum.
pub fn zeta_budgeted(
    g: &GapStructure,
    ct: &CocycleTable,
    n: usize,
    budget: usize,
) -> Result<Vec<(PointId, BudgetedZeta)>, OperatorsError> {
    let rel = g.relation(n).map_err(|_| OperatorsError::LevelOutOfRange(n))?;
    let declared = g.declared_infinite(n);
    let mut out = Vec::new();
    for class in rel.classes() {
        let value = if class.iter().any(|&y| declared.contains(y)) {
            BudgetedZeta::Infinite
        } else if class.len() <= budget {
            BudgetedZeta::Finite(
                class
                    .iter()
                    .map(|&y| ct.rho(n, y).expect("rho on U_n"))
                    .sum(),
            )
        } else {
            BudgetedZeta::Unknown {
                lower_bound: class
                    .iter()
                    .take(budget)
                    .map(|&y| ct.rho(n, y).expect("rho on U_n"))
                    .sum(),
                enumerated: budget,
            }
        };
        for &x in class {
            out.push((x, value));
        }
    }
    out.sort_by_key(|(p, _)| *p);
    Ok(out)
}

/// Resolves a budgeted slice into profile entries, erroring on `Unknown`.
pub fn resolve_budgeted(
    slice: &[(PointId, BudgetedZeta)],
    level: usize,
    id_of: impl Fn(PointId) -> String,
) -> Result<Vec<(PointId, ZetaValue)>, OperatorsError> {
    slice
        .iter()
        .map(|&(p, v)| match v {
            BudgetedZeta::Finite(x) => Ok((p, ZetaValue::Finite(x))),
            BudgetedZeta::Infinite => Ok((p, ZetaValue::Infinite)),
            BudgetedZeta::Unknown { lower_bound, .. } => Err(OperatorsError::UnresolvedZeta {
                level,
                point: id_of(p),
                lower_bound,
            }),
        })
        .collect()
}

/// The per-level split `Z_n` (infinite partition function) and
/// `Y_n = U_n \ Z_n`.
#[derive(Clone, Debug)]
pub struct LevelSets {
    z: Vec<PointSet>,
    y: Vec<PointSet>,
}

impl LevelSets {
    pub fn depth(&self) -> usize {
        self.z.len() - 1
    }

    pub fn z(&self, n: usize) -> &PointSet {
        &self.z[n]
    }

    pub fn y(&self, n: usize) -> &PointSet {
        &self.y[n]
    }

    /// `Z = ∪_n Z_n`.
    pub fn z_union(&self) -> PointSet {
        let mut acc = PointSet::empty(self.z[0].capacity());
        for zn in &self.z {
            acc = acc.union(zn);
        }
        acc
    }
}

/// Extracts `Z_n / Y_n` from a resolved profile and re-verifies the
/// monotonicity facts `Z_n ∩ U_m ⊆ Z_m` and `Y_m ⊆ Y_n` (they hold by
/// construction; a violation is a bug).
pub fn level_sets(g: &GapStructure, zp: &ZetaProfile) -> LevelSets {
    let depth = zp.depth();
    let mut z = Vec::with_capacity(depth + 1);
    let mut y = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let un = g.level_domain(n).unwrap();
        let mut zn = PointSet::empty(g.n_points());
        for x in un.iter() {
            if zp.value(n, x) == Some(ZetaValue::Infinite) {
                zn.insert(x);
            }
        }
        let yn = un.difference(&zn);
        z.push(zn);
        y.push(yn);
    }
    debug_assert!(z[0].is_empty(), "Z_0 must be empty: zeta_0 = 1");
    for n in 0..=depth {
        for m in n..=depth {
            debug_assert!(
                z[n].intersection(g.level_domain(m).unwrap()).is_subset(&z[m]),
                "Z_{n} ∩ U_{m} ⊄ Z_{m}"
            );
            debug_assert!(y[m].is_subset(&y[n]), "Y_{m} ⊄ Y_{n}");
        }
    }
    LevelSets { z, y }
}

/// `Q_n(f)(x) = sum_{y in R_n(x)} f(y) rho_n(y) zeta_n(y)^{-1}` on `U_n`,
/// zero elsewhere. `zeta^{-1} = 0` on `Z_n` kills those terms.
pub fn projector(
    g: &GapStructure,
    ct: &CocycleTable,
    zp: &ZetaProfile,
    n: usize,
    f: &FnOnSpace,
) -> FnOnSpace {
    let mut out = FnOnSpace::zero(g.n_points());
    if let Ok(rel) = g.relation(n) {
        for class in rel.classes() {
            let s: ExtReal = class
                .iter()
                .map(|&y| {
                    let w = ct.rho(n, y).expect("rho on U_n")
                        * zp.value(n, y).expect("zeta on U_n").inv();
                    f.value(y) * Finite(w)
                })
                .sum();
            for &x in class {
                out.set(x, s);
            }
        }
    }
    out
}

/// Which level operator a handle denotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `f ↦ F_n(rho_n f)`, the weighted expectation `E_rho` of the level.
    WeightedExpectation,
    /// The normalized projector `Q_n` (equivalently `P_rho` zero-extended).
    Projector,
}

/// Level-indexed operator descriptor; applies to functions forward and to
/// measure weight vectors dually.
pub struct LevelOperator<'a> {
    pub kind: OperatorKind,
    pub g: &'a GapStructure,
    pub ct: &'a CocycleTable,
    pub zp: &'a ZetaProfile,
    pub n: usize,
}

impl<'a> LevelOperator<'a> {
    pub fn apply(&self, f: &FnOnSpace) -> FnOnSpace {
        match self.kind {
            OperatorKind::WeightedExpectation => {
                let rho = rho_fn(self.g, self.ct, self.n);
                expectation(self.g, self.n, &f.mul(&rho))
            }
            OperatorKind::Projector => projector(self.g, self.ct, self.zp, self.n, f),
        }
    }

    /// Dual action on a weight vector: `(T* nu)({x}) = <T(1_x), nu>`,
    /// computed in closed form by one pass over classes.
    pub fn dual_apply(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.g.n_points()];
        if let Ok(rel) = self.g.relation(self.n) {
            for class in rel.classes() {
                let class_mass: f64 = class.iter().map(|&y| weights[y.0]).sum();
                for &x in class {
                    let factor = match self.kind {
                        OperatorKind::WeightedExpectation => {
                            self.ct.rho(self.n, x).expect("rho on U_n")
                        }
                        OperatorKind::Projector => {
                            self.ct.rho(self.n, x).expect("rho on U_n")
                                * self.zp.value(self.n, x).expect("zeta on U_n").inv()
                        }
                    };
                    out[x.0] = factor * class_mass;
                }
            }
        }
        out
    }

    /// Dense matrix export: `rows = target points`, `columns = source
    /// points`, entry `(x, t) = T(1_t)(x)`. Finite by construction for the
    /// projector; the weighted expectation is finite on finite classes.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let np = self.g.n_points();
        let mut m = vec![vec![0.0; np]; np];
        for t in 0..np {
            let col = self.apply(&FnOnSpace::indicator_point(np, PointId(t)));
            for x in 0..np {
                m[x][t] = match col.value(PointId(x)) {
                    Finite(v) => v,
                    Infinity => f64::INFINITY,
                };
            }
        }
        m
    }
}

/// `rho_n` as a function on the space (zero off `U_n`).
pub fn rho_fn(g: &GapStructure, ct: &CocycleTable, n: usize) -> FnOnSpace {
    let mut f = FnOnSpace::zero(g.n_points());
    if let Ok(un) = g.level_domain(n) {
        for x in un.iter() {
            f.set(x, Finite(ct.rho(n, x).expect("rho on U_n")));
        }
    }
    f
}

/// `zeta_n` as a function on the space (zero off `U_n`), infinite entries
/// mapped to the extended-real infinity.
pub fn zeta_fn(g: &GapStructure, zp: &ZetaProfile, n: usize) -> FnOnSpace {
    let mut f = FnOnSpace::zero(g.n_points());
    if let Ok(un) = g.level_domain(n) {
        for x in un.iter() {
            f.set(x, zp.value(n, x).expect("zeta on U_n").as_ext());
        }
    }
    f
}

/// `rho_n * zeta_n^{-1}` as a finite-valued function (zero on `Z_n` and off
/// `U_n`).
pub fn rho_zeta_inv_fn(
    g: &GapStructure,
    ct: &CocycleTable,
    zp: &ZetaProfile,
    n: usize,
) -> FnOnSpace {
    let mut f = FnOnSpace::zero(g.n_points());
    if let Ok(un) = g.level_domain(n) {
        for x in un.iter() {
            let v = ct.rho(n, x).expect("rho on U_n") * zp.value(n, x).expect("zeta on U_n").inv();
            f.set(x, Finite(v));
        }
    }
    f
}
