//! Potentials and cocycles.
//!
//! A potential is a family `{k_n}_{n >= 1}` of functions on the chain levels,
//! constant on `R_{n-1}`-classes inside `U_n`. It accumulates to
//! `h_n = h_{n-1}|U_n + k_n` (with `h_0 = 0`), weights `rho_n = e^{h_n}` and
//! additive cocycles `c_n(x, y) = h_n(x) - h_n(y)` that glue to a single
//! cocycle on the union relation. For a map-derived potential
//! `k_n(x) = h(sigma^{n-1}(x))` the glued cocycle agrees with the Birkhoff
//! difference cocycle of the Renault-Deaconu groupoid.

use serde::Serialize;
use thiserror::Error;

use crate::extreal::approx_eq_f64;
use crate::gap::{GapStructure, GroupoidElement};
use crate::space::{PointId, SpaceModel};

/// Tolerance for cross-level cocycle gluing; pure float-accumulation slack.
const GLUE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("potential value missing for point `{0}`")]
    MissingPotentialValue(String),
    #[error("potential violates class-constancy at level {level} on pair (`{x}`, `{y}`)")]
    NotClassConstant { level: usize, x: String, y: String },
    #[error(
        "cocycle gluing failed on pair (`{x}`, `{y}`): c_{n} = {cn} but c_{m} = {cm}"
    )]
    CocycleMismatch {
        n: usize,
        m: usize,
        x: String,
        y: String,
        cn: f64,
        cm: f64,
    },
    #[error("({k}, {l}) is not a valid witness for the groupoid element")]
    InvalidWitness { k: usize, l: usize },
    #[error("witness values disagree for a groupoid element: {a} vs {b}")]
    WitnessMismatch { a: f64, b: f64 },
    #[error("level {0} out of range for this potential")]
    LevelOutOfRange(usize),
}

/// Per-level functions `k_n` (n >= 1). There is no `k_0`.
#[derive(Clone, Debug)]
pub struct Potential {
    /// `k[n]` holds level n; index 0 is unused and empty.
    k: Vec<Vec<Option<f64>>>,
}

impl Potential {
    /// Builds the map-derived potential `k_n(x) = h(sigma^{n-1}(x))`.
    ///
    /// `h` is indexed by point and must be defined on all of `dom(sigma)`
    /// that the chain reaches.
    pub fn from_h(
        model: &SpaceModel,
        h: &[Option<f64>],
        depth: usize,
    ) -> Result<Potential, PotentialError> {
        let g = GapStructure::from_sigma(model, depth);
        let mut k = vec![vec![None; model.n_points()]];
        for n in 1..=g.depth() {
            let mut level = vec![None; model.n_points()];
            for x in g.level_domain(n).unwrap().iter() {
                let t = model.iterate(x, n - 1).expect("x in U_n implies U_{n-1}");
                let v = h
                    .get(t.0)
                    .copied()
                    .flatten()
                    .ok_or_else(|| PotentialError::MissingPotentialValue(model.id_of(t).to_owned()))?;
                level[x.0] = Some(v);
            }
            k.push(level);
        }
        Ok(Potential { k })
    }

    /// Wraps explicitly given level functions (index 0 ignored); used for
    /// loading hand-written potentials, including invalid ones for negative
    /// tests.
    pub fn from_levels(n_points: usize, mut k: Vec<Vec<Option<f64>>>) -> Potential {
        if k.is_empty() {
            k.push(vec![None; n_points]);
        } else {
            k[0] = vec![None; n_points];
        }
        Potential { k }
    }

    /// Number of potential levels (the largest n with a `k_n`).
    pub fn depth(&self) -> usize {
        self.k.len() - 1
    }

    pub fn value(&self, n: usize, x: PointId) -> Option<f64> {
        self.k.get(n).and_then(|lvl| lvl.get(x.0).copied().flatten())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialCheck {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<PotentialWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialWitness {
    pub level: usize,
    pub x: String,
    pub y: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialReport {
    pub passed: bool,
    pub checks: Vec<PotentialCheck>,
}

/// Exhaustive check that `k_n` is constant on `R_{n-1} ∩ (U_n × U_n)` pairs,
/// plus the identity `R_{n-1} ∩ (U_n × U_n) = R_{n-1} ∩ R_n`.
pub fn validate_potential(
    g: &GapStructure,
    p: &Potential,
    id_of: impl Fn(PointId) -> String,
) -> PotentialReport {
    let mut checks = Vec::new();
    let top = p.depth().min(g.depth());

    let mut const_witness = None;
    'constancy: for n in 1..=top {
        let un = g.level_domain(n).unwrap();
        for class in g.relation(n - 1).unwrap().classes() {
            let inside: Vec<PointId> = class.iter().copied().filter(|&x| un.contains(x)).collect();
            for w in inside.windows(2) {
                let (a, b) = (p.value(n, w[0]), p.value(n, w[1]));
                if a != b {
                    const_witness = Some(PotentialWitness {
                        level: n,
                        x: id_of(w[0]),
                        y: id_of(w[1]),
                    });
                    break 'constancy;
                }
            }
        }
    }
    checks.push(PotentialCheck {
        name: "class_constancy".to_owned(),
        passed: const_witness.is_none(),
        witness: const_witness,
    });

    // R_{n-1} ∩ (U_n × U_n) = R_{n-1} ∩ R_n, by pair scan both ways.
    let mut ident_witness = None;
    'ident: for n in 1..=g.depth() {
        let un = g.level_domain(n).unwrap();
        for class in g.relation(n - 1).unwrap().classes() {
            for &x in class {
                for &y in class {
                    let lhs = un.contains(x) && un.contains(y);
                    let rhs = g.related(n, x, y);
                    if lhs != rhs {
                        ident_witness = Some(PotentialWitness {
                            level: n,
                            x: id_of(x),
                            y: id_of(y),
                        });
                        break 'ident;
                    }
                }
            }
        }
    }
    checks.push(PotentialCheck {
        name: "restriction_equals_intersection".to_owned(),
        passed: ident_witness.is_none(),
        witness: ident_witness,
    });

    PotentialReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// Accumulated potentials, weights and the glued additive cocycle.
#[derive(Clone, Debug)]
pub struct CocycleTable {
    /// `h[n][x]`, defined on `U_n`.
    h: Vec<Vec<Option<f64>>>,
    /// `rho[n][x] = e^{h_n(x)}`, defined on `U_n`.
    rho: Vec<Vec<Option<f64>>>,
    depth: usize,
}

impl CocycleTable {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn h(&self, n: usize, x: PointId) -> Option<f64> {
        self.h.get(n).and_then(|lvl| lvl.get(x.0).copied().flatten())
    }

    pub fn rho(&self, n: usize, x: PointId) -> Option<f64> {
        self.rho
            .get(n)
            .and_then(|lvl| lvl.get(x.0).copied().flatten())
    }

    /// `c_n(x, y) = h_n(x) - h_n(y)` for `(x, y) ∈ R_n`; callers check
    /// relation membership.
    pub fn cocycle(&self, n: usize, x: PointId, y: PointId) -> Option<f64> {
        Some(self.h(n, x)? - self.h(n, y)?)
    }

    /// The level increment `k_n(x) = h_n(x) - h_{n-1}(x)` for `n >= 1`.
    pub fn level_potential(&self, n: usize, x: PointId) -> Option<f64> {
        if n == 0 {
            return None;
        }
        Some(self.h(n, x)? - self.h(n - 1, x)?)
    }

    /// Multiplicative cocycle `D_n = e^{c_n}`.
    pub fn d_value(&self, n: usize, x: PointId, y: PointId) -> Option<f64> {
        self.cocycle(n, x, y).map(f64::exp)
    }
}

/// Computes `h_n`, `rho_n` and verifies that the per-level cocycles agree on
/// overlaps, so they glue to a single cocycle on the union relation.
pub fn build_cocycle(
    g: &GapStructure,
    p: &Potential,
    id_of: impl Fn(PointId) -> String,
) -> Result<CocycleTable, PotentialError> {
    let depth = g.depth().min(p.depth().max(0));
    let n_points = g.n_points();

    let mut h: Vec<Vec<Option<f64>>> = Vec::with_capacity(depth + 1);
    h.push(
        (0..n_points)
            .map(|i| {
                if g.level_domain(0).unwrap().contains(PointId(i)) {
                    Some(0.0)
                } else {
                    None
                }
            })
            .collect(),
    );
    for n in 1..=depth {
        let mut level = vec![None; n_points];
        for x in g.level_domain(n).unwrap().iter() {
            let prev = h[n - 1][x.0].ok_or_else(|| {
                PotentialError::MissingPotentialValue(id_of(x))
            })?;
            let kn = p
                .value(n, x)
                .ok_or_else(|| PotentialError::MissingPotentialValue(id_of(x)))?;
            level[x.0] = Some(prev + kn);
        }
        h.push(level);
    }
    let rho: Vec<Vec<Option<f64>>> = h
        .iter()
        .map(|lvl| lvl.iter().map(|v| v.map(f64::exp)).collect())
        .collect();
    let table = CocycleTable { h, rho, depth };

    // Gluing: on every pair lying in both R_n and R_m, the cocycles agree.
    for n in 0..=depth {
        for m in (n + 1)..=depth {
            for class in g.relation(n).unwrap().classes() {
                for &x in class {
                    for &y in class {
                        if x < y && g.related(m, x, y) {
                            let cn = table.cocycle(n, x, y).unwrap();
                            let cm = table.cocycle(m, x, y).unwrap();
                            if !approx_eq_f64(cn, cm, GLUE_TOL) {
                                return Err(PotentialError::CocycleMismatch {
                                    n,
                                    m,
                                    x: id_of(x),
                                    y: id_of(y),
                                    cn,
                                    cm,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(table)
}

/// Birkhoff-difference cocycle value
/// `b(x, k-l, y) = sum_{i<k} h(sigma^i x) - sum_{i<l} h(sigma^i y)`
/// for one declared witness `(k, l)`.
pub fn rd_cocycle_value(
    model: &SpaceModel,
    h: &[Option<f64>],
    elem: GroupoidElement,
    k: usize,
    l: usize,
) -> Result<f64, PotentialError> {
    if k as i64 - l as i64 != elem.n {
        return Err(PotentialError::InvalidWitness { k, l });
    }
    let (ix, iy) = match (model.iterate(elem.x, k), model.iterate(elem.y, l)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Err(PotentialError::InvalidWitness { k, l }),
    };
    if ix != iy {
        return Err(PotentialError::InvalidWitness { k, l });
    }
    let birkhoff = |start: PointId, steps: usize| -> Result<f64, PotentialError> {
        let mut acc = 0.0;
        let mut cur = start;
        for _ in 0..steps {
            let v = h
                .get(cur.0)
                .copied()
                .flatten()
                .ok_or_else(|| PotentialError::MissingPotentialValue(model.id_of(cur).to_owned()))?;
            acc += v;
            cur = model.sigma(cur).expect("witness keeps iterates defined");
        }
        Ok(acc)
    };
    Ok(birkhoff(elem.x, k)? - birkhoff(elem.y, l)?)
}

/// Evaluates `b` on `elem` while verifying witness-independence: every valid
/// witness with `k, l <= depth` must produce the same value.
pub fn rd_cocycle_checked(
    model: &SpaceModel,
    h: &[Option<f64>],
    elem: GroupoidElement,
    depth: usize,
) -> Result<f64, PotentialError> {
    let mut value: Option<f64> = None;
    for k in 0..=depth {
        let l = k as i64 - elem.n;
        if l < 0 {
            continue;
        }
        let l = l as usize;
        if l > depth {
            continue;
        }
        match rd_cocycle_value(model, h, elem, k, l) {
            Ok(v) => match value {
                None => value = Some(v),
                Some(prev) => {
                    if !approx_eq_f64(prev, v, GLUE_TOL) {
                        return Err(PotentialError::WitnessMismatch { a: prev, b: v });
                    }
                }
            },
            Err(PotentialError::InvalidWitness { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    value.ok_or(PotentialError::InvalidWitness {
        k: depth + 1,
        l: depth + 1,
    })
}

/// Convenience: dense `h` vector over `dom(sigma)` from id-keyed values.
pub fn h_from_pairs(
    model: &SpaceModel,
    values: &[(String, f64)],
) -> Result<Vec<Option<f64>>, PotentialError> {
    let mut h = vec![None; model.n_points()];
    for (id, v) in values {
        let p = model
            .point(id)
            .map_err(|_| PotentialError::MissingPotentialValue(id.clone()))?;
        h[p.0] = Some(*v);
    }
    Ok(h)
}

#[cfg(test)]
pub(crate) fn m0_h(model: &SpaceModel) -> Vec<Option<f64>> {
    // h(1) = ln 2, h(2) = 0, h(3) = 0 on dom(sigma) = {1, 2, 3}.
    let mut h = vec![None; model.n_points()];
    h[model.point("1").unwrap().0] = Some(2.0_f64.ln());
    h[model.point("2").unwrap().0] = Some(0.0);
    h[model.point("3").unwrap().0] = Some(0.0);
    h
}
