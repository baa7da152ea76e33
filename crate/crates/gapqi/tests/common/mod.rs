//! Shared fixtures for the integration suites: seeded random models, random
//! measures and functions, and independent oracle implementations (dense
//! matrices, brute-force power iteration) that never call the production
//! closed-form paths they are checking.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gapqi::extreal::{ExtReal, Finite, Infinity};
use gapqi::gap::GapStructure;
use gapqi::measures::{Measure, QiContext};
use gapqi::operators::{level_sets, zeta, FnOnSpace, LevelSets, ZetaProfile};
use gapqi::potential::{build_cocycle, CocycleTable, Potential};
use gapqi::space::{PointId, PointSet, SpaceModel};

pub struct Instance {
    pub model: SpaceModel,
    pub gap: GapStructure,
    pub ct: CocycleTable,
    pub zp: ZetaProfile,
    pub ls: LevelSets,
    pub h: Vec<Option<f64>>,
    pub depth: usize,
}

impl Instance {
    pub fn ctx(&self) -> QiContext<'_> {
        QiContext {
            model: &self.model,
            gap: &self.gap,
            ct: &self.ct,
            zp: &self.zp,
            ls: &self.ls,
        }
    }

    pub fn n_points(&self) -> usize {
        self.model.n_points()
    }
}

pub struct InstanceParams {
    pub n_points: usize,
    pub density: f64,
    pub depth: usize,
    pub with_override: bool,
    pub h_range: (f64, f64),
}

impl Default for InstanceParams {
    fn default() -> InstanceParams {
        InstanceParams {
            n_points: 24,
            density: 0.6,
            depth: 5,
            with_override: false,
            h_range: (-2.0, 2.0),
        }
    }
}

/// Samples a partial map with the given domain density, a potential in the
/// given range, and optionally declares one random class at one random level
/// to have infinite partition function.
pub fn random_instance(seed: u64, params: &InstanceParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n_points;
    let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut pairs = Vec::new();
    for id in &ids {
        if rng.gen_bool(params.density) {
            let target = ids[rng.gen_range(0..n)].clone();
            pairs.push((id.clone(), target));
        }
    }
    let model = SpaceModel::new(&ids, &pairs).unwrap();

    let h_dist = Uniform::new_inclusive(params.h_range.0, params.h_range.1);
    let mut h = vec![None; n];
    for p in model.points() {
        if model.sigma(p).is_some() {
            h[p.0] = Some(h_dist.sample(&mut rng));
        }
    }

    let mut gap = GapStructure::from_sigma(&model, params.depth);
    if params.with_override {
        // Pick a random nonempty level >= 1 and pin one whole class there.
        let candidates: Vec<usize> = (1..=gap.depth())
            .filter(|&lvl| !gap.level_domain(lvl).unwrap().is_empty())
            .collect();
        if let Some(&lvl) = candidates.choose(&mut rng) {
            let classes = gap.relation(lvl).unwrap().classes().to_vec();
            let class = classes.choose(&mut rng).unwrap().clone();
            let set = PointSet::from_points(n, class.iter().copied());
            gap.declare_infinite(lvl, &set, |p| model.id_of(p).to_owned())
                .unwrap();
        }
    }

    let potential = Potential::from_h(&model, &h, params.depth).unwrap();
    let ct = build_cocycle(&gap, &potential, |p| model.id_of(p).to_owned()).unwrap();
    let zp = zeta(&gap, &ct);
    let ls = level_sets(&gap, &zp);
    let depth = gap.depth().min(ct.depth());
    Instance {
        model,
        gap,
        ct,
        zp,
        ls,
        h,
        depth,
    }
}

pub fn random_measure(rng: &mut ChaCha8Rng, n_points: usize) -> Measure {
    let mut m = Measure::zero(n_points);
    for i in 0..n_points {
        if rng.gen_bool(0.7) {
            m.set_weight(PointId(i), rng.gen_range(0.0..2.0));
        }
    }
    m
}

/// A nonnegative random function, with occasional infinite values to
/// exercise the extended-real branches.
pub fn random_fn(rng: &mut ChaCha8Rng, n_points: usize, allow_infinite: bool) -> FnOnSpace {
    let mut f = FnOnSpace::zero(n_points);
    for i in 0..n_points {
        let v = if allow_infinite && rng.gen_bool(0.05) {
            Infinity
        } else if rng.gen_bool(0.8) {
            Finite(rng.gen_range(0.0..3.0))
        } else {
            ExtReal::ZERO
        };
        f.set(PointId(i), v);
    }
    f
}

/// A random R_n-invariant function: constant on every class of the level,
/// arbitrary off the domain.
pub fn random_invariant_fn(
    rng: &mut ChaCha8Rng,
    inst: &Instance,
    n: usize,
    allow_infinite: bool,
) -> FnOnSpace {
    let np = inst.n_points();
    let mut f = FnOnSpace::zero(np);
    for class in inst.gap.relation(n).unwrap().classes() {
        let v = if allow_infinite && rng.gen_bool(0.05) {
            Infinity
        } else {
            Finite(rng.gen_range(0.0..3.0))
        };
        for &x in class {
            f.set(x, v);
        }
    }
    let un = inst.gap.level_domain(n).unwrap();
    for i in 0..np {
        let p = PointId(i);
        if !un.contains(p) {
            f.set(p, Finite(rng.gen_range(0.0..3.0)));
        }
    }
    f
}

/// A random R_n-invariant subset of the space: a union of classes plus
/// arbitrary points off the level domain.
pub fn random_invariant_set(rng: &mut ChaCha8Rng, inst: &Instance, n: usize) -> PointSet {
    let np = inst.n_points();
    let mut set = PointSet::empty(np);
    for class in inst.gap.relation(n).unwrap().classes() {
        if rng.gen_bool(0.5) {
            for &x in class {
                set.insert(x);
            }
        }
    }
    let un = inst.gap.level_domain(n).unwrap();
    for i in 0..np {
        let p = PointId(i);
        if !un.contains(p) && rng.gen_bool(0.3) {
            set.insert(p);
        }
    }
    set
}

pub fn ext_close(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    gapqi::extreal::approx_eq(a, b, tol)
}

pub fn fns_close(a: &FnOnSpace, b: &FnOnSpace, tol: f64) -> bool {
    (0..a.len()).all(|i| ext_close(a.value(PointId(i)), b.value(PointId(i)), tol))
}

/// Integration of a function against plain weights, in extended reals.
pub fn pair_weights(f: &FnOnSpace, weights: &[f64]) -> ExtReal {
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| f.value(PointId(i)) * Finite(w))
        .sum()
}

/// Dense-matrix oracle: materialize `T` column by column on the indicator
/// basis, then act on measures through the explicit transpose.
pub fn dense_transpose_apply<T: Fn(&FnOnSpace) -> FnOnSpace>(
    apply: T,
    n_points: usize,
    weights: &[f64],
) -> Vec<f64> {
    let mut matrix = vec![vec![0.0; n_points]; n_points];
    for t in 0..n_points {
        let col = apply(&FnOnSpace::indicator_point(n_points, PointId(t)));
        for x in 0..n_points {
            matrix[x][t] = match col.value(PointId(x)) {
                Finite(v) => v,
                Infinity => f64::INFINITY,
            };
        }
    }
    (0..n_points)
        .map(|t| (0..n_points).map(|x| matrix[x][t] * weights[x]).sum())
        .collect()
}

/// Brute-force power iteration on the explicitly assembled dual transfer
/// matrix; an independent implementation of the eigenmeasure solve.
pub fn dense_eigensolve(
    model: &SpaceModel,
    rho_of: impl Fn(PointId) -> f64,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<(f64, Vec<f64>, usize)> {
    let n = model.n_points();
    let mut matrix = vec![vec![0.0; n]; n];
    for t in model.points() {
        if let Some(x) = model.sigma(t) {
            matrix[t.0][x.0] = rho_of(t);
        }
    }
    let mass: f64 = start.iter().sum();
    if mass <= 0.0 {
        return None;
    }
    let mut current: Vec<f64> = start.iter().map(|w| w / mass).collect();
    for it in 1..=max_iter {
        let next: Vec<f64> = (0..n)
            .map(|t| (0..n).map(|s| matrix[t][s] * current[s]).sum())
            .collect();
        let mass: f64 = next.iter().sum();
        if mass <= 0.0 {
            return None;
        }
        let lambda = mass;
        let normalized: Vec<f64> = next.iter().map(|w| w / mass).collect();
        let delta: f64 = normalized
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .sum();
        current = normalized;
        if delta < tol {
            return Some((lambda, current, it));
        }
    }
    None
}
