//! Transfer operators and eigenmeasures.
//!
//! `L_n(f)(x) = sum_{sigma^n(t) = x} f(t)` pushes functions forward along the
//! fibers of the iterates; `alpha_n(f) = f ∘ sigma^n` pulls them back. The
//! weighted operator `L_rho(f) = L(rho f)` with `rho = e^h` is the transfer
//! operator of the potential; its dual acts on weight vectors by
//! `(L_rho* nu)(t) = rho(t) nu(sigma t)` on the domain and is solved for
//! eigenmeasures by plain power iteration with mass normalization. Production
//! application is fiber-list based; the dense-matrix route lives in the test
//! suite as an independent oracle.

use thiserror::Error;

use crate::extreal::{ExtReal, Finite};
use crate::measures::{measures_close, q_star_apply, Measure, QiContext, QiWitness};
use crate::operators::FnOnSpace;
use crate::potential::CocycleTable;
use crate::space::{PointId, SpaceModel};

use serde::Serialize;

#[derive(Debug, Error)]
pub enum RuelleError {
    #[error("start measure has zero mass")]
    ZeroStartMass,
    #[error("power iteration did not converge within {max_iter} steps (last delta {last_delta})")]
    NoConvergence {
        max_iter: usize,
        last_delta: f64,
        partial: Box<EigenResult>,
    },
    #[error("the cocycle table carries no level-1 weights")]
    MissingWeights,
}

/// `L_n(f)(x) = sum over the sigma^n-fiber of x`, vanishing off
/// `sigma^n(U_n)`. `L_0` is the identity.
pub fn transfer_apply(model: &SpaceModel, n: usize, f: &FnOnSpace) -> FnOnSpace {
    let mut out = FnOnSpace::zero(model.n_points());
    for t in model.points() {
        if let Ok(x) = model.iterate(t, n) {
            out.set(x, out.value(x) + f.value(t));
        }
    }
    out
}

/// `alpha_n(g)(x) = g(sigma^n(x))` on `U_n`, zero elsewhere.
pub fn compose_alpha(model: &SpaceModel, n: usize, g: &FnOnSpace) -> FnOnSpace {
    let mut out = FnOnSpace::zero(model.n_points());
    for x in model.points() {
        if let Ok(y) = model.iterate(x, n) {
            out.set(x, g.value(y));
        }
    }
    out
}

/// The level-1 weight `rho = e^h` as a function on `dom(sigma)`, read from
/// the cocycle table (`rho_1 = e^{k_1} = e^h` there).
pub fn base_weight(model: &SpaceModel, ct: &CocycleTable) -> Result<FnOnSpace, RuelleError> {
    if ct.depth() < 1 {
        return Err(RuelleError::MissingWeights);
    }
    let mut rho = FnOnSpace::zero(model.n_points());
    for t in model.points() {
        if let Some(v) = ct.rho(1, t) {
            rho.set(t, Finite(v));
        }
    }
    Ok(rho)
}

/// `rho_n = rho * alpha(rho) * ... * alpha_{n-1}(rho)` restricted to `U_n`.
pub fn rho_product(model: &SpaceModel, ct: &CocycleTable, n: usize) -> Result<FnOnSpace, RuelleError> {
    assert!(n >= 1, "rho products start at level 1");
    let rho = base_weight(model, ct)?;
    let mut out = FnOnSpace::zero(model.n_points());
    for x in model.points() {
        if model.iterate(x, n).is_err() {
            continue;
        }
        let mut acc = ExtReal::ONE;
        let mut cur = x;
        for _ in 0..n {
            acc = acc * rho.value(cur);
            cur = model.sigma(cur).expect("x in U_n");
        }
        out.set(x, acc);
    }
    Ok(out)
}

/// `L_n(rho_n f)`: the weighted transfer iterate.
pub fn transfer_apply_weighted(
    model: &SpaceModel,
    ct: &CocycleTable,
    n: usize,
    f: &FnOnSpace,
) -> Result<FnOnSpace, RuelleError> {
    if n == 0 {
        return Ok(f.clone());
    }
    let rho_n = rho_product(model, ct, n)?;
    Ok(transfer_apply(model, n, &rho_n.mul(f)))
}

/// One step of the dual transfer action: `(L_rho* nu)(t) = rho(t) nu(sigma t)`
/// for `t` in the domain, zero elsewhere.
pub fn dual_transfer_step(model: &SpaceModel, rho: &FnOnSpace, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.n_points()];
    for t in model.points() {
        if let Some(x) = model.sigma(t) {
            let r = match rho.value(t) {
                Finite(v) => v,
                _ => unreachable!("rho is finite"),
            };
            out[t.0] = r * weights[x.0];
        }
    }
    out
}

/// Outcome of the eigenmeasure solve.
#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub lambda: f64,
    #[serde(skip)]
    pub measure: Measure,
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on the dual transfer action with mass normalization.
///
/// `lambda` is estimated as the mass-growth ratio per step, the residual is
/// the total-variation distance between one more dual step and
/// `lambda * mu`. No uniqueness is claimed: on reducible models different
/// starts may converge to different eigenmeasures, and on models whose
/// recurrent part escapes the domain the iteration may lose all mass, which
/// is reported as non-convergence with the partial result attached.
pub fn solve_eigenmeasure(
    model: &SpaceModel,
    ct: &CocycleTable,
    start: &Measure,
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult, RuelleError> {
    if start.mass() <= 0.0 {
        return Err(RuelleError::ZeroStartMass);
    }
    let rho = base_weight(model, ct)?;
    let np = model.n_points();
    let mut current: Vec<f64> = (0..np).map(|i| start.weight(PointId(i))).collect();
    let mass: f64 = current.iter().sum();
    for w in &mut current {
        *w /= mass;
    }
    let mut lambda = 0.0;
    let mut last_delta = f64::INFINITY;
    for it in 1..=max_iter {
        let next = dual_transfer_step(model, &rho, &current);
        let mass: f64 = next.iter().sum();
        lambda = mass;
        if mass <= 0.0 {
            let partial = finish(model, &rho, current, 0.0, it);
            return Err(RuelleError::NoConvergence {
                max_iter,
                last_delta,
                partial: Box::new(partial),
            });
        }
        let normalized: Vec<f64> = next.iter().map(|w| w / mass).collect();
        last_delta = normalized
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .sum();
        current = normalized;
        if last_delta < tol {
            return Ok(finish(model, &rho, current, lambda, it));
        }
    }
    let partial = finish(model, &rho, current, lambda, max_iter);
    Err(RuelleError::NoConvergence {
        max_iter,
        last_delta,
        partial: Box::new(partial),
    })
}

fn finish(
    model: &SpaceModel,
    rho: &FnOnSpace,
    weights: Vec<f64>,
    lambda: f64,
    iterations: usize,
) -> EigenResult {
    let stepped = dual_transfer_step(model, rho, &weights);
    let residual: f64 = stepped
        .iter()
        .zip(&weights)
        .map(|(s, w)| (s - lambda * w).abs())
        .sum();
    EigenResult {
        lambda,
        measure: Measure::from_weights(weights),
        residual,
        iterations,
    }
}

/// Layered verification that an eigenmeasure is DLR.
///
/// (a) the iterated eigen identity `int L_n(rho_n f) dmu = lambda^n int f dmu`
///     over indicator spanning functions,
/// (b) the per-level balance `int E_n(rho_n) f dmu = int E_n(rho_n f) dmu`,
/// (c) the full quasi-invariance characterization through `Q_n*`.
///
/// The implication chain (a) => (b) => (c) must hold; each layer is reported
/// separately.
#[derive(Clone, Debug, Serialize)]
pub struct EigenDlrReport {
    pub half_step: bool,
    pub balance: bool,
    pub dlr: bool,
    pub chain_holds: bool,
    pub verdict: bool,
    pub witnesses: Vec<QiWitness>,
    pub tolerance: f64,
    pub truncation_depth: usize,
}

pub fn verify_eigen_dlr(
    ctx: &QiContext,
    mu: &Measure,
    lambda: f64,
    tol: f64,
) -> Result<EigenDlrReport, RuelleError> {
    assert!(lambda != 0.0, "the eigen identity needs a nonzero eigenvalue");
    let model = ctx.model;
    let depth = ctx.depth();
    let np = model.n_points();
    let mut witnesses = Vec::new();

    // (a) Half-step identities with lambda^n.
    let mut half_step = true;
    'half: for n in 0..=depth {
        let lam_n = lambda.powi(n as i32);
        for t in ctx.gap.level_domain(n).unwrap().iter() {
            let lhs = mu.integrate(&transfer_apply_weighted(
                model,
                ctx.ct,
                n,
                &FnOnSpace::indicator_point(np, t),
            )?);
            let rhs = Finite(lam_n * mu.weight(t));
            if !ext_close_f64(lhs, rhs, tol) {
                half_step = false;
                witnesses.push(QiWitness {
                    condition: "half_step".to_owned(),
                    level: Some(n),
                    x: model.id_of(t).to_owned(),
                    y: None,
                    lhs: ext_f64(lhs),
                    rhs: ext_f64(rhs),
                });
                break 'half;
            }
        }
    }

    // (b) Balance identities per level.
    let mut balance = true;
    'balance: for n in 0..=depth {
        let rho_n = if n == 0 {
            FnOnSpace::indicator(np, ctx.gap.level_domain(0).unwrap())
        } else {
            rho_product(model, ctx.ct, n)?
        };
        let e_rho = crate::operators::expectation(ctx.gap, n, &rho_n);
        let un = ctx.gap.level_domain(n).unwrap();
        for t in un.iter() {
            let lhs = e_rho.value(t) * Finite(mu.weight(t));
            let e_rho_1t =
                crate::operators::expectation(ctx.gap, n, &rho_n.mul(&FnOnSpace::indicator_point(np, t)));
            let rhs: ExtReal = un
                .iter()
                .map(|x| e_rho_1t.value(x) * Finite(mu.weight(x)))
                .sum();
            if !ext_close_f64(lhs, rhs, tol) {
                balance = false;
                witnesses.push(QiWitness {
                    condition: "balance".to_owned(),
                    level: Some(n),
                    x: model.id_of(t).to_owned(),
                    y: None,
                    lhs: ext_f64(lhs),
                    rhs: ext_f64(rhs),
                });
                break 'balance;
            }
        }
    }

    // (c) Full DLR characterization.
    let dlr = crate::measures::check_main_for_q(ctx, mu, tol).verdict;

    let chain_holds = (!half_step || balance) && (!balance || dlr);
    Ok(EigenDlrReport {
        half_step,
        balance,
        dlr,
        chain_holds,
        verdict: half_step && balance && dlr && chain_holds,
        witnesses,
        tolerance: tol,
        truncation_depth: depth,
    })
}

fn ext_f64(v: ExtReal) -> f64 {
    match v {
        Finite(x) => x,
        ExtReal::Infinity => f64::INFINITY,
    }
}

fn ext_close_f64(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    match (a, b) {
        (Finite(x), Finite(y)) => crate::extreal::approx_eq_f64(x, y, tol),
        (ExtReal::Infinity, ExtReal::Infinity) => true,
        _ => false,
    }
}

/// Builds the rotation model on binary words of length `m`: the shift acts
/// cyclically, every point carries weight `e^h = 2`, so the transfer
/// operator has the full-shift growth `lambda = 2` with the uniform
/// eigenmeasure.
pub fn two_shift_model(m: usize) -> (SpaceModel, Vec<Option<f64>>) {
    assert!(m >= 1);
    let n = 1usize << m;
    let words: Vec<String> = (0..n)
        .map(|w| {
            (0..m)
                .rev()
                .map(|b| if w >> b & 1 == 0 { 'a' } else { 'b' })
                .collect()
        })
        .collect();
    let pairs: Vec<(String, String)> = (0..n)
        .map(|w| {
            let rotated = (w << 1 | w >> (m - 1)) & (n - 1);
            (words[w].clone(), words[rotated].clone())
        })
        .collect();
    let model = SpaceModel::new(&words, &pairs).unwrap();
    let h = vec![Some(2.0_f64.ln()); n];
    (model, h)
}

/// Checks whether repeated solves from basis starts reach distinct
/// eigenmeasures, which flags a reducible model.
pub fn detect_reducibility(
    model: &SpaceModel,
    ct: &CocycleTable,
    tol: f64,
    max_iter: usize,
) -> Result<bool, RuelleError> {
    let mut found: Option<Measure> = None;
    for p in model.points() {
        let start = Measure::dirac(model.n_points(), p);
        match solve_eigenmeasure(model, ct, &start, tol, max_iter) {
            Ok(result) => match &found {
                None => found = Some(result.measure),
                Some(prev) => {
                    if !measures_close(prev, &result.measure, 1e-6) {
                        return Ok(true);
                    }
                }
            },
            Err(RuelleError::NoConvergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(false)
}

/// `Q_n*`-based spot check used by callers that only have model-level data.
pub fn eigen_is_q_fixed(ctx: &QiContext, mu: &Measure, tol: f64) -> bool {
    (0..=ctx.depth()).all(|n| {
        let fixed = q_star_apply(ctx, n, mu);
        let indicated = mu.restrict(
            ctx.gap.level_domain(n).unwrap(),
            crate::measures::RestrictMode::IndicatorMultiply,
        );
        measures_close(&fixed, &indicated, tol)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extreal::approx_eq_f64;
    use crate::gap::GapStructure;
    use crate::measures::RestrictMode;
    use crate::operators::{expectation, level_sets, zeta};
    use crate::potential::{build_cocycle, m0_h, Potential};
    use crate::space::m0;

    fn m0_ct(depth: usize) -> (SpaceModel, CocycleTable) {
        let m = m0();
        let g = GapStructure::from_sigma(&m, depth);
        let p = Potential::from_h(&m, &m0_h(&m), depth).unwrap();
        let ct = build_cocycle(&g, &p, |q| m.id_of(q).to_owned()).unwrap();
        (m, ct)
    }

    #[test]
    fn transfer_on_running_example() {
        let m = m0();
        let p0 = m.point("0").unwrap();
        let p1 = m.point("1").unwrap();
        let p2 = m.point("2").unwrap();

        // L_1(1_{1}): 1 at sigma(1) = 0, zero elsewhere.
        let f = FnOnSpace::indicator_point(4, p1);
        let lf = transfer_apply(&m, 1, &f);
        assert_eq!(lf.value(p0), ExtReal::ONE);
        assert_eq!(lf.value(p2), ExtReal::ZERO);

        // L_0 is the identity.
        assert_eq!(transfer_apply(&m, 0, &f), f);

        // Point 2 has no preimage: L_1(anything) vanishes there.
        let ones = FnOnSpace::constant(4, ExtReal::ONE);
        assert_eq!(transfer_apply(&m, 1, &ones).value(p2), ExtReal::ZERO);
    }

    #[test]
    fn alpha_on_running_example() {
        let m = m0();
        let p0 = m.point("0").unwrap();
        let p1 = m.point("1").unwrap();
        let p2 = m.point("2").unwrap();
        let f = FnOnSpace::indicator_point(4, p0);
        let af = compose_alpha(&m, 1, &f);
        assert_eq!(af.value(p1), ExtReal::ONE);
        assert_eq!(af.value(p2), ExtReal::ONE);
        assert_eq!(af.value(p0), ExtReal::ZERO);

        // alpha_0 is the identity.
        assert_eq!(compose_alpha(&m, 0, &f), f);
    }

    #[test]
    fn alpha_compose_transfer_is_expectation() {
        let (m, _) = m0_ct(2);
        let g = GapStructure::from_sigma(&m, 2);
        let u = m.sigma_domain();
        for t in m.points() {
            let f = FnOnSpace::indicator_point(4, t);
            let lhs = compose_alpha(&m, 1, &transfer_apply(&m, 1, &f));
            let rhs = expectation(&g, 1, &f);
            for x in u.iter() {
                assert_eq!(lhs.value(x), rhs.value(x), "t={t} x={x}");
            }
        }
    }

    #[test]
    fn bimodule_law() {
        let m = m0();
        let mut gfn = FnOnSpace::zero(4);
        gfn.set(m.point("0").unwrap(), Finite(3.0));
        gfn.set(m.point("1").unwrap(), Finite(0.5));
        let mut f = FnOnSpace::zero(4);
        f.set(m.point("1").unwrap(), Finite(2.0));
        f.set(m.point("3").unwrap(), Finite(1.0));
        // L(alpha(g) f) = g L(f).
        let lhs = transfer_apply(&m, 1, &compose_alpha(&m, 1, &gfn).mul(&f));
        let rhs = gfn.mul(&transfer_apply(&m, 1, &f));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn semigroup_law_and_support() {
        let m = m0();
        for n in 0..=2usize {
            for k in 0..=(2 - n) {
                for t in m.points() {
                    let f = FnOnSpace::indicator_point(4, t);
                    let lhs = transfer_apply(&m, k, &transfer_apply(&m, n, &f));
                    let rhs = transfer_apply(&m, n + k, &f);
                    assert_eq!(lhs, rhs, "n={n} k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn rho_product_matches_accumulated_potential() {
        let (m, ct) = m0_ct(3);
        for n in 1..=ct.depth() {
            let rp = rho_product(&m, &ct, n).unwrap();
            for x in m.points() {
                match ct.rho(n, x) {
                    Some(expected) => {
                        let got = rp.value(x).as_f64().unwrap();
                        assert!(
                            approx_eq_f64(got, expected, 1e-12),
                            "rho_{n}({x}): {got} vs {expected}"
                        );
                    }
                    None => assert_eq!(rp.value(x), ExtReal::ZERO),
                }
            }
        }
        // rho_2(3) = rho(3) * rho(sigma 3) = 1 * 2.
        let rp = rho_product(&m, &ct, 2).unwrap();
        assert!(approx_eq_f64(
            rp.value(m.point("3").unwrap()).as_f64().unwrap(),
            2.0,
            1e-12
        ));
    }

    #[test]
    fn fixed_point_eigen() {
        // Single fixed point with weight e^beta: a 1x1 system.
        let beta = 0.7;
        let model = SpaceModel::new(&["x"], &[("x", "x")]).unwrap();
        let g = GapStructure::from_sigma(&model, 2);
        let p = Potential::from_h(&model, &[Some(beta)], 2).unwrap();
        let ct = build_cocycle(&g, &p, |q| model.id_of(q).to_owned()).unwrap();
        let start = Measure::dirac(1, PointId(0));
        let result = solve_eigenmeasure(&model, &ct, &start, 1e-12, 1000).unwrap();
        assert!(approx_eq_f64(result.lambda, beta.exp(), 1e-10));
        assert!(approx_eq_f64(result.measure.weight(PointId(0)), 1.0, 1e-12));
        assert!(result.residual < 1e-10);
    }

    #[test]
    fn merged_fiber_eigen() {
        // sigma(a) = a, sigma(b) = a with h = (ln 2, 0): the dual matrix is
        // [[2, 0], [1, 0]] acting as nu'(a) = 2 nu(a), nu'(b) = nu(a);
        // Perron pair lambda = 2 with direction (2/3, 1/3).
        let model = SpaceModel::new(&["a", "b"], &[("a", "a"), ("b", "a")]).unwrap();
        let g = GapStructure::from_sigma(&model, 3);
        let mut h = vec![None; 2];
        h[model.point("a").unwrap().0] = Some(2.0_f64.ln());
        h[model.point("b").unwrap().0] = Some(0.0);
        let p = Potential::from_h(&model, &h, 3).unwrap();
        let ct = build_cocycle(&g, &p, |q| model.id_of(q).to_owned()).unwrap();
        let start = Measure::from_weights(vec![0.5, 0.5]);
        let result = solve_eigenmeasure(&model, &ct, &start, 1e-12, 10_000).unwrap();
        assert!(approx_eq_f64(result.lambda, 2.0, 1e-10));
        assert!(approx_eq_f64(
            result.measure.weight(model.point("a").unwrap()),
            2.0 / 3.0,
            1e-10
        ));
        assert!(result.residual < 1e-9);
    }

    #[test]
    fn dag_model_loses_mass() {
        // M_0 is a preimage DAG: the dual action is nilpotent and the
        // iteration runs out of mass, reported as non-convergence.
        let (m, ct) = m0_ct(3);
        let start = Measure::from_weights(vec![0.25; 4]);
        match solve_eigenmeasure(&m, &ct, &start, 1e-12, 100) {
            Err(RuelleError::NoConvergence { partial, .. }) => {
                assert_eq!(partial.lambda, 0.0);
            }
            other => panic!("expected mass loss, got {other:?}"),
        }
    }

    #[test]
    fn zero_start_rejected() {
        let (m, ct) = m0_ct(2);
        assert!(matches!(
            solve_eigenmeasure(&m, &ct, &Measure::zero(4), 1e-10, 10),
            Err(RuelleError::ZeroStartMass)
        ));
    }

    #[test]
    fn two_shift_rotation_has_lambda_two_uniform() {
        let (model, h) = two_shift_model(4);
        let depth = 4;
        let g = GapStructure::from_sigma(&model, depth);
        let p = Potential::from_h(&model, &h, depth).unwrap();
        let ct = build_cocycle(&g, &p, |q| model.id_of(q).to_owned()).unwrap();
        let np = model.n_points();
        let start = Measure::from_weights(vec![1.0 / np as f64; np]);
        let result = solve_eigenmeasure(&model, &ct, &start, 1e-12, 10_000).unwrap();
        assert!(approx_eq_f64(result.lambda, 2.0, 1e-10));
        let uniform = Measure::from_weights(vec![1.0 / np as f64; np]);
        assert!(result.measure.tv_distance(&uniform) <= 1e-10);
        assert!(result.residual < 1e-10);
    }

    #[test]
    fn eigen_dlr_chain_on_merged_fiber_model() {
        let model = SpaceModel::new(&["a", "b"], &[("a", "a"), ("b", "a")]).unwrap();
        let depth = 3;
        let g = GapStructure::from_sigma(&model, depth);
        let mut h = vec![None; 2];
        h[model.point("a").unwrap().0] = Some(2.0_f64.ln());
        h[model.point("b").unwrap().0] = Some(0.0);
        let p = Potential::from_h(&model, &h, depth).unwrap();
        let ct = build_cocycle(&g, &p, |q| model.id_of(q).to_owned()).unwrap();
        let zp = zeta(&g, &ct);
        let ls = level_sets(&g, &zp);
        let ctx = QiContext {
            model: &model,
            gap: &g,
            ct: &ct,
            zp: &zp,
            ls: &ls,
        };
        let start = Measure::from_weights(vec![0.5, 0.5]);
        let result = solve_eigenmeasure(&model, &ct, &start, 1e-13, 10_000).unwrap();
        let report = verify_eigen_dlr(&ctx, &result.measure, result.lambda, 1e-8).unwrap();
        assert!(report.verdict, "{report:?}");

        // A non-eigen measure fails the half-step layer with a witness.
        let bogus = Measure::from_weights(vec![0.5, 0.5]);
        let report = verify_eigen_dlr(&ctx, &bogus, result.lambda, 1e-8).unwrap();
        assert!(!report.half_step);
        assert!(report.chain_holds);
        assert!(!report.witnesses.is_empty());
    }

    #[test]
    fn eigen_dlr_fixed_point_lambda_one() {
        // sigma(x) = x with h = 0: L_rho* is the identity, so any
        // probability measure is an exact fixed point with lambda = 1.
        let model = SpaceModel::new(&["x"], &[("x", "x")]).unwrap();
        let depth = 2;
        let g = GapStructure::from_sigma(&model, depth);
        let p = Potential::from_h(&model, &[Some(0.0)], depth).unwrap();
        let ct = build_cocycle(&g, &p, |q| model.id_of(q).to_owned()).unwrap();
        let zp = zeta(&g, &ct);
        let ls = level_sets(&g, &zp);
        let ctx = QiContext {
            model: &model,
            gap: &g,
            ct: &ct,
            zp: &zp,
            ls: &ls,
        };
        let mu = Measure::dirac(1, PointId(0));
        let report = verify_eigen_dlr(&ctx, &mu, 1.0, 1e-10).unwrap();
        assert!(report.verdict);
    }

    #[test]
    fn restrict_mode_is_used_by_q_fixed_helper() {
        // eigen_is_q_fixed mirrors check_main_for_q.
        let model = SpaceModel::new(&["a", "b"], &[("a", "a"), ("b", "a")]).unwrap();
        let depth = 2;
        let g = GapStructure::from_sigma(&model, depth);
        let mut h = vec![None; 2];
        h[model.point("a").unwrap().0] = Some(2.0_f64.ln());
        h[model.point("b").unwrap().0] = Some(0.0);
        let p = Potential::from_h(&model, &h, depth).unwrap();
        let ct = build_cocycle(&g, &p, |q| model.id_of(q).to_owned()).unwrap();
        let zp = zeta(&g, &ct);
        let ls = level_sets(&g, &zp);
        let ctx = QiContext {
            model: &model,
            gap: &g,
            ct: &ct,
            zp: &zp,
            ls: &ls,
        };
        let mu = Measure::from_weights(vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!(eigen_is_q_fixed(&ctx, &mu, 1e-9));
        assert!(crate::measures::check_main_for_q(&ctx, &mu, 1e-9).verdict);
        let _ = mu.restrict(g.level_domain(0).unwrap(), RestrictMode::IndicatorMultiply);
    }
}
