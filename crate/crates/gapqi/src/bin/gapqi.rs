//! Command-line front end: loads a model file, dispatches to the library,
//! and emits one deterministic JSON report per invocation.
//!
//! Exit codes: 0 when every verdict is true (or a construction succeeded),
//! 1 when some verdict is false or an iteration failed to settle, 2 on usage
//! or model errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use gapqi::gap::{enumerate_groupoid, validate_gap};
use gapqi::measures::{
    check_charac_dlr, check_conformal, check_main_for_q, check_main_result, check_qi_direct,
    construct_qi_from_nu, construct_qi_on_winf, construct_qi_on_wn, partition_xwz, Measure,
    MeasuresError, QiContext, QiReport,
};
use gapqi::model::{load_model, LoadedModel, ModelError};
use gapqi::operators::{
    level_sets, zeta, zeta_budgeted, BudgetedZeta, LevelOperator, LevelSets, OperatorKind,
    ZetaProfile,
};
use gapqi::potential::{build_cocycle, validate_potential, CocycleTable};
use gapqi::ruelle::{solve_eigenmeasure, transfer_apply, verify_eigen_dlr, RuelleError};
use gapqi::space::PointId;

#[derive(Parser)]
#[command(name = "gapqi", version, about = "Quasi-invariant, DLR and conformal measure toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the model JSON file.
    #[arg(long, global = true)]
    model: Option<PathBuf>,

    /// Chain depth; overrides the model file's default.
    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Comparison tolerance for verification checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Iteration cap for the solvers.
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iter: usize,

    /// Class-enumeration budget for zeta; omitted means exact evaluation.
    #[arg(long, global = true)]
    budget: Option<usize>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structure axioms and potential constancy.
    Validate,
    /// List equivalence classes per level, and classes of the union relation.
    Classes {
        #[arg(long)]
        level: Option<usize>,
    },
    /// Partition-function table at one level.
    Zeta {
        #[arg(long)]
        level: usize,
    },
    /// Split a coarse class into finer classes.
    Decompose {
        /// Coarse level m.
        #[arg(long)]
        level: usize,
        /// Fine level n (defaults to 0).
        #[arg(long, default_value_t = 0)]
        fine_level: usize,
        /// Base point.
        #[arg(long)]
        point: String,
    },
    /// Full quasi-invariance verification for a named measure.
    VerifyQi {
        #[arg(long)]
        measure: String,
    },
    /// Decomposition-form (DLR) verification for a named measure.
    VerifyDlr {
        #[arg(long)]
        measure: String,
    },
    /// Conformality on the depth-truncated groupoid for a named measure.
    VerifyConformal {
        #[arg(long)]
        measure: String,
    },
    /// Construct a quasi-invariant measure (from nu, on W_n, or on W_inf).
    ConstructQi {
        /// Name of the base measure nu for the dual-expectation route.
        #[arg(long, conflicts_with_all = ["winf", "seed"])]
        nu: Option<String>,
        /// Level for the nu-route or the W_n route.
        #[arg(long)]
        level: Option<usize>,
        /// Seed measure name for the W_n / W_inf routes.
        #[arg(long)]
        seed: Option<String>,
        /// Build on W_inf by projective iteration.
        #[arg(long, default_value_t = false)]
        winf: bool,
    },
    /// Power-iteration eigenmeasure of the weighted transfer dual.
    RuelleEigen {
        /// Start measure name; uniform when omitted.
        #[arg(long)]
        measure: Option<String>,
    },
    /// Dense matrix of a level operator, entries as decimal strings.
    ExportMatrix {
        #[arg(long)]
        level: usize,
        /// One of: e-rho, q, transfer.
        #[arg(long)]
        operator: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, all_true)) => {
            let text = serde_json::to_string_pretty(&report).expect("serializable report");
            match &cli.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text + "\n") {
                        eprintln!("gapqi: cannot write output: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => println!("{text}"),
            }
            if all_true {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("gapqi: {e}");
            ExitCode::from(2)
        }
    }
}

struct Resolved {
    model: LoadedModel,
    ct: CocycleTable,
    zp: ZetaProfile,
    ls: LevelSets,
}

impl Resolved {
    fn ctx(&self) -> QiContext<'_> {
        QiContext {
            model: &self.model.space,
            gap: &self.model.gap,
            ct: &self.ct,
            zp: &self.zp,
            ls: &self.ls,
        }
    }

    fn id_of(&self, p: PointId) -> String {
        self.model.space.id_of(p).to_owned()
    }
}

#[derive(Debug)]
enum CliError {
    Model(ModelError),
    Measures(MeasuresError),
    Ruelle(RuelleError),
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Measures(e) => write!(f, "{e}"),
            CliError::Ruelle(e) => write!(f, "{e}"),
            CliError::Other(s) => write!(f, "{s}"),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::Model(e)
    }
}

fn load(cli: &Cli) -> Result<Resolved, CliError> {
    let path = cli
        .model
        .as_ref()
        .ok_or_else(|| CliError::Other("--model is required".to_owned()))?;
    let model = load_model(path, cli.depth)?;
    let ct = build_cocycle(&model.gap, &model.potential, |p| {
        model.space.id_of(p).to_owned()
    })
    .map_err(ModelError::InvalidPotential)?;
    let zp = zeta(&model.gap, &ct);
    let ls = level_sets(&model.gap, &zp);
    Ok(Resolved { model, ct, zp, ls })
}

fn measure_weights_json(r: &Resolved, mu: &Measure) -> Value {
    let mut map = Map::new();
    for p in r.model.space.points() {
        map.insert(r.id_of(p), json!(mu.weight(p)));
    }
    Value::Object(map)
}

fn qi_report_json(report: &QiReport) -> Value {
    serde_json::to_value(report).expect("serializable")
}

fn run(cli: &Cli) -> Result<(Value, bool), CliError> {
    let r = match &cli.command {
        // Validate must not build the cocycle table: invalid potentials are
        // precisely what it reports on.
        Command::Validate => {
            let path = cli
                .model
                .as_ref()
                .ok_or_else(|| CliError::Other("--model is required".to_owned()))?;
            let model = load_model(path, cli.depth)?;
            let gap_report = validate_gap(&model.gap, |p| model.space.id_of(p).to_owned());
            let pot_report =
                validate_potential(&model.gap, &model.potential, |p| {
                    model.space.id_of(p).to_owned()
                });
            let passed = gap_report.passed && pot_report.passed;
            let report = json!({
                "command": "validate",
                "depth": model.gap.depth(),
                "gap": serde_json::to_value(&gap_report).unwrap(),
                "potential": serde_json::to_value(&pot_report).unwrap(),
                "passed": passed,
            });
            return Ok((report, passed));
        }
        _ => load(cli)?,
    };

    match &cli.command {
        Command::Validate => unreachable!("handled above"),

        Command::Classes { level } => {
            let g = &r.model.gap;
            let levels: Vec<usize> = match level {
                Some(n) => vec![*n],
                None => (0..=g.depth()).collect(),
            };
            let mut per_level = Vec::new();
            for n in &levels {
                let classes: Vec<Vec<String>> = g
                    .relation(*n)
                    .map_err(|e| CliError::Other(e.to_string()))?
                    .classes()
                    .iter()
                    .map(|c| c.iter().map(|&p| r.id_of(p)).collect())
                    .collect();
                per_level.push(json!({ "level": n, "classes": classes }));
            }
            let mut union_classes: Vec<Vec<String>> = Vec::new();
            let mut seen = vec![false; r.model.space.n_points()];
            for p in r.model.space.points() {
                if !seen[p.0] {
                    let cls = g.union_class(p);
                    for &q in &cls {
                        seen[q.0] = true;
                    }
                    union_classes.push(cls.iter().map(|&q| r.id_of(q)).collect());
                }
            }
            let report = json!({
                "command": "classes",
                "depth": g.depth(),
                "levels": per_level,
                "union_classes": union_classes,
            });
            Ok((report, true))
        }

        Command::Zeta { level } => {
            let mut table = Map::new();
            match cli.budget {
                None => {
                    let un = r
                        .model
                        .gap
                        .level_domain(*level)
                        .map_err(|e| CliError::Other(e.to_string()))?;
                    for x in un.iter() {
                        let v = r.zp.value(*level, x).expect("zeta on U_n");
                        table.insert(
                            r.id_of(x),
                            match v {
                                gapqi::operators::ZetaValue::Finite(f) => json!(f),
                                gapqi::operators::ZetaValue::Infinite => json!("inf"),
                            },
                        );
                    }
                }
                Some(budget) => {
                    let slice = zeta_budgeted(&r.model.gap, &r.ct, *level, budget)
                        .map_err(|e| CliError::Other(e.to_string()))?;
                    for (x, v) in slice {
                        table.insert(
                            r.id_of(x),
                            match v {
                                BudgetedZeta::Finite(f) => json!(f),
                                BudgetedZeta::Infinite => json!("inf"),
                                BudgetedZeta::Unknown {
                                    lower_bound,
                                    enumerated,
                                } => json!({
                                    "unknown": {
                                        "lower_bound": lower_bound,
                                        "enumerated": enumerated,
                                    }
                                }),
                            },
                        );
                    }
                }
            }
            let report = json!({
                "command": "zeta",
                "level": level,
                "budget": cli.budget,
                "values": Value::Object(table),
            });
            Ok((report, true))
        }

        Command::Decompose {
            level,
            fine_level,
            point,
        } => {
            let x = r
                .model
                .space
                .point(point)
                .map_err(|e| CliError::Other(e.to_string()))?;
            let blocks = r
                .model
                .gap
                .decompose_class(*fine_level, *level, x)
                .map_err(|e| CliError::Other(e.to_string()))?;
            let blocks_json: Vec<Value> = blocks
                .iter()
                .map(|(rep, members)| {
                    json!({
                        "representative": r.id_of(*rep),
                        "members": members.iter().map(|&p| r.id_of(p)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let report = json!({
                "command": "decompose",
                "fine_level": fine_level,
                "level": level,
                "point": point,
                "blocks": blocks_json,
            });
            Ok((report, true))
        }

        Command::VerifyQi { measure } => {
            let mu = r.model.measure(measure)?.clone();
            let ctx = r.ctx();
            let global = check_main_for_q(&ctx, &mu, cli.tol);
            let mut per_level = Vec::new();
            let mut direct_conjunction = true;
            for n in 0..=ctx.depth() {
                let main = check_main_result(&ctx, &mu, n, cli.tol)
                    .map_err(CliError::Measures)?;
                let direct = check_qi_direct(&ctx, &mu, n, cli.tol);
                direct_conjunction &= direct.verdict;
                per_level.push(json!({
                    "level": n,
                    "main_result": qi_report_json(&main),
                    "direct": qi_report_json(&direct),
                }));
            }
            let verdict = global.verdict;
            let report = json!({
                "command": "verify-qi",
                "measure": measure,
                "depth": ctx.depth(),
                "tolerance": cli.tol,
                "global": qi_report_json(&global),
                "per_level": per_level,
                "patching_consistent": direct_conjunction == verdict,
                "verdict": verdict,
            });
            Ok((report, verdict))
        }

        Command::VerifyDlr { measure } => {
            let mu = r.model.measure(measure)?.clone();
            let ctx = r.ctx();
            let report = check_charac_dlr(&ctx, &mu, cli.tol).map_err(CliError::Measures)?;
            let part = partition_xwz(&ctx);
            let verdict = report.verdict;
            let out = json!({
                "command": "verify-dlr",
                "measure": measure,
                "depth": ctx.depth(),
                "partition": {
                    "z": part.z.iter().map(|p| r.id_of(p)).collect::<Vec<_>>(),
                    "w": part.w.iter()
                        .map(|s| s.iter().map(|p| r.id_of(p)).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                    "w_inf": part.w_inf.iter().map(|p| r.id_of(p)).collect::<Vec<_>>(),
                },
                "report": qi_report_json(&report),
                "verdict": verdict,
            });
            Ok((out, verdict))
        }

        Command::VerifyConformal { measure } => {
            let mu = r.model.measure(measure)?.clone();
            let ctx = r.ctx();
            let depth = ctx.depth();
            let report = check_conformal(&ctx, &r.model.h, &mu, depth, cli.tol)
                .map_err(|e| CliError::Other(e.to_string()))?;
            let n_elements = enumerate_groupoid(&r.model.space, depth).len();
            let verdict = report.verdict;
            let out = json!({
                "command": "verify-conformal",
                "measure": measure,
                "truncation_depth": depth,
                "groupoid_elements": n_elements,
                "report": qi_report_json(&report),
                "verdict": verdict,
            });
            Ok((out, verdict))
        }

        Command::ConstructQi {
            nu,
            level,
            seed,
            winf,
        } => {
            let ctx = r.ctx();
            let seed_measure = match seed {
                Some(name) => Some(r.model.measure(name)?.clone()),
                None => None,
            };
            let (mu, detail, ok) = if let Some(nu_name) = nu {
                let n = level.ok_or_else(|| {
                    CliError::Other("--level is required with --nu".to_owned())
                })?;
                let nu = r.model.measure(nu_name)?.clone();
                let mu = construct_qi_from_nu(&ctx, &nu, n).map_err(CliError::Measures)?;
                (mu, json!({ "route": "from-nu", "level": n }), true)
            } else if *winf {
                match construct_qi_on_winf(&ctx, seed_measure.as_ref(), cli.tol, cli.max_iter)
                {
                    Ok(result) => {
                        let detail = json!({
                            "route": "w-inf",
                            "iterations": result.iterations,
                            "last_delta": result.last_delta,
                            "converged": result.converged,
                        });
                        (result.measure, detail, true)
                    }
                    Err(MeasuresError::NoConvergence {
                        last_delta,
                        depth,
                        result,
                        ..
                    }) => {
                        let detail = json!({
                            "route": "w-inf",
                            "iterations": result.iterations,
                            "last_delta": last_delta,
                            "converged": false,
                            "depth": depth,
                        });
                        (result.measure, detail, false)
                    }
                    Err(e) => return Err(CliError::Measures(e)),
                }
            } else {
                let n = level.ok_or_else(|| {
                    CliError::Other("--level or --winf is required".to_owned())
                })?;
                let mu = construct_qi_on_wn(&ctx, n, seed_measure.as_ref())
                    .map_err(CliError::Measures)?;
                (mu, json!({ "route": "w-n", "level": n }), true)
            };
            let verification = check_main_for_q(&ctx, &mu, cli.tol);
            let verdict = ok && verification.verdict;
            let report = json!({
                "command": "construct-qi",
                "detail": detail,
                "measure_weights": measure_weights_json(&r, &mu),
                "mass": mu.mass(),
                "verification": qi_report_json(&verification),
                "verdict": verdict,
            });
            Ok((report, verdict))
        }

        Command::RuelleEigen { measure } => {
            let np = r.model.space.n_points();
            let start = match measure {
                Some(name) => r.model.measure(name)?.clone(),
                None => Measure::from_weights(vec![1.0 / np as f64; np]),
            };
            let solve = solve_eigenmeasure(&r.model.space, &r.ct, &start, cli.tol, cli.max_iter);
            match solve {
                Ok(result) => {
                    let ctx = r.ctx();
                    let dlr = if result.lambda != 0.0 {
                        Some(
                            verify_eigen_dlr(&ctx, &result.measure, result.lambda, cli.tol * 10.0)
                                .map_err(CliError::Ruelle)?,
                        )
                    } else {
                        None
                    };
                    let verdict = dlr.as_ref().map(|d| d.verdict).unwrap_or(false);
                    let report = json!({
                        "command": "ruelle-eigen",
                        "lambda": result.lambda,
                        "residual": result.residual,
                        "iterations": result.iterations,
                        "measure_weights": measure_weights_json(&r, &result.measure),
                        "eigen_dlr": dlr.map(|d| serde_json::to_value(&d).unwrap()),
                        "converged": true,
                        "verdict": verdict,
                    });
                    Ok((report, verdict))
                }
                Err(RuelleError::NoConvergence {
                    max_iter,
                    last_delta,
                    partial,
                }) => {
                    let report = json!({
                        "command": "ruelle-eigen",
                        "lambda": partial.lambda,
                        "residual": partial.residual,
                        "iterations": partial.iterations,
                        "measure_weights": measure_weights_json(&r, &partial.measure),
                        "eigen_dlr": Value::Null,
                        "converged": false,
                        "max_iter": max_iter,
                        "last_delta": last_delta,
                        "verdict": false,
                    });
                    Ok((report, false))
                }
                Err(e) => Err(CliError::Ruelle(e)),
            }
        }

        Command::ExportMatrix { level, operator } => {
            let np = r.model.space.n_points();
            let dense: Vec<Vec<f64>> = match operator.as_str() {
                "e-rho" => LevelOperator {
                    kind: OperatorKind::WeightedExpectation,
                    g: &r.model.gap,
                    ct: &r.ct,
                    zp: &r.zp,
                    n: *level,
                }
                .to_dense(),
                "q" => LevelOperator {
                    kind: OperatorKind::Projector,
                    g: &r.model.gap,
                    ct: &r.ct,
                    zp: &r.zp,
                    n: *level,
                }
                .to_dense(),
                "transfer" => {
                    let mut m = vec![vec![0.0; np]; np];
                    for t in 0..np {
                        let col = transfer_apply(
                            &r.model.space,
                            *level,
                            &gapqi::operators::FnOnSpace::indicator_point(np, PointId(t)),
                        );
                        for x in 0..np {
                            m[x][t] = match col.value(PointId(x)) {
                                gapqi::extreal::ExtReal::Finite(v) => v,
                                gapqi::extreal::ExtReal::Infinity => f64::INFINITY,
                            };
                        }
                    }
                    m
                }
                other => {
                    return Err(CliError::Other(format!(
                        "unknown operator `{other}` (expected e-rho, q, or transfer)"
                    )))
                }
            };
            // Rows are target points, columns source points, entries as
            // shortest round-trip decimal strings.
            let rows: Vec<Vec<String>> = dense
                .iter()
                .map(|row| row.iter().map(|v| format!("{v}")).collect())
                .collect();
            let report = json!({
                "command": "export-matrix",
                "operator": operator,
                "level": level,
                "points": r.model.space.points().map(|p| r.id_of(p)).collect::<Vec<_>>(),
                "rows": rows,
            });
            Ok((report, true))
        }
    }
}

