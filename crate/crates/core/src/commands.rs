//! The `solve`, `price`, `verify` and `examples` commands, independent of
//! argument parsing.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::countable::{modulus_table, power_trend, TruncatedCountableSpace};
use crate::error::{Error, Result};
use crate::functionals::{conjugate_identity_check, GridOptions};
use crate::io::report::{ConfigEcho, DualSection, MixingEntry, PriceSection, PrimalSection, Table};
use crate::io::{parse_scenario, Num, RunReport, ScenarioBundle};
use crate::pricing::indifference_price;
use crate::solvers::{check_variational_bound, duality_gap, epsilon_mixing, GapReport, SolveStatus, WEAK_DUALITY_SLACK};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub const DEFAULT_EPSILONS: [f64; 3] = [1e-2, 1e-4, 1e-6];
pub const MIXING_BOUND: f64 = 5e-6;
pub const PRICE_AGREEMENT: f64 = 1e-4;
/// Largest scenario count for which `verify` runs the brute-force grid conjugate.
pub const VERIFY_GRID_SCENARIOS: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub scenario: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub epsilons: Option<Vec<f64>>,
    pub claim: Option<String>,
    pub n_max: Option<usize>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver { .. } => EXIT_INTERNAL,
        _ => EXIT_VALIDATION,
    }
}

pub fn exit_code_for(report: &RunReport) -> i32 {
    if report.status == "ok" {
        EXIT_OK
    } else {
        EXIT_TOLERANCE
    }
}

fn load(opts: &RunOptions) -> Result<ScenarioBundle> {
    let path = opts
        .scenario
        .as_ref()
        .ok_or_else(|| Error::model("a scenario file is required (--scenario)"))?;
    let mut b = parse_scenario(path)?;
    if let Some(t) = opts.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("tolerance must be positive, got {t}")));
        }
        b.solver.tol = t;
    }
    if let Some(m) = opts.max_iter {
        b.solver.max_iter = Some(m);
    }
    if let Some(s) = opts.seed {
        b.solver.seed = s;
    }
    Ok(b)
}

fn epsilons(opts: &RunOptions) -> Vec<f64> {
    opts.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec())
}

fn echo(opts: &RunOptions, b: &ScenarioBundle) -> ConfigEcho {
    ConfigEcho {
        scenario: opts.scenario.as_ref().map(|p| p.display().to_string()),
        utility: Some(b.utility.name().to_string()),
        tol: Some(Num(b.solver.tol)),
        max_iter: b.solver.max_iter,
        seed: Some(b.solver.seed),
        epsilons: Num::vec(&epsilons(opts)),
        claim: opts.claim.clone(),
        n_max: None,
    }
}

fn status_str(s: SolveStatus) -> String {
    match s {
        SolveStatus::Converged => "converged".into(),
        SolveStatus::IterationCap => "iteration_cap".into(),
    }
}

fn fill_gap(report: &mut RunReport, g: &GapReport) {
    report.primal = Some(PrimalSection {
        value: Num(g.primal.value),
        iterations: g.primal.iterations,
        status: status_str(g.primal.status),
        active_vertices: g.primal.active_vertices.clone(),
        theta: Num::vec(&g.primal.theta_hat.to_flat()),
    });
    report.dual = Some(DualSection {
        value: Num(g.dual.value),
        lambda_hat: Num(g.dual.lambda_hat),
        q_hat: Num::vec(&g.dual.q_hat),
        prior_weights: Num::vec(&g.dual.prior_weights),
        p_hat: Num::vec(&g.dual.p_hat),
        iterations: g.dual.iterations,
        status: status_str(g.dual.status),
        support: g.dual.support.clone(),
    });
    report.gap = Some(Num(g.gap));
}

fn gap_checks(report: &mut RunReport, b: &ScenarioBundle, g: &GapReport) {
    report.check("weak_duality", g.weak_duality_ok, g.min_iterate_gap.min(g.gap), -WEAK_DUALITY_SLACK);
    report.check("duality_gap", g.gap.abs() <= b.solver.tol, g.gap.abs(), b.solver.tol);
    report.check(
        "variational_bound",
        check_variational_bound(&g.dual, &b.utility),
        g.dual.value,
        b.utility.v_at_zero(),
    );
}

fn mixing(report: &mut RunReport, b: &ScenarioBundle, opts: &RunOptions) -> Result<()> {
    let eps = epsilons(opts);
    if eps.is_empty() {
        return Ok(());
    }
    let rows = epsilon_mixing(&b.model, &b.priors, &b.utility, &eps, &b.solver.options())?;
    let worst = rows.iter().map(|r| r.delta.abs()).fold(0.0, f64::max);
    report.mixing = rows
        .iter()
        .map(|r| MixingEntry {
            epsilon: Num(r.epsilon),
            value: Num(r.value),
            delta: Num(r.delta),
        })
        .collect();
    let ordered = rows.iter().all(|r| r.delta >= -WEAK_DUALITY_SLACK);
    report.check("epsilon_mixing", ordered && worst <= MIXING_BOUND, worst, MIXING_BOUND);
    Ok(())
}

pub fn cmd_solve(opts: &RunOptions) -> Result<RunReport> {
    let b = load(opts)?;
    let mut report = RunReport::new("solve", echo(opts, &b));
    let g = duality_gap(&b.model, &b.priors, &b.utility, &b.solver.options())?;
    fill_gap(&mut report, &g);
    gap_checks(&mut report, &b, &g);
    mixing(&mut report, &b, opts)?;
    report.finalize();
    Ok(report)
}

pub fn cmd_price(opts: &RunOptions) -> Result<RunReport> {
    let b = load(opts)?;
    let name = opts.claim.clone().ok_or_else(|| Error::model("a claim name is required (--claim)"))?;
    let claim = b.claim(&name).cloned().ok_or_else(|| {
        let known: Vec<&str> = b.claims.keys().map(String::as_str).collect();
        Error::model(format!("unknown claim `{name}`; the scenario defines {known:?}"))
    })?;
    let mut report = RunReport::new("price", echo(opts, &b));
    let r = indifference_price(&b.model, &b.priors, &b.utility, &claim, &b.solver.options())?;
    report.check("buyer_below_seller", r.p_b <= r.p_s + 1e-6, r.p_b - r.p_s, 1e-6);
    report.check("oracle_agreement", r.method_agreement <= PRICE_AGREEMENT, r.method_agreement, PRICE_AGREEMENT);
    let (lo, hi) = r.no_arbitrage_bounds;
    let outside = (lo - r.p_b).max(r.p_s - hi).max(0.0);
    report.check("no_arbitrage_bounds", outside <= 1e-8, outside, 1e-8);
    report.price = Some(PriceSection {
        claim: name,
        p_b: Num(r.p_b),
        p_s: Num(r.p_s),
        gamma_at_qhat: Num(r.gamma_at_qhat),
        v0: Num(r.v0),
        oracle_price: Num(r.oracle_price),
        method_agreement: Num(r.method_agreement),
        lambda_hat: Num(r.lambda_hat),
        q_hat: Num::vec(&r.q_hat),
        no_arbitrage_bounds: [Num(lo), Num(hi)],
    });
    report.finalize();
    Ok(report)
}

pub fn cmd_verify(opts: &RunOptions) -> Result<RunReport> {
    let b = load(opts)?;
    let mut report = RunReport::new("verify", echo(opts, &b));
    let mut rng = ChaCha8Rng::seed_from_u64(b.solver.seed);
    let mut worst_young = f64::INFINITY;
    for _ in 0..500 {
        let x = rng.gen_range(-5.0..5.0);
        let y = 10f64.powf(rng.gen_range(-3.0..2.0));
        worst_young = worst_young.min(b.utility.young_gap(x, y)?);
    }
    report.check("young_inequality", worst_young >= -1e-10, worst_young, -1e-10);

    let g = duality_gap(&b.model, &b.priors, &b.utility, &b.solver.options())?;
    fill_gap(&mut report, &g);
    gap_checks(&mut report, &b, &g);

    if b.model.scenario_count() <= VERIFY_GRID_SCENARIOS {
        let nu: Vec<f64> = g.dual.q_hat.iter().map(|q| g.dual.lambda_hat * q).collect();
        let c = conjugate_identity_check(&b.utility, &b.priors, b.model.claim(), &nu, GridOptions::default())?;
        report.check("conjugate_young_side", c.excess <= 1e-8, c.excess, 1e-8);
        report.check("conjugate_grid_match", c.excess.abs() <= 1e-3, c.excess.abs(), 1e-3);
    }
    mixing(&mut report, &b, opts)?;
    report.finalize();
    Ok(report)
}

pub fn cmd_examples(opts: &RunOptions) -> Result<RunReport> {
    let n_max = opts.n_max.unwrap_or(12);
    let space = TruncatedCountableSpace::new(n_max)?;
    let config = ConfigEcho {
        n_max: Some(n_max),
        ..ConfigEcho::default()
    };
    let mut report = RunReport::new("examples", config);

    let mut exact = true;
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let e = space.expected_payoff(n);
        let target = num::BigRational::from_integer(2.into()) - num::BigRational::new(1.into(), (n as i64).into());
        exact &= e == target;
        rows.push(vec![json!(n), json!(e.to_string())]);
    }
    report.tables.push(Table {
        name: "expected payoff under each prior".into(),
        columns: vec!["n".into(), "E_n[W]".into()],
        rows,
    });
    report.check("expected_payoff_identity", exact, if exact { 0.0 } else { 1.0 }, 0.0);

    let table = modulus_table(&space);
    let tail_ok = table
        .iter()
        .filter(|r| r.threshold as usize <= n_max)
        .all(|r| r.tail == "1");
    let priors_monotone = table.windows(2).all(|w| w[1].priors_value <= w[0].priors_value);
    report.tables.push(Table {
        name: "uniform integrability moduli".into(),
        columns: vec!["N".into(), "tail".into(), "priors".into()],
        rows: table
            .iter()
            .map(|r| vec![json!(r.threshold), json!(r.tail), json!(r.priors)])
            .collect(),
    });
    report.check("tail_modulus_constant", tail_ok, if tail_ok { 1.0 } else { 0.0 }, 1.0);
    report.check("priors_modulus_nonincreasing", priors_monotone, if priors_monotone { 1.0 } else { 0.0 }, 1.0);

    let thresholds: Vec<f64> = (2..=n_max).map(|n| n as f64).collect();
    let trend = power_trend(&space, 0.5, &thresholds)?;
    report.tables.push(Table {
        name: "power payoff moduli (exponent 1/2, 1, 0)".into(),
        columns: vec!["N".into(), "W^0.5".into(), "W".into(), "1".into()],
        rows: trend
            .iter()
            .map(|r| vec![json!(r.threshold), json!(Num(r.fractional)), json!(Num(r.linear)), json!(Num(r.constant))])
            .collect(),
    });
    report.finalize();
    Ok(report)
}
