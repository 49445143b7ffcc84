//! Robust utility indifference prices.
//!
//! The buyer's price is `inf_Q (E_Q[B] + gamma(Q))` with
//! `gamma(Q) = inf_l (V(l Q | P) - v0) / l`. Jointly over (l, Q) this is the
//! ratio `(G_B(nu) - v0) / mass(nu)` for `nu = l Q`, minimized here by
//! Dinkelbach iterations: each step solves the dual for the claim `B - p`
//! and updates `p` to the ratio at the minimizer.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::robust_v_divergence;
use crate::martingale::build_constraints;
use crate::model::{Claim, PriorSet, ScenarioModel};
use crate::solvers::{solve_dual, solve_primal, SolverOptions};
use crate::utility::Utility;

const DINKELBACH_MAX_ITER: usize = 60;
const ORACLE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceReport {
    /// Buyer's price.
    pub p_b: f64,
    /// Seller's price, -p_b(-B).
    pub p_s: f64,
    pub gamma_at_qhat: f64,
    /// Claimless dual value.
    pub v0: f64,
    pub oracle_price: f64,
    /// |p_b - oracle_price|
    pub method_agreement: f64,
    /// Martingale measure attaining the buyer's price.
    pub q_hat: Vec<f64>,
    pub lambda_hat: f64,
    /// Sub- and super-replication prices over martingale probabilities.
    pub no_arbitrage_bounds: (f64, f64),
    pub iterations: usize,
}

pub fn claimless_value(model: &ScenarioModel, priors: &PriorSet, utility: &Utility, opts: &SolverOptions) -> Result<f64> {
    let m = model.with_claim(Claim::zero(model.scenario_count()))?;
    Ok(solve_dual(&m, priors, utility, opts)?.value)
}

/// `inf_l (V(l q | P) - v0) / l`; +inf when q charges a scenario no prior sees.
/// The ratio is quasi-convex in l, so a log-spaced scan followed by golden
/// section on log l finds its minimum.
pub fn penalty_gamma(utility: &Utility, priors: &PriorSet, q: &[f64], v0: f64) -> f64 {
    let f = |s: f64| -> f64 {
        let l = s.exp();
        let nu: Vec<f64> = q.iter().map(|v| l * v).collect();
        (robust_v_divergence(utility, &nu, priors).value - v0) / l
    };
    if !f(0.0).is_finite() {
        return f64::INFINITY;
    }
    let grid: Vec<f64> = (0..=80).map(|i| -20.0 + 0.5 * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
    let best = (0..vals.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-9 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    vals[best].min(fc).min(fd)
}

struct BuyerPrice {
    price: f64,
    q_hat: Vec<f64>,
    lambda_hat: f64,
    gamma: f64,
    iterations: usize,
}

fn buyer_price(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    claim: &Claim,
    v0: f64,
    start_q: &[f64],
    opts: &SolverOptions,
) -> Result<BuyerPrice> {
    let b = claim.payoff();
    let mean = |q: &[f64]| -> f64 { q.iter().zip(b).map(|(x, y)| x * y).sum() };
    // gamma vanishes at the claimless optimizer, so this is an upper bound
    let mut p = mean(start_q);
    let mut q_hat = start_q.to_vec();
    let mut lambda_hat = f64::NAN;
    let mut iterations = 0;
    for _ in 0..DINKELBACH_MAX_ITER {
        iterations += 1;
        let d = solve_dual(&model.with_claim(claim.shifted(-p))?, priors, utility, opts)?;
        let excess = d.value - v0;
        let next = p + excess / d.lambda_hat;
        q_hat = d.q_hat;
        lambda_hat = d.lambda_hat;
        let done = excess.abs() <= 1e-12 * (1.0 + v0.abs()) || (next - p).abs() <= 1e-12 * (1.0 + p.abs());
        if next < p {
            p = next;
        }
        if done {
            break;
        }
    }
    let gamma = penalty_gamma(utility, priors, &q_hat, v0);
    let price = p.min(mean(&q_hat) + gamma);
    Ok(BuyerPrice {
        price,
        q_hat,
        lambda_hat,
        gamma,
        iterations,
    })
}

pub fn indifference_price(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    claim: &Claim,
    opts: &SolverOptions,
) -> Result<PriceReport> {
    if claim.len() != model.scenario_count() {
        return Err(Error::dim("claim length differs from scenario count"));
    }
    let base = model.with_claim(Claim::zero(model.scenario_count()))?;
    let d0 = solve_dual(&base, priors, utility, opts)?;
    let v0 = d0.value;
    let buy = buyer_price(model, priors, utility, claim, v0, &d0.q_hat, opts)?;
    let sell = buyer_price(model, priors, utility, &claim.negated(), v0, &d0.q_hat, opts)?;
    let oracle_price = price_oracle_bisection(model, priors, utility, claim, opts)?;
    let c = build_constraints(model.market());
    let lo = c.minimize_linear(claim.payoff())?;
    let neg: Vec<f64> = claim.payoff().iter().map(|v| -v).collect();
    let hi = c.minimize_linear(&neg)?;
    let no_arbitrage_bounds = match (lo, hi) {
        (Some((_, l)), Some((_, h))) => (l, -h),
        _ => return Err(Error::solver("no-arbitrage bounds", "martingale polytope is empty")),
    };
    Ok(PriceReport {
        p_b: buy.price,
        p_s: -sell.price,
        gamma_at_qhat: buy.gamma,
        v0,
        method_agreement: (buy.price - oracle_price).abs(),
        oracle_price,
        q_hat: buy.q_hat,
        lambda_hat: buy.lambda_hat,
        no_arbitrage_bounds,
        iterations: buy.iterations + sell.iterations,
    })
}

/// Buyer's price alone, without the seller side and the bisection oracle.
pub fn buyer_indifference_price(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    claim: &Claim,
    opts: &SolverOptions,
) -> Result<f64> {
    if claim.len() != model.scenario_count() {
        return Err(Error::dim("claim length differs from scenario count"));
    }
    let d0 = solve_dual(&model.with_claim(Claim::zero(model.scenario_count()))?, priors, utility, opts)?;
    Ok(buyer_price(model, priors, utility, claim, d0.value, &d0.q_hat, opts)?.price)
}

/// Largest p with primal value(B - p) >= primal value(0), by bisection.
pub fn price_oracle_bisection(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    claim: &Claim,
    opts: &SolverOptions,
) -> Result<f64> {
    let zero = model.with_claim(Claim::zero(model.scenario_count()))?;
    let target = solve_primal(&zero, priors, utility, opts)?.value;
    let value = |p: f64| -> Result<f64> { Ok(solve_primal(&model.with_claim(claim.shifted(-p))?, priors, utility, opts)?.value) };
    let span = claim.sup_norm() + 1.0;
    let (mut lo, mut hi) = (-span, span);
    if value(lo)? < target || value(hi)? >= target {
        return Err(Error::solver("price bisection", format!("bracket [{lo}, {hi}] does not contain the price")));
    }
    while hi - lo > ORACLE_TOL * 0.01 {
        let mid = 0.5 * (lo + hi);
        if value(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
