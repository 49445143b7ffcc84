//! Primal and dual solvers for the robust utility maximization problem and
//! the duality-gap check tying them together.
//!
//! Both sides use path-following log-barrier Newton methods on small dense
//! problems. Every Newton iterate is a feasible point of its problem, so the
//! recorded objective values are valid lower (primal) and upper (dual)
//! bounds at all times, not only at convergence.

mod dual;
mod primal;

pub use dual::{
    dual_value_with_capital, epsilon_mixing, optimal_scale, solve_dual, solve_dual_restricted, DualRestriction,
    DualResult, MixingRow,
};
pub use primal::{solve_primal, PrimalResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martingale::{build_constraints, find_equivalent_mm};
use crate::model::{PriorSet, ScenarioModel};
use crate::utility::Utility;

/// Weak duality is unconditional; this is the numerical slack allowed.
pub const WEAK_DUALITY_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimalMethod {
    #[default]
    Barrier,
    /// Projected supergradient ascent with Polyak steps and iterate averaging.
    Supergradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute duality-gap tolerance.
    pub tol: f64,
    pub max_iter_primal: usize,
    pub max_iter_dual: usize,
    pub primal_method: PrimalMethod,
    /// Known upper bound on the primal value, used for Polyak steps.
    pub dual_bound: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter_primal: 10_000,
            max_iter_dual: 2_000,
            primal_method: PrimalMethod::Barrier,
            dual_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
}

/// Barrier parameter at which path following stops: (number of barrier terms) / tau.
pub(crate) const BARRIER_GAP: f64 = 1e-11;

/// A strictly positive martingale measure, after checking that every
/// scenario is charged by some prior. Together these give a Q equivalent
/// to the reference measure with finite robust divergence for all scalings.
pub fn equivalent_measure(model: &ScenarioModel, priors: &PriorSet) -> Result<Vec<f64>> {
    model.check_priors(priors)?;
    if let Some(w) = (0..model.scenario_count()).find(|&w| !priors.covers(w)) {
        return Err(Error::Assumption {
            assumption: "A3",
            detail: format!("scenario {w} is charged by no prior, so no equivalent Q has finite divergence"),
        });
    }
    find_equivalent_mm(&build_constraints(model.market()))?.ok_or_else(|| Error::Assumption {
        assumption: "A3",
        detail: "no equivalent martingale measure exists (the market admits arbitrage)".into(),
    })
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub primal: PrimalResult,
    pub dual: DualResult,
    /// dual - primal
    pub gap: f64,
    /// min over dual iterates minus max over primal iterates.
    pub min_iterate_gap: f64,
    pub weak_duality_ok: bool,
    pub success: bool,
}

pub fn duality_gap(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    opts: &SolverOptions,
) -> Result<GapReport> {
    let dual = solve_dual(model, priors, utility, opts)?;
    let mut popts = *opts;
    popts.dual_bound = Some(dual.value);
    let primal = solve_primal(model, priors, utility, &popts)?;
    let gap = dual.value - primal.value;
    let best_dual = dual.history.iter().copied().chain([dual.value]).fold(f64::INFINITY, f64::min);
    let best_primal = primal.history.iter().copied().chain([primal.value]).fold(f64::NEG_INFINITY, f64::max);
    let min_iterate_gap = best_dual - best_primal;
    let weak_duality_ok = gap >= -WEAK_DUALITY_SLACK && min_iterate_gap >= -WEAK_DUALITY_SLACK;
    Ok(GapReport {
        success: weak_duality_ok && gap <= opts.tol,
        primal,
        dual,
        gap,
        min_iterate_gap,
        weak_duality_ok,
    })
}

/// The dual value stays strictly below `V(0)`: the zero measure never
/// attains the dual infimum. Vacuous when `V(0) = +inf`.
pub fn check_variational_bound(dual: &DualResult, utility: &Utility) -> bool {
    dual.value < utility.v_at_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Claim, FiltrationTree, Market, ScenarioSpace};

    pub(crate) fn binomial(claim: Vec<f64>) -> ScenarioModel {
        let tree = FiltrationTree::from_branching(&[2]).unwrap();
        let market = Market::new(1, vec![vec![vec![1.0]], vec![vec![2.0], vec![0.5]]], tree).unwrap();
        ScenarioModel::new(ScenarioSpace::uniform(2).unwrap(), market, Claim::new(claim).unwrap()).unwrap()
    }

    #[test]
    fn assumption_a3_detection() {
        let model = binomial(vec![0.0, 0.0]);
        let e = equivalent_measure(&model, &PriorSet::singleton(vec![1.0, 0.0]).unwrap()).unwrap_err();
        assert_eq!(e.assumption(), Some("A3"));
        let tree = FiltrationTree::from_branching(&[2]).unwrap();
        let arb = Market::new(1, vec![vec![vec![1.0]], vec![vec![2.0], vec![1.5]]], tree).unwrap();
        let m = ScenarioModel::new(ScenarioSpace::uniform(2).unwrap(), arb, Claim::zero(2)).unwrap();
        let e = equivalent_measure(&m, &PriorSet::singleton(vec![0.5, 0.5]).unwrap()).unwrap_err();
        assert_eq!(e.assumption(), Some("A3"));
        assert!(solve_dual(&m, &PriorSet::singleton(vec![0.5, 0.5]).unwrap(), &Utility::exponential(), &SolverOptions::default()).is_err());
    }

    #[test]
    fn complete_binomial_strong_duality() {
        // singleton P = (1/2, 1/2), EXP, B = 0. Unique Q = (1/3, 2/3):
        // value = -exp(-H(Q|P)) with H the relative entropy.
        let model = binomial(vec![0.0, 0.0]);
        let priors = PriorSet::singleton(vec![0.5, 0.5]).unwrap();
        let u = Utility::exponential();
        let r = duality_gap(&model, &priors, &u, &SolverOptions::default()).unwrap();
        assert!(r.gap.abs() <= 1e-6, "gap {}", r.gap);
        assert!(r.weak_duality_ok);
        let q = [1.0 / 3.0, 2.0 / 3.0];
        let h: f64 = q.iter().map(|x| x * (x / 0.5f64).ln()).sum();
        assert!((r.dual.value + (-h).exp()).abs() < 1e-9);
        assert!((r.dual.q_hat[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((r.dual.lambda_hat - (-h).exp()).abs() < 1e-8);
        assert!(check_variational_bound(&r.dual, &u));
    }

    #[test]
    fn deterministic_market_reduces_to_static_problem() {
        let tree = FiltrationTree::from_branching(&[2]).unwrap();
        let flat = Market::new(1, vec![vec![vec![1.0]], vec![vec![1.0], vec![1.0]]], tree).unwrap();
        let claim = Claim::new(vec![0.5, -1.0]).unwrap();
        let model = ScenarioModel::new(ScenarioSpace::uniform(2).unwrap(), flat, claim).unwrap();
        let priors = PriorSet::new(vec![vec![0.3, 0.7], vec![0.8, 0.2]]).unwrap();
        let u = Utility::exponential();
        let r = duality_gap(&model, &priors, &u, &SolverOptions::default()).unwrap();
        let expected = priors
            .vertices()
            .iter()
            .map(|p| p[0] * u.u(0.5) + p[1] * u.u(-1.0))
            .fold(f64::INFINITY, f64::min);
        assert!((r.primal.value - expected).abs() < 1e-12);
        assert!(r.primal.theta_hat.to_flat().iter().all(|v| *v == 0.0));
        assert!(r.gap.abs() < 1e-7, "gap {}", r.gap);
    }

    #[test]
    fn deterministic_market_claimless_dual_grid_oracle() {
        let tree = FiltrationTree::from_branching(&[2]).unwrap();
        let flat = Market::new(1, vec![vec![vec![1.0]], vec![vec![1.0], vec![1.0]]], tree).unwrap();
        let model = ScenarioModel::new(ScenarioSpace::uniform(2).unwrap(), flat, Claim::zero(2)).unwrap();
        let priors = PriorSet::singleton(vec![0.4, 0.6]).unwrap();
        let u = Utility::exponential();
        let d = solve_dual(&model, &priors, &u, &SolverOptions::default()).unwrap();
        // 2-d grid over (lambda, q1)
        let mut best = f64::INFINITY;
        for i in 1..400 {
            let lam = i as f64 * 0.005;
            for j in 1..200 {
                let q1 = j as f64 / 200.0;
                let v = crate::functionals::v_divergence(&u, &[lam * q1, lam * (1.0 - q1)], &[0.4, 0.6]);
                best = best.min(v);
            }
        }
        assert!((d.value + 1.0).abs() < 1e-9);
        assert!(d.value <= best + 1e-12 && best - d.value < 1e-3);
    }

    #[test]
    fn lower_bound_by_zero_strategy() {
        let model = binomial(vec![0.0, 0.0]);
        let priors = PriorSet::new(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        for u in [Utility::exponential(), Utility::glued()] {
            let p = solve_primal(&model, &priors, &u, &SolverOptions::default()).unwrap();
            assert!(p.value >= u.u(0.0) - 1e-12);
        }
    }
}
