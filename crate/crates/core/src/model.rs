//! Finite filtered market: scenario space, filtration tree, adapted prices,
//! the claim, prior polytope and predictable strategies.
//!
//! Everything is validated on construction and immutable afterwards. The
//! prior set is stored by its vertices, so inner infima of linear functionals
//! of the prior reduce to vertex scans.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::utility::Utility;

/// Tolerance on probability vectors summing to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

fn check_probability(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::model(format!("{what}: entries must be finite and nonnegative")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::model(format!("{what}: entries sum to {s}, expected 1")));
    }
    Ok(())
}

/// Finite scenario space carrying the reference measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpace {
    weights: Vec<f64>,
}

impl ScenarioSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::model("scenario space is empty"));
        }
        check_probability(&weights, "reference weights")?;
        if weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::model("reference weights must be strictly positive"));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Information structure as a sequence of refining partitions of the scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationTree {
    levels: Vec<Vec<Vec<usize>>>,
    // cell_of[t][omega] = index of the level-t cell containing omega
    cell_of: Vec<Vec<usize>>,
}

impl FiltrationTree {
    pub fn new(levels: Vec<Vec<Vec<usize>>>, scenario_count: usize) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::model("filtration needs at least two levels (T >= 1)"));
        }
        if levels[0].len() != 1 {
            return Err(Error::model("level 0 must be a single cell"));
        }
        let mut cell_of = Vec::with_capacity(levels.len());
        for (t, level) in levels.iter().enumerate() {
            let mut owner = vec![usize::MAX; scenario_count];
            for (c, cell) in level.iter().enumerate() {
                if cell.is_empty() {
                    return Err(Error::model(format!("level {t}: cell {c} is empty")));
                }
                for &w in cell {
                    if w >= scenario_count {
                        return Err(Error::model(format!(
                            "level {t}: scenario index {w} out of range 0..{scenario_count}"
                        )));
                    }
                    if owner[w] != usize::MAX {
                        return Err(Error::model(format!(
                            "level {t}: scenario {w} appears in more than one cell"
                        )));
                    }
                    owner[w] = c;
                }
            }
            if let Some(w) = owner.iter().position(|&c| c == usize::MAX) {
                return Err(Error::model(format!("level {t}: scenario {w} is not covered")));
            }
            cell_of.push(owner);
        }
        for t in 1..levels.len() {
            for cell in &levels[t] {
                let parent = cell_of[t - 1][cell[0]];
                if cell.iter().any(|&w| cell_of[t - 1][w] != parent) {
                    return Err(Error::model(format!(
                        "level {t} does not refine level {}",
                        t - 1
                    )));
                }
            }
        }
        let last = levels.last().expect("checked length");
        if last.iter().any(|c| c.len() != 1) {
            return Err(Error::model("terminal level must consist of singletons"));
        }
        Ok(Self { levels, cell_of })
    }

    /// Tree generated by per-period branching factors; scenarios are the
    /// leaves in lexicographic order.
    pub fn from_branching(branching: &[usize]) -> Result<Self> {
        if branching.is_empty() || branching.contains(&0) {
            return Err(Error::model("branching factors must be positive and nonempty"));
        }
        let n: usize = branching.iter().product();
        let mut levels = Vec::with_capacity(branching.len() + 1);
        let mut block = n;
        levels.push(vec![(0..n).collect::<Vec<_>>()]);
        for &b in branching {
            block /= b;
            levels.push((0..n / block).map(|c| (c * block..(c + 1) * block).collect()).collect());
        }
        Self::new(levels, n)
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn scenario_count(&self) -> usize {
        self.cell_of[0].len()
    }

    pub fn levels(&self) -> &[Vec<Vec<usize>>] {
        &self.levels
    }

    pub fn cells(&self, t: usize) -> &[Vec<usize>] {
        &self.levels[t]
    }

    pub fn cell_of(&self, t: usize, omega: usize) -> usize {
        self.cell_of[t][omega]
    }
}

/// `d` assets with prices adapted to the tree: one d-vector per cell and time.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    asset_count: usize,
    prices: Vec<Vec<Vec<f64>>>,
    tree: FiltrationTree,
}

impl Market {
    pub fn new(asset_count: usize, prices: Vec<Vec<Vec<f64>>>, tree: FiltrationTree) -> Result<Self> {
        if asset_count == 0 {
            return Err(Error::model("market needs at least one asset"));
        }
        if prices.len() != tree.levels.len() {
            return Err(Error::dim(format!(
                "prices given for {} times, tree has {}",
                prices.len(),
                tree.levels.len()
            )));
        }
        for (t, level) in prices.iter().enumerate() {
            if level.len() != tree.levels[t].len() {
                return Err(Error::dim(format!(
                    "time {t}: {} price vectors for {} cells",
                    level.len(),
                    tree.levels[t].len()
                )));
            }
            for (c, p) in level.iter().enumerate() {
                if p.len() != asset_count {
                    return Err(Error::dim(format!(
                        "time {t}, cell {c}: price vector has {} entries, expected {asset_count}",
                        p.len()
                    )));
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::model(format!("time {t}, cell {c}: non-finite price")));
                }
            }
        }
        Ok(Self {
            asset_count,
            prices,
            tree,
        })
    }

    pub fn asset_count(&self) -> usize {
        self.asset_count
    }

    pub fn tree(&self) -> &FiltrationTree {
        &self.tree
    }

    pub fn horizon(&self) -> usize {
        self.tree.horizon()
    }

    pub fn scenario_count(&self) -> usize {
        self.tree.scenario_count()
    }

    pub fn prices(&self) -> &[Vec<Vec<f64>>] {
        &self.prices
    }

    pub fn price(&self, t: usize, cell: usize) -> &[f64] {
        &self.prices[t][cell]
    }

    /// S_{t+1}(omega) - S_t(omega), asset `i`.
    pub fn increment(&self, t: usize, omega: usize, i: usize) -> f64 {
        let now = self.tree.cell_of(t, omega);
        let next = self.tree.cell_of(t + 1, omega);
        self.prices[t + 1][next][i] - self.prices[t][now][i]
    }

    /// Number of scalar trading parameters: one per (non-terminal cell, asset).
    pub fn parameter_count(&self) -> usize {
        (0..self.horizon()).map(|t| self.tree.cells(t).len()).sum::<usize>() * self.asset_count
    }

    /// Linear map from flattened holdings to terminal gains (scenarios x parameters).
    pub fn gain_matrix(&self) -> DMatrix<f64> {
        let n = self.scenario_count();
        let d = self.asset_count;
        let mut g = DMatrix::zeros(n, self.parameter_count());
        let mut offset = 0;
        for t in 0..self.horizon() {
            for omega in 0..n {
                let c = self.tree.cell_of(t, omega);
                for i in 0..d {
                    g[(omega, offset + c * d + i)] = self.increment(t, omega, i);
                }
            }
            offset += self.tree.cells(t).len() * d;
        }
        g
    }
}

/// Terminal payoff of the claim held by the investor.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    payoff: Vec<f64>,
}

impl Claim {
    pub fn new(payoff: Vec<f64>) -> Result<Self> {
        if payoff.iter().any(|x| !x.is_finite()) {
            return Err(Error::model("claim payoff must be finite"));
        }
        Ok(Self { payoff })
    }

    pub fn zero(n: usize) -> Self {
        Self { payoff: vec![0.0; n] }
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn len(&self) -> usize {
        self.payoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoff.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.payoff.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            payoff: self.payoff.iter().map(|x| x + c).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            payoff: self.payoff.iter().map(|x| -x).collect(),
        }
    }
}

/// Ambiguity polytope given by the convex hull of finitely many probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    vertices: Vec<Vec<f64>>,
}

impl PriorSet {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::Assumption {
                assumption: "A1",
                detail: "prior set has no vertices".into(),
            });
        };
        let n = first.len();
        for (k, v) in vertices.iter().enumerate() {
            if v.len() != n {
                return Err(Error::dim(format!("prior vertex {k} has {} entries, expected {n}", v.len())));
            }
            check_probability(v, &format!("prior vertex {k}")).map_err(|e| Error::Assumption {
                assumption: "A1",
                detail: e.to_string(),
            })?;
        }
        Ok(Self { vertices })
    }

    pub fn singleton(p: Vec<f64>) -> Result<Self> {
        Self::new(vec![p])
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn scenario_count(&self) -> usize {
        self.vertices[0].len()
    }

    /// Convex combination of the vertices with the given weights.
    pub fn mixture(&self, weights: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.scenario_count()];
        for (w, v) in weights.iter().zip(&self.vertices) {
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += w * vi;
            }
        }
        p
    }

    /// Uniform vertex average; its support is the union of all vertex supports.
    pub fn average(&self) -> Vec<f64> {
        let k = self.vertex_count();
        self.mixture(&vec![1.0 / k as f64; k])
    }

    pub fn covers(&self, omega: usize) -> bool {
        self.vertices.iter().any(|v| v[omega] > 0.0)
    }
}

/// Predictable holdings: one d-vector per non-terminal time and cell of that time.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    holdings: Vec<Vec<Vec<f64>>>,
}

impl Strategy {
    pub fn new(holdings: Vec<Vec<Vec<f64>>>) -> Self {
        Self { holdings }
    }

    pub fn zeros(market: &Market) -> Self {
        let d = market.asset_count();
        Self {
            holdings: (0..market.horizon())
                .map(|t| vec![vec![0.0; d]; market.tree().cells(t).len()])
                .collect(),
        }
    }

    /// Inverse of [`Strategy::to_flat`], in the column order of [`Market::gain_matrix`].
    pub fn from_flat(market: &Market, flat: &[f64]) -> Result<Self> {
        if flat.len() != market.parameter_count() {
            return Err(Error::dim(format!(
                "{} strategy parameters, market needs {}",
                flat.len(),
                market.parameter_count()
            )));
        }
        let d = market.asset_count();
        let mut it = flat.iter().copied();
        let holdings = (0..market.horizon())
            .map(|t| {
                (0..market.tree().cells(t).len())
                    .map(|_| it.by_ref().take(d).collect())
                    .collect()
            })
            .collect();
        Ok(Self { holdings })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.holdings.iter().flatten().flatten().copied().collect()
    }

    pub fn holdings(&self) -> &[Vec<Vec<f64>>] {
        &self.holdings
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            holdings: self
                .holdings
                .iter()
                .map(|lvl| lvl.iter().map(|h| h.iter().map(|x| c * x).collect()).collect())
                .collect(),
        }
    }

    fn check(&self, market: &Market) -> Result<()> {
        let ok = self.holdings.len() == market.horizon()
            && self.holdings.iter().enumerate().all(|(t, lvl)| {
                lvl.len() == market.tree().cells(t).len()
                    && lvl.iter().all(|h| h.len() == market.asset_count())
            });
        if ok {
            Ok(())
        } else {
            Err(Error::dim("strategy shape does not match the market tree"))
        }
    }
}

/// Market, reference measure and claim on a common scenario space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioModel {
    space: ScenarioSpace,
    market: Market,
    claim: Claim,
}

impl ScenarioModel {
    pub fn new(space: ScenarioSpace, market: Market, claim: Claim) -> Result<Self> {
        let n = space.len();
        if market.scenario_count() != n {
            return Err(Error::dim(format!(
                "market tree has {} scenarios, space has {n}",
                market.scenario_count()
            )));
        }
        if claim.len() != n {
            return Err(Error::dim(format!("claim has {} entries, space has {n}", claim.len())));
        }
        Ok(Self { space, market, claim })
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn claim(&self) -> &Claim {
        &self.claim
    }

    pub fn scenario_count(&self) -> usize {
        self.space.len()
    }

    pub fn with_claim(&self, claim: Claim) -> Result<Self> {
        Self::new(self.space.clone(), self.market.clone(), claim)
    }

    pub fn check_priors(&self, priors: &PriorSet) -> Result<()> {
        if priors.scenario_count() != self.scenario_count() {
            return Err(Error::dim(format!(
                "priors live on {} scenarios, model has {}",
                priors.scenario_count(),
                self.scenario_count()
            )));
        }
        Ok(())
    }
}

/// Terminal wealth of the self-financing strategy started from zero:
/// sum over t of theta_t . (S_{t+1} - S_t), scenario by scenario.
pub fn terminal_gain(market: &Market, theta: &Strategy) -> Result<Vec<f64>> {
    theta.check(market)?;
    let n = market.scenario_count();
    let tree = market.tree();
    let gains = (0..n)
        .map(|omega| {
            (0..market.horizon())
                .map(|t| {
                    let h = &theta.holdings[t][tree.cell_of(t, omega)];
                    h.iter()
                        .enumerate()
                        .map(|(i, hi)| hi * market.increment(t, omega, i))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect();
    Ok(gains)
}

pub fn expectation(measure: &[f64], x: &[f64]) -> Result<f64> {
    if measure.len() != x.len() {
        return Err(Error::dim(format!(
            "measure has {} entries, vector has {}",
            measure.len(),
            x.len()
        )));
    }
    // zero-mass atoms never contribute, even where x is infinite
    Ok(measure
        .iter()
        .zip(x)
        .filter(|(m, _)| **m != 0.0)
        .map(|(m, v)| m * v)
        .sum())
}

/// Expected utility of `wealth` under each prior vertex.
pub fn vertex_expected_utilities(priors: &PriorSet, utility: &Utility, wealth: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = wealth.iter().map(|&x| utility.u(x)).collect();
    priors
        .vertices()
        .iter()
        .map(|p| p.iter().zip(&u).filter(|(pi, _)| **pi != 0.0).map(|(pi, ui)| pi * ui).sum())
        .collect()
}

/// inf over the prior polytope of E_P[U(theta . S_T + B)], attained at a vertex.
pub fn worst_case_expected_utility(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    theta: &Strategy,
) -> Result<f64> {
    model.check_priors(priors)?;
    let mut wealth = terminal_gain(model.market(), theta)?;
    for (x, b) in wealth.iter_mut().zip(model.claim().payoff()) {
        *x += b;
    }
    Ok(vertex_expected_utilities(priors, utility, &wealth)
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
