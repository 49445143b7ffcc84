//! TOML scenario files.
//!
//! ```toml
//! [space]
//! weights = [0.5, 0.5]
//!
//! [tree]
//! branching = [2]            # or: levels = [[[0, 1]], [[0], [1]]]
//!
//! [market]
//! assets = 1
//! prices = [[[1.0]], [[2.0], [0.5]]]   # prices[t][cell][asset]
//!
//! [claim]
//! payoff = [0.0, 0.0]
//!
//! [claims]
//! up-indicator = [1.0, 0.0]
//!
//! [priors]
//! vertices = [[0.5, 0.5]]
//!
//! [utility]
//! name = "exp"               # exp | glued
//! risk_aversion = 1.0
//! conjugate = "analytic"     # analytic | numeric
//!
//! [solver]
//! tol = 1e-6
//! max_iter = 10000
//! seed = 7
//! ```
//!
//! Syntax errors carry the line and column of the offending token;
//! validation errors carry the line of the offending key (or section
//! header) and name the violated assumption where there is one.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Claim, FiltrationTree, Market, PriorSet, ScenarioModel, ScenarioSpace};
use crate::solvers::{equivalent_measure, SolverOptions};
use crate::utility::{ConjugateMode, Utility, UtilityKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    space: RawSpace,
    tree: RawTree,
    market: RawMarket,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claim: Option<RawClaim>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    claims: BTreeMap<String, Vec<f64>>,
    priors: RawPriors,
    utility: RawUtility,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<RawSolver>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branching: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<Vec<Vec<usize>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    assets: usize,
    prices: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaim {
    payoff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriors {
    vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtility {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    risk_aversion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conjugate: Option<ConjugateMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    /// Caps both solvers when set.
    pub max_iter: Option<usize>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        let mut o = SolverOptions {
            tol: self.tol,
            ..SolverOptions::default()
        };
        if let Some(m) = self.max_iter {
            o.max_iter_primal = m;
            o.max_iter_dual = m;
        }
        o
    }
}

/// A validated scenario: model (with the default claim), priors, utility,
/// named claims and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub model: ScenarioModel,
    pub priors: PriorSet,
    pub utility: Utility,
    pub claims: BTreeMap<String, Claim>,
    pub solver: SolverConfig,
}

impl ScenarioBundle {
    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.get(name)
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioBundle> {
    let src = std::fs::read_to_string(path)?;
    parse_scenario_str(&src)
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |i| offset - i - 1) + 1;
    (line, column)
}

/// Line of `key` inside `[section]`, falling back to the header line, then 1.
fn locate(src: &str, section: &str, key: Option<&str>) -> usize {
    let header = format!("[{section}]");
    let mut in_section = false;
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            in_section = line.starts_with(&header);
            if in_section && header_line.is_none() {
                header_line = Some(i + 1);
            }
            continue;
        }
        if in_section {
            if let Some(k) = key {
                let name = line.split('=').next().unwrap_or("").trim().trim_matches('"');
                if line.contains('=') && name == k {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

pub fn parse_scenario_str(src: &str) -> Result<ScenarioBundle> {
    let raw: RawScenario = toml::from_str(src).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(src, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let at = |section: &str, key: Option<&str>| {
        let line = locate(src, section, key);
        let section = section.to_string();
        move |e: Error| Error::Validation {
            section,
            line,
            source: Box::new(e),
        }
    };

    let space = ScenarioSpace::new(raw.space.weights.clone()).map_err(at("space", Some("weights")))?;
    let n = space.len();
    let tree = match (&raw.tree.branching, &raw.tree.levels) {
        (Some(b), None) => FiltrationTree::from_branching(b).map_err(at("tree", Some("branching")))?,
        (None, Some(l)) => FiltrationTree::new(l.clone(), n).map_err(at("tree", Some("levels")))?,
        _ => return Err(at("tree", None)(Error::model("give exactly one of `branching` or `levels`"))),
    };
    if tree.scenario_count() != n {
        return Err(at("tree", None)(Error::dim(format!(
            "tree has {} leaves, space has {n} scenarios",
            tree.scenario_count()
        ))));
    }
    let market = Market::new(raw.market.assets, raw.market.prices.clone(), tree).map_err(at("market", Some("prices")))?;
    let claim = match &raw.claim {
        Some(c) => {
            if c.payoff.len() != n {
                return Err(at("claim", Some("payoff"))(Error::dim(format!(
                    "payoff has {} entries, expected {n}",
                    c.payoff.len()
                ))));
            }
            Claim::new(c.payoff.clone()).map_err(at("claim", Some("payoff")))?
        }
        None => Claim::zero(n),
    };
    let mut claims = BTreeMap::new();
    for (name, payoff) in &raw.claims {
        let wrap = at("claims", Some(name));
        if payoff.len() != n {
            return Err(wrap(Error::dim(format!("claim `{name}` has {} entries, expected {n}", payoff.len()))));
        }
        claims.insert(name.clone(), Claim::new(payoff.clone()).map_err(wrap)?);
    }
    let model = ScenarioModel::new(space, market, claim).map_err(at("market", None))?;
    let priors = PriorSet::new(raw.priors.vertices.clone()).map_err(at("priors", Some("vertices")))?;
    model.check_priors(&priors).map_err(at("priors", Some("vertices")))?;

    let kind = match raw.utility.name.as_str() {
        "exp" => UtilityKind::Exponential {
            risk_aversion: raw.utility.risk_aversion.unwrap_or(1.0),
        },
        "glued" => {
            if raw.utility.risk_aversion.is_some() {
                return Err(at("utility", Some("risk_aversion"))(Error::model("`glued` takes no parameters")));
            }
            UtilityKind::Glued
        }
        "custom-table" => {
            return Err(at("utility", Some("name"))(Error::model("tabulated utilities are not supported")));
        }
        other => return Err(at("utility", Some("name"))(Error::model(format!("unknown utility `{other}`")))),
    };
    let utility = Utility::new(kind, raw.utility.conjugate.unwrap_or_default()).map_err(at("utility", None))?;

    let mut solver = SolverConfig::default();
    if let Some(s) = &raw.solver {
        if let Some(t) = s.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(at("solver", Some("tol"))(Error::Domain(format!("tolerance must be positive, got {t}"))));
            }
            solver.tol = t;
        }
        if let Some(m) = s.max_iter {
            if m == 0 {
                return Err(at("solver", Some("max_iter"))(Error::Domain("max_iter must be positive".into())));
            }
            solver.max_iter = Some(m);
        }
        solver.seed = s.seed.unwrap_or(0);
    }

    equivalent_measure(&model, &priors).map_err(at("market", None))?;
    Ok(ScenarioBundle {
        model,
        priors,
        utility,
        claims,
        solver,
    })
}

/// Serializes a bundle back to the scenario format. The tree is always
/// written as explicit levels.
pub fn emit_scenario(bundle: &ScenarioBundle) -> String {
    let model = &bundle.model;
    let market = model.market();
    let (name, risk_aversion) = match bundle.utility.kind() {
        UtilityKind::Exponential { risk_aversion } => ("exp", Some(risk_aversion)),
        UtilityKind::Glued => ("glued", None),
    };
    let raw = RawScenario {
        space: RawSpace {
            weights: model.space().weights().to_vec(),
        },
        tree: RawTree {
            branching: None,
            levels: Some(market.tree().levels().to_vec()),
        },
        market: RawMarket {
            assets: market.asset_count(),
            prices: market.prices().to_vec(),
        },
        claim: Some(RawClaim {
            payoff: model.claim().payoff().to_vec(),
        }),
        claims: bundle.claims.iter().map(|(k, c)| (k.clone(), c.payoff().to_vec())).collect(),
        priors: RawPriors {
            vertices: bundle.priors.vertices().to_vec(),
        },
        utility: RawUtility {
            name: name.into(),
            risk_aversion,
            conjugate: Some(bundle.utility.mode()),
        },
        solver: Some(RawSolver {
            tol: Some(bundle.solver.tol),
            max_iter: bundle.solver.max_iter,
            seed: Some(bundle.solver.seed),
        }),
    };
    toml::to_string(&raw).expect("scenario data serializes to TOML")
}
