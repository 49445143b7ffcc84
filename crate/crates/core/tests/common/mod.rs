#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_duality::io::{ScenarioBundle, SolverConfig};
use robust_duality::model::{Claim, FiltrationTree, Market, PriorSet, ScenarioModel, ScenarioSpace};
use robust_duality::utility::Utility;

pub const SUITE_SEED: u64 = 20_240_601;

pub struct Instance {
    pub name: String,
    pub bundle: ScenarioBundle,
}

const SHAPES: [&[usize]; 7] = [&[2], &[3], &[4], &[2, 2], &[3, 2], &[2, 3], &[2, 2, 2]];

/// Prices with a planted strictly positive martingale measure: at each node
/// the child prices are the parent price times (1 + centered noise).
fn market(rng: &mut ChaCha8Rng, branching: &[usize], assets: usize) -> Market {
    let tree = FiltrationTree::from_branching(branching).unwrap();
    let mut prices = vec![vec![vec![1.0; assets]]];
    for &b in branching {
        let parents = prices.last().unwrap().clone();
        let mut level = Vec::new();
        for parent in &parents {
            let q: Vec<f64> = (0..b).map(|_| rng.gen_range(0.5..1.5)).collect();
            let qs: f64 = q.iter().sum();
            let mut children = vec![vec![0.0; assets]; b];
            for i in 0..assets {
                let z: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mean: f64 = z.iter().zip(&q).map(|(a, w)| a * w).sum::<f64>() / qs;
                let spread = z.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max).max(1e-9);
                let scale = rng.gen_range(0.1..0.4) / spread;
                for c in 0..b {
                    children[c][i] = parent[i] * (1.0 + scale * (z[c] - mean));
                }
            }
            level.extend(children);
        }
        prices.push(level);
    }
    Market::new(assets, prices, tree).unwrap()
}

fn probability(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn claim(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

pub fn instance(rng: &mut ChaCha8Rng, index: usize) -> Instance {
    let shape = SHAPES[index % SHAPES.len()];
    let n: usize = shape.iter().product();
    let assets = if index % 5 == 4 && shape[0] >= 3 { 2 } else { 1 };
    let market = market(rng, shape, assets);
    let vertices = 1 + index % 4;
    let priors = PriorSet::new((0..vertices).map(|_| probability(rng, n)).collect()).unwrap();
    let utility = if index.is_multiple_of(2) { Utility::exponential() } else { Utility::glued() };
    let payoff = if index.is_multiple_of(6) { vec![0.0; n] } else { claim(rng, n) };
    let model = ScenarioModel::new(
        ScenarioSpace::new(probability(rng, n)).unwrap(),
        market,
        Claim::new(payoff).unwrap(),
    )
    .unwrap();
    let mut claims = BTreeMap::new();
    claims.insert("random".to_string(), Claim::new(claim(rng, n)).unwrap());
    Instance {
        name: format!("#{index:02} {} {:?} d={assets} K={vertices}", utility.name(), shape),
        bundle: ScenarioBundle {
            model,
            priors,
            utility,
            claims,
            solver: SolverConfig {
                seed: SUITE_SEED + index as u64,
                ..SolverConfig::default()
            },
        },
    }
}

pub fn suite(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| instance(&mut rng, i)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
