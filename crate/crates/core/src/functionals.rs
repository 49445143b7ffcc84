//! V-divergences, their robust version over the prior polytope, the robust
//! integral functional of `f(w, x) = -U(-x + B(w))` and its conjugate, and
//! uniform-integrability moduli.

use crate::error::{Error, Result};
use crate::model::{Claim, PriorSet};
use crate::utility::Utility;

/// Finite positive measure given by its scenario masses.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveMeasure {
    mass: Vec<f64>,
}

impl PositiveMeasure {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Domain("measure masses must be finite and nonnegative".into()));
        }
        Ok(Self { mass })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Density against `base`, `None` where the base has no mass.
    pub fn density(&self, base: &[f64]) -> Vec<Option<f64>> {
        self.mass
            .iter()
            .zip(base)
            .map(|(m, b)| if *b > 0.0 { Some(m / b) } else { None })
            .collect()
    }
}

/// `V(nu | P) = sum_w P_w V(nu_w / P_w)`, `+inf` unless nu << P.
pub fn v_divergence(utility: &Utility, nu: &[f64], p: &[f64]) -> f64 {
    debug_assert_eq!(nu.len(), p.len());
    nu.iter().zip(p).map(|(&y, &z)| utility.perspective(y, z)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrankWolfeOptions {
    pub max_iter: usize,
    pub gap_tol: f64,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gap_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustDivergence {
    pub value: f64,
    /// Mixture weights over the prior vertices at the minimizer.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Final Frank-Wolfe gap, an upper bound on the suboptimality.
    pub fw_gap: f64,
}

/// `inf_{P in hull(vertices)} V(nu | P)` with default Frank-Wolfe settings.
pub fn robust_v_divergence(utility: &Utility, nu: &[f64], priors: &PriorSet) -> RobustDivergence {
    robust_v_divergence_with(utility, nu, priors, FrankWolfeOptions::default())
}

/// Pairwise Frank-Wolfe over the vertex weights with exact line search.
///
/// The objective is convex in P. When `V(0) = +inf` any vertex charging a
/// null set of `nu` makes every mixture containing it infinite, so such
/// vertices are excluded before the iteration starts.
pub fn robust_v_divergence_with(
    utility: &Utility,
    nu: &[f64],
    priors: &PriorSet,
    opts: FrankWolfeOptions,
) -> RobustDivergence {
    let k = priors.vertex_count();
    let verts = priors.vertices();
    let allowed: Vec<usize> = if utility.v_at_zero().is_finite() {
        (0..k).collect()
    } else {
        (0..k)
            .filter(|&j| verts[j].iter().zip(nu).all(|(p, m)| *m > 0.0 || *p == 0.0))
            .collect()
    };
    let covered = |w: usize| allowed.iter().any(|&j| verts[j][w] > 0.0);
    let infeasible = allowed.is_empty() || nu.iter().enumerate().any(|(w, m)| *m > 0.0 && !covered(w));
    if infeasible {
        return RobustDivergence {
            value: f64::INFINITY,
            weights: vec![1.0 / k as f64; k],
            iterations: 0,
            fw_gap: f64::INFINITY,
        };
    }

    let mut w = vec![0.0; k];
    for &j in &allowed {
        w[j] = 1.0 / allowed.len() as f64;
    }
    let objective = |w: &[f64]| v_divergence(utility, nu, &priors.mixture(w));
    if allowed.len() == 1 {
        return RobustDivergence {
            value: objective(&w),
            weights: w,
            iterations: 0,
            fw_gap: 0.0,
        };
    }

    // d/dP_w of the perspective term; +inf signals leaving the domain
    let dz = |p: &[f64]| -> Vec<f64> {
        nu.iter()
            .zip(p)
            .map(|(&y, &z)| {
                if z > 0.0 {
                    utility.perspective_grad(y, z).1
                } else if y == 0.0 {
                    utility.v_at_zero()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).filter(|(x, _)| **x != 0.0).map(|(x, y)| x * y).sum()
    };

    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let p = priors.mixture(&w);
        let g = dz(&p);
        let c: Vec<f64> = allowed.iter().map(|&j| dot(&verts[j], &g)).collect();
        // toward: lowest index attaining the min; away: among active vertices
        let (mut s, mut a) = (allowed[0], None::<usize>);
        let mut cs = c[0];
        let mut ca = f64::NEG_INFINITY;
        for (idx, &j) in allowed.iter().enumerate() {
            if c[idx] < cs {
                cs = c[idx];
                s = j;
            }
            if w[j] > 0.0 && c[idx] > ca {
                ca = c[idx];
                a = Some(j);
            }
        }
        let current: f64 = allowed.iter().zip(&c).map(|(&j, cj)| w[j] * cj).sum();
        gap = current - cs;
        if !gap.is_finite() || gap <= opts.gap_tol {
            break;
        }
        let Some(a) = a else { break };
        if a == s {
            break;
        }
        let gamma_max = w[a];
        let slope = |gamma: f64| -> f64 {
            let mut ww = w.clone();
            ww[s] += gamma;
            ww[a] -= gamma;
            let pp = priors.mixture(&ww);
            let gg = dz(&pp);
            let d: f64 = (0..pp.len())
                .map(|x| {
                    let dv = verts[s][x] - verts[a][x];
                    if dv == 0.0 {
                        0.0
                    } else {
                        dv * gg[x]
                    }
                })
                .sum();
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        };
        let gamma = if slope(gamma_max) <= 0.0 && objective(&{
            let mut ww = w.clone();
            ww[s] += gamma_max;
            ww[a] = 0.0;
            ww
        })
        .is_finite()
        {
            gamma_max
        } else {
            let (mut lo, mut hi) = (0.0, gamma_max);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        };
        if gamma <= 0.0 {
            break;
        }
        w[s] += gamma;
        if gamma == gamma_max {
            w[a] = 0.0;
        } else {
            w[a] -= gamma;
        }
    }
    RobustDivergence {
        value: objective(&w),
        weights: w,
        iterations,
        fw_gap: gap.max(0.0),
    }
}

/// Integrand `f(w, x) = -U(-x + B(w))` attached to a utility and a claim.
pub fn utility_integrand<'a>(utility: &'a Utility, claim: &'a Claim) -> impl Fn(usize, f64) -> f64 + 'a {
    move |w, x| -utility.u(-x + claim.payoff()[w])
}

/// `sup_{P in hull} E_P[f(., X)]`, a vertex scan.
pub fn robust_integral<F: Fn(usize, f64) -> f64>(f: F, priors: &PriorSet, x: &[f64]) -> f64 {
    let fx: Vec<f64> = x.iter().enumerate().map(|(w, &v)| f(w, v)).collect();
    priors
        .vertices()
        .iter()
        .map(|p| p.iter().zip(&fx).filter(|(pi, _)| **pi != 0.0).map(|(pi, v)| pi * v).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `V(nu | P) + nu(B)` when finite; negative masses give `+inf`.
pub fn dual_functional_j(utility: &Utility, priors: &PriorSet, nu: &[f64], claim: &Claim) -> f64 {
    if nu.iter().any(|m| m.is_nan() || *m < 0.0) {
        return f64::INFINITY;
    }
    let d = robust_v_divergence(utility, nu, priors).value;
    if !d.is_finite() {
        return f64::INFINITY;
    }
    d + nu.iter().zip(claim.payoff()).map(|(m, b)| m * b).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub x_max: f64,
    /// Points per axis of the initial uniform grid.
    pub points: usize,
    /// Number of zoom levels, each halving the spacing around the incumbent.
    pub refinements: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            x_max: 10.0,
            points: 21,
            refinements: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateGapReport {
    /// Best value of <X, nu> - I(X) over the grid.
    pub grid_sup: f64,
    pub maximizer: Vec<f64>,
    /// The closed-form conjugate J(nu).
    pub dual_value: f64,
    /// grid_sup - dual_value; never above 1e-8 when Young holds.
    pub excess: f64,
    /// Grid sup keeps growing with the box: the conjugate is +inf.
    pub diverging: bool,
}

pub const MAX_GRID_SCENARIOS: usize = 6;

fn grid_sup<G: Fn(&[f64]) -> f64>(g: &G, n: usize, center: &[f64], half_width: f64, points: usize, bound: f64) -> (f64, Vec<f64>) {
    let h = if points > 1 { 2.0 * half_width / (points - 1) as f64 } else { 0.0 };
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut best = (f64::NEG_INFINITY, center.to_vec());
    loop {
        for i in 0..n {
            x[i] = (center[i] - half_width + h * idx[i] as f64).clamp(-bound, bound);
        }
        let v = g(&x);
        if v > best.0 {
            best = (v, x.clone());
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            idx[i] += 1;
            if idx[i] < points {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Brute-force conjugate of the robust integral functional at `nu`, by a
/// zooming grid on `[-x_max, x_max]^n`, compared with `J(nu)`.
pub fn conjugate_identity_check(
    utility: &Utility,
    priors: &PriorSet,
    claim: &Claim,
    nu: &[f64],
    opts: GridOptions,
) -> Result<ConjugateGapReport> {
    let n = nu.len();
    if n > MAX_GRID_SCENARIOS {
        return Err(Error::Domain(format!(
            "grid conjugate check supports at most {MAX_GRID_SCENARIOS} scenarios, got {n}"
        )));
    }
    if priors.scenario_count() != n || claim.len() != n {
        return Err(Error::dim("nu, priors and claim must share the scenario space"));
    }
    let f = utility_integrand(utility, claim);
    let run = |x_max: f64| {
        let g = |x: &[f64]| -> f64 {
            let lin: f64 = x.iter().zip(nu).map(|(a, b)| a * b).sum();
            lin - robust_integral(&f, priors, x)
        };
        let mut center = vec![0.0; n];
        let mut half = x_max;
        let mut h = 2.0 * x_max / (opts.points.max(2) - 1) as f64;
        let (mut best, mut arg) = grid_sup(&g, n, &center, half, opts.points.max(2), x_max);
        for _ in 0..opts.refinements {
            center.clone_from(&arg);
            half = 2.0 * h;
            h /= 2.0;
            let (b, a) = grid_sup(&g, n, &center, half, 9, x_max);
            if b > best {
                best = b;
                arg = a;
            }
        }
        (best, arg)
    };
    let (sup1, arg1) = run(opts.x_max);
    let (sup2, _) = run(2.0 * opts.x_max);
    let dual_value = dual_functional_j(utility, priors, nu, claim);
    let diverging = sup2 - sup1 > 1e-3 * opts.x_max;
    Ok(ConjugateGapReport {
        grid_sup: sup1,
        maximizer: arg1,
        dual_value,
        excess: sup1 - dual_value,
        diverging,
    })
}

/// `sup_P E_P[|X| 1{|X| >= N}]` over the prior vertices.
pub fn ui_modulus(priors: &PriorSet, x: &[f64], threshold: f64) -> f64 {
    priors
        .vertices()
        .iter()
        .map(|p| {
            p.iter()
                .zip(x)
                .filter(|(_, v)| v.abs() >= threshold)
                .map(|(pi, v)| pi * v.abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Modulus of the density family itself: `sup_P E[(dP/dR) 1{dP/dR >= N}]`
/// under the reference measure `R`.
pub fn density_ui_modulus(reference: &[f64], priors: &PriorSet, threshold: f64) -> f64 {
    priors
        .vertices()
        .iter()
        .map(|p| {
            p.iter()
                .zip(reference)
                .filter(|(pi, r)| **pi / **r >= threshold)
                .map(|(pi, _)| *pi)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}
